#ifndef UPLIFT_COMMANDS_H_
#define UPLIFT_COMMANDS_H_

// The four subcommands behind the `uplift` tool, callable in-process.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "uplift/bench.h"
#include "uplift/datagen.h"
#include "uplift/model.h"

namespace uplift {

struct GenOptions {
  ScenarioSpec scenario;
  std::filesystem::path out_dir = ".";
};

// Writes train.csv, test.csv and scenario.json into out_dir.
nlohmann::json cmd_gen(const GenOptions& options);

struct TrainCommandOptions {
  std::filesystem::path data;  // training CSV
  std::optional<int> arms;
  Backbone backbone = Backbone::kTarnetCfrnet;
  HeadKind head = HeadKind::kOfa;
  DiscKind disc = DiscKind::kNone;
  double lambda2 = 0.1;
  int degree = -1;
  std::size_t budget = kSyntheticBudget;
  TrainOptions train;
  std::filesystem::path out_dir = ".";
};

// Writes model.json and history.json into out_dir; returns the history.
nlohmann::json cmd_train(const TrainCommandOptions& options);

struct EvalCommandOptions {
  std::filesystem::path model;  // may be empty with use_truth
  std::filesystem::path data;   // test CSV
  bool use_truth = false;
  bool shuffle_scores = false;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = ".";
};

// Writes report.json and curve_arm<k>.csv per non-control arm; returns the
// report. Throws ConfigError when model and data disagree in shape.
nlohmann::json cmd_eval(const EvalCommandOptions& options);

// Runs the experiment matrix; returns the markdown table.
std::string cmd_bench(const ExperimentConfig& config);

}  // namespace uplift

#endif  // UPLIFT_COMMANDS_H_
