#ifndef UPLIFT_BENCH_H_
#define UPLIFT_BENCH_H_

// Seeded (scenario, model, seed) experiment matrices with resumable per-run
// result files and mean/std tables.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "uplift/model.h"

namespace uplift {

inline constexpr std::size_t kSyntheticBudget = 90000;
inline constexpr std::size_t kRealScaleBudget = 150000;
inline constexpr std::size_t kRealScaleDim = 47;

// Exact parameter count of the model `spec` describes, without building it.
std::size_t count_params(const ModelSpec& spec, std::size_t dim, std::size_t arms);

// Default architecture for a backbone/head/discrepancy triple with the two
// equal head hidden layers sized so the total is as close to `budget` as
// possible. Representation nets are d -> 128 -> 128 (DR-CFR: d -> 128 -> 192,
// three blocks of 64). `ofa_degree` < 0 means arms - 1.
ModelSpec budget_spec(Backbone backbone, HeadKind head, DiscKind disc, std::size_t dim,
                      std::size_t arms, std::size_t budget = kSyntheticBudget,
                      int ofa_degree = -1);

// A model column of the experiment matrix, e.g. "cfrnet+ofa+wass".
struct Variant {
  Backbone backbone = Backbone::kTarnetCfrnet;
  HeadKind head = HeadKind::kOfa;
  DiscKind disc = DiscKind::kNone;
  double lambda2 = 0.0;

  // Canonical lowercase key; with `with_lambda` a "@<lambda2>" suffix.
  std::string key(bool with_lambda) const;
  std::string label(bool with_lambda) const;
};

// "backbone+head[+disc]" with backbone in {slearner, bnn, tarnet, cfrnet,
// drcfr}, head in {fa, sa, ofa}, disc in {mmd, wass}.
Variant parse_variant(const std::string& name);

struct ExperimentConfig {
  std::vector<std::string> scenarios{"rct", "rct_noise", "rct_nm"};
  std::vector<std::string> models{"slearner+fa", "bnn+fa",     "tarnet+sa",
                                  "drcfr+sa",    "tarnet+ofa", "drcfr+ofa"};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  int epochs = 300;
  std::size_t batch_size = 256;
  double learning_rate = 1e-4;
  // Expanded for every model with a discrepancy.
  std::vector<double> lambda2_grid{0.1};
  int patience = 30;
  double val_fraction = 0.1;
  std::size_t n_train = 10000;
  std::size_t n_test = 10000;
  std::size_t budget = kSyntheticBudget;
  // Adds a row scoring the test split with its truth matrix.
  bool oracle_row = true;
  std::filesystem::path out_dir = "bench_out";
  // 0: UPLIFT_BENCH_WORKERS, else 1.
  int workers = 0;

  void validate() const;
};

nlohmann::json config_to_json(const ExperimentConfig& config);
// Missing keys keep their defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);

// The default matrix: randomized scenarios, no discrepancies.
ExperimentConfig table1_config();
// Observational and mixed scenarios, with and without IV, including the
// balanced (MMD / Wasserstein) variants.
ExperimentConfig table23_config();

// Resolved worker count: explicit value, else UPLIFT_BENCH_WORKERS, else 1.
int resolve_workers(int requested);

struct RunResult {
  std::string scenario;
  std::string model;  // variant key, or "oracle"
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double mqini = 0.0;
  std::vector<double> arm_qini;
  std::size_t param_count = 0;
  int best_epoch = -1;
  int epochs_run = 0;
  double wall_seconds = 0.0;  // informational; never enters a table
};

nlohmann::json run_to_json(const RunResult& run);
RunResult run_from_json(const nlohmann::json& j);

// Trains and scores one triple. Failures are captured in the result.
RunResult run_one(const ExperimentConfig& config, const std::string& scenario,
                  const Variant& variant, std::uint64_t seed);
RunResult run_oracle(const ExperimentConfig& config, const std::string& scenario,
                     std::uint64_t seed);

struct CellStats {
  std::vector<double> values;  // successful seeds, in seed order
  int failed = 0;
  int missing = 0;
  double mean = 0.0;
  double stdev = 0.0;  // sample standard deviation; 0 for a single value
};

struct BenchTable {
  std::vector<std::string> scenarios;
  std::vector<std::string> row_keys;
  std::vector<std::string> row_labels;
  // cells[row_key][scenario]
  std::map<std::string, std::map<std::string, CellStats>> cells;

  const CellStats& cell(const std::string& row_key, const std::string& scenario) const;
};

std::string table_to_markdown(const BenchTable& table);
// scenario,model,label,mean,std,n,failed,missing
std::string table_to_csv(const BenchTable& table);

struct BenchSummary {
  BenchTable table;
  int runs_executed = 0;
  int runs_reused = 0;
};

// Runs every missing triple (up to `workers` at a time), then assembles the
// table from the result files and writes table.md and table.csv.
BenchSummary run_bench(const ExperimentConfig& config);

// Reads whatever result files exist without running anything.
BenchTable assemble_table(const ExperimentConfig& config);

std::filesystem::path run_path(const ExperimentConfig& config, const std::string& scenario,
                               const std::string& model_key, std::uint64_t seed);

}  // namespace uplift

#endif  // UPLIFT_BENCH_H_
