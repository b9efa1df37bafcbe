#include "uplift/commands.h"

#include <chrono>
#include <fstream>

#include "uplift/dataset.h"
#include "uplift/errors.h"
#include "uplift/eval.h"
#include "uplift/model_io.h"

namespace uplift {
namespace {

using nlohmann::json;

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << text;
  if (!os) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

json cmd_gen(const GenOptions& options) {
  options.scenario.validate();
  ensure_dir(options.out_dir);
  const Split split = generate(options.scenario);
  write_csv(split.train, options.out_dir / "train.csv");
  write_csv(split.test, options.out_dir / "test.csv");
  json sidecar = scenario_to_json(options.scenario);
  sidecar["name"] = options.scenario.name();
  sidecar["files"] = {{"train", "train.csv"}, {"test", "test.csv"}};
  sidecar["rows"] = {{"train", split.train.size()}, {"test", split.test.size()}};
  write_json_file(sidecar, options.out_dir / "scenario.json");
  return sidecar;
}

json cmd_train(const TrainCommandOptions& options) {
  const Dataset data = read_csv(options.data, options.arms);
  ModelSpec spec = budget_spec(options.backbone, options.head, options.disc, data.dim(),
                               std::size_t(data.arms), options.budget, options.degree);
  spec.weights.lambda2 = options.lambda2;
  spec.seed = options.train.seed;
  spec.validate();
  ensure_dir(options.out_dir);

  UpliftModel model(spec, data.dim(), std::size_t(data.arms));
  const auto start = std::chrono::steady_clock::now();
  const TrainResult result = train(model, data, options.train);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  save_model(model, options.out_dir / "model.json");

  json history = json::array();
  for (const EpochRecord& e : result.history) {
    history.push_back({{"epoch", e.epoch},
                       {"bce", e.bce},
                       {"disc", e.disc},
                       {"total", e.total},
                       {"val_bce", e.val_bce}});
  }
  json out = {
      {"model", spec.label()},
      {"param_count", model.param_count()},
      {"best_epoch", result.best_epoch},
      {"stopped_early", result.stopped_early},
      {"steps", result.steps},
      {"wall_seconds", seconds},
      {"history", history},
  };
  write_json_file(out, options.out_dir / "history.json");
  return out;
}

json cmd_eval(const EvalCommandOptions& options) {
  const Dataset test = read_csv(options.data);
  MqiniOptions mopts;
  mopts.shuffle_scores = options.shuffle_scores;
  mopts.shuffle_seed = options.seed;
  QiniReport report;
  if (options.use_truth) {
    if (!test.has_truth()) {
      throw ConfigError("--use-truth needs a test file with mu columns");
    }
    report = mqini_oracle(test, 0, mopts);
  } else {
    if (options.model.empty()) throw ConfigError("eval needs a model artifact");
    const UpliftModel model = load_model(options.model);
    if (model.dim() != test.dim() || model.arms() != std::size_t(test.arms)) {
      throw ConfigError("model expects d=" + std::to_string(model.dim()) +
                        ", m=" + std::to_string(model.arms()) + " but '" +
                        options.data.string() + "' has d=" + std::to_string(test.dim()) +
                        ", m=" + std::to_string(test.arms));
    }
    report = mqini(model, test, 0, mopts);
  }
  ensure_dir(options.out_dir);
  const json j = report_to_json(report);
  write_json_file(j, options.out_dir / "report.json");
  for (const ArmQini& a : report.arms) {
    write_text(options.out_dir / ("curve_arm" + std::to_string(a.arm) + ".csv"),
               curve_to_csv(a.curve));
  }
  return j;
}

std::string cmd_bench(const ExperimentConfig& config) {
  return table_to_markdown(run_bench(config).table);
}

}  // namespace uplift
