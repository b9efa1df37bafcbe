// uplift: dataset generation, training, evaluation and benchmark matrices.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "uplift/bench.h"
#include "uplift/commands.h"
#include "uplift/errors.h"
#include "uplift/log.h"
#include "uplift/model_io.h"

namespace {

using namespace uplift;

struct Flags {
  // gen
  std::string kind = "rct";
  bool with_iv = false;
  std::size_t n_train = 10000;
  std::size_t n_test = 10000;
  double noise_rate = 0.1;
  // train
  std::string data;
  int arms = 0;
  std::string backbone = "tarnet";
  std::string head = "ofa";
  std::string disc = "none";
  double lambda2 = 0.1;
  int degree = -1;
  int epochs = 300;
  std::size_t batch = 256;
  double lr = 1e-4;
  int patience = 30;
  double val_fraction = 0.1;
  std::size_t budget = kSyntheticBudget;
  // eval
  std::string model;
  bool use_truth = false;
  bool shuffle_scores = false;
  // bench
  std::string config;
  std::string preset = "table1";
  std::vector<std::string> kinds;
  std::vector<std::string> models;
  std::vector<std::uint64_t> seeds;
  std::vector<double> lambda2_grid;
  bool no_oracle = false;
  int workers = 0;
  // shared
  std::uint64_t seed = 1;
  std::string out = ".";
  bool verbose = false;
  bool quiet = false;
};

int run_gen(const Flags& f) {
  GenOptions o;
  o.scenario = parse_scenario_name(f.kind);
  if (f.with_iv) o.scenario.with_iv = true;
  o.scenario.seed = f.seed;
  o.scenario.n_train = f.n_train;
  o.scenario.n_test = f.n_test;
  o.scenario.noise_rate = f.noise_rate;
  o.out_dir = f.out;
  const auto sidecar = cmd_gen(o);
  std::cout << "wrote " << (o.out_dir / "train.csv").string() << ", "
            << (o.out_dir / "test.csv").string() << " (" << sidecar.at("name").get<std::string>()
            << ", seed " << f.seed << ")\n";
  return 0;
}

int run_train(const Flags& f) {
  TrainCommandOptions o;
  o.data = f.data;
  if (f.arms > 0) o.arms = f.arms;
  o.backbone = parse_backbone(f.backbone);
  o.head = parse_head_kind(f.head);
  o.disc = parse_disc_kind(f.disc);
  o.lambda2 = f.lambda2;
  o.degree = f.degree;
  o.budget = f.budget;
  o.train.epochs = f.epochs;
  o.train.batch_size = f.batch;
  o.train.adam.learning_rate = f.lr;
  o.train.patience = f.patience;
  o.train.val_fraction = f.val_fraction;
  o.train.seed = f.seed;
  o.out_dir = f.out;
  const auto h = cmd_train(o);
  std::cout << h.at("model").get<std::string>() << ": " << h.at("param_count").get<std::size_t>()
            << " params, " << h.at("history").size() << " epochs, best epoch "
            << h.at("best_epoch").get<int>() << "\n";
  return 0;
}

int run_eval(const Flags& f) {
  EvalCommandOptions o;
  o.model = f.model;
  o.data = f.data;
  o.use_truth = f.use_truth;
  o.shuffle_scores = f.shuffle_scores;
  o.seed = f.seed;
  o.out_dir = f.out;
  const auto report = cmd_eval(o);
  for (const auto& a : report.at("arms")) {
    std::cout << "arm " << a.at("arm").get<int>() << " qini " << a.at("qini").get<double>()
              << "\n";
  }
  std::cout << "mqini " << report.at("mqini").get<double>() << "\n";
  return 0;
}

int run_bench_cmd(const Flags& f, const CLI::App& sub) {
  ExperimentConfig c;
  if (!f.config.empty()) {
    c = config_from_json(read_json_file(f.config));
  } else if (f.preset == "table23") {
    c = table23_config();
  } else if (f.preset != "table1") {
    throw ConfigError("unknown preset '" + f.preset + "' (table1, table23)");
  }
  auto given = [&](const char* name) { return sub.count(name) > 0; };
  if (given("--kind")) c.scenarios = f.kinds;
  if (given("--model")) c.models = f.models;
  if (given("--seeds")) c.seeds = f.seeds;
  if (given("--epochs")) c.epochs = f.epochs;
  if (given("--batch")) c.batch_size = f.batch;
  if (given("--lr")) c.learning_rate = f.lr;
  if (given("--lambda2")) c.lambda2_grid = f.lambda2_grid;
  if (given("--patience")) c.patience = f.patience;
  if (given("--n-train")) c.n_train = f.n_train;
  if (given("--n-test")) c.n_test = f.n_test;
  if (given("--budget")) c.budget = f.budget;
  if (given("--out")) c.out_dir = f.out;
  if (given("--workers")) c.workers = f.workers;
  if (f.no_oracle) c.oracle_row = false;
  std::cout << cmd_bench(c);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-treatment uplift modeling: FA, SA and OFA heads"};
  app.require_subcommand(1);
  Flags f;
  app.add_flag("-v,--verbose", f.verbose, "Log progress");
  app.add_flag("-q,--quiet", f.quiet, "Suppress warnings");

  auto* gen = app.add_subcommand("gen", "Generate a synthetic train/test split");
  gen->add_option("--kind", f.kind, "rct, rct_noise, rct_nm, obs, mix (or obs_iv, mix_iv)")
      ->capture_default_str();
  gen->add_flag("--with-iv", f.with_iv, "Use the last covariate as an instrument");
  gen->add_option("--seed", f.seed)->capture_default_str();
  gen->add_option("--n-train", f.n_train)->capture_default_str();
  gen->add_option("--n-test", f.n_test)->capture_default_str();
  gen->add_option("--noise-rate", f.noise_rate, "Label flip rate for rct_noise")
      ->capture_default_str();
  gen->add_option("--out", f.out, "Output directory")->capture_default_str();

  auto* train = app.add_subcommand("train", "Train a model on a CSV dataset");
  train->add_option("--data", f.data, "Training CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--arms", f.arms, "Arm count (default: inferred)");
  train->add_option("--backbone", f.backbone, "slearner, bnn, tarnet, cfrnet, drcfr")
      ->capture_default_str();
  train->add_option("--head", f.head, "fa, sa, ofa")->capture_default_str();
  train->add_option("--disc", f.disc, "none, mmd, wass")->capture_default_str();
  train->add_option("--lambda2", f.lambda2, "Discrepancy weight")->capture_default_str();
  train->add_option("--degree", f.degree, "OFA degree (-1: arms - 1)")->capture_default_str();
  train->add_option("--epochs", f.epochs)->capture_default_str();
  train->add_option("--batch", f.batch)->capture_default_str();
  train->add_option("--lr", f.lr)->capture_default_str();
  train->add_option("--patience", f.patience)->capture_default_str();
  train->add_option("--val-fraction", f.val_fraction)->capture_default_str();
  train->add_option("--budget", f.budget, "Target parameter count")->capture_default_str();
  train->add_option("--seed", f.seed)->capture_default_str();
  train->add_option("--out", f.out, "Output directory")->capture_default_str();

  auto* eval = app.add_subcommand("eval", "Score a model (or the truth) with mQini");
  eval->add_option("--model", f.model, "Model artifact (model.json)");
  eval->add_option("--data", f.data, "Test CSV")->required()->check(CLI::ExistingFile);
  eval->add_flag("--use-truth", f.use_truth, "Score with the stored truth matrix");
  eval->add_flag("--shuffle-scores", f.shuffle_scores, "Permute scores (null model)");
  eval->add_option("--seed", f.seed, "Shuffle seed")->capture_default_str();
  eval->add_option("--out", f.out, "Output directory")->capture_default_str();

  auto* bench = app.add_subcommand("bench", "Run a (scenario, model, seed) matrix");
  bench->add_option("--config", f.config, "Experiment config JSON")->check(CLI::ExistingFile);
  bench->add_option("--preset", f.preset, "table1 or table23")->capture_default_str();
  bench->add_option("--kind", f.kinds, "Scenarios")->delimiter(',');
  bench->add_option("--model", f.models, "Models, e.g. tarnet+ofa,cfrnet+sa+wass")
      ->delimiter(',');
  bench->add_option("--seeds", f.seeds)->delimiter(',');
  bench->add_option("--epochs", f.epochs);
  bench->add_option("--batch", f.batch);
  bench->add_option("--lr", f.lr);
  bench->add_option("--lambda2", f.lambda2_grid, "lambda2 grid")->delimiter(',');
  bench->add_option("--patience", f.patience);
  bench->add_option("--n-train", f.n_train);
  bench->add_option("--n-test", f.n_test);
  bench->add_option("--budget", f.budget);
  bench->add_option("--out", f.out, "Output directory");
  bench->add_option("--workers", f.workers, "Concurrent runs (default UPLIFT_BENCH_WORKERS or 1)");
  bench->add_flag("--no-oracle", f.no_oracle, "Omit the truth row");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help and version requests exit 0; everything else is a usage error.
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  log::set_level(f.quiet ? log::Level::kQuiet
                         : (f.verbose ? log::Level::kInfo : log::Level::kWarning));
  try {
    if (*gen) return run_gen(f);
    if (*train) return run_train(f);
    if (*eval) return run_eval(f);
    if (*bench) return run_bench_cmd(f, *bench);
  } catch (const ConfigError& e) {
    std::cerr << "uplift: config error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "uplift: parse error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "uplift: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
