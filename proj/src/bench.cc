#include "uplift/bench.h"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "uplift/datagen.h"
#include "uplift/errors.h"
#include "uplift/eval.h"
#include "uplift/log.h"
#include "uplift/model_io.h"

namespace uplift {
namespace {

using nlohmann::json;

constexpr const char* kOracleKey = "oracle";

std::size_t dense_params(const std::vector<std::size_t>& dims) {
  std::size_t total = 0;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) total += dims[k] * dims[k + 1] + dims[k + 1];
  return total;
}

std::size_t head_in_dim(const ModelSpec& spec, std::size_t dim) {
  switch (spec.backbone) {
    case Backbone::kSlearner:
      return dim;
    case Backbone::kDrcfr:
      return 2 * (spec.rep_out / 3);
    default:
      return spec.rep_out;
  }
}

std::string format_double(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::string fixed4(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

struct Task {
  std::string scenario;
  std::optional<Variant> variant;  // empty for the oracle row
  std::uint64_t seed = 0;
  std::filesystem::path path;
};

void write_atomically(const json& j, const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  write_json_file(j, tmp);
  std::filesystem::rename(tmp, path);
}

std::optional<RunResult> read_run(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  try {
    return run_from_json(read_json_file(path));
  } catch (const Error& e) {
    log::warning("ignoring unreadable result " + path.string() + ": " + e.what());
    return std::nullopt;
  }
}

struct Row {
  std::string key;
  std::string label;
  std::optional<Variant> variant;
};

std::vector<Row> table_rows(const ExperimentConfig& config) {
  const bool with_lambda = config.lambda2_grid.size() > 1;
  std::vector<Row> rows;
  for (const std::string& name : config.models) {
    Variant v = parse_variant(name);
    if (v.disc == DiscKind::kNone) {
      rows.push_back({v.key(false), v.label(false), v});
      continue;
    }
    for (double lambda2 : config.lambda2_grid) {
      v.lambda2 = lambda2;
      rows.push_back({v.key(with_lambda), v.label(with_lambda), v});
    }
  }
  if (config.oracle_row) rows.push_back({kOracleKey, "Oracle (truth)", std::nullopt});
  return rows;
}

ScenarioSpec scenario_for(const ExperimentConfig& config, const std::string& name,
                          std::uint64_t seed) {
  ScenarioSpec spec = parse_scenario_name(name);
  spec.n_train = config.n_train;
  spec.n_test = config.n_test;
  spec.seed = seed;
  spec.validate();
  return spec;
}

}  // namespace

std::size_t count_params(const ModelSpec& spec, std::size_t dim, std::size_t arms) {
  std::size_t total = 0;
  if (spec.backbone != Backbone::kSlearner) {
    std::vector<std::size_t> dims{dim};
    dims.insert(dims.end(), spec.rep_hidden.begin(), spec.rep_hidden.end());
    dims.push_back(spec.rep_out);
    total += dense_params(dims);
  }
  const std::size_t in = head_in_dim(spec, dim);
  auto head_dims = [&](std::size_t first, std::size_t last) {
    std::vector<std::size_t> dims{first};
    dims.insert(dims.end(), spec.head_hidden.begin(), spec.head_hidden.end());
    dims.push_back(last);
    return dims;
  };
  switch (spec.head) {
    case HeadKind::kFa:
      total += dense_params(head_dims(in + arms, 1));
      break;
    case HeadKind::kSa:
      total += arms * dense_params(head_dims(in, 1));
      break;
    case HeadKind::kOfa: {
      const int degree = spec.ofa_degree < 0 ? int(arms) - 1 : spec.ofa_degree;
      total += dense_params(head_dims(in, std::size_t(degree) + 1));
      break;
    }
  }
  return total;
}

ModelSpec budget_spec(Backbone backbone, HeadKind head, DiscKind disc, std::size_t dim,
                      std::size_t arms, std::size_t budget, int ofa_degree) {
  ModelSpec spec;
  spec.backbone = backbone;
  spec.head = head;
  spec.disc = disc;
  spec.ofa_degree = ofa_degree;
  spec.rep_hidden = {128};
  spec.rep_out = backbone == Backbone::kDrcfr ? 192 : 128;
  auto total = [&](std::size_t width) {
    spec.head_hidden = {width, width};
    return count_params(spec, dim, arms);
  };
  // Parameter count grows with the width; find the first width at or past
  // the budget and keep whichever neighbour lands closer.
  std::size_t lo = 1, hi = 4096;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (total(mid) < budget) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  std::size_t best = lo;
  if (lo > 1) {
    const auto over = double(total(lo)) - double(budget);
    const auto under = double(budget) - double(total(lo - 1));
    if (under < over) best = lo - 1;
  }
  spec.head_hidden = {best, best};
  spec.validate();
  return spec;
}

std::string Variant::key(bool with_lambda) const {
  std::string out;
  switch (backbone) {
    case Backbone::kSlearner:
      out = "slearner";
      break;
    case Backbone::kBnn:
      out = "bnn";
      break;
    case Backbone::kTarnetCfrnet:
      out = disc == DiscKind::kNone ? "tarnet" : "cfrnet";
      break;
    case Backbone::kDrcfr:
      out = "drcfr";
      break;
  }
  out += '+';
  out += to_string(head);
  if (disc != DiscKind::kNone) {
    out += '+';
    out += to_string(disc);
    if (with_lambda) out += "@" + format_double(lambda2);
  }
  return out;
}

std::string Variant::label(bool with_lambda) const {
  ModelSpec spec;
  spec.backbone = backbone;
  spec.head = head;
  spec.disc = disc;
  std::string out = spec.label();
  if (disc != DiscKind::kNone && with_lambda) out += " (lambda2=" + format_double(lambda2) + ")";
  return out;
}

Variant parse_variant(const std::string& name) {
  std::vector<std::string> parts;
  std::stringstream ss(name);
  for (std::string part; std::getline(ss, part, '+');) parts.push_back(part);
  if (parts.size() < 2 || parts.size() > 3) {
    throw ConfigError("model '" + name + "': expected backbone+head[+disc]");
  }
  Variant v;
  v.backbone = parse_backbone(parts[0]);
  v.head = parse_head_kind(parts[1]);
  if (parts.size() == 3) {
    std::string disc = parts[2];
    if (const auto at = disc.find('@'); at != std::string::npos) {
      const std::string value = disc.substr(at + 1);
      const auto r = std::from_chars(value.data(), value.data() + value.size(), v.lambda2);
      if (r.ec != std::errc() || r.ptr != value.data() + value.size()) {
        throw ConfigError("model '" + name + "': bad lambda2 '" + value + "'");
      }
      disc.resize(at);
    }
    v.disc = parse_disc_kind(disc);
  }
  ModelSpec check;
  check.backbone = v.backbone;
  check.head = v.head;
  check.disc = v.disc;
  check.rep_out = 192;
  check.validate();
  return v;
}

void ExperimentConfig::validate() const {
  if (scenarios.empty()) throw ConfigError("experiment: no scenarios");
  if (models.empty() && !oracle_row) throw ConfigError("experiment: no models");
  if (seeds.empty()) throw ConfigError("experiment: no seeds");
  if (epochs < 0) throw ConfigError("experiment: epochs must be >= 0");
  if (batch_size == 0) throw ConfigError("experiment: batch size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("experiment: learning rate must be positive");
  if (lambda2_grid.empty()) throw ConfigError("experiment: empty lambda2 grid");
  for (double l : lambda2_grid) {
    if (!(l >= 0.0)) throw ConfigError("experiment: lambda2 values must be >= 0");
  }
  if (val_fraction < 0.0 || val_fraction >= 1.0) {
    throw ConfigError("experiment: val_fraction must be in [0, 1)");
  }
  for (const std::string& s : scenarios) parse_scenario_name(s);
  for (const std::string& m : models) parse_variant(m);
}

json config_to_json(const ExperimentConfig& c) {
  return {
      {"scenarios", c.scenarios},
      {"models", c.models},
      {"seeds", c.seeds},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"learning_rate", c.learning_rate},
      {"lambda2_grid", c.lambda2_grid},
      {"patience", c.patience},
      {"val_fraction", c.val_fraction},
      {"n_train", c.n_train},
      {"n_test", c.n_test},
      {"budget", c.budget},
      {"oracle_row", c.oracle_row},
      {"out_dir", c.out_dir.string()},
      {"workers", c.workers},
  };
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  auto take = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  try {
    take("scenarios", c.scenarios);
    take("models", c.models);
    take("seeds", c.seeds);
    take("epochs", c.epochs);
    take("batch_size", c.batch_size);
    take("learning_rate", c.learning_rate);
    take("lambda2_grid", c.lambda2_grid);
    take("patience", c.patience);
    take("val_fraction", c.val_fraction);
    take("n_train", c.n_train);
    take("n_test", c.n_test);
    take("budget", c.budget);
    take("oracle_row", c.oracle_row);
    take("workers", c.workers);
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  return c;
}

ExperimentConfig table1_config() { return ExperimentConfig{}; }

ExperimentConfig table23_config() {
  ExperimentConfig c;
  c.scenarios = {"obs", "obs_iv", "mix", "mix_iv"};
  c.models = {"slearner+fa",   "bnn+fa",          "bnn+fa+mmd",      "bnn+fa+wass",
              "tarnet+sa",     "cfrnet+sa+mmd",   "cfrnet+sa+wass",  "tarnet+ofa",
              "cfrnet+ofa+mmd", "cfrnet+ofa+wass", "drcfr+sa",        "drcfr+sa+mmd",
              "drcfr+sa+wass", "drcfr+ofa",       "drcfr+ofa+mmd",   "drcfr+ofa+wass"};
  return c;
}

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("UPLIFT_BENCH_WORKERS")) {
    int value = 0;
    const auto r = std::from_chars(env, env + std::char_traits<char>::length(env), value);
    if (r.ec == std::errc() && value > 0) return value;
    log::warning("ignoring UPLIFT_BENCH_WORKERS='" + std::string(env) + "'");
  }
  return 1;
}

json run_to_json(const RunResult& r) {
  json j = {
      {"scenario", r.scenario}, {"model", r.model},         {"seed", r.seed},
      {"ok", r.ok},             {"mqini", r.mqini},         {"arm_qini", r.arm_qini},
      {"param_count", r.param_count}, {"best_epoch", r.best_epoch},
      {"epochs_run", r.epochs_run},   {"wall_seconds", r.wall_seconds},
  };
  if (!r.ok) j["error"] = r.error;
  return j;
}

RunResult run_from_json(const json& j) {
  RunResult r;
  try {
    r.scenario = j.at("scenario").get<std::string>();
    r.model = j.at("model").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.ok = j.at("ok").get<bool>();
    r.mqini = j.value("mqini", 0.0);
    r.arm_qini = j.value("arm_qini", std::vector<double>{});
    r.param_count = j.value("param_count", std::size_t(0));
    r.best_epoch = j.value("best_epoch", -1);
    r.epochs_run = j.value("epochs_run", 0);
    r.wall_seconds = j.value("wall_seconds", 0.0);
    r.error = j.value("error", std::string());
  } catch (const json::exception& e) {
    throw ParseError(std::string("run result: ") + e.what());
  }
  return r;
}

RunResult run_one(const ExperimentConfig& config, const std::string& scenario,
                  const Variant& variant, std::uint64_t seed) {
  RunResult r;
  r.scenario = scenario;
  r.model = variant.key(config.lambda2_grid.size() > 1);
  r.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  try {
    const Split split = generate(scenario_for(config, scenario, seed));
    ModelSpec spec = budget_spec(variant.backbone, variant.head, variant.disc, split.train.dim(),
                                 std::size_t(split.train.arms), config.budget);
    if (variant.disc != DiscKind::kNone) spec.weights.lambda2 = variant.lambda2;
    spec.seed = seed;
    UpliftModel model(spec, split.train.dim(), std::size_t(split.train.arms));
    TrainOptions opts;
    opts.epochs = config.epochs;
    opts.batch_size = config.batch_size;
    opts.adam.learning_rate = config.learning_rate;
    opts.val_fraction = config.val_fraction;
    opts.patience = config.patience;
    opts.seed = seed;
    const TrainResult trained = train(model, split.train, opts);
    const QiniReport report = mqini(model, split.test);
    r.mqini = report.mqini;
    for (const ArmQini& a : report.arms) r.arm_qini.push_back(a.qini);
    r.param_count = model.param_count();
    r.best_epoch = trained.best_epoch;
    r.epochs_run = int(trained.history.size());
    r.ok = std::isfinite(r.mqini);
    if (!r.ok) r.error = "non-finite mqini";
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  r.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

RunResult run_oracle(const ExperimentConfig& config, const std::string& scenario,
                     std::uint64_t seed) {
  RunResult r;
  r.scenario = scenario;
  r.model = kOracleKey;
  r.seed = seed;
  try {
    const Dataset test = generate(scenario_for(config, scenario, seed)).test;
    const QiniReport report = mqini_oracle(test);
    r.mqini = report.mqini;
    for (const ArmQini& a : report.arms) r.arm_qini.push_back(a.qini);
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  return r;
}

const CellStats& BenchTable::cell(const std::string& row_key, const std::string& scenario) const {
  const auto row = cells.find(row_key);
  if (row == cells.end()) throw ContractError("no table row '" + row_key + "'");
  const auto c = row->second.find(scenario);
  if (c == row->second.end()) throw ContractError("no table column '" + scenario + "'");
  return c->second;
}

std::filesystem::path run_path(const ExperimentConfig& config, const std::string& scenario,
                               const std::string& model_key, std::uint64_t seed) {
  return config.out_dir / "runs" / scenario / model_key / ("seed" + std::to_string(seed) + ".json");
}

BenchTable assemble_table(const ExperimentConfig& config) {
  BenchTable table;
  table.scenarios = config.scenarios;
  for (const Row& row : table_rows(config)) {
    table.row_keys.push_back(row.key);
    table.row_labels.push_back(row.label);
    for (const std::string& scenario : config.scenarios) {
      CellStats stats;
      for (std::uint64_t seed : config.seeds) {
        const auto run = read_run(run_path(config, scenario, row.key, seed));
        if (!run) {
          ++stats.missing;
        } else if (!run->ok) {
          ++stats.failed;
        } else {
          stats.values.push_back(run->mqini);
        }
      }
      if (!stats.values.empty()) {
        const double n = double(stats.values.size());
        stats.mean = std::accumulate(stats.values.begin(), stats.values.end(), 0.0) / n;
        if (stats.values.size() > 1) {
          double ss = 0.0;
          for (double v : stats.values) ss += (v - stats.mean) * (v - stats.mean);
          stats.stdev = std::sqrt(ss / (n - 1.0));
        }
      }
      table.cells[row.key][scenario] = std::move(stats);
    }
  }
  return table;
}

std::string table_to_markdown(const BenchTable& table) {
  std::string out = "| Model |";
  for (const std::string& s : table.scenarios) out += " " + s + " |";
  out += "\n|---|";
  for (std::size_t i = 0; i < table.scenarios.size(); ++i) out += "---|";
  out += '\n';
  for (std::size_t r = 0; r < table.row_keys.size(); ++r) {
    out += "| " + table.row_labels[r] + " |";
    for (const std::string& s : table.scenarios) {
      const CellStats& c = table.cell(table.row_keys[r], s);
      const std::size_t expected = c.values.size() + std::size_t(c.failed + c.missing);
      std::string text;
      if (c.values.empty()) {
        text = c.failed > 0 ? "failed" : "n/a";
      } else {
        text = fixed4(c.mean) + " ± " + fixed4(c.stdev);
        if (c.values.size() != expected) {
          text += " (" + std::to_string(c.values.size()) + "/" + std::to_string(expected) + ")";
        }
      }
      out += " " + text + " |";
    }
    out += '\n';
  }
  return out;
}

std::string table_to_csv(const BenchTable& table) {
  std::string out = "scenario,model,label,mean,std,n,failed,missing\n";
  for (std::size_t r = 0; r < table.row_keys.size(); ++r) {
    for (const std::string& s : table.scenarios) {
      const CellStats& c = table.cell(table.row_keys[r], s);
      out += s + "," + table.row_keys[r] + ",\"" + table.row_labels[r] + "\",";
      if (c.values.empty()) {
        out += ",,";
      } else {
        out += format_double(c.mean) + "," + format_double(c.stdev) + ",";
      }
      out += std::to_string(c.values.size()) + "," + std::to_string(c.failed) + "," +
             std::to_string(c.missing) + "\n";
    }
  }
  return out;
}

BenchSummary run_bench(const ExperimentConfig& config) {
  config.validate();
  std::filesystem::create_directories(config.out_dir);
  write_json_file(config_to_json(config), config.out_dir / "config.json");

  BenchSummary summary;
  std::vector<Task> tasks;
  for (const Row& row : table_rows(config)) {
    for (const std::string& scenario : config.scenarios) {
      for (std::uint64_t seed : config.seeds) {
        Task task{scenario, row.variant, seed, run_path(config, scenario, row.key, seed)};
        const auto existing = read_run(task.path);
        if (existing && existing->ok) {
          ++summary.runs_reused;
          continue;
        }
        tasks.push_back(std::move(task));
      }
    }
  }

  const int workers = std::max(1, std::min<int>(resolve_workers(config.workers),
                                                int(std::max<std::size_t>(tasks.size(), 1))));
  log::info("bench: " + std::to_string(tasks.size()) + " runs to execute, " +
            std::to_string(summary.runs_reused) + " reused, " + std::to_string(workers) +
            " worker(s)");
  std::atomic<std::size_t> next{0};
  std::atomic<int> done{0};
  std::mutex io_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const Task& task = tasks[i];
      const RunResult result = task.variant ? run_one(config, task.scenario, *task.variant, task.seed)
                                            : run_oracle(config, task.scenario, task.seed);
      std::lock_guard<std::mutex> lock(io_mutex);
      write_atomically(run_to_json(result), task.path);
      const int finished = ++done;
      std::string line = "[" + std::to_string(finished) + "/" + std::to_string(tasks.size()) +
                         "] " + task.scenario + " " + result.model + " seed " +
                         std::to_string(task.seed);
      if (result.ok) {
        line += " mqini " + fixed4(result.mqini);
        log::info(line);
      } else {
        log::warning(line + " failed: " + result.error);
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  summary.runs_executed = int(tasks.size());

  summary.table = assemble_table(config);
  auto write_text = [](const std::filesystem::path& path, const std::string& text) {
    std::FILE* f = std::fopen(path.string().c_str(), "wb");
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
    if (std::fclose(f) != 0 || !ok) throw IoError("failed writing '" + path.string() + "'");
  };
  write_text(config.out_dir / "table.md", table_to_markdown(summary.table));
  write_text(config.out_dir / "table.csv", table_to_csv(summary.table));
  return summary;
}

}  // namespace uplift
