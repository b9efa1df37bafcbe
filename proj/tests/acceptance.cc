// Acceptance runner: one PASS/FAIL line per criterion, details indented
// below it. Benchmark matrices are cached under UPLIFT_ACCEPTANCE_CACHE
// (default: the build tree) and resumed, so only missing runs are trained.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "support.h"
#include "uplift/bench.h"
#include "uplift/commands.h"
#include "uplift/datagen.h"
#include "uplift/eval.h"
#include "uplift/heads.h"
#include "uplift/log.h"
#include "uplift/losses.h"
#include "uplift/model_io.h"

using namespace uplift;
namespace fs = std::filesystem;

namespace {

int failures = 0;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

void report(const std::string& name, bool pass, const std::vector<std::string>& details) {
  std::printf("%s %s\n", pass ? "PASS" : "FAIL", name.c_str());
  for (const std::string& d : details) std::printf("    %s\n", d.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

fs::path cache_dir() {
  if (const char* env = std::getenv("UPLIFT_ACCEPTANCE_CACHE")) return env;
  return UPLIFT_ACCEPTANCE_DEFAULT_CACHE;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void gradient_suite() {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string worst_label;
  int checked = 0;
  for (const testing::Combo& c : testing::all_combos()) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const ModelSpec spec = testing::small_spec(c.backbone, c.head, c.disc, seed);
      const double err = testing::model_gradient_error(spec, 3, 5, seed);
      ++checked;
      if (!(err <= worst)) {
        worst = err;
        worst_label = spec.label() + " seed " + std::to_string(seed);
      }
    }
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report("gradient suite: analytic vs central differences, all combinations x 10 seeds",
         worst < 1e-4 && seconds < 60.0,
         {std::to_string(checked) + " checks, max relative error " + fmt("%.3e", worst) + " (" +
              worst_label + ")",
          "runtime " + fmt("%.1f", seconds) + " s (limit 60 s)"});
}

void legendre_suite() {
  double closed = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double t = -1.0 + 2.0 * i / 99.0;
    const auto p = legendre_eval(3, t);
    closed = std::max(closed, std::abs(p[2] - (3 * t * t - 1) / 2));
    closed = std::max(closed, std::abs(p[3] - (5 * t * t * t - 3 * t) / 2));
  }
  // Composite Simpson over [-1, 1]; exact enough for degree-16 products.
  const int n = 200000;
  const double h = 2.0 / n;
  double gram[9][9] = {};
  for (int i = 0; i <= n; ++i) {
    const double t = -1.0 + i * h;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const auto p = legendre_eval(8, t);
    for (int j = 0; j <= 8; ++j) {
      for (int k = 0; k <= 8; ++k) gram[j][k] += w * p[std::size_t(j)] * p[std::size_t(k)];
    }
  }
  double off = 0.0, norm_err = 0.0;
  for (int j = 0; j <= 8; ++j) {
    for (int k = 0; k <= 8; ++k) {
      const double v = gram[j][k] * h / 3.0;
      if (j != k) off = std::max(off, std::abs(v));
      else norm_err = std::max(norm_err, std::abs(v - 2.0 / (2 * j + 1)));
    }
  }
  double at_one = 0.0;
  const auto p1 = legendre_eval(8, 1.0);
  for (double v : p1) at_one = std::max(at_one, std::abs(v - 1.0));
  report("legendre suite: closed forms, orthogonality, P_k(1) = 1",
         closed < 1e-12 && off < 1e-6 && at_one == 0.0,
         {"max |P2,P3 - closed form| over 100 points: " + fmt("%.2e", closed) + " (< 1e-12)",
          "max |<P_j, P_k>|, j != k <= 8: " + fmt("%.2e", off) + " (< 1e-6)",
          "max |<P_k, P_k> - 2/(2k+1)|: " + fmt("%.2e", norm_err),
          "max |P_k(1) - 1|, k <= 8: " + fmt("%.1e", at_one)});
}

void discrepancy_closed_forms() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix a(10000, 1), b(10000, 1);
  for (Eigen::Index i = 0; i < 10000; ++i) {
    a(i, 0) = unit(rng);
    b(i, 0) = 0.3 + unit(rng);
  }
  const double w = wasserstein_1d(a, b).value;
  const Matrix x = testing::random_matrix(1000, 2, 11);
  const Matrix y = testing::random_matrix(1000, 2, 12);
  const double same = mmd_rbf(x, y).value;
  std::vector<double> ws, ms;
  for (double shift : {0.5, 1.0, 2.0}) {
    const Matrix moved = (y.array() + shift).matrix();
    ws.push_back(wasserstein_1d(x, moved).value);
    ms.push_back(mmd_rbf(x, moved).value);
  }
  const bool monotone = ws[0] < ws[1] && ws[1] < ws[2] && ms[0] < ms[1] && ms[1] < ms[2];
  report("discrepancy closed forms: W1(U[0,1], U[0.3,1.3]) = 0.3, MMD null, monotone in shift",
         std::abs(w - 0.3) <= 0.01 && std::abs(same) < 0.01 && monotone,
         {"W1 = " + fmt("%.5f", w) + " (0.3 +- 0.01)",
          "MMD^2 on two N(0, I) samples = " + fmt("%.5f", same) + " (< 0.01)",
          "W1 at shifts 0.5/1/2: " + fmt("%.4f", ws[0]) + " " + fmt("%.4f", ws[1]) + " " +
              fmt("%.4f", ws[2]),
          "MMD^2 at shifts 0.5/1/2: " + fmt("%.4f", ms[0]) + " " + fmt("%.4f", ms[1]) + " " +
              fmt("%.4f", ms[2])});
}

struct Benches {
  ExperimentConfig t1, t23;
  BenchTable table1, table23;
};

Benches run_benches() {
  Benches b;
  b.t1 = table1_config();
  b.t1.out_dir = cache_dir() / "table1";
  b.t23 = table23_config();
  b.t23.out_dir = cache_dir() / "table23";
  for (ExperimentConfig* c : {&b.t1, &b.t23}) {
    const auto start = std::chrono::steady_clock::now();
    const BenchSummary s = run_bench(*c);
    std::printf("# bench %s: %d runs trained, %d reused, %.0f s\n", c->out_dir.string().c_str(),
                s.runs_executed, s.runs_reused,
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    (c == &b.t1 ? b.table1 : b.table23) = s.table;
  }
  return b;
}

void qini_oracle(const Benches& b) {
  std::vector<std::string> details;
  // Hand example.
  const QiniCurve c = qini_curve(std::vector<double>{0.9, 0.8, 0.7, 0.6},
                                 std::vector<int>{1, 0, 1, 0}, std::vector<int>{1, 1, 0, 0});
  bool hand = c.points.size() == 5;
  const double v[] = {0.0, 1.0, 1.0, -1.0, 0.0};
  for (std::size_t k = 0; hand && k < 5; ++k) hand = c.points[k].value == v[k];
  hand = hand && qini_score(c) == 0.25;
  details.push_back(std::string("hand example v = [1, 1, -1, 0], score ") +
                    fmt("%.17g", qini_score(c)) + (hand ? " (exact)" : " (MISMATCH)"));

  // Null model on the default randomized test split.
  double worst_null = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    ScenarioSpec spec;
    spec.seed = seed;
    spec.n_train = 10;
    const Dataset test = generate(spec).test;
    MqiniOptions shuffle;
    shuffle.shuffle_scores = true;
    shuffle.shuffle_seed = seed;
    worst_null = std::max(worst_null, std::abs(mqini_oracle(test, 0, shuffle).mqini));
  }
  const bool null_ok = worst_null <= 0.02;
  details.push_back("null mQini over 20 seeds: max |value| " + fmt("%.4f", worst_null) +
                    " (<= 0.02)");

  // Oracle against every trained run, per scenario and seed.
  int comparisons = 0, violations = 0, missing = 0;
  for (const ExperimentConfig* cfg : {&b.t1, &b.t23}) {
    for (const std::string& sc : cfg->scenarios) {
      for (std::uint64_t seed : cfg->seeds) {
        const fs::path op = run_path(*cfg, sc, "oracle", seed);
        if (!fs::exists(op)) {
          ++missing;
          continue;
        }
        const RunResult oracle = run_from_json(read_json_file(op));
        for (const std::string& m : cfg->models) {
          const fs::path rp = run_path(*cfg, sc, parse_variant(m).key(cfg->lambda2_grid.size() > 1), seed);
          const RunResult r = fs::exists(rp) ? run_from_json(read_json_file(rp)) : RunResult{};
          if (!r.ok) {
            ++missing;
            continue;
          }
          ++comparisons;
          if (!(oracle.mqini > r.mqini)) {
            ++violations;
            details.push_back("oracle " + fmt("%.4f", oracle.mqini) + " <= " + m + " " +
                              fmt("%.4f", r.mqini) + " on " + sc + " seed " + std::to_string(seed));
          }
        }
      }
    }
  }
  details.push_back("truth oracle vs trained runs: " + std::to_string(comparisons) +
                    " comparisons, " + std::to_string(violations) + " violations, " +
                    std::to_string(missing) + " missing or failed runs");
  report("qini oracle: hand example, null model, truth beats every trained model per seed",
         hand && null_ok && violations == 0 && missing == 0 && comparisons > 0, details);
}

double mean_of(const BenchTable& t, const std::string& key, const std::string& scenario,
               bool& complete) {
  const CellStats& c = t.cell(key, scenario);
  if (c.failed > 0 || c.missing > 0 || c.values.empty()) complete = false;
  return c.mean;
}

void table1_ordering(const Benches& b) {
  std::vector<std::string> details;
  bool pass = true;
  for (const std::string sc : {"rct_noise", "rct_nm"}) {
    for (const auto& [sa, ofa] : {std::pair<std::string, std::string>{"tarnet+sa", "tarnet+ofa"},
                                  {"drcfr+sa", "drcfr+ofa"}}) {
      bool complete = true;
      const double m_sa = mean_of(b.table1, sa, sc, complete);
      const double m_ofa = mean_of(b.table1, ofa, sc, complete);
      const bool ok = complete && m_ofa - m_sa >= 0.01;
      pass = pass && ok;
      details.push_back(sc + ": " + ofa + " " + fmt("%.4f", m_ofa) + " vs " + sa + " " +
                        fmt("%.4f", m_sa) + ", margin " + fmt("%+.4f", m_ofa - m_sa) +
                        (complete ? "" : " [incomplete]") + (ok ? " ok" : " below 0.01"));
    }
  }
  report("randomized ordering: OFA beats SA by >= 0.01 mean mQini on rct_noise and rct_nm", pass,
         details);
}

void table23_ordering(const Benches& b) {
  std::vector<std::string> details;
  bool pass = true;
  for (const std::string& sc : b.t23.scenarios) {
    std::map<HeadKind, std::pair<double, std::string>> best;
    bool complete = true;
    for (const std::string& m : b.t23.models) {
      const Variant v = parse_variant(m);
      const double mean = mean_of(b.table23, v.key(false), sc, complete);
      auto it = best.find(v.head);
      if (it == best.end() || mean > it->second.first) best[v.head] = {mean, v.key(false)};
    }
    const auto& ofa = best[HeadKind::kOfa];
    const auto& sa = best[HeadKind::kSa];
    const auto& fa = best[HeadKind::kFa];
    const double margin = ofa.first - std::max(sa.first, fa.first);
    const bool ok = complete && margin >= 0.01;
    pass = pass && ok;
    details.push_back(sc + ": best OFA " + ofa.second + " " + fmt("%.4f", ofa.first) +
                      ", best SA " + sa.second + " " + fmt("%.4f", sa.first) + ", best FA " +
                      fa.second + " " + fmt("%.4f", fa.first) + ", margin " +
                      fmt("%+.4f", margin) + (complete ? "" : " [incomplete]") +
                      (ok ? " ok" : " below 0.01"));
  }
  report("observational ordering: best OFA variant beats best SA and FA by >= 0.01 on obs/mix +-IV",
         pass, details);
}

void budget_check() {
  std::vector<std::string> details;
  bool pass = true;
  std::map<std::string, bool> seen;
  for (const ExperimentConfig& cfg : {table1_config(), table23_config()}) {
    for (const std::string& m : cfg.models) {
      if (seen[m]) continue;
      seen[m] = true;
      const Variant v = parse_variant(m);
      const ModelSpec spec = budget_spec(v.backbone, v.head, v.disc, 8, 5);
      const std::size_t n = UpliftModel(spec, 8, 5).param_count();
      const bool ok = n >= 80000 && n <= 100000;
      pass = pass && ok;
      details.push_back(spec.label() + ": " + std::to_string(n) + (ok ? "" : " OUT OF RANGE"));
    }
  }
  report("budget check: default synthetic models have 80k-100k parameters", pass, details);
}

void determinism() {
  const fs::path root = fs::temp_directory_path() / "uplift_acceptance_determinism";
  fs::remove_all(root);
  ExperimentConfig c;
  c.scenarios = {"rct", "obs"};
  c.models = {"cfrnet+ofa+wass"};
  c.seeds = {1};
  c.oracle_row = false;
  c.epochs = 5;
  c.n_train = 2000;
  c.n_test = 2000;
  c.workers = 1;
  c.out_dir = root / "a";
  const std::string first = cmd_bench(c);
  c.out_dir = root / "b";
  const std::string second = cmd_bench(c);
  const bool md = first == second && slurp(root / "a" / "table.md") == slurp(root / "b" / "table.md");
  const bool csv = slurp(root / "a" / "table.csv") == slurp(root / "b" / "table.csv");
  fs::remove_all(root);
  report("determinism: 2-cell bench is byte-identical across two runs", md && csv,
         {"table.md identical: " + std::string(md ? "yes" : "no"),
          "table.csv identical: " + std::string(csv ? "yes" : "no")});
}

}  // namespace

int main() {
  log::set_level(log::Level::kWarning);
  const Benches b = run_benches();
  gradient_suite();
  legendre_suite();
  discrepancy_closed_forms();
  qini_oracle(b);
  table1_ordering(b);
  table23_ordering(b);
  budget_check();
  determinism();
  std::printf("%d criteria failed\n\n%s\n%s", failures, table_to_markdown(b.table1).c_str(),
              table_to_markdown(b.table23).c_str());
  return failures == 0 ? 0 : 1;
}
