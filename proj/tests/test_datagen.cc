#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "uplift/datagen.h"
#include "uplift/dataset.h"
#include "uplift/errors.h"

using namespace uplift;

namespace {

double sig(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double dot(const std::vector<double>& w, const double* x) {
  double s = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * x[j];
  return s;
}

// Outcome model written out directly from its definition.
double mu_oracle(const DataGenerator& gen, const double* x, int k) {
  const int m = gen.spec().arms;
  const double u = 2.0 * k / (m - 1) - 1.0;
  const auto& w0 = gen.outcome_weights(0);
  const auto& w1 = gen.outcome_weights(1);
  const auto& w2 = gen.outcome_weights(2);
  if (gen.spec().kind != ScenarioKind::kRctNm) {
    return sig(dot(w0, x) + (0.4 + 0.6 * sig(dot(w1, x))) * (u + 1.0) - 0.8);
  }
  return sig(dot(w0, x) + dot(w1, x) * std::sin(std::numbers::pi * u) +
             0.8 * sig(dot(w2, x)) * u * u - 0.5);
}

ScenarioSpec scenario(ScenarioKind kind, bool iv, std::uint64_t seed, std::size_t n = 10000) {
  ScenarioSpec s;
  s.kind = kind;
  s.with_iv = iv;
  s.seed = seed;
  s.n_train = n;
  s.n_test = n;
  return s;
}

std::vector<int> arm_counts(const Dataset& d) {
  std::vector<int> c(std::size_t(d.arms), 0);
  for (int t : d.t) ++c[std::size_t(t)];
  return c;
}

// P(a <= B <= b) for B ~ Beta(alpha, beta) by composite Simpson.
double beta_mass(double alpha, double beta, double a, double b) {
  const double log_norm = std::lgamma(alpha + beta) - std::lgamma(alpha) - std::lgamma(beta);
  auto pdf = [&](double p) {
    return std::exp(log_norm + (alpha - 1.0) * std::log(p) + (beta - 1.0) * std::log1p(-p));
  };
  const int n = 20000;
  const double h = (b - a) / n;
  double s = pdf(a) + pdf(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * pdf(a + i * h);
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("response_prob matches the outcome model formulas") {
  for (ScenarioKind kind : {ScenarioKind::kRct, ScenarioKind::kRctNm, ScenarioKind::kObs}) {
    for (bool iv : {false, true}) {
      const DataGenerator gen(scenario(kind, iv, 3));
      std::mt19937_64 rng(5);
      std::normal_distribution<double> normal;
      for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x(8);
        for (double& v : x) v = normal(rng);
        for (int k = 0; k < 5; ++k) {
          CHECK(gen.response_prob(x, k) == doctest::Approx(mu_oracle(gen, x.data(), k)).epsilon(1e-14));
        }
      }
    }
  }
  const DataGenerator gen(scenario(ScenarioKind::kRct, false, 1));
  const std::vector<double> x(8, 0.0);
  CHECK_THROWS_AS(gen.response_prob(x, 5), ContractError);
  CHECK_THROWS_AS(gen.response_prob(x, -1), ContractError);
}

TEST_CASE("monotone scenarios increase strictly in the arm") {
  for (ScenarioKind kind : {ScenarioKind::kRct, ScenarioKind::kRctNoise, ScenarioKind::kObs,
                            ScenarioKind::kMix}) {
    const DataGenerator gen(scenario(kind, false, 7));
    std::mt19937_64 rng(1);
    std::normal_distribution<double> normal;
    int violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      std::vector<double> x(8);
      for (double& v : x) v = normal(rng);
      for (int k = 1; k < 5; ++k) violations += gen.response_prob(x, k) <= gen.response_prob(x, k - 1);
      CHECK(gen.response_prob(x, 4) - gen.response_prob(x, 0) > 0.0);
    }
    CHECK(violations == 0);
  }
}

TEST_CASE("rct_nm breaks monotonicity and varies the best arm") {
  const Split s = generate(scenario(ScenarioKind::kRctNm, false, 2, 1000));
  int violations = 0;
  std::set<Eigen::Index> best;
  for (Eigen::Index i = 0; i < 1000; ++i) {
    const auto row = s.test.truth->row(i);
    for (int k = 1; k < 5; ++k) violations += row(k) < row(k - 1);
    Eigen::Index arg;
    row.maxCoeff(&arg);
    best.insert(arg);
  }
  CHECK(violations >= 1);
  CHECK(best.size() >= 2);
}

TEST_CASE("monotone scenarios have the last arm optimal everywhere") {
  const Split s = generate(scenario(ScenarioKind::kRct, false, 4, 1000));
  for (Eigen::Index i = 0; i < 1000; ++i) {
    Eigen::Index arg;
    s.test.truth->row(i).maxCoeff(&arg);
    CHECK(arg == 4);
  }
}

TEST_CASE("randomized propensities stay near uniform") {
  // Each arm share is Beta(100, 400) under a symmetric Dirichlet(100).
  const double inside = beta_mass(100.0, 400.0, 0.15, 0.25);
  CHECK(inside > 0.99);
  const DataGenerator gen(scenario(ScenarioKind::kRct, false, 1));
  std::mt19937_64 rng(9);
  const std::vector<double> x(8, 0.3);
  const int draws = 40000;
  std::vector<int> hits(5, 0);
  for (int i = 0; i < draws; ++i) {
    const auto p = gen.propensity(x, Assignment::kRandomized, rng);
    double total = 0.0;
    for (int k = 0; k < 5; ++k) {
      total += p[std::size_t(k)];
      hits[std::size_t(k)] += std::abs(p[std::size_t(k)] - 0.2) <= 0.05;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  for (int h : hits) {
    const double rate = double(h) / draws;
    CHECK(rate > 0.99);
    CHECK(std::abs(rate - inside) < 5.0 * std::sqrt(inside * (1 - inside) / draws));
  }
}

TEST_CASE("observational propensity is a softmax over ordered arm codes") {
  const DataGenerator gen(scenario(ScenarioKind::kObs, false, 2));
  std::mt19937_64 rng(1);
  std::vector<double> x(8);
  for (int j = 0; j < 8; ++j) x[std::size_t(j)] = 0.1 * j - 0.2;
  const double s = gen.selection_score(x);
  const double codes[] = {-1.0, -0.5, 0.0, 0.5, 1.0};
  double z = 0.0;
  for (double c : codes) z += std::exp(1.5 * s * c);
  const auto p = gen.propensity(x, Assignment::kObservational, rng);
  for (int k = 0; k < 5; ++k) {
    CHECK(p[std::size_t(k)] == doctest::Approx(std::exp(1.5 * s * codes[k]) / z).epsilon(1e-14));
  }
  // Trend follows the sign of s(x).
  for (int k = 1; k < 5; ++k) {
    if (s > 0) CHECK(p[std::size_t(k)] > p[std::size_t(k - 1)]);
    if (s < 0) CHECK(p[std::size_t(k)] < p[std::size_t(k - 1)]);
  }
}

TEST_CASE("the instrument moves assignment only") {
  const DataGenerator iv(scenario(ScenarioKind::kObs, true, 3));
  const DataGenerator no_iv(scenario(ScenarioKind::kObs, false, 3));
  std::mt19937_64 rng(1), draw(2);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(8);
    for (double& v : x) v = normal(draw);
    std::vector<double> moved = x;
    moved[7] = x[7] + 1.0 + normal(draw);
    const auto p = iv.propensity(x, Assignment::kObservational, rng);
    const auto q = iv.propensity(moved, Assignment::kObservational, rng);
    CHECK(std::abs(p[0] - q[0]) > 0.0);
    for (int k = 0; k < 5; ++k) CHECK(iv.response_prob(x, k) == iv.response_prob(moved, k));
    const auto p2 = no_iv.propensity(x, Assignment::kObservational, rng);
    const auto q2 = no_iv.propensity(moved, Assignment::kObservational, rng);
    for (int k = 0; k < 5; ++k) CHECK(p2[std::size_t(k)] == q2[std::size_t(k)]);
    CHECK(no_iv.response_prob(x, 2) != no_iv.response_prob(moved, 2));
  }
}

TEST_CASE("randomized training arms are balanced") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (ScenarioKind kind : {ScenarioKind::kRct, ScenarioKind::kRctNoise, ScenarioKind::kRctNm}) {
      const Split s = generate(scenario(kind, false, seed));
      CHECK(s.train.size() == 10000);
      CHECK_FALSE(s.train.has_truth());
      for (int c : arm_counts(s.train)) CHECK(std::abs(c - 2000) <= 150);
    }
  }
}

TEST_CASE("randomized assignment is independent of covariates") {
  // 5 x 2 contingency of arm against a median split; df = 4, alpha = 0.001.
  const double critical = 18.4668;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Split s = generate(scenario(ScenarioKind::kRct, false, seed));
    const Dataset& d = s.train;
    for (Eigen::Index j = 0; j < 8; ++j) {
      Eigen::VectorXd c = d.x.col(j);
      std::vector<double> sorted(c.data(), c.data() + c.size());
      std::nth_element(sorted.begin(), sorted.begin() + 5000, sorted.end());
      const double median = sorted[5000];
      double table[5][2] = {};
      for (std::size_t i = 0; i < d.size(); ++i) table[d.t[i]][c(Eigen::Index(i)) >= median] += 1;
      double chi2 = 0.0;
      for (int k = 0; k < 5; ++k) {
        const double row = table[k][0] + table[k][1];
        for (int b = 0; b < 2; ++b) {
          double colsum = 0.0;
          for (int r = 0; r < 5; ++r) colsum += table[r][b];
          const double expected = row * colsum / double(d.size());
          chi2 += (table[k][b] - expected) * (table[k][b] - expected) / expected;
        }
      }
      CAPTURE(seed);
      CAPTURE(j);
      CHECK(chi2 < critical);
    }
  }
}

TEST_CASE("observational assignment is biased by the selection score") {
  for (bool iv : {false, true}) {
    const ScenarioSpec spec = scenario(ScenarioKind::kObs, iv, 2);
    const DataGenerator gen(spec);
    const Split s = generate(spec);
    std::vector<double> lo, hi;
    for (std::size_t i = 0; i < s.train.size(); ++i) {
      const double* x = s.train.x.row(Eigen::Index(i)).data();
      const double score = gen.selection_score(std::span<const double>(x, 8));
      if (s.train.t[i] == 0) lo.push_back(score);
      if (s.train.t[i] == 4) hi.push_back(score);
    }
    auto mean = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double a : v) s += a;
      return s / double(v.size());
    };
    auto var = [&](const std::vector<double>& v) {
      const double m = mean(v);
      double s = 0.0;
      for (double a : v) s += (a - m) * (a - m);
      return s / double(v.size() - 1);
    };
    const double smd = (mean(hi) - mean(lo)) / std::sqrt((var(hi) + var(lo)) / 2.0);
    CHECK(smd > 0.5);
  }
}

TEST_CASE("mix draws half its training rows randomized") {
  const ScenarioSpec spec = scenario(ScenarioKind::kMix, false, 5);
  const DataGenerator gen(spec);
  const Split s = generate(spec);
  const Dataset reference = gen.sample(10000, Assignment::kObservational, 5000, false, false, 1);
  CHECK(s.train.x == reference.x);
  CHECK(s.train.t == reference.t);
  // The first half shows no selection on s(x); the second half does.
  auto arm_score_corr = [&](std::size_t from, std::size_t to) {
    double sx = 0, st = 0, sxx = 0, stt = 0, sxt = 0;
    const double n = double(to - from);
    for (std::size_t i = from; i < to; ++i) {
      const double* x = s.train.x.row(Eigen::Index(i)).data();
      const double a = gen.selection_score(std::span<const double>(x, 8));
      const double b = s.train.t[i];
      sx += a, st += b, sxx += a * a, stt += b * b, sxt += a * b;
    }
    const double cov = sxt / n - (sx / n) * (st / n);
    return cov / std::sqrt((sxx / n - sx * sx / n / n) * (stt / n - st * st / n / n));
  };
  CHECK(std::abs(arm_score_corr(0, 5000)) < 0.05);
  CHECK(arm_score_corr(5000, 10000) > 0.3);
  // Odd sizes put the extra row on the randomized side.
  const ScenarioSpec odd = scenario(ScenarioKind::kMix, false, 5, 7);
  const Dataset odd_ref = DataGenerator(odd).sample(7, Assignment::kObservational, 4, false, false, 1);
  CHECK(generate(odd).train.t == odd_ref.t);
}

TEST_CASE("test split is a noise-free randomized draw with truth") {
  for (ScenarioKind kind : {ScenarioKind::kRctNoise, ScenarioKind::kObs, ScenarioKind::kMix}) {
    const ScenarioSpec spec = scenario(kind, true, 3);
    const Split s = generate(spec);
    REQUIRE(s.test.has_truth());
    CHECK_NOTHROW(s.test.validate());
    const Dataset ref =
        DataGenerator(spec).sample(10000, Assignment::kRandomized, 10000, false, true, 2);
    CHECK(s.test.t == ref.t);
    CHECK(s.test.y == ref.y);
    for (int c : arm_counts(s.test)) CHECK(std::abs(c - 2000) <= 150);
  }
}

TEST_CASE("rct_noise flips training labels at the configured rate") {
  const ScenarioSpec spec = scenario(ScenarioKind::kRctNoise, false, 6, 40000);
  const DataGenerator gen(spec);
  const Split s = generate(spec);
  double observed = 0.0, expected = 0.0, var = 0.0;
  for (std::size_t i = 0; i < s.train.size(); ++i) {
    const double mu = mu_oracle(gen, s.train.x.row(Eigen::Index(i)).data(), s.train.t[i]);
    const double p = mu * 0.9 + (1.0 - mu) * 0.1;
    observed += s.train.y[i];
    expected += p;
    var += p * (1.0 - p);
  }
  CHECK(std::abs(observed - expected) < 4.0 * std::sqrt(var));
}

TEST_CASE("stored truth matches empirical outcome rates") {
  const ScenarioSpec spec = scenario(ScenarioKind::kRct, false, 8);
  const Dataset d = DataGenerator(spec).sample(1000000, Assignment::kRandomized, 1000000, false,
                                               true, 2);
  for (int k = 0; k < 5; ++k) {
    double hits = 0.0, truth = 0.0, n = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d.t[i] != k) continue;
      hits += d.y[i];
      truth += (*d.truth)(Eigen::Index(i), k);
      n += 1.0;
    }
    CAPTURE(k);
    CHECK(std::abs(hits / n - truth / n) < 0.005);
  }
}

TEST_CASE("generation is deterministic in the seed") {
  const ScenarioSpec spec = scenario(ScenarioKind::kMix, true, 11, 500);
  const Split a = generate(spec), b = generate(spec);
  CHECK(to_csv(a.train) == to_csv(b.train));
  CHECK(to_csv(a.test) == to_csv(b.test));
  ScenarioSpec other = spec;
  other.seed = 12;
  CHECK(to_csv(generate(other).train) != to_csv(a.train));
}

TEST_CASE("scenario names and validation") {
  CHECK(parse_scenario_name("obs_iv").with_iv);
  CHECK(parse_scenario_name("obs_iv").kind == ScenarioKind::kObs);
  CHECK(parse_scenario_name("rct_noise").kind == ScenarioKind::kRctNoise);
  CHECK_FALSE(parse_scenario_name("rct_nm").with_iv);
  CHECK(scenario(ScenarioKind::kMix, true, 1).name() == "mix_iv");
  CHECK_THROWS_AS(parse_scenario_name("lab"), ConfigError);
  ScenarioSpec bad;
  bad.noise_rate = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ScenarioSpec{};
  bad.arms = 1;
  CHECK_THROWS_AS(DataGenerator{bad}, ConfigError);
}

TEST_CASE("CSV round trip") {
  const Split s = generate(scenario(ScenarioKind::kRctNm, false, 3, 300));
  for (const Dataset* d : {&s.train, &s.test}) {
    const Dataset back = parse_csv(to_csv(*d));
    CHECK(back.arms == 5);
    CHECK(back.t == d->t);
    CHECK(back.y == d->y);
    CHECK((back.x - d->x).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(back.has_truth() == d->has_truth());
    if (d->has_truth()) CHECK((*back.truth - *d->truth).cwiseAbs().maxCoeff() <= 1e-12);
  }
  const std::string header = to_csv(s.test).substr(0, to_csv(s.test).find('\n'));
  CHECK(header == "x0,x1,x2,x3,x4,x5,x6,x7,t,y,mu0,mu1,mu2,mu3,mu4");
}

TEST_CASE("CSV with 47 covariates infers the arm count") {
  std::string text;
  for (int j = 0; j < 47; ++j) text += "x" + std::to_string(j) + ",";
  text += "t,y\n";
  for (int row = 0; row < 6; ++row) {
    for (int j = 0; j < 47; ++j) text += std::to_string(0.5 * j - row) + ",";
    text += std::to_string(row % 5) + "," + std::to_string(row % 2) + "\n";
  }
  const Dataset d = parse_csv(text);
  CHECK(d.dim() == 47);
  CHECK(d.arms == 5);
  CHECK(d.size() == 6);
  CHECK(d.x(3, 2) == 1.0 - 3.0);
}

TEST_CASE("CSV errors name the offending row") {
  auto message = [](const std::string& text, std::optional<int> arms = std::nullopt) {
    try {
      parse_csv(text, arms);
    } catch (const ParseError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  const std::string ok = "x0,t,y\n0.1,0,1\n0.2,1,0\n";
  CHECK(message(ok) == "no error");
  CHECK(message(ok + "0.3,7,1\n", 5).find("row 3") != std::string::npos);
  CHECK(message(ok + "0.3,1.5,1\n").find("row 3") != std::string::npos);
  CHECK(message(ok + "0.3,1,2\n").find("row 3") != std::string::npos);
  CHECK(message(ok + "abc,1,1\n").find("row 3") != std::string::npos);
  CHECK(message(ok + "0.3,1\n").find("row 3") != std::string::npos);
  CHECK(message("x0,y\n0.1,1\n").find("missing column t") != std::string::npos);
  CHECK(message("x0,t\n0.1,1\n").find("missing column y") != std::string::npos);
  CHECK(message("").find("missing header") != std::string::npos);
}
