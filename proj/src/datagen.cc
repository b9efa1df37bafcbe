#include "uplift/datagen.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "uplift/errors.h"
#include "uplift/heads.h"

namespace uplift {
namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double dot(std::span<const double> w, std::span<const double> x) {
  double s = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * x[j];
  return s;
}

std::vector<double> draw_weights(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(double(dim)));
  std::vector<double> w(dim);
  for (double& v : w) v = normal(rng);
  return w;
}

}  // namespace

std::string_view to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kRct:
      return "rct";
    case ScenarioKind::kRctNoise:
      return "rct_noise";
    case ScenarioKind::kRctNm:
      return "rct_nm";
    case ScenarioKind::kObs:
      return "obs";
    case ScenarioKind::kMix:
      return "mix";
  }
  return "rct";
}

ScenarioKind parse_scenario_kind(std::string_view name) {
  if (name == "rct") return ScenarioKind::kRct;
  if (name == "rct_noise") return ScenarioKind::kRctNoise;
  if (name == "rct_nm") return ScenarioKind::kRctNm;
  if (name == "obs") return ScenarioKind::kObs;
  if (name == "mix") return ScenarioKind::kMix;
  throw ConfigError("unknown scenario kind '" + std::string(name) + "'");
}

std::string ScenarioSpec::name() const {
  std::string n(to_string(kind));
  if (with_iv) n += "_iv";
  return n;
}

void ScenarioSpec::validate() const {
  if (dim < 2) throw ConfigError("scenario needs at least 2 covariates");
  if (arms < 2) throw ConfigError("scenario needs at least 2 arms");
  if (n_train == 0 || n_test == 0) throw ConfigError("scenario sizes must be positive");
  if (!(noise_rate >= 0.0 && noise_rate < 1.0)) {
    throw ConfigError("noise_rate must lie in [0, 1)");
  }
  if (!(constants.dirichlet_concentration > 0.0)) {
    throw ConfigError("dirichlet_concentration must be positive");
  }
}

ScenarioSpec parse_scenario_name(std::string_view name) {
  ScenarioSpec spec;
  constexpr std::string_view kIv = "_iv";
  if (name.size() > kIv.size() && name.substr(name.size() - kIv.size()) == kIv) {
    spec.with_iv = true;
    name.remove_suffix(kIv.size());
  }
  spec.kind = parse_scenario_kind(name);
  return spec;
}

DataGenerator::DataGenerator(const ScenarioSpec& spec) : spec_(spec) {
  spec_.validate();
  std::mt19937_64 rng(derive_seed(spec_.seed, 0));
  for (auto& w : w_) w = draw_weights(spec_.dim, rng);
  wp_ = draw_weights(spec_.dim, rng);
  const std::size_t iv = instrument_index();
  if (spec_.with_iv) {
    for (auto& w : w_) w[iv] = 0.0;
  } else {
    wp_[iv] = 0.0;
  }
}

double DataGenerator::response_prob(std::span<const double> x, int arm) const {
  if (arm < 0 || arm >= spec_.arms) {
    throw ContractError("response_prob: arm " + std::to_string(arm) + " outside [0, " +
                        std::to_string(spec_.arms) + ")");
  }
  const DgpConstants& c = spec_.constants;
  const double u = treatment_to_scalar(arm, spec_.arms);
  const double base = dot(w_[0], x);
  if (monotone()) {
    const double slope = c.slope_base + c.slope_scale * sigmoid(dot(w_[1], x));
    return sigmoid(base + slope * (u + 1.0) - c.monotone_offset);
  }
  return sigmoid(base + dot(w_[1], x) * std::sin(std::numbers::pi * u) +
                 c.nm_quadratic * sigmoid(dot(w_[2], x)) * u * u - c.nm_offset);
}

double DataGenerator::selection_score(std::span<const double> x) const { return dot(wp_, x); }

std::vector<double> DataGenerator::propensity(std::span<const double> x, Assignment rule,
                                              std::mt19937_64& rng) const {
  const auto m = std::size_t(spec_.arms);
  std::vector<double> p(m);
  if (rule == Assignment::kRandomized) {
    std::gamma_distribution<double> gamma(spec_.constants.dirichlet_concentration, 1.0);
    double total = 0.0;
    for (double& v : p) {
      v = gamma(rng);
      total += v;
    }
    for (double& v : p) v /= total;
    return p;
  }
  const double s = spec_.constants.propensity_gamma * selection_score(x);
  double peak = -INFINITY;
  for (std::size_t k = 0; k < m; ++k) {
    p[k] = s * treatment_to_scalar(int(k), spec_.arms);
    peak = std::max(peak, p[k]);
  }
  double total = 0.0;
  for (double& v : p) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : p) v /= total;
  return p;
}

Dataset DataGenerator::sample(std::size_t n, Assignment rule, std::size_t randomized_rows,
                              bool noisy, bool with_truth, std::uint64_t stream) const {
  std::mt19937_64 rng(derive_seed(spec_.seed, stream));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto d = Eigen::Index(spec_.dim);
  Dataset data;
  data.arms = spec_.arms;
  data.x.resize(Eigen::Index(n), d);
  data.t.resize(n);
  data.y.resize(n);
  if (with_truth) data.truth = Matrix(Eigen::Index(n), spec_.arms);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = data.x.row(Eigen::Index(i));
    for (Eigen::Index j = 0; j < d; ++j) row(j) = normal(rng);
    std::span<const double> x(row.data(), spec_.dim);
    const Assignment r = i < randomized_rows ? Assignment::kRandomized : rule;
    const auto p = propensity(x, r, rng);
    std::discrete_distribution<int> pick(p.begin(), p.end());
    const int t = pick(rng);
    const double mu = response_prob(x, t);
    int y = unit(rng) < mu ? 1 : 0;
    if (noisy && unit(rng) < spec_.noise_rate) y = 1 - y;
    data.t[i] = t;
    data.y[i] = y;
    if (with_truth) {
      for (int k = 0; k < spec_.arms; ++k) {
        (*data.truth)(Eigen::Index(i), k) = response_prob(x, k);
      }
    }
  }
  return data;
}

Split generate(const ScenarioSpec& spec) {
  DataGenerator gen(spec);
  Split split;
  const std::size_t n = spec.n_train;
  switch (spec.kind) {
    case ScenarioKind::kRct:
    case ScenarioKind::kRctNm:
      split.train = gen.sample(n, Assignment::kRandomized, n, false, false, 1);
      break;
    case ScenarioKind::kRctNoise:
      split.train = gen.sample(n, Assignment::kRandomized, n, true, false, 1);
      break;
    case ScenarioKind::kObs:
      split.train = gen.sample(n, Assignment::kObservational, 0, false, false, 1);
      break;
    case ScenarioKind::kMix:
      split.train = gen.sample(n, Assignment::kObservational, (n + 1) / 2, false, false, 1);
      break;
  }
  split.test = gen.sample(spec.n_test, Assignment::kRandomized, spec.n_test, false, true, 2);
  return split;
}

}  // namespace uplift
