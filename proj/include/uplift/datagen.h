#ifndef UPLIFT_DATAGEN_H_
#define UPLIFT_DATAGEN_H_

// Synthetic multi-treatment scenarios with known response probabilities.
//
// Outcome model, with u = 2k/(m-1) - 1 the scaled arm:
//   monotone  mu = sigmoid(w0.x + (0.4 + 0.6 sigmoid(w1.x)) (u + 1) - 0.8)
//   rct_nm    mu = sigmoid(w0.x + (w1.x) sin(pi u) + 0.8 sigmoid(w2.x) u^2 - 0.5)
// Assignment:
//   rct family  Dirichlet(concentration per arm) around uniform
//   obs         softmax(gamma * s(x) * c_k), s(x) = wp.x, c_k = u(k)
// With an instrument the last covariate drives assignment only; without it
// the last covariate enters the outcome and not the assignment.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uplift/dataset.h"
#include "uplift/numkit.h"

namespace uplift {

enum class ScenarioKind { kRct, kRctNoise, kRctNm, kObs, kMix };

std::string_view to_string(ScenarioKind kind);
ScenarioKind parse_scenario_kind(std::string_view name);

struct DgpConstants {
  double slope_base = 0.4;
  double slope_scale = 0.6;
  double monotone_offset = 0.8;
  double nm_quadratic = 0.8;
  double nm_offset = 0.5;
  double propensity_gamma = 1.5;
  // Dirichlet parameter per arm for randomized assignment.
  double dirichlet_concentration = 100.0;
};

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::kRct;
  bool with_iv = false;
  std::size_t n_train = 10000;
  std::size_t n_test = 10000;
  std::size_t dim = 8;
  int arms = 5;
  // Label flip probability for rct_noise training rows.
  double noise_rate = 0.1;
  std::uint64_t seed = 1;
  DgpConstants constants;

  // e.g. "rct_noise", "obs_iv", "mix".
  std::string name() const;
  void validate() const;
};

// Parses names produced by ScenarioSpec::name() ("obs_iv" -> obs + IV).
ScenarioSpec parse_scenario_name(std::string_view name);

enum class Assignment { kRandomized, kObservational };

class DataGenerator {
 public:
  explicit DataGenerator(const ScenarioSpec& spec);

  const ScenarioSpec& spec() const { return spec_; }

  // True P(Y = 1 | x, arm) under this scenario's outcome model.
  double response_prob(std::span<const double> x, int arm) const;
  // Arm probabilities. The randomized rule draws its Dirichlet noise from
  // `rng`; the observational rule is deterministic.
  std::vector<double> propensity(std::span<const double> x, Assignment rule,
                                 std::mt19937_64& rng) const;
  // s(x), the covariate score that drives observational assignment.
  double selection_score(std::span<const double> x) const;

  bool monotone() const { return spec_.kind != ScenarioKind::kRctNm; }
  // Index of the covariate used as instrument (the last one).
  std::size_t instrument_index() const { return spec_.dim - 1; }

  const std::vector<double>& outcome_weights(int which) const { return w_[std::size_t(which)]; }
  const std::vector<double>& propensity_weights() const { return wp_; }

  // Draws n rows. The first `randomized_rows` use randomized assignment and
  // the rest use `rule`.
  Dataset sample(std::size_t n, Assignment rule, std::size_t randomized_rows,
                 bool noisy, bool with_truth, std::uint64_t stream) const;

 private:
  ScenarioSpec spec_;
  std::vector<double> w_[3];
  std::vector<double> wp_;
};

struct Split {
  Dataset train;
  Dataset test;
};

// Training split per the scenario kind (truth-blind); test split is always a
// noise-free randomized draw with the truth matrix filled.
Split generate(const ScenarioSpec& spec);

}  // namespace uplift

#endif  // UPLIFT_DATAGEN_H_
