#ifndef UPLIFT_TESTS_SUPPORT_H_
#define UPLIFT_TESTS_SUPPORT_H_

// Fixtures shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "uplift/model.h"
#include "uplift/numkit.h"

namespace uplift::testing {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed,
                            double scale = 1.0, double shift = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = shift + scale * normal(rng);
  return m;
}

// Every arm gets at least floor(n / arms) rows, so every group is usable by
// the discrepancy terms when n >= 2 * arms.
inline Batch random_batch(std::size_t n, std::size_t dim, int arms, std::uint64_t seed) {
  Batch b;
  b.x = random_matrix(Eigen::Index(n), Eigen::Index(dim), seed);
  std::mt19937_64 rng(derive_seed(seed, 1));
  b.t.resize(n);
  for (std::size_t i = 0; i < n; ++i) b.t[i] = int(i % std::size_t(arms));
  std::shuffle(b.t.begin(), b.t.end(), rng);
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < n; ++i) b.y.push_back(coin(rng) ? 1.0 : 0.0);
  b.resample_seed = derive_seed(seed, 2);
  return b;
}

// Tiny widths so a full finite-difference sweep is cheap.
inline ModelSpec small_spec(Backbone backbone, HeadKind head, DiscKind disc, std::uint64_t seed) {
  ModelSpec spec;
  spec.backbone = backbone;
  spec.head = head;
  spec.disc = disc;
  spec.rep_hidden = {5};
  spec.rep_out = 6;
  spec.head_hidden = {4};
  spec.weights.lambda2 = disc == DiscKind::kNone ? 0.0 : 0.5;
  spec.seed = seed;
  return spec;
}

// Max relative error between total_loss gradients and central differences.
inline double model_gradient_error(const ModelSpec& spec, std::size_t dim, int arms,
                                   std::uint64_t seed) {
  UpliftModel model(spec, dim, std::size_t(arms));
  const Batch batch = random_batch(4 * std::size_t(arms), dim, arms, derive_seed(seed, 99));
  const LossAndGrads analytic = total_loss(model, batch);
  std::vector<Matrix*> params = model.params();
  const std::vector<Matrix> numeric = finite_diff_grad(
      [&] { return evaluate_loss(model, batch).total; }, params, 1e-5);
  return max_relative_error(analytic.grads, numeric);
}

struct Combo {
  Backbone backbone;
  HeadKind head;
  DiscKind disc;
};

// Every valid backbone x head x discrepancy combination.
inline std::vector<Combo> all_combos() {
  std::vector<Combo> out;
  out.push_back({Backbone::kSlearner, HeadKind::kFa, DiscKind::kNone});
  for (DiscKind d : {DiscKind::kNone, DiscKind::kMmd, DiscKind::kWass}) {
    out.push_back({Backbone::kBnn, HeadKind::kFa, d});
    for (Backbone b : {Backbone::kTarnetCfrnet, Backbone::kDrcfr}) {
      for (HeadKind h : {HeadKind::kSa, HeadKind::kOfa}) out.push_back({b, h, d});
    }
  }
  return out;
}

}  // namespace uplift::testing

#endif  // UPLIFT_TESTS_SUPPORT_H_
