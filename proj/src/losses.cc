#include "uplift/losses.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "uplift/errors.h"
#include "uplift/log.h"

namespace uplift {
namespace {

struct PairDistance {
  double distance;
  std::uint32_t i;
  std::uint32_t j;
};

struct Bandwidth {
  double sigma = 1.0;
  // Pooled-index pairs whose distances define sigma, with their weights.
  std::vector<std::pair<double, PairDistance>> support;
};

double row_distance(const double* x, const double* y, Eigen::Index cols) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < cols; ++c) {
    const double d = x[c] - y[c];
    s += d * d;
  }
  return std::sqrt(s);
}

const double* pooled_row(const Matrix& a, const Matrix& b, std::size_t index) {
  const auto n = std::size_t(a.rows());
  return index < n ? a.row(Eigen::Index(index)).data()
                   : b.row(Eigen::Index(index - n)).data();
}

Bandwidth median_bandwidth(const Matrix& a, const Matrix& b, std::size_t cap) {
  const std::size_t total = std::size_t(a.rows() + b.rows());
  std::vector<std::uint32_t> rows;
  if (total <= cap) {
    rows.resize(total);
    std::iota(rows.begin(), rows.end(), 0u);
  } else {
    rows.reserve(cap);
    for (std::size_t s = 0; s < cap; ++s) rows.push_back(std::uint32_t(s * total / cap));
  }
  std::vector<PairDistance> pairs;
  pairs.reserve(rows.size() * (rows.size() - 1) / 2);
  const Eigen::Index cols = a.cols();
  for (std::size_t p = 0; p < rows.size(); ++p) {
    const double* x = pooled_row(a, b, rows[p]);
    for (std::size_t q = p + 1; q < rows.size(); ++q) {
      pairs.push_back({row_distance(x, pooled_row(a, b, rows[q]), cols), rows[p], rows[q]});
    }
  }
  auto by_distance = [](const PairDistance& l, const PairDistance& r) {
    return l.distance < r.distance;
  };
  Bandwidth bw;
  const std::size_t mid = pairs.size() / 2;
  std::nth_element(pairs.begin(), pairs.begin() + std::ptrdiff_t(mid), pairs.end(),
                   by_distance);
  const PairDistance upper = pairs[mid];
  if (pairs.size() % 2 == 1) {
    bw.sigma = upper.distance;
    bw.support.push_back({1.0, upper});
  } else {
    const PairDistance lower =
        *std::max_element(pairs.begin(), pairs.begin() + std::ptrdiff_t(mid), by_distance);
    bw.sigma = 0.5 * (lower.distance + upper.distance);
    bw.support.push_back({0.5, lower});
    bw.support.push_back({0.5, upper});
  }
  if (!(bw.sigma > 0.0)) {
    bw.sigma = 1.0;
    bw.support.clear();
  }
  return bw;
}

struct KernelAccumulator {
  double value = 0.0;
  double dsigma = 0.0;
};

// Adds coef * sum_{i,j} k(x_i, y_j) and its gradients. With `same`, x and y
// are one sample (gy is ignored) and only ordered i != j pairs count.
// Rows of x are processed in chunks so the kernel matrix stays small.
void kernel_block(const Matrix& x, const Matrix& y, bool same, double coef, double sigma,
                  KernelAccumulator& acc, Matrix& gx, Matrix& gy) {
  constexpr Eigen::Index kChunk = 256;
  const double inv_s2 = 1.0 / (sigma * sigma);
  const double inv_s3 = inv_s2 / sigma;
  const Eigen::VectorXd y_norm = y.rowwise().squaredNorm();
  for (Eigen::Index r0 = 0; r0 < x.rows(); r0 += kChunk) {
    const Eigen::Index rows = std::min(kChunk, x.rows() - r0);
    const auto xc = x.middleRows(r0, rows);
    Matrix d2 = -2.0 * (xc * y.transpose());
    d2.colwise() += xc.rowwise().squaredNorm();
    d2.rowwise() += y_norm.transpose();
    d2 = d2.cwiseMax(0.0);
    Matrix k = (-0.5 * inv_s2 * d2).array().exp().matrix();
    if (same) {
      for (Eigen::Index i = 0; i < rows; ++i) k(i, r0 + i) = 0.0;
    }
    acc.value += coef * k.sum();
    acc.dsigma += coef * inv_s3 * k.cwiseProduct(d2).sum();
    // g_ij = d coef*k_ij / d x_i contracted with (x_i - y_j).
    const Matrix g = (-coef * inv_s2) * k;
    const Eigen::VectorXd g_rows = g.rowwise().sum();
    const double factor = same ? 2.0 : 1.0;
    gx.middleRows(r0, rows) +=
        factor * (g_rows.asDiagonal() * xc - g * y);
    if (!same) {
      const Eigen::VectorXd g_cols = g.colwise().sum().transpose();
      gy += g_cols.asDiagonal() * y - g.transpose() * xc;
    }
  }
}

}  // namespace

BceResult bce_loss(std::span<const double> probs, std::span<const double> labels) {
  if (probs.size() != labels.size()) {
    throw ShapeError("bce_loss: " + std::to_string(probs.size()) + " probabilities vs " +
                     std::to_string(labels.size()) + " labels");
  }
  if (probs.empty()) throw ContractError("bce_loss: empty batch");
  const double n = double(probs.size());
  BceResult result;
  result.logit_grad.resize(Eigen::Index(probs.size()), 1);
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], kProbClamp, 1.0 - kProbClamp);
    const double y = labels[i];
    sum += y * std::log(p) + (1.0 - y) * std::log1p(-p);
    result.logit_grad(Eigen::Index(i), 0) = (probs[i] - y) / n;
  }
  result.loss = -sum / n;
  return result;
}

PairDiscrepancy mmd_rbf(const Matrix& a, const Matrix& b, const MmdOptions& options) {
  if (a.rows() < 2 || b.rows() < 2) {
    throw ContractError("mmd_rbf: both samples need at least 2 rows (got " +
                        std::to_string(a.rows()) + " and " + std::to_string(b.rows()) + ")");
  }
  if (a.cols() != b.cols()) throw ShapeError("mmd_rbf: samples differ in width");
  const Bandwidth bw = median_bandwidth(a, b, std::max<std::size_t>(options.median_sample_cap, 4));
  const double n = double(a.rows());
  const double k = double(b.rows());
  const double c_aa = options.unbiased ? 1.0 / (n * (n - 1.0)) : 1.0 / (n * n);
  const double c_bb = options.unbiased ? 1.0 / (k * (k - 1.0)) : 1.0 / (k * k);
  const double c_ab = -2.0 / (n * k);

  PairDiscrepancy out;
  out.grad_a = Matrix::Zero(a.rows(), a.cols());
  out.grad_b = Matrix::Zero(b.rows(), b.cols());
  KernelAccumulator acc;
  kernel_block(a, a, true, c_aa, bw.sigma, acc, out.grad_a, out.grad_a);
  kernel_block(b, b, true, c_bb, bw.sigma, acc, out.grad_b, out.grad_b);
  kernel_block(a, b, false, c_ab, bw.sigma, acc, out.grad_a, out.grad_b);
  if (!options.unbiased) acc.value += n * c_aa + k * c_bb;  // k(x, x) = 1
  out.value = acc.value;

  // sigma is a (mean of) pooled pair distance(s); chain d/dsigma through it.
  for (const auto& [weight, pair] : bw.support) {
    const auto na = std::size_t(a.rows());
    auto grad_row = [&](std::uint32_t index) -> double* {
      return index < na ? out.grad_a.row(index).data()
                        : out.grad_b.row(Eigen::Index(index - na)).data();
    };
    const double* zi = pooled_row(a, b, pair.i);
    const double* zj = pooled_row(a, b, pair.j);
    double* gi = grad_row(pair.i);
    double* gj = grad_row(pair.j);
    const double scale = acc.dsigma * weight / pair.distance;
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      const double d = zi[c] - zj[c];
      gi[c] += scale * d;
      gj[c] -= scale * d;
    }
  }
  return out;
}

PairDiscrepancy wasserstein_1d(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw ContractError("wasserstein_1d: unequal sample counts " + std::to_string(a.rows()) +
                        " vs " + std::to_string(b.rows()) + "; resample first");
  }
  if (a.cols() != b.cols()) throw ShapeError("wasserstein_1d: samples differ in width");
  if (a.rows() == 0 || a.cols() == 0) throw ContractError("wasserstein_1d: empty sample");
  const Eigen::Index n = a.rows();
  const Eigen::Index h = a.cols();
  const double scale = 1.0 / (double(n) * double(h));
  PairDiscrepancy out;
  out.grad_a = Matrix::Zero(n, h);
  out.grad_b = Matrix::Zero(n, h);
  std::vector<Eigen::Index> ia(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> ib(static_cast<std::size_t>(n));
  double total = 0.0;
  for (Eigen::Index c = 0; c < h; ++c) {
    std::iota(ia.begin(), ia.end(), Eigen::Index(0));
    std::iota(ib.begin(), ib.end(), Eigen::Index(0));
    std::stable_sort(ia.begin(), ia.end(),
                     [&](Eigen::Index l, Eigen::Index r) { return a(l, c) < a(r, c); });
    std::stable_sort(ib.begin(), ib.end(),
                     [&](Eigen::Index l, Eigen::Index r) { return b(l, c) < b(r, c); });
    for (std::size_t r = 0; r < std::size_t(n); ++r) {
      const double d = a(ia[r], c) - b(ib[r], c);
      total += std::abs(d);
      const double s = d > 0.0 ? scale : (d < 0.0 ? -scale : 0.0);
      out.grad_a(ia[r], c) += s;
      out.grad_b(ib[r], c) -= s;
    }
  }
  out.value = total * scale;
  return out;
}

std::string_view to_string(DiscKind kind) {
  switch (kind) {
    case DiscKind::kNone:
      return "none";
    case DiscKind::kMmd:
      return "mmd";
    case DiscKind::kWass:
      return "wass";
  }
  return "none";
}

DiscKind parse_disc_kind(std::string_view name) {
  if (name == "none") return DiscKind::kNone;
  if (name == "mmd" || name == "MMD") return DiscKind::kMmd;
  if (name == "wass" || name == "WASS" || name == "wasserstein") return DiscKind::kWass;
  throw ConfigError("unknown discrepancy '" + std::string(name) + "'");
}

std::string_view to_string(Pairing pairing) {
  return pairing == Pairing::kAllPairs ? "all_pairs" : "control_vs_each";
}

Pairing parse_pairing(std::string_view name) {
  if (name == "all_pairs") return Pairing::kAllPairs;
  if (name == "control_vs_each") return Pairing::kControlVsEach;
  throw ConfigError("unknown pairing '" + std::string(name) + "'");
}

MultiDiscrepancy discrepancy_multi(const Matrix& phi, std::span<const int> treatments,
                                   int arms, const DiscrepancyOptions& options) {
  if (std::size_t(phi.rows()) != treatments.size()) {
    throw ShapeError("discrepancy_multi: one treatment per row required");
  }
  MultiDiscrepancy out;
  out.grad = Matrix::Zero(phi.rows(), phi.cols());
  if (options.kind == DiscKind::kNone) return out;

  std::vector<std::vector<std::size_t>> groups(std::size_t(std::max(arms, 0)));
  for (std::size_t i = 0; i < treatments.size(); ++i) {
    const int t = treatments[i];
    if (t < 0 || t >= arms) {
      throw ContractError("discrepancy_multi: treatment " + std::to_string(t) +
                          " outside [0, " + std::to_string(arms) + ")");
    }
    groups[std::size_t(t)].push_back(i);
  }
  std::vector<std::pair<int, int>> pairs;
  auto usable = [&](int g) { return groups[std::size_t(g)].size() >= 2; };
  if (options.pairing == Pairing::kAllPairs) {
    for (int p = 0; p < arms; ++p) {
      for (int q = p + 1; q < arms; ++q) {
        if (usable(p) && usable(q)) pairs.emplace_back(p, q);
      }
    }
  } else if (arms > 0 && usable(0)) {
    for (int q = 1; q < arms; ++q) {
      if (usable(q)) pairs.emplace_back(0, q);
    }
  }
  if (pairs.empty()) {
    log::warning("discrepancy_multi: fewer than 2 usable treatment groups; returning 0");
    return out;
  }

  const double weight = 1.0 / double(pairs.size());
  for (const auto& [p, q] : pairs) {
    std::vector<std::size_t> rows_p = groups[std::size_t(p)];
    std::vector<std::size_t> rows_q = groups[std::size_t(q)];
    PairDiscrepancy d;
    if (options.kind == DiscKind::kWass) {
      if (rows_p.size() != rows_q.size()) {
        auto& larger = rows_p.size() > rows_q.size() ? rows_p : rows_q;
        const std::size_t keep = std::min(rows_p.size(), rows_q.size());
        std::mt19937_64 rng(derive_seed(options.resample_seed, std::uint64_t(p * arms + q)));
        std::shuffle(larger.begin(), larger.end(), rng);
        larger.resize(keep);
        std::sort(larger.begin(), larger.end());
      }
      d = wasserstein_1d(gather_rows(phi, rows_p), gather_rows(phi, rows_q));
    } else {
      d = mmd_rbf(gather_rows(phi, rows_p), gather_rows(phi, rows_q), options.mmd);
    }
    out.value += weight * d.value;
    for (std::size_t r = 0; r < rows_p.size(); ++r) {
      out.grad.row(Eigen::Index(rows_p[r])) += weight * d.grad_a.row(Eigen::Index(r));
    }
    for (std::size_t r = 0; r < rows_q.size(); ++r) {
      out.grad.row(Eigen::Index(rows_q[r])) += weight * d.grad_b.row(Eigen::Index(r));
    }
  }
  out.pairs = int(pairs.size());
  return out;
}

}  // namespace uplift
