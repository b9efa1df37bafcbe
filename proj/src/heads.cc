#include "uplift/heads.h"

#include <string>
#include <utility>

#include "uplift/errors.h"

namespace uplift {
namespace {

std::vector<std::size_t> head_dims(std::size_t in, std::span<const std::size_t> hidden,
                                   std::size_t out) {
  std::vector<std::size_t> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  return dims;
}

}  // namespace

std::string_view to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::kFa:
      return "fa";
    case HeadKind::kSa:
      return "sa";
    case HeadKind::kOfa:
      return "ofa";
  }
  return "fa";
}

HeadKind parse_head_kind(std::string_view name) {
  if (name == "fa" || name == "FA") return HeadKind::kFa;
  if (name == "sa" || name == "SA") return HeadKind::kSa;
  if (name == "ofa" || name == "OFA") return HeadKind::kOfa;
  throw ConfigError("unknown head '" + std::string(name) + "'");
}

double treatment_to_scalar(int index, int arms) {
  if (arms < 2) throw ContractError("treatment_to_scalar: need at least 2 arms");
  if (index < 0 || index >= arms) {
    throw ContractError("treatment_to_scalar: index " + std::to_string(index) +
                        " outside [0, " + std::to_string(arms) + ")");
  }
  return 2.0 * double(index) / double(arms - 1) - 1.0;
}

std::vector<double> legendre_eval(int degree, double t) {
  if (degree < 0) throw ContractError("legendre_eval: negative degree");
  std::vector<double> p(std::size_t(degree) + 1);
  p[0] = 1.0;
  if (degree >= 1) p[1] = t;
  for (int k = 1; k < degree; ++k) {
    p[k + 1] = ((2.0 * k + 1.0) * t * p[k] - double(k) * p[k - 1]) / double(k + 1);
  }
  return p;
}

std::size_t TreatmentHead::param_count() const {
  std::size_t n = 0;
  for (const Matrix* p : params()) n += std::size_t(p->size());
  return n;
}

void TreatmentHead::check_inputs(const Matrix& phi, std::span<const int> treatments) const {
  if (std::size_t(phi.cols()) != in_dim_) {
    throw ShapeError("head expects " + std::to_string(in_dim_) +
                     " hidden features, got " + std::to_string(phi.cols()));
  }
  if (std::size_t(phi.rows()) != treatments.size()) {
    throw ShapeError("head got " + std::to_string(phi.rows()) + " rows but " +
                     std::to_string(treatments.size()) + " treatments");
  }
  for (int t : treatments) {
    if (t < 0 || std::size_t(t) >= arms_) {
      throw ContractError("treatment " + std::to_string(t) + " outside [0, " +
                          std::to_string(arms_) + ")");
    }
  }
}

// ---------------------------------------------------------------------------
// Feature adaptation

FeatureAdaptationHead::FeatureAdaptationHead(std::size_t in_dim, std::size_t arms,
                                             std::span<const std::size_t> hidden,
                                             Activation activation,
                                             std::uint64_t seed)
    : TreatmentHead(in_dim, arms),
      net_(head_dims(in_dim + arms, hidden, 1), activation, Activation::kIdentity,
           seed) {}

FeatureAdaptationHead::FeatureAdaptationHead(std::size_t in_dim, std::size_t arms,
                                             DenseNet net)
    : TreatmentHead(in_dim, arms), net_(std::move(net)) {
  if (net_.in_dim() != in_dim + arms || net_.out_dim() != 1) {
    throw ShapeError("FA network must map " + std::to_string(in_dim + arms) +
                     " inputs to 1 output");
  }
}

Matrix FeatureAdaptationHead::concat(const Matrix& phi,
                                     std::span<const int> treatments) const {
  const auto h = phi.cols();
  Matrix joined = Matrix::Zero(phi.rows(), h + Eigen::Index(arms()));
  joined.leftCols(h) = phi;
  for (std::size_t i = 0; i < treatments.size(); ++i) {
    joined(Eigen::Index(i), h + treatments[i]) = 1.0;
  }
  return joined;
}

Matrix FeatureAdaptationHead::forward(const Matrix& phi, std::span<const int> treatments,
                                      HeadTape* tape, OpCounter* counter) const {
  check_inputs(phi, treatments);
  Matrix joined = concat(phi, treatments);
  if (tape == nullptr) return net_.infer(joined, counter);
  ForwardResult fr = net_.forward(joined, counter);
  tape->tapes.assign(1, std::move(fr.tape));
  tape->rows = std::size_t(phi.rows());
  tape->phi_cols = std::size_t(phi.cols());
  return fr.output;
}

HeadGrads FeatureAdaptationHead::backward(const HeadTape& tape,
                                          const Matrix& logit_grad) const {
  if (tape.tapes.size() != 1) throw ContractError("FA backward: malformed tape");
  BackwardResult br = net_.backward(tape.tapes[0], logit_grad);
  HeadGrads grads;
  grads.params = std::move(br.param_grads);
  grads.phi_grad = br.input_grad.leftCols(Eigen::Index(tape.phi_cols));
  return grads;
}

Matrix FeatureAdaptationHead::logits_all(const Matrix& phi) const {
  Matrix out(phi.rows(), Eigen::Index(arms()));
  std::vector<int> arm(std::size_t(phi.rows()));
  for (std::size_t k = 0; k < arms(); ++k) {
    std::fill(arm.begin(), arm.end(), int(k));
    out.col(Eigen::Index(k)) = forward(phi, arm, nullptr).col(0);
  }
  return out;
}

std::unique_ptr<TreatmentHead> FeatureAdaptationHead::clone() const {
  return std::make_unique<FeatureAdaptationHead>(*this);
}

// ---------------------------------------------------------------------------
// Structure adaptation

StructureAdaptationHead::StructureAdaptationHead(std::size_t in_dim, std::size_t arms,
                                                 std::span<const std::size_t> hidden,
                                                 Activation activation,
                                                 std::uint64_t seed)
    : TreatmentHead(in_dim, arms) {
  const auto dims = head_dims(in_dim, hidden, 1);
  branches_.reserve(arms);
  for (std::size_t k = 0; k < arms; ++k) {
    branches_.emplace_back(dims, activation, Activation::kIdentity,
                           derive_seed(seed, 100 + k));
  }
}

StructureAdaptationHead::StructureAdaptationHead(std::size_t in_dim,
                                                 std::vector<DenseNet> branches)
    : TreatmentHead(in_dim, branches.size()), branches_(std::move(branches)) {
  for (const DenseNet& b : branches_) {
    if (b.in_dim() != in_dim || b.out_dim() != 1) {
      throw ShapeError("SA branch must map " + std::to_string(in_dim) +
                       " inputs to 1 output");
    }
  }
}

Matrix StructureAdaptationHead::forward(const Matrix& phi, std::span<const int> treatments,
                                        HeadTape* tape, OpCounter* counter) const {
  check_inputs(phi, treatments);
  std::vector<std::vector<std::size_t>> routes(arms());
  for (std::size_t i = 0; i < treatments.size(); ++i) {
    routes[std::size_t(treatments[i])].push_back(i);
  }
  Matrix logits(phi.rows(), 1);
  if (tape != nullptr) {
    tape->tapes.assign(arms(), Tape{});
    tape->rows = std::size_t(phi.rows());
    tape->phi_cols = std::size_t(phi.cols());
  }
  for (std::size_t k = 0; k < arms(); ++k) {
    if (routes[k].empty()) continue;
    Matrix sub = gather_rows(phi, routes[k]);
    Matrix out;
    if (tape != nullptr) {
      ForwardResult fr = branches_[k].forward(sub, counter);
      out = std::move(fr.output);
      tape->tapes[k] = std::move(fr.tape);
    } else {
      out = branches_[k].infer(sub, counter);
    }
    for (std::size_t r = 0; r < routes[k].size(); ++r) {
      logits(Eigen::Index(routes[k][r]), 0) = out(Eigen::Index(r), 0);
    }
  }
  if (tape != nullptr) tape->routes = std::move(routes);
  return logits;
}

HeadGrads StructureAdaptationHead::backward(const HeadTape& tape,
                                            const Matrix& logit_grad) const {
  if (tape.routes.size() != arms() || tape.tapes.size() != arms()) {
    throw ContractError("SA backward: malformed tape");
  }
  HeadGrads grads;
  grads.phi_grad = Matrix::Zero(Eigen::Index(tape.rows), Eigen::Index(tape.phi_cols));
  for (std::size_t k = 0; k < arms(); ++k) {
    const auto& rows = tape.routes[k];
    if (rows.empty()) {
      for (const Matrix* p : branches_[k].params()) {
        grads.params.push_back(Matrix::Zero(p->rows(), p->cols()));
      }
      continue;
    }
    Matrix sub_grad = gather_rows(logit_grad, rows);
    BackwardResult br = branches_[k].backward(tape.tapes[k], sub_grad);
    for (Matrix& g : br.param_grads) grads.params.push_back(std::move(g));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      grads.phi_grad.row(Eigen::Index(rows[r])) = br.input_grad.row(Eigen::Index(r));
    }
  }
  return grads;
}

Matrix StructureAdaptationHead::logits_all(const Matrix& phi) const {
  if (std::size_t(phi.cols()) != in_dim()) {
    throw ShapeError("head expects " + std::to_string(in_dim()) + " hidden features");
  }
  Matrix out(phi.rows(), Eigen::Index(arms()));
  for (std::size_t k = 0; k < arms(); ++k) {
    out.col(Eigen::Index(k)) = branches_[k].infer(phi).col(0);
  }
  return out;
}

std::vector<Matrix*> StructureAdaptationHead::params() {
  std::vector<Matrix*> out;
  for (DenseNet& b : branches_) {
    for (Matrix* p : b.params()) out.push_back(p);
  }
  return out;
}

std::vector<const Matrix*> StructureAdaptationHead::params() const {
  std::vector<const Matrix*> out;
  for (const DenseNet& b : branches_) {
    for (const Matrix* p : b.params()) out.push_back(p);
  }
  return out;
}

std::unique_ptr<TreatmentHead> StructureAdaptationHead::clone() const {
  return std::make_unique<StructureAdaptationHead>(*this);
}

// ---------------------------------------------------------------------------
// Orthogonal function adaptation

OrthogonalFunctionHead::OrthogonalFunctionHead(std::size_t in_dim, std::size_t arms,
                                               int degree,
                                               std::span<const std::size_t> hidden,
                                               Activation activation,
                                               std::uint64_t seed)
    : OrthogonalFunctionHead(
          in_dim, arms, degree,
          DenseNet(head_dims(in_dim, hidden, std::size_t(std::max(degree, 0)) + 1),
                   activation, Activation::kIdentity, seed)) {}

OrthogonalFunctionHead::OrthogonalFunctionHead(std::size_t in_dim, std::size_t arms,
                                               int degree, DenseNet coefficients)
    : TreatmentHead(in_dim, arms), degree_(degree), net_(std::move(coefficients)) {
  if (degree_ < 0) throw ConfigError("OFA degree must be >= 0");
  if (net_.in_dim() != in_dim || net_.out_dim() != std::size_t(degree_) + 1) {
    throw ShapeError("OFA coefficient network must map " + std::to_string(in_dim) +
                     " inputs to " + std::to_string(degree_ + 1) + " outputs");
  }
  arm_basis_.resize(Eigen::Index(arms), degree_ + 1);
  for (std::size_t k = 0; k < arms; ++k) {
    const auto p = legendre_eval(degree_, treatment_to_scalar(int(k), int(arms)));
    for (int j = 0; j <= degree_; ++j) arm_basis_(Eigen::Index(k), j) = p[std::size_t(j)];
  }
}

Matrix OrthogonalFunctionHead::forward(const Matrix& phi, std::span<const int> treatments,
                                       HeadTape* tape, OpCounter* counter) const {
  check_inputs(phi, treatments);
  Matrix basis(phi.rows(), degree_ + 1);
  for (std::size_t i = 0; i < treatments.size(); ++i) {
    basis.row(Eigen::Index(i)) = arm_basis_.row(treatments[i]);
  }
  Matrix coef;
  if (tape != nullptr) {
    ForwardResult fr = net_.forward(phi, counter);
    coef = std::move(fr.output);
    tape->tapes.assign(1, std::move(fr.tape));
    tape->rows = std::size_t(phi.rows());
    tape->phi_cols = std::size_t(phi.cols());
  } else {
    coef = net_.infer(phi, counter);
  }
  if (counter != nullptr) {
    counter->flops += std::uint64_t(phi.rows()) * std::uint64_t(2 * (degree_ + 1));
  }
  Matrix logits = coef.cwiseProduct(basis).rowwise().sum();
  if (tape != nullptr) tape->basis = std::move(basis);
  return logits;
}

HeadGrads OrthogonalFunctionHead::backward(const HeadTape& tape,
                                           const Matrix& logit_grad) const {
  if (tape.tapes.size() != 1 || tape.basis.rows() != logit_grad.rows()) {
    throw ContractError("OFA backward: malformed tape");
  }
  // d logit / d a_j = P_j(u)
  Matrix coef_grad = tape.basis.array().colwise() * logit_grad.col(0).array();
  BackwardResult br = net_.backward(tape.tapes[0], coef_grad);
  HeadGrads grads;
  grads.params = std::move(br.param_grads);
  grads.phi_grad = std::move(br.input_grad);
  return grads;
}

Matrix OrthogonalFunctionHead::logits_all(const Matrix& phi) const {
  return net_.infer(phi) * arm_basis_.transpose();
}

Matrix OrthogonalFunctionHead::forward_scaled(const Matrix& phi,
                                              std::span<const double> scaled) const {
  if (std::size_t(phi.rows()) != scaled.size()) {
    throw ShapeError("forward_scaled: one treatment value per row required");
  }
  Matrix coef = net_.infer(phi);
  Matrix logits(phi.rows(), 1);
  for (std::size_t i = 0; i < scaled.size(); ++i) {
    const auto p = legendre_eval(degree_, scaled[i]);
    double s = 0.0;
    for (int j = 0; j <= degree_; ++j) s += coef(Eigen::Index(i), j) * p[std::size_t(j)];
    logits(Eigen::Index(i), 0) = s;
  }
  return logits;
}

std::unique_ptr<TreatmentHead> OrthogonalFunctionHead::clone() const {
  return std::make_unique<OrthogonalFunctionHead>(*this);
}

std::unique_ptr<TreatmentHead> make_head(const HeadConfig& config, std::size_t in_dim,
                                         std::size_t arms, std::uint64_t seed) {
  if (arms < 2) throw ConfigError("a head needs at least 2 arms");
  switch (config.kind) {
    case HeadKind::kFa:
      return std::make_unique<FeatureAdaptationHead>(in_dim, arms, config.hidden,
                                                     config.activation, seed);
    case HeadKind::kSa:
      return std::make_unique<StructureAdaptationHead>(in_dim, arms, config.hidden,
                                                       config.activation, seed);
    case HeadKind::kOfa: {
      const int degree = config.degree < 0 ? int(arms) - 1 : config.degree;
      return std::make_unique<OrthogonalFunctionHead>(in_dim, arms, degree,
                                                      config.hidden,
                                                      config.activation, seed);
    }
  }
  throw ConfigError("unknown head kind");
}

}  // namespace uplift
