#include "uplift/model.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "uplift/errors.h"

namespace uplift {
namespace {

Matrix sigmoid(const Matrix& logits) {
  return logits.unaryExpr([](double z) { return 1.0 / (1.0 + std::exp(-z)); });
}

std::vector<double> column(const Matrix& m) {
  return std::vector<double>(m.data(), m.data() + m.size());
}

void check_batch(const UpliftModel& model, const Batch& batch) {
  if (batch.t.empty()) throw ContractError("loss: empty batch");
  if (std::size_t(batch.x.rows()) != batch.t.size() || batch.y.size() != batch.t.size()) {
    throw ShapeError("loss: batch x/t/y row counts differ");
  }
  if (std::size_t(batch.x.cols()) != model.dim()) {
    throw ShapeError("loss: batch has " + std::to_string(batch.x.cols()) +
                     " covariates, model expects " + std::to_string(model.dim()));
  }
}

LossAndGrads compute_loss(const UpliftModel& model, const Batch& batch, LossWeights weights,
                          bool want_grads) {
  check_batch(model, batch);
  const ModelSpec& spec = model.spec();
  const bool has_rep = spec.backbone != Backbone::kSlearner;

  ForwardResult rep;
  if (has_rep) {
    rep = model.representation().forward(batch.x);
  } else {
    rep.output = batch.x;
  }
  const Matrix& phi = rep.output;
  HeadTape head_tape;
  const Matrix logits =
      model.head().forward(model.head_input(phi), batch.t, want_grads ? &head_tape : nullptr);
  const auto probs = column(sigmoid(logits));
  const BceResult bce = bce_loss(probs, batch.y);

  MultiDiscrepancy disc;
  if (spec.disc != DiscKind::kNone) {
    DiscrepancyOptions opts;
    opts.kind = spec.disc;
    opts.pairing = spec.pairing;
    opts.resample_seed = batch.resample_seed;
    disc = discrepancy_multi(model.balanced_block(phi), batch.t, int(model.arms()), opts);
  }

  LossAndGrads out;
  out.loss.bce = bce.loss;
  out.loss.disc = disc.value;
  out.loss.total = weights.lambda1 * bce.loss +
                   (spec.disc == DiscKind::kNone ? 0.0 : weights.lambda2 * disc.value);
  if (!want_grads) return out;

  HeadGrads head_grads = model.head().backward(head_tape, weights.lambda1 * bce.logit_grad);
  if (has_rep) {
    Matrix phi_grad = Matrix::Zero(phi.rows(), phi.cols());
    phi_grad.middleCols(model.head_offset(), model.head_width()) += head_grads.phi_grad;
    if (spec.disc != DiscKind::kNone) {
      phi_grad.middleCols(model.balance_offset(), model.balance_width()) +=
          weights.lambda2 * disc.grad;
    }
    BackwardResult rep_grads = model.representation().backward(rep.tape, phi_grad);
    out.grads = std::move(rep_grads.param_grads);
  }
  for (Matrix& g : head_grads.params) out.grads.push_back(std::move(g));
  return out;
}

Batch make_batch(const Dataset& data, std::span<const std::size_t> rows) {
  Batch b;
  b.x = gather_rows(data.x, rows);
  b.t.reserve(rows.size());
  b.y.reserve(rows.size());
  for (std::size_t r : rows) {
    b.t.push_back(data.t[r]);
    b.y.push_back(double(data.y[r]));
  }
  return b;
}

std::vector<Matrix> snapshot(const UpliftModel& model) {
  std::vector<Matrix> out;
  for (const Matrix* p : model.params()) out.push_back(*p);
  return out;
}

void restore(UpliftModel& model, const std::vector<Matrix>& saved) {
  auto params = model.params();
  for (std::size_t i = 0; i < params.size(); ++i) *params[i] = saved[i];
}

}  // namespace

std::string_view to_string(Backbone backbone) {
  switch (backbone) {
    case Backbone::kSlearner:
      return "slearner";
    case Backbone::kBnn:
      return "bnn";
    case Backbone::kTarnetCfrnet:
      return "tarnet_cfrnet";
    case Backbone::kDrcfr:
      return "drcfr";
  }
  return "slearner";
}

Backbone parse_backbone(std::string_view name) {
  if (name == "slearner") return Backbone::kSlearner;
  if (name == "bnn") return Backbone::kBnn;
  if (name == "tarnet_cfrnet" || name == "tarnet" || name == "cfrnet") {
    return Backbone::kTarnetCfrnet;
  }
  if (name == "drcfr") return Backbone::kDrcfr;
  throw ConfigError("unknown backbone '" + std::string(name) + "'");
}

void ModelSpec::validate() const {
  const bool fa_backbone = backbone == Backbone::kSlearner || backbone == Backbone::kBnn;
  if (fa_backbone && head != HeadKind::kFa) {
    throw ConfigError(std::string(to_string(backbone)) + " requires the FA head");
  }
  if (!fa_backbone && head == HeadKind::kFa) {
    throw ConfigError(std::string(to_string(backbone)) + " accepts only SA or OFA heads");
  }
  if (backbone == Backbone::kSlearner && disc != DiscKind::kNone) {
    throw ConfigError("slearner has no representation to balance; use disc=none");
  }
  if (!(weights.lambda1 > 0.0) || !std::isfinite(weights.lambda1)) {
    throw ConfigError("lambda1 must be positive");
  }
  if (!(weights.lambda2 >= 0.0) || !std::isfinite(weights.lambda2)) {
    throw ConfigError("lambda2 must be non-negative");
  }
  if (backbone != Backbone::kSlearner) {
    if (rep_out == 0) throw ConfigError("rep_out must be positive");
    if (backbone == Backbone::kDrcfr && rep_out % 3 != 0) {
      throw ConfigError("drcfr rep_out must split into three equal blocks");
    }
  }
  for (std::size_t w : rep_hidden) {
    if (w == 0) throw ConfigError("hidden widths must be positive");
  }
  for (std::size_t w : head_hidden) {
    if (w == 0) throw ConfigError("hidden widths must be positive");
  }
}

std::string ModelSpec::label() const {
  std::string out;
  switch (backbone) {
    case Backbone::kSlearner:
      out = "Slearner";
      break;
    case Backbone::kBnn:
      out = "BNN";
      break;
    case Backbone::kTarnetCfrnet:
      out = disc == DiscKind::kNone ? "TARNet" : "CFRNet";
      break;
    case Backbone::kDrcfr:
      out = "DR-CFR";
      break;
  }
  out += head == HeadKind::kFa ? "+FA" : head == HeadKind::kSa ? "+SA" : "+OFA";
  if (disc == DiscKind::kMmd) out += "+MMD";
  if (disc == DiscKind::kWass) out += "+WASS";
  return out;
}

UpliftModel::UpliftModel(ModelSpec spec, std::size_t dim, std::size_t arms)
    : spec_(std::move(spec)), dim_(dim), arms_(arms) {
  spec_.validate();
  if (dim == 0) throw ConfigError("model needs at least one covariate");
  if (arms < 2) throw ConfigError("model needs at least 2 arms");
  if (spec_.backbone != Backbone::kSlearner) {
    std::vector<std::size_t> dims{dim};
    dims.insert(dims.end(), spec_.rep_hidden.begin(), spec_.rep_hidden.end());
    dims.push_back(spec_.rep_out);
    rep_ = DenseNet(dims, spec_.activation, spec_.activation, derive_seed(spec_.seed, 1));
  }
  HeadConfig hc;
  hc.kind = spec_.head;
  hc.hidden = spec_.head_hidden;
  hc.degree = spec_.ofa_degree;
  hc.activation = spec_.activation;
  head_ = make_head(hc, std::size_t(head_width()), arms, derive_seed(spec_.seed, 2));
}

UpliftModel::UpliftModel(ModelSpec spec, std::size_t dim, std::size_t arms,
                         DenseNet representation, std::unique_ptr<TreatmentHead> head)
    : spec_(std::move(spec)),
      dim_(dim),
      arms_(arms),
      rep_(std::move(representation)),
      head_(std::move(head)) {
  spec_.validate();
  if (spec_.backbone != Backbone::kSlearner &&
      (rep_.in_dim() != dim || rep_.out_dim() != spec_.rep_out)) {
    throw ShapeError("representation network does not match the model spec");
  }
  if (!head_ || head_->kind() != spec_.head || head_->arms() != arms ||
      head_->in_dim() != std::size_t(head_width())) {
    throw ShapeError("head does not match the model spec");
  }
}

UpliftModel::UpliftModel(const UpliftModel& other)
    : spec_(other.spec_),
      dim_(other.dim_),
      arms_(other.arms_),
      rep_(other.rep_),
      head_(other.head_->clone()) {}

UpliftModel& UpliftModel::operator=(const UpliftModel& other) {
  if (this != &other) {
    spec_ = other.spec_;
    dim_ = other.dim_;
    arms_ = other.arms_;
    rep_ = other.rep_;
    head_ = other.head_->clone();
  }
  return *this;
}

Eigen::Index UpliftModel::head_offset() const {
  return spec_.backbone == Backbone::kDrcfr ? Eigen::Index(spec_.rep_out / 3) : 0;
}

Eigen::Index UpliftModel::head_width() const {
  switch (spec_.backbone) {
    case Backbone::kSlearner:
      return Eigen::Index(dim_);
    case Backbone::kDrcfr:
      return Eigen::Index(2 * (spec_.rep_out / 3));
    default:
      return Eigen::Index(spec_.rep_out);
  }
}

Eigen::Index UpliftModel::balance_offset() const { return head_offset(); }

Eigen::Index UpliftModel::balance_width() const {
  switch (spec_.backbone) {
    case Backbone::kSlearner:
      return Eigen::Index(dim_);
    case Backbone::kDrcfr:
      return Eigen::Index(spec_.rep_out / 3);
    default:
      return Eigen::Index(spec_.rep_out);
  }
}

Matrix UpliftModel::represent(const Matrix& x) const {
  if (std::size_t(x.cols()) != dim_) {
    throw ShapeError("model expects " + std::to_string(dim_) + " covariates, got " +
                     std::to_string(x.cols()));
  }
  if (spec_.backbone == Backbone::kSlearner) return x;
  return rep_.infer(x);
}

Matrix UpliftModel::head_input(const Matrix& phi) const {
  return phi.middleCols(head_offset(), head_width());
}

Matrix UpliftModel::balanced_block(const Matrix& phi) const {
  return phi.middleCols(balance_offset(), balance_width());
}

Matrix UpliftModel::logits(const Matrix& x, std::span<const int> treatments) const {
  return head_->forward(head_input(represent(x)), treatments, nullptr);
}

Matrix UpliftModel::predict_all(const Matrix& x) const {
  return sigmoid(head_->logits_all(head_input(represent(x))));
}

std::vector<Matrix*> UpliftModel::params() {
  std::vector<Matrix*> out = rep_.params();
  for (Matrix* p : head_->params()) out.push_back(p);
  return out;
}

std::vector<const Matrix*> UpliftModel::params() const {
  std::vector<const Matrix*> out = rep_.params();
  for (const Matrix* p : std::as_const(*head_).params()) out.push_back(p);
  return out;
}

std::size_t UpliftModel::param_count() const { return rep_.param_count() + head_->param_count(); }

UpliftModel build_model(const ModelSpec& spec, std::size_t dim, std::size_t arms) {
  return UpliftModel(spec, dim, arms);
}

LossAndGrads total_loss(const UpliftModel& model, const Batch& batch) {
  return compute_loss(model, batch, model.spec().weights, true);
}

LossAndGrads total_loss(const UpliftModel& model, const Batch& batch, LossWeights weights) {
  return compute_loss(model, batch, weights, true);
}

LossBreakdown evaluate_loss(const UpliftModel& model, const Batch& batch) {
  return compute_loss(model, batch, model.spec().weights, false).loss;
}

LossBreakdown evaluate_loss(const UpliftModel& model, const Batch& batch, LossWeights weights) {
  return compute_loss(model, batch, weights, false).loss;
}

TrainResult train(UpliftModel& model, const Dataset& data, const TrainOptions& options) {
  data.validate();
  if (data.size() == 0) throw ContractError("train: empty dataset");
  if (data.dim() != model.dim() || std::size_t(data.arms) != model.arms()) {
    throw ConfigError("train: dataset shape (d=" + std::to_string(data.dim()) + ", m=" +
                      std::to_string(data.arms) + ") does not match the model (d=" +
                      std::to_string(model.dim()) + ", m=" + std::to_string(model.arms()) + ")");
  }
  if (options.batch_size == 0) throw ConfigError("train: batch size must be positive");
  if (!(options.val_fraction >= 0.0 && options.val_fraction < 1.0)) {
    throw ConfigError("train: val_fraction must lie in [0, 1)");
  }

  TrainResult result;
  if (options.epochs <= 0) return result;

  std::mt19937_64 rng(derive_seed(options.seed, 7));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t(0));
  std::size_t n_val = 0;
  if (options.val_fraction > 0.0) {
    std::shuffle(order.begin(), order.end(), rng);
    n_val = std::size_t(std::floor(options.val_fraction * double(data.size())));
    if (n_val >= data.size()) n_val = 0;
  }
  const std::vector<std::size_t> val_rows(order.begin(), order.begin() + std::ptrdiff_t(n_val));
  std::vector<std::size_t> train_rows(order.begin() + std::ptrdiff_t(n_val), order.end());
  const Batch val_batch = n_val > 0 ? make_batch(data, val_rows) : Batch{};

  AdamState state(model.params(), options.adam);
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Matrix> best_params;
  int since_best = 0;

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::shuffle(train_rows.begin(), train_rows.end(), rng);
    EpochRecord record;
    record.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < train_rows.size(); start += options.batch_size) {
      const std::size_t stop = std::min(train_rows.size(), start + options.batch_size);
      Batch batch = make_batch(
          data, std::span<const std::size_t>(train_rows.data() + start, stop - start));
      batch.resample_seed = derive_seed(options.seed, 1000 + result.steps);
      LossAndGrads lg = total_loss(model, batch);
      if (!std::isfinite(lg.loss.total)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", step " << result.steps
            << " (bce=" << lg.loss.bce << ", disc=" << lg.loss.disc << ")";
        throw TrainingError(msg.str());
      }
      adam_step(model.params(), lg.grads, state);
      ++result.steps;
      ++batches;
      record.bce += lg.loss.bce;
      record.disc += lg.loss.disc;
      record.total += lg.loss.total;
    }
    if (batches > 0) {
      record.bce /= double(batches);
      record.disc /= double(batches);
      record.total /= double(batches);
    }
    if (n_val > 0) {
      const auto probs = column(sigmoid(model.logits(val_batch.x, val_batch.t)));
      record.val_bce = bce_loss(probs, val_batch.y).loss;
      if (!std::isfinite(record.val_bce)) {
        throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));
      }
    }
    result.history.push_back(record);
    if (n_val > 0) {
      if (record.val_bce < best_val) {
        best_val = record.val_bce;
        result.best_epoch = epoch;
        best_params = snapshot(model);
        since_best = 0;
      } else if (++since_best >= options.patience && options.patience > 0) {
        result.stopped_early = true;
        break;
      }
    } else {
      result.best_epoch = epoch;
    }
  }
  if (n_val > 0 && !best_params.empty()) restore(model, best_params);
  return result;
}

}  // namespace uplift
