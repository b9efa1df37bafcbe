#ifndef UPLIFT_MODEL_H_
#define UPLIFT_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uplift/dataset.h"
#include "uplift/heads.h"
#include "uplift/losses.h"
#include "uplift/numkit.h"

namespace uplift {

// slearner: phi = X. bnn: representation + FA. tarnet_cfrnet: representation
// + SA/OFA (CFRNet once a discrepancy is added). drcfr: representation split
// into instrumental, confounding and adjustment blocks; the head reads
// confounding + adjustment and the discrepancy reads confounding.
enum class Backbone { kSlearner, kBnn, kTarnetCfrnet, kDrcfr };

std::string_view to_string(Backbone backbone);
Backbone parse_backbone(std::string_view name);

struct LossWeights {
  double lambda1 = 1.0;
  double lambda2 = 0.1;
};

struct ModelSpec {
  Backbone backbone = Backbone::kTarnetCfrnet;
  HeadKind head = HeadKind::kOfa;
  DiscKind disc = DiscKind::kNone;
  Pairing pairing = Pairing::kAllPairs;
  LossWeights weights;
  // Representation net: d -> rep_hidden... -> rep_out. Unused for slearner.
  std::vector<std::size_t> rep_hidden{128};
  std::size_t rep_out = 128;
  std::vector<std::size_t> head_hidden{64, 64};
  // OFA degree; negative means arms - 1.
  int ofa_degree = -1;
  Activation activation = Activation::kElu;
  std::uint64_t seed = 0;

  // Throws ConfigError for incompatible combinations.
  void validate() const;
  // Display name in table style, e.g. "CFRNet+OFA+WASS".
  std::string label() const;
};

struct Batch {
  Matrix x;
  std::vector<int> t;
  std::vector<double> y;
  std::uint64_t resample_seed = 0;
};

class UpliftModel {
 public:
  // Fresh weights drawn from spec.seed.
  UpliftModel(ModelSpec spec, std::size_t dim, std::size_t arms);
  // Assembles a model from existing networks (deserialization).
  UpliftModel(ModelSpec spec, std::size_t dim, std::size_t arms, DenseNet representation,
              std::unique_ptr<TreatmentHead> head);

  UpliftModel(const UpliftModel& other);
  UpliftModel& operator=(const UpliftModel& other);
  UpliftModel(UpliftModel&&) noexcept = default;
  UpliftModel& operator=(UpliftModel&&) noexcept = default;

  const ModelSpec& spec() const { return spec_; }
  std::size_t dim() const { return dim_; }
  std::size_t arms() const { return arms_; }

  const DenseNet& representation() const { return rep_; }
  const TreatmentHead& head() const { return *head_; }
  TreatmentHead& head() { return *head_; }

  // Full representation output (X itself for slearner).
  Matrix represent(const Matrix& x) const;
  // Columns of the representation the head and the discrepancy read.
  Matrix head_input(const Matrix& phi) const;
  Matrix balanced_block(const Matrix& phi) const;
  Eigen::Index head_offset() const;
  Eigen::Index head_width() const;
  Eigen::Index balance_offset() const;
  Eigen::Index balance_width() const;

  // Logits [N x 1] for the observed treatments.
  Matrix logits(const Matrix& x, std::span<const int> treatments) const;
  // P(Y = 1 | x, arm k) for every row and arm: [N x arms].
  Matrix predict_all(const Matrix& x) const;

  // Representation parameters first, then head parameters.
  std::vector<Matrix*> params();
  std::vector<const Matrix*> params() const;
  std::size_t param_count() const;

 private:
  ModelSpec spec_;
  std::size_t dim_;
  std::size_t arms_;
  DenseNet rep_;  // empty for slearner
  std::unique_ptr<TreatmentHead> head_;
};

UpliftModel build_model(const ModelSpec& spec, std::size_t dim, std::size_t arms);

struct LossBreakdown {
  double total = 0.0;
  double bce = 0.0;
  double disc = 0.0;
};

struct LossAndGrads {
  LossBreakdown loss;
  std::vector<Matrix> grads;  // aligned with UpliftModel::params()
};

// lambda1 * BCE + lambda2 * discrepancy, with gradients for every parameter.
LossAndGrads total_loss(const UpliftModel& model, const Batch& batch);
LossAndGrads total_loss(const UpliftModel& model, const Batch& batch, LossWeights weights);
// Value only.
LossBreakdown evaluate_loss(const UpliftModel& model, const Batch& batch);
LossBreakdown evaluate_loss(const UpliftModel& model, const Batch& batch, LossWeights weights);

struct TrainOptions {
  int epochs = 300;
  std::size_t batch_size = 256;
  AdamConfig adam;
  // Held out for early stopping; 0 disables early stopping.
  double val_fraction = 0.1;
  int patience = 30;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;
  double bce = 0.0;    // mean over training batches
  double disc = 0.0;   // mean over training batches
  double total = 0.0;
  double val_bce = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  bool stopped_early = false;
  std::uint64_t steps = 0;
};

// Mini-batch Adam. With a validation split the parameters from the epoch
// with the lowest validation BCE are restored at the end. Throws
// TrainingError on a non-finite loss.
TrainResult train(UpliftModel& model, const Dataset& data, const TrainOptions& options);

}  // namespace uplift

#endif  // UPLIFT_MODEL_H_
