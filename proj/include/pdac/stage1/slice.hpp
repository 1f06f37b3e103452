#pragma once

#include <memory>

#include "pdac/core/geometry.hpp"
#include "pdac/io/dataset.hpp"
#include "pdac/nn/checkpoint.hpp"
#include "pdac/nn/layers.hpp"
#include "pdac/nn/lstm.hpp"

namespace pdac::stage1 {

struct EmptyPredictionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateDatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Binary per-slice labels along z, plus the probability cutoff used to
/// produce them at inference time.
struct SliceLabelSequence {
  std::vector<std::uint8_t> values;
  double threshold = 0.5;
};

/// values[z] = 1 iff slice z contains at least one pancreas or tumour voxel.
SliceLabelSequence derive_slice_labels(const LabelMask& mask);

/// Set every index strictly between the first and last positive to 1.
/// Idempotent and monotone; all-zero input is returned unchanged.
SliceLabelSequence fill_gaps(const SliceLabelSequence& seq);

/// Keep slices [first_positive - margin, last_positive + margin], clipped.
/// Throws EmptyPredictionError on an all-zero sequence.
std::pair<Volume, BBox3> z_crop(const Volume& volume,
                                const SliceLabelSequence& seq,
                                std::int64_t margin);

struct SliceModelConfig {
  int encoder_channels[3] = {8, 16, 32};
  int hidden = 32;
  double threshold = 0.5;
  bool bidirectional = false;
};

/// 2-D conv encoder per slice + LSTM over the z-ordered feature sequence +
/// per-step linear head. Handles any slice count and in-plane size. Each
/// slice feature concatenates mean and max pooling so a few foreground
/// pixels near the z boundary still register after downsampling.
class SliceModel : public nn::Module {
 public:
  SliceModel(const SliceModelConfig& cfg, std::uint64_t seed);

  /// One logit per slice, [T].
  nn::Tensor forward_logits(const Volume& volume);
  /// Backward from per-slice logit grads; accumulates parameter grads.
  void backward_logits(const Volume& volume, const nn::Tensor& dlogits);

  SliceLabelSequence predict(const Volume& volume);

  void collect_params(std::vector<nn::Param*>& out) override;
  nn::Checkpoint to_checkpoint(std::int64_t seed) const;
  void from_checkpoint(const nn::Checkpoint& ck);

  bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }
  const SliceModelConfig& config() const { return cfg_; }

 private:
  nn::Tensor encode_slice(const Volume& volume, std::int64_t z);

  SliceModelConfig cfg_;
  std::unique_ptr<nn::Conv2d> conv1_, conv2_, conv3_;
  nn::ReLU relu1_, relu2_, relu3_;
  nn::GlobalAvgPool gap_;
  nn::GlobalMaxPool gmp_;
  std::unique_ptr<nn::LSTM> lstm_, lstm_rev_;
  std::unique_ptr<nn::Linear> head_;
  bool trained_ = false;
};

struct SliceTrainConfig {
  int epochs = 15;
  float lr = 1e-2f;
  std::uint64_t seed = 0;
};

struct SliceTrainReport {
  std::vector<double> epoch_losses;
  double accuracy_raw = 0.0;        // before gap-fill
  double accuracy_filled = 0.0;     // after gap-fill
};

struct TrainingCase {
  Volume volume;
  LabelMask mask;
};

/// Per-slice BCE training; evaluation reports accuracy before and after the
/// gap-fill post-processing on eval_cases.
SliceTrainReport train_slice_classifier(SliceModel& model,
                                        const std::vector<TrainingCase>& train_cases,
                                        const std::vector<TrainingCase>& eval_cases,
                                        const SliceTrainConfig& cfg);

}  // namespace pdac::stage1
