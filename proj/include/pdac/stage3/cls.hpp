#pragma once

#include <memory>

#include "pdac/nn/checkpoint.hpp"
#include "pdac/stage2/seg.hpp"

namespace pdac::stage3 {

struct SamplingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
using stage1::StateError;
using nn::TransferError;

enum class Backbone { Standalone, Transferred };

struct ClassifierSpec {
  Backbone backbone = Backbone::Standalone;
  int in_channels = 1;  // 1, or 4 with segmentation forwarding
};

struct TripletConfig {
  float margin = 1.0f;        // hinge margin on squared-L2 distances
  int epochs_stage_a = 10;    // triplet conditioning
  int epochs_stage_b = 20;    // cross-entropy
  int triplets_per_step = 8;
};

/// Response classifier. The embedding is read after global average pooling of
/// the deepest feature map, immediately before the linear head.
///
/// The transferred variant is built from the segmentation trunk (Encoder3d)
/// so its "encoder.*" tensors align with a stage-2 checkpoint; the standalone
/// variant is a small residual 3-D CNN with its own "backbone.*" names.
class Classifier : public nn::Module {
 public:
  static constexpr int kEmbedDim = stage2::Encoder3d::kC2;

  Classifier(const ClassifierSpec& spec, std::uint64_t seed);

  /// Embedding of x [in_channels, Z, Y, X]; leaves backward caches in place.
  nn::Tensor embed(const nn::Tensor& x);
  /// Backward through the backbone using the caches left by embed.
  void backbone_backward(const nn::Tensor& dembedding);

  float forward_logit(const nn::Tensor& x);
  /// Backward through head and backbone; caches must be from the matching
  /// forward_logit call.
  void backward_logit(float dlogit);

  /// sigmoid(logit); requires a trained model and matching channel count.
  float predict_response(const nn::Tensor& x);

  void collect_params(std::vector<nn::Param*>& out) override;
  std::vector<nn::Param*> backbone_params();
  void reinit_head(std::uint64_t seed);

  nn::Checkpoint to_checkpoint(std::int64_t seed) const;
  void from_checkpoint(const nn::Checkpoint& ck);

  const ClassifierSpec& spec() const { return spec_; }
  bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }

 private:
  ClassifierSpec spec_;
  // transferred path
  std::unique_ptr<stage2::Encoder3d> enc_;
  // standalone residual path
  std::unique_ptr<nn::Conv3d> s_stem_, b1a_, b1b_, b1p_, b2a_, b2b_, b2p_;
  nn::ReLU r_stem_, r1a_, r1out_, r2a_, r2out_;
  nn::Tensor b1_sum_, b2_sum_;  // pre-activation sums for residual backward
  nn::GlobalAvgPool gap_;
  std::unique_ptr<nn::Linear> head_;
  bool trained_ = false;
};

struct TransferManifest {
  std::vector<std::string> transferred;
  std::vector<std::string> fresh;
};

/// Copy every matching "encoder.*" tensor from a stage-2 checkpoint into the
/// classifier, bit-exactly. Shape mismatches throw TransferError naming the
/// tensor; classifier tensors without a checkpoint counterpart stay fresh and
/// are listed in the manifest.
TransferManifest transfer_encoder(const nn::Checkpoint& seg_checkpoint,
                                  Classifier& classifier);

/// Indices (anchor, positive, negative). The anchor is uniform over cases
/// whose class has >= 2 members; positive is a distinct same-class case;
/// negative is uniform over the other class.
std::array<std::size_t, 3> sample_triplet(const std::vector<int>& labels,
                                          std::mt19937_64& rng);

/// max(0, d(a,p) - d(a,n) + margin) with d = squared L2. Optional gradients
/// w.r.t. each embedding.
double triplet_loss(const nn::Tensor& za, const nn::Tensor& zp,
                    const nn::Tensor& zn, float margin, nn::Tensor* dza,
                    nn::Tensor* dzp, nn::Tensor* dzn);

struct ClsTrainConfig {
  TripletConfig triplet;
  float lr = 3e-3f;
  int batch = 4;
  bool class_weighting = true;  // BCE pos_weight = N_neg / N_pos
  std::uint64_t seed = 0;
};

struct ClsTrainReport {
  std::vector<double> stage_a_losses;  // per epoch
  std::vector<double> stage_b_losses;
};

/// Stage A: triplet loss on embeddings, backbone only. Stage B: head
/// reinitialized, then binary cross-entropy fine-tuning of everything.
/// epochs_stage_a = 0 degenerates to plain cross-entropy training.
ClsTrainReport train_two_stage(Classifier& model,
                               const std::vector<nn::Tensor>& inputs,
                               const std::vector<int>& labels,
                               const ClsTrainConfig& cfg);

}  // namespace pdac::stage3
