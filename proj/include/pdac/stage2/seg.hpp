#pragma once

#include <map>
#include <memory>
#include <set>

#include "pdac/core/geometry.hpp"
#include "pdac/nn/checkpoint.hpp"
#include "pdac/nn/layers.hpp"
#include "pdac/stage1/slice.hpp"

namespace pdac::stage2 {

using stage1::DegenerateDatasetError;
using stage1::TrainingCase;

/// Downsampling trunk shared by the segmentation network and the transferred
/// classifier backbone: stem at full resolution, two stride-2 stages.
/// Channel widths are fixed (8/16/32); tensor names follow "encoder.*" so a
/// segmentation checkpoint's encoder subtree maps one-to-one onto a
/// classifier built from the same trunk. A stem with in_ch != 1 is named
/// "encoder.stem4.*" and is never part of a transfer.
class Encoder3d : public nn::Module {
 public:
  static constexpr int kC0 = 8, kC1 = 16, kC2 = 32;

  Encoder3d(int in_ch, std::mt19937_64& rng);

  struct Features {
    nn::Tensor stem;  // [8, Z, Y, X]
    nn::Tensor e1;    // [16, Z/2, Y/2, X/2]
    nn::Tensor e2;    // [32, Z/4, Y/4, X/4]
  };

  Features forward(const nn::Tensor& x);
  /// Backward through the trunk. de1/dstem may be empty tensors when no skip
  /// gradient flows into that scale.
  nn::Tensor backward(const nn::Tensor& de2, const nn::Tensor& de1,
                      const nn::Tensor& dstem);

  void collect_params(std::vector<nn::Param*>& out) override;
  int in_ch() const { return in_ch_; }

 private:
  int in_ch_;
  std::unique_ptr<nn::Conv3d> stem_, d1a_, d1b_, d2a_, d2b_;
  nn::ReLU r_stem_, r1a_, r1b_, r2a_, r2b_;
};

struct SegPrediction {
  LabelMask mask;
  std::map<int, double> per_class_dice;  // filled by evaluation paths only
  bool used_fallback = false;
};

/// 3-D encoder-decoder segmentation network, 3 output classes.
class UNet3d : public nn::Module {
 public:
  explicit UNet3d(std::uint64_t seed);

  /// x: [1, Z, Y, X] with extents divisible by 4.
  nn::Tensor forward(const nn::Tensor& x);
  nn::Tensor backward(const nn::Tensor& dlogits);

  /// Argmax prediction for any input size; pads internally to the stride
  /// requirement and crops back, so output shape always equals input shape.
  /// Volumes larger than the inference window are processed sliding-window
  /// with 0.5 overlap and averaged logits.
  SegPrediction predict(const Volume& volume);

  void collect_params(std::vector<nn::Param*>& out) override;
  nn::Checkpoint to_checkpoint(std::int64_t seed) const;
  void from_checkpoint(const nn::Checkpoint& ck);

  bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }

  Index3 inference_window{32, 64, 64};

 private:
  std::unique_ptr<Encoder3d> encoder_;
  nn::Upsample3d2x up1_, up0_;
  std::unique_ptr<nn::Conv3d> dec1_, dec0_, head_;
  nn::ReLU rdec1_, rdec0_;
  nn::Tensor cat1_in_a_, cat0_in_a_;  // cached encoder outputs for skips
  bool trained_ = false;
};

/// 2|A∩B| / (|A|+|B|) over voxels of class_id; 1.0 when both sets are empty.
double dice(const LabelMask& pred, const LabelMask& truth, int class_id);

struct SegTrainConfig {
  int epochs = 12;
  int patches_per_case = 3;
  Index3 patch_shape{24, 48, 48};
  double fg_patch_prob = 0.7;
  double dice_weight = 1.0;
  float lr = 1e-3f;
  std::uint64_t seed = 0;
};

struct SegTrainReport {
  std::vector<double> epoch_losses;
  std::map<int, double> val_dice;  // mean per-class Dice on eval cases
};

SegTrainReport train_segmentation(UNet3d& model,
                                  const std::vector<TrainingCase>& train_cases,
                                  const std::vector<TrainingCase>& eval_cases,
                                  const SegTrainConfig& cfg);

struct InformedCrop {
  Volume volume;
  LabelMask mask;
  BBox3 bbox;
  bool used_fallback = false;
};

/// Crop volume and predicted mask to the foreground bounding box (dilated by
/// margin). Empty predictions fall back to a center crop of fallback_yx with
/// an all-background mask.
InformedCrop informed_crop(const Volume& volume, const LabelMask& pred_mask,
                           Index3 margin, std::array<std::int64_t, 2> fallback_yx,
                           const std::set<int>& foreground = {1, 2});

/// Channel 0 = intensities, channels 1..3 = one-hot of pred_mask.
nn::Tensor forward_channels(const Volume& volume, const LabelMask& pred_mask);

}  // namespace pdac::stage2
