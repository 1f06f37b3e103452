#include "pdac/stage2/seg.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>

#include "pdac/nn/adam.hpp"
#include "pdac/nn/losses.hpp"

namespace pdac::stage2 {

// ---------------------------------------------------------------------------
// Encoder3d
// ---------------------------------------------------------------------------

Encoder3d::Encoder3d(int in_ch, std::mt19937_64& rng) : in_ch_(in_ch) {
  const std::string stem_name =
      in_ch == 1 ? "encoder.stem.conv" : "encoder.stem4.conv";
  stem_ = std::make_unique<nn::Conv3d>(stem_name, in_ch, kC0, 3, 1, 1, rng);
  d1a_ = std::make_unique<nn::Conv3d>("encoder.down1.conv1", kC0, kC1, 3, 2, 1, rng);
  d1b_ = std::make_unique<nn::Conv3d>("encoder.down1.conv2", kC1, kC1, 3, 1, 1, rng);
  d2a_ = std::make_unique<nn::Conv3d>("encoder.down2.conv1", kC1, kC2, 3, 2, 1, rng);
  d2b_ = std::make_unique<nn::Conv3d>("encoder.down2.conv2", kC2, kC2, 3, 1, 1, rng);
}

void Encoder3d::collect_params(std::vector<nn::Param*>& out) {
  stem_->collect_params(out);
  d1a_->collect_params(out);
  d1b_->collect_params(out);
  d2a_->collect_params(out);
  d2b_->collect_params(out);
}

Encoder3d::Features Encoder3d::forward(const nn::Tensor& x) {
  Features f;
  f.stem = r_stem_.forward(stem_->forward(x));
  f.e1 = r1b_.forward(d1b_->forward(r1a_.forward(d1a_->forward(f.stem))));
  f.e2 = r2b_.forward(d2b_->forward(r2a_.forward(d2a_->forward(f.e1))));
  return f;
}

nn::Tensor Encoder3d::backward(const nn::Tensor& de2, const nn::Tensor& de1,
                               const nn::Tensor& dstem) {
  nn::Tensor d1 =
      d2a_->backward(r2a_.backward(d2b_->backward(r2b_.backward(de2))));
  if (de1.numel() > 0)
    for (std::size_t i = 0; i < d1.v.size(); ++i) d1.v[i] += de1.v[i];
  nn::Tensor d0 =
      d1a_->backward(r1a_.backward(d1b_->backward(r1b_.backward(d1))));
  if (dstem.numel() > 0)
    for (std::size_t i = 0; i < d0.v.size(); ++i) d0.v[i] += dstem.v[i];
  return stem_->backward(r_stem_.backward(d0));
}

// ---------------------------------------------------------------------------
// UNet3d
// ---------------------------------------------------------------------------

UNet3d::UNet3d(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  encoder_ = std::make_unique<Encoder3d>(1, rng);
  dec1_ = std::make_unique<nn::Conv3d>("decoder.up1.conv",
                                       Encoder3d::kC2 + Encoder3d::kC1,
                                       Encoder3d::kC1, 3, 1, 1, rng);
  dec0_ = std::make_unique<nn::Conv3d>("decoder.up0.conv",
                                       Encoder3d::kC1 + Encoder3d::kC0,
                                       Encoder3d::kC0, 3, 1, 1, rng);
  head_ = std::make_unique<nn::Conv3d>("head.conv", Encoder3d::kC0,
                                       LabelMask::kNumClasses, 1, 1, 0, rng);
}

void UNet3d::collect_params(std::vector<nn::Param*>& out) {
  encoder_->collect_params(out);
  dec1_->collect_params(out);
  dec0_->collect_params(out);
  head_->collect_params(out);
}

nn::Tensor UNet3d::forward(const nn::Tensor& x) {
  for (int a = 1; a < 4; ++a)
    if (x.shape[a] % 4 != 0)
      throw ShapeError("UNet3d: extents must be divisible by 4");
  Encoder3d::Features f = encoder_->forward(x);
  cat1_in_a_ = f.e1;
  cat0_in_a_ = f.stem;
  nn::Tensor d1 = rdec1_.forward(
      dec1_->forward(nn::concat_channels(up1_.forward(f.e2), f.e1)));
  nn::Tensor d0 = rdec0_.forward(
      dec0_->forward(nn::concat_channels(up0_.forward(d1), f.stem)));
  return head_->forward(d0);
}

nn::Tensor UNet3d::backward(const nn::Tensor& dlogits) {
  nn::Tensor dcat0 = dec0_->backward(rdec0_.backward(head_->backward(dlogits)));
  nn::Tensor dup0, dstem_skip;
  nn::split_channels(dcat0, Encoder3d::kC1, dup0, dstem_skip);
  nn::Tensor dcat1 =
      dec1_->backward(rdec1_.backward(up0_.backward(dup0)));
  nn::Tensor dup1, de1_skip;
  nn::split_channels(dcat1, Encoder3d::kC2, dup1, de1_skip);
  nn::Tensor de2 = up1_.backward(dup1);
  return encoder_->backward(de2, de1_skip, dstem_skip);
}

namespace {

std::int64_t round_up4(std::int64_t v) { return (v + 3) / 4 * 4; }

// forward on a zero-padded window, cropped back to the window shape
nn::Tensor padded_logits(UNet3d& net, const Volume& v, const BBox3& window) {
  const Index3 e = window.extents();
  const Index3 pe{round_up4(e[0]), round_up4(e[1]), round_up4(e[2])};
  nn::Tensor x({1, pe[0], pe[1], pe[2]});
  for (std::int64_t z = 0; z < e[0]; ++z)
    for (std::int64_t y = 0; y < e[1]; ++y) {
      const float* src = v.data.data() +
                         ((window.lo[0] + z) * v.shape[1] + window.lo[1] + y) *
                             v.shape[2] +
                         window.lo[2];
      float* dst = x.data() + (z * pe[1] + y) * pe[2];
      std::copy_n(src, e[2], dst);
    }
  nn::Tensor logits = net.forward(x);
  if (pe == e) return logits;
  nn::Tensor out({LabelMask::kNumClasses, e[0], e[1], e[2]});
  for (int c = 0; c < LabelMask::kNumClasses; ++c)
    for (std::int64_t z = 0; z < e[0]; ++z)
      for (std::int64_t y = 0; y < e[1]; ++y)
        std::copy_n(
            logits.data() + ((c * pe[0] + z) * pe[1] + y) * pe[2], e[2],
            out.data() + ((c * e[0] + z) * e[1] + y) * e[2]);
  return out;
}

}  // namespace

SegPrediction UNet3d::predict(const Volume& volume) {
  const Index3 s = volume.shape;
  nn::Tensor acc({LabelMask::kNumClasses, s[0], s[1], s[2]});
  std::vector<float> weight(static_cast<std::size_t>(volume.numel()), 0.0f);

  // window starts with 0.5 overlap, clipped so every window fits
  const auto starts = [](std::int64_t extent, std::int64_t win) {
    std::vector<std::int64_t> out;
    if (win >= extent) {
      out.push_back(0);
      return out;
    }
    const std::int64_t step = std::max<std::int64_t>(1, win / 2);
    for (std::int64_t p = 0;; p += step) {
      if (p + win >= extent) {
        out.push_back(extent - win);
        break;
      }
      out.push_back(p);
    }
    return out;
  };
  const Index3 win{std::min(inference_window[0], s[0]),
                   std::min(inference_window[1], s[1]),
                   std::min(inference_window[2], s[2])};
  for (std::int64_t z0 : starts(s[0], win[0]))
    for (std::int64_t y0 : starts(s[1], win[1]))
      for (std::int64_t x0 : starts(s[2], win[2])) {
        BBox3 w{{z0, y0, x0}, {z0 + win[0] - 1, y0 + win[1] - 1, x0 + win[2] - 1}};
        nn::Tensor logits = padded_logits(*this, volume, w);
        const Index3 e = w.extents();
        for (int c = 0; c < LabelMask::kNumClasses; ++c)
          for (std::int64_t z = 0; z < e[0]; ++z)
            for (std::int64_t y = 0; y < e[1]; ++y) {
              const float* src = logits.data() + ((c * e[0] + z) * e[1] + y) * e[2];
              float* dst = acc.data() +
                           ((c * s[0] + z0 + z) * s[1] + y0 + y) * s[2] + x0;
              for (std::int64_t x = 0; x < e[2]; ++x) dst[x] += src[x];
            }
        for (std::int64_t z = 0; z < e[0]; ++z)
          for (std::int64_t y = 0; y < e[1]; ++y) {
            float* wp = weight.data() +
                        ((z0 + z) * s[1] + y0 + y) * s[2] + x0;
            for (std::int64_t x = 0; x < e[2]; ++x) wp[x] += 1.0f;
          }
      }

  SegPrediction pred;
  pred.mask = LabelMask(s);
  const std::int64_t n = volume.numel();
  for (std::int64_t v = 0; v < n; ++v) {
    int best = 0;
    float best_l = acc.v[v] / weight[static_cast<std::size_t>(v)];
    for (int c = 1; c < LabelMask::kNumClasses; ++c) {
      const float l = acc.v[c * n + v] / weight[static_cast<std::size_t>(v)];
      if (l > best_l) {
        best_l = l;
        best = c;
      }
    }
    pred.mask.data[static_cast<std::size_t>(v)] = static_cast<std::uint8_t>(best);
  }
  return pred;
}

nn::Checkpoint UNet3d::to_checkpoint(std::int64_t seed) const {
  nn::Checkpoint ck;
  ck.stage = "stage2-seg";
  ck.seed = seed;
  ck.config = {{"base_channels", Encoder3d::kC0},
               {"out_classes", LabelMask::kNumClasses}};
  ck.put_params(const_cast<UNet3d*>(this)->params());
  return ck;
}

void UNet3d::from_checkpoint(const nn::Checkpoint& ck) {
  ck.get_params(params());
  trained_ = true;
}

// ---------------------------------------------------------------------------
// Dice, training
// ---------------------------------------------------------------------------

double dice(const LabelMask& pred, const LabelMask& truth, int class_id) {
  if (pred.shape != truth.shape)
    throw ShapeError("dice: mask shapes differ");
  std::int64_t np = 0, nt = 0, inter = 0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const bool p = pred.data[i] == class_id;
    const bool t = truth.data[i] == class_id;
    np += p;
    nt += t;
    inter += p && t;
  }
  if (np + nt == 0) return 1.0;
  return 2.0 * double(inter) / double(np + nt);
}

namespace {

BBox3 random_patch(const LabelMask& mask, Index3 patch, double fg_prob,
                   std::mt19937_64& rng) {
  const Index3 s = mask.shape;
  Index3 p{std::min(patch[0], s[0]), std::min(patch[1], s[1]),
           std::min(patch[2], s[2])};
  for (int a = 0; a < 3; ++a) p[a] = p[a] / 4 * 4;
  for (int a = 0; a < 3; ++a) p[a] = std::max<std::int64_t>(4, p[a]);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Index3 center;
  bool picked_fg = false;
  if (unit(rng) < fg_prob) {
    // reservoir-sample a foreground voxel
    std::int64_t count = 0;
    for (std::int64_t z = 0; z < s[0]; ++z)
      for (std::int64_t y = 0; y < s[1]; ++y)
        for (std::int64_t x = 0; x < s[2]; ++x)
          if (mask.at(z, y, x) != 0) {
            ++count;
            if (std::uniform_int_distribution<std::int64_t>(1, count)(rng) == 1)
              center = {z, y, x};
          }
    picked_fg = count > 0;
  }
  if (!picked_fg) {
    for (int a = 0; a < 3; ++a)
      center[a] = std::uniform_int_distribution<std::int64_t>(0, s[a] - 1)(rng);
  }
  BBox3 box;
  for (int a = 0; a < 3; ++a) {
    std::int64_t lo = std::clamp<std::int64_t>(center[a] - p[a] / 2, 0,
                                               s[a] - p[a]);
    box.lo[a] = lo;
    box.hi[a] = lo + p[a] - 1;
  }
  return box;
}

nn::Tensor volume_patch_tensor(const Volume& v, const BBox3& box) {
  const Index3 e = box.extents();
  nn::Tensor x({1, e[0], e[1], e[2]});
  for (std::int64_t z = 0; z < e[0]; ++z)
    for (std::int64_t y = 0; y < e[1]; ++y)
      std::copy_n(v.data.data() +
                      ((box.lo[0] + z) * v.shape[1] + box.lo[1] + y) *
                          v.shape[2] +
                      box.lo[2],
                  e[2], x.data() + (z * e[1] + y) * e[2]);
  return x;
}

}  // namespace

SegTrainReport train_segmentation(UNet3d& model,
                                  const std::vector<TrainingCase>& train_cases,
                                  const std::vector<TrainingCase>& eval_cases,
                                  const SegTrainConfig& cfg) {
  if (train_cases.empty())
    throw DegenerateDatasetError("train_segmentation: no training cases");
  bool has[LabelMask::kNumClasses] = {false, false, false};
  for (const auto& c : train_cases)
    for (std::uint8_t v : c.mask.data) has[v] = true;
  for (int cls = 1; cls < LabelMask::kNumClasses; ++cls)
    if (!has[cls])
      throw DegenerateDatasetError("train_segmentation: class " +
                                   std::to_string(cls) +
                                   " absent from all training masks");

  nn::Adam opt(model.params(), cfg.lr);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train_cases.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  SegTrainReport report;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    int steps = 0;
    for (std::size_t ci : order) {
      const auto& c = train_cases[ci];
      for (int pi = 0; pi < cfg.patches_per_case; ++pi) {
        const BBox3 box =
            random_patch(c.mask, cfg.patch_shape, cfg.fg_patch_prob, rng);
        const nn::Tensor x = volume_patch_tensor(c.volume, box);
        const LabelMask target = crop(c.mask, box);
        opt.zero_grad();
        nn::Tensor logits = model.forward(x);
        nn::LossGrad lg = nn::softmax_ce_dice(logits, target, cfg.dice_weight);
        model.backward(lg.dlogits);
        opt.step();
        epoch_loss += lg.loss;
        ++steps;
      }
    }
    report.epoch_losses.push_back(epoch_loss / std::max(1, steps));
  }
  model.mark_trained();

  if (!eval_cases.empty()) {
    std::map<int, double> sums;
    for (const auto& c : eval_cases) {
      const SegPrediction pred = model.predict(c.volume);
      for (int cls = 1; cls < LabelMask::kNumClasses; ++cls)
        sums[cls] += dice(pred.mask, c.mask, cls);
    }
    for (auto& [cls, sum] : sums)
      report.val_dice[cls] = sum / double(eval_cases.size());
  }
  return report;
}

// ---------------------------------------------------------------------------
// Informed crop + forwarding
// ---------------------------------------------------------------------------

InformedCrop informed_crop(const Volume& volume, const LabelMask& pred_mask,
                           Index3 margin,
                           std::array<std::int64_t, 2> fallback_yx,
                           const std::set<int>& foreground) {
  InformedCrop out;
  try {
    out.bbox = bbox_from_mask(pred_mask, foreground, margin);
  } catch (const EmptyForegroundError&) {
    out.used_fallback = true;
    const std::int64_t oy = std::min(fallback_yx[0], volume.shape[1]);
    const std::int64_t ox = std::min(fallback_yx[1], volume.shape[2]);
    out.bbox = center_crop_bbox(volume.shape, oy, ox);
    out.volume = crop(volume, out.bbox);
    out.mask = LabelMask(out.volume.shape);  // all background
    return out;
  }
  out.volume = crop(volume, out.bbox);
  out.mask = crop(pred_mask, out.bbox);
  return out;
}

nn::Tensor forward_channels(const Volume& volume, const LabelMask& pred_mask) {
  if (volume.shape != pred_mask.shape)
    throw ShapeError("forward_channels: volume/mask shape mismatch");
  const Index3 s = volume.shape;
  nn::Tensor x({1 + LabelMask::kNumClasses, s[0], s[1], s[2]});
  const std::int64_t n = volume.numel();
  std::copy_n(volume.data.data(), n, x.data());
  for (std::int64_t v = 0; v < n; ++v)
    x.v[(1 + pred_mask.data[static_cast<std::size_t>(v)]) * n + v] = 1.0f;
  return x;
}

}  // namespace pdac::stage2
