#include "pdac/stage3/cls.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "pdac/nn/adam.hpp"
#include "pdac/nn/losses.hpp"
#include "pdac/simd/kernels.hpp"

namespace pdac::stage3 {

using stage2::Encoder3d;

Classifier::Classifier(const ClassifierSpec& spec, std::uint64_t seed)
    : spec_(spec) {
  std::mt19937_64 rng(seed);
  if (spec.backbone == Backbone::Transferred) {
    enc_ = std::make_unique<Encoder3d>(spec.in_channels, rng);
  } else {
    const int c0 = Encoder3d::kC0, c1 = Encoder3d::kC1, c2 = Encoder3d::kC2;
    s_stem_ = std::make_unique<nn::Conv3d>("backbone.stem.conv",
                                           spec.in_channels, c0, 3, 1, 1, rng);
    b1a_ = std::make_unique<nn::Conv3d>("backbone.block1.conv1", c0, c1, 3, 2, 1, rng);
    b1b_ = std::make_unique<nn::Conv3d>("backbone.block1.conv2", c1, c1, 3, 1, 1, rng);
    b1p_ = std::make_unique<nn::Conv3d>("backbone.block1.proj", c0, c1, 1, 2, 0, rng);
    b2a_ = std::make_unique<nn::Conv3d>("backbone.block2.conv1", c1, c2, 3, 2, 1, rng);
    b2b_ = std::make_unique<nn::Conv3d>("backbone.block2.conv2", c2, c2, 3, 1, 1, rng);
    b2p_ = std::make_unique<nn::Conv3d>("backbone.block2.proj", c1, c2, 1, 2, 0, rng);
  }
  head_ = std::make_unique<nn::Linear>("head.fc", kEmbedDim, 1, rng);
}

void Classifier::collect_params(std::vector<nn::Param*>& out) {
  for (nn::Param* p : backbone_params()) out.push_back(p);
  head_->collect_params(out);
}

std::vector<nn::Param*> Classifier::backbone_params() {
  std::vector<nn::Param*> out;
  if (enc_) {
    enc_->collect_params(out);
  } else {
    s_stem_->collect_params(out);
    b1a_->collect_params(out);
    b1b_->collect_params(out);
    b1p_->collect_params(out);
    b2a_->collect_params(out);
    b2b_->collect_params(out);
    b2p_->collect_params(out);
  }
  return out;
}

void Classifier::reinit_head(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  head_ = std::make_unique<nn::Linear>("head.fc", kEmbedDim, 1, rng);
}

nn::Tensor Classifier::embed(const nn::Tensor& x) {
  if (x.shape.size() != 4 || x.shape[0] != spec_.in_channels)
    throw ShapeError("Classifier: input channel count mismatch");
  if (enc_) return gap_.forward(enc_->forward(x).e2);

  nn::Tensor s = r_stem_.forward(s_stem_->forward(x));
  // block 1
  nn::Tensor h = b1b_->forward(r1a_.forward(b1a_->forward(s)));
  nn::Tensor p = b1p_->forward(s);
  b1_sum_ = nn::Tensor(h.shape);
  for (std::size_t i = 0; i < h.v.size(); ++i) b1_sum_.v[i] = h.v[i] + p.v[i];
  nn::Tensor o1 = r1out_.forward(b1_sum_);
  // block 2
  nn::Tensor h2 = b2b_->forward(r2a_.forward(b2a_->forward(o1)));
  nn::Tensor p2 = b2p_->forward(o1);
  b2_sum_ = nn::Tensor(h2.shape);
  for (std::size_t i = 0; i < h2.v.size(); ++i) b2_sum_.v[i] = h2.v[i] + p2.v[i];
  return gap_.forward(r2out_.forward(b2_sum_));
}

void Classifier::backbone_backward(const nn::Tensor& dembedding) {
  nn::Tensor d = gap_.backward(dembedding);
  if (enc_) {
    enc_->backward(d, nn::Tensor(), nn::Tensor());
    return;
  }
  nn::Tensor dsum2 = r2out_.backward(d);
  nn::Tensor do1 = b2a_->backward(r2a_.backward(b2b_->backward(dsum2)));
  nn::Tensor do1p = b2p_->backward(dsum2);
  for (std::size_t i = 0; i < do1.v.size(); ++i) do1.v[i] += do1p.v[i];
  nn::Tensor dsum1 = r1out_.backward(do1);
  nn::Tensor ds = b1a_->backward(r1a_.backward(b1b_->backward(dsum1)));
  nn::Tensor dsp = b1p_->backward(dsum1);
  for (std::size_t i = 0; i < ds.v.size(); ++i) ds.v[i] += dsp.v[i];
  s_stem_->backward(r_stem_.backward(ds));
}

float Classifier::forward_logit(const nn::Tensor& x) {
  return head_->forward(embed(x)).v[0];
}

void Classifier::backward_logit(float dlogit) {
  nn::Tensor d({1});
  d.v[0] = dlogit;
  backbone_backward(head_->backward(d));
}

float Classifier::predict_response(const nn::Tensor& x) {
  if (!trained_)
    throw StateError("Classifier: predict called on an untrained model");
  const float logit = forward_logit(x);
  return 1.0f / (1.0f + std::exp(-logit));
}

nn::Checkpoint Classifier::to_checkpoint(std::int64_t seed) const {
  nn::Checkpoint ck;
  ck.stage = "stage3-cls";
  ck.seed = seed;
  ck.config = {
      {"backbone", spec_.backbone == Backbone::Transferred ? "transferred"
                                                           : "standalone"},
      {"in_channels", spec_.in_channels},
      {"embed_dim", kEmbedDim}};
  ck.put_params(const_cast<Classifier*>(this)->params());
  return ck;
}

void Classifier::from_checkpoint(const nn::Checkpoint& ck) {
  ck.get_params(params());
  trained_ = true;
}

// ---------------------------------------------------------------------------
// Transfer
// ---------------------------------------------------------------------------

TransferManifest transfer_encoder(const nn::Checkpoint& seg_checkpoint,
                                  Classifier& classifier) {
  if (classifier.spec().backbone != Backbone::Transferred)
    throw TransferError("transfer_encoder: classifier backbone is standalone");
  TransferManifest manifest;
  for (nn::Param* p : classifier.params()) {
    const auto it = seg_checkpoint.tensors.find(p->name);
    if (p->name.rfind("encoder.", 0) == 0 && it != seg_checkpoint.tensors.end()) {
      if (it->second.shape != p->w.shape)
        throw TransferError("transfer_encoder: shape mismatch for tensor '" +
                            p->name + "'");
      p->w = it->second;
      manifest.transferred.push_back(p->name);
    } else {
      manifest.fresh.push_back(p->name);
    }
  }
  if (manifest.transferred.empty())
    throw TransferError(
        "transfer_encoder: checkpoint contains no matching encoder subtree");
  return manifest;
}

// ---------------------------------------------------------------------------
// Triplets
// ---------------------------------------------------------------------------

std::array<std::size_t, 3> sample_triplet(const std::vector<int>& labels,
                                          std::mt19937_64& rng) {
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1)
      throw SamplingError("sample_triplet: labels must be binary");
    by_class[labels[i]].push_back(i);
  }
  if (by_class[0].empty() || by_class[1].empty())
    throw SamplingError("sample_triplet: both classes must be present");

  std::vector<std::size_t> anchor_pool;
  for (int c = 0; c < 2; ++c)
    if (by_class[c].size() >= 2)
      anchor_pool.insert(anchor_pool.end(), by_class[c].begin(),
                         by_class[c].end());
  if (anchor_pool.empty())
    throw SamplingError(
        "sample_triplet: no class has two members to supply anchor+positive");

  const std::size_t anchor = anchor_pool[std::uniform_int_distribution<std::size_t>(
      0, anchor_pool.size() - 1)(rng)];
  const int ac = labels[anchor];
  std::size_t positive;
  do {
    positive = by_class[ac][std::uniform_int_distribution<std::size_t>(
        0, by_class[ac].size() - 1)(rng)];
  } while (positive == anchor);
  const auto& negs = by_class[1 - ac];
  const std::size_t negative = negs[std::uniform_int_distribution<std::size_t>(
      0, negs.size() - 1)(rng)];
  return {anchor, positive, negative};
}

double triplet_loss(const nn::Tensor& za, const nn::Tensor& zp,
                    const nn::Tensor& zn, float margin, nn::Tensor* dza,
                    nn::Tensor* dzp, nn::Tensor* dzn) {
  if (za.numel() != zp.numel() || za.numel() != zn.numel())
    throw ShapeError("triplet_loss: embedding width mismatch");
  const std::int64_t n = za.numel();
  double d_ap = 0.0, d_an = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double ap = double(za.v[i]) - double(zp.v[i]);
    const double an = double(za.v[i]) - double(zn.v[i]);
    d_ap += ap * ap;
    d_an += an * an;
  }
  const double loss = std::max(0.0, d_ap - d_an + double(margin));
  if (dza) *dza = nn::Tensor(za.shape);
  if (dzp) *dzp = nn::Tensor(zp.shape);
  if (dzn) *dzn = nn::Tensor(zn.shape);
  if (loss > 0.0) {
    for (std::int64_t i = 0; i < n; ++i) {
      const float ap = za.v[i] - zp.v[i];
      const float an = za.v[i] - zn.v[i];
      if (dza) dza->v[i] = 2.0f * (ap - an);  // = 2(zn - zp)
      if (dzp) dzp->v[i] = -2.0f * ap;
      if (dzn) dzn->v[i] = 2.0f * an;
    }
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Two-stage training
// ---------------------------------------------------------------------------

ClsTrainReport train_two_stage(Classifier& model,
                               const std::vector<nn::Tensor>& inputs,
                               const std::vector<int>& labels,
                               const ClsTrainConfig& cfg) {
  if (inputs.size() != labels.size() || inputs.empty())
    throw SamplingError("train_two_stage: inputs/labels mismatch or empty");
  std::int64_t n_pos = 0, n_neg = 0;
  for (int l : labels) (l == 1 ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0)
    throw SamplingError("train_two_stage: both classes must be present");

  ClsTrainReport report;
  std::mt19937_64 rng(cfg.seed);

  // Stage A: triplet conditioning of the backbone
  if (cfg.triplet.epochs_stage_a > 0) {
    nn::Adam opt(model.backbone_params(), cfg.lr);
    const int steps_per_epoch =
        std::max<int>(1, int(inputs.size()) / cfg.triplet.triplets_per_step);
    for (int epoch = 0; epoch < cfg.triplet.epochs_stage_a; ++epoch) {
      double epoch_loss = 0.0;
      int n_triplets = 0;
      for (int step = 0; step < steps_per_epoch; ++step) {
        opt.zero_grad();
        for (int t = 0; t < cfg.triplet.triplets_per_step; ++t) {
          const auto [ia, ip, in_] = sample_triplet(labels, rng);
          const nn::Tensor za = model.embed(inputs[ia]);
          const nn::Tensor zp = model.embed(inputs[ip]);
          const nn::Tensor zn = model.embed(inputs[in_]);
          nn::Tensor dza, dzp, dzn;
          const double loss = triplet_loss(za, zp, zn, cfg.triplet.margin,
                                           &dza, &dzp, &dzn);
          epoch_loss += loss;
          ++n_triplets;
          if (loss > 0.0) {
            const float scale = 1.0f / float(cfg.triplet.triplets_per_step);
            for (auto* d : {&dza, &dzp, &dzn})
              for (float& v : d->v) v *= scale;
            // caches hold one sample at a time; re-run the forward per leg
            model.embed(inputs[ia]);
            model.backbone_backward(dza);
            model.embed(inputs[ip]);
            model.backbone_backward(dzp);
            model.embed(inputs[in_]);
            model.backbone_backward(dzn);
          }
        }
        opt.step();
      }
      report.stage_a_losses.push_back(epoch_loss / std::max(1, n_triplets));
    }
  }

  // Stage B: cross-entropy on a fresh head, fine-tuning everything
  model.reinit_head(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  nn::Adam opt(model.params(), cfg.lr);
  const float pos_weight =
      cfg.class_weighting ? float(n_neg) / float(n_pos) : 1.0f;
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 0; epoch < cfg.triplet.epochs_stage_b; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    int in_batch = 0;
    opt.zero_grad();
    for (std::size_t idx : order) {
      const float logit = model.forward_logit(inputs[idx]);
      float dlogit;
      epoch_loss +=
          nn::bce_with_logits(logit, labels[idx], pos_weight, &dlogit);
      model.backward_logit(dlogit / float(cfg.batch));
      if (++in_batch == cfg.batch) {
        opt.step();
        opt.zero_grad();
        in_batch = 0;
      }
    }
    if (in_batch > 0) opt.step();
    report.stage_b_losses.push_back(epoch_loss / double(inputs.size()));
  }
  model.mark_trained();
  return report;
}

}  // namespace pdac::stage3
