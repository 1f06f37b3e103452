#include "pdac/stage1/slice.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "pdac/nn/adam.hpp"
#include "pdac/nn/losses.hpp"

namespace pdac::stage1 {

SliceLabelSequence derive_slice_labels(const LabelMask& mask) {
  SliceLabelSequence seq;
  seq.values.assign(static_cast<std::size_t>(mask.shape[0]), 0);
  const std::int64_t per_slice = mask.shape[1] * mask.shape[2];
  for (std::int64_t z = 0; z < mask.shape[0]; ++z) {
    const std::uint8_t* p = mask.data.data() + z * per_slice;
    for (std::int64_t i = 0; i < per_slice; ++i)
      if (p[i] == 1 || p[i] == 2) {
        seq.values[static_cast<std::size_t>(z)] = 1;
        break;
      }
  }
  return seq;
}

SliceLabelSequence fill_gaps(const SliceLabelSequence& seq) {
  SliceLabelSequence out = seq;
  const auto first = std::find(out.values.begin(), out.values.end(), 1);
  if (first == out.values.end()) return out;
  const auto last = std::find(out.values.rbegin(), out.values.rend(), 1);
  const std::size_t lo = static_cast<std::size_t>(first - out.values.begin());
  const std::size_t hi =
      out.values.size() - 1 - static_cast<std::size_t>(last - out.values.rbegin());
  for (std::size_t i = lo; i <= hi; ++i) out.values[i] = 1;
  return out;
}

std::pair<Volume, BBox3> z_crop(const Volume& volume,
                                const SliceLabelSequence& seq,
                                std::int64_t margin) {
  if (static_cast<std::int64_t>(seq.values.size()) != volume.shape[0])
    throw ShapeError("z_crop: sequence length != z extent");
  const auto first = std::find(seq.values.begin(), seq.values.end(), 1);
  if (first == seq.values.end())
    throw EmptyPredictionError("z_crop: no positive slices");
  const auto last = std::find(seq.values.rbegin(), seq.values.rend(), 1);
  const std::int64_t lo = first - seq.values.begin();
  const std::int64_t hi = static_cast<std::int64_t>(seq.values.size()) - 1 -
                          (last - seq.values.rbegin());
  BBox3 box;
  box.lo = {std::max<std::int64_t>(0, lo - margin), 0, 0};
  box.hi = {std::min(volume.shape[0] - 1, hi + margin), volume.shape[1] - 1,
            volume.shape[2] - 1};
  return {crop(volume, box), box};
}

// ---------------------------------------------------------------------------
// SliceModel
// ---------------------------------------------------------------------------

SliceModel::SliceModel(const SliceModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg) {
  std::mt19937_64 rng(seed);
  const auto& ch = cfg.encoder_channels;
  conv1_ = std::make_unique<nn::Conv2d>("slice.conv1", 1, ch[0], 3, 2, 1, rng);
  conv2_ = std::make_unique<nn::Conv2d>("slice.conv2", ch[0], ch[1], 3, 2, 1, rng);
  conv3_ = std::make_unique<nn::Conv2d>("slice.conv3", ch[1], ch[2], 3, 2, 1, rng);
  const int feat = 2 * ch[2];  // mean + max pooled
  lstm_ = std::make_unique<nn::LSTM>("slice.lstm", feat, cfg.hidden, rng);
  if (cfg.bidirectional)
    lstm_rev_ = std::make_unique<nn::LSTM>("slice.lstm_rev", feat, cfg.hidden, rng);
  const int head_in = cfg.bidirectional ? 2 * cfg.hidden : cfg.hidden;
  head_ = std::make_unique<nn::Linear>("slice.head", head_in, 1, rng);
}

void SliceModel::collect_params(std::vector<nn::Param*>& out) {
  conv1_->collect_params(out);
  conv2_->collect_params(out);
  conv3_->collect_params(out);
  lstm_->collect_params(out);
  if (lstm_rev_) lstm_rev_->collect_params(out);
  head_->collect_params(out);
}

nn::Tensor SliceModel::encode_slice(const Volume& volume, std::int64_t z) {
  nn::Tensor slice({1, volume.shape[1], volume.shape[2]});
  std::copy_n(volume.data.data() + z * volume.shape[1] * volume.shape[2],
              slice.numel(), slice.data());
  const nn::Tensor f = relu3_.forward(conv3_->forward(relu2_.forward(
      conv2_->forward(relu1_.forward(conv1_->forward(slice))))));
  const nn::Tensor avg = gap_.forward(f);
  const nn::Tensor mx = gmp_.forward(f);
  nn::Tensor out({avg.numel() + mx.numel()});
  std::copy_n(avg.data(), avg.numel(), out.data());
  std::copy_n(mx.data(), mx.numel(), out.data() + avg.numel());
  return out;
}

nn::Tensor SliceModel::forward_logits(const Volume& volume) {
  const std::int64_t T = volume.shape[0];
  const int feat = 2 * cfg_.encoder_channels[2];
  nn::Tensor feats({T, feat});
  for (std::int64_t z = 0; z < T; ++z) {
    const nn::Tensor f = encode_slice(volume, z);
    std::copy_n(f.data(), feat, feats.data() + z * feat);
  }
  nn::Tensor hidden = lstm_->forward(feats);
  if (lstm_rev_) {
    nn::Tensor rev({T, feat});
    for (std::int64_t z = 0; z < T; ++z)
      std::copy_n(feats.data() + (T - 1 - z) * feat, feat,
                  rev.data() + z * feat);
    nn::Tensor hr = lstm_rev_->forward(rev);
    nn::Tensor both({T, 2 * cfg_.hidden});
    for (std::int64_t z = 0; z < T; ++z) {
      std::copy_n(hidden.data() + z * cfg_.hidden, cfg_.hidden,
                  both.data() + z * 2 * cfg_.hidden);
      std::copy_n(hr.data() + (T - 1 - z) * cfg_.hidden, cfg_.hidden,
                  both.data() + z * 2 * cfg_.hidden + cfg_.hidden);
    }
    hidden = std::move(both);
  }
  nn::Tensor logits = head_->forward(hidden);  // [T, 1]
  logits.shape = {T};
  return logits;
}

void SliceModel::backward_logits(const Volume& volume,
                                 const nn::Tensor& dlogits) {
  const std::int64_t T = volume.shape[0];
  const int feat = 2 * cfg_.encoder_channels[2];
  nn::Tensor d = dlogits;
  d.shape = {T, 1};
  nn::Tensor dhidden = head_->backward(d);

  nn::Tensor dfeats({T, feat});
  if (lstm_rev_) {
    nn::Tensor dh_fwd({T, cfg_.hidden}), dh_rev({T, cfg_.hidden});
    for (std::int64_t z = 0; z < T; ++z) {
      std::copy_n(dhidden.data() + z * 2 * cfg_.hidden, cfg_.hidden,
                  dh_fwd.data() + z * cfg_.hidden);
      std::copy_n(dhidden.data() + z * 2 * cfg_.hidden + cfg_.hidden,
                  cfg_.hidden,
                  dh_rev.data() + (T - 1 - z) * cfg_.hidden);
    }
    dfeats = lstm_->backward(dh_fwd);
    nn::Tensor dfeats_rev = lstm_rev_->backward(dh_rev);
    for (std::int64_t z = 0; z < T; ++z)
      for (int j = 0; j < feat; ++j)
        dfeats.v[z * feat + j] += dfeats_rev.v[(T - 1 - z) * feat + j];
  } else {
    dfeats = lstm_->backward(dhidden);
  }

  // encoder caches hold one slice at a time, so re-run the forward per slice
  const int half = cfg_.encoder_channels[2];
  for (std::int64_t z = 0; z < T; ++z) {
    encode_slice(volume, z);
    nn::Tensor davg({half}), dmax({half});
    std::copy_n(dfeats.data() + z * feat, half, davg.data());
    std::copy_n(dfeats.data() + z * feat + half, half, dmax.data());
    nn::Tensor df = gap_.backward(davg);
    const nn::Tensor dm = gmp_.backward(dmax);
    for (std::size_t i = 0; i < df.v.size(); ++i) df.v[i] += dm.v[i];
    conv1_->backward(relu1_.backward(conv2_->backward(
        relu2_.backward(conv3_->backward(relu3_.backward(df))))));
  }
}

SliceLabelSequence SliceModel::predict(const Volume& volume) {
  if (!trained_)
    throw StateError("SliceModel: predict called on an untrained model");
  const nn::Tensor logits = forward_logits(volume);
  SliceLabelSequence seq;
  seq.threshold = cfg_.threshold;
  seq.values.resize(static_cast<std::size_t>(logits.numel()));
  for (std::int64_t t = 0; t < logits.numel(); ++t) {
    const double p = 1.0 / (1.0 + std::exp(-double(logits.v[t])));
    seq.values[static_cast<std::size_t>(t)] = p >= cfg_.threshold ? 1 : 0;
  }
  return seq;
}

nn::Checkpoint SliceModel::to_checkpoint(std::int64_t seed) const {
  nn::Checkpoint ck;
  ck.stage = "stage1-slice";
  ck.seed = seed;
  ck.config = {{"hidden", cfg_.hidden},
               {"threshold", cfg_.threshold},
               {"bidirectional", cfg_.bidirectional},
               {"encoder_channels",
                {cfg_.encoder_channels[0], cfg_.encoder_channels[1],
                 cfg_.encoder_channels[2]}}};
  ck.put_params(const_cast<SliceModel*>(this)->params());
  return ck;
}

void SliceModel::from_checkpoint(const nn::Checkpoint& ck) {
  ck.get_params(params());
  trained_ = true;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

SliceTrainReport train_slice_classifier(
    SliceModel& model, const std::vector<TrainingCase>& train_cases,
    const std::vector<TrainingCase>& eval_cases, const SliceTrainConfig& cfg) {
  if (train_cases.empty())
    throw DegenerateDatasetError("train_slice_classifier: no training cases");
  std::int64_t n_pos = 0;
  std::vector<SliceLabelSequence> labels;
  labels.reserve(train_cases.size());
  for (const auto& c : train_cases) {
    labels.push_back(derive_slice_labels(c.mask));
    for (auto v : labels.back().values) n_pos += v;
  }
  if (n_pos == 0)
    throw DegenerateDatasetError(
        "train_slice_classifier: no positive slices in training data");

  nn::Adam opt(model.params(), cfg.lr);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train_cases.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  SliceTrainReport report;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::int64_t n_slices = 0;
    for (std::size_t ci : order) {
      const auto& c = train_cases[ci];
      const auto& lab = labels[ci];
      opt.zero_grad();
      nn::Tensor logits = model.forward_logits(c.volume);
      nn::Tensor dlogits(logits.shape);
      const std::int64_t T = logits.numel();
      double loss = 0.0;
      for (std::int64_t t = 0; t < T; ++t) {
        float g;
        loss += nn::bce_with_logits(logits.v[t],
                                    lab.values[static_cast<std::size_t>(t)],
                                    1.0f, &g);
        dlogits.v[t] = g / float(T);
      }
      model.backward_logits(c.volume, dlogits);
      opt.step();
      epoch_loss += loss;
      n_slices += T;
    }
    report.epoch_losses.push_back(epoch_loss / double(std::max<std::int64_t>(1, n_slices)));
  }
  model.mark_trained();

  std::int64_t correct_raw = 0, correct_filled = 0, total = 0;
  for (const auto& c : eval_cases) {
    const SliceLabelSequence truth = derive_slice_labels(c.mask);
    const SliceLabelSequence raw = model.predict(c.volume);
    const SliceLabelSequence filled = fill_gaps(raw);
    for (std::size_t i = 0; i < truth.values.size(); ++i) {
      correct_raw += raw.values[i] == truth.values[i];
      correct_filled += filled.values[i] == truth.values[i];
      ++total;
    }
  }
  if (total > 0) {
    report.accuracy_raw = double(correct_raw) / double(total);
    report.accuracy_filled = double(correct_filled) / double(total);
  }
  return report;
}

}  // namespace pdac::stage1
