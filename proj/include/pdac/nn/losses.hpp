#pragma once

#include "pdac/core/types.hpp"
#include "pdac/nn/tensor.hpp"

namespace pdac::nn {

struct LossGrad {
  double loss = 0.0;
  Tensor dlogits;
};

/// Numerically stable binary cross-entropy on a single logit.
/// pos_weight scales the positive-class term.
double bce_with_logits(float logit, int target, float pos_weight,
                       float* dlogit);

/// Per-voxel softmax cross-entropy plus soft Dice over the foreground
/// classes, on logits [n_classes, Z, Y, X]. dice_weight scales the Dice term.
LossGrad softmax_ce_dice(const Tensor& logits, const LabelMask& target,
                         double dice_weight);

}  // namespace pdac::nn
