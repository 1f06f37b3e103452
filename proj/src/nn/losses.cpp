#include "pdac/nn/losses.hpp"

#include <cmath>

namespace pdac::nn {
namespace {

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

double bce_with_logits(float logit, int target, float pos_weight,
                       float* dlogit) {
  const double x = logit;
  double loss, grad;
  if (target == 1) {
    loss = pos_weight * softplus(-x);
    grad = pos_weight * (sigmoid(x) - 1.0);
  } else {
    loss = softplus(x);
    grad = sigmoid(x);
  }
  if (dlogit) *dlogit = static_cast<float>(grad);
  return loss;
}

LossGrad softmax_ce_dice(const Tensor& logits, const LabelMask& target,
                         double dice_weight) {
  const int n_classes = static_cast<int>(logits.shape[0]);
  const std::int64_t n = logits.numel() / n_classes;
  if (n != target.numel())
    throw ShapeError("softmax_ce_dice: logits/target shape mismatch");

  Tensor probs(logits.shape);
  std::vector<double> sum_p(n_classes, 0.0), sum_pt(n_classes, 0.0),
      sum_t(n_classes, 0.0);
  double ce = 0.0;

  for (std::int64_t v = 0; v < n; ++v) {
    float mx = logits.v[v];
    for (int c = 1; c < n_classes; ++c)
      mx = std::max(mx, logits.v[c * n + v]);
    double denom = 0.0;
    for (int c = 0; c < n_classes; ++c)
      denom += std::exp(double(logits.v[c * n + v]) - mx);
    const int t = target.data[v];
    for (int c = 0; c < n_classes; ++c) {
      const double p = std::exp(double(logits.v[c * n + v]) - mx) / denom;
      probs.v[c * n + v] = static_cast<float>(p);
      sum_p[c] += p;
      if (c == t) {
        sum_pt[c] += p;
        sum_t[c] += 1.0;
        ce -= std::log(std::max(p, 1e-12));
      }
    }
  }
  ce /= double(n);

  // soft Dice over foreground classes
  constexpr double kEps = 1e-6;
  double dice_loss = 0.0;
  std::vector<double> numer(n_classes), denom_c(n_classes);
  const int n_fg = n_classes - 1;
  for (int c = 1; c < n_classes; ++c) {
    numer[c] = 2.0 * sum_pt[c] + kEps;
    denom_c[c] = sum_p[c] + sum_t[c] + kEps;
    dice_loss += 1.0 - numer[c] / denom_c[c];
  }
  dice_loss /= double(n_fg);

  LossGrad out;
  out.loss = ce + dice_weight * dice_loss;
  out.dlogits = Tensor(logits.shape);

  for (std::int64_t v = 0; v < n; ++v) {
    const int t = target.data[v];
    // dL/dp for the dice term
    double dLdp[8] = {0};
    for (int c = 1; c < n_classes; ++c) {
      const double tc = (t == c) ? 1.0 : 0.0;
      // d(1 - numer/denom)/dp_c, averaged over foreground classes
      dLdp[c] = dice_weight *
                (-(2.0 * tc * denom_c[c] - numer[c]) / (denom_c[c] * denom_c[c])) /
                double(n_fg);
    }
    double dot = 0.0;
    for (int c = 0; c < n_classes; ++c)
      dot += dLdp[c] * double(probs.v[c * n + v]);
    for (int c = 0; c < n_classes; ++c) {
      const double p = probs.v[c * n + v];
      const double ce_grad = (p - ((t == c) ? 1.0 : 0.0)) / double(n);
      const double dice_grad = p * (dLdp[c] - dot);  // through softmax
      out.dlogits.v[c * n + v] = static_cast<float>(ce_grad + dice_grad);
    }
  }
  return out;
}

}  // namespace pdac::nn
