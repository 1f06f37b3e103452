#include "pdac/nn/layers.hpp"

#include <cstring>

#include "pdac/simd/kernels.hpp"

namespace pdac::nn {
namespace {

std::int64_t out_extent(std::int64_t in, int k, int stride, int pad) {
  const std::int64_t o = (in + 2 * pad - k) / stride + 1;
  if (o < 1) throw ShapeError("conv: input extent too small for kernel");
  return o;
}

void transpose(const float* src, std::int64_t rows, std::int64_t cols,
               float* dst) {
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv3d
// ---------------------------------------------------------------------------

Conv3d::Conv3d(std::string name, int in_ch, int out_ch, int ksize, int stride,
               int pad, std::mt19937_64& rng)
    : in_ch_(in_ch),
      out_ch_(out_ch),
      ksize_(ksize),
      stride_(stride),
      pad_(pad),
      weight_(name + ".weight",
              {out_ch, std::int64_t(in_ch) * ksize * ksize * ksize}),
      bias_(name + ".bias", {out_ch}) {
  he_init(weight_.w, std::int64_t(in_ch) * ksize * ksize * ksize, rng);
}

void Conv3d::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

namespace {

// One z-slab of the unrolled input: col is [in_ch*k^3, Yo*Xo].
void im2col_slab(const Tensor& x, int in_ch, int k, int stride, int pad,
                 std::int64_t zo, std::int64_t yo_n, std::int64_t xo_n,
                 float* col) {
  const std::int64_t Z = x.shape[1], Y = x.shape[2], X = x.shape[3];
  const std::int64_t n = yo_n * xo_n;
  std::int64_t row = 0;
  for (int c = 0; c < in_ch; ++c) {
    const float* xc = x.data() + c * Z * Y * X;
    for (int kz = 0; kz < k; ++kz) {
      const std::int64_t iz = zo * stride - pad + kz;
      const bool z_ok = iz >= 0 && iz < Z;
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx, ++row) {
          float* dst = col + row * n;
          if (!z_ok) {
            std::memset(dst, 0, sizeof(float) * n);
            continue;
          }
          for (std::int64_t yo = 0; yo < yo_n; ++yo) {
            const std::int64_t iy = yo * stride - pad + ky;
            float* drow = dst + yo * xo_n;
            if (iy < 0 || iy >= Y) {
              std::memset(drow, 0, sizeof(float) * xo_n);
              continue;
            }
            const float* srow = xc + (iz * Y + iy) * X;
            for (std::int64_t xo = 0; xo < xo_n; ++xo) {
              const std::int64_t ix = xo * stride - pad + kx;
              drow[xo] = (ix >= 0 && ix < X) ? srow[ix] : 0.0f;
            }
          }
        }
    }
  }
}

void col2im_slab(const float* col, int in_ch, int k, int stride, int pad,
                 std::int64_t zo, std::int64_t yo_n, std::int64_t xo_n,
                 Tensor& dx) {
  const std::int64_t Z = dx.shape[1], Y = dx.shape[2], X = dx.shape[3];
  const std::int64_t n = yo_n * xo_n;
  std::int64_t row = 0;
  for (int c = 0; c < in_ch; ++c) {
    float* xc = dx.data() + c * Z * Y * X;
    for (int kz = 0; kz < k; ++kz) {
      const std::int64_t iz = zo * stride - pad + kz;
      const bool z_ok = iz >= 0 && iz < Z;
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx, ++row) {
          if (!z_ok) continue;
          const float* src = col + row * n;
          for (std::int64_t yo = 0; yo < yo_n; ++yo) {
            const std::int64_t iy = yo * stride - pad + ky;
            if (iy < 0 || iy >= Y) continue;
            float* drow = xc + (iz * Y + iy) * X;
            const float* srow = src + yo * xo_n;
            for (std::int64_t xo = 0; xo < xo_n; ++xo) {
              const std::int64_t ix = xo * stride - pad + kx;
              if (ix >= 0 && ix < X) drow[ix] += srow[xo];
            }
          }
        }
    }
  }
}

}  // namespace

Tensor Conv3d::forward(const Tensor& x) {
  if (x.shape.size() != 4 || x.shape[0] != in_ch_)
    throw ShapeError("Conv3d: expected [in_ch, Z, Y, X] input");
  x_ = x;
  const std::int64_t zo_n = out_extent(x.shape[1], ksize_, stride_, pad_);
  const std::int64_t yo_n = out_extent(x.shape[2], ksize_, stride_, pad_);
  const std::int64_t xo_n = out_extent(x.shape[3], ksize_, stride_, pad_);
  const std::int64_t kdim = weight_.w.shape[1];
  const std::int64_t n = yo_n * xo_n;

  Tensor y({out_ch_, zo_n, yo_n, xo_n});
  std::vector<float> col(static_cast<std::size_t>(kdim * n));
  std::vector<float> y_slab(static_cast<std::size_t>(out_ch_ * n));
  const auto& K = simd::active();
  for (std::int64_t zo = 0; zo < zo_n; ++zo) {
    im2col_slab(x, in_ch_, ksize_, stride_, pad_, zo, yo_n, xo_n, col.data());
    K.sgemm(out_ch_, n, kdim, weight_.w.data(), col.data(), y_slab.data(),
            false);
    for (int o = 0; o < out_ch_; ++o) {
      float* dst = y.data() + (std::int64_t(o) * zo_n + zo) * n;
      const float* src = y_slab.data() + std::int64_t(o) * n;
      const float b = bias_.w.v[o];
      for (std::int64_t i = 0; i < n; ++i) dst[i] = src[i] + b;
    }
  }
  return y;
}

Tensor Conv3d::backward(const Tensor& dy) {
  const std::int64_t zo_n = dy.shape[1], yo_n = dy.shape[2], xo_n = dy.shape[3];
  const std::int64_t kdim = weight_.w.shape[1];
  const std::int64_t n = yo_n * xo_n;

  Tensor dx(x_.shape);
  std::vector<float> col(static_cast<std::size_t>(kdim * n));
  std::vector<float> colT(static_cast<std::size_t>(kdim * n));
  std::vector<float> dy_slab(static_cast<std::size_t>(out_ch_ * n));
  std::vector<float> dcol(static_cast<std::size_t>(kdim * n));
  std::vector<float> wT(static_cast<std::size_t>(kdim * out_ch_));
  transpose(weight_.w.data(), out_ch_, kdim, wT.data());

  const auto& K = simd::active();
  for (std::int64_t zo = 0; zo < zo_n; ++zo) {
    for (int o = 0; o < out_ch_; ++o)
      std::memcpy(dy_slab.data() + std::int64_t(o) * n,
                  dy.data() + (std::int64_t(o) * zo_n + zo) * n,
                  sizeof(float) * n);
    im2col_slab(x_, in_ch_, ksize_, stride_, pad_, zo, yo_n, xo_n, col.data());
    transpose(col.data(), kdim, n, colT.data());
    K.sgemm(out_ch_, kdim, n, dy_slab.data(), colT.data(), weight_.g.data(),
            true);
    for (int o = 0; o < out_ch_; ++o)
      bias_.g.v[o] += K.reduce_sum(n, dy_slab.data() + std::int64_t(o) * n);
    K.sgemm(kdim, n, out_ch_, wT.data(), dy_slab.data(), dcol.data(), false);
    col2im_slab(dcol.data(), in_ch_, ksize_, stride_, pad_, zo, yo_n, xo_n, dx);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

Conv2d::Conv2d(std::string name, int in_ch, int out_ch, int ksize, int stride,
               int pad, std::mt19937_64& rng)
    : in_ch_(in_ch),
      out_ch_(out_ch),
      ksize_(ksize),
      stride_(stride),
      pad_(pad),
      weight_(name + ".weight", {out_ch, std::int64_t(in_ch) * ksize * ksize}),
      bias_(name + ".bias", {out_ch}) {
  he_init(weight_.w, std::int64_t(in_ch) * ksize * ksize, rng);
}

void Conv2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

namespace {

void im2col_2d(const Tensor& x, int in_ch, int k, int stride, int pad,
               std::int64_t ho_n, std::int64_t wo_n, float* col) {
  const std::int64_t H = x.shape[1], W = x.shape[2];
  const std::int64_t n = ho_n * wo_n;
  std::int64_t row = 0;
  for (int c = 0; c < in_ch; ++c) {
    const float* xc = x.data() + c * H * W;
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx, ++row) {
        float* dst = col + row * n;
        for (std::int64_t ho = 0; ho < ho_n; ++ho) {
          const std::int64_t iy = ho * stride - pad + ky;
          float* drow = dst + ho * wo_n;
          if (iy < 0 || iy >= H) {
            std::memset(drow, 0, sizeof(float) * wo_n);
            continue;
          }
          const float* srow = xc + iy * W;
          for (std::int64_t wo = 0; wo < wo_n; ++wo) {
            const std::int64_t ix = wo * stride - pad + kx;
            drow[wo] = (ix >= 0 && ix < W) ? srow[ix] : 0.0f;
          }
        }
      }
  }
}

void col2im_2d(const float* col, int in_ch, int k, int stride, int pad,
               std::int64_t ho_n, std::int64_t wo_n, Tensor& dx) {
  const std::int64_t H = dx.shape[1], W = dx.shape[2];
  const std::int64_t n = ho_n * wo_n;
  std::int64_t row = 0;
  for (int c = 0; c < in_ch; ++c) {
    float* xc = dx.data() + c * H * W;
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx, ++row) {
        const float* src = col + row * n;
        for (std::int64_t ho = 0; ho < ho_n; ++ho) {
          const std::int64_t iy = ho * stride - pad + ky;
          if (iy < 0 || iy >= H) continue;
          float* drow = xc + iy * W;
          const float* srow = src + ho * wo_n;
          for (std::int64_t wo = 0; wo < wo_n; ++wo) {
            const std::int64_t ix = wo * stride - pad + kx;
            if (ix >= 0 && ix < W) drow[ix] += srow[wo];
          }
        }
      }
  }
}

}  // namespace

Tensor Conv2d::forward(const Tensor& x) {
  if (x.shape.size() != 3 || x.shape[0] != in_ch_)
    throw ShapeError("Conv2d: expected [in_ch, H, W] input");
  x_ = x;
  const std::int64_t ho_n = out_extent(x.shape[1], ksize_, stride_, pad_);
  const std::int64_t wo_n = out_extent(x.shape[2], ksize_, stride_, pad_);
  const std::int64_t kdim = weight_.w.shape[1];
  const std::int64_t n = ho_n * wo_n;

  std::vector<float> col(static_cast<std::size_t>(kdim * n));
  im2col_2d(x, in_ch_, ksize_, stride_, pad_, ho_n, wo_n, col.data());
  Tensor y({out_ch_, ho_n, wo_n});
  const auto& K = simd::active();
  K.sgemm(out_ch_, n, kdim, weight_.w.data(), col.data(), y.data(), false);
  for (int o = 0; o < out_ch_; ++o) {
    float* dst = y.data() + std::int64_t(o) * n;
    const float b = bias_.w.v[o];
    for (std::int64_t i = 0; i < n; ++i) dst[i] += b;
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
  const std::int64_t ho_n = dy.shape[1], wo_n = dy.shape[2];
  const std::int64_t kdim = weight_.w.shape[1];
  const std::int64_t n = ho_n * wo_n;

  std::vector<float> col(static_cast<std::size_t>(kdim * n));
  std::vector<float> colT(static_cast<std::size_t>(kdim * n));
  im2col_2d(x_, in_ch_, ksize_, stride_, pad_, ho_n, wo_n, col.data());
  transpose(col.data(), kdim, n, colT.data());

  const auto& K = simd::active();
  K.sgemm(out_ch_, kdim, n, dy.data(), colT.data(), weight_.g.data(), true);
  for (int o = 0; o < out_ch_; ++o)
    bias_.g.v[o] += K.reduce_sum(n, dy.data() + std::int64_t(o) * n);

  std::vector<float> wT(static_cast<std::size_t>(kdim * out_ch_));
  transpose(weight_.w.data(), out_ch_, kdim, wT.data());
  std::vector<float> dcol(static_cast<std::size_t>(kdim * n));
  K.sgemm(kdim, n, out_ch_, wT.data(), dy.data(), dcol.data(), false);

  Tensor dx(x_.shape);
  col2im_2d(dcol.data(), in_ch_, ksize_, stride_, pad_, ho_n, wo_n, dx);
  return dx;
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

Linear::Linear(std::string name, int in_dim, int out_dim, std::mt19937_64& rng)
    : in_dim_(in_dim),
      out_dim_(out_dim),
      weight_(name + ".weight", {out_dim, in_dim}),
      bias_(name + ".bias", {out_dim}) {
  uniform_init(weight_.w, in_dim, rng);
  uniform_init(bias_.w, in_dim, rng);
}

void Linear::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

Tensor Linear::forward(const Tensor& x) {
  const bool batched = x.shape.size() == 2;
  const std::int64_t n = batched ? x.shape[0] : 1;
  if ((batched ? x.shape[1] : x.shape[0]) != in_dim_)
    throw ShapeError("Linear: input width mismatch");
  x_ = x;

  std::vector<float> wT(static_cast<std::size_t>(in_dim_ * out_dim_));
  transpose(weight_.w.data(), out_dim_, in_dim_, wT.data());
  Tensor y(batched ? std::vector<std::int64_t>{n, out_dim_}
                   : std::vector<std::int64_t>{out_dim_});
  simd::active().sgemm(n, out_dim_, in_dim_, x.data(), wT.data(), y.data(),
                       false);
  for (std::int64_t i = 0; i < n; ++i)
    simd::active().axpy(out_dim_, 1.0f, bias_.w.data(),
                        y.data() + i * out_dim_);
  return y;
}

Tensor Linear::backward(const Tensor& dy) {
  const bool batched = x_.shape.size() == 2;
  const std::int64_t n = batched ? x_.shape[0] : 1;

  std::vector<float> dyT(static_cast<std::size_t>(n * out_dim_));
  transpose(dy.data(), n, out_dim_, dyT.data());
  const auto& K = simd::active();
  K.sgemm(out_dim_, in_dim_, n, dyT.data(), x_.data(), weight_.g.data(), true);
  for (std::int64_t i = 0; i < n; ++i)
    K.axpy(out_dim_, 1.0f, dy.data() + i * out_dim_, bias_.g.data());

  Tensor dx(x_.shape);
  K.sgemm(n, in_dim_, out_dim_, dy.data(), weight_.w.data(), dx.data(), false);
  return dx;
}

// ---------------------------------------------------------------------------
// Elementwise / pooling / resampling
// ---------------------------------------------------------------------------

Tensor ReLU::forward(const Tensor& x) {
  x_ = x;
  Tensor y(x.shape);
  simd::active().relu_fwd(x.numel(), x.data(), y.data());
  return y;
}

Tensor ReLU::backward(const Tensor& dy) {
  Tensor dx(x_.shape);
  simd::active().relu_bwd(x_.numel(), x_.data(), dy.data(), dx.data());
  return dx;
}

Tensor GlobalAvgPool::forward(const Tensor& x) {
  in_shape_ = x.shape;
  const std::int64_t c = x.shape[0];
  const std::int64_t n = x.numel() / c;
  Tensor y({c});
  for (std::int64_t i = 0; i < c; ++i)
    y.v[i] = simd::active().reduce_sum(n, x.data() + i * n) /
             static_cast<float>(n);
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) {
  const std::int64_t c = in_shape_[0];
  std::int64_t n = 1;
  for (std::size_t i = 1; i < in_shape_.size(); ++i) n *= in_shape_[i];
  Tensor dx(in_shape_);
  for (std::int64_t i = 0; i < c; ++i) {
    const float g = dy.v[i] / static_cast<float>(n);
    float* p = dx.data() + i * n;
    for (std::int64_t j = 0; j < n; ++j) p[j] = g;
  }
  return dx;
}

Tensor GlobalMaxPool::forward(const Tensor& x) {
  in_shape_ = x.shape;
  const std::int64_t c = x.shape[0];
  const std::int64_t n = x.numel() / c;
  Tensor y({c});
  argmax_.assign(static_cast<std::size_t>(c), 0);
  for (std::int64_t i = 0; i < c; ++i) {
    const float* p = x.data() + i * n;
    std::int64_t best = 0;
    for (std::int64_t j = 1; j < n; ++j)
      if (p[j] > p[best]) best = j;
    argmax_[static_cast<std::size_t>(i)] = best;
    y.v[static_cast<std::size_t>(i)] = p[best];
  }
  return y;
}

Tensor GlobalMaxPool::backward(const Tensor& dy) {
  const std::int64_t c = in_shape_[0];
  std::int64_t n = 1;
  for (std::size_t i = 1; i < in_shape_.size(); ++i) n *= in_shape_[i];
  Tensor dx(in_shape_);
  for (std::int64_t i = 0; i < c; ++i)
    dx.v[static_cast<std::size_t>(i * n + argmax_[static_cast<std::size_t>(i)])] =
        dy.v[static_cast<std::size_t>(i)];
  return dx;
}

Tensor Upsample3d2x::forward(const Tensor& x) {
  in_shape_ = x.shape;
  const std::int64_t c = x.shape[0], Z = x.shape[1], Y = x.shape[2],
                     X = x.shape[3];
  Tensor y({c, Z * 2, Y * 2, X * 2});
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t z = 0; z < Z * 2; ++z)
      for (std::int64_t yy = 0; yy < Y * 2; ++yy) {
        const float* src = x.data() + ((ch * Z + z / 2) * Y + yy / 2) * X;
        float* dst = y.data() + ((ch * Z * 2 + z) * Y * 2 + yy) * X * 2;
        for (std::int64_t xx = 0; xx < X * 2; ++xx) dst[xx] = src[xx / 2];
      }
  return y;
}

Tensor Upsample3d2x::backward(const Tensor& dy) {
  const std::int64_t c = in_shape_[0], Z = in_shape_[1], Y = in_shape_[2],
                     X = in_shape_[3];
  Tensor dx(in_shape_);
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t z = 0; z < Z * 2; ++z)
      for (std::int64_t yy = 0; yy < Y * 2; ++yy) {
        float* dst = dx.data() + ((ch * Z + z / 2) * Y + yy / 2) * X;
        const float* src = dy.data() + ((ch * Z * 2 + z) * Y * 2 + yy) * X * 2;
        for (std::int64_t xx = 0; xx < X * 2; ++xx) dst[xx / 2] += src[xx];
      }
  return dx;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.shape.size() != b.shape.size())
    throw ShapeError("concat_channels: rank mismatch");
  for (std::size_t i = 1; i < a.shape.size(); ++i)
    if (a.shape[i] != b.shape[i])
      throw ShapeError("concat_channels: spatial shape mismatch");
  std::vector<std::int64_t> shape = a.shape;
  shape[0] = a.shape[0] + b.shape[0];
  Tensor y(shape);
  std::memcpy(y.data(), a.data(), sizeof(float) * a.v.size());
  std::memcpy(y.data() + a.v.size(), b.data(), sizeof(float) * b.v.size());
  return y;
}

void split_channels(const Tensor& d, std::int64_t ca, Tensor& da, Tensor& db) {
  std::vector<std::int64_t> sa = d.shape, sb = d.shape;
  sa[0] = ca;
  sb[0] = d.shape[0] - ca;
  da = Tensor(sa);
  db = Tensor(sb);
  std::memcpy(da.data(), d.data(), sizeof(float) * da.v.size());
  std::memcpy(db.data(), d.data() + da.v.size(), sizeof(float) * db.v.size());
}

}  // namespace pdac::nn
