#include "ngd/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "ngd/core/error.hpp"
#include "ngd/nn/kernels.hpp"

namespace ngd::nn {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void relu_inplace(Tensor& t) {
  for (double& v : t.values()) v = v > 0.0 ? v : 0.0;
}

void relu_backward_inplace(const Tensor& y, Tensor& dy) {
  for (std::size_t i = 0; i < dy.size(); ++i)
    if (!(y[i] > 0.0)) dy[i] = 0.0;
}

void softmax(std::span<const double> logits, std::span<double> out) {
  if (logits.empty()) return;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] /= sum;
}

void softmax_backward(std::span<const double> p, std::span<const double> dp,
                      std::span<double> dlogits) {
  double inner = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) inner += p[i] * dp[i];
  for (std::size_t i = 0; i < p.size(); ++i) dlogits[i] = p[i] * (dp[i] - inner);
}

double huber(double x) {
  const double a = std::abs(x);
  return a <= 1.0 ? 0.5 * x * x : a - 0.5;
}

double huber_grad(double x) { return std::clamp(x, -1.0, 1.0); }

double bce_with_logit(double logit, double label) {
  // log(1 + exp(-|z|)) + max(z, 0) - z * y
  return std::log1p(std::exp(-std::abs(logit))) + std::max(logit, 0.0) -
         logit * label;
}

double bce_with_logit_grad(double logit, double label) {
  return sigmoid(logit) - label;
}

// ---- Dense ---------------------------------------------------------------

Dense::Dense(const std::string& name, std::size_t in, std::size_t out)
    : weight(name + ".weight", {out, in}), bias(name + ".bias", {out}) {}

void Dense::init(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in()));
  for (double& v : weight.value.values()) v = uniform(rng, -bound, bound);
  for (double& v : bias.value.values()) v = uniform(rng, -bound, bound);
}

Tensor Dense::forward(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != in())
    throw ShapeMismatch("dense forward: input " + shape_string(x.shape()) +
                        " vs weight " + shape_string(weight.value.shape()));
  const std::size_t n = x.dim(0);
  Tensor y({n, out()});
  for (std::size_t r = 0; r < n; ++r)
    std::copy(bias.value.storage().begin(), bias.value.storage().end(),
              y.row(r).begin());
  kernels::gemm(false, true, n, out(), in(), x.data(), in(),
                weight.value.data(), in(), y.data(), out(), true);
  return y;
}

Tensor Dense::backward(const Tensor& x, const Tensor& dy) {
  const std::size_t n = x.dim(0);
  if (dy.rank() != 2 || dy.dim(0) != n || dy.dim(1) != out())
    throw ShapeMismatch("dense backward: dy " + shape_string(dy.shape()));
  kernels::gemm(true, false, out(), in(), n, dy.data(), out(), x.data(), in(),
                weight.grad.data(), in(), true);
  for (std::size_t r = 0; r < n; ++r)
    kernels::axpy(1.0, dy.row(r).data(), bias.grad.data(), out());
  Tensor dx({n, in()});
  kernels::gemm(false, false, n, in(), out(), dy.data(), out(),
                weight.value.data(), in(), dx.data(), in(), false);
  return dx;
}

std::vector<double> Dense::forward(std::span<const double> x) const {
  if (x.size() != in())
    throw ShapeMismatch("dense forward: input length " +
                        std::to_string(x.size()) + ", expected " +
                        std::to_string(in()));
  std::vector<double> y(bias.value.storage());
  const double* w = weight.value.data();
  for (std::size_t o = 0; o < out(); ++o)
    y[o] += kernels::dot(w + o * in(), x.data(), in());
  return y;
}

std::vector<double> Dense::backward(std::span<const double> x,
                                    std::span<const double> dy) {
  if (x.size() != in() || dy.size() != out())
    throw ShapeMismatch("dense backward: vector lengths");
  std::vector<double> dx(in(), 0.0);
  double* gw = weight.grad.data();
  const double* w = weight.value.data();
  for (std::size_t o = 0; o < out(); ++o) {
    if (dy[o] == 0.0) continue;
    kernels::axpy(dy[o], x.data(), gw + o * in(), in());
    kernels::axpy(dy[o], w + o * in(), dx.data(), in());
    bias.grad[o] += dy[o];
  }
  return dx;
}

// ---- Conv2d --------------------------------------------------------------

Conv2d::Conv2d(const std::string& name, std::size_t in_channels,
               std::size_t out_channels, std::size_t kernel,
               std::size_t stride)
    : weight(name + ".weight", {out_channels, in_channels, kernel, kernel}),
      bias(name + ".bias", {out_channels}),
      stride_(stride) {
  if (stride == 0 || kernel == 0)
    throw ShapeMismatch("conv2d: kernel and stride must be positive");
}

std::size_t Conv2d::output_size(std::size_t n) const {
  return (n + stride_ - 1) / stride_;
}

void Conv2d::init(Rng& rng) {
  const double fan_in =
      static_cast<double>(in_channels() * kernel() * kernel());
  const double bound = 1.0 / std::sqrt(fan_in);
  for (double& v : weight.value.values()) v = uniform(rng, -bound, bound);
  for (double& v : bias.value.values()) v = uniform(rng, -bound, bound);
}

Conv2d::Geometry Conv2d::geometry(std::size_t h, std::size_t w) const {
  Geometry g{h, w, output_size(h), output_size(w), 0, 0};
  const std::size_t k = kernel();
  const auto pad = [&](std::size_t n, std::size_t on) -> std::size_t {
    const std::size_t need = (on - 1) * stride_ + k;
    return need > n ? (need - n) / 2 : 0;
  };
  g.pad_top = pad(h, g.oh);
  g.pad_left = pad(w, g.ow);
  return g;
}

void Conv2d::im2col(const double* img, const Geometry& g, double* cols) const {
  const std::size_t k = kernel();
  const std::size_t plane = g.oh * g.ow;
  std::size_t row = 0;
  for (std::size_t c = 0; c < in_channels(); ++c)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx, ++row) {
        double* dst = cols + row * plane;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const long iy = static_cast<long>(oy * stride_ + ky) -
                          static_cast<long>(g.pad_top);
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const long ix = static_cast<long>(ox * stride_ + kx) -
                            static_cast<long>(g.pad_left);
            const bool inside = iy >= 0 && ix >= 0 &&
                                iy < static_cast<long>(g.h) &&
                                ix < static_cast<long>(g.w);
            dst[oy * g.ow + ox] =
                inside ? img[(c * g.h + iy) * g.w + ix] : 0.0;
          }
        }
      }
}

void Conv2d::col2im(const double* cols, const Geometry& g, double* img) const {
  const std::size_t k = kernel();
  const std::size_t plane = g.oh * g.ow;
  std::size_t row = 0;
  for (std::size_t c = 0; c < in_channels(); ++c)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx, ++row) {
        const double* src = cols + row * plane;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const long iy = static_cast<long>(oy * stride_ + ky) -
                          static_cast<long>(g.pad_top);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const long ix = static_cast<long>(ox * stride_ + kx) -
                            static_cast<long>(g.pad_left);
            if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
            img[(c * g.h + iy) * g.w + ix] += src[oy * g.ow + ox];
          }
        }
      }
}

Tensor Conv2d::forward(const Tensor& x) const {
  if (x.rank() != 4 || x.dim(1) != in_channels())
    throw ShapeMismatch("conv2d forward: input " + shape_string(x.shape()) +
                        " vs weight " + shape_string(weight.value.shape()));
  const std::size_t n = x.dim(0);
  const Geometry g = geometry(x.dim(2), x.dim(3));
  const std::size_t ckk = in_channels() * kernel() * kernel();
  const std::size_t plane = g.oh * g.ow;
  Tensor y({n, out_channels(), g.oh, g.ow});
  std::vector<double> cols(ckk * plane);
  const std::size_t in_stride = in_channels() * g.h * g.w;
  for (std::size_t b = 0; b < n; ++b) {
    im2col(x.data() + b * in_stride, g, cols.data());
    double* out = y.data() + b * out_channels() * plane;
    for (std::size_t o = 0; o < out_channels(); ++o)
      std::fill_n(out + o * plane, plane, bias.value[o]);
    kernels::gemm(false, false, out_channels(), plane, ckk,
                  weight.value.data(), ckk, cols.data(), plane, out, plane,
                  true);
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& x, const Tensor& dy) {
  const std::size_t n = x.dim(0);
  const Geometry g = geometry(x.dim(2), x.dim(3));
  const std::size_t ckk = in_channels() * kernel() * kernel();
  const std::size_t plane = g.oh * g.ow;
  if (dy.shape() != Shape{n, out_channels(), g.oh, g.ow})
    throw ShapeMismatch("conv2d backward: dy " + shape_string(dy.shape()));
  Tensor dx(x.shape());
  std::vector<double> cols(ckk * plane);
  std::vector<double> dcols(ckk * plane);
  const std::size_t in_stride = in_channels() * g.h * g.w;
  for (std::size_t b = 0; b < n; ++b) {
    const double* d = dy.data() + b * out_channels() * plane;
    im2col(x.data() + b * in_stride, g, cols.data());
    kernels::gemm(false, true, out_channels(), ckk, plane, d, plane,
                  cols.data(), plane, weight.grad.data(), ckk, true);
    for (std::size_t o = 0; o < out_channels(); ++o) {
      double s = 0.0;
      for (std::size_t p = 0; p < plane; ++p) s += d[o * plane + p];
      bias.grad[o] += s;
    }
    kernels::gemm(true, false, ckk, plane, out_channels(),
                  weight.value.data(), ckk, d, plane, dcols.data(), plane,
                  false);
    col2im(dcols.data(), g, dx.data() + b * in_stride);
  }
  return dx;
}

// ---- LstmCell ------------------------------------------------------------

LstmCell::LstmCell(const std::string& name, std::size_t input,
                   std::size_t hidden)
    : weight(name + ".weight", {4 * hidden, input + hidden}),
      bias(name + ".bias", {4 * hidden}),
      input_(input),
      hidden_(hidden) {}

void LstmCell::init(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(input_ + hidden_));
  for (double& v : weight.value.values()) v = uniform(rng, -bound, bound);
  for (double& v : bias.value.values()) v = uniform(rng, -bound, bound);
  for (std::size_t j = 0; j < hidden_; ++j) bias.value[hidden_ + j] = 1.0;
}

LstmCell::Step LstmCell::step(std::span<const double> x,
                              std::span<const double> h_prev,
                              std::span<const double> c_prev) const {
  if (x.size() != input_ || h_prev.size() != hidden_ ||
      c_prev.size() != hidden_)
    throw ShapeMismatch("lstm step: input/state sizes");
  const std::size_t H = hidden_;
  const std::size_t Z = input_ + hidden_;
  Step s;
  s.z.resize(Z);
  std::copy(x.begin(), x.end(), s.z.begin());
  std::copy(h_prev.begin(), h_prev.end(), s.z.begin() + input_);
  s.gates.resize(4 * H);
  const double* w = weight.value.data();
  for (std::size_t r = 0; r < 4 * H; ++r)
    s.gates[r] = bias.value[r] + kernels::dot(w + r * Z, s.z.data(), Z);
  for (std::size_t j = 0; j < H; ++j) {
    s.gates[j] = sigmoid(s.gates[j]);
    s.gates[H + j] = sigmoid(s.gates[H + j]);
    s.gates[2 * H + j] = std::tanh(s.gates[2 * H + j]);
    s.gates[3 * H + j] = sigmoid(s.gates[3 * H + j]);
  }
  s.c_prev.assign(c_prev.begin(), c_prev.end());
  s.c.resize(H);
  s.tanh_c.resize(H);
  s.h.resize(H);
  for (std::size_t j = 0; j < H; ++j) {
    s.c[j] = s.gates[H + j] * c_prev[j] + s.gates[j] * s.gates[2 * H + j];
    s.tanh_c[j] = std::tanh(s.c[j]);
    s.h[j] = s.gates[3 * H + j] * s.tanh_c[j];
  }
  return s;
}

LstmCell::StepGrad LstmCell::backward(const Step& s,
                                      std::span<const double> dh,
                                      std::span<const double> dc) {
  const std::size_t H = hidden_;
  const std::size_t Z = input_ + hidden_;
  std::vector<double> da(4 * H);
  StepGrad g;
  g.dc_prev.resize(H);
  for (std::size_t j = 0; j < H; ++j) {
    const double i = s.gates[j], f = s.gates[H + j];
    const double cand = s.gates[2 * H + j], o = s.gates[3 * H + j];
    const double dct = dc[j] + dh[j] * o * (1.0 - s.tanh_c[j] * s.tanh_c[j]);
    da[j] = dct * cand * i * (1.0 - i);
    da[H + j] = dct * s.c_prev[j] * f * (1.0 - f);
    da[2 * H + j] = dct * i * (1.0 - cand * cand);
    da[3 * H + j] = dh[j] * s.tanh_c[j] * o * (1.0 - o);
    g.dc_prev[j] = dct * f;
  }
  std::vector<double> dz(Z, 0.0);
  double* gw = weight.grad.data();
  const double* w = weight.value.data();
  for (std::size_t r = 0; r < 4 * H; ++r) {
    if (da[r] == 0.0) continue;
    kernels::axpy(da[r], s.z.data(), gw + r * Z, Z);
    kernels::axpy(da[r], w + r * Z, dz.data(), Z);
    bias.grad[r] += da[r];
  }
  g.dx.assign(dz.begin(), dz.begin() + input_);
  g.dh_prev.assign(dz.begin() + input_, dz.end());
  return g;
}

}  // namespace ngd::nn
