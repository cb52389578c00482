#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ngd/core/rng.hpp"
#include "ngd/nn/tensor.hpp"

namespace ngd::nn {

// ---- activations ---------------------------------------------------------

double sigmoid(double x);
void relu_inplace(Tensor& t);
// dy *= (y > 0), where y is the relu output
void relu_backward_inplace(const Tensor& y, Tensor& dy);
// Max-subtracted softmax; out may alias logits.
void softmax(std::span<const double> logits, std::span<double> out);
// d(logits) given softmax output p and upstream gradient dp.
void softmax_backward(std::span<const double> p, std::span<const double> dp,
                      std::span<double> dlogits);

// ---- losses --------------------------------------------------------------

// Huber (smooth-L1) with unit threshold.
double huber(double x);
double huber_grad(double x);
// Numerically stable binary cross-entropy of sigmoid(logit) against label.
double bce_with_logit(double logit, double label);
// d/d(logit) of bce_with_logit.
double bce_with_logit_grad(double logit, double label);

// ---- dense ---------------------------------------------------------------

class Dense {
 public:
  Dense() = default;
  Dense(const std::string& name, std::size_t in, std::size_t out);

  std::size_t in() const { return weight.value.dim(1); }
  std::size_t out() const { return weight.value.dim(0); }

  // Uniform in +-1/sqrt(fan_in) for weights and bias.
  void init(Rng& rng);

  // x: N x in -> N x out
  Tensor forward(const Tensor& x) const;
  // Accumulates weight/bias gradients and returns dL/dx.
  Tensor backward(const Tensor& x, const Tensor& dy);

  // Single-vector convenience forms.
  std::vector<double> forward(std::span<const double> x) const;
  std::vector<double> backward(std::span<const double> x,
                               std::span<const double> dy);

  std::vector<Param*> params() { return {&weight, &bias}; }

  Param weight;  // out x in
  Param bias;    // out
};

// ---- convolution ---------------------------------------------------------

// 2D cross-correlation with "same" zero padding followed by stride
// subsampling; output spatial size is ceil(n / stride).
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, std::size_t in_channels,
         std::size_t out_channels, std::size_t kernel, std::size_t stride);

  std::size_t in_channels() const { return weight.value.dim(1); }
  std::size_t out_channels() const { return weight.value.dim(0); }
  std::size_t kernel() const { return weight.value.dim(2); }
  std::size_t stride() const { return stride_; }
  std::size_t output_size(std::size_t n) const;

  void init(Rng& rng);

  // x: N x C x H x W
  Tensor forward(const Tensor& x) const;
  Tensor backward(const Tensor& x, const Tensor& dy);

  std::vector<Param*> params() { return {&weight, &bias}; }

  Param weight;  // out x in x k x k
  Param bias;    // out

 private:
  struct Geometry {
    std::size_t h, w, oh, ow, pad_top, pad_left;
  };
  Geometry geometry(std::size_t h, std::size_t w) const;
  void im2col(const double* img, const Geometry& g, double* cols) const;
  void col2im(const double* cols, const Geometry& g, double* img) const;

  std::size_t stride_ = 1;
};

// ---- LSTM cell -----------------------------------------------------------

// Standard LSTM cell, gate order (input, forget, candidate, output).
class LstmCell {
 public:
  struct Step {
    std::vector<double> z;       // [x; h_prev]
    std::vector<double> gates;   // activated gates, 4H
    std::vector<double> c_prev;
    std::vector<double> c;
    std::vector<double> tanh_c;
    std::vector<double> h;
  };
  struct StepGrad {
    std::vector<double> dx;
    std::vector<double> dh_prev;
    std::vector<double> dc_prev;
  };

  LstmCell() = default;
  LstmCell(const std::string& name, std::size_t input, std::size_t hidden);

  std::size_t input_size() const { return input_; }
  std::size_t hidden_size() const { return hidden_; }

  // Uniform +-1/sqrt(input + hidden); forget-gate bias set to +1.
  void init(Rng& rng);

  Step step(std::span<const double> x, std::span<const double> h_prev,
            std::span<const double> c_prev) const;
  StepGrad backward(const Step& s, std::span<const double> dh,
                    std::span<const double> dc);

  std::vector<Param*> params() { return {&weight, &bias}; }

  Param weight;  // 4H x (I + H)
  Param bias;    // 4H

 private:
  std::size_t input_ = 0;
  std::size_t hidden_ = 0;
};

}  // namespace ngd::nn
