#pragma once

#include <cstddef>
#include <vector>

#include "ngd/nn/tensor.hpp"

namespace ngd::nn {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Holds per-parameter moments; the parameter
// list is fixed at construction and each step reads Param::grad.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Param*> params, AdamConfig config = {});

  void step();
  void zero_grad();

  std::size_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  std::vector<Param*> params_;
  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::size_t t_ = 0;
};

}  // namespace ngd::nn
