#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ngd/core/rng.hpp"
#include "ngd/nn/layers.hpp"
#include "ngd/nn/tensor.hpp"

namespace ngd::encoder {

inline constexpr std::size_t kEmbedDim = 32;
inline constexpr std::size_t kHiddenDim = 32;
inline constexpr std::size_t kRelationDim = 2 * kHiddenDim;

// Word embeddings -> single-layer BiLSTM -> attention pooling. The pooled
// vector is the relation embedding consumed by the detector.
class Encoder {
 public:
  // Everything the backward pass needs from one forward pass.
  struct Trace {
    std::vector<std::size_t> indices;
    std::vector<std::vector<double>> inputs;  // embedding rows
    std::vector<nn::LstmCell::Step> forward_steps;
    std::vector<nn::LstmCell::Step> backward_steps;  // indexed by token position
    nn::Tensor hidden;                 // T x 2H
    std::vector<double> logits;        // T
    std::vector<double> weights;       // T, softmax(logits)
    std::vector<double> embedding;     // 2H
  };

  Encoder() = default;
  Encoder(std::size_t vocab_size, std::size_t embed_dim = kEmbedDim,
          std::size_t hidden_dim = kHiddenDim);

  std::size_t vocab_size() const { return embeddings.value.dim(0); }
  std::size_t embed_dim() const { return embeddings.value.dim(1); }
  std::size_t hidden_dim() const { return forward_cell.hidden_size(); }
  std::size_t output_dim() const { return 2 * hidden_dim(); }

  void init(Rng& rng);

  // Throws EmptySequence for T = 0.
  Trace forward(std::span<const std::size_t> indices) const;
  nn::Tensor bilstm_states(std::span<const std::size_t> indices) const;
  std::vector<double> attention_weights(const nn::Tensor& hidden) const;
  std::vector<double> relation_embedding(
      std::span<const std::size_t> indices) const;

  // Accumulates parameter gradients given dLoss/d(embedding).
  void backward(const Trace& trace, std::span<const double> d_embedding);

  std::vector<nn::Param*> params();

  nn::Param embeddings;  // V x E
  nn::LstmCell forward_cell;
  nn::LstmCell backward_cell;
  nn::Dense attention;   // 2H -> 1
};

}  // namespace ngd::encoder
