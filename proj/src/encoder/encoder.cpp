#include "ngd/encoder/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "ngd/core/error.hpp"
#include "ngd/nn/kernels.hpp"

namespace ngd::encoder {

Encoder::Encoder(std::size_t vocab_size, std::size_t embed_dim,
                 std::size_t hidden_dim)
    : embeddings("encoder.embeddings", {vocab_size, embed_dim}),
      forward_cell("encoder.lstm_fw", embed_dim, hidden_dim),
      backward_cell("encoder.lstm_bw", embed_dim, hidden_dim),
      attention("encoder.attention", 2 * hidden_dim, 1) {}

void Encoder::init(Rng& rng) {
  // Embedding rows are the input of a unit fan-in lookup.
  for (double& v : embeddings.value.values()) v = uniform(rng, -1.0, 1.0);
  forward_cell.init(rng);
  backward_cell.init(rng);
  attention.init(rng);
}

std::vector<nn::Param*> Encoder::params() {
  std::vector<nn::Param*> ps{&embeddings};
  for (auto* p : forward_cell.params()) ps.push_back(p);
  for (auto* p : backward_cell.params()) ps.push_back(p);
  for (auto* p : attention.params()) ps.push_back(p);
  return ps;
}

Encoder::Trace Encoder::forward(std::span<const std::size_t> indices) const {
  const std::size_t T = indices.size();
  if (T == 0) throw EmptySequence("encoder: empty token sequence");
  const std::size_t E = embed_dim();
  const std::size_t H = hidden_dim();

  Trace tr;
  tr.indices.assign(indices.begin(), indices.end());
  tr.inputs.reserve(T);
  for (std::size_t idx : indices) {
    if (idx >= vocab_size())
      throw ShapeMismatch("encoder: token index " + std::to_string(idx) +
                          " outside vocabulary of " +
                          std::to_string(vocab_size()));
    const double* row = embeddings.value.data() + idx * E;
    tr.inputs.emplace_back(row, row + E);
  }

  std::vector<double> h(H, 0.0), c(H, 0.0);
  tr.forward_steps.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    tr.forward_steps.push_back(forward_cell.step(tr.inputs[t], h, c));
    h = tr.forward_steps.back().h;
    c = tr.forward_steps.back().c;
  }
  std::fill(h.begin(), h.end(), 0.0);
  std::fill(c.begin(), c.end(), 0.0);
  tr.backward_steps.resize(T);
  for (std::size_t t = T; t-- > 0;) {
    tr.backward_steps[t] = backward_cell.step(tr.inputs[t], h, c);
    h = tr.backward_steps[t].h;
    c = tr.backward_steps[t].c;
  }

  tr.hidden = nn::Tensor({T, 2 * H});
  for (std::size_t t = 0; t < T; ++t) {
    auto row = tr.hidden.row(t);
    std::copy(tr.forward_steps[t].h.begin(), tr.forward_steps[t].h.end(),
              row.begin());
    std::copy(tr.backward_steps[t].h.begin(), tr.backward_steps[t].h.end(),
              row.begin() + H);
  }

  tr.logits.resize(T);
  for (std::size_t t = 0; t < T; ++t)
    tr.logits[t] = attention.forward(tr.hidden.row(t))[0];
  tr.weights.resize(T);
  nn::softmax(tr.logits, tr.weights);

  tr.embedding.assign(2 * H, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    nn::kernels::axpy(tr.weights[t], tr.hidden.row(t).data(),
                      tr.embedding.data(), 2 * H);
  return tr;
}

nn::Tensor Encoder::bilstm_states(std::span<const std::size_t> indices) const {
  return forward(indices).hidden;
}

std::vector<double> Encoder::attention_weights(const nn::Tensor& hidden) const {
  const std::size_t T = hidden.dim(0);
  std::vector<double> logits(T), w(T);
  for (std::size_t t = 0; t < T; ++t) logits[t] = attention.forward(hidden.row(t))[0];
  nn::softmax(logits, w);
  return w;
}

std::vector<double> Encoder::relation_embedding(
    std::span<const std::size_t> indices) const {
  return forward(indices).embedding;
}

void Encoder::backward(const Trace& tr, std::span<const double> dv) {
  const std::size_t T = tr.indices.size();
  const std::size_t H = hidden_dim();
  const std::size_t D = 2 * H;
  if (dv.size() != D) throw ShapeMismatch("encoder backward: gradient size");

  // Pooling: v = sum_t w_t h_t.
  nn::Tensor dhidden({T, D});
  std::vector<double> dw(T);
  for (std::size_t t = 0; t < T; ++t) {
    dw[t] = nn::kernels::dot(tr.hidden.row(t).data(), dv.data(), D);
    nn::kernels::axpy(tr.weights[t], dv.data(), dhidden.row(t).data(), D);
  }
  std::vector<double> dlogits(T);
  nn::softmax_backward(tr.weights, dw, dlogits);
  for (std::size_t t = 0; t < T; ++t) {
    const double g[1] = {dlogits[t]};
    const auto dh = attention.backward(tr.hidden.row(t), g);
    nn::kernels::axpy(1.0, dh.data(), dhidden.row(t).data(), D);
  }

  const std::size_t E = embed_dim();
  double* gemb = embeddings.grad.data();

  std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0), dh(H);
  for (std::size_t t = T; t-- > 0;) {
    const auto row = dhidden.row(t);
    for (std::size_t j = 0; j < H; ++j) dh[j] = row[j] + dh_next[j];
    auto g = forward_cell.backward(tr.forward_steps[t], dh, dc_next);
    nn::kernels::axpy(1.0, g.dx.data(), gemb + tr.indices[t] * E, E);
    dh_next = std::move(g.dh_prev);
    dc_next = std::move(g.dc_prev);
  }

  std::fill(dh_next.begin(), dh_next.end(), 0.0);
  std::fill(dc_next.begin(), dc_next.end(), 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    const auto row = dhidden.row(t);
    for (std::size_t j = 0; j < H; ++j) dh[j] = row[H + j] + dh_next[j];
    auto g = backward_cell.backward(tr.backward_steps[t], dh, dc_next);
    nn::kernels::axpy(1.0, g.dx.data(), gemb + tr.indices[t] * E, E);
    dh_next = std::move(g.dh_prev);
    dc_next = std::move(g.dc_prev);
  }
}

}  // namespace ngd::encoder
