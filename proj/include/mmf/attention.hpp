#pragma once

#include "mmf/module.hpp"

namespace mmf {

// Scaled dot-product multi-head self-attention:
//   head_i = softmax(Q W_i^Q (K W_i^K)^T / sqrt(d_k)) V W_i^V
//   out    = concat(head_1..head_h) W^O
// Projections carry no bias. When ctx.attention_sink is set, the softmaxed
// attention weights [N*h x T x T] are appended to it.
class MultiHeadAttention : public Module {
public:
    MultiHeadAttention(int64_t dim, int heads, std::mt19937_64& rng);
    // x: [N x T x dim] -> [N x T x dim] (self-attention: Q = K = V = x)
    Tensor forward(const Tensor& x, const Ctx& ctx) const;
    int heads() const { return heads_; }

private:
    int64_t dim_;
    int heads_;
    Tensor wq_, wk_, wv_, wo_;  // each [dim x dim]
};

// Pre-norm transformer encoder block: x + MHA(LN(x)), then x + MLP(LN(x)).
class TransformerBlock : public Module {
public:
    TransformerBlock(int64_t dim, int heads, int64_t mlp_hidden, scalar dropout_p, std::mt19937_64& rng);
    Tensor forward(const Tensor& x, const Ctx& ctx) const;

private:
    LayerNorm* norm1_;
    MultiHeadAttention* attn_;
    LayerNorm* norm2_;
    Linear* mlp_in_;
    Linear* mlp_out_;
    Dropout* drop_;
};

}  // namespace mmf
