#include "mmf/attention.hpp"

#include <cmath>

namespace mmf {

MultiHeadAttention::MultiHeadAttention(int64_t dim, int heads, std::mt19937_64& rng)
    : dim_(dim), heads_(heads) {
    if (heads < 1) throw ConfigError("attention: head count must be >= 1");
    if (dim % heads != 0) {
        throw ConfigError("attention: model dim " + std::to_string(dim) + " not divisible by " +
                          std::to_string(heads) + " heads");
    }
    wq_ = register_parameter("wq", Tensor::kaiming_uniform({dim, dim}, dim, rng));
    wk_ = register_parameter("wk", Tensor::kaiming_uniform({dim, dim}, dim, rng));
    wv_ = register_parameter("wv", Tensor::kaiming_uniform({dim, dim}, dim, rng));
    wo_ = register_parameter("wo", Tensor::kaiming_uniform({dim, dim}, dim, rng));
}

Tensor MultiHeadAttention::forward(const Tensor& x, const Ctx& ctx) const {
    if (x.ndim() != 3 || x.dim(2) != dim_) {
        throw ShapeError("attention: expected [NxTx" + std::to_string(dim_) + "], got " +
                         shape_str(x.shape()));
    }
    const int64_t n = x.dim(0), t = x.dim(1);
    const int64_t h = heads_;
    const int64_t dk = dim_ / h;

    // [N x T x d] -> per-head batch [N*h x T x dk]
    auto to_heads = [&](const Tensor& proj) {
        Tensor r = reshape(proj, {n, t, h, dk});
        return reshape(permute(r, {0, 2, 1, 3}), {n * h, t, dk});
    };
    Tensor flat = reshape(x, {n * t, dim_});
    Tensor q = to_heads(reshape(matmul(flat, wq_), {n, t, dim_}));
    Tensor k = to_heads(reshape(matmul(flat, wk_), {n, t, dim_}));
    Tensor v = to_heads(reshape(matmul(flat, wv_), {n, t, dim_}));

    Tensor scores = scale(bmm(q, permute(k, {0, 2, 1})), scalar{1} / std::sqrt(static_cast<scalar>(dk)));
    Tensor probs = softmax(scores, 2);
    if (ctx.attention_sink) ctx.attention_sink->push_back(probs);

    Tensor ctx_heads = bmm(probs, v);  // [N*h x T x dk]
    Tensor merged = reshape(permute(reshape(ctx_heads, {n, h, t, dk}), {0, 2, 1, 3}), {n * t, dim_});
    return reshape(matmul(merged, wo_), {n, t, dim_});
}

TransformerBlock::TransformerBlock(int64_t dim, int heads, int64_t mlp_hidden, scalar dropout_p,
                                   std::mt19937_64& rng) {
    norm1_ = &register_module("norm1", std::make_unique<LayerNorm>(dim));
    attn_ = &register_module("attn", std::make_unique<MultiHeadAttention>(dim, heads, rng));
    norm2_ = &register_module("norm2", std::make_unique<LayerNorm>(dim));
    mlp_in_ = &register_module("mlp_in", std::make_unique<Linear>(dim, mlp_hidden, rng));
    mlp_out_ = &register_module("mlp_out", std::make_unique<Linear>(mlp_hidden, dim, rng));
    drop_ = &register_module("drop", std::make_unique<Dropout>(dropout_p));
}

Tensor TransformerBlock::forward(const Tensor& x, const Ctx& ctx) const {
    Tensor y = add(x, attn_->forward(norm1_->forward(x), ctx));
    Tensor m = mlp_out_->forward(drop_->forward(relu(mlp_in_->forward(norm2_->forward(y))), ctx));
    return add(y, m);
}

}  // namespace mmf
