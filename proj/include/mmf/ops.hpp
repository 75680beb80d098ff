#pragma once

#include <random>
#include <span>
#include <vector>

#include "mmf/tensor.hpp"

namespace mmf {

enum class PoolKind { Max, Avg };

// -- matrix products ---------------------------------------------------------

// [m x k] . [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);
// Batched: [B x m x k] . [B x k x n] -> [B x m x n]
Tensor bmm(const Tensor& a, const Tensor& b);

// -- convolution and pooling -------------------------------------------------

// Cross-correlation (no kernel flip). x: [N x C x H x W], w: [F x C x kh x kw].
// H' = (H + 2p - kh) / stride + 1, likewise W'.
Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int padding);
// Square window pooling. Max-pool backward routes to the first max index.
Tensor pool2d(const Tensor& x, PoolKind kind, int k, int stride);
// Per-channel convolution. x: [N x C x H x W], w: [C x 1 x kh x kw].
Tensor depthwise_conv2d(const Tensor& x, const Tensor& w, int stride, int padding);

// -- elementwise and activations ---------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, scalar c);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
// x * sigmoid(x)
Tensor silu(const Tensor& x);
// x * clamp(x + 3, 0, 6) / 6 and clamp(x + 3, 0, 6) / 6
Tensor hard_swish(const Tensor& x);
Tensor hard_sigmoid(const Tensor& x);

// Inverted-dropout: zeroes with probability p, scales survivors by 1/(1-p).
// Callers apply it only in training mode; the rng stream comes from the run
// seed so a step is reproducible.
Tensor dropout(const Tensor& x, scalar p, std::mt19937_64& rng);

// -- broadcast helpers (bias over leading axes only) --------------------------

// b's shape must equal the trailing dims of x; repeated over leading dims.
Tensor bias_add(const Tensor& x, const Tensor& b);
// x: [N x C x H x W], b: [C]
Tensor channel_bias(const Tensor& x, const Tensor& b);
// x: [N x C x H x W], s: [N x C]; per-channel gating (squeeze-excitation).
Tensor channel_scale(const Tensor& x, const Tensor& s);
// x: [1 x ...] repeated n times along a new leading batch axis -> [n x ...].
Tensor expand_batch(const Tensor& x, int64_t n);

// -- normalization -----------------------------------------------------------

// Per-channel batch norm over (N, H, W). In training mode normalizes by batch
// statistics and updates running stats in place; otherwise uses running stats.
Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor& running_mean,
                   Tensor& running_var, bool training, scalar momentum = 0.1, scalar eps = 1e-5);
// Normalizes over the last dimension.
Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, scalar eps = 1e-5);

// -- shape ops ----------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape new_shape);
// Collapses dims [start_axis..end] into one.
Tensor flatten(const Tensor& x, int start_axis = 1);
Tensor permute(const Tensor& x, const std::vector<int>& perm);
Tensor concat(const std::vector<Tensor>& ts, int axis);
// Inverse of concat: cuts x along axis into pieces of the given sizes.
std::vector<Tensor> split(const Tensor& x, int axis, const std::vector<int64_t>& sizes);

// -- reductions and losses -----------------------------------------------------

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Max-subtracted softmax along `axis`; rows sum to 1.
Tensor softmax(const Tensor& x, int axis);
// Mean negative log-probability of the true class, stable log-sum-exp form.
// logits: [N x K], labels in [0, K).
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

}  // namespace mmf
