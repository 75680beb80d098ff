#include <Eigen/Core>
#include <algorithm>
#include <utility>

#include "ops_detail.hpp"

namespace mmf {

using detail::finish;
using detail::tracing;

namespace {

using EMat = Eigen::Matrix<scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<EMat>;
using CMap = Eigen::Map<const EMat>;

// C[m x n] = A[m x k] . B[k x n]
void gemm_nn(const scalar* a, const scalar* b, scalar* c, int64_t m, int64_t k, int64_t n, bool acc) {
    CMap ma(a, m, k);
    CMap mb(b, k, n);
    Map mc(c, m, n);
    if (acc) {
        mc.noalias() += ma * mb;
    } else {
        mc.noalias() = ma * mb;
    }
}

// C[m x p] = A[m x q] . B[p x q]^T
void gemm_nt(const scalar* a, const scalar* b, scalar* c, int64_t m, int64_t q, int64_t p, bool acc) {
    CMap ma(a, m, q);
    CMap mb(b, p, q);
    Map mc(c, m, p);
    if (acc) {
        mc.noalias() += ma * mb.transpose();
    } else {
        mc.noalias() = ma * mb.transpose();
    }
}

// C[m x p] = A[q x m]^T . B[q x p]
void gemm_tn(const scalar* a, const scalar* b, scalar* c, int64_t q, int64_t m, int64_t p, bool acc) {
    CMap ma(a, q, m);
    CMap mb(b, q, p);
    Map mc(c, m, p);
    if (acc) {
        mc.noalias() += ma.transpose() * mb;
    } else {
        mc.noalias() = ma.transpose() * mb;
    }
}

struct ConvDims {
    int64_t n, c, h, w;    // input
    int64_t f, kh, kw;     // filters
    int64_t ho, wo;        // output spatial
    int stride, padding;
};

// Unfolds one image [C x H x W] into columns [(C*kh*kw) x (ho*wo)].
void im2col(const scalar* x, const ConvDims& d, scalar* col) {
    const int64_t ow_count = d.wo;
    for (int64_t c = 0; c < d.c; ++c) {
        for (int64_t ki = 0; ki < d.kh; ++ki) {
            for (int64_t kj = 0; kj < d.kw; ++kj) {
                scalar* row = col + ((c * d.kh + ki) * d.kw + kj) * (d.ho * d.wo);
                for (int64_t oh = 0; oh < d.ho; ++oh) {
                    const int64_t ih = oh * d.stride - d.padding + ki;
                    scalar* out = row + oh * ow_count;
                    if (ih < 0 || ih >= d.h) {
                        std::fill(out, out + ow_count, scalar{0});
                        continue;
                    }
                    const scalar* src = x + (c * d.h + ih) * d.w;
                    for (int64_t ow = 0; ow < ow_count; ++ow) {
                        const int64_t iw = ow * d.stride - d.padding + kj;
                        out[ow] = (iw >= 0 && iw < d.w) ? src[iw] : scalar{0};
                    }
                }
            }
        }
    }
}

// Scatter-adds columns back onto one image (adjoint of im2col).
void col2im_acc(const scalar* col, const ConvDims& d, scalar* x) {
    for (int64_t c = 0; c < d.c; ++c) {
        for (int64_t ki = 0; ki < d.kh; ++ki) {
            for (int64_t kj = 0; kj < d.kw; ++kj) {
                const scalar* row = col + ((c * d.kh + ki) * d.kw + kj) * (d.ho * d.wo);
                for (int64_t oh = 0; oh < d.ho; ++oh) {
                    const int64_t ih = oh * d.stride - d.padding + ki;
                    if (ih < 0 || ih >= d.h) continue;
                    scalar* dst = x + (c * d.h + ih) * d.w;
                    const scalar* src = row + oh * d.wo;
                    for (int64_t ow = 0; ow < d.wo; ++ow) {
                        const int64_t iw = ow * d.stride - d.padding + kj;
                        if (iw >= 0 && iw < d.w) dst[iw] += src[ow];
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2) {
        throw ShapeError("matmul: expected rank-2 operands, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    }
    if (a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: inner dimensions disagree: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out({m, n});
    gemm_nn(a.data().data(), b.data().data(), out.mutable_data().data(), m, k, n, false);
    bool tr = tracing({&a, &b});
    if (tr) {
        auto ai = a.impl();
        auto bi = b.impl();
        auto oi = out.impl();
        Tape::active()->record(oi, [ai, bi, oi, m, k, n] {
            if (ai->requires_grad) {
                // dA = dC . B^T
                gemm_nt(oi->grad.data(), bi->data.data(), grad_buffer(*ai).data(), m, n, k, true);
            }
            if (bi->requires_grad) {
                // dB = A^T . dC
                gemm_tn(ai->data.data(), oi->grad.data(), grad_buffer(*bi).data(), m, k, n, true);
            }
        });
    }
    return finish("matmul", std::move(out), tr);
}

Tensor bmm(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1)) {
        throw ShapeError("bmm: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    }
    const int64_t bs = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
    Tensor out({bs, m, n});
    for (int64_t i = 0; i < bs; ++i) {
        gemm_nn(a.data().data() + i * m * k, b.data().data() + i * k * n,
                out.mutable_data().data() + i * m * n, m, k, n, false);
    }
    bool tr = tracing({&a, &b});
    if (tr) {
        auto ai = a.impl();
        auto bi = b.impl();
        auto oi = out.impl();
        Tape::active()->record(oi, [ai, bi, oi, bs, m, k, n] {
            if (ai->requires_grad) {
                auto& g = grad_buffer(*ai);
                for (int64_t i = 0; i < bs; ++i) {
                    gemm_nt(oi->grad.data() + i * m * n, bi->data.data() + i * k * n, g.data() + i * m * k,
                            m, n, k, true);
                }
            }
            if (bi->requires_grad) {
                auto& g = grad_buffer(*bi);
                for (int64_t i = 0; i < bs; ++i) {
                    gemm_tn(ai->data.data() + i * m * k, oi->grad.data() + i * m * n, g.data() + i * k * n,
                            m, k, n, true);
                }
            }
        });
    }
    return finish("bmm", std::move(out), tr);
}

Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int padding) {
    if (x.ndim() != 4 || w.ndim() != 4) {
        throw ShapeError("conv2d: expected x [NxCxHxW] and w [FxCxkhxkw], got " + shape_str(x.shape()) +
                         " and " + shape_str(w.shape()));
    }
    if (x.dim(1) != w.dim(1)) {
        throw ShapeError("conv2d: channel mismatch: input " + shape_str(x.shape()) + ", weight " +
                         shape_str(w.shape()));
    }
    if (stride < 1 || padding < 0) throw ContractError("conv2d: stride must be >= 1 and padding >= 0");
    ConvDims d;
    d.n = x.dim(0);
    d.c = x.dim(1);
    d.h = x.dim(2);
    d.w = x.dim(3);
    d.f = w.dim(0);
    d.kh = w.dim(2);
    d.kw = w.dim(3);
    d.stride = stride;
    d.padding = padding;
    if (d.kh > d.h + 2 * padding || d.kw > d.w + 2 * padding) {
        throw ShapeError("conv2d: kernel " + shape_str(w.shape()) + " exceeds padded input " +
                         shape_str(x.shape()) + " with padding " + std::to_string(padding));
    }
    d.ho = (d.h + 2 * padding - d.kh) / stride + 1;
    d.wo = (d.w + 2 * padding - d.kw) / stride + 1;

    const int64_t col_rows = d.c * d.kh * d.kw;
    const int64_t col_cols = d.ho * d.wo;
    std::vector<scalar> col(static_cast<size_t>(col_rows * col_cols));
    Tensor out({d.n, d.f, d.ho, d.wo});
    for (int64_t i = 0; i < d.n; ++i) {
        im2col(x.data().data() + i * d.c * d.h * d.w, d, col.data());
        gemm_nn(w.data().data(), col.data(), out.mutable_data().data() + i * d.f * col_cols, d.f, col_rows,
                col_cols, false);
    }
    bool tr = tracing({&x, &w});
    if (tr) {
        auto xi = x.impl();
        auto wi = w.impl();
        auto oi = out.impl();
        Tape::active()->record(oi, [xi, wi, oi, d, col_rows, col_cols] {
            // columns are recomputed per image rather than kept from forward
            std::vector<scalar> col(static_cast<size_t>(col_rows * col_cols));
            std::vector<scalar> dcol(static_cast<size_t>(col_rows * col_cols));
            for (int64_t i = 0; i < d.n; ++i) {
                const scalar* dout = oi->grad.data() + i * d.f * col_cols;
                if (wi->requires_grad) {
                    im2col(xi->data.data() + i * d.c * d.h * d.w, d, col.data());
                    // dW += dOut . col^T
                    gemm_nt(dout, col.data(), grad_buffer(*wi).data(), d.f, col_cols, col_rows, true);
                }
                if (xi->requires_grad) {
                    // dcol = W^T . dOut, scattered back through im2col's adjoint
                    gemm_tn(wi->data.data(), dout, dcol.data(), d.f, col_rows, col_cols, false);
                    col2im_acc(dcol.data(), d, grad_buffer(*xi).data() + i * d.c * d.h * d.w);
                }
            }
        });
    }
    return finish("conv2d", std::move(out), tr);
}

Tensor depthwise_conv2d(const Tensor& x, const Tensor& w, int stride, int padding) {
    if (x.ndim() != 4 || w.ndim() != 4 || w.dim(1) != 1 || w.dim(0) != x.dim(1)) {
        throw ShapeError("depthwise_conv2d: expected x [NxCxHxW] and w [Cx1xkhxkw], got " +
                         shape_str(x.shape()) + " and " + shape_str(w.shape()));
    }
    if (stride < 1 || padding < 0) throw ContractError("depthwise_conv2d: bad stride/padding");
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const int64_t kh = w.dim(2), kw = w.dim(3);
    if (kh > h + 2 * padding || kw > wd + 2 * padding) {
        throw ShapeError("depthwise_conv2d: kernel exceeds padded input " + shape_str(x.shape()));
    }
    const int64_t ho = (h + 2 * padding - kh) / stride + 1;
    const int64_t wo = (wd + 2 * padding - kw) / stride + 1;
    const auto xd = x.data();
    const auto wdat = w.data();
    std::vector<scalar> y(static_cast<size_t>(n * c * ho * wo), 0);
    for (int64_t in = 0; in < n; ++in) {
        for (int64_t ic = 0; ic < c; ++ic) {
            const scalar* plane = xd.data() + (in * c + ic) * h * wd;
            const scalar* ker = wdat.data() + ic * kh * kw;
            scalar* out = y.data() + (in * c + ic) * ho * wo;
            for (int64_t oh = 0; oh < ho; ++oh) {
                for (int64_t ow = 0; ow < wo; ++ow) {
                    scalar acc = 0;
                    for (int64_t ki = 0; ki < kh; ++ki) {
                        const int64_t ih = oh * stride - padding + ki;
                        if (ih < 0 || ih >= h) continue;
                        for (int64_t kj = 0; kj < kw; ++kj) {
                            const int64_t iw = ow * stride - padding + kj;
                            if (iw < 0 || iw >= wd) continue;
                            acc += plane[ih * wd + iw] * ker[ki * kw + kj];
                        }
                    }
                    out[oh * wo + ow] = acc;
                }
            }
        }
    }
    Tensor out({n, c, ho, wo}, std::move(y));
    bool tr = tracing({&x, &w});
    if (tr) {
        auto xi = x.impl();
        auto wi = w.impl();
        auto oi = out.impl();
        Tape::active()->record(oi, [xi, wi, oi, n, c, h, wd, kh, kw, ho, wo, stride, padding] {
            const bool need_dx = xi->requires_grad;
            const bool need_dw = wi->requires_grad;
            auto* gx = need_dx ? grad_buffer(*xi).data() : nullptr;
            auto* gw = need_dw ? grad_buffer(*wi).data() : nullptr;
            for (int64_t in = 0; in < n; ++in) {
                for (int64_t ic = 0; ic < c; ++ic) {
                    const scalar* plane = xi->data.data() + (in * c + ic) * h * wd;
                    const scalar* ker = wi->data.data() + ic * kh * kw;
                    const scalar* gout = oi->grad.data() + (in * c + ic) * ho * wo;
                    for (int64_t oh = 0; oh < ho; ++oh) {
                        for (int64_t ow = 0; ow < wo; ++ow) {
                            const scalar go = gout[oh * wo + ow];
                            if (go == 0) continue;
                            for (int64_t ki = 0; ki < kh; ++ki) {
                                const int64_t ih = oh * stride - padding + ki;
                                if (ih < 0 || ih >= h) continue;
                                for (int64_t kj = 0; kj < kw; ++kj) {
                                    const int64_t iw = ow * stride - padding + kj;
                                    if (iw < 0 || iw >= wd) continue;
                                    if (need_dx) gx[(in * c + ic) * h * wd + ih * wd + iw] += go * ker[ki * kw + kj];
                                    if (need_dw) gw[ic * kh * kw + ki * kw + kj] += go * plane[ih * wd + iw];
                                }
                            }
                        }
                    }
                }
            }
        });
    }
    return finish("depthwise_conv2d", std::move(out), tr);
}

Tensor pool2d(const Tensor& x, PoolKind kind, int k, int stride) {
    if (x.ndim() != 4) throw ShapeError("pool2d: expected [NxCxHxW], got " + shape_str(x.shape()));
    if (k < 1 || stride < 1) throw ContractError("pool2d: window and stride must be >= 1");
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (k > h || k > w) {
        throw ShapeError("pool2d: window " + std::to_string(k) + " exceeds spatial dims of " +
                         shape_str(x.shape()));
    }
    const int64_t ho = (h - k) / stride + 1;
    const int64_t wo = (w - k) / stride + 1;
    const auto xd = x.data();
    std::vector<scalar> y(static_cast<size_t>(n * c * ho * wo));
    std::vector<int64_t> argmax;
    const bool is_max = kind == PoolKind::Max;
    if (is_max) argmax.resize(y.size());
    const scalar inv_area = scalar{1} / static_cast<scalar>(k * k);
    for (int64_t nc = 0; nc < n * c; ++nc) {
        const scalar* plane = xd.data() + nc * h * w;
        for (int64_t oh = 0; oh < ho; ++oh) {
            for (int64_t ow = 0; ow < wo; ++ow) {
                const int64_t out_idx = (nc * ho + oh) * wo + ow;
                if (is_max) {
                    scalar best = plane[(oh * stride) * w + ow * stride];
                    int64_t best_idx = (oh * stride) * w + ow * stride;
                    for (int64_t ki = 0; ki < k; ++ki) {
                        for (int64_t kj = 0; kj < k; ++kj) {
                            const int64_t idx = (oh * stride + ki) * w + ow * stride + kj;
                            // strict > keeps the first index on ties
                            if (plane[idx] > best) {
                                best = plane[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    y[static_cast<size_t>(out_idx)] = best;
                    argmax[static_cast<size_t>(out_idx)] = nc * h * w + best_idx;
                } else {
                    scalar acc = 0;
                    for (int64_t ki = 0; ki < k; ++ki) {
                        for (int64_t kj = 0; kj < k; ++kj) {
                            acc += plane[(oh * stride + ki) * w + ow * stride + kj];
                        }
                    }
                    y[static_cast<size_t>(out_idx)] = acc * inv_area;
                }
            }
        }
    }
    Tensor out({n, c, ho, wo}, std::move(y));
    bool tr = tracing({&x});
    if (tr) {
        auto xi = x.impl();
        auto oi = out.impl();
        if (is_max) {
            Tape::active()->record(oi, [xi, oi, argmax = std::move(argmax)] {
                auto& g = grad_buffer(*xi);
                for (size_t i = 0; i < argmax.size(); ++i) g[static_cast<size_t>(argmax[i])] += oi->grad[i];
            });
        } else {
            Tape::active()->record(oi, [xi, oi, n, c, h, w, ho, wo, k, stride, inv_area] {
                auto& g = grad_buffer(*xi);
                for (int64_t nc = 0; nc < n * c; ++nc) {
                    for (int64_t oh = 0; oh < ho; ++oh) {
                        for (int64_t ow = 0; ow < wo; ++ow) {
                            const scalar go = oi->grad[static_cast<size_t>((nc * ho + oh) * wo + ow)] * inv_area;
                            for (int64_t ki = 0; ki < k; ++ki) {
                                for (int64_t kj = 0; kj < k; ++kj) {
                                    g[static_cast<size_t>(nc * h * w + (oh * stride + ki) * w + ow * stride + kj)] += go;
                                }
                            }
                        }
                    }
                }
            });
        }
    }
    return finish("pool2d", std::move(out), tr);
}

}  // namespace mmf
