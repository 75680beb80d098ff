#include <algorithm>
#include <cmath>
#include <utility>

#include "ops_detail.hpp"

namespace mmf {

using detail::finish;
using detail::inner_size;
using detail::normalize_axis;
using detail::outer_size;
using detail::tracing;

namespace {

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

// Elementwise unary op with gradient dy/dx supplied per element from (x, y).
template <typename Fwd, typename Bwd>
Tensor unary_op(const char* name, const Tensor& x, Fwd fwd, Bwd dydx) {
    const auto xs = x.data();
    std::vector<scalar> y(xs.size());
    for (size_t i = 0; i < xs.size(); ++i) y[i] = fwd(xs[i]);
    Tensor out(x.shape(), std::move(y));
    bool tr = tracing({&x});
    if (tr) {
        auto xi = x.impl();
        auto oi = out.impl();
        Tape::active()->record(oi, [xi, oi, dydx] {
            auto& g = grad_buffer(*xi);
            for (size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i] * dydx(xi->data[i], oi->data[i]);
        });
    }
    return finish(name, std::move(out), tr);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape("add", a, b);
    const auto as = a.data();
    const auto bs = b.data();
    std::vector<scalar> y(as.size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = as[i] + bs[i];
    Tensor out(a.shape(), std::move(y));
    bool tr = tracing({&a, &b});
    if (tr) {
        auto ai = a.impl();
        auto bi = b.impl();
        auto oi = out.impl();
        Tape::active()->record(oi, [ai, bi, oi] {
            if (ai->requires_grad) {
                auto& g = grad_buffer(*ai);
                for (size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i];
            }
            if (bi->requires_grad) {
                auto& g = grad_buffer(*bi);
                for (size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i];
            }
        });
    }
    return finish("add", std::move(out), tr);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape("sub", a, b);
    const auto as = a.data();
    const auto bs = b.data();
    std::vector<scalar> y(as.size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = as[i] - bs[i];
    Tensor out(a.shape(), std::move(y));
    bool tr = tracing({&a, &b});
    if (tr) {
        auto ai = a.impl();
        auto bi = b.impl();
        auto oi = out.impl();
        Tape::active()->record(oi, [ai, bi, oi] {
            if (ai->requires_grad) {
                auto& g = grad_buffer(*ai);
                for (size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i];
            }
            if (bi->requires_grad) {
                auto& g = grad_buffer(*bi);
                for (size_t i = 0; i < g.size(); ++i) g[i] -= oi->grad[i];
            }
        });
    }
    return finish("sub", std::move(out), tr);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape("mul", a, b);
    const auto as = a.data();
    const auto bs = b.data();
    std::vector<scalar> y(as.size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = as[i] * bs[i];
    Tensor out(a.shape(), std::move(y));
    bool tr = tracing({&a, &b});
    if (tr) {
        auto ai = a.impl();
        auto bi = b.impl();
        auto oi = out.impl();
        Tape::active()->record(oi, [ai, bi, oi] {
            if (ai->requires_grad) {
                auto& g = grad_buffer(*ai);
                for (size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i] * bi->data[i];
            }
            if (bi->requires_grad) {
                auto& g = grad_buffer(*bi);
                for (size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i] * ai->data[i];
            }
        });
    }
    return finish("mul", std::move(out), tr);
}

Tensor scale(const Tensor& x, scalar c) {
    return unary_op("scale", x, [c](scalar v) { return c * v; }, [c](scalar, scalar) { return c; });
}

Tensor relu(const Tensor& x) {
    return unary_op(
        "relu", x, [](scalar v) { return v > 0 ? v : scalar{0}; },
        [](scalar v, scalar) { return v > 0 ? scalar{1} : scalar{0}; });
}

Tensor sigmoid(const Tensor& x) {
    auto sig = [](scalar v) {
        // split on sign to avoid exp overflow
        if (v >= 0) return scalar{1} / (scalar{1} + std::exp(-v));
        scalar e = std::exp(v);
        return e / (scalar{1} + e);
    };
    return unary_op("sigmoid", x, sig, [](scalar, scalar y) { return y * (scalar{1} - y); });
}

Tensor tanh(const Tensor& x) {
    return unary_op(
        "tanh", x, [](scalar v) { return std::tanh(v); },
        [](scalar, scalar y) { return scalar{1} - y * y; });
}

Tensor silu(const Tensor& x) {
    auto sig = [](scalar v) {
        if (v >= 0) return scalar{1} / (scalar{1} + std::exp(-v));
        scalar e = std::exp(v);
        return e / (scalar{1} + e);
    };
    return unary_op(
        "silu", x, [sig](scalar v) { return v * sig(v); },
        [sig](scalar v, scalar) {
            scalar s = sig(v);
            return s + v * s * (scalar{1} - s);
        });
}

Tensor hard_swish(const Tensor& x) {
    return unary_op(
        "hard_swish", x,
        [](scalar v) {
            if (v <= -3) return scalar{0};
            if (v >= 3) return v;
            return v * (v + 3) / 6;
        },
        [](scalar v, scalar) -> scalar {
            if (v <= -3) return 0;
            if (v >= 3) return 1;
            return (2 * v + 3) / 6;
        });
}

Tensor hard_sigmoid(const Tensor& x) {
    return unary_op(
        "hard_sigmoid", x,
        [](scalar v) {
            if (v <= -3) return scalar{0};
            if (v >= 3) return scalar{1};
            return (v + 3) / 6;
        },
        [](scalar v, scalar) -> scalar { return (v > -3 && v < 3) ? scalar{1} / 6 : 0; });
}

Tensor dropout(const Tensor& x, scalar p, std::mt19937_64& rng) {
    if (!(p >= 0 && p < 1)) {
        throw ConfigError("dropout: p must lie in [0,1), got " + std::to_string(p));
    }
    if (p == 0) return x;
    const auto xs = x.data();
    std::vector<scalar> mask(xs.size());
    std::vector<scalar> y(xs.size());
    const scalar keep_scale = scalar{1} / (scalar{1} - p);
    std::uniform_real_distribution<scalar> u(scalar{0}, scalar{1});
    for (size_t i = 0; i < xs.size(); ++i) {
        mask[i] = u(rng) < p ? scalar{0} : keep_scale;
        y[i] = xs[i] * mask[i];
    }
    Tensor out(x.shape(), std::move(y));
    bool tr = tracing({&x});
    if (tr) {
        auto xi = x.impl();
        auto oi = out.impl();
        Tape::active()->record(oi, [xi, oi, mask = std::move(mask)] {
            auto& g = grad_buffer(*xi);
            for (size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i] * mask[i];
        });
    }
    return finish("dropout", std::move(out), tr);
}

Tensor bias_add(const Tensor& x, const Tensor& b) {
    const auto& xs = x.shape();
    const auto& bs = b.shape();
    if (bs.size() >= xs.size() ||
        !std::equal(bs.begin(), bs.end(), xs.end() - static_cast<int64_t>(bs.size()))) {
        throw ShapeError("bias_add: bias shape " + shape_str(bs) + " is not a trailing suffix of " +
                         shape_str(xs));
    }
    const int64_t inner = b.numel();
    const int64_t outer = x.numel() / inner;
    const auto xd = x.data();
    const auto bd = b.data();
    std::vector<scalar> y(xd.size());
    for (int64_t o = 0; o < outer; ++o) {
        for (int64_t i = 0; i < inner; ++i) {
            y[static_cast<size_t>(o * inner + i)] = xd[static_cast<size_t>(o * inner + i)] + bd[static_cast<size_t>(i)];
        }
    }
    Tensor out(x.shape(), std::move(y));
    bool tr = tracing({&x, &b});
    if (tr) {
        auto xi = x.impl();
        auto bi = b.impl();
        auto oi = out.impl();
        Tape::active()->record(oi, [xi, bi, oi, outer, inner] {
            if (xi->requires_grad) {
                auto& g = grad_buffer(*xi);
                for (size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i];
            }
            if (bi->requires_grad) {
                auto& g = grad_buffer(*bi);
                for (int64_t o = 0; o < outer; ++o) {
                    for (int64_t i = 0; i < inner; ++i) {
                        g[static_cast<size_t>(i)] += oi->grad[static_cast<size_t>(o * inner + i)];
                    }
                }
            }
        });
    }
    return finish("bias_add", std::move(out), tr);
}

Tensor channel_bias(const Tensor& x, const Tensor& b) {
    if (x.ndim() != 4 || b.ndim() != 1 || b.dim(0) != x.dim(1)) {
        throw ShapeError("channel_bias: expected x [NxCxHxW] and b [C], got " + shape_str(x.shape()) +
                         " and " + shape_str(b.shape()));
    }
    const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    const auto xd = x.data();
    const auto bd = b.data();
    std::vector<scalar> y(xd.size());
    for (int64_t in = 0; in < n; ++in) {
        for (int64_t ic = 0; ic < c; ++ic) {
            const int64_t base = (in * c + ic) * hw;
            for (int64_t i = 0; i < hw; ++i) y[static_cast<size_t>(base + i)] = xd[static_cast<size_t>(base + i)] + bd[static_cast<size_t>(ic)];
        }
    }
    Tensor out(x.shape(), std::move(y));
    bool tr = tracing({&x, &b});
    if (tr) {
        auto xi = x.impl();
        auto bi = b.impl();
        auto oi = out.impl();
        Tape::active()->record(oi, [xi, bi, oi, n, c, hw] {
            if (xi->requires_grad) {
                auto& g = grad_buffer(*xi);
                for (size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i];
            }
            if (bi->requires_grad) {
                auto& g = grad_buffer(*bi);
                for (int64_t in = 0; in < n; ++in) {
                    for (int64_t ic = 0; ic < c; ++ic) {
                        const int64_t base = (in * c + ic) * hw;
                        scalar acc = 0;
                        for (int64_t i = 0; i < hw; ++i) acc += oi->grad[static_cast<size_t>(base + i)];
                        g[static_cast<size_t>(ic)] += acc;
                    }
                }
            }
        });
    }
    return finish("channel_bias", std::move(out), tr);
}

Tensor channel_scale(const Tensor& x, const Tensor& s) {
    if (x.ndim() != 4 || s.ndim() != 2 || s.dim(0) != x.dim(0) || s.dim(1) != x.dim(1)) {
        throw ShapeError("channel_scale: expected x [NxCxHxW] and s [NxC], got " + shape_str(x.shape()) +
                         " and " + shape_str(s.shape()));
    }
    const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    const auto xd = x.data();
    const auto sd = s.data();
    std::vector<scalar> y(xd.size());
    for (int64_t nc = 0; nc < n * c; ++nc) {
        const int64_t base = nc * hw;
        for (int64_t i = 0; i < hw; ++i) y[static_cast<size_t>(base + i)] = xd[static_cast<size_t>(base + i)] * sd[static_cast<size_t>(nc)];
    }
    Tensor out(x.shape(), std::move(y));
    bool tr = tracing({&x, &s});
    if (tr) {
        auto xi = x.impl();
        auto si = s.impl();
        auto oi = out.impl();
        Tape::active()->record(oi, [xi, si, oi, n, c, hw] {
            if (xi->requires_grad) {
                auto& g = grad_buffer(*xi);
                for (int64_t nc = 0; nc < n * c; ++nc) {
                    const int64_t base = nc * hw;
                    for (int64_t i = 0; i < hw; ++i) g[static_cast<size_t>(base + i)] += oi->grad[static_cast<size_t>(base + i)] * si->data[static_cast<size_t>(nc)];
                }
            }
            if (si->requires_grad) {
                auto& g = grad_buffer(*si);
                for (int64_t nc = 0; nc < n * c; ++nc) {
                    const int64_t base = nc * hw;
                    scalar acc = 0;
                    for (int64_t i = 0; i < hw; ++i) acc += oi->grad[static_cast<size_t>(base + i)] * xi->data[static_cast<size_t>(base + i)];
                    g[static_cast<size_t>(nc)] += acc;
                }
            }
        });
    }
    return finish("channel_scale", std::move(out), tr);
}

Tensor expand_batch(const Tensor& x, int64_t n) {
    if (x.dim(0) != 1) {
        throw ShapeError("expand_batch: leading dim must be 1, got " + shape_str(x.shape()));
    }
    if (n < 1) throw ContractError("expand_batch: n must be >= 1");
    Shape out_shape = x.shape();
    out_shape[0] = n;
    const auto xd = x.data();
    const int64_t inner = x.numel();
    std::vector<scalar> y(static_cast<size_t>(n * inner));
    for (int64_t b = 0; b < n; ++b) {
        std::copy(xd.begin(), xd.end(), y.begin() + b * inner);
    }
    Tensor out(std::move(out_shape), std::move(y));
    bool tr = tracing({&x});
    if (tr) {
        auto xi = x.impl();
        auto oi = out.impl();
        Tape::active()->record(oi, [xi, oi, n, inner] {
            auto& g = grad_buffer(*xi);
            for (int64_t b = 0; b < n; ++b) {
                for (int64_t i = 0; i < inner; ++i) g[static_cast<size_t>(i)] += oi->grad[static_cast<size_t>(b * inner + i)];
            }
        });
    }
    return finish("expand_batch", std::move(out), tr);
}

Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor& running_mean,
                   Tensor& running_var, bool training, scalar momentum, scalar eps) {
    if (x.ndim() != 4) throw ShapeError("batchnorm2d: expected [NxCxHxW], got " + shape_str(x.shape()));
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (gamma.numel() != c || beta.numel() != c || running_mean.numel() != c || running_var.numel() != c) {
        throw ShapeError("batchnorm2d: parameter width does not match channel count " + std::to_string(c));
    }
    const int64_t m = n * h * w;  // elements per channel
    const int64_t hw = h * w;
    const auto xd = x.data();
    const auto gd = gamma.data();
    const auto bd = beta.data();

    std::vector<scalar> mean_c(static_cast<size_t>(c)), inv_std_c(static_cast<size_t>(c));
    if (training) {
        auto rm = running_mean.mutable_data();
        auto rv = running_var.mutable_data();
        for (int64_t ic = 0; ic < c; ++ic) {
            scalar mu = 0;
            for (int64_t in = 0; in < n; ++in) {
                const scalar* p = xd.data() + (in * c + ic) * hw;
                for (int64_t i = 0; i < hw; ++i) mu += p[i];
            }
            mu /= static_cast<scalar>(m);
            scalar var = 0;
            for (int64_t in = 0; in < n; ++in) {
                const scalar* p = xd.data() + (in * c + ic) * hw;
                for (int64_t i = 0; i < hw; ++i) var += (p[i] - mu) * (p[i] - mu);
            }
            var /= static_cast<scalar>(m);
            mean_c[static_cast<size_t>(ic)] = mu;
            inv_std_c[static_cast<size_t>(ic)] = scalar{1} / std::sqrt(var + eps);
            const scalar unbiased = m > 1 ? var * static_cast<scalar>(m) / static_cast<scalar>(m - 1) : var;
            rm[static_cast<size_t>(ic)] = (1 - momentum) * rm[static_cast<size_t>(ic)] + momentum * mu;
            rv[static_cast<size_t>(ic)] = (1 - momentum) * rv[static_cast<size_t>(ic)] + momentum * unbiased;
        }
    } else {
        const auto rm = running_mean.data();
        const auto rv = running_var.data();
        for (int64_t ic = 0; ic < c; ++ic) {
            mean_c[static_cast<size_t>(ic)] = rm[static_cast<size_t>(ic)];
            inv_std_c[static_cast<size_t>(ic)] = scalar{1} / std::sqrt(rv[static_cast<size_t>(ic)] + eps);
        }
    }

    std::vector<scalar> xhat(xd.size());
    std::vector<scalar> y(xd.size());
    for (int64_t in = 0; in < n; ++in) {
        for (int64_t ic = 0; ic < c; ++ic) {
            const int64_t base = (in * c + ic) * hw;
            const scalar mu = mean_c[static_cast<size_t>(ic)];
            const scalar is = inv_std_c[static_cast<size_t>(ic)];
            for (int64_t i = 0; i < hw; ++i) {
                const scalar xh = (xd[static_cast<size_t>(base + i)] - mu) * is;
                xhat[static_cast<size_t>(base + i)] = xh;
                y[static_cast<size_t>(base + i)] = gd[static_cast<size_t>(ic)] * xh + bd[static_cast<size_t>(ic)];
            }
        }
    }
    Tensor out(x.shape(), std::move(y));
    bool tr = tracing({&x, &gamma, &beta});
    if (tr) {
        auto xi = x.impl();
        auto gi = gamma.impl();
        auto bi = beta.impl();
        auto oi = out.impl();
        Tape::active()->record(oi, [xi, gi, bi, oi, xhat = std::move(xhat), inv_std_c = std::move(inv_std_c),
                                    n, c, hw, m, training] {
            // per-channel sums of dy and dy*xhat
            std::vector<scalar> sum_dy(static_cast<size_t>(c), 0), sum_dyx(static_cast<size_t>(c), 0);
            for (int64_t in = 0; in < n; ++in) {
                for (int64_t ic = 0; ic < c; ++ic) {
                    const int64_t base = (in * c + ic) * hw;
                    scalar a = 0, b = 0;
                    for (int64_t i = 0; i < hw; ++i) {
                        a += oi->grad[static_cast<size_t>(base + i)];
                        b += oi->grad[static_cast<size_t>(base + i)] * xhat[static_cast<size_t>(base + i)];
                    }
                    sum_dy[static_cast<size_t>(ic)] += a;
                    sum_dyx[static_cast<size_t>(ic)] += b;
                }
            }
            if (bi->requires_grad) {
                auto& g = grad_buffer(*bi);
                for (int64_t ic = 0; ic < c; ++ic) g[static_cast<size_t>(ic)] += sum_dy[static_cast<size_t>(ic)];
            }
            if (gi->requires_grad) {
                auto& g = grad_buffer(*gi);
                for (int64_t ic = 0; ic < c; ++ic) g[static_cast<size_t>(ic)] += sum_dyx[static_cast<size_t>(ic)];
            }
            if (xi->requires_grad) {
                auto& g = grad_buffer(*xi);
                const scalar inv_m = scalar{1} / static_cast<scalar>(m);
                for (int64_t in = 0; in < n; ++in) {
                    for (int64_t ic = 0; ic < c; ++ic) {
                        const int64_t base = (in * c + ic) * hw;
                        const scalar ga = gi->data[static_cast<size_t>(ic)] * inv_std_c[static_cast<size_t>(ic)];
                        for (int64_t i = 0; i < hw; ++i) {
                            const scalar dy = oi->grad[static_cast<size_t>(base + i)];
                            if (training) {
                                // batch statistics participate in the forward value
                                g[static_cast<size_t>(base + i)] +=
                                    ga * (dy - inv_m * sum_dy[static_cast<size_t>(ic)] -
                                          xhat[static_cast<size_t>(base + i)] * inv_m * sum_dyx[static_cast<size_t>(ic)]);
                            } else {
                                g[static_cast<size_t>(base + i)] += ga * dy;
                            }
                        }
                    }
                }
            }
        });
    }
    return finish("batchnorm2d", std::move(out), tr);
}

Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, scalar eps) {
    const int64_t d = x.dim(x.ndim() - 1);
    if (gamma.numel() != d || beta.numel() != d) {
        throw ShapeError("layernorm: parameter width does not match last dim " + std::to_string(d));
    }
    const int64_t rows = x.numel() / d;
    const auto xd = x.data();
    const auto gd = gamma.data();
    const auto bd = beta.data();
    std::vector<scalar> xhat(xd.size());
    std::vector<scalar> inv_std(static_cast<size_t>(rows));
    std::vector<scalar> y(xd.size());
    for (int64_t r = 0; r < rows; ++r) {
        const scalar* p = xd.data() + r * d;
        scalar mu = 0;
        for (int64_t i = 0; i < d; ++i) mu += p[i];
        mu /= static_cast<scalar>(d);
        scalar var = 0;
        for (int64_t i = 0; i < d; ++i) var += (p[i] - mu) * (p[i] - mu);
        var /= static_cast<scalar>(d);
        const scalar is = scalar{1} / std::sqrt(var + eps);
        inv_std[static_cast<size_t>(r)] = is;
        for (int64_t i = 0; i < d; ++i) {
            const scalar xh = (p[i] - mu) * is;
            xhat[static_cast<size_t>(r * d + i)] = xh;
            y[static_cast<size_t>(r * d + i)] = gd[static_cast<size_t>(i)] * xh + bd[static_cast<size_t>(i)];
        }
    }
    Tensor out(x.shape(), std::move(y));
    bool tr = tracing({&x, &gamma, &beta});
    if (tr) {
        auto xi = x.impl();
        auto gi = gamma.impl();
        auto bi = beta.impl();
        auto oi = out.impl();
        Tape::active()->record(oi, [xi, gi, bi, oi, xhat = std::move(xhat), inv_std = std::move(inv_std),
                                    rows, d] {
            if (bi->requires_grad) {
                auto& g = grad_buffer(*bi);
                for (int64_t r = 0; r < rows; ++r) {
                    for (int64_t i = 0; i < d; ++i) g[static_cast<size_t>(i)] += oi->grad[static_cast<size_t>(r * d + i)];
                }
            }
            if (gi->requires_grad) {
                auto& g = grad_buffer(*gi);
                for (int64_t r = 0; r < rows; ++r) {
                    for (int64_t i = 0; i < d; ++i) {
                        g[static_cast<size_t>(i)] += oi->grad[static_cast<size_t>(r * d + i)] * xhat[static_cast<size_t>(r * d + i)];
                    }
                }
            }
            if (xi->requires_grad) {
                auto& g = grad_buffer(*xi);
                const scalar inv_d = scalar{1} / static_cast<scalar>(d);
                for (int64_t r = 0; r < rows; ++r) {
                    scalar sum_gg = 0, sum_ggx = 0;
                    for (int64_t i = 0; i < d; ++i) {
                        const scalar gg = oi->grad[static_cast<size_t>(r * d + i)] * gi->data[static_cast<size_t>(i)];
                        sum_gg += gg;
                        sum_ggx += gg * xhat[static_cast<size_t>(r * d + i)];
                    }
                    for (int64_t i = 0; i < d; ++i) {
                        const scalar gg = oi->grad[static_cast<size_t>(r * d + i)] * gi->data[static_cast<size_t>(i)];
                        g[static_cast<size_t>(r * d + i)] += inv_std[static_cast<size_t>(r)] *
                            (gg - inv_d * sum_gg - xhat[static_cast<size_t>(r * d + i)] * inv_d * sum_ggx);
                    }
                }
            }
        });
    }
    return finish("layernorm", std::move(out), tr);
}

Tensor reshape(const Tensor& x, Shape new_shape) {
    if (shape_numel(new_shape) != x.numel()) {
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(new_shape));
    }
    Tensor out(std::move(new_shape), std::vector<scalar>(x.data().begin(), x.data().end()));
    bool tr = tracing({&x});
    if (tr) {
        auto xi = x.impl();
        auto oi = out.impl();
        Tape::active()->record(oi, [xi, oi] {
            auto& g = grad_buffer(*xi);
            for (size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i];
        });
    }
    return finish("reshape", std::move(out), tr);
}

Tensor flatten(const Tensor& x, int start_axis) {
    start_axis = normalize_axis(start_axis, x.ndim(), "flatten");
    Shape s(x.shape().begin(), x.shape().begin() + start_axis);
    s.push_back(inner_size(x.shape(), start_axis - 1));
    return reshape(x, std::move(s));
}

Tensor permute(const Tensor& x, const std::vector<int>& perm) {
    const int nd = x.ndim();
    if (static_cast<int>(perm.size()) != nd) throw ShapeError("permute: rank mismatch");
    std::vector<bool> seen(static_cast<size_t>(nd), false);
    for (int p : perm) {
        if (p < 0 || p >= nd || seen[static_cast<size_t>(p)]) throw ShapeError("permute: invalid permutation");
        seen[static_cast<size_t>(p)] = true;
    }
    Shape out_shape(static_cast<size_t>(nd));
    for (int i = 0; i < nd; ++i) out_shape[static_cast<size_t>(i)] = x.dim(perm[static_cast<size_t>(i)]);

    // strides of input, and of output laid out row-major
    std::vector<int64_t> in_stride(static_cast<size_t>(nd), 1), out_stride(static_cast<size_t>(nd), 1);
    for (int i = nd - 2; i >= 0; --i) {
        in_stride[static_cast<size_t>(i)] = in_stride[static_cast<size_t>(i + 1)] * x.dim(i + 1);
    }
    for (int i = nd - 2; i >= 0; --i) {
        out_stride[static_cast<size_t>(i)] = out_stride[static_cast<size_t>(i + 1)] * out_shape[static_cast<size_t>(i + 1)];
    }
    // mapping: out flat index -> in flat index
    std::vector<int64_t> src_of(static_cast<size_t>(x.numel()));
    const auto xd = x.data();
    std::vector<scalar> y(xd.size());
    for (int64_t o = 0; o < x.numel(); ++o) {
        int64_t rem = o;
        int64_t src = 0;
        for (int i = 0; i < nd; ++i) {
            const int64_t c = rem / out_stride[static_cast<size_t>(i)];
            rem %= out_stride[static_cast<size_t>(i)];
            src += c * in_stride[static_cast<size_t>(perm[static_cast<size_t>(i)])];
        }
        src_of[static_cast<size_t>(o)] = src;
        y[static_cast<size_t>(o)] = xd[static_cast<size_t>(src)];
    }
    Tensor out(std::move(out_shape), std::move(y));
    bool tr = tracing({&x});
    if (tr) {
        auto xi = x.impl();
        auto oi = out.impl();
        Tape::active()->record(oi, [xi, oi, src_of = std::move(src_of)] {
            auto& g = grad_buffer(*xi);
            for (size_t o = 0; o < src_of.size(); ++o) g[static_cast<size_t>(src_of[o])] += oi->grad[o];
        });
    }
    return finish("permute", std::move(out), tr);
}

Tensor concat(const std::vector<Tensor>& ts, int axis) {
    if (ts.empty()) throw ContractError("concat: need at least one tensor");
    const int nd = ts[0].ndim();
    axis = normalize_axis(axis, nd, "concat");
    int64_t axis_total = 0;
    for (const Tensor& t : ts) {
        if (t.ndim() != nd) throw ShapeError("concat: rank mismatch");
        for (int i = 0; i < nd; ++i) {
            if (i != axis && t.dim(i) != ts[0].dim(i)) {
                throw ShapeError("concat: shape mismatch off axis " + std::to_string(axis) + ": " +
                                 shape_str(ts[0].shape()) + " vs " + shape_str(t.shape()));
            }
        }
        axis_total += t.dim(axis);
    }
    Shape out_shape = ts[0].shape();
    out_shape[static_cast<size_t>(axis)] = axis_total;
    const int64_t outer = outer_size(out_shape, axis);
    const int64_t inner = inner_size(out_shape, axis);
    std::vector<scalar> y(static_cast<size_t>(shape_numel(out_shape)));
    const int64_t out_row = axis_total * inner;
    int64_t offset = 0;
    for (const Tensor& t : ts) {
        const int64_t block = t.dim(axis) * inner;
        const auto td = t.data();
        for (int64_t o = 0; o < outer; ++o) {
            std::copy(td.begin() + o * block, td.begin() + (o + 1) * block,
                      y.begin() + o * out_row + offset);
        }
        offset += block;
    }
    Tensor out(std::move(out_shape), std::move(y));
    bool has_grad_input = false;
    for (const Tensor& t : ts) {
        if (t.requires_grad()) has_grad_input = true;
    }
    bool tr = Tape::active() != nullptr && has_grad_input;
    if (tr) {
        std::vector<std::shared_ptr<TensorImpl>> ins;
        std::vector<int64_t> blocks;
        for (const Tensor& t : ts) {
            ins.push_back(t.impl());
            blocks.push_back(t.dim(axis) * inner);
        }
        auto oi = out.impl();
        Tape::active()->record(oi, [ins = std::move(ins), blocks = std::move(blocks), oi, outer, out_row] {
            int64_t offset = 0;
            for (size_t k = 0; k < ins.size(); ++k) {
                if (ins[k]->requires_grad) {
                    auto& g = grad_buffer(*ins[k]);
                    for (int64_t o = 0; o < outer; ++o) {
                        const scalar* src = oi->grad.data() + o * out_row + offset;
                        scalar* dst = g.data() + o * blocks[k];
                        for (int64_t i = 0; i < blocks[k]; ++i) dst[i] += src[i];
                    }
                }
                offset += blocks[k];
            }
        });
    }
    return finish("concat", std::move(out), tr);
}

std::vector<Tensor> split(const Tensor& x, int axis, const std::vector<int64_t>& sizes) {
    const int nd = x.ndim();
    axis = normalize_axis(axis, nd, "split");
    int64_t total = 0;
    for (int64_t s : sizes) {
        if (s <= 0) throw ShapeError("split: piece sizes must be positive");
        total += s;
    }
    if (total != x.dim(axis)) {
        throw ShapeError("split: piece sizes sum to " + std::to_string(total) + ", axis has " +
                         std::to_string(x.dim(axis)));
    }
    const int64_t outer = outer_size(x.shape(), axis);
    const int64_t inner = inner_size(x.shape(), axis);
    const int64_t in_row = x.dim(axis) * inner;
    const auto xd = x.data();
    std::vector<Tensor> pieces;
    pieces.reserve(sizes.size());
    int64_t offset = 0;
    const bool tr = tracing({&x});
    for (int64_t s : sizes) {
        Shape ps = x.shape();
        ps[static_cast<size_t>(axis)] = s;
        const int64_t block = s * inner;
        std::vector<scalar> y(static_cast<size_t>(outer * block));
        for (int64_t o = 0; o < outer; ++o) {
            std::copy(xd.begin() + o * in_row + offset, xd.begin() + o * in_row + offset + block,
                      y.begin() + o * block);
        }
        Tensor piece(std::move(ps), std::move(y));
        if (tr) {
            auto xi = x.impl();
            auto pi = piece.impl();
            const int64_t off = offset;
            Tape::active()->record(pi, [xi, pi, off, outer, inner_row = in_row, block] {
                auto& g = grad_buffer(*xi);
                for (int64_t o = 0; o < outer; ++o) {
                    const scalar* src = pi->grad.data() + o * block;
                    scalar* dst = g.data() + o * inner_row + off;
                    for (int64_t i = 0; i < block; ++i) dst[i] += src[i];
                }
            });
            piece.set_requires_grad(true);
        }
        detail::check_finite("split", piece);
        pieces.push_back(std::move(piece));
        offset += s * inner;
    }
    return pieces;
}

Tensor sum(const Tensor& x) {
    scalar acc = 0;
    for (scalar v : x.data()) acc += v;
    Tensor out({1}, {acc});
    bool tr = tracing({&x});
    if (tr) {
        auto xi = x.impl();
        auto oi = out.impl();
        Tape::active()->record(oi, [xi, oi] {
            auto& g = grad_buffer(*xi);
            const scalar go = oi->grad[0];
            for (auto& v : g) v += go;
        });
    }
    return finish("sum", std::move(out), tr);
}

Tensor mean(const Tensor& x) {
    scalar acc = 0;
    for (scalar v : x.data()) acc += v;
    const scalar inv_n = scalar{1} / static_cast<scalar>(x.numel());
    Tensor out({1}, {acc * inv_n});
    bool tr = tracing({&x});
    if (tr) {
        auto xi = x.impl();
        auto oi = out.impl();
        Tape::active()->record(oi, [xi, oi, inv_n] {
            auto& g = grad_buffer(*xi);
            const scalar go = oi->grad[0] * inv_n;
            for (auto& v : g) v += go;
        });
    }
    return finish("mean", std::move(out), tr);
}

Tensor softmax(const Tensor& x, int axis) {
    axis = normalize_axis(axis, x.ndim(), "softmax");
    const int64_t outer = outer_size(x.shape(), axis);
    const int64_t len = x.dim(axis);
    const int64_t inner = inner_size(x.shape(), axis);
    const auto xd = x.data();
    std::vector<scalar> y(xd.size());
    for (int64_t o = 0; o < outer; ++o) {
        for (int64_t i = 0; i < inner; ++i) {
            const int64_t base = o * len * inner + i;
            scalar mx = xd[static_cast<size_t>(base)];
            for (int64_t j = 1; j < len; ++j) mx = std::max(mx, xd[static_cast<size_t>(base + j * inner)]);
            scalar denom = 0;
            for (int64_t j = 0; j < len; ++j) {
                const scalar e = std::exp(xd[static_cast<size_t>(base + j * inner)] - mx);
                y[static_cast<size_t>(base + j * inner)] = e;
                denom += e;
            }
            const scalar inv = scalar{1} / denom;
            for (int64_t j = 0; j < len; ++j) y[static_cast<size_t>(base + j * inner)] *= inv;
        }
    }
    Tensor out(x.shape(), std::move(y));
    bool tr = tracing({&x});
    if (tr) {
        auto xi = x.impl();
        auto oi = out.impl();
        Tape::active()->record(oi, [xi, oi, outer, len, inner] {
            auto& g = grad_buffer(*xi);
            for (int64_t o = 0; o < outer; ++o) {
                for (int64_t i = 0; i < inner; ++i) {
                    const int64_t base = o * len * inner + i;
                    scalar dot = 0;
                    for (int64_t j = 0; j < len; ++j) {
                        dot += oi->grad[static_cast<size_t>(base + j * inner)] * oi->data[static_cast<size_t>(base + j * inner)];
                    }
                    for (int64_t j = 0; j < len; ++j) {
                        const size_t k = static_cast<size_t>(base + j * inner);
                        g[k] += oi->data[k] * (oi->grad[k] - dot);
                    }
                }
            }
        });
    }
    return finish("softmax", std::move(out), tr);
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.ndim() != 2) throw ShapeError("cross_entropy: logits must be [NxK]");
    const int64_t n = logits.dim(0), k = logits.dim(1);
    if (static_cast<int64_t>(labels.size()) != n) {
        throw ContractError("cross_entropy: label count does not match batch size");
    }
    for (int lbl : labels) {
        if (lbl < 0 || lbl >= k) throw ContractError("cross_entropy: label " + std::to_string(lbl) + " out of range");
    }
    const auto ld = logits.data();
    std::vector<scalar> softmax_cache(ld.size());
    scalar loss = 0;
    for (int64_t r = 0; r < n; ++r) {
        const scalar* p = ld.data() + r * k;
        scalar mx = p[0];
        for (int64_t j = 1; j < k; ++j) mx = std::max(mx, p[j]);
        scalar denom = 0;
        for (int64_t j = 0; j < k; ++j) denom += std::exp(p[j] - mx);
        const scalar lse = mx + std::log(denom);
        loss += lse - p[labels[static_cast<size_t>(r)]];
        for (int64_t j = 0; j < k; ++j) {
            softmax_cache[static_cast<size_t>(r * k + j)] = std::exp(p[j] - lse);
        }
    }
    loss /= static_cast<scalar>(n);
    Tensor out({1}, {loss});
    bool tr = tracing({&logits});
    if (tr) {
        auto li = logits.impl();
        auto oi = out.impl();
        Tape::active()->record(oi, [li, oi, labels, softmax_cache = std::move(softmax_cache), n, k] {
            auto& g = grad_buffer(*li);
            const scalar go = oi->grad[0] / static_cast<scalar>(n);
            for (int64_t r = 0; r < n; ++r) {
                for (int64_t j = 0; j < k; ++j) {
                    const size_t idx = static_cast<size_t>(r * k + j);
                    scalar v = softmax_cache[idx];
                    if (j == labels[static_cast<size_t>(r)]) v -= 1;
                    g[idx] += go * v;
                }
            }
        });
    }
    return finish("cross_entropy", std::move(out), tr);
}

}  // namespace mmf
