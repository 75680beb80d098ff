#pragma once

#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mmf/ops.hpp"
#include "mmf/tensor.hpp"

namespace mmf {

// Per-forward-call state. Training mode enables dropout and batch statistics;
// the rng is the caller's seeded stream. attention_sink, when set, collects
// every attention probability matrix produced during the pass.
struct Ctx {
    bool training = false;
    std::mt19937_64* rng = nullptr;
    std::vector<Tensor>* attention_sink = nullptr;

    std::mt19937_64& require_rng() const {
        if (!rng) throw ContractError("training forward pass requires an rng stream");
        return *rng;
    }
};

inline Ctx eval_ctx() { return Ctx{}; }

using NamedTensor = std::pair<std::string, Tensor>;

// Base for anything holding learnable parameters. Parameters and submodules
// register in construction order, which fixes the checkpoint path layout and
// the optimizer's update order.
class Module {
public:
    virtual ~Module() = default;
    Module() = default;
    Module(const Module&) = delete;
    Module& operator=(const Module&) = delete;

    std::vector<NamedTensor> named_parameters() const;
    // Non-learnable persistent state (batchnorm running stats).
    std::vector<NamedTensor> named_buffers() const;
    std::vector<Tensor> parameters() const;
    int64_t parameter_count() const;

protected:
    Tensor& register_parameter(const std::string& name, Tensor t);
    Tensor& register_buffer(const std::string& name, Tensor t);

    template <typename M>
    M& register_module(const std::string& name, std::unique_ptr<M> m) {
        M& ref = *m;
        children_.emplace_back(name, std::move(m));
        return ref;
    }

private:
    void collect(const std::string& prefix, bool buffers, std::vector<NamedTensor>& out) const;

    std::vector<NamedTensor> params_;
    std::vector<NamedTensor> buffers_;
    std::vector<std::pair<std::string, std::unique_ptr<Module>>> children_;
};

class Linear : public Module {
public:
    Linear(int64_t in_features, int64_t out_features, std::mt19937_64& rng, bool bias = true);
    // Accepts [... x in]; applies to the last axis.
    Tensor forward(const Tensor& x) const;
    int64_t in_features() const { return in_; }
    int64_t out_features() const { return out_; }
    Tensor& weight() { return w_; }
    Tensor& bias() { return b_; }

private:
    int64_t in_, out_;
    Tensor w_;  // [in x out]
    Tensor b_;  // [out], undefined when bias is off
};

class Conv2d : public Module {
public:
    Conv2d(int64_t in_ch, int64_t out_ch, int kernel, int stride, int padding, std::mt19937_64& rng,
           bool bias = true);
    Tensor forward(const Tensor& x) const;
    Tensor& weight() { return w_; }

private:
    int stride_, padding_;
    Tensor w_;  // [out x in x k x k]
    Tensor b_;
};

class BatchNorm2d : public Module {
public:
    explicit BatchNorm2d(int64_t channels);
    Tensor forward(const Tensor& x, const Ctx& ctx);

private:
    Tensor gamma_, beta_;
    Tensor running_mean_, running_var_;
};

class LayerNorm : public Module {
public:
    explicit LayerNorm(int64_t dim);
    Tensor forward(const Tensor& x) const;

private:
    Tensor gamma_, beta_;
};

class Dropout : public Module {
public:
    explicit Dropout(scalar p);
    Tensor forward(const Tensor& x, const Ctx& ctx) const;
    scalar p() const { return p_; }

private:
    scalar p_;
};

}  // namespace mmf
