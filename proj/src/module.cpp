#include "mmf/module.hpp"

namespace mmf {

std::vector<NamedTensor> Module::named_parameters() const {
    std::vector<NamedTensor> out;
    collect("", false, out);
    return out;
}

std::vector<NamedTensor> Module::named_buffers() const {
    std::vector<NamedTensor> out;
    collect("", true, out);
    return out;
}

std::vector<Tensor> Module::parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

int64_t Module::parameter_count() const {
    int64_t n = 0;
    for (const auto& [name, t] : named_parameters()) n += t.numel();
    return n;
}

Tensor& Module::register_parameter(const std::string& name, Tensor t) {
    t.set_requires_grad(true);
    params_.emplace_back(name, std::move(t));
    return params_.back().second;
}

Tensor& Module::register_buffer(const std::string& name, Tensor t) {
    buffers_.emplace_back(name, std::move(t));
    return buffers_.back().second;
}

void Module::collect(const std::string& prefix, bool buffers, std::vector<NamedTensor>& out) const {
    const auto& own = buffers ? buffers_ : params_;
    for (const auto& [name, t] : own) out.emplace_back(prefix + name, t);
    for (const auto& [name, child] : children_) child->collect(prefix + name + ".", buffers, out);
}

Linear::Linear(int64_t in_features, int64_t out_features, std::mt19937_64& rng, bool bias)
    : in_(in_features), out_(out_features) {
    if (in_features <= 0 || out_features <= 0) throw ConfigError("linear: feature widths must be positive");
    w_ = register_parameter("weight", Tensor::kaiming_uniform({in_features, out_features}, in_features, rng));
    if (bias) b_ = register_parameter("bias", Tensor::zeros({out_features}));
}

Tensor Linear::forward(const Tensor& x) const {
    if (x.dim(x.ndim() - 1) != in_) {
        throw ShapeError("linear: input " + shape_str(x.shape()) + " does not end in width " +
                         std::to_string(in_));
    }
    Tensor flat = x.ndim() == 2 ? x : reshape(x, {x.numel() / in_, in_});
    Tensor y = matmul(flat, w_);
    if (b_.defined()) y = bias_add(y, b_);
    if (x.ndim() == 2) return y;
    Shape out_shape = x.shape();
    out_shape.back() = out_;
    return reshape(y, std::move(out_shape));
}

Conv2d::Conv2d(int64_t in_ch, int64_t out_ch, int kernel, int stride, int padding, std::mt19937_64& rng,
               bool bias)
    : stride_(stride), padding_(padding) {
    if (in_ch <= 0 || out_ch <= 0 || kernel < 1) throw ConfigError("conv2d: invalid layer geometry");
    const int64_t fan_in = in_ch * kernel * kernel;
    w_ = register_parameter("weight", Tensor::kaiming_uniform({out_ch, in_ch, kernel, kernel}, fan_in, rng));
    if (bias) b_ = register_parameter("bias", Tensor::zeros({out_ch}));
}

Tensor Conv2d::forward(const Tensor& x) const {
    Tensor y = conv2d(x, w_, stride_, padding_);
    if (b_.defined()) y = channel_bias(y, b_);
    return y;
}

BatchNorm2d::BatchNorm2d(int64_t channels) {
    if (channels <= 0) throw ConfigError("batchnorm2d: channel count must be positive");
    gamma_ = register_parameter("weight", Tensor::ones({channels}));
    beta_ = register_parameter("bias", Tensor::zeros({channels}));
    running_mean_ = register_buffer("running_mean", Tensor::zeros({channels}));
    running_var_ = register_buffer("running_var", Tensor::ones({channels}));
}

Tensor BatchNorm2d::forward(const Tensor& x, const Ctx& ctx) {
    return batchnorm2d(x, gamma_, beta_, running_mean_, running_var_, ctx.training);
}

LayerNorm::LayerNorm(int64_t dim) {
    if (dim <= 0) throw ConfigError("layernorm: dim must be positive");
    gamma_ = register_parameter("weight", Tensor::ones({dim}));
    beta_ = register_parameter("bias", Tensor::zeros({dim}));
}

Tensor LayerNorm::forward(const Tensor& x) const { return layernorm(x, gamma_, beta_); }

Dropout::Dropout(scalar p) : p_(p) {
    if (!(p >= 0 && p < 1)) throw ConfigError("dropout: p must lie in [0,1)");
}

Tensor Dropout::forward(const Tensor& x, const Ctx& ctx) const {
    if (!ctx.training || p_ == 0) return x;
    return dropout(x, p_, ctx.require_rng());
}

}  // namespace mmf
