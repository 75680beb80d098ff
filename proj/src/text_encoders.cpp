#include "mmf/text_encoders.hpp"

namespace mmf {

TextEncoderSpec TextEncoderSpec::from_tag(const std::string& tag) {
    TextEncoderSpec s;
    if (tag == "ann") {
        s.kind = TextEncoderKind::Ann;
    } else if (tag == "lstm") {
        s.kind = TextEncoderKind::Lstm;
    } else {
        throw ConfigError("unknown text encoder tag '" + tag + "'");
    }
    return s;
}

void TextEncoderSpec::validate() const {
    if (feature_dim <= 0) throw ConfigError("text encoder: feature_dim must be positive");
    if (hidden_dim <= 0) throw ConfigError("text encoder: hidden_dim must be positive");
    if (num_features <= 0) throw ConfigError("text encoder: num_features must be positive");
    if (kind == TextEncoderKind::Lstm && embed_dim <= 0) {
        throw ConfigError("text encoder: embed_dim must be positive in lstm mode");
    }
}

AnnEncoder::AnnEncoder(const TextEncoderSpec& spec, scalar dropout_p, std::mt19937_64& rng) {
    spec.validate();
    feature_dim_ = spec.feature_dim;
    fc1_ = &register_module("fc1", std::make_unique<Linear>(spec.num_features, spec.hidden_dim, rng));
    drop_ = &register_module("drop", std::make_unique<Dropout>(dropout_p));
    fc2_ = &register_module("fc2", std::make_unique<Linear>(spec.hidden_dim, spec.feature_dim, rng));
}

Tensor AnnEncoder::forward(const Tensor& x, const Ctx& ctx) {
    return fc2_->forward(drop_->forward(relu(fc1_->forward(x)), ctx));
}

LstmEncoder::LstmEncoder(const TextEncoderSpec& spec, std::mt19937_64& rng)
    : input_dim_(spec.embed_dim), hidden_dim_(spec.hidden_dim) {
    spec.validate();
    feature_dim_ = spec.feature_dim;
    wx_ = register_parameter("wx", Tensor::kaiming_uniform({input_dim_, 4 * hidden_dim_}, input_dim_, rng));
    wh_ = register_parameter("wh", Tensor::kaiming_uniform({hidden_dim_, 4 * hidden_dim_}, hidden_dim_, rng));
    b_ = register_parameter("bias", Tensor::zeros({4 * hidden_dim_}));
    head_ = &register_module("head", std::make_unique<Linear>(hidden_dim_, spec.feature_dim, rng));
}

Tensor LstmEncoder::hidden_state(const Tensor& seq) const {
    if (seq.ndim() != 3 || seq.dim(2) != input_dim_) {
        throw ShapeError("lstm: expected [NxTx" + std::to_string(input_dim_) + "], got " +
                         shape_str(seq.shape()));
    }
    const int64_t n = seq.dim(0), t = seq.dim(1);
    Tensor h = Tensor::zeros({n, hidden_dim_});
    Tensor c = Tensor::zeros({n, hidden_dim_});
    auto steps = split(seq, 1, std::vector<int64_t>(static_cast<size_t>(t), 1));
    for (int64_t step = 0; step < t; ++step) {
        Tensor xt = reshape(steps[static_cast<size_t>(step)], {n, input_dim_});
        Tensor gates = bias_add(add(matmul(xt, wx_), matmul(h, wh_)), b_);
        auto parts = split(gates, 1, {hidden_dim_, hidden_dim_, hidden_dim_, hidden_dim_});
        Tensor i = sigmoid(parts[0]);
        Tensor f = sigmoid(parts[1]);
        Tensor g = tanh(parts[2]);
        Tensor o = sigmoid(parts[3]);
        c = add(mul(f, c), mul(i, g));
        h = mul(o, tanh(c));
    }
    return h;
}

Tensor LstmEncoder::forward(const Tensor& x, const Ctx&) {
    return head_->forward(hidden_state(x));
}

std::unique_ptr<TextEncoder> build_text_encoder(const TextEncoderSpec& spec, scalar dropout_p,
                                                std::mt19937_64& rng) {
    spec.validate();
    if (spec.kind == TextEncoderKind::Ann) return std::make_unique<AnnEncoder>(spec, dropout_p, rng);
    return std::make_unique<LstmEncoder>(spec, rng);
}

}  // namespace mmf
