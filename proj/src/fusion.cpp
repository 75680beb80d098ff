#include "mmf/fusion.hpp"

#include "mmf/common.hpp"

namespace mmf {

void ModelConfig::validate() const {
    backbone.validate();
    text.validate();
    if (!(dropout >= 0 && dropout < 1)) throw ConfigError("model: dropout must lie in [0,1)");
    if (classifier_hidden < 0) throw ConfigError("model: classifier_hidden must be >= 0");
}

FusionModel::FusionModel(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
    cfg.validate();
    std::mt19937_64 rng(derive_seed(seed, "model-init"));
    const int n_encoders = cfg.shared_view_encoder ? 1 : 4;
    for (int i = 0; i < n_encoders; ++i) {
        const std::string name = cfg.shared_view_encoder ? "backbone" : "backbone" + std::to_string(i + 1);
        encoders_.push_back(&register_module(name, build_backbone(cfg.backbone, rng)));
    }
    text_ = &register_module("text", build_text_encoder(cfg.text, cfg.dropout, rng));
    fused_width_ = 4 * cfg.backbone.feature_dim + cfg.text.feature_dim;
    drop_ = &register_module("drop", std::make_unique<Dropout>(cfg.dropout));
    if (cfg.classifier_hidden > 0) {
        hidden_ = &register_module("hidden", std::make_unique<Linear>(fused_width_, cfg.classifier_hidden, rng));
        head_ = &register_module("head", std::make_unique<Linear>(cfg.classifier_hidden, 2, rng));
    } else {
        head_ = &register_module("head", std::make_unique<Linear>(fused_width_, 2, rng));
    }
}

ImageEncoder& FusionModel::image_encoder(int view) {
    if (encoders_.size() == 1) return *encoders_[0];
    return *encoders_[static_cast<size_t>(view)];
}

std::array<Tensor, 4> FusionModel::extract_image_features(const std::array<Tensor, 4>& views,
                                                          const Ctx& ctx) {
    for (const Tensor& v : views) {
        if (!v.defined()) throw ContractError("extract_image_features: exactly four views are required");
    }
    std::array<Tensor, 4> out;
    for (int i = 0; i < 4; ++i) {
        ImageEncoder& enc = encoders_.size() == 1 ? *encoders_[0] : *encoders_[static_cast<size_t>(i)];
        out[static_cast<size_t>(i)] = enc.forward(views[static_cast<size_t>(i)], ctx);
    }
    return out;
}

Tensor FusionModel::fuse(const std::array<Tensor, 4>& f, const Tensor& ft) {
    const int64_t n = f[0].dim(0);
    for (const Tensor& fi : f) {
        if (fi.dim(0) != n || ft.dim(0) != n) {
            throw ShapeError("fuse: batch sizes disagree across modalities");
        }
    }
    return concat({f[0], f[1], f[2], f[3], ft}, 1);
}

std::pair<Tensor, Tensor> FusionModel::classify(const Tensor& fc, const Ctx& ctx) {
    if (fc.ndim() != 2 || fc.dim(1) != fused_width_) {
        throw ShapeError("classify: expected [Nx" + std::to_string(fused_width_) + "], got " +
                         shape_str(fc.shape()));
    }
    Tensor h = drop_->forward(fc, ctx);
    if (hidden_) h = relu(hidden_->forward(h));
    Tensor logits = head_->forward(h);
    return {logits, softmax(logits, 1)};
}

Tensor FusionModel::forward(const std::array<Tensor, 4>& views, const Tensor& text, const Ctx& ctx) {
    auto f = extract_image_features(views, ctx);
    Tensor ft = text_->forward(text, ctx);
    return classify(fuse(f, ft), ctx).first;
}

}  // namespace mmf
