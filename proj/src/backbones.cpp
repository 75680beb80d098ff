#include "mmf/backbones.hpp"

#include <algorithm>
#include <cmath>

namespace mmf {

namespace {

Tensor global_avg_pool(const Tensor& x) {
    if (x.dim(2) != x.dim(3)) {
        throw ShapeError("global pooling expects square feature maps, got " + shape_str(x.shape()));
    }
    Tensor pooled = pool2d(x, PoolKind::Avg, static_cast<int>(x.dim(2)), 1);
    return reshape(pooled, {x.dim(0), x.dim(1)});
}

}  // namespace

BackboneSpec BackboneSpec::from_tag(const std::string& tag) {
    BackboneSpec s;
    s.variant = tag;
    if (tag == "vgg16" || tag == "vgg19") {
        s.family = BackboneFamily::Vgg;
    } else if (tag == "resnet34" || tag == "resnet50") {
        s.family = BackboneFamily::Resnet;
    } else if (tag == "mobilenet_v3") {
        s.family = BackboneFamily::MobilenetV3;
    } else if (tag.rfind("effnet_b", 0) == 0 && tag.size() == 9 && tag[8] >= '0' && tag[8] <= '7') {
        s.family = BackboneFamily::Effnet;
    } else if (tag == "vit") {
        s.family = BackboneFamily::Vit;
    } else {
        throw ConfigError("unknown backbone tag '" + tag + "'");
    }
    return s;
}

int BackboneSpec::downsample_factor() const {
    switch (family) {
        case BackboneFamily::Vgg:
            return 32;  // five pooling stages
        case BackboneFamily::Resnet:
        case BackboneFamily::MobilenetV3:
        case BackboneFamily::Effnet:
            return 8;
        case BackboneFamily::Vit:
            return vit_patch;
    }
    return 1;
}

void BackboneSpec::validate() const {
    if (feature_dim <= 0) throw ConfigError("backbone: feature_dim must be positive");
    if (channels <= 0) throw ConfigError("backbone: channels must be positive");
    if (base_width <= 0) throw ConfigError("backbone: base_width must be positive");
    if (input_size <= 0) throw ConfigError("backbone: input_size must be positive");
    const int ds = downsample_factor();
    if (input_size % ds != 0) {
        throw ConfigError("backbone '" + variant + "': input_size " + std::to_string(input_size) +
                          " not divisible by downsampling factor " + std::to_string(ds));
    }
    if (family == BackboneFamily::Vit) {
        if (vit_dim <= 0 || vit_heads < 1 || vit_layers < 1) throw ConfigError("vit: bad geometry");
        if (vit_dim % vit_heads != 0) {
            throw ConfigError("vit: dim " + std::to_string(vit_dim) + " not divisible by " +
                              std::to_string(vit_heads) + " heads");
        }
    }
}

// ---------------------------------------------------------------------------
// VGG: stages of 3x3 convs + relu, max-pool between stages, GAP + projection.

namespace {

class VggEncoder : public ImageEncoder {
public:
    VggEncoder(const BackboneSpec& spec, std::mt19937_64& rng) {
        feature_dim_ = spec.feature_dim;
        const bool deep = spec.variant == "vgg19";
        const int stage_convs[5] = {2, 2, deep ? 4 : 3, deep ? 4 : 3, deep ? 4 : 3};
        const int64_t b = spec.base_width;
        const int64_t widths[5] = {b, 2 * b, 4 * b, 8 * b, 8 * b};
        int64_t in_ch = spec.channels;
        for (int s = 0; s < 5; ++s) {
            for (int c = 0; c < stage_convs[s]; ++c) {
                auto name = "stage" + std::to_string(s + 1) + ".conv" + std::to_string(c + 1);
                convs_.push_back(&register_module(name, std::make_unique<Conv2d>(in_ch, widths[s], 3, 1, 1, rng)));
                in_ch = widths[s];
            }
            stage_ends_.push_back(static_cast<int>(convs_.size()));
        }
        head_ = &register_module("head", std::make_unique<Linear>(in_ch, spec.feature_dim, rng));
    }

    Tensor forward(const Tensor& x, const Ctx&) override {
        Tensor h = x;
        size_t stage = 0;
        for (size_t i = 0; i < convs_.size(); ++i) {
            h = relu(convs_[i]->forward(h));
            if (static_cast<int>(i + 1) == stage_ends_[stage]) {
                h = pool2d(h, PoolKind::Max, 2, 2);
                ++stage;
            }
        }
        return head_->forward(global_avg_pool(h));
    }

private:
    std::vector<Conv2d*> convs_;
    std::vector<int> stage_ends_;
    Linear* head_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Pre-activation ResNet.

ResidualBlock::ResidualBlock(int64_t in_ch, int64_t out_ch, int stride, bool bottleneck,
                             std::mt19937_64& rng) {
    if (bottleneck) {
        const int64_t mid = std::max<int64_t>(1, out_ch / 4);
        norms_.push_back(&register_module("bn1", std::make_unique<BatchNorm2d>(in_ch)));
        convs_.push_back(&register_module("conv1", std::make_unique<Conv2d>(in_ch, mid, 1, 1, 0, rng, false)));
        norms_.push_back(&register_module("bn2", std::make_unique<BatchNorm2d>(mid)));
        convs_.push_back(&register_module("conv2", std::make_unique<Conv2d>(mid, mid, 3, stride, 1, rng, false)));
        norms_.push_back(&register_module("bn3", std::make_unique<BatchNorm2d>(mid)));
        convs_.push_back(&register_module("conv3", std::make_unique<Conv2d>(mid, out_ch, 1, 1, 0, rng, false)));
    } else {
        norms_.push_back(&register_module("bn1", std::make_unique<BatchNorm2d>(in_ch)));
        convs_.push_back(&register_module("conv1", std::make_unique<Conv2d>(in_ch, out_ch, 3, stride, 1, rng, false)));
        norms_.push_back(&register_module("bn2", std::make_unique<BatchNorm2d>(out_ch)));
        convs_.push_back(&register_module("conv2", std::make_unique<Conv2d>(out_ch, out_ch, 3, 1, 1, rng, false)));
    }
    if (stride != 1 || in_ch != out_ch) {
        proj_ = &register_module("proj", std::make_unique<Conv2d>(in_ch, out_ch, 1, stride, 0, rng, false));
    }
}

Tensor ResidualBlock::forward(const Tensor& x, const Ctx& ctx) const {
    Tensor h = x;
    for (size_t i = 0; i < convs_.size(); ++i) {
        h = convs_[i]->forward(relu(norms_[i]->forward(h, ctx)));
    }
    Tensor skip = proj_ ? proj_->forward(x) : x;
    return add(skip, h);
}

void ResidualBlock::zero_branch() {
    for (Conv2d* c : convs_) {
        for (auto& v : c->weight().mutable_data()) v = 0;
    }
}

namespace {

class ResnetEncoder : public ImageEncoder {
public:
    ResnetEncoder(const BackboneSpec& spec, std::mt19937_64& rng) {
        feature_dim_ = spec.feature_dim;
        const bool bottleneck = spec.variant == "resnet50";
        const int counts[4] = {3, 4, 6, 3};  // resnet34/resnet50 layout
        const int64_t b = spec.base_width;
        const int64_t widths[4] = {b, 2 * b, 4 * b, 8 * b};
        stem_ = &register_module("stem", std::make_unique<Conv2d>(spec.channels, b, 3, 1, 1, rng, false));
        int64_t in_ch = b;
        for (int s = 0; s < 4; ++s) {
            const int64_t out_ch = bottleneck ? widths[s] * 4 : widths[s];
            for (int i = 0; i < counts[s]; ++i) {
                const int stride = (s > 0 && i == 0) ? 2 : 1;
                auto name = "stage" + std::to_string(s + 1) + ".block" + std::to_string(i + 1);
                blocks_.push_back(&register_module(
                    name, std::make_unique<ResidualBlock>(in_ch, out_ch, stride, bottleneck, rng)));
                in_ch = out_ch;
            }
        }
        final_norm_ = &register_module("final_bn", std::make_unique<BatchNorm2d>(in_ch));
        head_ = &register_module("head", std::make_unique<Linear>(in_ch, spec.feature_dim, rng));
    }

    Tensor forward(const Tensor& x, const Ctx& ctx) override {
        Tensor h = stem_->forward(x);
        for (auto* blk : blocks_) h = blk->forward(h, ctx);
        h = relu(final_norm_->forward(h, ctx));
        return head_->forward(global_avg_pool(h));
    }

private:
    Conv2d* stem_;
    std::vector<ResidualBlock*> blocks_;
    BatchNorm2d* final_norm_;
    Linear* head_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Squeeze-excitation, shared by MobileNetV3 and EffNet blocks.

SqueezeExcite::SqueezeExcite(int64_t channels, int64_t reduced, std::mt19937_64& rng) {
    fc1_ = &register_module("fc1", std::make_unique<Linear>(channels, reduced, rng));
    fc2_ = &register_module("fc2", std::make_unique<Linear>(reduced, channels, rng));
}

Tensor SqueezeExcite::forward(const Tensor& x) const {
    Tensor s = global_avg_pool(x);  // [N x C]
    s = hard_sigmoid(fc2_->forward(relu(fc1_->forward(s))));
    return channel_scale(x, s);
}

namespace {

enum class BlockAct { Relu, HardSwish, Silu };

Tensor apply_act(const Tensor& x, BlockAct act) {
    switch (act) {
        case BlockAct::Relu:
            return relu(x);
        case BlockAct::HardSwish:
            return hard_swish(x);
        case BlockAct::Silu:
            return silu(x);
    }
    return x;
}

// Inverted residual: 1x1 expand -> depthwise 3x3 -> SE -> 1x1 project, with a
// skip connection when the geometry allows it.
class InvertedResidual : public Module {
public:
    InvertedResidual(int64_t in_ch, int64_t exp_ch, int64_t out_ch, int stride, bool use_se, BlockAct act,
                     std::mt19937_64& rng)
        : act_(act), use_skip_(stride == 1 && in_ch == out_ch), use_se_(use_se) {
        if (exp_ch != in_ch) {
            expand_ = &register_module("expand", std::make_unique<Conv2d>(in_ch, exp_ch, 1, 1, 0, rng, false));
            expand_bn_ = &register_module("expand_bn", std::make_unique<BatchNorm2d>(exp_ch));
        }
        dw_weight_ = register_parameter("dw_weight",
                                        Tensor::kaiming_uniform({exp_ch, 1, 3, 3}, 9, rng));
        dw_stride_ = stride;
        dw_bn_ = &register_module("dw_bn", std::make_unique<BatchNorm2d>(exp_ch));
        if (use_se) {
            se_ = &register_module("se", std::make_unique<SqueezeExcite>(exp_ch, std::max<int64_t>(2, exp_ch / 4), rng));
        }
        project_ = &register_module("project", std::make_unique<Conv2d>(exp_ch, out_ch, 1, 1, 0, rng, false));
        project_bn_ = &register_module("project_bn", std::make_unique<BatchNorm2d>(out_ch));
    }

    Tensor forward(const Tensor& x, const Ctx& ctx) {
        Tensor h = x;
        if (expand_) h = apply_act(expand_bn_->forward(expand_->forward(h), ctx), act_);
        h = apply_act(dw_bn_->forward(depthwise_conv2d(h, dw_weight_, dw_stride_, 1), ctx), act_);
        if (use_se_) h = se_->forward(h);
        h = project_bn_->forward(project_->forward(h), ctx);
        return use_skip_ ? add(x, h) : h;
    }

private:
    BlockAct act_;
    bool use_skip_;
    bool use_se_;
    Conv2d* expand_ = nullptr;
    BatchNorm2d* expand_bn_ = nullptr;
    Tensor dw_weight_;
    int dw_stride_ = 1;
    BatchNorm2d* dw_bn_ = nullptr;
    SqueezeExcite* se_ = nullptr;
    Conv2d* project_ = nullptr;
    BatchNorm2d* project_bn_ = nullptr;
};

class MobilenetV3Encoder : public ImageEncoder {
public:
    MobilenetV3Encoder(const BackboneSpec& spec, std::mt19937_64& rng) {
        feature_dim_ = spec.feature_dim;
        const int64_t b = spec.base_width;
        const int64_t w1 = b, w2 = std::max<int64_t>(2, 3 * b / 2), w3 = 2 * b, head_w = 4 * b;
        stem_ = &register_module("stem", std::make_unique<Conv2d>(spec.channels, w1, 3, 2, 1, rng, false));
        stem_bn_ = &register_module("stem_bn", std::make_unique<BatchNorm2d>(w1));
        struct Row {
            int64_t in, exp, out;
            int stride;
            BlockAct act;
        };
        const Row rows[] = {
            {w1, 2 * w1, w1, 1, BlockAct::Relu},
            {w1, 3 * w1, w2, 2, BlockAct::HardSwish},
            {w2, 3 * w2, w2, 1, BlockAct::HardSwish},
            {w2, 4 * w2, w3, 2, BlockAct::HardSwish},
        };
        int i = 0;
        for (const Row& r : rows) {
            blocks_.push_back(&register_module(
                "block" + std::to_string(++i),
                std::make_unique<InvertedResidual>(r.in, r.exp, r.out, r.stride, true, r.act, rng)));
        }
        head_conv_ = &register_module("head_conv", std::make_unique<Conv2d>(w3, head_w, 1, 1, 0, rng, false));
        head_bn_ = &register_module("head_bn", std::make_unique<BatchNorm2d>(head_w));
        head_ = &register_module("head", std::make_unique<Linear>(head_w, spec.feature_dim, rng));
    }

    Tensor forward(const Tensor& x, const Ctx& ctx) override {
        Tensor h = hard_swish(stem_bn_->forward(stem_->forward(x), ctx));
        for (auto* blk : blocks_) h = blk->forward(h, ctx);
        h = hard_swish(head_bn_->forward(head_conv_->forward(h), ctx));
        return head_->forward(global_avg_pool(h));
    }

private:
    Conv2d* stem_;
    BatchNorm2d* stem_bn_;
    std::vector<InvertedResidual*> blocks_;
    Conv2d* head_conv_;
    BatchNorm2d* head_bn_;
    Linear* head_;
};

// EffNet: MBConv stages scaled by the variant's compound width/depth
// multipliers over a small base.
class EffnetEncoder : public ImageEncoder {
public:
    EffnetEncoder(const BackboneSpec& spec, std::mt19937_64& rng) {
        feature_dim_ = spec.feature_dim;
        const int v = spec.variant.back() - '0';
        static constexpr double kWidth[8] = {1.0, 1.0, 1.1, 1.2, 1.4, 1.6, 1.8, 2.0};
        static constexpr double kDepth[8] = {1.0, 1.1, 1.2, 1.4, 1.8, 2.2, 2.6, 3.1};
        const double wm = kWidth[v], dm = kDepth[v];
        auto scale_w = [&](int64_t w) { return std::max<int64_t>(2, std::llround(w * wm)); };
        auto scale_d = [&](int d) { return static_cast<int>(std::ceil(d * dm)); };

        const int64_t b = spec.base_width;
        const int64_t stem_w = scale_w(b);
        stem_ = &register_module("stem", std::make_unique<Conv2d>(spec.channels, stem_w, 3, 2, 1, rng, false));
        stem_bn_ = &register_module("stem_bn", std::make_unique<BatchNorm2d>(stem_w));

        struct Stage {
            int64_t out;
            int count, stride, expand;
        };
        const Stage stages[] = {
            {scale_w(b), scale_d(1), 1, 1},
            {scale_w(2 * b), scale_d(2), 2, 4},
            {scale_w(3 * b), scale_d(2), 2, 4},
        };
        int64_t in_ch = stem_w;
        int bi = 0;
        for (const Stage& st : stages) {
            for (int i = 0; i < st.count; ++i) {
                const int stride = i == 0 ? st.stride : 1;
                const int64_t exp_ch = std::max(in_ch, in_ch * st.expand);
                blocks_.push_back(&register_module(
                    "block" + std::to_string(++bi),
                    std::make_unique<InvertedResidual>(in_ch, exp_ch, st.out, stride, true, BlockAct::Silu, rng)));
                in_ch = st.out;
            }
        }
        const int64_t head_w = scale_w(4 * b);
        head_conv_ = &register_module("head_conv", std::make_unique<Conv2d>(in_ch, head_w, 1, 1, 0, rng, false));
        head_bn_ = &register_module("head_bn", std::make_unique<BatchNorm2d>(head_w));
        head_ = &register_module("head", std::make_unique<Linear>(head_w, spec.feature_dim, rng));
    }

    Tensor forward(const Tensor& x, const Ctx& ctx) override {
        Tensor h = silu(stem_bn_->forward(stem_->forward(x), ctx));
        for (auto* blk : blocks_) h = blk->forward(h, ctx);
        h = silu(head_bn_->forward(head_conv_->forward(h), ctx));
        return head_->forward(global_avg_pool(h));
    }

private:
    Conv2d* stem_;
    BatchNorm2d* stem_bn_;
    std::vector<InvertedResidual*> blocks_;
    Conv2d* head_conv_;
    BatchNorm2d* head_bn_;
    Linear* head_;
};

}  // namespace

// ---------------------------------------------------------------------------
// ViT.

VitEncoder::VitEncoder(const BackboneSpec& spec, std::mt19937_64& rng) {
    feature_dim_ = spec.feature_dim;
    const int64_t side = spec.input_size / spec.vit_patch;
    tokens_ = side * side;
    patch_embed_ = &register_module(
        "patch_embed",
        std::make_unique<Conv2d>(spec.channels, spec.vit_dim, spec.vit_patch, spec.vit_patch, 0, rng));
    cls_token_ = register_parameter("cls_token", Tensor::normal({1, 1, spec.vit_dim}, 0, 0.02, rng));
    // zero-initialized so that token order carries no signal until trained
    pos_embed_ = register_parameter("pos_embed", Tensor::zeros({tokens_ + 1, spec.vit_dim}));
    for (int i = 0; i < spec.vit_layers; ++i) {
        blocks_.push_back(&register_module(
            "block" + std::to_string(i + 1),
            std::make_unique<TransformerBlock>(spec.vit_dim, spec.vit_heads, 2 * spec.vit_dim, 0.0, rng)));
    }
    final_norm_ = &register_module("final_norm", std::make_unique<LayerNorm>(spec.vit_dim));
    head_ = &register_module("head", std::make_unique<Linear>(spec.vit_dim, spec.feature_dim, rng));
}

Tensor VitEncoder::embed_patches(const Tensor& x) const {
    Tensor grid = patch_embed_->forward(x);  // [N x dim x side x side]
    const int64_t n = grid.dim(0), d = grid.dim(1);
    return permute(reshape(grid, {n, d, tokens_}), {0, 2, 1});  // [N x T x dim]
}

Tensor VitEncoder::encode_tokens(const Tensor& patch_tokens, const Ctx& ctx) const {
    if (patch_tokens.ndim() != 3 || patch_tokens.dim(1) != tokens_) {
        throw ShapeError("vit: expected [Nx" + std::to_string(tokens_) + "xdim] patch tokens, got " +
                         shape_str(patch_tokens.shape()));
    }
    const int64_t n = patch_tokens.dim(0);
    Tensor cls = expand_batch(cls_token_, n);  // [N x 1 x dim]
    Tensor tokens = concat({cls, patch_tokens}, 1);
    tokens = bias_add(tokens, pos_embed_);
    for (auto* blk : blocks_) tokens = blk->forward(tokens, ctx);
    tokens = final_norm_->forward(tokens);
    Tensor cls_out = split(tokens, 1, {1, tokens_})[0];  // [N x 1 x dim]
    return head_->forward(reshape(cls_out, {n, cls_out.dim(2)}));
}

Tensor VitEncoder::forward(const Tensor& x, const Ctx& ctx) {
    return encode_tokens(embed_patches(x), ctx);
}

std::unique_ptr<ImageEncoder> build_backbone(const BackboneSpec& spec, std::mt19937_64& rng) {
    spec.validate();
    switch (spec.family) {
        case BackboneFamily::Vgg:
            return std::make_unique<VggEncoder>(spec, rng);
        case BackboneFamily::Resnet:
            return std::make_unique<ResnetEncoder>(spec, rng);
        case BackboneFamily::MobilenetV3:
            return std::make_unique<MobilenetV3Encoder>(spec, rng);
        case BackboneFamily::Effnet:
            return std::make_unique<EffnetEncoder>(spec, rng);
        case BackboneFamily::Vit:
            return std::make_unique<VitEncoder>(spec, rng);
    }
    throw ConfigError("unreachable backbone family");
}

}  // namespace mmf
