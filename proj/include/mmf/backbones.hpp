#pragma once

#include <memory>
#include <string>

#include "mmf/attention.hpp"
#include "mmf/module.hpp"

namespace mmf {

enum class BackboneFamily { Vgg, Resnet, MobilenetV3, Effnet, Vit };

// Declarative description of an image encoder. Supported variant tags:
// vgg16, vgg19, resnet34, resnet50, mobilenet_v3, effnet_b0..effnet_b7, vit.
// Widths default to desk-scale toys; the published 224-pixel geometry is
// reachable through input_size/base_width.
struct BackboneSpec {
    BackboneFamily family = BackboneFamily::Vgg;
    std::string variant = "vgg16";
    int input_size = 64;
    int64_t channels = 1;
    int64_t feature_dim = 32;
    int64_t base_width = 8;  // narrowest channel width in the trunk

    // ViT geometry
    int vit_patch = 8;
    int64_t vit_dim = 64;
    int vit_heads = 4;
    int vit_layers = 4;

    static BackboneSpec from_tag(const std::string& tag);
    // Spatial reduction from input to the final feature map (ViT: patch size).
    int downsample_factor() const;
    void validate() const;
};

// Maps [N x C x S x S] image batches to [N x feature_dim] embeddings.
class ImageEncoder : public Module {
public:
    virtual Tensor forward(const Tensor& x, const Ctx& ctx) = 0;
    int64_t feature_dim() const { return feature_dim_; }

protected:
    int64_t feature_dim_ = 0;
};

std::unique_ptr<ImageEncoder> build_backbone(const BackboneSpec& spec, std::mt19937_64& rng);

// Pre-activation residual block (basic 3x3+3x3 or 1x1/3x3/1x1 bottleneck).
// With an all-zero residual branch the block is exactly the identity when no
// projection is needed.
class ResidualBlock : public Module {
public:
    ResidualBlock(int64_t in_ch, int64_t out_ch, int stride, bool bottleneck, std::mt19937_64& rng);
    Tensor forward(const Tensor& x, const Ctx& ctx) const;
    bool has_projection() const { return proj_ != nullptr; }
    // Zeroes every conv weight on the residual branch (testing hook).
    void zero_branch();

private:
    std::vector<BatchNorm2d*> norms_;
    std::vector<Conv2d*> convs_;
    Conv2d* proj_ = nullptr;
};

// Squeeze-excitation channel gate: GAP -> bottleneck MLP -> hard-sigmoid.
class SqueezeExcite : public Module {
public:
    SqueezeExcite(int64_t channels, int64_t reduced, std::mt19937_64& rng);
    Tensor forward(const Tensor& x) const;

private:
    Linear* fc1_;
    Linear* fc2_;
};

// ViT: patch embedding, class token, zero-initialized position embeddings,
// pre-norm encoder stack; returns the class-token embedding projected to
// feature_dim.
class VitEncoder : public ImageEncoder {
public:
    VitEncoder(const BackboneSpec& spec, std::mt19937_64& rng);
    Tensor forward(const Tensor& x, const Ctx& ctx) override;

    // Patch tokens before the class token and position embeddings are
    // applied: [N x T x dim] with T = (S/P)^2.
    Tensor embed_patches(const Tensor& x) const;
    // Runs class token + position embeddings + encoder over given patch
    // tokens; exposed so tests can permute the patch order.
    Tensor encode_tokens(const Tensor& patch_tokens, const Ctx& ctx) const;
    int64_t token_count() const { return tokens_ + 1; }

private:
    int64_t tokens_;  // patch tokens, excluding the class token
    Conv2d* patch_embed_;
    Tensor cls_token_;  // [1 x 1 x dim]
    Tensor pos_embed_;  // [(T+1) x dim]
    std::vector<TransformerBlock*> blocks_;
    LayerNorm* final_norm_;
    Linear* head_;
};

}  // namespace mmf
