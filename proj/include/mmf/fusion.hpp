#pragma once

#include <array>
#include <memory>

#include "mmf/backbones.hpp"
#include "mmf/text_encoders.hpp"

namespace mmf {

struct ModelConfig {
    BackboneSpec backbone;
    TextEncoderSpec text;
    scalar dropout = 0.2;
    // 0 selects the plain linear classification layer; a positive width
    // inserts one hidden ReLU layer.
    int64_t classifier_hidden = 0;
    // One encoder shared across the four views (default), or four
    // independently weighted encoders.
    bool shared_view_encoder = true;

    void validate() const;
};

// Late-fusion classifier over four mammogram views plus one tabular report:
// per-view image features f1..f4 and text features ft are concatenated into
// F_c = [f1 f2 f3 f4 ft] and passed to the classification head, which emits
// two logits (class 1 = malignant).
class FusionModel : public Module {
public:
    FusionModel(const ModelConfig& cfg, uint64_t seed);

    // Views in fixed order LCC, LMLO, RCC, RMLO.
    std::array<Tensor, 4> extract_image_features(const std::array<Tensor, 4>& views, const Ctx& ctx);
    // Parameter-free concatenation in the fixed order (f1, f2, f3, f4, ft).
    static Tensor fuse(const std::array<Tensor, 4>& f, const Tensor& ft);
    // -> (logits [N x 2], probabilities [N x 2])
    std::pair<Tensor, Tensor> classify(const Tensor& fc, const Ctx& ctx);

    // Full forward pass; returns logits [N x 2].
    Tensor forward(const std::array<Tensor, 4>& views, const Tensor& text, const Ctx& ctx);

    const ModelConfig& config() const { return cfg_; }
    int64_t fused_width() const { return fused_width_; }
    ImageEncoder& image_encoder(int view = 0);
    TextEncoder& text_encoder() { return *text_; }
    Linear& head() { return *head_; }

private:
    ModelConfig cfg_;
    int64_t fused_width_;
    std::vector<ImageEncoder*> encoders_;  // 1 when shared, else 4
    TextEncoder* text_;
    Dropout* drop_;
    Linear* hidden_ = nullptr;
    Linear* head_;
};

}  // namespace mmf
