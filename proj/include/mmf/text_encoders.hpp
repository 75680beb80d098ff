#pragma once

#include <memory>
#include <string>

#include "mmf/module.hpp"

namespace mmf {

enum class TextEncoderKind { Ann, Lstm };

struct TextEncoderSpec {
    TextEncoderKind kind = TextEncoderKind::Ann;
    int64_t hidden_dim = 16;
    int64_t feature_dim = 8;
    int64_t num_features = 5;  // tabular fields per report
    int64_t embed_dim = 8;     // per-token width in LSTM mode

    static TextEncoderSpec from_tag(const std::string& tag);
    void validate() const;
};

// Maps encoded tabular reports to [N x feature_dim]. ANN mode consumes
// [N x num_features]; LSTM mode consumes [N x num_features x embed_dim].
class TextEncoder : public Module {
public:
    virtual Tensor forward(const Tensor& x, const Ctx& ctx) = 0;
    int64_t feature_dim() const { return feature_dim_; }

protected:
    int64_t feature_dim_ = 0;
};

// linear -> relu -> dropout -> linear
class AnnEncoder : public TextEncoder {
public:
    AnnEncoder(const TextEncoderSpec& spec, scalar dropout_p, std::mt19937_64& rng);
    Tensor forward(const Tensor& x, const Ctx& ctx) override;

private:
    Linear* fc1_;
    Linear* fc2_;
    Dropout* drop_;
};

// Single-layer LSTM over the field sequence; the final hidden state is
// projected to feature_dim.
class LstmEncoder : public TextEncoder {
public:
    LstmEncoder(const TextEncoderSpec& spec, std::mt19937_64& rng);
    Tensor forward(const Tensor& x, const Ctx& ctx) override;
    // Final hidden state [N x hidden] before the output projection.
    Tensor hidden_state(const Tensor& seq) const;

private:
    int64_t input_dim_, hidden_dim_;
    Tensor wx_;  // [d_in x 4H], gate order (input, forget, candidate, output)
    Tensor wh_;  // [H x 4H]
    Tensor b_;   // [4H]
    Linear* head_;
};

std::unique_ptr<TextEncoder> build_text_encoder(const TextEncoderSpec& spec, scalar dropout_p,
                                                std::mt19937_64& rng);

}  // namespace mmf
