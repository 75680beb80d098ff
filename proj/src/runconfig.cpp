#include "mmf/runconfig.hpp"

#include <cstdlib>
#include <fstream>

namespace mmf {

namespace {

std::string backbone_tag(const BackboneSpec& s) { return s.variant; }

std::string text_tag(const TextEncoderSpec& s) {
    return s.kind == TextEncoderKind::Ann ? "ann" : "lstm";
}

}  // namespace

nlohmann::json model_config_to_json(const ModelConfig& m) {
    nlohmann::json j;
    j["backbone"] = backbone_tag(m.backbone);
    j["input_size"] = m.backbone.input_size;
    j["channels"] = m.backbone.channels;
    j["feature_dim"] = m.backbone.feature_dim;
    j["base_width"] = m.backbone.base_width;
    j["vit"] = {{"patch", m.backbone.vit_patch},
                {"dim", m.backbone.vit_dim},
                {"heads", m.backbone.vit_heads},
                {"layers", m.backbone.vit_layers}};
    j["text"] = text_tag(m.text);
    j["text_hidden"] = m.text.hidden_dim;
    j["text_feature_dim"] = m.text.feature_dim;
    j["dropout"] = m.dropout;
    j["classifier_hidden"] = m.classifier_hidden;
    j["shared_view_encoder"] = m.shared_view_encoder;
    return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig m;
    m.backbone = BackboneSpec::from_tag(j.value("backbone", "vgg16"));
    m.backbone.input_size = j.value("input_size", 64);
    m.backbone.channels = j.value("channels", static_cast<int64_t>(1));
    m.backbone.feature_dim = j.value("feature_dim", static_cast<int64_t>(32));
    m.backbone.base_width = j.value("base_width", static_cast<int64_t>(8));
    if (j.contains("vit")) {
        const auto& v = j["vit"];
        m.backbone.vit_patch = v.value("patch", 8);
        m.backbone.vit_dim = v.value("dim", static_cast<int64_t>(64));
        m.backbone.vit_heads = v.value("heads", 4);
        m.backbone.vit_layers = v.value("layers", 4);
    }
    m.text = TextEncoderSpec::from_tag(j.value("text", "ann"));
    m.text.hidden_dim = j.value("text_hidden", static_cast<int64_t>(16));
    m.text.feature_dim = j.value("text_feature_dim", static_cast<int64_t>(8));
    m.text.num_features = kTabularFields;
    m.text.embed_dim = kTabularEmbedDim;
    m.dropout = j.value("dropout", 0.2);
    m.classifier_hidden = j.value("classifier_hidden", static_cast<int64_t>(0));
    m.shared_view_encoder = j.value("shared_view_encoder", true);
    return m;
}

namespace {

std::pair<double, double> pair_from(const nlohmann::json& j, const char* key,
                                    std::pair<double, double> fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j[key];
    if (!v.is_array() || v.size() != 2) {
        throw ConfigError(std::string("config: '") + key + "' must be a two-element array");
    }
    return {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig c;
    if (j.contains("data")) {
        const auto& d = j["data"];
        if (d.contains("manifest")) {
            c.data.manifest_path = d["manifest"].get<std::string>();
            c.data.synthetic = false;
        }
        if (d.contains("synthetic")) {
            const auto& s = d["synthetic"];
            c.data.synthetic = true;
            c.data.synthetic_n = s.value("n", static_cast<int64_t>(200));
            c.data.synthetic_seed = s.value("seed", static_cast<uint64_t>(7));
            c.data.synthetic_size = s.value("image_size", 64);
        }
        if (d.contains("manifest") && d.contains("synthetic")) {
            throw ConfigError("config: data must name either a manifest or a synthetic source, not both");
        }
    }
    if (j.contains("model")) c.model = model_config_from_json(j["model"]);
    if (j.contains("augment")) {
        const auto& a = j["augment"];
        c.augment.p_hflip = a.value("p_hflip", 0.5);
        c.augment.p_vflip = a.value("p_vflip", 0.5);
        c.augment.crop_out = a.value("crop_out", c.model.backbone.input_size);
        c.augment.crop_scale = pair_from(a, "crop_scale", {0.8, 1.0});
        c.augment.aspect_range = pair_from(a, "aspect_range", {3.0 / 4.0, 4.0 / 3.0});
        c.augment.rotate_max_deg = a.value("rotate_max_deg", 90.0);
        c.augment.scale_range = pair_from(a, "scale_range", {0.8, 1.2});
        c.augment.shift_frac = a.value("shift_frac", 0.0625);
    } else {
        c.augment.crop_out = c.model.backbone.input_size;
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        c.train.lr = t.value("lr", 5e-4);
        c.train.batch_size = t.value("batch_size", 8);
        c.train.epochs = t.value("epochs", 100);
        c.train.seed = t.value("seed", static_cast<uint64_t>(0));
        c.train.beta1 = t.value("beta1", 0.9);
        c.train.beta2 = t.value("beta2", 0.999);
        c.train.eps = t.value("eps", 1e-8);
    }
    c.split_ratio = j.value("split_ratio", 0.8);
    c.use_birads = j.value("use_birads", true);
    c.out_dir = j.value("out_dir", std::string("runs/run"));
    if (j.contains("grid")) {
        for (const auto& cell : j["grid"]) {
            if (!cell.is_array() || cell.size() != 2) {
                throw ConfigError("config: each grid entry must be [backbone, text] tags");
            }
            c.grid.emplace_back(cell[0].get<std::string>(), cell[1].get<std::string>());
        }
    }
    return c;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config " + path.string() + " is not valid JSON");
    return from_json(j);
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    if (data.synthetic) {
        j["data"]["synthetic"] = {{"n", data.synthetic_n},
                                  {"seed", data.synthetic_seed},
                                  {"image_size", data.synthetic_size}};
    } else {
        j["data"]["manifest"] = data.manifest_path;
    }
    j["model"] = model_config_to_json(model);
    j["augment"] = {{"p_hflip", augment.p_hflip},
                    {"p_vflip", augment.p_vflip},
                    {"crop_out", augment.crop_out},
                    {"crop_scale", {augment.crop_scale.first, augment.crop_scale.second}},
                    {"aspect_range", {augment.aspect_range.first, augment.aspect_range.second}},
                    {"rotate_max_deg", augment.rotate_max_deg},
                    {"scale_range", {augment.scale_range.first, augment.scale_range.second}},
                    {"shift_frac", augment.shift_frac}};
    j["train"] = {{"lr", train.lr},       {"batch_size", train.batch_size}, {"epochs", train.epochs},
                  {"seed", train.seed},   {"beta1", train.beta1},           {"beta2", train.beta2},
                  {"eps", train.eps}};
    j["split_ratio"] = split_ratio;
    j["use_birads"] = use_birads;
    j["out_dir"] = out_dir.string();
    if (!grid.empty()) {
        nlohmann::json g = nlohmann::json::array();
        for (const auto& [bb, tx] : grid) g.push_back({bb, tx});
        j["grid"] = g;
    }
    return j;
}

std::vector<std::string> RunConfig::validate() const {
    std::vector<std::string> errors;
    auto check = [&](auto&& fn, const std::string& where) {
        try {
            fn();
        } catch (const Error& e) {
            errors.push_back(where + ": " + e.what());
        }
    };
    if (!data.synthetic) {
        if (data.manifest_path.empty()) {
            errors.push_back("data: no manifest path and synthetic generation disabled");
        } else if (!std::filesystem::exists(data.manifest_path)) {
            errors.push_back("data: manifest '" + data.manifest_path + "' does not exist");
        }
    } else {
        if (data.synthetic_n < 2 || data.synthetic_n % 2 != 0) {
            errors.push_back("data: synthetic n must be even and >= 2");
        }
        if (data.synthetic_size < 16) errors.push_back("data: synthetic image_size must be >= 16");
    }
    check([&] { model.validate(); }, "model");
    check([&] { augment.validate(); }, "augment");
    // field-level train checks so one bad value does not hide another
    if (!(train.lr > 0)) errors.push_back("train: lr must be > 0");
    if (train.batch_size < 1) errors.push_back("train: batch_size must be >= 1");
    if (train.epochs < 1) errors.push_back("train: epochs must be >= 1");
    if (!(train.beta1 >= 0 && train.beta1 < 1 && train.beta2 >= 0 && train.beta2 < 1)) {
        errors.push_back("train: betas must lie in [0,1)");
    }
    if (!(train.eps > 0)) errors.push_back("train: eps must be > 0");
    if (!(split_ratio > 0 && split_ratio < 1)) {
        errors.push_back("split_ratio must lie strictly inside (0,1)");
    }
    if (augment.crop_out != model.backbone.input_size) {
        errors.push_back("augment crop_out must equal model input_size");
    }
    for (const auto& [bb, tx] : grid) {
        check([&] { (void)BackboneSpec::from_tag(bb); }, "grid backbone '" + bb + "'");
        check([&] { (void)TextEncoderSpec::from_tag(tx); }, "grid text encoder '" + tx + "'");
    }
    if (out_dir.empty()) errors.push_back("out_dir must not be empty");
    return errors;
}

std::filesystem::path resolve_out_dir(const std::filesystem::path& out_dir) {
    const char* root = std::getenv("MMF_OUT_ROOT");
    if (root && *root && out_dir.is_relative()) {
        return std::filesystem::path(root) / out_dir;
    }
    return out_dir;
}

}  // namespace mmf
