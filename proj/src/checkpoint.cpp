#include "mmf/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "mmf/runconfig.hpp"

namespace mmf {

namespace {

constexpr char kMagic[8] = {'M', 'M', 'F', 'C', 'K', 'P', 'T', '1'};

void put_u32(std::ofstream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void put_i64(std::ofstream& out, int64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }

uint32_t get_u32(std::ifstream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

int64_t get_i64(std::ifstream& in) {
    int64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

void write_entry(std::ofstream& out, const std::string& name, const Tensor& t) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<uint32_t>(t.shape().size()));
    for (int64_t d : t.shape()) put_i64(out, d);
    std::vector<double> vals(t.data().begin(), t.data().end());
    out.write(reinterpret_cast<const char*>(vals.data()), static_cast<std::streamsize>(vals.size() * 8));
}

}  // namespace

void save_checkpoint(const FusionModel& model, const TabularStats& stats,
                     const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out.write(kMagic, 8);

    nlohmann::json header;
    header["format_version"] = 1;
    header["model"] = model_config_to_json(model.config());
    header["tabular_stats"] = {{"age_mean", stats.age_mean}, {"age_std", stats.age_std}};
    const std::string hs = header.dump();
    put_u32(out, static_cast<uint32_t>(hs.size()));
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));

    const auto params = model.named_parameters();
    const auto buffers = model.named_buffers();
    put_u32(out, static_cast<uint32_t>(params.size() + buffers.size()));
    for (const auto& [name, t] : params) write_entry(out, name, t);
    for (const auto& [name, t] : buffers) write_entry(out, name, t);
    if (!out) throw IoError("failed writing checkpoint " + path.string());
}

LoadedModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) {
        throw IoError("not a checkpoint file: " + path.string());
    }
    const uint32_t header_len = get_u32(in);
    std::string hs(header_len, '\0');
    in.read(hs.data(), header_len);
    if (!in) throw IoError("truncated checkpoint header in " + path.string());
    nlohmann::json header = nlohmann::json::parse(hs, nullptr, false);
    if (header.is_discarded() || header.value("format_version", 0) != 1) {
        throw IoError("unsupported checkpoint header in " + path.string());
    }

    LoadedModel loaded;
    loaded.stats.age_mean = header["tabular_stats"].value("age_mean", 0.0);
    loaded.stats.age_std = header["tabular_stats"].value("age_std", 1.0);
    const ModelConfig cfg = model_config_from_json(header["model"]);
    loaded.model = std::make_unique<FusionModel>(cfg, /*seed=*/0);

    std::map<std::string, Tensor> slots;
    for (auto& [name, t] : loaded.model->named_parameters()) slots.emplace(name, t);
    for (auto& [name, t] : loaded.model->named_buffers()) slots.emplace(name, t);

    const uint32_t n = get_u32(in);
    if (n != slots.size()) {
        throw IoError("checkpoint " + path.string() + " holds " + std::to_string(n) + " tensors, model has " +
                      std::to_string(slots.size()));
    }
    for (uint32_t i = 0; i < n; ++i) {
        const uint32_t name_len = get_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const uint32_t ndim = get_u32(in);
        Shape shape(ndim);
        for (uint32_t d = 0; d < ndim; ++d) shape[d] = get_i64(in);
        const int64_t numel = shape_numel(shape);
        std::vector<double> vals(static_cast<size_t>(numel));
        in.read(reinterpret_cast<char*>(vals.data()), static_cast<std::streamsize>(numel * 8));
        if (!in) throw IoError("truncated checkpoint entry '" + name + "' in " + path.string());
        auto it = slots.find(name);
        if (it == slots.end()) throw IoError("checkpoint entry '" + name + "' has no matching slot");
        Tensor& dst = it->second;
        if (dst.shape() != shape) {
            throw IoError("checkpoint entry '" + name + "' shape " + shape_str(shape) +
                          " does not match model slot " + shape_str(dst.shape()));
        }
        auto d = dst.mutable_data();
        for (size_t j = 0; j < vals.size(); ++j) d[j] = static_cast<scalar>(vals[j]);
    }
    return loaded;
}

}  // namespace mmf
