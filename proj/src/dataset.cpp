#include "mmf/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "mmf/common.hpp"

namespace mmf {

namespace {

constexpr const char* kHeader =
    "patient_id\tlcc\tlmlo\trcc\trmlo\tbirads\tdensity\tage\tfamily_history\tlaterality\tlabel";
constexpr int kColumns = 11;

std::vector<std::string> split_tsv(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        const size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return out;
}

std::optional<long> parse_int(const std::string& s) {
    long v = 0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || p != last) return std::nullopt;
    return v;
}

std::optional<double> parse_double(const std::string& s) {
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) return std::nullopt;
        return v;
    } catch (...) {
        return std::nullopt;
    }
}

// Validates one row's syntax and domains. Returns an error message for
// malformed rows, "missing" sentinel via the out-flag for absent required
// fields, and nothing when the row is clean.
std::optional<std::string> row_problem(const ManifestRow& r, bool& is_missing) {
    is_missing = false;
    auto check_int = [&](const std::string& field, const char* name, long lo, long hi,
                         bool required) -> std::optional<std::string> {
        if (field.empty()) {
            if (required) is_missing = true;
            return std::nullopt;
        }
        auto v = parse_int(field);
        if (!v) return std::string(name) + " '" + field + "' is not an integer";
        if (*v < lo || *v > hi) {
            return std::string(name) + " " + std::to_string(*v) + " outside [" + std::to_string(lo) +
                   "," + std::to_string(hi) + "]";
        }
        return std::nullopt;
    };

    if (auto e = check_int(r.birads, "birads", 0, 6, true)) return e;
    if (auto e = check_int(r.density, "density", 1, 4, true)) return e;
    if (auto e = check_int(r.family_history, "family_history", 0, 1, true)) return e;
    if (auto e = check_int(r.laterality, "laterality", 0, 2, false)) return e;
    if (auto e = check_int(r.label, "label", 0, 1, true)) return e;
    if (!r.age.empty()) {
        auto v = parse_double(r.age);
        if (!v) return "age '" + r.age + "' is not a number";
        if (*v <= 0 || *v > 130) return "age " + std::to_string(*v) + " out of range";
    } else {
        is_missing = true;
    }
    if (r.patient_id.empty()) is_missing = true;
    for (const auto& p : r.view_paths) {
        if (p.empty()) is_missing = true;
    }
    return std::nullopt;
}

uint64_t fnv1a_str(const std::string& s, uint64_t h = 14695981039346656037ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace

Manifest Manifest::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open manifest " + file.string());
    Manifest m;
    m.base_dir = file.parent_path();
    std::string line;
    bool header_seen = false;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq != std::string::npos) {
                std::string key = line.substr(1, eq - 1);
                std::string value = line.substr(eq + 1);
                key.erase(0, key.find_first_not_of(' '));
                key.erase(key.find_last_not_of(' ') + 1);
                if (key == "source") m.source_tag = value;
                if (key == "seed") {
                    if (auto v = parse_int(value)) {
                        m.seed = static_cast<uint64_t>(*v);
                        m.has_seed = true;
                    }
                }
            }
            continue;
        }
        if (!header_seen) {
            if (line != kHeader) {
                throw ValidationError("manifest " + file.string() + ": unexpected header at line " +
                                      std::to_string(line_no) + " (want '" + kHeader + "')");
            }
            header_seen = true;
            continue;
        }
        auto cells = split_tsv(line);
        if (static_cast<int>(cells.size()) != kColumns) {
            throw ValidationError("manifest " + file.string() + " line " + std::to_string(line_no) +
                                  ": expected " + std::to_string(kColumns) + " columns, got " +
                                  std::to_string(cells.size()));
        }
        ManifestRow r;
        r.patient_id = cells[0];
        for (int i = 0; i < 4; ++i) r.view_paths[static_cast<size_t>(i)] = cells[static_cast<size_t>(1 + i)];
        r.birads = cells[5];
        r.density = cells[6];
        r.age = cells[7];
        r.family_history = cells[8];
        r.laterality = cells[9];
        r.label = cells[10];
        m.rows.push_back(std::move(r));
    }
    if (!header_seen) throw ValidationError("manifest " + file.string() + " has no header row");
    return m;
}

void Manifest::save(const std::filesystem::path& file) const {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write manifest " + file.string());
    if (!source_tag.empty()) out << "# source=" << source_tag << "\n";
    if (has_seed) out << "# seed=" << seed << "\n";
    out << kHeader << "\n";
    for (const auto& r : rows) {
        out << r.patient_id;
        for (const auto& p : r.view_paths) out << '\t' << p;
        out << '\t' << r.birads << '\t' << r.density << '\t' << r.age << '\t' << r.family_history << '\t'
            << r.laterality << '\t' << r.label << "\n";
    }
    if (!out) throw IoError("failed writing manifest " + file.string());
}

std::string FilterReport::to_text() const {
    std::ostringstream os;
    os << "preprocess filter report\n"
       << "  input rows:      " << input_rows << "\n"
       << "  malformed:       " << malformed << "\n"
       << "  missing values:  " << missing << "\n"
       << "  duplicate ids:   " << duplicate << "\n"
       << "  birads 0/6:      " << birads06 << "\n"
       << "  retained rows:   " << output_rows << "\n";
    for (const auto& e : row_errors) os << "  error: " << e << "\n";
    return os.str();
}

Manifest preprocess(const Manifest& m, FilterReport* report) {
    FilterReport local;
    FilterReport& rep = report ? *report : local;
    rep = FilterReport{};
    rep.input_rows = static_cast<int64_t>(m.rows.size());

    Manifest out;
    out.base_dir = m.base_dir;
    out.source_tag = m.source_tag;
    out.seed = m.seed;
    out.has_seed = m.has_seed;

    std::set<std::string> seen_ids;
    for (size_t i = 0; i < m.rows.size(); ++i) {
        const ManifestRow& r = m.rows[i];
        bool is_missing = false;
        if (auto err = row_problem(r, is_missing)) {
            ++rep.malformed;
            rep.row_errors.push_back("row " + std::to_string(i) + " (id '" + r.patient_id + "'): " + *err);
            continue;
        }
        if (is_missing) {
            ++rep.missing;
            continue;
        }
        if (!seen_ids.insert(r.patient_id).second) {
            ++rep.duplicate;
            continue;
        }
        const long birads = *parse_int(r.birads);
        if (birads == 0 || birads == 6) {
            ++rep.birads06;
            continue;
        }
        out.rows.push_back(r);
    }
    rep.output_rows = static_cast<int64_t>(out.rows.size());
    return out;
}

std::pair<std::vector<size_t>, std::vector<size_t>> stratified_split(const std::vector<int>& labels,
                                                                     double ratio, uint64_t seed) {
    if (labels.size() < 2) throw ContractError("split: need at least 2 records");
    if (!(ratio > 0 && ratio < 1)) {
        throw ContractError("split: ratio must lie strictly inside (0,1), got " + std::to_string(ratio));
    }
    std::vector<size_t> by_class[2];
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) throw ContractError("split: labels must be 0 or 1");
        by_class[labels[i]].push_back(i);
    }
    std::mt19937_64 rng(derive_seed(seed, "split"));
    std::vector<size_t> train, val;
    for (auto& cls : by_class) {
        std::shuffle(cls.begin(), cls.end(), rng);
        const auto n_train = static_cast<size_t>(std::llround(ratio * static_cast<double>(cls.size())));
        for (size_t i = 0; i < cls.size(); ++i) {
            (i < n_train ? train : val).push_back(cls[i]);
        }
    }
    if (train.empty() || val.empty()) {
        throw ContractError("split: ratio " + std::to_string(ratio) + " leaves an empty side");
    }
    return {train, val};
}

namespace {

// Low-frequency value noise: coarse random grid upsampled bilinearly, plus
// fine Gaussian noise. Keeps the classification task honest but solvable.
Image synth_background(int size, std::mt19937_64& rng) {
    constexpr int kGrid = 8;
    Image coarse(kGrid, kGrid);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : coarse.px) v = 0.30 + 0.12 * u(rng);
    Image img = resize_bilinear(coarse, size, size);
    std::normal_distribution<double> fine(0.0, 0.02);
    for (auto& v : img.px) v = std::clamp(v + fine(rng), 0.0, 1.0);
    return img;
}

void add_lesions(Image& img, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> n_blobs(1, 3);
    std::uniform_real_distribution<double> pos(0.15, 0.85);
    std::uniform_real_distribution<double> sigma_frac(0.05, 0.11);
    std::uniform_real_distribution<double> amp(0.35, 0.60);
    const int k = n_blobs(rng);
    for (int b = 0; b < k; ++b) {
        const double cy = pos(rng) * img.height;
        const double cx = pos(rng) * img.width;
        const double sigma = sigma_frac(rng) * img.height;
        const double a = amp(rng);
        const double inv2s2 = 1.0 / (2 * sigma * sigma);
        for (int r = 0; r < img.height; ++r) {
            for (int c = 0; c < img.width; ++c) {
                const double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
                img.at(r, c) = std::clamp(img.at(r, c) + a * std::exp(-d2 * inv2s2), 0.0, 1.0);
            }
        }
    }
}

std::string format_age(double age) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", age);
    return buf;
}

}  // namespace

Manifest generate_synthetic(int64_t n, uint64_t seed, int image_size,
                            const std::filesystem::path& out_dir) {
    if (n < 2 || n % 2 != 0) {
        throw ContractError("generate_synthetic: n must be even and >= 2, got " + std::to_string(n));
    }
    if (image_size < 16) throw ContractError("generate_synthetic: image_size must be >= 16");

    std::filesystem::create_directories(out_dir / "images");
    Manifest m;
    m.base_dir = out_dir;
    m.source_tag = "synthetic";
    m.seed = seed;
    m.has_seed = true;

    for (int64_t i = 0; i < n; ++i) {
        const bool positive = i < n / 2;
        std::mt19937_64 rng(derive_seed(seed, "record-" + std::to_string(i)));
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "syn-%05lld", static_cast<long long>(i));
        const std::string id = idbuf;

        ManifestRow row;
        row.patient_id = id;

        std::uniform_int_distribution<int> density(1, 4);
        std::normal_distribution<double> age_dist(53.0, 10.0);
        const double age = std::clamp(age_dist(rng), 25.0, 90.0);

        int laterality = -1;
        std::array<bool, 4> affected{false, false, false, false};
        if (positive) {
            std::uniform_real_distribution<double> u(0.0, 1.0);
            const double r = u(rng);
            laterality = r < 0.45 ? 0 : (r < 0.90 ? 1 : 2);
            if (laterality == 0 || laterality == 2) affected[0] = affected[1] = true;  // LCC, LMLO
            if (laterality == 1 || laterality == 2) affected[2] = affected[3] = true;  // RCC, RMLO
        }

        std::uniform_int_distribution<int> birads_pos(4, 5), birads_neg(1, 3);
        std::bernoulli_distribution fh(positive ? 0.45 : 0.15);
        row.birads = std::to_string(positive ? birads_pos(rng) : birads_neg(rng));
        row.density = std::to_string(density(rng));
        row.age = format_age(age);
        row.family_history = fh(rng) ? "1" : "0";
        row.laterality = positive ? std::to_string(laterality) : "";
        row.label = positive ? "1" : "0";

        const auto rec_dir = out_dir / "images" / id;
        std::filesystem::create_directories(rec_dir);
        for (int v = 0; v < 4; ++v) {
            Image img = synth_background(image_size, rng);
            if (affected[static_cast<size_t>(v)]) add_lesions(img, rng);
            const std::string rel = "images/" + id + "/" + kViewNames[static_cast<size_t>(v)] + ".pgm";
            write_pgm(img, out_dir / rel);
            row.view_paths[static_cast<size_t>(v)] = rel;
        }
        m.rows.push_back(std::move(row));
    }

    // interleave classes deterministically so prefixes stay balanced
    std::mt19937_64 order_rng(derive_seed(seed, "order"));
    std::shuffle(m.rows.begin(), m.rows.end(), order_rng);
    m.save(out_dir / "manifest.tsv");
    return m;
}

std::vector<MultimodalRecord> load_records(const Manifest& m) {
    std::vector<MultimodalRecord> out;
    out.reserve(m.rows.size());
    for (size_t i = 0; i < m.rows.size(); ++i) {
        const ManifestRow& r = m.rows[i];
        bool missing = false;
        if (auto err = row_problem(r, missing)) {
            throw ValidationError("record " + r.patient_id + ": " + *err);
        }
        if (missing) {
            throw ValidationError("record " + r.patient_id + " has missing fields; run preprocess first");
        }
        MultimodalRecord rec;
        rec.patient_id = r.patient_id;
        rec.tab.birads = static_cast<int>(*parse_int(r.birads));
        rec.tab.density = static_cast<int>(*parse_int(r.density));
        rec.tab.age = *parse_double(r.age);
        rec.tab.family_history = *parse_int(r.family_history) == 1;
        if (!r.laterality.empty()) rec.tab.laterality = static_cast<int>(*parse_int(r.laterality));
        rec.label = static_cast<int>(*parse_int(r.label));
        for (int v = 0; v < 4; ++v) {
            rec.views[static_cast<size_t>(v)] = read_pgm(m.base_dir / r.view_paths[static_cast<size_t>(v)]);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

TabularStats fit_tabular_stats(const std::vector<MultimodalRecord>& records,
                               const std::vector<size_t>& indices) {
    if (indices.empty()) throw ContractError("fit_tabular_stats: empty training split");
    double mean = 0;
    for (size_t i : indices) mean += records[i].tab.age;
    mean /= static_cast<double>(indices.size());
    double var = 0;
    for (size_t i : indices) {
        const double d = records[i].tab.age - mean;
        var += d * d;
    }
    var /= static_cast<double>(indices.size());
    TabularStats s;
    s.age_mean = mean;
    s.age_std = var > 0 ? std::sqrt(var) : 1.0;
    return s;
}

namespace {

void validate_fields(const TabularFields& tab) {
    if (tab.birads < 0 || tab.birads > 6) throw ValidationError("encode_tabular: birads out of range");
    if (tab.density < 1 || tab.density > 4) throw ValidationError("encode_tabular: density out of range");
    if (tab.age <= 0) throw ValidationError("encode_tabular: nonpositive age");
    if (tab.laterality && (*tab.laterality < 0 || *tab.laterality > 2)) {
        throw ValidationError("encode_tabular: laterality out of range");
    }
}

int laterality_code(const TabularFields& tab) { return tab.laterality ? *tab.laterality : 3; }

}  // namespace

Tensor encode_tabular_vector(const TabularFields& tab, const TabularStats& stats, bool use_birads) {
    validate_fields(tab);
    const double z = (tab.age - stats.age_mean) / stats.age_std;
    std::vector<scalar> v(5);
    v[0] = use_birads ? tab.birads / 5.0 : 0.0;
    v[1] = tab.density / 4.0;
    v[2] = z;
    v[3] = tab.family_history ? 1.0 : 0.0;
    v[4] = laterality_code(tab) / 3.0;
    return Tensor({kTabularFields}, std::move(v));
}

Tensor encode_tabular_sequence(const TabularFields& tab, const TabularStats& stats, bool use_birads) {
    validate_fields(tab);
    Tensor t = Tensor::zeros({kTabularFields, kTabularEmbedDim});
    auto d = t.mutable_data();
    auto slot = [&](int64_t token, int64_t idx) -> scalar& { return d[static_cast<size_t>(token * kTabularEmbedDim + idx)]; };
    if (use_birads) slot(0, tab.birads) = 1.0;  // token 0: birads one-hot over 0..6
    slot(1, tab.density - 1) = 1.0;             // token 1: density one-hot over 1..4
    slot(2, 0) = (tab.age - stats.age_mean) / stats.age_std;  // token 2: age
    slot(2, kTabularEmbedDim - 1) = 1.0;                      // continuous-field marker
    slot(3, tab.family_history ? 1 : 0) = 1.0;  // token 3: family history one-hot
    slot(4, laterality_code(tab)) = 1.0;        // token 4: laterality one-hot incl. none
    return t;
}

std::string split_digest(const std::vector<MultimodalRecord>& records,
                         const std::vector<size_t>& train_idx, const std::vector<size_t>& val_idx) {
    auto sorted_ids = [&](const std::vector<size_t>& idx) {
        std::vector<std::string> ids;
        for (size_t i : idx) ids.push_back(records[i].patient_id);
        std::sort(ids.begin(), ids.end());
        return ids;
    };
    uint64_t h = 14695981039346656037ull;
    h = fnv1a_str("train:", h);
    for (const auto& id : sorted_ids(train_idx)) h = fnv1a_str(id + ",", h);
    h = fnv1a_str("|val:", h);
    for (const auto& id : sorted_ids(val_idx)) h = fnv1a_str(id + ",", h);
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace mmf
