#include "mmf/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "mmf/checkpoint.hpp"

namespace mmf {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

void require_valid(const RunConfig& cfg) {
    const auto errors = cfg.validate();
    if (!errors.empty()) {
        std::string joined = "invalid run config:";
        for (const auto& e : errors) joined += "\n  - " + e;
        throw ConfigError(joined);
    }
}

struct PreparedData {
    Manifest manifest;
    FilterReport report;
    std::vector<MultimodalRecord> records;
    std::vector<size_t> train_idx, val_idx;
    std::string digest;
};

PreparedData prepare_data(const RunConfig& cfg, const std::filesystem::path& run_dir) {
    PreparedData d;
    if (cfg.data.synthetic) {
        d.manifest = generate_synthetic(cfg.data.synthetic_n, cfg.data.synthetic_seed,
                                        cfg.data.synthetic_size, run_dir / "data");
    } else {
        d.manifest = Manifest::load(cfg.data.manifest_path);
    }
    d.manifest = preprocess(d.manifest, &d.report);
    write_text(run_dir / "filter_report.txt", d.report.to_text());
    d.records = load_records(d.manifest);

    std::vector<int> labels;
    labels.reserve(d.records.size());
    for (const auto& r : d.records) labels.push_back(r.label);
    std::tie(d.train_idx, d.val_idx) = stratified_split(labels, cfg.split_ratio, cfg.train.seed);
    d.digest = split_digest(d.records, d.train_idx, d.val_idx);
    write_text(run_dir / "split_digest.txt", d.digest + "\n");
    return d;
}

TrainArtifacts run_one(const RunConfig& cfg, const PreparedData& data,
                       const std::filesystem::path& run_dir) {
    std::filesystem::create_directories(run_dir);
    write_text(run_dir / "config_snapshot.json", cfg.to_json().dump(2) + "\n");
    write_text(run_dir / "seed.txt", std::to_string(cfg.train.seed) + "\n");
    write_text(run_dir / "split_digest.txt", data.digest + "\n");

    FusionModel model(cfg.model, cfg.train.seed);
    FitResult result = fit(model, data.records, data.train_idx, data.val_idx, cfg.train, cfg.augment,
                           cfg.use_birads, run_dir / "checkpoint.bin");

    write_text(run_dir / "history.tsv", result.history_tsv());
    write_text(run_dir / "metrics.txt",
               "best epoch: " + std::to_string(result.best_epoch) + "\n" + result.best_val.to_text());
    write_text(run_dir / "metrics.tsv",
               MetricsReport::tsv_header() + "\n" + result.best_val.to_tsv_row() + "\n");

    TrainArtifacts art;
    art.run_dir = run_dir;
    art.result = std::move(result);
    art.split_digest = data.digest;
    return art;
}

}  // namespace

void cmd_generate(int64_t n, uint64_t seed, int image_size, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    Manifest m = generate_synthetic(n, seed, image_size, out_dir);
    int64_t positives = 0;
    for (const auto& r : m.rows) positives += r.label == "1" ? 1 : 0;
    std::cout << "generated " << m.rows.size() << " records (" << positives << " positive, "
              << (static_cast<int64_t>(m.rows.size()) - positives) << " negative), seed " << seed
              << ", images " << image_size << "x" << image_size << "\n"
              << "manifest: " << (out_dir / "manifest.tsv").string() << "\n";
}

TrainArtifacts cmd_train(const RunConfig& cfg) {
    require_valid(cfg);
    const auto run_dir = resolve_out_dir(cfg.out_dir);
    std::filesystem::create_directories(run_dir);
    PreparedData data = prepare_data(cfg, run_dir);
    std::cout << "records: " << data.records.size() << " (" << data.train_idx.size() << " train / "
              << data.val_idx.size() << " val), split digest " << data.digest << "\n"
              << data.report.to_text();
    TrainArtifacts art = run_one(cfg, data, run_dir);
    std::cout << "best epoch " << art.result.best_epoch << "\n" << art.result.best_val.to_text();
    return art;
}

MetricsReport cmd_evaluate(const std::filesystem::path& checkpoint,
                           const std::filesystem::path& manifest,
                           const std::optional<std::filesystem::path>& out_dir) {
    LoadedModel loaded = load_checkpoint(checkpoint);
    Manifest m = preprocess(Manifest::load(manifest));
    const auto records = load_records(m);
    if (records.empty()) throw ValidationError("evaluate: manifest holds no usable records");
    std::vector<size_t> all(records.size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    EvalOutput out = evaluate_model(*loaded.model, records, all, loaded.stats, true, 8);
    std::cout << out.report.to_text();
    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        write_text(*out_dir / "metrics.txt", out.report.to_text());
        write_text(*out_dir / "metrics.tsv",
                   MetricsReport::tsv_header() + "\n" + out.report.to_tsv_row() + "\n");
    }
    return out.report;
}

std::string pretty_combo(const std::string& backbone_tag, const std::string& text_tag) {
    auto pretty_backbone = [](const std::string& t) -> std::string {
        if (t == "vgg16") return "VGG16";
        if (t == "vgg19") return "VGG19";
        if (t == "resnet34") return "ResNet34";
        if (t == "resnet50") return "ResNet50";
        if (t == "mobilenet_v3") return "MobileNet_v3";
        if (t.rfind("effnet_b", 0) == 0) return "EffNet_b" + t.substr(8);
        if (t == "vit") return "ViT";
        return t;
    };
    return pretty_backbone(backbone_tag) + "+" + (text_tag == "lstm" ? "LSTM" : "ANN");
}

GridArtifacts cmd_grid(const RunConfig& cfg) {
    require_valid(cfg);
    if (cfg.grid.empty()) throw ConfigError("grid: config lists no grid combinations");
    const auto grid_dir = resolve_out_dir(cfg.out_dir);
    std::filesystem::create_directories(grid_dir);
    write_text(grid_dir / "config_snapshot.json", cfg.to_json().dump(2) + "\n");

    // one dataset and one split shared by every cell
    PreparedData data = prepare_data(cfg, grid_dir);
    std::cout << "grid over " << cfg.grid.size() << " combinations, " << data.records.size()
              << " records, split digest " << data.digest << "\n";

    GridArtifacts art;
    art.out_dir = grid_dir;
    std::vector<TableEntry> entries;
    for (const auto& [bb, tx] : cfg.grid) {
        GridCell cell;
        cell.backbone = bb;
        cell.text = tx;
        RunConfig cell_cfg = cfg;
        cell_cfg.grid.clear();
        try {
            BackboneSpec base = cfg.model.backbone;
            cell_cfg.model.backbone = BackboneSpec::from_tag(bb);
            cell_cfg.model.backbone.input_size = base.input_size;
            cell_cfg.model.backbone.channels = base.channels;
            cell_cfg.model.backbone.feature_dim = base.feature_dim;
            cell_cfg.model.backbone.base_width = base.base_width;
            cell_cfg.model.backbone.vit_patch = base.vit_patch;
            cell_cfg.model.backbone.vit_dim = base.vit_dim;
            cell_cfg.model.backbone.vit_heads = base.vit_heads;
            cell_cfg.model.backbone.vit_layers = base.vit_layers;
            TextEncoderSpec tbase = cfg.model.text;
            cell_cfg.model.text = TextEncoderSpec::from_tag(tx);
            cell_cfg.model.text.hidden_dim = tbase.hidden_dim;
            cell_cfg.model.text.feature_dim = tbase.feature_dim;
            cell_cfg.out_dir = grid_dir / (bb + "_" + tx);

            TrainArtifacts run = run_one(cell_cfg, data, cell_cfg.out_dir);
            cell.ok = true;
            cell.best = run.result.best_val;
            cell.split_digest = run.split_digest;
            entries.push_back({pretty_combo(bb, tx), "ANN", cell.best});
            std::cout << "  [done] " << pretty_combo(bb, tx) << "  acc " << format_metric(cell.best.accuracy)
                      << "  auc " << format_metric(cell.best.auc) << "\n";
        } catch (const std::exception& e) {
            cell.error = e.what();
            std::cerr << "  [failed, skipped] " << pretty_combo(bb, tx) << ": " << e.what() << "\n";
        }
        art.cells.push_back(std::move(cell));
    }
    if (!entries.empty()) {
        art.table_text = report_table(entries);
        write_text(grid_dir / "table.txt", art.table_text);
        write_text(grid_dir / "table.tsv", report_table_tsv(entries));
        std::cout << art.table_text;
    }
    return art;
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"multimodal mammogram + report late-fusion classification pipeline"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "write a synthetic dataset to disk");
    int64_t gen_n = 200;
    uint64_t gen_seed = 7;
    int gen_size = 64;
    std::string gen_out = "data/synthetic";
    gen->add_option("--n", gen_n, "record count (even)");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--size", gen_size, "image side length");
    gen->add_option("--out", gen_out, "output directory")->required();

    // shared train/grid options
    std::string config_path;
    std::string out_override, backbone_override, text_override;
    int epochs_override = -1, batch_override = -1;
    double lr_override = -1;
    int64_t seed_override = -1;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run config JSON")->required();
        cmd->add_option("--out", out_override, "override output directory");
        cmd->add_option("--epochs", epochs_override, "override epoch count");
        cmd->add_option("--batch-size", batch_override, "override batch size");
        cmd->add_option("--lr", lr_override, "override learning rate");
        cmd->add_option("--seed", seed_override, "override training seed");
    };

    auto* train = app.add_subcommand("train", "run one training experiment");
    add_common(train);
    train->add_option("--backbone", backbone_override, "override backbone tag");
    train->add_option("--text", text_override, "override text encoder tag");

    auto* grid = app.add_subcommand("grid", "train every grid combination on a shared split");
    add_common(grid);

    auto* eval = app.add_subcommand("evaluate", "evaluate a checkpoint against a manifest");
    std::string eval_ckpt, eval_manifest, eval_out;
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    eval->add_option("--manifest", eval_manifest, "manifest file")->required();
    eval->add_option("--out", eval_out, "directory for metrics files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (gen->parsed()) {
            cmd_generate(gen_n, gen_seed, gen_size, resolve_out_dir(gen_out));
            return 0;
        }
        RunConfig cfg;
        if (train->parsed() || grid->parsed()) {
            cfg = RunConfig::from_file(config_path);
            if (!out_override.empty()) cfg.out_dir = out_override;
            if (epochs_override > 0) cfg.train.epochs = epochs_override;
            if (batch_override > 0) cfg.train.batch_size = batch_override;
            if (lr_override > 0) cfg.train.lr = lr_override;
            if (seed_override >= 0) cfg.train.seed = static_cast<uint64_t>(seed_override);
        }
        if (train->parsed()) {
            if (!backbone_override.empty()) {
                BackboneSpec base = cfg.model.backbone;
                cfg.model.backbone = BackboneSpec::from_tag(backbone_override);
                cfg.model.backbone.input_size = base.input_size;
                cfg.model.backbone.channels = base.channels;
                cfg.model.backbone.feature_dim = base.feature_dim;
                cfg.model.backbone.base_width = base.base_width;
                cfg.model.backbone.vit_patch = base.vit_patch;
                cfg.model.backbone.vit_dim = base.vit_dim;
                cfg.model.backbone.vit_heads = base.vit_heads;
                cfg.model.backbone.vit_layers = base.vit_layers;
            }
            if (!text_override.empty()) {
                TextEncoderSpec tbase = cfg.model.text;
                cfg.model.text = TextEncoderSpec::from_tag(text_override);
                cfg.model.text.hidden_dim = tbase.hidden_dim;
                cfg.model.text.feature_dim = tbase.feature_dim;
            }
            cmd_train(cfg);
            return 0;
        }
        if (grid->parsed()) {
            cmd_grid(cfg);
            return 0;
        }
        if (eval->parsed()) {
            std::optional<std::filesystem::path> out;
            if (!eval_out.empty()) out = resolve_out_dir(eval_out);
            cmd_evaluate(eval_ckpt, eval_manifest, out);
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 3;
    } catch (const ContractError& e) {
        std::cerr << "contract error: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    }
    return 0;
}

}  // namespace mmf
