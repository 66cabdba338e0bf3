#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <spdlog/spdlog.h>

#include "tsccn/config_io.hpp"
#include "tsccn/engine.hpp"
#include "tsccn/error.hpp"
#include "tsccn/maskrepair.hpp"
#include "tsccn/synthgen.hpp"

namespace tsccn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string checkpoint;
    std::string manifest;
    bool paper_literal = false;
    std::string ablation;
    int repeats = 1;
    std::string masks;
    std::string slices;
    std::size_t limit = 0;
    int verbosity = 0;
    bool quiet = false;
};

json load_config(const Options& o) { return o.config.empty() ? json::object() : config::read_json_file(o.config); }

void write_resolved(const Options& o, const json& resolved) {
    config::write_json_file(fs::path(o.out) / "resolved_config.json", resolved);
}

engine::TrainConfig resolve_train_config(const Options& o) {
    json j = load_config(o);
    if (o.seed) j["seed"] = *o.seed;
    if (!o.ablation.empty()) j["ablation"] = o.ablation;
    if (o.paper_literal) j["weights"]["paper_literal_weight_loss"] = true;
    return config::train_config_from_json(j);
}

data::DatasetManifest require_manifest(const Options& o) {
    if (o.manifest.empty()) throw InvalidArgument("--manifest is required");
    return data::load_manifest(o.manifest);
}

// ---- subcommands ------------------------------------------------------------

int cmd_generate(const Options& o) {
    json j = load_config(o);
    synth::MaskCorruption corruption;
    int n_deleted = 1, n_shrunk = 1;
    if (auto it = j.find("masks"); it != j.end()) {
        const json m = *it;
        for (const auto& [key, value] : m.items())
            if (key != "deleted" && key != "shrunk" && key != "shrink_factor")
                throw InvalidArgument("masks config: unknown key '" + key + "'");
        n_deleted = m.value("deleted", n_deleted);
        n_shrunk = m.value("shrunk", n_shrunk);
        corruption.shrink_factor = m.value("shrink_factor", corruption.shrink_factor);
        j.erase("masks");
    }
    if (o.seed) j["seed"] = *o.seed;
    const synth::SynthConfig cfg = config::synth_config_from_json(j);
    if (n_deleted < 0 || n_shrunk < 0) throw InvalidArgument("masks config: counts must be nonnegative");

    const auto picks = n_deleted + n_shrunk > 0
                           ? synth::pick_nonadjacent_interior(cfg.vertebrae_per_slice, n_deleted + n_shrunk, cfg.seed)
                           : std::vector<int>{};
    corruption.deleted.assign(picks.begin(), picks.begin() + n_deleted);
    corruption.shrunk.assign(picks.begin() + n_deleted, picks.end());

    const fs::path out(o.out);
    const synth::SynthDataset ds = synth::generate(cfg);
    synth::write_dataset(ds, out);
    synth::write_mask_fixtures(synth::generate_masks(cfg, corruption), out);

    json resolved = config::to_json(cfg);
    resolved["masks"] = {{"deleted", n_deleted}, {"shrunk", n_shrunk}, {"shrink_factor", corruption.shrink_factor}};
    write_resolved(o, resolved);
    spdlog::info("wrote {} patches ({} sequences) to {}", ds.manifest.entries.size(), ds.sequences.size(), out.string());
    return kExitOk;
}

int cmd_train(const Options& o) {
    const engine::TrainConfig cfg = resolve_train_config(o);
    const data::DatasetManifest manifest = require_manifest(o);
    const fs::path out(o.out);
    write_resolved(o, config::to_json(cfg));

    const engine::TripletDataset all = engine::TripletDataset::from_manifest(manifest, cfg.image_size);
    const engine::PatientSplit split = engine::split_by_patient(manifest.patient_ids(), cfg.seed);
    config::write_json_file(out / "split.json", {{"train", split.train}, {"val", split.val}, {"test", split.test}});
    const engine::TripletDataset tr = all.subset(split.train);
    const engine::TripletDataset va = all.subset(split.val);

    engine::TrainOptions opts;
    opts.out_dir = out;
    engine::TrainResult res = engine::train(cfg, tr, va.size() > 0 ? &va : nullptr, opts);
    if (va.size() > 0) {
        const engine::EvalResult vr = engine::evaluate_model(*res.best, va, cfg.weights, cfg.batch_size);
        config::write_json_file(out / "val_metrics.json", metrics::to_json(vr.metrics, vr.state));
    }
    std::cout << "best_epoch=" << res.record.best_epoch << " best_val_aSE=" << res.record.best_val_aSE
              << " checkpoint=" << (out / "best.ckpt").string() << '\n';
    return kExitOk;
}

int cmd_eval(const Options& o) {
    if (o.checkpoint.empty()) throw InvalidArgument("--checkpoint is required");
    const data::DatasetManifest manifest = require_manifest(o);
    write_resolved(o, {{"checkpoint", o.checkpoint}, {"manifest", o.manifest}});
    const json report = engine::evaluate_checkpoint(o.checkpoint, manifest);
    config::write_json_file(fs::path(o.out) / "metrics.json", report);
    std::cout << report["macro"].dump() << '\n';
    return kExitOk;
}

int cmd_ablate(const Options& o) {
    const engine::TrainConfig cfg = resolve_train_config(o);
    const data::DatasetManifest manifest = require_manifest(o);
    if (o.repeats < 1) throw InvalidArgument("--repeats must be positive");
    const fs::path out(o.out);
    json resolved = config::to_json(cfg);
    write_resolved(o, resolved);

    const engine::TripletDataset all = engine::TripletDataset::from_manifest(manifest, cfg.image_size);
    const auto rows = engine::run_ablation(cfg, all, o.repeats, out);
    const std::string table = engine::format_ablation_table(rows);
    std::ofstream(out / "ablation_table.txt") << table;
    json j = json::array();
    for (const auto& r : rows)
        j.push_back({{"configuration", std::string(net::to_string(r.ablation))},
                     {"aSE", r.mean[0]},
                     {"aSP", r.mean[1]},
                     {"aAUC", r.mean[2]},
                     {"mAP", r.mean[3]},
                     {"std", r.stddev},
                     {"repeats", r.runs.size()}});
    config::write_json_file(out / "ablation.json", j);
    std::cout << table;
    return kExitOk;
}

int cmd_repair(const Options& o) {
    if (!fs::is_directory(o.masks)) throw IoError("mask directory not found: " + o.masks);
    json j = load_config(o);
    for (const auto& [key, value] : j.items())
        if (key != "area_threshold_fraction" && key != "gap_factor" && key != "margin_fraction" && key != "patch_side")
            throw InvalidArgument("repair config: unknown key '" + key + "'");
    repair::RepairOptions ro;
    ro.area_threshold_fraction = j.value("area_threshold_fraction", ro.area_threshold_fraction);
    ro.gap_factor = j.value("gap_factor", ro.gap_factor);
    const double margin = j.value("margin_fraction", 0.2);
    const int side = j.value("patch_side", data::kDefaultPatchSide);
    const fs::path out(o.out);
    write_resolved(o, {{"area_threshold_fraction", ro.area_threshold_fraction},
                       {"gap_factor", ro.gap_factor},
                       {"margin_fraction", margin},
                       {"patch_side", side}});

    std::vector<fs::path> inputs;
    for (const auto& e : fs::directory_iterator(o.masks))
        if (e.path().extension() == ".pgm") inputs.push_back(e.path());
    std::sort(inputs.begin(), inputs.end());
    if (inputs.empty()) throw IoError("no .pgm masks in " + o.masks);

    fs::create_directories(out / "masks");
    json log = json::object();
    for (const auto& path : inputs) {
        const BinaryMask mask = mask_from_image(read_pgm(path));
        const repair::RepairResult r = repair::repair(mask, ro);
        write_pgm(out / "masks" / path.filename(), image_from_mask(r.repaired.mask));
        log[path.filename().string()] = r.log();
        if (!o.slices.empty()) {
            const fs::path slice_path = fs::path(o.slices) / path.filename();
            const Image slice = read_pgm(slice_path);
            const auto patches = repair::crop_patches(slice, r.repaired, margin, side);
            const fs::path dir = out / "patches" / path.stem();
            fs::create_directories(dir);
            for (std::size_t i = 0; i < patches.size(); ++i)
                write_pgm(dir / ("vertebra_" + std::to_string(i) + ".pgm"), patches[i], 16);
        }
    }
    config::write_json_file(out / "repair_log.json", log);
    spdlog::info("repaired {} masks into {}", inputs.size(), out.string());
    return kExitOk;
}

int cmd_visualize(const Options& o) {
    if (o.checkpoint.empty()) throw InvalidArgument("--checkpoint is required");
    const data::DatasetManifest manifest = require_manifest(o);
    write_resolved(o, {{"checkpoint", o.checkpoint}, {"manifest", o.manifest}, {"limit", o.limit}});
    engine::TrainConfig cfg;
    auto model = engine::load_model(o.checkpoint, &cfg);
    const engine::TripletDataset ds = engine::TripletDataset::from_manifest(manifest, cfg.image_size);
    const auto summary = engine::emit_visualizations(*model, ds, o.out, o.limit);
    std::cout << "cams=" << summary.cams << " scatter_points=" << summary.scatter_points << '\n';
    return kExitOk;
}

void configure_logging(const Options& o) {
    if (o.quiet)
        spdlog::set_level(spdlog::level::warn);
    else if (o.verbosity > 0)
        spdlog::set_level(spdlog::level::debug);
    else
        spdlog::set_level(spdlog::level::info);
}

std::string one_line(std::string s) {
    for (char& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    return s;
}

}  // namespace

int run(const std::vector<std::string>& argv) {
    Options o;
    CLI::App app{"Two-stream compare-and-contrast vertebra classifier", argv.empty() ? "tsccn" : argv.front()};
    app.require_subcommand(1);
    app.add_flag("-v,--verbose", o.verbosity, "More logging");
    app.add_flag("-q,--quiet", o.quiet, "Only warnings and errors");

    auto add_out = [&](CLI::App* sub) { sub->add_option("--out", o.out, "Output directory")->required(); };
    auto add_config = [&](CLI::App* sub) { sub->add_option("--config", o.config, "JSON config file"); };
    auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", o.seed, "Seed override"); };

    CLI::App* gen = app.add_subcommand("generate", "Write a synthetic dataset and mask fixtures");
    add_config(gen);
    add_out(gen);
    add_seed(gen);

    auto add_train_flags = [&](CLI::App* sub) {
        add_config(sub);
        add_out(sub);
        add_seed(sub);
        sub->add_option("--manifest", o.manifest, "Dataset manifest")->required();
        sub->add_flag("--paper-literal-weight-loss", o.paper_literal, "Use the literal second branch of the weight loss");
    };
    CLI::App* train = app.add_subcommand("train", "Train one configuration");
    add_train_flags(train);
    train->add_option("--ablation", o.ablation, "Ablation configuration");

    CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest");
    eval->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
    eval->add_option("--manifest", o.manifest, "Dataset manifest")->required();
    add_out(eval);

    CLI::App* ablate = app.add_subcommand("ablate", "Train and compare all six configurations");
    add_train_flags(ablate);
    ablate->add_option("--repeats", o.repeats, "Repeats per configuration")->check(CLI::PositiveNumber);

    CLI::App* rep = app.add_subcommand("repair-masks", "Remove small components and fill missing vertebrae");
    rep->add_option("--masks", o.masks, "Directory of mask PGMs")->required();
    rep->add_option("--slices", o.slices, "Directory of slice PGMs with matching names (enables cropping)");
    add_config(rep);
    add_out(rep);

    CLI::App* vis = app.add_subcommand("visualize", "Write class activation maps and a feature scatter");
    vis->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
    vis->add_option("--manifest", o.manifest, "Dataset manifest")->required();
    vis->add_option("--limit", o.limit, "Maximum number of maps (0 = all)");
    add_out(vis);

    if (argv.size() > 1 && !argv[1].empty() && argv[1][0] != '-' && app.get_subcommand_no_throw(argv[1]) == nullptr) {
        std::cerr << "error: usage: unknown subcommand '" << one_line(argv[1]) << "'\n";
        std::cerr << app.help();
        return kExitUsage;
    }
    try {
        std::vector<std::string> args(argv.size() > 1 ? argv.begin() + 1 : argv.end(), argv.end());
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << one_line(e.what()) << '\n';
        std::cerr << app.help();
        return kExitUsage;
    }

    configure_logging(o);
    try {
        if (*gen) return cmd_generate(o);
        if (*train) return cmd_train(o);
        if (*eval) return cmd_eval(o);
        if (*ablate) return cmd_ablate(o);
        if (*rep) return cmd_repair(o);
        if (*vis) return cmd_visualize(o);
    } catch (const ManifestError& e) {
        std::cerr << "error: manifest: " << one_line(e.what()) << '\n';
        return kExitRuntime;
    } catch (const CheckpointError& e) {
        std::cerr << "error: checkpoint: " << one_line(e.what()) << '\n';
        return kExitRuntime;
    } catch (const DivergenceError& e) {
        std::cerr << "error: divergence: " << one_line(e.what()) << '\n';
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: runtime: " << one_line(e.what()) << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

int run(int argc, char** argv) { return run(std::vector<std::string>(argv, argv + argc)); }

}  // namespace tsccn::cli
