#include <gtest/gtest.h>

#include <fstream>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>
#include <sstream>

#include "cli.hpp"
#include "support.hpp"
#include "tsccn/config_io.hpp"
#include "tsccn/engine.hpp"

namespace tsccn::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Outcome {
    int code = 0;
    std::string out;
    std::string err;
};

Outcome invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "tsccn");
    ::testing::internal::CaptureStdout();
    ::testing::internal::CaptureStderr();
    Outcome o;
    o.code = run(args);
    o.out = ::testing::internal::GetCapturedStdout();
    o.err = ::testing::internal::GetCapturedStderr();
    spdlog::set_level(spdlog::level::err);
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

// Dataset and a quick training config written once for the whole suite.
class CliFixture : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new testing::TempDir("cli");
        config::write_json_file(*dir_ / "gen.json", {{"n_patients", 5},
                                                     {"slices_per_patient", 1},
                                                     {"patch_side", 32},
                                                     {"class_ratio", {0.5, 0.25, 0.25}},
                                                     {"seed", 4}});
        auto cfg = engine::compact_train_config();
        cfg.epochs = 1;
        cfg.batch_size = 8;
        cfg.steps_per_epoch = 2;
        cfg.learning_rate = 1e-3;
        config::write_json_file(*dir_ / "train.json", config::to_json(cfg));
        ASSERT_EQ(invoke({"-q", "generate", "--config", (*dir_ / "gen.json").string(), "--out", data().string()}).code,
                  kExitOk);
    }
    static void TearDownTestSuite() {
        delete dir_;
        dir_ = nullptr;
    }
    static fs::path data() { return *dir_ / "data"; }
    static fs::path file(const std::string& name) { return *dir_ / name; }

    static testing::TempDir* dir_;
};

testing::TempDir* CliFixture::dir_ = nullptr;

TEST(CliUsage, UnknownSubcommandIsUsageError) {
    const auto r = invoke({"bogus"});
    EXPECT_EQ(r.code, kExitUsage);
    EXPECT_EQ(first_line(r.err), "error: usage: unknown subcommand 'bogus'");
    EXPECT_NE(r.err.find("generate"), std::string::npos);
}

TEST(CliUsage, MissingSubcommandAndBadFlags) {
    EXPECT_EQ(invoke({}).code, kExitUsage);
    const auto r = invoke({"generate", "--out", "x", "--frobnicate"});
    EXPECT_EQ(r.code, kExitUsage);
    EXPECT_EQ(r.err.rfind("error: usage: ", 0), 0u);
    EXPECT_EQ(invoke({"generate"}).code, kExitUsage);  // --out is required
    EXPECT_EQ(invoke({"ablate", "--out", "x", "--manifest", "m", "--repeats", "0"}).code, kExitUsage);
}

TEST(CliUsage, HelpExitsZero) {
    const auto r = invoke({"--help"});
    EXPECT_EQ(r.code, kExitOk);
    for (const char* sub : {"generate", "train", "eval", "ablate", "repair-masks", "visualize"})
        EXPECT_NE(r.out.find(sub), std::string::npos) << sub;
}

TEST_F(CliFixture, GenerateWritesDatasetMasksAndResolvedConfig) {
    EXPECT_TRUE(fs::exists(data() / "manifest.csv"));
    EXPECT_TRUE(fs::is_directory(data() / "images"));
    EXPECT_TRUE(fs::is_directory(data() / "masks"));
    EXPECT_TRUE(fs::is_directory(data() / "slices"));
    const auto manifest = data::load_manifest(data() / "manifest.csv");
    EXPECT_EQ(manifest.entries.size(), 40u);
    const auto resolved = config::read_json_file(data() / "resolved_config.json");
    EXPECT_EQ(resolved["seed"], 4);
    EXPECT_EQ(resolved["masks"]["deleted"], 1);
}

TEST_F(CliFixture, GenerateIsReproducibleFromResolvedConfig) {
    testing::TempDir again;
    ASSERT_EQ(invoke({"-q", "generate", "--config", (data() / "resolved_config.json").string(), "--out",
                      again.path().string()})
                  .code,
              kExitOk);
    EXPECT_EQ(slurp(again / "manifest.csv"), slurp(data() / "manifest.csv"));
    const auto first = data::load_manifest(data() / "manifest.csv");
    EXPECT_EQ(slurp(again / first.entries[3].image_path), slurp(data() / first.entries[3].image_path));
}

TEST_F(CliFixture, GenerateRejectsUnknownConfigKey) {
    config::write_json_file(file("bad.json"), {{"n_patient", 3}});
    testing::TempDir out;
    const auto r = invoke({"generate", "--config", file("bad.json").string(), "--out", out.path().string()});
    EXPECT_EQ(r.code, kExitRuntime);
    EXPECT_EQ(r.err.rfind("error: runtime: ", 0), 0u);
    EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST_F(CliFixture, TrainEvalVisualizeRoundTrip) {
    const auto manifest = (data() / "manifest.csv").string();
    const std::string before = slurp(manifest);
    testing::TempDir run_dir;
    const auto t = invoke({"-q", "train", "--config", file("train.json").string(), "--manifest", manifest, "--out",
                           run_dir.path().string(), "--seed", "3"});
    ASSERT_EQ(t.code, kExitOk) << t.err;
    EXPECT_EQ(t.out.rfind("best_epoch=", 0), 0u);
    for (const char* f : {"best.ckpt", "last.ckpt", "loss_curve.csv", "run_record.json", "split.json", "resolved_config.json"})
        EXPECT_TRUE(fs::exists(run_dir / f)) << f;
    EXPECT_EQ(config::read_json_file(run_dir / "resolved_config.json")["seed"], 3);
    EXPECT_EQ(slurp(manifest), before);

    testing::TempDir eval_dir;
    const auto e = invoke({"-q", "eval", "--checkpoint", (run_dir / "best.ckpt").string(), "--manifest", manifest,
                           "--out", eval_dir.path().string()});
    ASSERT_EQ(e.code, kExitOk) << e.err;
    const auto report = config::read_json_file(eval_dir / "metrics.json");
    EXPECT_EQ(report["samples"], 40);
    EXPECT_EQ(json::parse(e.out), report["macro"]);

    testing::TempDir vis_dir;
    const auto v = invoke({"-q", "visualize", "--checkpoint", (run_dir / "best.ckpt").string(), "--manifest", manifest,
                           "--out", vis_dir.path().string(), "--limit", "3"});
    ASSERT_EQ(v.code, kExitOk) << v.err;
    EXPECT_EQ(first_line(v.out), "cams=3 scatter_points=40");
}

TEST_F(CliFixture, TrainIsReproducibleFromResolvedConfig) {
    const auto manifest = (data() / "manifest.csv").string();
    testing::TempDir a, b;
    ASSERT_EQ(invoke({"-q", "train", "--config", file("train.json").string(), "--manifest", manifest, "--out",
                      a.path().string(), "--ablation", "two_stream"})
                  .code,
              kExitOk);
    ASSERT_EQ(invoke({"-q", "train", "--config", (a / "resolved_config.json").string(), "--manifest", manifest,
                      "--out", b.path().string()})
                  .code,
              kExitOk);
    const auto ra = config::read_json_file(a / "run_record.json");
    const auto rb = config::read_json_file(b / "run_record.json");
    EXPECT_EQ(ra["config"]["ablation"], "two_stream");
    EXPECT_EQ(ra["config_hash"], rb["config_hash"]);
    EXPECT_EQ(ra["epochs"][0]["train_total"], rb["epochs"][0]["train_total"]);
    EXPECT_EQ(slurp(a / "best.ckpt"), slurp(b / "best.ckpt"));
}

TEST_F(CliFixture, RuntimeErrorsAreSingleLineExitOne) {
    testing::TempDir out;
    std::ofstream(file("junk.ckpt")) << "junk";
    const auto manifest = (data() / "manifest.csv").string();
    const auto c = invoke({"eval", "--checkpoint", file("junk.ckpt").string(), "--manifest", manifest, "--out",
                           out.path().string()});
    EXPECT_EQ(c.code, kExitRuntime);
    EXPECT_EQ(c.err.rfind("error: checkpoint: ", 0), 0u);
    EXPECT_EQ(std::count(c.err.begin(), c.err.end(), '\n'), 1);

    const auto m = invoke({"train", "--manifest", file("nope.csv").string(), "--out", out.path().string()});
    EXPECT_EQ(m.code, kExitRuntime);
    EXPECT_EQ(m.err.rfind("error: manifest: ", 0), 0u);

    const auto a = invoke({"train", "--manifest", manifest, "--out", out.path().string(), "--ablation", "tsccn"});
    EXPECT_EQ(a.code, kExitRuntime);
    EXPECT_NE(a.err.find("unknown ablation"), std::string::npos);

    const auto r = invoke({"repair-masks", "--masks", file("no_masks").string(), "--out", out.path().string()});
    EXPECT_EQ(r.code, kExitRuntime);
}

TEST_F(CliFixture, RepairMasksWritesMasksPatchesAndLog) {
    testing::TempDir out;
    config::write_json_file(file("repair.json"), {{"patch_side", 24}});
    const auto r = invoke({"-q", "repair-masks", "--masks", (data() / "masks").string(), "--slices",
                           (data() / "slices").string(), "--config", file("repair.json").string(), "--out",
                           out.path().string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto log = config::read_json_file(out / "repair_log.json");
    EXPECT_EQ(log.size(), 5u);
    for (const auto& [name, entry] : log.items()) {
        EXPECT_EQ(entry["components_out"], 8) << name;
        EXPECT_EQ(entry["removed"].size(), 1u) << name;
        EXPECT_EQ(entry["synthesized"].size(), 2u) << name;
        EXPECT_TRUE(fs::exists(out / "masks" / name));
        EXPECT_TRUE(fs::exists(out / "patches" / fs::path(name).stem() / "vertebra_7.pgm"));
    }
}

TEST_F(CliFixture, AblateEmitsSixRows) {
    testing::TempDir out;
    const auto r = invoke({"-q", "ablate", "--config", file("train.json").string(), "--manifest",
                           (data() / "manifest.csv").string(), "--out", out.path().string(), "--repeats", "1"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto rows = config::read_json_file(out / "ablation.json");
    ASSERT_EQ(rows.size(), 6u);
    for (const auto& row : rows)
        for (const char* k : {"aSE", "aSP", "aAUC", "mAP"}) EXPECT_TRUE(row.contains(k)) << k;
    EXPECT_EQ(slurp(out / "ablation_table.txt"), r.out);
}

}  // namespace
}  // namespace tsccn::cli
