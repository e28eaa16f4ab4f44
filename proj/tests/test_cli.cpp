#include <gtest/gtest.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "evoaug/augtree.hpp"
#include "evoaug/cli.hpp"
#include "evoaug/evolution.hpp"
#include "evoaug/raster.hpp"
#include "support/test_util.hpp"

using namespace evoaug;
using evoaug::testing::fake_worker_command;
using evoaug::testing::slurp;
using evoaug::testing::spit;
using evoaug::testing::TempDir;

namespace {

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult cli(std::vector<std::string> args) {
    args.insert(args.begin(), "evoaug");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

const std::string kQuickConfig = R"(
seed = 3
[dataset]
classes = 4
shots = 1
image_size = 12
[fitness]
kind = "clustering"
[evolution]
population_size = 6
generations = 2
children_per_gen = 4
crossovers_per_gen = 2
[embedding]
target_size = 4
[operators]
searchable = ["NoOp", "Classical", "noise"]
[[operators.mock]]
name = "noise"
behavior = "gaussian_noise"
sigma = 20.0
)";

void write_images(const std::filesystem::path& root, int n) {
    for (int i = 0; i < n; ++i) {
        const auto dir = root / (i % 2 ? "odd" : "even");
        std::filesystem::create_directories(dir);
        RasterImage img(5, 4, 3);
        for (auto& v : img.mutable_data()) v = static_cast<std::uint8_t>(i * 20 + 7);
        save_image(img, dir / ("img" + std::to_string(i) + ".png"));
    }
}

}  // namespace

TEST(Cli, Version) {
    const auto r = cli({"version"});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "evoaug 0.1.0\n");
}

TEST(Cli, UsageErrorsExitOne) {
    EXPECT_EQ(cli({}).code, 1);
    EXPECT_EQ(cli({"frobnicate"}).code, 1);
    EXPECT_EQ(cli({"evolve"}).code, 1);
    const auto r = cli({"evolve", "--config", "/no/such/config.toml"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("error:"), std::string::npos);
}

TEST(Cli, EvolveWritesArtifactsDeterministically) {
    TempDir tmp;
    spit(tmp / "run.toml", kQuickConfig);
    const auto a = cli({"evolve", "--config", (tmp / "run.toml").string(), "--out", (tmp / "a").string()});
    ASSERT_EQ(a.code, 0) << a.err;
    const auto b = cli({"evolve", "--config", (tmp / "run.toml").string(), "--out", (tmp / "b").string(), "--jobs", "2"});
    ASSERT_EQ(b.code, 0) << b.err;
    for (const char* f : {"best_tree.txt", "trace.csv", "summary.json"}) EXPECT_TRUE(std::filesystem::exists(tmp / "a" / f));
    EXPECT_EQ(slurp(tmp / "a" / "trace.csv"), slurp(tmp / "b" / "trace.csv"));

    // Every artifact is re-readable.
    const auto best = parse_tree(slurp(tmp / "a" / "best_tree.txt"));
    EXPECT_EQ(canonical_text(best) + "\n", slurp(tmp / "a" / "best_tree.txt"));
    const auto trace = EvolutionTrace::from_csv(slurp(tmp / "a" / "trace.csv"));
    EXPECT_FALSE(trace.rows.empty());
    const auto summary = nlohmann::json::parse(slurp(tmp / "a" / "summary.json"));
    EXPECT_EQ(summary["best_tree"], canonical_text(best));
    EXPECT_EQ(summary["seed"], 3);

    const auto c = cli({"evolve", "--config", (tmp / "run.toml").string(), "--out", (tmp / "c").string(), "--seed", "4"});
    ASSERT_EQ(c.code, 0);
    EXPECT_NE(slurp(tmp / "a" / "trace.csv"), slurp(tmp / "c" / "trace.csv"));
}

TEST(Cli, SingleFoldConfigRejected) {
    TempDir tmp;
    spit(tmp / "k1.toml", "[dataset]\nshots = 2\n[fitness]\nkind = \"kfold\"\nfolds = 1\n");
    const auto r = cli({"evolve", "--config", (tmp / "k1.toml").string(), "--out", (tmp / "o").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("fold count k must be at least 2"), std::string::npos);
    EXPECT_FALSE(std::filesystem::exists(tmp / "o" / "trace.csv"));
}

TEST(Cli, ApplyNoOpCopiesAreIdentical) {
    TempDir tmp;
    write_images(tmp / "data", 4);
    spit(tmp / "noop.txt", "(None, 0.5, None, 0.5, None)\n");
    const auto r = cli({"apply", "--tree", (tmp / "noop.txt").string(), "--dataset", (tmp / "data").string(),
                        "--out", (tmp / "out").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto manifest = slurp(tmp / "out" / "manifest.jsonl");
    std::istringstream lines(manifest);
    std::string line;
    int rows = 0;
    while (std::getline(lines, line)) {
        const auto j = nlohmann::json::parse(line);
        const std::string id = j["id"];
        const auto src_id = id.substr(0, id.rfind("_aug"));
        EXPECT_EQ(load_image(tmp / "out" / j["path"].get<std::string>()), load_image(tmp / "data" / (src_id + ".png")));
        ++rows;
    }
    EXPECT_EQ(rows, 8);
    // The manifest is itself a loadable dataset.
    EXPECT_EQ(load_dataset(tmp / "out" / "manifest.jsonl").size(), 8u);
}

TEST(Cli, ApplyMultiplierCounts) {
    TempDir tmp;
    write_images(tmp / "data", 10);
    spit(tmp / "t.txt", "(Classical, 0.5, noise, 0.5, None)");
    const auto r = cli({"apply", "--tree", (tmp / "t.txt").string(), "--dataset", (tmp / "data").string(), "--out",
                        (tmp / "out").string(), "--multiplier", "5", "--mock", "noise=gaussian_noise:10"});
    ASSERT_EQ(r.code, 0) << r.err;
    int pngs = 0;
    for (const auto& e : std::filesystem::recursive_directory_iterator(tmp / "out"))
        pngs += e.path().extension() == ".png";
    EXPECT_EQ(pngs, 50);
    const auto manifest = slurp(tmp / "out" / "manifest.jsonl");
    EXPECT_EQ(std::count(manifest.begin(), manifest.end(), '\n'), 50);
}

TEST(Cli, ApplyFailures) {
    TempDir tmp;
    write_images(tmp / "data", 2);
    EXPECT_EQ(cli({"apply", "--tree", (tmp / "missing.txt").string(), "--dataset", (tmp / "data").string(), "--out",
                   (tmp / "o").string()}).code, 1);
    spit(tmp / "bad.txt", "(Color, 0.5, NeRF)");
    EXPECT_EQ(cli({"apply", "--tree", (tmp / "bad.txt").string(), "--dataset", (tmp / "data").string(), "--out",
                   (tmp / "o").string()}).code, 1);
    spit(tmp / "canny.txt", "Canny");  // no worker configured
    EXPECT_EQ(cli({"apply", "--tree", (tmp / "canny.txt").string(), "--dataset", (tmp / "data").string(), "--out",
                   (tmp / "o").string()}).code, 1);
}

TEST(Cli, ApplyIdealTreeThroughFakeWorker) {
    TempDir tmp;
    write_images(tmp / "data", 3);
    spit(tmp / "ideal.txt", "(Color, 0.5, NeRF, 0.5, None)\n");
    ::setenv("EVOAUG_WORKER", fake_worker_command().c_str(), 1);
    const auto r = cli({"apply", "--tree", (tmp / "ideal.txt").string(), "--dataset", (tmp / "data").string(), "--out",
                        (tmp / "out").string(), "--jobs", "2"});
    ::unsetenv("EVOAUG_WORKER");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto d = load_dataset(tmp / "out" / "manifest.jsonl");
    EXPECT_EQ(d.size(), 6u);
    for (const auto& it : d.items()) EXPECT_EQ(it.image.width(), 5);
}

TEST(Cli, ScoreReports) {
    TempDir tmp;
    spit(tmp / "run.toml", kQuickConfig + "\n[fitness.classifier]\nepochs = 5\n");
    spit(tmp / "noop.txt", "(None, 0.5, None, 0.5, None)");
    spit(tmp / "ideal.txt", "(Color, 0.5, NeRF, 0.5, None)");

    // Weights (1, 0) on the all-NoOp tree: duplicates give silhouette 1.
    std::string cfg = kQuickConfig;
    cfg.replace(cfg.find("kind = \"clustering\""), 19, "kind = \"clustering\"\nw_s = 1.0\nw_d = 0.0");
    spit(tmp / "s_only.toml", cfg);
    const auto r = cli({"score", "--config", (tmp / "s_only.toml").string(), "--tree", (tmp / "noop.txt").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_DOUBLE_EQ(j["diagnostics"]["silhouette"].get<double>(), 1.0);
    EXPECT_EQ(j["tree"], "(None, 0.500000, None, 0.500000, None)");

    // The handcrafted Color/NeRF tree, with mocks standing in for both.
    std::string mocked = kQuickConfig + R"(
[[operators.mock]]
name = "Color"
behavior = "invert"
[[operators.mock]]
name = "NeRF"
behavior = "channel_shuffle"
)";
    spit(tmp / "mocked.toml", mocked);
    const auto s = cli({"score", "--config", (tmp / "mocked.toml").string(), "--tree", (tmp / "ideal.txt").string()});
    ASSERT_EQ(s.code, 0) << s.err;
    const auto report = nlohmann::json::parse(s.out);
    EXPECT_TRUE(report.contains("score"));
    EXPECT_TRUE(report["diagnostics"].contains("mean_radius"));

    EXPECT_EQ(cli({"score", "--config", (tmp / "run.toml").string(), "--tree", (tmp / "nope.txt").string()}).code, 1);
}

TEST(Cli, FoldsCommand) {
    TempDir tmp;
    spit(tmp / "run.toml", "[dataset]\nclasses = 3\nshots = 4\n");
    const auto r = cli({"folds", "--config", (tmp / "run.toml").string(), "--k", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["k"], 2);
    EXPECT_EQ(j["folds"].size(), 2u);
    EXPECT_EQ(j["folds"][0].size(), 6u);
    const auto dflt = nlohmann::json::parse(cli({"folds", "--config", (tmp / "run.toml").string()}).out);
    EXPECT_EQ(dflt["k"], 4);
    EXPECT_EQ(cli({"folds", "--config", (tmp / "run.toml").string(), "--k", "1"}).code, 1);
}

TEST(Cli, BinaryRunsAsSubprocess) {
    const auto cmd = std::string(EVOAUG_CLI) + " version > /dev/null";
    EXPECT_EQ(std::system(cmd.c_str()), 0);
    const auto bad = std::string(EVOAUG_CLI) + " score --config /nonexistent.toml --tree x 2> /dev/null";
    EXPECT_NE(std::system(bad.c_str()), 0);
}
