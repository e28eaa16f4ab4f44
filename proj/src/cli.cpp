#include "evoaug/cli.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "evoaug/config.hpp"
#include "evoaug/errors.hpp"

namespace evoaug {

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::string out;
};

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + p.string());
    out << text;
    if (!out) throw IoError("failed writing " + p.string());
}

RunConfig load_with_overrides(const CommonFlags& f) {
    auto cfg = load_run_config(f.config);
    if (f.seed) cfg.set_seed(*f.seed);
    if (f.jobs) {
        if (*f.jobs < 1) throw ConfigError("--jobs must be at least 1");
        cfg.evolution.jobs = *f.jobs;
    }
    apply_worker_env(cfg);
    if (f.jobs && cfg.worker) cfg.worker->remote.max_in_flight = std::min(cfg.worker->remote.max_in_flight, *f.jobs);
    if (!f.out.empty()) cfg.output_dir = f.out;
    return cfg;
}

AugmentationTree read_tree(const fs::path& p, int max_depth) {
    std::error_code ec;
    if (!fs::is_regular_file(p, ec)) throw IoError("tree file not found: " + p.string());
    return parse_tree_any(read_text(p), TreeLimits{max_depth});
}

int cmd_evolve(const CommonFlags& f, std::ostream& out) {
    auto session = open_session(load_with_overrides(f));
    const auto& cfg = session.config;
    const auto result = run(cfg.evolution, session.fitness, session.context);

    fs::create_directories(cfg.output_dir);
    write_text(cfg.output_dir / "best_tree.txt", result.best.text + "\n");
    result.trace.write_csv(cfg.output_dir / "trace.csv");
    auto summary = run_summary(result, cfg.evolution);
    summary["fitness"] = fitness_kind_name(cfg.fitness);
    summary["seed"] = cfg.seed;
    write_text(cfg.output_dir / "summary.json", summary.dump(2) + "\n");
    out << result.best.text << '\n';
    return 0;
}

int cmd_score(const CommonFlags& f, const std::string& tree_path, std::ostream& out) {
    auto session = open_session(load_with_overrides(f));
    const auto tree = read_tree(tree_path, session.config.evolution.max_depth);
    validate_tree(tree, TreeLimits{session.config.evolution.max_depth}, session.context.registry.get());
    const auto report = session.fitness(tree, session.context);
    auto j = report.to_json();
    j["tree"] = canonical_text(tree);
    j["fitness"] = fitness_kind_name(session.config.fitness);
    out << j.dump(2) << '\n';
    return 0;
}

int cmd_folds(const CommonFlags& f, int k, std::ostream& out) {
    auto cfg = load_with_overrides(f);
    auto data = load_source(cfg.dataset);
    if (cfg.fewshot) {
        // Same selection as open_session when no baseline search is needed.
        if (cfg.fewshot->trials > 1) {
            data = open_session(cfg).context.dataset;
        } else {
            auto rng = RandomStream(cfg.seed).derive("fewshot");
            data = sample_fewshot(data, cfg.fewshot->n_way, cfg.fewshot->k_shot, rng);
        }
    }
    if (k == 0) k = cfg.folds > 0 ? cfg.folds : static_cast<int>(data.min_class_count());
    auto rng = RandomStream(cfg.seed).derive("folds");
    const auto plan = stratified_folds(data, k, rng);
    nlohmann::json j;
    j["k"] = plan.k;
    j["folds"] = nlohmann::json::array();
    for (int i = 0; i < plan.k; ++i) {
        auto ids = nlohmann::json::array();
        for (auto idx : plan.fold(i)) ids.push_back(data.item(idx).id);
        j["folds"].push_back(ids);
    }
    out << j.dump(2) << '\n';
    return 0;
}

struct ApplyFlags {
    std::string tree;
    std::string dataset;
    int multiplier = 2;
    std::vector<std::string> mocks;
};

MockSpec parse_mock_flag(const std::string& s) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--mock expects name=behavior[:sigma], got " + s);
    const auto name = s.substr(0, eq);
    auto rest = s.substr(eq + 1);
    double sigma = 0.0;
    if (const auto colon = rest.find(':'); colon != std::string::npos) {
        try {
            sigma = std::stod(rest.substr(colon + 1));
        } catch (const std::exception&) {
            throw ConfigError("--mock: bad sigma in " + s);
        }
        rest = rest.substr(0, colon);
    }
    return {name, MockBehavior::parse(rest, sigma)};
}

int cmd_apply(const CommonFlags& f, const ApplyFlags& a, std::ostream& out) {
    RunConfig cfg;
    if (!f.config.empty()) {
        cfg = load_with_overrides(f);
    } else {
        if (f.seed) cfg.set_seed(*f.seed);
        apply_worker_env(cfg);
        if (!f.out.empty()) cfg.output_dir = f.out;
    }
    if (f.out.empty() && f.config.empty()) throw ConfigError("apply needs --out");
    if (a.multiplier < 1) throw ConfigError("--multiplier must be at least 1");
    for (const auto& m : a.mocks) cfg.mocks.push_back(parse_mock_flag(m));

    const auto ops = build_operators(cfg);
    const auto tree = read_tree(a.tree, std::max(cfg.evolution.max_depth, kDefaultMaxDepth));
    validate_tree(tree, TreeLimits{std::max(cfg.evolution.max_depth, tree.depth())}, ops.registry.get());

    LabeledDataset data;
    if (!a.dataset.empty())
        data = load_dataset(a.dataset);
    else if (!f.config.empty())
        data = load_source(cfg.dataset);
    else
        throw ConfigError("apply needs --dataset");

    FitnessContext ctx;
    ctx.registry = ops.registry;
    ctx.augment_multiplier = a.multiplier;
    ctx.seed = cfg.seed;
    const auto copies = augment_items(tree, data.items(), ctx);

    fs::create_directories(cfg.output_dir);
    std::ostringstream manifest;
    for (const auto& c : copies) {
        const fs::path rel = c.id + ".png";
        const auto dest = cfg.output_dir / rel;
        fs::create_directories(dest.parent_path());
        save_image(c.image, dest);
        nlohmann::json row;
        row["id"] = c.id;
        row["path"] = rel.generic_string();
        row["label"] = data.class_names()[static_cast<std::size_t>(c.label)];
        manifest << row.dump() << '\n';
    }
    write_text(cfg.output_dir / "manifest.jsonl", manifest.str());
    out << "wrote " << copies.size() << " images to " << cfg.output_dir.string() << '\n';
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Evolutionary search over stochastic augmentation trees", "evoaug"};
    app.require_subcommand(1);

    CommonFlags flags;
    ApplyFlags apply;
    std::string tree_path;
    int fold_k = 0;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* c = sub->add_option("--config", flags.config, "TOML run configuration");
        if (config_required) c->required();
        sub->add_option("--seed", flags.seed, "override the config seed");
        sub->add_option("--jobs", flags.jobs, "maximum concurrent evaluations and worker requests");
        sub->add_option("--out", flags.out, "output directory");
    };

    auto* evolve = app.add_subcommand("evolve", "run the evolutionary search");
    add_common(evolve, true);

    auto* apply_cmd = app.add_subcommand("apply", "augment a dataset with a tree");
    add_common(apply_cmd, false);
    apply_cmd->add_option("--tree", apply.tree, "tree file (text or JSON)")->required();
    apply_cmd->add_option("--dataset", apply.dataset, "manifest or class-per-directory root");
    apply_cmd->add_option("--multiplier", apply.multiplier, "augmented copies per image");
    apply_cmd->add_option("--mock", apply.mocks, "extra mock operator name=behavior[:sigma]");

    auto* score = app.add_subcommand("score", "evaluate one tree with the configured fitness");
    add_common(score, true);
    score->add_option("--tree", tree_path, "tree file (text or JSON)")->required();

    auto* folds = app.add_subcommand("folds", "print the stratified fold plan");
    add_common(folds, true);
    folds->add_option("--k", fold_k, "fold count (default: config or smallest class size)");

    auto* version = app.add_subcommand("version", "print the version");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }

    try {
        if (evolve->parsed()) return cmd_evolve(flags, out);
        if (apply_cmd->parsed()) return cmd_apply(flags, apply, out);
        if (score->parsed()) return cmd_score(flags, tree_path, out);
        if (folds->parsed()) return cmd_folds(flags, fold_k, out);
        if (version->parsed()) {
            out << "evoaug " << kVersion << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

}  // namespace evoaug
