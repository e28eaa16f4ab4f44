#include "evoaug/config.hpp"

#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <tomlplusplus/toml.hpp>

#include "evoaug/errors.hpp"

namespace evoaug {

namespace fs = std::filesystem;

void RunConfig::set_seed(std::uint64_t s) {
    seed = s;
    evolution.seed = s;
    if (!dataset.synthetic_seed_set) dataset.synthetic.seed = s;
    if (!embedding_seed_set) embedding.seed = s;
}

namespace {

// Typed, strict view of one TOML table: every key must be consumed, so a
// misspelt option is an error rather than a silently ignored default.
class Section {
public:
    Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

    bool present() const { return table_ != nullptr; }
    bool has(const std::string& key) const { return table_ && table_->contains(key); }

    std::optional<std::int64_t> integer(const std::string& key) {
        const auto* n = node(key);
        if (!n) return std::nullopt;
        if (const auto v = n->value_exact<std::int64_t>()) return *v;
        throw ConfigError(where(key) + " must be an integer");
    }
    int integer(const std::string& key, int fallback) {
        const auto v = integer(key);
        if (!v) return fallback;
        if (*v < std::numeric_limits<int>::min() || *v > std::numeric_limits<int>::max())
            throw ConfigError(where(key) + " is out of range");
        return static_cast<int>(*v);
    }
    std::optional<std::uint64_t> seed(const std::string& key) {
        const auto v = integer(key);
        if (!v) return std::nullopt;
        if (*v < 0) throw ConfigError(where(key) + " must be non-negative");
        return static_cast<std::uint64_t>(*v);
    }
    std::optional<double> real(const std::string& key) {
        const auto* n = node(key);
        if (!n) return std::nullopt;
        if (const auto v = n->value_exact<double>()) return *v;
        if (const auto v = n->value_exact<std::int64_t>()) return static_cast<double>(*v);
        throw ConfigError(where(key) + " must be a number");
    }
    double real(const std::string& key, double fallback) { return real(key).value_or(fallback); }
    std::optional<std::string> string(const std::string& key) {
        const auto* n = node(key);
        if (!n) return std::nullopt;
        if (const auto v = n->value_exact<std::string>()) return *v;
        throw ConfigError(where(key) + " must be a string");
    }
    std::optional<bool> boolean(const std::string& key) {
        const auto* n = node(key);
        if (!n) return std::nullopt;
        if (const auto v = n->value_exact<bool>()) return *v;
        throw ConfigError(where(key) + " must be a boolean");
    }
    const toml::array* array(const std::string& key) {
        const auto* n = node(key);
        if (!n) return nullptr;
        if (const auto* a = n->as_array()) return a;
        throw ConfigError(where(key) + " must be an array");
    }
    std::vector<std::string> strings(const std::string& key) {
        std::vector<std::string> out;
        if (const auto* a = array(key))
            for (const auto& e : *a) {
                const auto v = e.value_exact<std::string>();
                if (!v) throw ConfigError(where(key) + " must hold strings");
                out.push_back(*v);
            }
        return out;
    }
    std::vector<double> reals(const std::string& key) {
        std::vector<double> out;
        if (const auto* a = array(key))
            for (const auto& e : *a) {
                if (const auto d = e.value_exact<double>())
                    out.push_back(*d);
                else if (const auto i = e.value_exact<std::int64_t>())
                    out.push_back(static_cast<double>(*i));
                else
                    throw ConfigError(where(key) + " must hold numbers");
            }
        return out;
    }
    Section table(const std::string& key) {
        const auto* n = node(key);
        if (!n) return {nullptr, name_.empty() ? key : name_ + "." + key};
        if (const auto* t = n->as_table()) return {t, name_.empty() ? key : name_ + "." + key};
        throw ConfigError(where(key) + " must be a table");
    }
    const toml::array* tables(const std::string& key) {
        const auto* a = array(key);
        if (a && !a->is_array_of_tables()) throw ConfigError(where(key) + " must be an array of tables");
        return a;
    }
    Range range(const std::string& key, Range fallback) {
        if (!has(key)) return fallback;
        const auto v = reals(key);
        if (v.size() != 2) throw ConfigError(where(key) + " must be a [lo, hi] pair");
        return {v[0], v[1]};
    }

    void finish() const {
        if (!table_) return;
        for (const auto& [k, v] : *table_)
            if (!used_.contains(std::string(k.str()))) throw ConfigError("unknown config key: " + where(std::string(k.str())));
    }

    std::string where(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

private:
    const toml::node* node(const std::string& key) {
        if (!table_) return nullptr;
        used_.insert(key);
        return table_->get(key);
    }

    const toml::table* table_;
    std::string name_;
    std::set<std::string> used_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_relative() ? base / path : path;
}

void read_dataset(Section s, const fs::path& base, RunConfig& cfg) {
    // An absent [dataset] section means the synthetic defaults.
    auto& d = cfg.dataset;
    const auto kind = s.string("kind").value_or("synthetic");
    if (kind == "synthetic") {
        d.kind = DatasetSource::Kind::synthetic;
        auto& b = d.synthetic;
        b.classes = s.integer("classes", b.classes);
        b.shots = s.integer("shots", b.shots);
        b.image_size = s.integer("image_size", b.image_size);
        b.blob_sigma = s.real("blob_sigma", b.blob_sigma);
        b.pixel_noise = s.real("pixel_noise", b.pixel_noise);
        b.background = s.integer("background", b.background);
        if (s.has("base_color")) {
            const auto c = s.reals("base_color");
            if (c.size() != 3) throw ConfigError("dataset.base_color must have three entries");
            for (int i = 0; i < 3; ++i) b.base_color[static_cast<std::size_t>(i)] = static_cast<int>(c[static_cast<std::size_t>(i)]);
        }
        if (const auto* pairs = s.array("identical_classes")) {
            for (const auto& e : *pairs) {
                const auto* p = e.as_array();
                if (!p || p->size() != 2 || !(*p)[0].value_exact<std::int64_t>() || !(*p)[1].value_exact<std::int64_t>())
                    throw ConfigError("dataset.identical_classes must hold [a, b] integer pairs");
                b.identical_classes.emplace_back(static_cast<int>(*(*p)[0].value_exact<std::int64_t>()),
                                                 static_cast<int>(*(*p)[1].value_exact<std::int64_t>()));
            }
        }
        if (const auto seed = s.seed("seed")) {
            b.seed = *seed;
            d.synthetic_seed_set = true;
        }
    } else if (kind == "directory" || kind == "manifest") {
        d.kind = kind == "directory" ? DatasetSource::Kind::directory : DatasetSource::Kind::manifest;
        const auto p = s.string("path");
        if (!p) throw ConfigError("dataset.path is required for kind = \"" + kind + "\"");
        d.path = resolve(base, *p);
        std::error_code ec;
        if (!fs::exists(d.path, ec)) throw ConfigError("dataset.path does not exist: " + d.path.string());
    } else {
        throw ConfigError("dataset.kind must be synthetic, directory or manifest (got \"" + kind + "\")");
    }
    s.finish();
}

void read_fitness(Section s, RunConfig& cfg) {
    if (!s.present()) return;
    if (const auto k = s.string("kind")) cfg.fitness = parse_fitness_kind(*k);
    cfg.folds = s.integer("folds", cfg.folds);
    if (cfg.folds == 1 || cfg.folds < 0)
        throw ConfigError("fitness.folds = " + std::to_string(cfg.folds) +
                          ": fold count k must be at least 2 (a single fold would validate on the training set); "
                          "use 0 for the default");
    cfg.augment_multiplier = s.integer("augment_multiplier", cfg.augment_multiplier);
    if (const auto m = s.string("metric")) cfg.metric = parse_cluster_metric(*m);
    cfg.cluster_weights.w_s = s.real("w_s", cfg.cluster_weights.w_s);
    cfg.cluster_weights.w_d = s.real("w_d", cfg.cluster_weights.w_d);
    auto c = s.table("classifier");
    cfg.classifier.epochs = c.integer("epochs", cfg.classifier.epochs);
    cfg.classifier.learning_rate = c.real("learning_rate", cfg.classifier.learning_rate);
    cfg.classifier.l2 = c.real("l2", cfg.classifier.l2);
    c.finish();
    s.finish();
}

void read_evolution(Section s, RunConfig& cfg) {
    if (!s.present()) return;
    auto& e = cfg.evolution;
    e.population_size = s.integer("population_size", e.population_size);
    e.generations = s.integer("generations", e.generations);
    e.children_per_gen = s.integer("children_per_gen", e.children_per_gen);
    if (s.has("crossover_prob")) {
        e.crossover_prob = s.real("crossover_prob");
        if (!s.has("crossovers_per_gen")) e.crossovers_per_gen.reset();
    }
    if (s.has("crossovers_per_gen")) e.crossovers_per_gen = s.integer("crossovers_per_gen", 0);
    e.mutation_prob = s.real("mutation_prob", e.mutation_prob);
    e.max_depth = s.integer("max_depth", e.max_depth);
    e.jobs = s.integer("jobs", e.jobs);
    s.finish();
}

void read_embedding(Section s, const fs::path& base, RunConfig& cfg) {
    if (!s.present()) return;
    auto& p = cfg.embedding;
    if (const auto k = s.string("kind")) p.kind = ProviderSpec::parse_kind(*k);
    p.target_size = s.integer("target_size", p.target_size);
    p.dim = s.integer("dim", p.dim);
    if (const auto seed = s.seed("seed")) {
        p.seed = *seed;
        cfg.embedding_seed_set = true;
    }
    if (const auto path = s.string("path")) p.path = resolve(base, *path);
    s.finish();
    p.validate();
}

void read_operators(Section s, RunConfig& cfg) {
    if (!s.present()) return;
    for (const auto& name : s.strings("searchable")) cfg.evolution.operators.emplace_back(name);
    if (const auto* mocks = s.tables("mock")) {
        for (std::size_t i = 0; i < mocks->size(); ++i) {
            Section m((*mocks)[i].as_table(), "operators.mock[" + std::to_string(i) + "]");
            const auto name = m.string("name");
            const auto behavior = m.string("behavior");
            if (!name || !behavior) throw ConfigError(m.where("name") + " and behavior are required");
            cfg.mocks.push_back({*name, MockBehavior::parse(*behavior, m.real("sigma", 0.0))});
            m.finish();
        }
    }
    auto c = s.table("classical");
    auto& r = cfg.classical;
    r.p_crop = c.real("p_crop", r.p_crop);
    r.crop = c.range("crop", r.crop);
    r.p_translate = c.real("p_translate", r.p_translate);
    r.translate = c.range("translate", r.translate);
    r.p_scale = c.real("p_scale", r.p_scale);
    r.scale = c.range("scale", r.scale);
    r.p_rotate = c.real("p_rotate", r.p_rotate);
    r.rotate = c.range("rotate", r.rotate);
    r.p_hflip = c.real("p_hflip", r.p_hflip);
    r.p_vflip = c.real("p_vflip", r.p_vflip);
    r.p_brightness = c.real("p_brightness", r.p_brightness);
    r.brightness = c.range("brightness", r.brightness);
    r.p_contrast = c.real("p_contrast", r.p_contrast);
    r.contrast = c.range("contrast", r.contrast);
    r.p_saturation = c.real("p_saturation", r.p_saturation);
    r.saturation = c.range("saturation", r.saturation);
    c.finish();
    r.validate();
    s.finish();
}

void read_worker(Section s, RunConfig& cfg) {
    if (!s.present()) return;
    WorkerSpec w;
    const auto transport = s.string("transport").value_or("subprocess");
    if (transport == "subprocess") {
        w.remote.transport = WorkerTransport::subprocess;
        w.remote.endpoint = s.string("command").value_or("");
    } else if (transport == "tcp") {
        w.remote.transport = WorkerTransport::tcp;
        w.remote.endpoint = s.string("address").value_or("");
    } else {
        throw ConfigError("worker.transport must be subprocess or tcp");
    }
    w.remote.timeout_seconds = s.real("timeout_seconds", w.remote.timeout_seconds);
    w.remote.max_retries = s.integer("max_retries", w.remote.max_retries);
    w.remote.backoff_initial_seconds = s.real("backoff_initial_seconds", w.remote.backoff_initial_seconds);
    w.remote.max_in_flight = s.integer("max_in_flight", w.remote.max_in_flight);
    if (s.has("nerf_rotation_degrees")) {
        w.remote.nerf_rotation_degrees.clear();
        for (double d : s.reals("nerf_rotation_degrees")) w.remote.nerf_rotation_degrees.push_back(static_cast<int>(d));
    }
    w.operators = s.strings("operators");
    s.finish();
    cfg.worker = std::move(w);
}

}  // namespace

RunConfig parse_run_config(const std::string& toml_text, const fs::path& base_dir) {
    toml::table root;
    try {
        root = toml::parse(toml_text);
    } catch (const toml::parse_error& e) {
        const auto& src = e.source();
        throw ConfigError("TOML syntax error at line " + std::to_string(src.begin.line) + ": " +
                          std::string(e.description()));
    }
    RunConfig cfg;
    Section top(&root, "");
    if (const auto out = top.string("output_dir")) cfg.output_dir = resolve(base_dir, *out);
    read_dataset(top.table("dataset"), base_dir, cfg);
    if (auto few = top.table("fewshot"); few.present()) {
        FewShotSpec f;
        f.n_way = few.integer("n_way", 0);
        f.k_shot = few.integer("k_shot", 0);
        f.trials = few.integer("trials", 1);
        few.finish();
        if (f.n_way < 1 || f.k_shot < 1 || f.trials < 1)
            throw ConfigError("fewshot.n_way, fewshot.k_shot and fewshot.trials must be positive");
        cfg.fewshot = f;
    }
    read_fitness(top.table("fitness"), cfg);
    read_evolution(top.table("evolution"), cfg);
    read_embedding(top.table("embedding"), base_dir, cfg);
    read_operators(top.table("operators"), cfg);
    read_worker(top.table("worker"), cfg);
    const auto seed = top.seed("seed").value_or(0);
    top.finish();
    cfg.set_seed(seed);
    cfg.evolution.validate();
    return cfg;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    auto base = path.parent_path();
    if (base.empty()) base = ".";
    return parse_run_config(ss.str(), base);
}

void apply_worker_env(RunConfig& cfg) {
    const char* env = std::getenv("EVOAUG_WORKER");
    if (!env || !*env) return;
    const auto over = RemoteOperatorConfig::from_endpoint(env);
    if (!cfg.worker) cfg.worker = WorkerSpec{};
    cfg.worker->remote.transport = over.transport;
    cfg.worker->remote.endpoint = over.endpoint;
}

OperatorSetup build_operators(const RunConfig& cfg) {
    OperatorSetup s;
    s.registry = std::make_shared<OperatorRegistry>(cfg.classical);
    for (const auto& m : cfg.mocks) s.registry->register_mock(m.name, m.behavior);
    if (cfg.worker) {
        cfg.worker->remote.validate();
        s.worker = std::make_shared<WorkerClient>(cfg.worker->remote);
        const auto caps = s.worker->capabilities();
        std::vector<std::string> wanted = cfg.worker->operators;
        if (wanted.empty())
            for (const auto& t : caps.tags)
                if (t != "embed") wanted.push_back(t);
        for (const auto& t : wanted) s.registry->register_remote(OperatorKind(t), s.worker, caps);
    }
    return s;
}

LabeledDataset load_source(const DatasetSource& src) {
    switch (src.kind) {
        case DatasetSource::Kind::synthetic: return make_blob_dataset(src.synthetic);
        case DatasetSource::Kind::directory:
        case DatasetSource::Kind::manifest: return load_dataset(src.path);
    }
    throw ConfigError("unknown dataset kind");
}

Session open_session(RunConfig cfg) {
    Session s;
    s.operators = build_operators(cfg);
    if (cfg.embedding.kind == ProviderSpec::Kind::remote && !s.operators.worker)
        throw ConfigError("embedding.kind = \"remote\" needs a [worker] section or EVOAUG_WORKER");
    s.provider = std::make_shared<EmbeddingProvider>(cfg.embedding, s.operators.worker);

    auto data = load_source(cfg.dataset);
    if (cfg.fewshot) {
        auto rng = RandomStream(cfg.seed).derive("fewshot");
        const auto& f = *cfg.fewshot;
        data = f.trials > 1 ? hardest_subset(data, f.n_way, f.k_shot, f.trials, make_baseline(s.provider, cfg.classifier), rng)
                            : sample_fewshot(data, f.n_way, f.k_shot, rng);
    }

    auto& ctx = s.context;
    ctx.dataset = std::move(data);
    ctx.registry = s.operators.registry;
    ctx.provider = s.provider;
    ctx.folds = cfg.folds;
    ctx.augment_multiplier = cfg.augment_multiplier;
    ctx.classifier = cfg.classifier;
    ctx.cluster_weights = cfg.cluster_weights;
    ctx.metric = cfg.metric;
    ctx.seed = cfg.seed;
    ctx.validate();

    if (cfg.fitness == FitnessKind::kfold) {
        const int k = ctx.kfold_k();
        const auto smallest = ctx.dataset.min_class_count();
        if (k < 2)
            throw ConfigError("kfold fitness: fold count k must be at least 2, but the default k equals the smallest "
                              "class size (" + std::to_string(smallest) + "); use a larger k_shot or another fitness");
        if (static_cast<std::size_t>(k) > smallest)
            throw ConfigError("kfold fitness: fold count k = " + std::to_string(k) +
                              " exceeds the smallest class size (" + std::to_string(smallest) + ")");
    }
    if (cfg.fitness == FitnessKind::clustering && ctx.dataset.num_classes() < 2)
        throw ConfigError("clustering fitness needs at least two classes");
    (void)cfg.evolution.searchable(*ctx.registry);  // throws on unregistered names

    s.fitness = fitness_function(cfg.fitness);
    s.config = std::move(cfg);
    return s;
}

}  // namespace evoaug
