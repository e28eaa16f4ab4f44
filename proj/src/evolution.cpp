#include "evoaug/evolution.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "evoaug/errors.hpp"

namespace evoaug {

void EvolutionConfig::validate() const {
    if (population_size < 2) throw ConfigError("population_size must be at least 2");
    if (generations < 0) throw ConfigError("generations must be non-negative");
    if (children_per_gen < 0) throw ConfigError("children_per_gen must be non-negative");
    if (crossovers_per_gen && (*crossovers_per_gen < 0 || *crossovers_per_gen > children_per_gen))
        throw ConfigError("crossovers_per_gen must lie in [0, children_per_gen]");
    if (crossover_prob && !(*crossover_prob >= 0.0 && *crossover_prob <= 1.0))
        throw ConfigError("crossover_prob must lie in [0, 1]");
    if (!(mutation_prob >= 0.0 && mutation_prob <= 1.0)) throw ConfigError("mutation_prob must lie in [0, 1]");
    if (max_depth < 1) throw ConfigError("max_depth must be at least 1");
    if (jobs < 1) throw ConfigError("jobs must be at least 1");
}

std::vector<OperatorKind> EvolutionConfig::searchable(const OperatorRegistry& registry) const {
    if (operators.empty()) return registry.tags();
    std::vector<OperatorKind> out;
    std::set<std::string> seen;
    for (const auto& op : operators) {
        if (!registry.contains(op)) throw UnknownOperator("searchable operator not registered: " + op.tag());
        if (seen.insert(op.tag()).second) out.push_back(op);
    }
    return out;
}

nlohmann::json EvolutionConfig::to_json() const {
    nlohmann::json j;
    j["population_size"] = population_size;
    j["generations"] = generations;
    j["children_per_gen"] = children_per_gen;
    j["crossovers_per_gen"] = crossovers_per_gen ? nlohmann::json(*crossovers_per_gen) : nlohmann::json(nullptr);
    j["crossover_prob"] = crossover_prob ? nlohmann::json(*crossover_prob) : nlohmann::json(nullptr);
    j["mutation_prob"] = mutation_prob;
    j["max_depth"] = max_depth;
    j["seed"] = seed;
    auto ops = nlohmann::json::array();
    for (const auto& op : operators) ops.push_back(op.tag());
    j["operators"] = ops;
    return j;
}

std::string origin_name(Origin o) {
    switch (o) {
        case Origin::init: return "init";
        case Origin::mutation: return "mutation";
        case Origin::crossover: return "crossover";
    }
    return "init";
}

Origin parse_origin(const std::string& s) {
    if (s == "init") return Origin::init;
    if (s == "mutation") return Origin::mutation;
    if (s == "crossover") return Origin::crossover;
    throw FormatError("unknown origin: " + s);
}

// ---------------------------------------------------------------------------
// Cache

std::optional<FitnessEntry> FitnessCache::find(const std::string& text) const {
    std::lock_guard lk(mu_);
    const auto it = entries_.find(text);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

bool FitnessCache::insert(const std::string& text, FitnessEntry entry) {
    std::lock_guard lk(mu_);
    return entries_.emplace(text, std::move(entry)).second;
}

void FitnessCache::set(const std::string& text, FitnessEntry entry) {
    std::lock_guard lk(mu_);
    entries_[text] = std::move(entry);
}

std::size_t FitnessCache::size() const {
    std::lock_guard lk(mu_);
    return entries_.size();
}

// ---------------------------------------------------------------------------
// Genetic operators

namespace {

const OperatorKind& pick(const std::vector<OperatorKind>& ops, RandomStream& rng) {
    return ops[rng.below(ops.size())];
}

TreeNode random_subtree(OperatorKind op, int levels, const std::vector<OperatorKind>& ops, RandomStream& rng) {
    if (levels <= 1) return TreeNode::leaf(std::move(op));
    auto left = random_subtree(pick(ops, rng), levels - 1, ops, rng);
    auto right = random_subtree(pick(ops, rng), levels - 1, ops, rng);
    return TreeNode::branch(std::move(op), 0.5, std::move(left), 0.5, std::move(right));
}

void mutate_node(TreeNode& n, double p_m, const std::vector<OperatorKind>& ops, RandomStream& rng) {
    if (rng.bernoulli(p_m)) {
        std::vector<OperatorKind> others;
        for (const auto& op : ops)
            if (op != n.op) others.push_back(op);
        if (!others.empty()) n.op = pick(others, rng);
    }
    if (!n.is_leaf() && rng.bernoulli(p_m)) {
        n.p_left = quantize_probability(rng.uniform());
        n.p_right = quantize_probability(1.0 - n.p_left);
    }
    for (auto& c : n.children) mutate_node(c, p_m, ops, rng);
}

}  // namespace

std::vector<AugmentationTree> init_population(const EvolutionConfig& cfg, const std::vector<OperatorKind>& ops,
                                              RandomStream& rng) {
    cfg.validate();
    if (ops.empty()) throw ConfigError("no searchable operators");
    const auto n = static_cast<std::size_t>(cfg.population_size);
    const bool paired = n == 2 * ops.size();
    std::vector<AugmentationTree> pop;
    pop.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& root = paired ? ops[i / 2] : ops[i % ops.size()];
        pop.push_back({random_subtree(root, cfg.max_depth, ops, rng)});
    }
    return pop;
}

AugmentationTree mutate(const AugmentationTree& t, double p_m, const std::vector<OperatorKind>& ops,
                        RandomStream& rng) {
    AugmentationTree out = t;
    mutate_node(out.root, p_m, ops, rng);
    return out;
}

AugmentationTree crossover(const AugmentationTree& a, const AugmentationTree& b, RandomStream& rng) {
    const int depth = a.depth();
    if (depth != b.depth()) throw DepthMismatch(depth, b.depth());
    if (depth == 1) return rng.bernoulli(0.5) ? a : b;

    AugmentationTree child = a;
    // Heap indices of level L span [2^L - 1, 2^(L+1) - 2].
    const std::size_t total = a.node_count();
    const std::size_t target = 1 + rng.below(total - 1);
    std::size_t level = 0;
    while (((std::size_t{2} << level) - 1) <= target) ++level;
    const std::size_t first = (std::size_t{1} << level) - 1;
    const std::size_t donor = first + rng.below(std::size_t{1} << level);
    node_at(child, target) = node_at(b, donor);
    return child;
}

// ---------------------------------------------------------------------------
// Selection

bool ranks_before(const Individual& a, const FitnessEntry& fa, const Individual& b, const FitnessEntry& fb) {
    if (fa.failed != fb.failed) return !fa.failed;
    if (!fa.failed && fa.fitness != fb.fitness) return fa.fitness > fb.fitness;
    if (a.born != b.born) return a.born < b.born;
    if (a.text != b.text) return a.text < b.text;
    return a.id < b.id;
}

std::vector<Individual> select_best(const std::vector<Individual>& candidates, const FitnessCache& cache,
                                    std::size_t p) {
    std::vector<std::pair<Individual, FitnessEntry>> scored;
    scored.reserve(candidates.size());
    for (const auto& c : candidates) {
        auto f = cache.find(c.text);
        if (!f) throw Error("select_best: tree has no cached fitness: " + c.text);
        scored.emplace_back(c, std::move(*f));
    }
    std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
        return ranks_before(x.first, x.second, y.first, y.second);
    });
    std::vector<Individual> out;
    for (std::size_t i = 0; i < scored.size() && i < p; ++i) out.push_back(std::move(scored[i].first));
    return out;
}

void evaluate_uncached(const std::vector<const Individual*>& inds, const TreeEvaluator& eval, FitnessCache& cache,
                       int jobs) {
    std::vector<const Individual*> todo;
    std::set<std::string> queued;
    for (const auto* ind : inds)
        if (!cache.find(ind->text) && queued.insert(ind->text).second) todo.push_back(ind);
    if (todo.empty()) return;

    std::vector<std::exception_ptr> errors(todo.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < todo.size();) {
            FitnessEntry e;
            try {
                e.report = eval(todo[i]->tree);
                e.fitness = e.report.score;
                if (std::isnan(e.fitness)) {
                    e.failed = true;
                    e.error = "fitness is NaN";
                }
            } catch (const OperatorError& ex) {
                e.failed = true;
                e.error = ex.what();
            } catch (...) {
                errors[i] = std::current_exception();
                continue;
            }
            cache.insert(todo[i]->text, std::move(e));
        }
    };
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, jobs)), todo.size());
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t t = 0; t < n; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Trace

std::vector<std::optional<double>> EvolutionTrace::best_per_generation() const {
    std::vector<std::optional<double>> best;
    for (const auto& r : rows) {
        if (r.generation < 0) continue;
        if (static_cast<std::size_t>(r.generation) >= best.size()) best.resize(static_cast<std::size_t>(r.generation) + 1);
        if (!r.survived || r.failed) continue;
        auto& b = best[static_cast<std::size_t>(r.generation)];
        if (!b || r.fitness > *b) b = r.fitness;
    }
    return best;
}

namespace {

constexpr const char* kTraceHeader = "generation,tree_text,fitness,origin,parent1,parent2,id,born,survived";

std::string format_fitness(bool failed, double f) {
    if (failed) return "failed";
    if (std::isinf(f)) return f > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", f);
    return buf;
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    if (quoted) throw FormatError("unterminated quote in trace line");
    fields.push_back(std::move(cur));
    return fields;
}

std::uint64_t parse_u64(const std::string& s) {
    if (s.empty()) return 0;
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos);
    if (pos != s.size()) throw FormatError("bad integer in trace: " + s);
    return v;
}

}  // namespace

std::string EvolutionTrace::to_csv() const {
    std::ostringstream out;
    out << kTraceHeader << '\n';
    for (const auto& r : rows) {
        out << r.generation << ',' << quote(r.tree_text) << ',' << format_fitness(r.failed, r.fitness) << ','
            << origin_name(r.origin) << ',';
        if (r.parent1) out << r.parent1;
        out << ',';
        if (r.parent2) out << r.parent2;
        out << ',' << r.id << ',' << r.born << ',' << (r.survived ? 1 : 0) << '\n';
    }
    return out.str();
}

EvolutionTrace EvolutionTrace::from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kTraceHeader) throw FormatError("trace: unexpected header");
    EvolutionTrace t;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 9) throw FormatError("trace: expected 9 fields, got " + std::to_string(f.size()));
        TraceRow r;
        try {
            r.generation = std::stoi(f[0]);
            r.tree_text = f[1];
            r.failed = f[2] == "failed";
            r.fitness = r.failed ? 0.0 : std::strtod(f[2].c_str(), nullptr);
            r.origin = parse_origin(f[3]);
            r.parent1 = parse_u64(f[4]);
            r.parent2 = parse_u64(f[5]);
            r.id = parse_u64(f[6]);
            r.born = std::stoi(f[7]);
            r.survived = f[8] == "1";
        } catch (const std::logic_error&) {
            throw FormatError("trace: malformed row: " + line);
        }
        t.rows.push_back(std::move(r));
    }
    return t;
}

void EvolutionTrace::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write trace: " + path.string());
    out << to_csv();
    if (!out) throw IoError("failed writing trace: " + path.string());
}

// ---------------------------------------------------------------------------
// Generation loop

namespace {

TraceRow row_of(const Individual& ind, const FitnessEntry& f, int generation, bool survived) {
    return {generation, ind.text, f.failed, f.fitness, ind.origin, ind.parent1, ind.parent2, ind.id, ind.born, survived};
}

std::vector<TraceRow> rows_for(const std::vector<Individual>& candidates, const std::vector<Individual>& survivors,
                               const FitnessCache& cache, int generation) {
    std::set<std::uint64_t> alive;
    for (const auto& s : survivors) alive.insert(s.id);
    std::vector<TraceRow> rows;
    for (const auto& c : candidates) rows.push_back(row_of(c, *cache.find(c.text), generation, alive.contains(c.id)));
    return rows;
}

Individual make_individual(AugmentationTree t, Origin origin, std::uint64_t p1, std::uint64_t p2, int born,
                           std::uint64_t& next_id) {
    Individual ind;
    ind.id = next_id++;
    ind.text = canonical_text(t);
    ind.tree = std::move(t);
    ind.origin = origin;
    ind.parent1 = p1;
    ind.parent2 = p2;
    ind.born = born;
    return ind;
}

}  // namespace

GenerationResult step_generation(const std::vector<Individual>& pop, const EvolutionConfig& cfg,
                                 const std::vector<OperatorKind>& ops, const TreeEvaluator& eval, FitnessCache& cache,
                                 RandomStream& rng, int generation, std::uint64_t& next_id) {
    if (pop.size() < 2) throw ConfigError("population must hold at least two trees");
    const TreeLimits limits{cfg.max_depth};
    std::vector<Individual> children;
    const int fixed_crossovers = cfg.crossovers_per_gen.value_or(0);
    for (int c = 0; c < cfg.children_per_gen; ++c) {
        const bool cross = cfg.crossovers_per_gen ? c < fixed_crossovers
                                                  : rng.bernoulli(cfg.crossover_prob.value_or(0.0));
        if (cross) {
            const auto i = rng.below(pop.size());
            auto j = rng.below(pop.size() - 1);
            if (j >= i) ++j;
            auto t = mutate(crossover(pop[i].tree, pop[j].tree, rng), cfg.mutation_prob, ops, rng);
            validate_tree(t, limits);
            children.push_back(make_individual(std::move(t), Origin::crossover, pop[i].id, pop[j].id, generation, next_id));
        } else {
            const auto i = rng.below(pop.size());
            auto t = mutate(pop[i].tree, cfg.mutation_prob, ops, rng);
            validate_tree(t, limits);
            children.push_back(make_individual(std::move(t), Origin::mutation, pop[i].id, 0, generation, next_id));
        }
    }

    std::vector<const Individual*> pending;
    for (const auto& ch : children) pending.push_back(&ch);
    for (const auto& p : pop) pending.push_back(&p);
    evaluate_uncached(pending, eval, cache, cfg.jobs);

    std::vector<Individual> all = pop;
    all.insert(all.end(), children.begin(), children.end());
    GenerationResult r;
    r.population = select_best(all, cache, pop.size());
    r.rows = rows_for(all, r.population, cache, generation);
    return r;
}

RunResult run(const EvolutionConfig& cfg, const OperatorRegistry& registry, const TreeEvaluator& eval) {
    cfg.validate();
    const auto ops = cfg.searchable(registry);
    const RandomStream root(cfg.seed);
    FitnessCache cache;
    std::uint64_t next_id = 1;

    auto init_rng = root.derive("init");
    std::vector<Individual> pop;
    for (auto& t : init_population(cfg, ops, init_rng)) {
        validate_tree(t, TreeLimits{cfg.max_depth}, &registry);
        pop.push_back(make_individual(std::move(t), Origin::init, 0, 0, 0, next_id));
    }
    std::vector<const Individual*> pending;
    for (const auto& p : pop) pending.push_back(&p);
    evaluate_uncached(pending, eval, cache, cfg.jobs);

    RunResult result;
    auto selected = select_best(pop, cache, pop.size());
    auto rows = rows_for(pop, selected, cache, 0);
    result.trace.rows.insert(result.trace.rows.end(), rows.begin(), rows.end());
    pop = std::move(selected);

    for (int g = 1; g <= cfg.generations; ++g) {
        auto rng = root.derive("generation:" + std::to_string(g));
        auto step = step_generation(pop, cfg, ops, eval, cache, rng, g, next_id);
        result.trace.rows.insert(result.trace.rows.end(), step.rows.begin(), step.rows.end());
        pop = std::move(step.population);
    }
    result.best = pop.front();
    result.best_fitness = *cache.find(result.best.text);
    result.population = std::move(pop);
    result.evaluations = cache.size();
    return result;
}

RunResult run(const EvolutionConfig& cfg, const FitnessFn& fitness, const FitnessContext& ctx) {
    ctx.validate();
    return run(cfg, *ctx.registry, [&](const AugmentationTree& t) { return fitness(t, ctx); });
}

nlohmann::json run_summary(const RunResult& r, const EvolutionConfig& cfg) {
    nlohmann::json j;
    j["best_tree"] = r.best.text;
    j["best_fitness"] = r.best_fitness.failed ? nlohmann::json("failed") : json_real(r.best_fitness.fitness);
    j["best_report"] = r.best_fitness.failed ? nlohmann::json(nullptr) : r.best_fitness.report.to_json();
    j["evaluations"] = r.evaluations;
    j["config"] = cfg.to_json();
    return j;
}

}  // namespace evoaug
