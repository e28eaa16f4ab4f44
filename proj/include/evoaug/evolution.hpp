#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evoaug/augtree.hpp"
#include "evoaug/fitness.hpp"
#include "evoaug/operators.hpp"
#include "evoaug/random.hpp"

namespace evoaug {

struct EvolutionConfig {
    int population_size = 14;
    int generations = 10;
    int children_per_gen = 8;
    /// Fixed crossover count; takes precedence over crossover_prob.
    std::optional<int> crossovers_per_gen = 6;
    /// Per-child crossover probability, used only when no count is set.
    std::optional<double> crossover_prob;
    double mutation_prob = 0.1;
    int max_depth = kDefaultMaxDepth;
    std::uint64_t seed = 0;
    /// Concurrent fitness evaluations.
    int jobs = 1;
    /// Operators the search may place in trees; empty means every registered
    /// operator in registration order.
    std::vector<OperatorKind> operators;

    void validate() const;
    std::vector<OperatorKind> searchable(const OperatorRegistry& registry) const;
    nlohmann::json to_json() const;
};

enum class Origin { init, mutation, crossover };
std::string origin_name(Origin o);
Origin parse_origin(const std::string& s);

/// A tree in the population. Ids start at 1 and follow creation order;
/// parent id 0 means "none".
struct Individual {
    std::uint64_t id = 0;
    AugmentationTree tree;
    std::string text;  // canonical text
    Origin origin = Origin::init;
    std::uint64_t parent1 = 0;
    std::uint64_t parent2 = 0;
    int born = 0;  // generation of creation
};

/// Cached outcome of one fitness evaluation.
struct FitnessEntry {
    bool failed = false;
    double fitness = 0.0;
    std::string error;
    FitnessReport report;
};

/// Canonical text -> fitness. Safe for concurrent use.
class FitnessCache {
public:
    std::optional<FitnessEntry> find(const std::string& text) const;
    /// Inserts unless present; returns whether the entry was inserted.
    bool insert(const std::string& text, FitnessEntry entry);
    /// Overwrites unconditionally.
    void set(const std::string& text, FitnessEntry entry);
    std::size_t size() const;

private:
    mutable std::mutex mu_;
    std::map<std::string, FitnessEntry> entries_;
};

/// Evaluates one tree. OperatorError marks the tree failed; other errors
/// propagate.
using TreeEvaluator = std::function<FitnessReport(const AugmentationTree&)>;

/// Roots: two trees per operator when population_size == 2·|ops|, otherwise
/// operators round-robin. Other nodes draw uniformly from `ops`; every edge
/// pair is 0.5/0.5.
std::vector<AugmentationTree> init_population(const EvolutionConfig& cfg, const std::vector<OperatorKind>& ops,
                                              RandomStream& rng);

/// Visits nodes in preorder. Each node switches operator with probability
/// p_m (uniformly to one of the other operators), then each internal node
/// redraws p_left ~ U(0,1) with probability p_m.
AugmentationTree mutate(const AugmentationTree& t, double p_m, const std::vector<OperatorKind>& ops,
                        RandomStream& rng);

/// Copy of `a` with a uniformly chosen non-root subtree replaced by a
/// uniformly chosen subtree of `b` rooted at the same level. Depth-1 parents
/// yield a copy of `a` or `b` with equal probability. Throws DepthMismatch.
AugmentationTree crossover(const AugmentationTree& a, const AugmentationTree& b, RandomStream& rng);

/// Strict ranking used by selection: scored before failed, then higher
/// fitness, earlier birth, smaller canonical text, smaller id.
bool ranks_before(const Individual& a, const FitnessEntry& fa, const Individual& b, const FitnessEntry& fb);

/// The best `p` of `candidates`, sorted best first. All must be cached.
std::vector<Individual> select_best(const std::vector<Individual>& candidates, const FitnessCache& cache, std::size_t p);

/// Evaluates every uncached tree (up to `jobs` at once) and stores results.
void evaluate_uncached(const std::vector<const Individual*>& inds, const TreeEvaluator& eval, FitnessCache& cache,
                       int jobs);

struct TraceRow {
    int generation = 0;
    std::string tree_text;
    bool failed = false;
    double fitness = 0.0;
    Origin origin = Origin::init;
    std::uint64_t parent1 = 0;
    std::uint64_t parent2 = 0;
    std::uint64_t id = 0;
    int born = 0;
    bool survived = false;
};

/// Generation 0 lists the initial population; generation g >= 1 lists every
/// member of parents ∪ children with its selection outcome.
struct EvolutionTrace {
    std::vector<TraceRow> rows;

    /// Best fitness among survivors of each generation (failed -> nullopt).
    std::vector<std::optional<double>> best_per_generation() const;
    std::string to_csv() const;
    static EvolutionTrace from_csv(const std::string& text);
    void write_csv(const std::filesystem::path& path) const;
};

struct GenerationResult {
    std::vector<Individual> population;  // sorted best first
    std::vector<TraceRow> rows;
};

/// One round of breeding and elitist selection.
GenerationResult step_generation(const std::vector<Individual>& pop, const EvolutionConfig& cfg,
                                 const std::vector<OperatorKind>& ops, const TreeEvaluator& eval, FitnessCache& cache,
                                 RandomStream& rng, int generation, std::uint64_t& next_id);

struct RunResult {
    Individual best;
    FitnessEntry best_fitness;
    std::vector<Individual> population;
    EvolutionTrace trace;
    std::size_t evaluations = 0;
};

RunResult run(const EvolutionConfig& cfg, const OperatorRegistry& registry, const TreeEvaluator& eval);
RunResult run(const EvolutionConfig& cfg, const FitnessFn& fitness, const FitnessContext& ctx);

/// {best_tree, best_fitness, best_report, evaluations, config}.
nlohmann::json run_summary(const RunResult& r, const EvolutionConfig& cfg);

}  // namespace evoaug
