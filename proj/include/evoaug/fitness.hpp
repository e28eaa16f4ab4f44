#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evoaug/augtree.hpp"
#include "evoaug/classifier.hpp"
#include "evoaug/dataset.hpp"
#include "evoaug/embedding.hpp"
#include "evoaug/operators.hpp"

namespace evoaug {

enum class FitnessKind { kfold, clustering, double_aug, trainloss };
FitnessKind parse_fitness_kind(const std::string& name);
std::string fitness_kind_name(FitnessKind kind);

enum class ClusterMetric {
    silhouette_radius,       // w_S·S − w_d/d
    inverse_davies_bouldin,  // 1/DB
};
ClusterMetric parse_cluster_metric(const std::string& name);
std::string cluster_metric_name(ClusterMetric metric);

struct ClusterWeights {
    double w_s = 1.0;
    double w_d = 1.0;
};

/// w_s·S − w_d/d; w_s·S alone when w_d = 0, and −inf when d = 0 < w_d.
double silhouette_radius_score(double s, double d, const ClusterWeights& w);

/// Everything a fitness function reads. Shared state is immutable during
/// evaluation, so one context serves concurrent evaluations.
struct FitnessContext {
    LabeledDataset dataset;
    std::shared_ptr<const OperatorRegistry> registry;
    std::shared_ptr<const EmbeddingProvider> provider;
    /// Number of folds; 0 picks the default (smallest class size for kfold,
    /// kDefaultDoubleAugFolds for double_aug).
    int folds = 0;
    int augment_multiplier = 2;
    ClassifierConfig classifier;
    ClusterWeights cluster_weights;
    ClusterMetric metric = ClusterMetric::silhouette_radius;
    std::uint64_t seed = 0;

    void validate() const;
    int kfold_k() const;
    int double_aug_k() const;
};

inline constexpr int kDefaultDoubleAugFolds = 5;

struct FitnessReport {
    double score = 0.0;
    std::vector<double> per_fold;
    std::map<std::string, double> diagnostics;

    nlohmann::json to_json() const;
};

/// JSON number, or the strings "inf" / "-inf" / "nan" for non-finite values.
nlohmann::json json_real(double v);

/// The tree-augmented copies of every item: `multiplier` copies per item with
/// ids "<id>_aug<j>", each drawn from a stream derived from the context seed,
/// the tree's canonical text and the copy id. Originals are not included.
std::vector<LabeledItem> augment_items(const AugmentationTree& t, std::span<const LabeledItem> items,
                                       const FitnessContext& ctx);

FitnessReport kfold_fitness(const AugmentationTree& t, const FitnessContext& ctx);
FitnessReport clustering_fitness(const AugmentationTree& t, const FitnessContext& ctx);
FitnessReport double_aug_fitness(const AugmentationTree& t, const FitnessContext& ctx);
FitnessReport trainloss_fitness(const AugmentationTree& t, const FitnessContext& ctx);

using FitnessFn = std::function<FitnessReport(const AugmentationTree&, const FitnessContext&)>;
FitnessFn fitness_function(FitnessKind kind);

/// The dataset expanded with `k` Classical copies of
/// every item ("<id>_dup<j>"), independent of any tree.
LabeledDataset double_aug_dataset(const FitnessContext& ctx, int k);

/// Held-out accuracy of a softmax head trained on the embeddings of the
/// training set; used to rank few-shot subsets by difficulty.
BaselineAccuracy make_baseline(std::shared_ptr<const EmbeddingProvider> provider, ClassifierConfig cfg);

}  // namespace evoaug
