#include "evoaug/fitness.hpp"

#include <cmath>
#include <limits>

#include "evoaug/errors.hpp"
#include "evoaug/metrics.hpp"

namespace evoaug {

FitnessKind parse_fitness_kind(const std::string& name) {
    if (name == "kfold") return FitnessKind::kfold;
    if (name == "clustering") return FitnessKind::clustering;
    if (name == "double_aug") return FitnessKind::double_aug;
    if (name == "trainloss") return FitnessKind::trainloss;
    throw ConfigError("unknown fitness kind: " + name + " (expected kfold, clustering, double_aug or trainloss)");
}

std::string fitness_kind_name(FitnessKind kind) {
    switch (kind) {
        case FitnessKind::kfold: return "kfold";
        case FitnessKind::clustering: return "clustering";
        case FitnessKind::double_aug: return "double_aug";
        case FitnessKind::trainloss: return "trainloss";
    }
    return "kfold";
}

ClusterMetric parse_cluster_metric(const std::string& name) {
    if (name == "silhouette_radius") return ClusterMetric::silhouette_radius;
    if (name == "inverse_davies_bouldin") return ClusterMetric::inverse_davies_bouldin;
    throw ConfigError("unknown cluster metric: " + name);
}

std::string cluster_metric_name(ClusterMetric metric) {
    return metric == ClusterMetric::silhouette_radius ? "silhouette_radius" : "inverse_davies_bouldin";
}

void FitnessContext::validate() const {
    if (!registry) throw ConfigError("fitness context has no operator registry");
    if (!provider) throw ConfigError("fitness context has no embedding provider");
    if (augment_multiplier < 1) throw ConfigError("augment_multiplier must be at least 1");
    if (folds < 0) throw ConfigError("fold count must be non-negative (0 selects the default)");
    if (folds == 1) throw ConfigError("fold count k must be at least 2 (a single fold would validate on the training set)");
    classifier.validate();
    const auto& w = cluster_weights;
    if (!(w.w_s >= 0.0) || !(w.w_d >= 0.0)) throw ConfigError("cluster weights must be non-negative");
    if (w.w_s == 0.0 && w.w_d == 0.0) throw ConfigError("cluster weights w_s and w_d cannot both be 0");
}

double silhouette_radius_score(double s, double d, const ClusterWeights& w) {
    if (w.w_d == 0.0) return w.w_s * s;
    if (d == 0.0) return -std::numeric_limits<double>::infinity();
    return w.w_s * s - w.w_d / d;
}

int FitnessContext::kfold_k() const { return folds > 0 ? folds : static_cast<int>(dataset.min_class_count()); }

int FitnessContext::double_aug_k() const { return folds > 0 ? folds : kDefaultDoubleAugFolds; }

nlohmann::json json_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

nlohmann::json FitnessReport::to_json() const {
    nlohmann::json j;
    j["score"] = json_real(score);
    j["per_fold"] = nlohmann::json::array();
    for (double f : per_fold) j["per_fold"].push_back(json_real(f));
    j["diagnostics"] = nlohmann::json::object();
    for (const auto& [k, v] : diagnostics) j["diagnostics"][k] = json_real(v);
    return j;
}

std::vector<LabeledItem> augment_items(const AugmentationTree& t, std::span<const LabeledItem> items,
                                       const FitnessContext& ctx) {
    const auto tree_rng = RandomStream(ctx.seed).derive(canonical_text(t));
    std::vector<LabeledItem> out;
    out.reserve(items.size() * static_cast<std::size_t>(ctx.augment_multiplier));
    for (const auto& it : items) {
        for (int j = 0; j < ctx.augment_multiplier; ++j) {
            const auto rng = tree_rng.derive(it.id + "#" + std::to_string(j));
            out.push_back({it.id + "_aug" + std::to_string(j), apply_tree(t, it.image, *ctx.registry, rng), it.label});
        }
    }
    return out;
}

namespace {

std::vector<int> labels_of(std::span<const LabeledItem> items) {
    std::vector<int> out;
    out.reserve(items.size());
    for (const auto& it : items) out.push_back(it.label);
    return out;
}

Eigen::MatrixXd stack(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.rows() == 0) return b;
    if (b.rows() == 0) return a;
    Eigen::MatrixXd out(a.rows() + b.rows(), a.cols());
    out << a, b;
    return out;
}

FitnessReport kfold_on(const AugmentationTree& t, const LabeledDataset& d, int k, const FitnessContext& ctx) {
    auto fold_rng = RandomStream(ctx.seed).derive("folds");
    const auto plan = stratified_folds(d, k, fold_rng);

    const auto& items = d.items();
    const auto copies = augment_items(t, items, ctx);
    const auto orig = ctx.provider->embed(items);
    const auto aug = ctx.provider->embed(copies);
    const auto m = static_cast<std::size_t>(ctx.augment_multiplier);

    FitnessReport r;
    double loss_sum = 0.0;
    double acc_sum = 0.0;
    for (int f = 0; f < k; ++f) {
        const auto val_idx = plan.fold(f);
        const auto train_idx = plan.complement(f);

        std::vector<Eigen::Index> train_rows;
        std::vector<int> train_labels;
        for (auto i : train_idx) {
            train_rows.push_back(static_cast<Eigen::Index>(i));
            train_labels.push_back(items[i].label);
        }
        std::vector<Eigen::Index> aug_rows;
        for (auto i : train_idx)
            for (std::size_t j = 0; j < m; ++j) {
                aug_rows.push_back(static_cast<Eigen::Index>(i * m + j));
                train_labels.push_back(items[i].label);
            }
        const Eigen::MatrixXd x_train = stack(orig.rows(train_rows, Eigen::all),
                                              aug.rows(aug_rows, Eigen::all));

        std::vector<Eigen::Index> val_rows;
        std::vector<int> val_labels;
        for (auto i : val_idx) {
            val_rows.push_back(static_cast<Eigen::Index>(i));
            val_labels.push_back(items[i].label);
        }
        const Eigen::MatrixXd x_val = orig.rows(val_rows, Eigen::all);

        const auto head = train_head(x_train, train_labels, d.num_classes(), ctx.classifier);
        const auto ev = eval_head(head, x_val, val_labels);
        r.per_fold.push_back(-ev.loss);
        loss_sum += ev.loss;
        acc_sum += ev.accuracy;
    }
    r.score = -loss_sum / k;
    r.diagnostics["mean_loss"] = loss_sum / k;
    r.diagnostics["accuracy"] = acc_sum / k;
    return r;
}

}  // namespace

FitnessReport kfold_fitness(const AugmentationTree& t, const FitnessContext& ctx) {
    ctx.validate();
    return kfold_on(t, ctx.dataset, ctx.kfold_k(), ctx);
}

FitnessReport clustering_fitness(const AugmentationTree& t, const FitnessContext& ctx) {
    ctx.validate();
    if (ctx.dataset.num_classes() < 2) throw SingleCluster("clustering fitness needs at least two classes");
    const auto& items = ctx.dataset.items();
    const auto copies = augment_items(t, items, ctx);
    const Eigen::MatrixXd points = stack(ctx.provider->embed(items).rows, ctx.provider->embed(copies).rows);
    auto labels = labels_of(items);
    const auto copy_labels = labels_of(copies);
    labels.insert(labels.end(), copy_labels.begin(), copy_labels.end());

    FitnessReport r;
    const double s = silhouette(points, labels);
    const double d = mean_cluster_radius(points, labels);
    r.diagnostics["silhouette"] = s;
    r.diagnostics["mean_radius"] = d;
    if (ctx.metric == ClusterMetric::silhouette_radius) {
        r.score = silhouette_radius_score(s, d, ctx.cluster_weights);
    } else {
        try {
            const double db = davies_bouldin(points, labels);
            r.diagnostics["davies_bouldin"] = db;
            r.score = db == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / db;
        } catch (const CoincidentCentroids&) {
            r.diagnostics["davies_bouldin"] = std::numeric_limits<double>::infinity();
            r.score = 0.0;
        }
    }
    return r;
}

LabeledDataset double_aug_dataset(const FitnessContext& ctx, int k) {
    const auto base = RandomStream(ctx.seed).derive("double_aug");
    const OperatorKind classical(op_names::kClassical);
    std::vector<LabeledItem> items;
    for (const auto& it : ctx.dataset.items()) {
        for (int j = 0; j < k; ++j) {
            auto rng = base.derive(it.id + "#" + std::to_string(j));
            items.push_back({it.id + "_dup" + std::to_string(j),
                             apply_operator(*ctx.registry, classical, it.image, rng), it.label});
        }
    }
    return LabeledDataset(std::move(items), ctx.dataset.class_names());
}

FitnessReport double_aug_fitness(const AugmentationTree& t, const FitnessContext& ctx) {
    ctx.validate();
    for (int c = 0; c < ctx.dataset.num_classes(); ++c)
        if (ctx.dataset.indices_of_class(c).size() != 1)
            throw ConfigError("double augmentation fitness needs a one-shot dataset; class " +
                              ctx.dataset.class_names()[static_cast<std::size_t>(c)] + " has " +
                              std::to_string(ctx.dataset.indices_of_class(c).size()) + " items");
    const int k = ctx.double_aug_k();
    return kfold_on(t, double_aug_dataset(ctx, k), k, ctx);
}

FitnessReport trainloss_fitness(const AugmentationTree& t, const FitnessContext& ctx) {
    ctx.validate();
    const auto& items = ctx.dataset.items();
    const auto copies = augment_items(t, items, ctx);
    const Eigen::MatrixXd x = stack(ctx.provider->embed(items).rows, ctx.provider->embed(copies).rows);
    auto labels = labels_of(items);
    const auto copy_labels = labels_of(copies);
    labels.insert(labels.end(), copy_labels.begin(), copy_labels.end());

    const auto head = train_head(x, labels, ctx.dataset.num_classes(), ctx.classifier);
    const auto ev = eval_head(head, x, labels);
    FitnessReport r;
    r.score = -ev.loss;
    r.diagnostics["mean_loss"] = ev.loss;
    r.diagnostics["accuracy"] = ev.accuracy;
    return r;
}

FitnessFn fitness_function(FitnessKind kind) {
    switch (kind) {
        case FitnessKind::kfold: return kfold_fitness;
        case FitnessKind::clustering: return clustering_fitness;
        case FitnessKind::double_aug: return double_aug_fitness;
        case FitnessKind::trainloss: return trainloss_fitness;
    }
    return kfold_fitness;
}

BaselineAccuracy make_baseline(std::shared_ptr<const EmbeddingProvider> provider, ClassifierConfig cfg) {
    return [provider = std::move(provider), cfg](const LabeledDataset& train, const LabeledDataset& heldout) {
        const auto x = provider->embed(train.items());
        const auto head = train_head(x.rows, train.labels(), train.num_classes(), cfg);
        return eval_head(head, provider->embed(heldout.items()).rows, heldout.labels()).accuracy;
    };
}

}  // namespace evoaug
