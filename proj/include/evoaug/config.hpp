#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "evoaug/dataset.hpp"
#include "evoaug/embedding.hpp"
#include "evoaug/evolution.hpp"
#include "evoaug/fitness.hpp"
#include "evoaug/operators.hpp"
#include "evoaug/synthetic.hpp"
#include "evoaug/worker.hpp"

namespace evoaug {

struct DatasetSource {
    enum class Kind { synthetic, directory, manifest };
    Kind kind = Kind::synthetic;
    std::filesystem::path path;
    BlobDatasetSpec synthetic;
    bool synthetic_seed_set = false;
};

struct FewShotSpec {
    int n_way = 0;
    int k_shot = 0;
    int trials = 1;
};

struct MockSpec {
    std::string name;
    MockBehavior behavior;
};

struct WorkerSpec {
    RemoteOperatorConfig remote;
    /// Tags to bind to the worker; empty means everything it advertises.
    std::vector<std::string> operators;
};

/// Parsed run configuration (TOML). Relative paths are resolved against the
/// config file's directory at load time.
struct RunConfig {
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "evoaug_out";
    DatasetSource dataset;
    std::optional<FewShotSpec> fewshot;
    FitnessKind fitness = FitnessKind::kfold;
    int folds = 0;
    int augment_multiplier = 2;
    ClassifierConfig classifier;
    ClusterWeights cluster_weights;
    ClusterMetric metric = ClusterMetric::silhouette_radius;
    EvolutionConfig evolution;
    ProviderSpec embedding;
    bool embedding_seed_set = false;
    ClassicalRanges classical;
    std::vector<MockSpec> mocks;
    std::optional<WorkerSpec> worker;

    /// Re-derives every seed not pinned explicitly in the file.
    void set_seed(std::uint64_t s);
};

/// Throws ConfigError (with the offending key) or IoError.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& toml_text, const std::filesystem::path& base_dir = ".");

/// Applies EVOAUG_WORKER (if set) on top of the config's worker section.
void apply_worker_env(RunConfig& cfg);

/// Registry with Classical, NoOp, the configured mocks and, when a worker is
/// configured, its advertised operators.
struct OperatorSetup {
    std::shared_ptr<WorkerClient> worker;
    std::shared_ptr<OperatorRegistry> registry;
};
OperatorSetup build_operators(const RunConfig& cfg);

/// Everything a command needs, built from a RunConfig.
struct Session {
    RunConfig config;
    OperatorSetup operators;
    std::shared_ptr<EmbeddingProvider> provider;
    FitnessContext context;
    FitnessFn fitness;
};

/// Loads the dataset, applies few-shot selection and checks the selected
/// fitness's preconditions (fold counts in particular).
Session open_session(RunConfig cfg);

LabeledDataset load_source(const DatasetSource& src);

}  // namespace evoaug
