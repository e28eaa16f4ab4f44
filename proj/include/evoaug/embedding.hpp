#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "evoaug/dataset.hpp"
#include "evoaug/worker.hpp"

namespace evoaug {

/// One embedding per row, aligned with `ids`.
struct EmbeddingMatrix {
    std::vector<std::string> ids;
    Eigen::MatrixXd rows;

    int dim() const { return static_cast<int>(rows.cols()); }
    std::size_t size() const { return ids.size(); }
};

struct ProviderSpec {
    enum class Kind { pixel, randproj, precomputed, remote };
    Kind kind = Kind::pixel;
    /// Side of the area-averaged thumbnail (pixel and randproj).
    int target_size = 8;
    /// Output dimension (randproj).
    int dim = 64;
    std::uint64_t seed = 0;
    std::filesystem::path path;  // precomputed

    void validate() const;
    static Kind parse_kind(const std::string& name);
    std::string kind_name() const;
};

/// Area-averaged target_size x target_size thumbnail, flattened
/// channel-interleaved and scaled to [0, 1].
std::vector<double> pixel_features(const RasterImage& img, int target_size);

/// dim x input_dim matrix with i.i.d. N(0, 1/dim) entries drawn from `seed`.
Eigen::MatrixXd random_projection_matrix(int dim, int input_dim, std::uint64_t seed);

/// Precomputed embedding table; text format is a header line "dim=<d>"
/// followed by lines "<id> <d floats>".
std::map<std::string, std::vector<double>> read_precomputed(const std::filesystem::path& path, int* dim = nullptr);
void write_precomputed(const std::filesystem::path& path, const EmbeddingMatrix& m);

/// Maps images to vectors according to a ProviderSpec. Pure given the spec;
/// safe to share across threads.
class EmbeddingProvider {
public:
    explicit EmbeddingProvider(ProviderSpec spec, std::shared_ptr<WorkerClient> worker = nullptr);

    const ProviderSpec& spec() const { return spec_; }

    /// Rows follow the input order. Throws MissingEmbedding,
    /// NonFiniteEmbedding, DimensionMismatch or WorkerUnreachable.
    EmbeddingMatrix embed(std::span<const LabeledItem> items) const;
    Eigen::VectorXd embed_one(const std::string& id, const RasterImage& img) const;

private:
    const Eigen::MatrixXd& projection(int input_dim) const;

    ProviderSpec spec_;
    std::shared_ptr<WorkerClient> worker_;
    std::map<std::string, std::vector<double>> table_;
    int table_dim_ = 0;
    mutable std::mutex mu_;
    mutable std::map<int, Eigen::MatrixXd> projections_;
};

EmbeddingMatrix embed(const EmbeddingProvider& provider, std::span<const LabeledItem> items);

}  // namespace evoaug
