#include "evoaug/embedding.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "evoaug/errors.hpp"

namespace evoaug {

void ProviderSpec::validate() const {
    if (target_size < 1) throw ConfigError("embedding target_size must be positive");
    if (kind == Kind::randproj && dim < 1) throw ConfigError("randproj dim must be positive");
    if (kind == Kind::precomputed && path.empty()) throw ConfigError("precomputed embeddings need a path");
}

ProviderSpec::Kind ProviderSpec::parse_kind(const std::string& name) {
    if (name == "pixel") return Kind::pixel;
    if (name == "randproj") return Kind::randproj;
    if (name == "precomputed") return Kind::precomputed;
    if (name == "remote") return Kind::remote;
    throw ConfigError("unknown embedding provider: " + name);
}

std::string ProviderSpec::kind_name() const {
    switch (kind) {
        case Kind::pixel: return "pixel";
        case Kind::randproj: return "randproj";
        case Kind::precomputed: return "precomputed";
        case Kind::remote: return "remote";
    }
    return "pixel";
}

namespace {

struct Tap {
    int src;
    double weight;
};

// Overlap of source cells [s, s+1) with the output cell's footprint
// [o*n/t, (o+1)*n/t), for every output cell o.
std::vector<std::vector<Tap>> area_taps(int n, int t) {
    std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(t));
    const double step = static_cast<double>(n) / t;
    for (int o = 0; o < t; ++o) {
        const double lo = o * step;
        const double hi = (o + 1) * step;
        for (int s = static_cast<int>(std::floor(lo)); s < n && s < hi; ++s) {
            const double w = std::min<double>(hi, s + 1) - std::max<double>(lo, s);
            if (w > 0) taps[static_cast<std::size_t>(o)].push_back({s, w / step});
        }
    }
    return taps;
}

void check_finite(const Eigen::VectorXd& v, const std::string& id) {
    if (!v.allFinite()) throw NonFiniteEmbedding("non-finite embedding for id: " + id);
}

}  // namespace

std::vector<double> pixel_features(const RasterImage& img, int target_size) {
    const auto tx = area_taps(img.width(), target_size);
    const auto ty = area_taps(img.height(), target_size);
    const int ch = img.channels();
    std::vector<double> out(static_cast<std::size_t>(target_size) * target_size * ch, 0.0);
    for (int oy = 0; oy < target_size; ++oy)
        for (int ox = 0; ox < target_size; ++ox)
            for (const auto& [sy, wy] : ty[static_cast<std::size_t>(oy)])
                for (const auto& [sx, wx] : tx[static_cast<std::size_t>(ox)])
                    for (int c = 0; c < ch; ++c)
                        out[(static_cast<std::size_t>(oy) * target_size + ox) * ch + c] +=
                            wy * wx * img.at(sx, sy, c) / 255.0;
    return out;
}

Eigen::MatrixXd random_projection_matrix(int dim, int input_dim, std::uint64_t seed) {
    RandomStream rng(seed);
    Eigen::MatrixXd m(dim, input_dim);
    const double sd = 1.0 / std::sqrt(static_cast<double>(dim));
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < input_dim; ++c) m(r, c) = rng.normal(0.0, sd);
    return m;
}

std::map<std::string, std::vector<double>> read_precomputed(const std::filesystem::path& path, int* dim_out) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open embeddings: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("dim=", 0) != 0)
        throw FormatError(path.string() + ": first line must be dim=<d>");
    int dim = 0;
    try {
        dim = std::stoi(line.substr(4));
    } catch (const std::exception&) {
        throw FormatError(path.string() + ": bad dim header");
    }
    if (dim < 1) throw FormatError(path.string() + ": dim must be positive");

    std::map<std::string, std::vector<double>> table;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ss(line);
        std::string id;
        ss >> id;
        std::vector<double> v;
        // strtod rather than operator>> so that "nan" and "inf" are read and
        // rejected later as non-finite rather than as garbage.
        std::string tok;
        while (ss >> tok) {
            char* end = nullptr;
            const double x = std::strtod(tok.c_str(), &end);
            if (end == tok.c_str() || *end != '\0')
                throw FormatError(path.string() + ":" + std::to_string(line_no) + ": non-numeric value");
            v.push_back(x);
        }
        if (static_cast<int>(v.size()) != dim)
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                              " values, got " + std::to_string(v.size()));
        if (!table.emplace(id, std::move(v)).second)
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": duplicate id " + id);
    }
    if (dim_out) *dim_out = dim;
    return table;
}

void write_precomputed(const std::filesystem::path& path, const EmbeddingMatrix& m) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write embeddings: " + path.string());
    out << "dim=" << m.dim() << '\n';
    char buf[40];
    for (std::size_t i = 0; i < m.size(); ++i) {
        out << m.ids[i];
        for (int j = 0; j < m.dim(); ++j) {
            std::snprintf(buf, sizeof buf, " %.17g", m.rows(static_cast<Eigen::Index>(i), j));
            out << buf;
        }
        out << '\n';
    }
}

EmbeddingProvider::EmbeddingProvider(ProviderSpec spec, std::shared_ptr<WorkerClient> worker)
    : spec_(std::move(spec)), worker_(std::move(worker)) {
    spec_.validate();
    if (spec_.kind == ProviderSpec::Kind::precomputed) table_ = read_precomputed(spec_.path, &table_dim_);
    if (spec_.kind == ProviderSpec::Kind::remote) {
        if (!worker_) throw ConfigError("remote embedding provider needs a worker");
        if (!worker_->capabilities().supports("embed"))
            throw ConfigError("worker " + worker_->config().endpoint + " does not advertise 'embed'");
    }
}

const Eigen::MatrixXd& EmbeddingProvider::projection(int input_dim) const {
    std::lock_guard lk(mu_);
    auto it = projections_.find(input_dim);
    if (it == projections_.end())
        it = projections_.emplace(input_dim, random_projection_matrix(spec_.dim, input_dim, spec_.seed)).first;
    return it->second;
}

Eigen::VectorXd EmbeddingProvider::embed_one(const std::string& id, const RasterImage& img) const {
    Eigen::VectorXd v;
    switch (spec_.kind) {
        case ProviderSpec::Kind::pixel: {
            const auto f = pixel_features(img, spec_.target_size);
            v = Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
            break;
        }
        case ProviderSpec::Kind::randproj: {
            const auto f = pixel_features(img, spec_.target_size);
            const Eigen::Map<const Eigen::VectorXd> x(f.data(), static_cast<Eigen::Index>(f.size()));
            v = projection(static_cast<int>(f.size())) * x;
            break;
        }
        case ProviderSpec::Kind::precomputed: {
            const auto it = table_.find(id);
            if (it == table_.end()) throw MissingEmbedding(id);
            v = Eigen::Map<const Eigen::VectorXd>(it->second.data(), table_dim_);
            break;
        }
        case ProviderSpec::Kind::remote: {
            const auto e = worker_->embed(img);
            if (e.empty()) throw DimensionMismatch("worker returned an empty embedding for " + id);
            v = Eigen::Map<const Eigen::VectorXd>(e.data(), static_cast<Eigen::Index>(e.size()));
            break;
        }
    }
    check_finite(v, id);
    return v;
}

EmbeddingMatrix EmbeddingProvider::embed(std::span<const LabeledItem> items) const {
    EmbeddingMatrix m;
    m.ids.reserve(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto v = embed_one(items[i].id, items[i].image);
        if (i == 0) m.rows.resize(static_cast<Eigen::Index>(items.size()), v.size());
        if (v.size() != m.rows.cols())
            throw DimensionMismatch("embedding of " + items[i].id + " has dimension " + std::to_string(v.size()) +
                                    ", expected " + std::to_string(m.rows.cols()));
        m.rows.row(static_cast<Eigen::Index>(i)) = v.transpose();
        m.ids.push_back(items[i].id);
    }
    return m;
}

EmbeddingMatrix embed(const EmbeddingProvider& provider, std::span<const LabeledItem> items) {
    return provider.embed(items);
}

}  // namespace evoaug
