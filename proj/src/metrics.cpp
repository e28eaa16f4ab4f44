#include "evoaug/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "evoaug/errors.hpp"

namespace evoaug {

namespace {

struct Clusters {
    std::vector<int> ids;                      // distinct labels, ascending
    std::vector<std::vector<Eigen::Index>> members;
    std::vector<int> slot;                     // cluster slot per point
};

Clusters group(const Eigen::MatrixXd& points, const std::vector<int>& labels) {
    if (static_cast<Eigen::Index>(labels.size()) != points.rows())
        throw DimensionMismatch("got " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(points.rows()) + " points");
    std::map<int, std::size_t> index;
    for (int l : labels) index.emplace(l, 0);
    Clusters c;
    for (auto& [label, i] : index) {
        i = c.ids.size();
        c.ids.push_back(label);
    }
    c.members.resize(c.ids.size());
    c.slot.resize(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto s = index.at(labels[i]);
        c.slot[i] = static_cast<int>(s);
        c.members[s].push_back(static_cast<Eigen::Index>(i));
    }
    return c;
}

Eigen::VectorXd centroid(const Eigen::MatrixXd& points, const std::vector<Eigen::Index>& members) {
    // Mean of offsets from the first member, so coincident points give their
    // common value exactly.
    const Eigen::VectorXd origin = points.row(members.front()).transpose();
    Eigen::VectorXd m = Eigen::VectorXd::Zero(points.cols());
    for (auto i : members) m += points.row(i).transpose() - origin;
    return origin + m / static_cast<double>(members.size());
}

double spread(const Eigen::MatrixXd& points, const std::vector<Eigen::Index>& members, const Eigen::VectorXd& c) {
    double s = 0.0;
    for (auto i : members) s += (points.row(i).transpose() - c).norm();
    return s / static_cast<double>(members.size());
}

}  // namespace

double silhouette(const Eigen::MatrixXd& points, const std::vector<int>& labels) {
    const auto c = group(points, labels);
    const std::size_t k = c.ids.size();
    if (k < 2) throw SingleCluster("silhouette needs at least two clusters");
    const Eigen::Index n = points.rows();

    double total = 0.0;
    std::vector<double> sums(k);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto own = static_cast<std::size_t>(c.slot[static_cast<std::size_t>(i)]);
        if (c.members[own].size() < 2) continue;
        std::fill(sums.begin(), sums.end(), 0.0);
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) sums[static_cast<std::size_t>(c.slot[static_cast<std::size_t>(j)])] += (points.row(i) - points.row(j)).norm();
        const double a = sums[own] / static_cast<double>(c.members[own].size() - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t o = 0; o < k; ++o)
            if (o != own) b = std::min(b, sums[o] / static_cast<double>(c.members[o].size()));
        const double m = std::max(a, b);
        total += m > 0.0 ? (b - a) / m : 0.0;
    }
    return total / static_cast<double>(n);
}

double mean_cluster_radius(const Eigen::MatrixXd& points, const std::vector<int>& labels) {
    const auto c = group(points, labels);
    if (c.ids.empty()) return 0.0;
    double total = 0.0;
    for (const auto& m : c.members) total += spread(points, m, centroid(points, m));
    return total / static_cast<double>(c.ids.size());
}

double davies_bouldin(const Eigen::MatrixXd& points, const std::vector<int>& labels) {
    const auto c = group(points, labels);
    const std::size_t k = c.ids.size();
    if (k < 2) throw SingleCluster("Davies-Bouldin index needs at least two clusters");
    std::vector<Eigen::VectorXd> centers;
    std::vector<double> sigma;
    for (const auto& m : c.members) {
        centers.push_back(centroid(points, m));
        sigma.push_back(spread(points, m, centers.back()));
    }
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        double worst = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            if (j == i) continue;
            const double dist = (centers[i] - centers[j]).norm();
            if (dist == 0.0)
                throw CoincidentCentroids("clusters " + std::to_string(c.ids[i]) + " and " + std::to_string(c.ids[j]) +
                                          " share a centroid");
            worst = std::max(worst, (sigma[i] + sigma[j]) / dist);
        }
        total += worst;
    }
    return total / static_cast<double>(k);
}

}  // namespace evoaug
