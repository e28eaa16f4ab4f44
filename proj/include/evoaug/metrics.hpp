#pragma once

#include <vector>

#include <Eigen/Dense>

namespace evoaug {

/// Mean silhouette coefficient under the Euclidean metric, with class labels
/// as clusters. Points in singleton clusters score 0; a = b = 0 scores 0 and
/// a = 0 < b scores 1. Throws SingleCluster when fewer than two clusters are
/// present.
double silhouette(const Eigen::MatrixXd& points, const std::vector<int>& labels);

/// Unweighted mean over clusters of the mean member-to-centroid distance.
double mean_cluster_radius(const Eigen::MatrixXd& points, const std::vector<int>& labels);

/// Davies-Bouldin index. Throws SingleCluster or CoincidentCentroids.
double davies_bouldin(const Eigen::MatrixXd& points, const std::vector<int>& labels);

}  // namespace evoaug
