#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace driveseg {

/// Lloyd's algorithm result. Points and centroids are column vectors.
struct KMeansModel {
    Eigen::MatrixXd centroids;  // e x k
    double inertia = 0.0;       // sum of squared distances to own centroid
    std::vector<double> restart_inertias;    // final inertia per restart
    std::vector<double> iteration_inertias;  // winning restart's trace

    int k() const { return static_cast<int>(centroids.cols()); }
};

/// k-means++ seeded Lloyd iterations, best of `restarts` runs by
/// inertia (ties to the earlier restart). Each restart stops when the
/// assignment stabilizes or after max_iterations.
KMeansModel kmeans_fit(const Eigen::MatrixXd& points, int k, int restarts = 15,
                       std::uint64_t seed = 0, int max_iterations = 300);

/// Nearest centroid by Euclidean distance, ties to the lowest index.
std::vector<int> kmeans_assign(const KMeansModel& model, const Eigen::MatrixXd& points);

}  // namespace driveseg
