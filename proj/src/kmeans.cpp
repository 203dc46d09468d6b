#include "driveseg/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "driveseg/errors.hpp"
#include "driveseg/rng.hpp"

namespace driveseg {

namespace {

long count_distinct_columns(const Eigen::MatrixXd& points, long stop_at) {
    std::vector<long> order(points.cols());
    std::iota(order.begin(), order.end(), 0L);
    auto lex_less = [&](long a, long b) {
        for (long r = 0; r < points.rows(); ++r) {
            if (points(r, a) != points(r, b)) return points(r, a) < points(r, b);
        }
        return false;
    };
    std::sort(order.begin(), order.end(), lex_less);
    long distinct = 1;
    for (std::size_t i = 1; i < order.size() && distinct < stop_at; ++i) {
        if (lex_less(order[i - 1], order[i])) ++distinct;
    }
    return distinct;
}

int nearest_centroid(const Eigen::MatrixXd& centroids, const Eigen::VectorXd& point) {
    int best = 0;
    double best_d = (centroids.col(0) - point).squaredNorm();
    for (int j = 1; j < centroids.cols(); ++j) {
        double d = (centroids.col(j) - point).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}

struct RestartResult {
    Eigen::MatrixXd centroids;
    double inertia = std::numeric_limits<double>::infinity();
    std::vector<double> trace;
};

RestartResult run_restart(const Eigen::MatrixXd& points, int k, Rng& rng, int max_iterations) {
    long m = points.cols();

    // k-means++: first centroid uniform, the rest sampled with
    // probability proportional to squared distance to the chosen set
    Eigen::MatrixXd centroids(points.rows(), k);
    centroids.col(0) = points.col(static_cast<long>(rng.uniform_index(m)));
    Eigen::VectorXd d2 =
        (points.colwise() - centroids.col(0)).colwise().squaredNorm().transpose();
    for (int c = 1; c < k; ++c) {
        double total = d2.sum();
        long chosen;
        if (total <= 0.0) {
            chosen = static_cast<long>(rng.uniform_index(m));
        } else {
            double target = rng.uniform() * total;
            chosen = m - 1;
            double acc = 0.0;
            for (long i = 0; i < m; ++i) {
                acc += d2[i];
                if (acc >= target) {
                    chosen = i;
                    break;
                }
            }
        }
        centroids.col(c) = points.col(chosen);
        d2 = d2.cwiseMin(
            (points.colwise() - centroids.col(c)).colwise().squaredNorm().transpose());
    }

    RestartResult result;
    std::vector<int> assignment(m, -1);
    auto assign_pass = [&]() {
        bool changed = false;
        double inertia = 0.0;
        for (long i = 0; i < m; ++i) {
            int j = nearest_centroid(centroids, points.col(i));
            inertia += (centroids.col(j) - points.col(i)).squaredNorm();
            if (j != assignment[i]) changed = true;
            assignment[i] = j;
        }
        result.trace.push_back(inertia);
        result.inertia = inertia;
        return changed;
    };
    bool stable = false;
    for (int iter = 0; iter < max_iterations; ++iter) {
        if (!assign_pass()) {
            stable = true;
            break;
        }

        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(points.rows(), k);
        std::vector<long> counts(k, 0);
        for (long i = 0; i < m; ++i) {
            sums.col(assignment[i]) += points.col(i);
            ++counts[assignment[i]];
        }
        for (int j = 0; j < k; ++j) {
            if (counts[j] > 0) centroids.col(j) = sums.col(j) / static_cast<double>(counts[j]);
        }
        // an empty cluster takes the point currently fit worst
        std::vector<bool> taken(m, false);
        for (int j = 0; j < k; ++j) {
            if (counts[j] > 0) continue;
            long worst = -1;
            double worst_d = -1.0;
            for (long i = 0; i < m; ++i) {
                if (taken[i]) continue;
                double d = (centroids.col(assignment[i]) - points.col(i)).squaredNorm();
                if (d > worst_d) {
                    worst_d = d;
                    worst = i;
                }
            }
            centroids.col(j) = points.col(worst);
            taken[worst] = true;
        }
    }
    // keep inertia and centroids consistent when the cap cut the loop
    if (!stable) assign_pass();
    result.centroids = centroids;
    return result;
}

}  // namespace

KMeansModel kmeans_fit(const Eigen::MatrixXd& points, int k, int restarts, std::uint64_t seed,
                       int max_iterations) {
    if (k < 2) throw ConfigError("k-means requires k >= 2");
    if (restarts < 1) throw ConfigError("k-means requires at least one restart");
    if (max_iterations < 1) throw ConfigError("k-means requires at least one iteration");
    if (points.cols() < k)
        throw DataError("k-means with k=" + std::to_string(k) + " needs at least k points, got " +
                        std::to_string(points.cols()));
    if (!points.allFinite()) throw DataError("k-means input contains non-finite values");
    if (count_distinct_columns(points, k) < k)
        throw DataError("k-means with k=" + std::to_string(k) +
                        " needs at least k distinct points");

    Rng base(seed);
    KMeansModel model;
    int best = -1;
    for (int r = 0; r < restarts; ++r) {
        Rng rng = base.fork(static_cast<std::uint64_t>(r));
        RestartResult result = run_restart(points, k, rng, max_iterations);
        model.restart_inertias.push_back(result.inertia);
        if (best < 0 || result.inertia < model.inertia) {
            best = r;
            model.inertia = result.inertia;
            model.centroids = std::move(result.centroids);
            model.iteration_inertias = std::move(result.trace);
        }
    }
    return model;
}

std::vector<int> kmeans_assign(const KMeansModel& model, const Eigen::MatrixXd& points) {
    if (points.rows() != model.centroids.rows())
        throw DataError("points have dimension " + std::to_string(points.rows()) +
                        ", centroids have " + std::to_string(model.centroids.rows()));
    std::vector<int> assignment(points.cols());
    for (long i = 0; i < points.cols(); ++i)
        assignment[i] = nearest_centroid(model.centroids, points.col(i));
    return assignment;
}

}  // namespace driveseg
