#include "driveseg/ticc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "driveseg/errors.hpp"
#include "driveseg/kmeans.hpp"

namespace driveseg {

void TiccParams::validate() const {
    if (k < 1) throw ConfigError("TICC requires k >= 1");
    if (window < 1) throw ConfigError("TICC window must be >= 1");
    if (lambda < 0.0) throw ConfigError("TICC lambda must be >= 0");
    if (beta < 0.0) throw ConfigError("TICC beta must be >= 0");
    if (!(threshold > 0.0)) throw ConfigError("ADMM threshold must be positive");
    if (max_iterations < 1) throw ConfigError("TICC needs at least one outer iteration");
    if (!(rho > 0.0)) throw ConfigError("ADMM rho must be positive");
    if (init_restarts < 1) throw ConfigError("TICC needs at least one init restart");
}

double soft_threshold(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

Eigen::MatrixXd stack_windows(const Eigen::MatrixXd& rep, int window) {
    long e = rep.rows();
    long count = rep.cols() - window + 1;
    if (count < 1)
        throw DataError("representation of length " + std::to_string(rep.cols()) +
                        " is shorter than the TICC window " + std::to_string(window));
    Eigen::MatrixXd stacked(e * window, count);
    for (long t = 0; t < count; ++t)
        for (int s = 0; s < window; ++s) stacked.col(t).segment(s * e, e) = rep.col(t + s);
    return stacked;
}

std::vector<int> assign_dp(const Eigen::MatrixXd& costs, double beta) {
    if (beta < 0.0) throw ConfigError("switching penalty must be >= 0");
    if (!costs.allFinite()) throw DataError("assignment costs contain non-finite values");
    long t_len = costs.rows();
    int k = static_cast<int>(costs.cols());
    if (t_len == 0) return {};

    Eigen::VectorXd prev = costs.row(0).transpose();
    Eigen::MatrixXi parent(t_len, k);
    for (long t = 1; t < t_len; ++t) {
        Eigen::VectorXd cur(k);
        for (int j = 0; j < k; ++j) {
            int best_i = 0;
            double best = prev[0] + (j != 0 ? beta : 0.0);
            for (int i = 1; i < k; ++i) {
                double c = prev[i] + (i != j ? beta : 0.0);
                if (c < best) {
                    best = c;
                    best_i = i;
                }
            }
            cur[j] = best + costs(t, j);
            parent(t, j) = best_i;
        }
        prev = cur;
    }

    int last = 0;
    for (int j = 1; j < k; ++j)
        if (prev[j] < prev[last]) last = j;
    std::vector<int> seq(t_len);
    seq[t_len - 1] = last;
    for (long t = t_len - 1; t > 0; --t) seq[t - 1] = parent(t, seq[t]);
    return seq;
}

namespace {

// Toeplitz tie groups: entry (i,j) in block (br,bc) is tied to every
// entry with the same block offset bc-br and in-block position, plus the
// transposed entries of the mirrored offset.
struct TieGroups {
    std::vector<int> group_of;  // p*p entries
    int count = 0;
};

TieGroups build_tie_groups(long p, int e) {
    TieGroups ties;
    ties.group_of.resize(p * p);
    std::map<std::tuple<long, long, long>, int> ids;
    for (long i = 0; i < p; ++i) {
        for (long j = 0; j < p; ++j) {
            long delta = j / e - i / e;
            long a = i % e, b = j % e;
            std::tuple<long, long, long> key =
                delta > 0   ? std::tuple{delta, a, b}
                : delta < 0 ? std::tuple{-delta, b, a}
                            : std::tuple{0L, std::min(a, b), std::max(a, b)};
            auto [it, inserted] = ids.try_emplace(key, ties.count);
            if (inserted) ++ties.count;
            ties.group_of[i * p + j] = it->second;
        }
    }
    return ties;
}

}  // namespace

Eigen::MatrixXd toeplitz_glasso_admm(const Eigen::MatrixXd& S, int block_dim, double lambda,
                                     long n_samples, double rho, double threshold,
                                     AdmmDiagnostics* diagnostics) {
    (void)n_samples;
    long p = S.rows();
    if (S.cols() != p) throw DataError("covariance matrix must be square");
    if (block_dim < 1 || p % block_dim != 0)
        throw DataError("matrix size " + std::to_string(p) + " is not a multiple of block size " +
                        std::to_string(block_dim));
    if (!S.allFinite()) throw DataError("covariance contains non-finite values");
    if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-9)
        throw DataError("covariance matrix is not symmetric");
    if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
    if (!(rho > 0.0)) throw ConfigError("rho must be positive");
    if (!(threshold > 0.0)) throw ConfigError("threshold must be positive");

    TieGroups ties = build_tie_groups(p, block_dim);
    Eigen::MatrixXd Z = Eigen::MatrixXd::Identity(p, p);
    Eigen::MatrixXd U = Eigen::MatrixXd::Zero(p, p);
    Eigen::MatrixXd theta(p, p);
    std::vector<double> group_sum(ties.count);
    std::vector<long> group_n(ties.count);

    double primal = 0.0, dual = 0.0;
    int iterations = 0;
    for (int it = 0; it < 1000; ++it) {
        iterations = it + 1;

        // Theta-step: closed form through the eigenvalues of rho(Z-U)-S
        Eigen::MatrixXd q = rho * (Z - U) - S;
        q = 0.5 * (q + q.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
        Eigen::VectorXd d = es.eigenvalues();
        for (long i = 0; i < p; ++i) d[i] = (d[i] + std::sqrt(d[i] * d[i] + 4.0 * rho)) / (2.0 * rho);
        theta = es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();

        // Z-step: soft-threshold the mean of every Toeplitz tie group
        Eigen::MatrixXd z_prev = Z;
        Eigen::MatrixXd a = theta + U;
        std::fill(group_sum.begin(), group_sum.end(), 0.0);
        std::fill(group_n.begin(), group_n.end(), 0L);
        const double* a_data = a.data();
        for (long idx = 0; idx < p * p; ++idx) {
            group_sum[ties.group_of[idx]] += a_data[idx];
            ++group_n[ties.group_of[idx]];
        }
        double* z_data = Z.data();
        for (long idx = 0; idx < p * p; ++idx) {
            int g = ties.group_of[idx];
            z_data[idx] = soft_threshold(group_sum[g] / static_cast<double>(group_n[g]),
                                         lambda / rho);
        }

        U += theta - Z;
        primal = (theta - Z).norm();
        dual = rho * (Z - z_prev).norm();
        if (std::max(primal, dual) < threshold) break;
    }
    if (diagnostics != nullptr) {
        diagnostics->iterations = iterations;
        diagnostics->primal_residual = primal;
        diagnostics->dual_residual = dual;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> check(Z);
    double smallest = check.eigenvalues().minCoeff();
    if (smallest <= 0.0)
        throw NumericalError("Toeplitz graphical lasso produced a non-PD precision matrix "
                             "(smallest eigenvalue " +
                             std::to_string(smallest) + ")");
    return Z;
}

namespace {

struct FittedCluster {
    Eigen::VectorXd mean;
    Eigen::MatrixXd precision;
    double logdet = 0.0;
    long count = 0;
};

double cluster_nll(const FittedCluster& c, const Eigen::VectorXd& x, double log2pi_term) {
    Eigen::VectorXd d = x - c.mean;
    return 0.5 * d.dot(c.precision * d) - 0.5 * c.logdet + log2pi_term;
}

double count_switches(const std::vector<std::vector<int>>& assignments) {
    double switches = 0.0;
    for (const auto& seq : assignments)
        for (std::size_t t = 1; t < seq.size(); ++t)
            if (seq[t] != seq[t - 1]) switches += 1.0;
    return switches;
}

}  // namespace

TiccFitResult ticc_fit(const std::vector<Eigen::MatrixXd>& sessions, const TiccParams& params) {
    params.validate();
    if (sessions.empty()) throw DataError("TICC requires at least one session");
    long e = sessions.front().rows();
    for (const auto& s : sessions) {
        if (s.rows() != e) throw DataError("sessions disagree on representation dimension");
        if (s.cols() < params.window)
            throw DataError("session of length " + std::to_string(s.cols()) +
                            " is shorter than the TICC window " + std::to_string(params.window));
    }

    long p = e * params.window;
    std::vector<Eigen::MatrixXd> stacked;
    long total = 0;
    for (const auto& s : sessions) {
        stacked.push_back(stack_windows(s, params.window));
        total += stacked.back().cols();
    }
    if (total < static_cast<long>(params.k) * params.window)
        throw DataError("only " + std::to_string(total) + " stacked windows for k=" +
                        std::to_string(params.k) + ", need at least k*W");

    Eigen::MatrixXd pooled(p, total);
    {
        long at = 0;
        for (const auto& x : stacked) {
            pooled.middleCols(at, x.cols()) = x;
            at += x.cols();
        }
    }

    // initialization: k-means over the stacked windows
    std::vector<int> flat(total, 0);
    if (params.k > 1) {
        KMeansModel init =
            kmeans_fit(pooled, params.k, params.init_restarts, params.seed);
        flat = kmeans_assign(init, pooled);
        // surrogate badness for the reseed rule before a model exists
        std::vector<std::pair<double, long>> badness(total);
        for (long i = 0; i < total; ++i)
            badness[i] = {-(init.centroids.col(flat[i]) - pooled.col(i)).squaredNorm(), i};
        std::vector<long> counts(params.k, 0);
        for (int a : flat) ++counts[a];
        long steal = std::max<long>(2, total / (10 * params.k));
        std::sort(badness.begin(), badness.end());
        std::size_t next = 0;
        for (int j = 0; j < params.k; ++j) {
            if (counts[j] > 0) continue;
            for (long s = 0; s < steal && next < badness.size(); ++next) {
                long i = badness[next].second;
                if (counts[flat[i]] <= 1) continue;  // never empty a donor
                --counts[flat[i]];
                flat[i] = j;
                ++counts[j];
                ++s;
            }
        }
    }

    const double log2pi_term = 0.5 * static_cast<double>(p) * std::log(2.0 * std::acos(-1.0));
    std::vector<FittedCluster> clusters(params.k);

    auto objective = [&](const std::vector<int>& assignment) {
        double nll = 0.0;
        for (long i = 0; i < total; ++i)
            nll += cluster_nll(clusters[assignment[i]], pooled.col(i), log2pi_term);
        double l1 = 0.0;
        for (const auto& c : clusters)
            if (c.precision.size() > 0) l1 += c.precision.cwiseAbs().sum();
        double switches = 0.0;
        long at = 0;
        for (const auto& x : stacked) {
            for (long t = 1; t < x.cols(); ++t)
                if (assignment[at + t] != assignment[at + t - 1]) switches += 1.0;
            at += x.cols();
        }
        return nll + params.beta * switches + params.lambda * l1;
    };

    std::vector<double> history;
    std::vector<int> previous = flat;
    for (int outer = 0; outer < params.max_iterations; ++outer) {
        // M-step: per-cluster mean and Toeplitz-lasso precision. Passing
        // 2*lambda/n_j keeps the alternation an exact coordinate descent
        // on (sum NLL + beta*switches + lambda*sum ||Theta_j||_1).
        for (int j = 0; j < params.k; ++j) {
            std::vector<long> members;
            for (long i = 0; i < total; ++i)
                if (flat[i] == j) members.push_back(i);
            if (members.empty()) continue;  // keep the previous estimate
            long n_j = static_cast<long>(members.size());
            Eigen::VectorXd mu = Eigen::VectorXd::Zero(p);
            for (long i : members) mu += pooled.col(i);
            mu /= static_cast<double>(n_j);
            Eigen::MatrixXd s_j = Eigen::MatrixXd::Zero(p, p);
            for (long i : members) {
                Eigen::VectorXd d = pooled.col(i) - mu;
                s_j.noalias() += d * d.transpose();
            }
            s_j /= static_cast<double>(n_j);
            double lambda_eff = 2.0 * params.lambda / static_cast<double>(n_j);
            clusters[j].mean = mu;
            clusters[j].precision = toeplitz_glasso_admm(s_j, static_cast<int>(e), lambda_eff,
                                                         n_j, params.rho, params.threshold);
            Eigen::LLT<Eigen::MatrixXd> llt(clusters[j].precision);
            clusters[j].logdet = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
            clusters[j].count = n_j;
        }
        history.push_back(objective(flat));

        // E-step: Viterbi over each session
        long at = 0;
        for (const auto& x : stacked) {
            Eigen::MatrixXd costs(x.cols(), params.k);
            for (int j = 0; j < params.k; ++j)
                for (long t = 0; t < x.cols(); ++t)
                    costs(t, j) = cluster_nll(clusters[j], x.col(t), log2pi_term);
            std::vector<int> seq = assign_dp(costs, params.beta);
            std::copy(seq.begin(), seq.end(), flat.begin() + at);
            at += x.cols();
        }
        history.push_back(objective(flat));

        // re-seed empty clusters with the worst-fitting points
        std::vector<long> counts(params.k, 0);
        for (int a : flat) ++counts[a];
        bool reseeded = false;
        for (int j = 0; j < params.k; ++j) {
            if (counts[j] > 0) continue;
            std::vector<std::pair<double, long>> badness(total);
            for (long i = 0; i < total; ++i)
                badness[i] = {-cluster_nll(clusters[flat[i]], pooled.col(i), log2pi_term), i};
            std::sort(badness.begin(), badness.end());
            long steal = std::max<long>(2, total / (10 * params.k));
            long stolen = 0;
            for (const auto& [neg_nll, i] : badness) {
                if (stolen >= steal) break;
                if (counts[flat[i]] <= 1) continue;
                --counts[flat[i]];
                flat[i] = j;
                ++counts[j];
                ++stolen;
            }
            reseeded = true;
        }

        if (!reseeded && flat == previous) break;  // converged, nothing further changes
        previous = flat;
    }

    std::vector<long> sizes(params.k, 0);
    for (int a : flat) ++sizes[a];
    if (params.k >= 2) {
        int populated = 0;
        for (long s : sizes)
            if (s > 0) ++populated;
        if (populated <= 1) {
            std::string detail;
            for (long s : sizes) detail += (detail.empty() ? "" : ", ") + std::to_string(s);
            throw NumericalError("TICC collapsed to a single cluster (sizes: " + detail + ")");
        }
    }

    TiccFitResult result;
    result.model.params = params;
    result.model.block_dim = static_cast<int>(e);
    result.model.clusters.resize(params.k);
    for (int j = 0; j < params.k; ++j) {
        result.model.clusters[j].mean = clusters[j].mean;
        result.model.clusters[j].precision = clusters[j].precision;
    }
    result.objective_history = std::move(history);

    long at = 0;
    for (const auto& x : stacked) {
        std::vector<int> seq(flat.begin() + at, flat.begin() + at + x.cols());
        seq.resize(seq.size() + params.window - 1, seq.back());  // tail inherits
        result.assignments.push_back(std::move(seq));
        at += x.cols();
    }
    return result;
}

}  // namespace driveseg
