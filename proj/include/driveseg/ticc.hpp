#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace driveseg {

struct TiccParams {
    int k = 2;
    int window = 10;            // W, stacked timesteps per sample
    double lambda = 5e-3;       // L1 weight on each precision matrix
    double beta = 400.0;        // switching penalty
    double threshold = 2e-5;    // ADMM residual stop
    int max_iterations = 3;     // outer EM iterations
    double rho = 1.0;           // ADMM step
    int init_restarts = 15;     // k-means restarts for initialization
    std::uint64_t seed = 0;

    void validate() const;
};

/// One Markov-regime Gaussian over stacked windows in R^{e*W}.
struct TiccCluster {
    Eigen::VectorXd mean;
    Eigen::MatrixXd precision;  // symmetric PD, block-Toeplitz in e x e blocks
};

struct TiccModel {
    TiccParams params;
    int block_dim = 0;  // e
    std::vector<TiccCluster> clusters;
};

struct TiccFitResult {
    TiccModel model;
    // per session, aligned to representation length: the last W-1
    // positions have no stacked window and inherit the final assignment
    std::vector<std::vector<int>> assignments;
    // objective after every half-step (M, E, M, E, ...), non-increasing
    std::vector<double> objective_history;
};

struct AdmmDiagnostics {
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
};

double soft_threshold(double x, double t);

/// Columns t of the result stack rep columns t..t+window-1.
Eigen::MatrixXd stack_windows(const Eigen::MatrixXd& rep, int window);

/// Minimum-cost assignment sequence under a per-switch penalty:
/// argmin over sequences of sum_t costs(t, seq_t) + beta * switches.
/// Viterbi dynamic program; ties break toward the lower cluster index.
std::vector<int> assign_dp(const Eigen::MatrixXd& costs, double beta);

/// min -log det(Theta) + tr(S Theta) + lambda * ||Theta||_1 subject to
/// Theta block-Toeplitz with block_dim x block_dim sub-blocks, solved by
/// ADMM. The returned matrix satisfies the Toeplitz ties and symmetry
/// exactly. n_samples is carried for interface parity with covariance
/// estimation; the objective above is what is solved.
Eigen::MatrixXd toeplitz_glasso_admm(const Eigen::MatrixXd& S, int block_dim, double lambda,
                                     long n_samples, double rho = 1.0, double threshold = 2e-5,
                                     AdmmDiagnostics* diagnostics = nullptr);

/// Alternating Toeplitz-graphical-lasso M-steps and Viterbi E-steps over
/// stacked windows of the per-session representations (e x M each),
/// initialized by k-means on the stacked windows.
TiccFitResult ticc_fit(const std::vector<Eigen::MatrixXd>& sessions, const TiccParams& params);

}  // namespace driveseg
