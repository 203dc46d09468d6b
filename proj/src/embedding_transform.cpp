#include "driveseg/embedding_transform.hpp"

#include <Eigen/Eigenvalues>

#include "driveseg/errors.hpp"

namespace driveseg {

Eigen::MatrixXd EmbeddingConditioner::apply(const Eigen::MatrixXd& session_embeddings) const {
    if (session_embeddings.rows() != mean.size())
        throw DataError("embedding dimension " + std::to_string(session_embeddings.rows()) +
                        " does not match the fitted conditioner (" +
                        std::to_string(mean.size()) + ")");
    Eigen::MatrixXd out = projection * (session_embeddings.colwise() - mean);
    if (out.cols() > 0) out.colwise() -= Eigen::VectorXd(out.rowwise().mean());
    return out;
}

EmbeddingConditioner fit_embedding_conditioner(const std::vector<Eigen::MatrixXd>& sessions,
                                               long lag) {
    if (sessions.empty()) throw DataError("cannot fit a conditioner on zero sessions");
    if (lag < 1) throw DataError("conditioner lag must be at least 1");
    const long e = sessions.front().rows();
    long total = 0;
    for (const auto& s : sessions) {
        if (s.rows() != e)
            throw DataError("sessions disagree on embedding dimension: " + std::to_string(e) +
                            " vs " + std::to_string(s.rows()));
        total += s.cols();
    }
    if (total == 0) throw DataError("cannot fit a conditioner on zero timesteps");

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(e);
    for (const auto& s : sessions) mean += s.rowwise().sum();
    mean /= static_cast<double>(total);

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(e, e);
    for (const auto& s : sessions) {
        Eigen::MatrixXd c = s.colwise() - mean;
        cov.noalias() += c * c.transpose();
    }
    cov /= static_cast<double>(total);

    // Rank-deficient pools get a floor relative to the top eigenvalue so
    // flat directions map to (numerically) zero instead of amplified noise.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const double lmax = std::max(es.eigenvalues().maxCoeff(), 0.0);
    const double floor = std::max(lmax * 1e-9, 1e-30);
    Eigen::VectorXd lam = es.eigenvalues().array().max(floor).matrix();
    Eigen::MatrixXd whiten =
        lam.array().rsqrt().matrix().asDiagonal() * es.eigenvectors().transpose();

    // Lag-L difference covariance of the whitened data, within sessions.
    // With unit variance, Var(u_{t+L} - u_t) = 2 (1 - rho_L) per direction.
    Eigen::MatrixXd diff_cov = Eigen::MatrixXd::Zero(e, e);
    long pairs = 0;
    for (const auto& s : sessions) {
        if (s.cols() <= lag) continue;
        Eigen::MatrixXd u = whiten * (s.colwise() - mean);
        Eigen::MatrixXd d = u.rightCols(u.cols() - lag) - u.leftCols(u.cols() - lag);
        diff_cov.noalias() += d * d.transpose();
        pairs += d.cols();
    }

    EmbeddingConditioner cond;
    cond.mean = mean;
    cond.lag = lag;
    if (pairs > 0) {
        diff_cov /= static_cast<double>(pairs);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ed(diff_cov);
        cond.slowness =
            (1.0 - ed.eigenvalues().array() / 2.0).cwiseMax(0.0).cwiseMin(1.0).matrix();
        cond.projection = cond.slowness.asDiagonal() * ed.eigenvectors().transpose() * whiten;
    } else {
        cond.slowness = Eigen::VectorXd::Ones(e);
        cond.projection = whiten;
    }
    return cond;
}

}  // namespace driveseg
