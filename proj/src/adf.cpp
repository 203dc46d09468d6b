#include "driveseg/adf.hpp"

#include <cmath>

namespace driveseg {

namespace {

// MacKinnon (2010) response-surface constants for the tau_c statistic
struct CvRow {
    double level, b_inf, b1, b2, b3;
};
constexpr CvRow kCriticalValues[] = {
    {0.01, -3.43035, -6.5393, -16.786, -79.433},
    {0.05, -2.86154, -2.8903, -4.234, -40.040},
    {0.10, -2.56677, -1.5384, -2.809, 0.0},
};

double critical_value(double alpha, long n) {
    const CvRow* best = &kCriticalValues[0];
    for (const auto& row : kCriticalValues)
        if (std::abs(row.level - alpha) < std::abs(best->level - alpha)) best = &row;
    const double t = static_cast<double>(n);
    return best->b_inf + best->b1 / t + best->b2 / (t * t) + best->b3 / (t * t * t);
}

}  // namespace

AdfResult adf_test(const Eigen::Ref<const Eigen::VectorXd>& y, double alpha, int lags) {
    AdfResult res;
    const long n = y.size();
    const long p = lags;
    const long m = n - 1 - p;       // usable rows
    const long k = 2 + p;           // constant, level, lagged diffs

    const double spread = y.maxCoeff() - y.minCoeff();
    if (spread < 1e-12 || m < k + 1) {
        // constant span, or too short to regress: treat as stationary
        res.stationary = true;
        res.critical_value = critical_value(alpha, std::max<long>(m, 1));
        return res;
    }

    Eigen::MatrixXd X(m, k);
    Eigen::VectorXd z(m);
    for (long i = 0; i < m; ++i) {
        const long t = p + 1 + i;
        z(i) = y(t) - y(t - 1);
        X(i, 0) = 1.0;
        X(i, 1) = y(t - 1);
        for (long j = 0; j < p; ++j) X(i, 2 + j) = y(t - 1 - j) - y(t - 2 - j);
    }

    const Eigen::MatrixXd xtx = X.transpose() * X;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        res.stationary = true;  // collinear regressors, degenerate span
        res.critical_value = critical_value(alpha, m);
        return res;
    }
    const Eigen::VectorXd beta = ldlt.solve(X.transpose() * z);
    const double rss = (z - X * beta).squaredNorm();
    const double dof = static_cast<double>(m - k);
    const double sigma2 = rss / std::max(dof, 1.0);
    const Eigen::MatrixXd xtx_inv = ldlt.solve(Eigen::MatrixXd::Identity(k, k));
    const double se = std::sqrt(std::max(sigma2 * xtx_inv(1, 1), 0.0));

    res.critical_value = critical_value(alpha, m);
    if (se < 1e-300) {
        res.stationary = true;
        return res;
    }
    res.t_stat = beta(1) / se;
    res.stationary = res.t_stat < res.critical_value;
    return res;
}

}  // namespace driveseg
