#pragma once

#include <Eigen/Dense>

namespace driveseg {

struct AdfResult {
    double t_stat = 0.0;
    double critical_value = 0.0;
    bool stationary = false;  // unit root rejected at the given level
};

/// Augmented Dickey-Fuller test with constant term. Regresses the first
/// difference on the lagged level plus `lags` lagged differences and
/// compares the t-statistic of the level coefficient against the
/// MacKinnon critical value. Supported significance levels are 0.01,
/// 0.05 and 0.10 (the nearest is used). Constant or too-short spans
/// count as stationary.
AdfResult adf_test(const Eigen::Ref<const Eigen::VectorXd>& y, double alpha, int lags = 1);

}  // namespace driveseg
