#pragma once

#include <Eigen/Dense>
#include <string>

namespace driveseg {

/// Embedded series: one column per original timestep from w-1 to N-1
/// (0-based), so row alignment maps column i to timestep (w-1)+i and the
/// column count is N-(w-1).
struct TimeSeriesRepresentation {
    std::string session_id;
    Eigen::MatrixXd embedding;  // e x M
    int window_width = 1;       // alignment offset w
    double sample_rate_hz = 1.0;

    long dim() const { return embedding.rows(); }
    long length() const { return embedding.cols(); }
    long original_timestep(long column) const { return window_width - 1 + column; }
};

}  // namespace driveseg
