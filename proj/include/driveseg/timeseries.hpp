#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace driveseg {

/// A d-channel time series of N samples. Rows are channels, columns are
/// time steps. Values are immutable by convention once constructed;
/// operations return new series.
struct MultivariateTimeSeries {
    std::vector<std::string> channels;  // length d, unique names
    Eigen::MatrixXd data;               // d x N
    double sample_rate_hz = 1.0;
    std::optional<std::vector<int>> labels;  // per-timestep class id, length N
    std::optional<std::vector<std::pair<double, double>>> coordinates;  // (lat, lon)
    std::string session_id;

    int channel_count() const { return static_cast<int>(data.rows()); }
    long length() const { return data.cols(); }

    /// Throws DataError if the invariants do not hold.
    void validate() const;

    int channel_index(const std::string& name) const;  // -1 if absent
};

struct SlidingWindowSpec {
    int width = 10;  // w, timesteps
    int step = 1;

    void validate() const;
};

struct ChannelStats {
    double mean = 0.0;
    double stddev = 1.0;  // population std (divide by N)
    bool degenerate = false;  // stddev below 1e-12, channel mapped to zeros
};

struct NormalizationStats {
    std::vector<ChannelStats> per_channel;

    MultivariateTimeSeries apply(const MultivariateTimeSeries& series) const;
    MultivariateTimeSeries invert(const MultivariateTimeSeries& series) const;
};

/// Block-mean decimation to target_hz. The decimation factor
/// sample_rate_hz / target_hz must reduce to an integer r; each output
/// point is the mean of r consecutive input points. Labels take the
/// majority label of each block, ties going to the earliest label in the
/// block. Trailing samples that do not fill a block are dropped.
MultivariateTimeSeries resample(const MultivariateTimeSeries& series, double target_hz);

/// Per-channel z-normalization with population standard deviation.
/// Channels with stddev < 1e-12 are mapped to all-zeros and flagged.
std::pair<MultivariateTimeSeries, NormalizationStats> znormalize(
    const MultivariateTimeSeries& series);

/// Fit normalization statistics over a whole collection (channels must
/// match across sessions), without transforming anything.
NormalizationStats fit_normalization(const std::vector<MultivariateTimeSeries>& collection);

/// 0-based end indices of sliding windows: w-1, w-1+step, ... <= N-1.
/// The window ending at index t covers columns [t-w+1, t].
std::vector<long> window_end_indices(long series_length, const SlidingWindowSpec& spec);

/// Contiguous column slice for the window ending at 0-based index t.
Eigen::MatrixXd window_at(const MultivariateTimeSeries& series, long end_index, int width);

}  // namespace driveseg
