#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "driveseg/timeseries.hpp"

namespace driveseg {

/// One discrete driving regime. Emission is either VAR(1) around the
/// regime mean (var_transition non-empty; spectral radius < 1) or iid
/// Gaussian draws (covariance non-empty). Channels flagged in `anchor`
/// ignore the regime mean and instead follow a line starting at the
/// state's value when the regime is entered, with slope
/// drift_per_second: slope 0 holds the entry level, nonzero slopes ramp
/// it. That keeps quantities like velocity continuous across events.
struct RegimeSpec {
    int label = 0;
    std::string name;
    Eigen::VectorXd mean;            // d
    Eigen::MatrixXd var_transition;  // d x d, empty in covariance mode
    double noise_scale = 1.0;        // VAR innovation stddev
    Eigen::VectorXd noise_diag;      // per-channel stddev overriding noise_scale
    Eigen::MatrixXd covariance;      // d x d, empty in VAR mode
    Eigen::VectorXd anchor;          // d entries in {0,1}; empty = none
    Eigen::VectorXd drift_per_second;  // d, used where anchor = 1
    double min_duration_s = 4.0;
    double max_duration_s = 6.0;

    void validate(long channel_count) const;
};

/// A complete generator: channel names, regime set, Markov transition
/// matrix (row-stochastic; the builtin benchmark keeps the diagonal
/// zero so an event never follows itself), and optional per-channel
/// clamps applied to anchored mean lines and emitted samples alike.
struct BenchmarkConfig {
    std::vector<std::string> channels;
    std::vector<RegimeSpec> regimes;
    Eigen::MatrixXd transitions;  // k x k row-stochastic
    double sample_rate_hz = 10.0;
    Eigen::VectorXd channel_min;  // empty = unclamped
    Eigen::VectorXd channel_max;
    // Per-session offset added to the initial state: one uniform draw
    // per session, scaled into each channel's [min,max] range, so sensor
    // groups sharing the offset stay coherent. Anchored channels carry
    // it through every later event; channels that revert to their
    // configured mean shed it after the first regime. Empty = no offset.
    Eigen::VectorXd session_offset_min;
    Eigen::VectorXd session_offset_max;
    // Native-unit emission: regimes are specified in dimensionless state
    // units and every emitted sample is offset + scale * x, so channels
    // come out in realistic physical ranges (bar, Nm, rpm, ...) like a
    // real bus log. Clamps apply in state units. Empty = identity.
    Eigen::VectorXd channel_offset;
    Eigen::VectorXd channel_scale;

    void validate() const;
};

/// Sample one labeled session: a Markov chain over regimes, each visit
/// lasting uniform(min,max) seconds, truncated to exactly
/// length_seconds * rate timesteps. Deterministic per seed.
MultivariateTimeSeries generate_session(const BenchmarkConfig& config,
                                        double length_seconds,
                                        unsigned long long seed,
                                        const std::string& session_id);

/// 5 regimes over 9 CAN-style channels: cruise, overtake, brake,
/// turn_left, turn_right. Channels are emitted in native units (bar,
/// Nm, %, deg, deg/s, m/s, rad/s, rpm) with wildly different scales,
/// the way a real bus log arrives; regime identity lives in the
/// actuation channels while the drivetrain channels mostly idle around
/// the cruising point.
BenchmarkConfig drivelike_5();

std::string benchmark_to_json(const BenchmarkConfig& config);
BenchmarkConfig benchmark_from_json(const std::string& text);
void write_benchmark_json(const BenchmarkConfig& config, const std::string& path);
BenchmarkConfig read_benchmark_json(const std::string& path);

}  // namespace driveseg
