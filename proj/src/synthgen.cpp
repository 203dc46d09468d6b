#include "driveseg/synthgen.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "driveseg/errors.hpp"
#include "driveseg/rng.hpp"
#include "json.hpp"

namespace driveseg {

void RegimeSpec::validate(long channel_count) const {
    if (mean.size() != channel_count)
        throw ConfigError("regime \"" + name + "\": mean has " +
                          std::to_string(mean.size()) + " entries, expected " +
                          std::to_string(channel_count));
    bool has_var = var_transition.size() > 0;
    bool has_cov = covariance.size() > 0;
    if (has_var == has_cov)
        throw ConfigError("regime \"" + name +
                          "\": exactly one of var_transition/covariance required");
    if (has_var) {
        if (var_transition.rows() != channel_count ||
            var_transition.cols() != channel_count)
            throw ConfigError("regime \"" + name + "\": var_transition must be " +
                              std::to_string(channel_count) + "x" +
                              std::to_string(channel_count));
        double radius = var_transition.eigenvalues().cwiseAbs().maxCoeff();
        if (radius >= 1.0)
            throw ConfigError("regime \"" + name + "\": VAR spectral radius " +
                              std::to_string(radius) + " >= 1 (unstable)");
        if (noise_scale < 0.0)
            throw ConfigError("regime \"" + name + "\": negative noise scale");
        if (noise_diag.size() != 0) {
            if (noise_diag.size() != channel_count)
                throw ConfigError("regime \"" + name + "\": noise_diag size mismatch");
            if (noise_diag.minCoeff() < 0.0)
                throw ConfigError("regime \"" + name + "\": negative noise_diag entry");
        }
    } else {
        if (covariance.rows() != channel_count || covariance.cols() != channel_count)
            throw ConfigError("regime \"" + name + "\": covariance must be " +
                              std::to_string(channel_count) + "x" +
                              std::to_string(channel_count));
        if (!covariance.isApprox(covariance.transpose(), 1e-10))
            throw ConfigError("regime \"" + name + "\": covariance not symmetric");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance);
        if (es.eigenvalues().minCoeff() < -1e-10)
            throw ConfigError("regime \"" + name + "\": covariance not PSD");
    }
    if (anchor.size() != 0 && anchor.size() != channel_count)
        throw ConfigError("regime \"" + name + "\": anchor mask size mismatch");
    for (long i = 0; i < anchor.size(); ++i)
        if (anchor[i] != 0.0 && anchor[i] != 1.0)
            throw ConfigError("regime \"" + name + "\": anchor entries must be 0 or 1");
    if (drift_per_second.size() != 0 && drift_per_second.size() != channel_count)
        throw ConfigError("regime \"" + name + "\": drift size mismatch");
    if (!(min_duration_s > 0.0) || max_duration_s < min_duration_s)
        throw ConfigError("regime \"" + name + "\": bad duration range [" +
                          std::to_string(min_duration_s) + ", " +
                          std::to_string(max_duration_s) + "]");
}

void BenchmarkConfig::validate() const {
    if (channels.empty()) throw ConfigError("benchmark needs at least one channel");
    if (regimes.empty()) throw ConfigError("benchmark needs at least one regime");
    if (sample_rate_hz <= 0.0) throw ConfigError("sample rate must be positive");
    long d = static_cast<long>(channels.size());
    for (const auto& r : regimes) r.validate(d);
    long k = static_cast<long>(regimes.size());
    if (transitions.rows() != k || transitions.cols() != k)
        throw ConfigError("transition matrix must be " + std::to_string(k) + "x" +
                          std::to_string(k));
    for (long r = 0; r < k; ++r) {
        double row_sum = 0.0;
        for (long c = 0; c < k; ++c) {
            if (transitions(r, c) < 0.0)
                throw ConfigError("negative transition probability at (" +
                                  std::to_string(r) + "," + std::to_string(c) + ")");
            row_sum += transitions(r, c);
        }
        if (std::abs(row_sum - 1.0) > 1e-9)
            throw ConfigError("transition row " + std::to_string(r) + " sums to " +
                              std::to_string(row_sum) + ", not 1");
    }
    if (channel_min.size() != 0 && channel_min.size() != d)
        throw ConfigError("channel_min size mismatch");
    if (channel_max.size() != 0 && channel_max.size() != d)
        throw ConfigError("channel_max size mismatch");
    if (session_offset_min.size() != session_offset_max.size())
        throw ConfigError("session offset bounds must come in pairs");
    if (session_offset_min.size() != 0) {
        if (session_offset_min.size() != d)
            throw ConfigError("session offset size mismatch");
        if ((session_offset_min.array() > session_offset_max.array()).any())
            throw ConfigError("session offset min exceeds max");
    }
    if (channel_offset.size() != 0 && channel_offset.size() != d)
        throw ConfigError("channel_offset size mismatch");
    if (channel_scale.size() != 0) {
        if (channel_scale.size() != d) throw ConfigError("channel_scale size mismatch");
        if ((channel_scale.array() <= 0.0).any())
            throw ConfigError("channel_scale entries must be positive");
    }
}

namespace {

/// Stationary deviation covariance of x = A x + e, e ~ N(0, Q): solve
/// S = A S A^T + Q by fixed-point iteration (converges geometrically
/// for spectral radius < 1).
Eigen::MatrixXd stationary_covariance(const Eigen::MatrixXd& A,
                                      const Eigen::MatrixXd& Q) {
    Eigen::MatrixXd S = Q;
    for (int it = 0; it < 1000; ++it) {
        Eigen::MatrixXd next = A * S * A.transpose() + Q;
        double change = (next - S).norm();
        S = next;
        if (change < 1e-13) break;
    }
    return S;
}

Eigen::VectorXd innovation_stddev(const RegimeSpec& spec, long d) {
    if (spec.noise_diag.size() > 0) return spec.noise_diag;
    return Eigen::VectorXd::Constant(d, spec.noise_scale);
}

Eigen::VectorXd gaussian_vector(Rng& rng, long d) {
    Eigen::VectorXd v(d);
    for (long i = 0; i < d; ++i) v[i] = rng.normal();
    return v;
}

}  // namespace

MultivariateTimeSeries generate_session(const BenchmarkConfig& config,
                                        double length_seconds,
                                        unsigned long long seed,
                                        const std::string& session_id) {
    config.validate();
    if (length_seconds <= 0.0) throw ConfigError("session length must be positive");
    long d = static_cast<long>(config.channels.size());
    long k = static_cast<long>(config.regimes.size());
    long n = std::lround(length_seconds * config.sample_rate_hz);
    if (n < 1) throw ConfigError("session shorter than one sample");

    // Per-regime emission machinery, precomputed.
    std::vector<Eigen::MatrixXd> chol(k);
    for (long r = 0; r < k; ++r) {
        const auto& spec = config.regimes[r];
        Eigen::MatrixXd S =
            spec.var_transition.size() > 0
                ? stationary_covariance(
                      spec.var_transition,
                      Eigen::MatrixXd(
                          innovation_stddev(spec, d).array().square().matrix().asDiagonal()))
                : spec.covariance;
        Eigen::LLT<Eigen::MatrixXd> llt(
            S + Eigen::MatrixXd::Identity(d, d) * 1e-12);
        chol[r] = llt.matrixL();
    }

    Rng rng(seed);
    MultivariateTimeSeries out;
    out.channels = config.channels;
    out.sample_rate_hz = config.sample_rate_hz;
    out.session_id = session_id;
    out.data.resize(d, n);
    out.labels = std::vector<int>(static_cast<size_t>(n));

    // One shared draw, scaled into each channel's range, so sensor
    // groups that share the offset stay coherent.
    Eigen::VectorXd offset = Eigen::VectorXd::Zero(d);
    if (config.session_offset_min.size() > 0) {
        double u = rng.uniform(0.0, 1.0);
        offset = config.session_offset_min +
                 u * (config.session_offset_max - config.session_offset_min);
    }

    auto clamp_mean = [&](Eigen::VectorXd m) {
        if (config.channel_min.size() > 0) m = m.cwiseMax(config.channel_min);
        if (config.channel_max.size() > 0) m = m.cwiseMin(config.channel_max);
        return m;
    };

    long regime = static_cast<long>(rng.uniform_index(static_cast<std::uint64_t>(k)));
    Eigen::VectorXd state;     // previous emitted sample
    Eigen::VectorXd prev_mean; // its mean line value
    long t = 0;
    while (t < n) {
        const auto& spec = config.regimes[regime];
        double seconds = rng.uniform(spec.min_duration_s, spec.max_duration_s);
        long steps = std::max<long>(1, std::lround(seconds * config.sample_rate_hz));

        // Anchored channels follow a line from the state at entry; the
        // rest revert to the regime mean.
        Eigen::VectorXd entry = t == 0 ? Eigen::VectorXd(spec.mean + offset) : state;
        bool var_mode = spec.var_transition.size() > 0;
        for (long s = 0; s < steps && t < n; ++s, ++t) {
            Eigen::VectorXd m = spec.mean;
            if (spec.anchor.size() > 0)
                for (long c = 0; c < d; ++c)
                    if (spec.anchor[c] == 1.0) {
                        double slope = spec.drift_per_second.size() > 0
                                           ? spec.drift_per_second[c]
                                           : 0.0;
                        m[c] = entry[c] +
                               slope * static_cast<double>(s + 1) /
                                   config.sample_rate_hz;
                    }
            m = clamp_mean(m);

            Eigen::VectorXd x;
            if (var_mode) {
                if (t == 0) {
                    x = m + chol[regime] * gaussian_vector(rng, d);
                } else {
                    x = m + spec.var_transition * (state - prev_mean) +
                        innovation_stddev(spec, d).cwiseProduct(gaussian_vector(rng, d));
                }
            } else {
                x = m + chol[regime] * gaussian_vector(rng, d);
            }
            // Clamps bound emissions too (velocity cannot go negative);
            // the censored value feeds the next VAR step.
            if (config.channel_min.size() > 0) x = x.cwiseMax(config.channel_min);
            if (config.channel_max.size() > 0) x = x.cwiseMin(config.channel_max);
            out.data.col(t) = x;
            (*out.labels)[static_cast<size_t>(t)] = spec.label;
            state = x;
            prev_mean = m;
        }

        if (k == 1) continue;
        double u = rng.uniform();
        double cum = 0.0;
        long next = k - 1;
        for (long c = 0; c < k; ++c) {
            cum += config.transitions(regime, c);
            if (u < cum) {
                next = c;
                break;
            }
        }
        regime = next;
    }
    if (config.channel_scale.size() > 0)
        out.data = config.channel_scale.asDiagonal() * out.data;
    if (config.channel_offset.size() > 0)
        out.data.colwise() += config.channel_offset;
    return out;
}

BenchmarkConfig drivelike_5() {
    // Channels: 0 brake, 1 motor_torque, 2 accel_pedal, 3 steering_angle,
    // 4 yaw_rate, 5 velocity, 6 wheel_fl, 7 wheel_rr, 8 motor_rpm.
    // Regime identity lives in the five actuation channels; the four
    // drivetrain channels mostly hum around the cruising point and act
    // as distractors whose native scale dwarfs everything else.
    const long d = 9;
    BenchmarkConfig cfg;
    cfg.channels = {"brake",    "motor_torque", "accel_pedal",
                    "steering_angle", "yaw_rate", "velocity",
                    "wheel_fl", "wheel_rr",     "motor_rpm"};
    cfg.sample_rate_hz = 10.0;

    const double regime_noise = 0.35;  // informative-channel innovation stddev
    const double speed_noise = 0.4;    // drivetrain jitter around the cruise point

    auto diag = [&](double a) {
        Eigen::MatrixXd A = Eigen::MatrixXd::Identity(d, d) * a;
        return A;
    };
    auto vec = [&](std::initializer_list<double> vals) {
        Eigen::VectorXd v(d);
        long i = 0;
        for (double x : vals) v[i++] = x;
        return v;
    };
    const std::initializer_list<long> speed_channels = {5, 6, 7, 8};
    auto noise = [&](double informative_scale) {
        Eigen::VectorXd q = Eigen::VectorXd::Constant(d, regime_noise * informative_scale);
        for (long c : speed_channels) q[c] = speed_noise;
        return q;
    };

    RegimeSpec cruise;
    cruise.label = 0;
    cruise.name = "cruise";
    cruise.mean = vec({0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0});
    cruise.var_transition = diag(0.3);
    cruise.noise_diag = noise(0.3);  // steady driving is quiet

    RegimeSpec overtake;
    overtake.label = 1;
    overtake.name = "overtake";
    overtake.mean = vec({0.0, 0.9, 1.0, 0.0, 0.0, 0.5, 0.5, 0.5, 0.0});
    overtake.var_transition = diag(0.3);
    overtake.noise_diag = noise(1.0);

    RegimeSpec brake;
    brake.label = 2;
    brake.name = "brake";
    brake.mean = vec({1.0, -0.9, 0.0, 0.0, 0.0, -0.8, -0.8, -0.8, 0.0});
    brake.var_transition = diag(0.3);
    brake.noise_diag = noise(1.0);

    RegimeSpec turn_left;
    turn_left.label = 3;
    turn_left.name = "turn_left";
    turn_left.mean = vec({0.0, 0.0, 0.2, 1.0, 1.2, -0.3, -0.3, -0.3, 0.0});
    turn_left.var_transition = diag(0.3);
    turn_left.var_transition(3, 3) = 0.6;  // steering wanders a little mid-turn
    turn_left.noise_diag = noise(1.0);
    turn_left.noise_diag[3] *= 0.5;  // wander stays on the turn's side
    RegimeSpec turn_right = turn_left;
    turn_right.label = 4;
    turn_right.name = "turn_right";
    turn_right.mean = vec({0.0, 0.0, 0.2, -1.0, -1.2, -0.3, -0.3, -0.3, 0.0});

    cfg.regimes = {cruise, overtake, brake, turn_left, turn_right};

    // Driving grammar, diagonal zero: cruising is the hub, but maneuvers
    // also chain into each other (brake into a turn, turn into an
    // overtake) so no single regime dominates the timeline.
    Eigen::MatrixXd T(5, 5);
    T << 0.00, 0.25, 0.25, 0.25, 0.25,
         0.30, 0.00, 0.30, 0.20, 0.20,
         0.30, 0.25, 0.00, 0.225, 0.225,
         0.30, 0.25, 0.225, 0.00, 0.225,
         0.30, 0.25, 0.225, 0.225, 0.00;
    cfg.transitions = T;

    // Native units: bar, Nm, %, deg, deg/s, m/s, rad/s, rad/s, rpm.
    // A raw bus log spans four orders of magnitude across channels.
    cfg.channel_scale = vec({8.0, 120.0, 15.0, 45.0, 12.0, 2.5, 8.0, 8.0, 400.0});
    cfg.channel_offset = vec({4.0, 40.0, 25.0, 0.0, 0.0, 15.0, 47.0, 47.0, 2800.0});
    return cfg;
}

namespace {

nlohmann::ordered_json vector_to_json(const Eigen::VectorXd& v) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (long i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

nlohmann::ordered_json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (long r = 0; r < m.rows(); ++r) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (long c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
    Eigen::VectorXd v(static_cast<long>(j.size()));
    long i = 0;
    for (const auto& x : j) v[i++] = x.get<double>();
    return v;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    long rows = static_cast<long>(j.size());
    if (rows == 0) return Eigen::MatrixXd();
    long cols = static_cast<long>(j.front().size());
    Eigen::MatrixXd m(rows, cols);
    long r = 0;
    for (const auto& row : j) {
        if (static_cast<long>(row.size()) != cols)
            throw DataError("ragged matrix in benchmark JSON");
        long c = 0;
        for (const auto& x : row) m(r, c++) = x.get<double>();
        ++r;
    }
    return m;
}

}  // namespace

std::string benchmark_to_json(const BenchmarkConfig& config) {
    nlohmann::ordered_json j;
    j["channels"] = config.channels;
    j["sample_rate_hz"] = config.sample_rate_hz;
    j["transitions"] = matrix_to_json(config.transitions);
    if (config.channel_min.size() > 0)
        j["channel_min"] = vector_to_json(config.channel_min);
    if (config.channel_max.size() > 0)
        j["channel_max"] = vector_to_json(config.channel_max);
    if (config.session_offset_min.size() > 0) {
        j["session_offset_min"] = vector_to_json(config.session_offset_min);
        j["session_offset_max"] = vector_to_json(config.session_offset_max);
    }
    if (config.channel_offset.size() > 0)
        j["channel_offset"] = vector_to_json(config.channel_offset);
    if (config.channel_scale.size() > 0)
        j["channel_scale"] = vector_to_json(config.channel_scale);
    nlohmann::ordered_json regimes = nlohmann::ordered_json::array();
    for (const auto& r : config.regimes) {
        nlohmann::ordered_json jr;
        jr["label"] = r.label;
        jr["name"] = r.name;
        jr["mean"] = vector_to_json(r.mean);
        if (r.var_transition.size() > 0) {
            jr["var_transition"] = matrix_to_json(r.var_transition);
            jr["noise_scale"] = r.noise_scale;
            if (r.noise_diag.size() > 0) jr["noise_diag"] = vector_to_json(r.noise_diag);
        }
        if (r.covariance.size() > 0) jr["covariance"] = matrix_to_json(r.covariance);
        if (r.anchor.size() > 0) jr["anchor"] = vector_to_json(r.anchor);
        if (r.drift_per_second.size() > 0)
            jr["drift_per_second"] = vector_to_json(r.drift_per_second);
        jr["min_duration_s"] = r.min_duration_s;
        jr["max_duration_s"] = r.max_duration_s;
        regimes.push_back(jr);
    }
    j["regimes"] = regimes;
    return j.dump(2) + "\n";
}

BenchmarkConfig benchmark_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw DataError("benchmark JSON does not parse");
    BenchmarkConfig cfg;
    try {
        cfg.channels = j.at("channels").get<std::vector<std::string>>();
        cfg.sample_rate_hz = j.at("sample_rate_hz").get<double>();
        cfg.transitions = matrix_from_json(j.at("transitions"));
        if (j.contains("channel_min")) cfg.channel_min = vector_from_json(j["channel_min"]);
        if (j.contains("channel_max")) cfg.channel_max = vector_from_json(j["channel_max"]);
        if (j.contains("session_offset_min"))
            cfg.session_offset_min = vector_from_json(j["session_offset_min"]);
        if (j.contains("session_offset_max"))
            cfg.session_offset_max = vector_from_json(j["session_offset_max"]);
        if (j.contains("channel_offset"))
            cfg.channel_offset = vector_from_json(j["channel_offset"]);
        if (j.contains("channel_scale"))
            cfg.channel_scale = vector_from_json(j["channel_scale"]);
        for (const auto& jr : j.at("regimes")) {
            RegimeSpec r;
            r.label = jr.at("label").get<int>();
            r.name = jr.value("name", std::string());
            r.mean = vector_from_json(jr.at("mean"));
            if (jr.contains("var_transition")) {
                r.var_transition = matrix_from_json(jr["var_transition"]);
                r.noise_scale = jr.value("noise_scale", 1.0);
                if (jr.contains("noise_diag")) r.noise_diag = vector_from_json(jr["noise_diag"]);
            }
            if (jr.contains("covariance")) r.covariance = matrix_from_json(jr["covariance"]);
            if (jr.contains("anchor")) r.anchor = vector_from_json(jr["anchor"]);
            if (jr.contains("drift_per_second"))
                r.drift_per_second = vector_from_json(jr["drift_per_second"]);
            r.min_duration_s = jr.at("min_duration_s").get<double>();
            r.max_duration_s = jr.at("max_duration_s").get<double>();
            cfg.regimes.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw DataError(std::string("benchmark JSON malformed: ") + ex.what());
    }
    cfg.validate();
    return cfg;
}

void write_benchmark_json(const BenchmarkConfig& config, const std::string& path) {
    std::ofstream file(path);
    if (!file) throw DataError("cannot open " + path + " for writing");
    file << benchmark_to_json(config);
    if (!file) throw DataError("failed writing " + path);
}

BenchmarkConfig read_benchmark_json(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw DataError("cannot open " + path);
    std::stringstream buf;
    buf << file.rdbuf();
    return benchmark_from_json(buf.str());
}

}  // namespace driveseg
