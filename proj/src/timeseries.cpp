#include "driveseg/timeseries.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "driveseg/errors.hpp"

namespace driveseg {

void MultivariateTimeSeries::validate() const {
    if (data.rows() < 1) throw DataError("series must have at least one channel");
    if (data.cols() < 1) throw DataError("series must have at least one timestep");
    if (static_cast<long>(channels.size()) != data.rows())
        throw DataError("channel name count does not match data rows");
    std::set<std::string> names(channels.begin(), channels.end());
    if (names.size() != channels.size()) throw DataError("channel names must be unique");
    if (!(sample_rate_hz > 0.0)) throw DataError("sample_rate_hz must be positive");
    if (labels && static_cast<long>(labels->size()) != data.cols())
        throw DataError("label sequence length does not match series length");
    if (coordinates && static_cast<long>(coordinates->size()) != data.cols())
        throw DataError("coordinate sequence length does not match series length");
}

int MultivariateTimeSeries::channel_index(const std::string& name) const {
    for (std::size_t i = 0; i < channels.size(); ++i)
        if (channels[i] == name) return static_cast<int>(i);
    return -1;
}

void SlidingWindowSpec::validate() const {
    if (width < 2) throw ConfigError("window width must be >= 2");
    if (step < 1) throw ConfigError("window step must be >= 1");
}

MultivariateTimeSeries NormalizationStats::apply(const MultivariateTimeSeries& series) const {
    if (per_channel.size() != static_cast<std::size_t>(series.data.rows()))
        throw DataError("normalization stats channel count does not match series");
    MultivariateTimeSeries out = series;
    for (long c = 0; c < series.data.rows(); ++c) {
        const ChannelStats& s = per_channel[c];
        if (s.degenerate)
            out.data.row(c).setZero();
        else
            out.data.row(c) = (series.data.row(c).array() - s.mean) / s.stddev;
    }
    return out;
}

MultivariateTimeSeries NormalizationStats::invert(const MultivariateTimeSeries& series) const {
    if (per_channel.size() != static_cast<std::size_t>(series.data.rows()))
        throw DataError("normalization stats channel count does not match series");
    MultivariateTimeSeries out = series;
    for (long c = 0; c < series.data.rows(); ++c) {
        const ChannelStats& s = per_channel[c];
        if (s.degenerate)
            out.data.row(c).setConstant(s.mean);
        else
            out.data.row(c) = series.data.row(c).array() * s.stddev + s.mean;
    }
    return out;
}

MultivariateTimeSeries resample(const MultivariateTimeSeries& series, double target_hz) {
    series.validate();
    if (!(target_hz > 0.0)) throw ConfigError("target_hz must be positive");
    if (target_hz > series.sample_rate_hz)
        throw ConfigError("target_hz exceeds the series sample rate");

    const double ratio = series.sample_rate_hz / target_hz;
    const long r = static_cast<long>(std::llround(ratio));
    if (r < 1 || std::abs(ratio - static_cast<double>(r)) > 1e-9)
        throw ConfigError("sample_rate/target_hz = " + std::to_string(ratio) +
                          " is not an integer decimation factor");

    const long n_out = series.data.cols() / r;
    if (n_out < 1) throw DataError("series too short for the requested decimation");

    MultivariateTimeSeries out;
    out.channels = series.channels;
    out.session_id = series.session_id;
    out.sample_rate_hz = target_hz;
    out.data.resize(series.data.rows(), n_out);
    for (long b = 0; b < n_out; ++b)
        out.data.col(b) = series.data.middleCols(b * r, r).rowwise().mean();

    if (series.labels) {
        std::vector<int> lab(n_out);
        for (long b = 0; b < n_out; ++b) {
            // majority of the block, ties to the earliest label in the block
            std::map<int, int> count;
            for (long j = 0; j < r; ++j) count[(*series.labels)[b * r + j]]++;
            int best = -1, best_count = -1;
            for (long j = 0; j < r; ++j) {
                const int l = (*series.labels)[b * r + j];
                if (count[l] > best_count) {
                    best = l;
                    best_count = count[l];
                }
            }
            lab[b] = best;
        }
        out.labels = std::move(lab);
    }
    if (series.coordinates) {
        std::vector<std::pair<double, double>> coords(n_out);
        for (long b = 0; b < n_out; ++b) {
            double lat = 0.0, lon = 0.0;
            for (long j = 0; j < r; ++j) {
                lat += (*series.coordinates)[b * r + j].first;
                lon += (*series.coordinates)[b * r + j].second;
            }
            coords[b] = {lat / r, lon / r};
        }
        out.coordinates = std::move(coords);
    }
    return out;
}

static ChannelStats channel_stats(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    ChannelStats s;
    s.mean = row.mean();
    const double var = (row.array() - s.mean).square().mean();  // population variance
    s.stddev = std::sqrt(var);
    if (s.stddev < 1e-12) {
        s.degenerate = true;
        s.stddev = 1.0;
    }
    return s;
}

std::pair<MultivariateTimeSeries, NormalizationStats> znormalize(
    const MultivariateTimeSeries& series) {
    series.validate();
    NormalizationStats stats;
    stats.per_channel.resize(series.data.rows());
    for (long c = 0; c < series.data.rows(); ++c)
        stats.per_channel[c] = channel_stats(series.data.row(c));
    return {stats.apply(series), stats};
}

NormalizationStats fit_normalization(const std::vector<MultivariateTimeSeries>& collection) {
    if (collection.empty()) throw DataError("cannot fit normalization on an empty collection");
    const long d = collection.front().data.rows();
    long total = 0;
    for (const auto& s : collection) {
        if (s.data.rows() != d)
            throw DataError("collection sessions disagree on channel count");
        total += s.data.cols();
    }
    NormalizationStats stats;
    stats.per_channel.resize(d);
    for (long c = 0; c < d; ++c) {
        double mean = 0.0;
        for (const auto& s : collection) mean += s.data.row(c).sum();
        mean /= static_cast<double>(total);
        double var = 0.0;
        for (const auto& s : collection)
            var += (s.data.row(c).array() - mean).square().sum();
        var /= static_cast<double>(total);
        ChannelStats cs;
        cs.mean = mean;
        cs.stddev = std::sqrt(var);
        if (cs.stddev < 1e-12) {
            cs.degenerate = true;
            cs.stddev = 1.0;
        }
        stats.per_channel[c] = cs;
    }
    return stats;
}

std::vector<long> window_end_indices(long series_length, const SlidingWindowSpec& spec) {
    spec.validate();
    if (series_length < spec.width)
        throw DataError("series length " + std::to_string(series_length) +
                        " is shorter than window width " + std::to_string(spec.width));
    std::vector<long> ends;
    for (long t = spec.width - 1; t < series_length; t += spec.step) ends.push_back(t);
    return ends;
}

Eigen::MatrixXd window_at(const MultivariateTimeSeries& series, long end_index, int width) {
    if (end_index < width - 1 || end_index >= series.data.cols())
        throw DataError("window end index out of range");
    return series.data.middleCols(end_index - width + 1, width);
}

}  // namespace driveseg
