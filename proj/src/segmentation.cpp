#include "driveseg/segmentation.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "driveseg/csv.hpp"
#include "driveseg/errors.hpp"
#include "json.hpp"

namespace driveseg {

namespace {

void rebuild_cluster_index(SegmentSet& set) {
    set.by_cluster.clear();
    for (const auto& session : set.sessions)
        for (const auto& seg : session) set.by_cluster[seg.cluster].push_back(seg);
}

/// Linear stretch of a d x L block to d x target. Endpoints map to
/// endpoints; interior points interpolate between neighbors.
Eigen::MatrixXd stretch_to(const Eigen::MatrixXd& block, long target) {
    long L = block.cols();
    if (L == target) return block;
    Eigen::MatrixXd out(block.rows(), target);
    if (L == 1) {
        out.colwise() = block.col(0);
        return out;
    }
    for (long j = 0; j < target; ++j) {
        double pos = static_cast<double>(j) * static_cast<double>(L - 1) /
                     static_cast<double>(target - 1);
        long lo = static_cast<long>(std::floor(pos));
        if (lo >= L - 1) {
            out.col(j) = block.col(L - 1);
            continue;
        }
        double frac = pos - static_cast<double>(lo);
        out.col(j) = (1.0 - frac) * block.col(lo) + frac * block.col(lo + 1);
    }
    return out;
}

}  // namespace

SegmentSet segment(const std::vector<ClusterAssignmentSequence>& sequences) {
    SegmentSet set;
    set.sessions.reserve(sequences.size());
    for (const auto& seq : sequences) {
        if (seq.values.empty())
            throw DataError("cannot segment an empty assignment sequence (session \"" +
                            seq.session_id + "\")");
        if (seq.sample_rate_hz <= 0.0)
            throw DataError("sample rate must be positive (session \"" + seq.session_id +
                            "\")");
        std::vector<Segment> runs;
        long run_start = 0;
        long n = static_cast<long>(seq.values.size());
        for (long i = 1; i <= n; ++i) {
            if (i < n && seq.values[i] == seq.values[run_start]) continue;
            Segment seg;
            seg.session_id = seq.session_id;
            seg.start = seq.alignment_offset + run_start;
            seg.end = seq.alignment_offset + i - 1;
            seg.cluster = seq.values[run_start];
            seg.seconds = static_cast<double>(i - run_start) / seq.sample_rate_hz;
            runs.push_back(seg);
            run_start = i;
        }
        set.sessions.push_back(std::move(runs));
    }
    rebuild_cluster_index(set);
    return set;
}

SegmentSet filter_min_duration(const SegmentSet& set, double min_seconds,
                               double sample_rate_hz) {
    if (min_seconds < 0.0) throw ConfigError("min_seconds must be >= 0");
    if (sample_rate_hz <= 0.0) throw ConfigError("sample rate must be positive");
    // Compare in timesteps so an exact-threshold segment (e.g. 30 steps
    // at 10 Hz against 3 s) is excluded without float-division jitter.
    double step_threshold = min_seconds * sample_rate_hz;
    SegmentSet out;
    long survivors = 0;
    for (const auto& session : set.sessions) {
        std::vector<Segment> kept;
        for (const auto& seg : session)
            if (static_cast<double>(seg.length()) > step_threshold) kept.push_back(seg);
        survivors += static_cast<long>(kept.size());
        out.sessions.push_back(std::move(kept));
    }
    rebuild_cluster_index(out);
    if (survivors == 0 && min_seconds > 0.0)
        std::cerr << "warning: no segments longer than " << min_seconds
                  << " s; report is empty\n";
    return out;
}

ClusterSummary summarize_cluster(const SegmentSet& set, int cluster,
                                 const std::vector<MultivariateTimeSeries>& raw) {
    auto it = set.by_cluster.find(cluster);
    if (it == set.by_cluster.end() || it->second.empty())
        throw DataError("cluster " + std::to_string(cluster) + " has no segments");
    const auto& segs = it->second;

    ClusterSummary summary;
    summary.cluster = cluster;
    for (const auto& seg : segs)
        summary.normalized_length = std::max(summary.normalized_length, seg.length());

    for (const auto& seg : segs) {
        const MultivariateTimeSeries* series = nullptr;
        for (const auto& s : raw)
            if (s.session_id == seg.session_id) {
                series = &s;
                break;
            }
        if (series == nullptr)
            throw DataError("no raw series for session \"" + seg.session_id + "\"");
        if (seg.end >= series->length())
            throw DataError("segment [" + std::to_string(seg.start) + ", " +
                            std::to_string(seg.end) + "] exceeds session \"" +
                            seg.session_id + "\" length " +
                            std::to_string(series->length()));
        if (summary.channels.empty())
            summary.channels = series->channels;
        else if (summary.channels != series->channels)
            throw DataError("channel names differ across sessions of cluster " +
                            std::to_string(cluster));
        Eigen::MatrixXd block = series->data.middleCols(seg.start, seg.length());
        summary.traces.push_back(stretch_to(block, summary.normalized_length));
    }

    summary.average = Eigen::MatrixXd::Zero(static_cast<long>(summary.channels.size()),
                                            summary.normalized_length);
    for (const auto& trace : summary.traces) summary.average += trace;
    summary.average /= static_cast<double>(summary.traces.size());
    return summary;
}

std::string segments_to_jsonl(const SegmentSet& set) {
    std::string out;
    for (const auto& session : set.sessions)
        for (const auto& seg : session) {
            nlohmann::ordered_json row;
            row["session"] = seg.session_id;
            row["start"] = seg.start;
            row["end"] = seg.end;
            row["cluster"] = seg.cluster;
            row["seconds"] = seg.seconds;
            out += row.dump();
            out += '\n';
        }
    return out;
}

void write_segments_jsonl(const SegmentSet& set, const std::string& path) {
    std::ofstream file(path);
    if (!file) throw DataError("cannot open " + path + " for writing");
    file << segments_to_jsonl(set);
    if (!file) throw DataError("failed writing " + path);
}

namespace {

std::string svg_polyline(const Eigen::RowVectorXd& values, double lo, double hi,
                         double x0, double y0, double width, double height,
                         const std::string& style) {
    double span = hi - lo;
    if (span < 1e-12) span = 1.0;
    std::ostringstream pts;
    long n = values.size();
    for (long j = 0; j < n; ++j) {
        double x = x0 + (n == 1 ? 0.5 * width
                                : width * static_cast<double>(j) /
                                      static_cast<double>(n - 1));
        double y = y0 + height * (1.0 - (values[j] - lo) / span);
        if (j) pts << ' ';
        pts << x << ',' << y;
    }
    return "  <polyline fill=\"none\" " + style + " points=\"" + pts.str() + "\"/>\n";
}

}  // namespace

void write_cluster_summary(const ClusterSummary& summary, const std::string& basename) {
    long d = static_cast<long>(summary.channels.size());
    long T = summary.normalized_length;

    for (long c = 0; c < d; ++c) {
        std::ofstream file(basename + "_" + summary.channels[c] + ".csv");
        if (!file)
            throw DataError("cannot open " + basename + "_" + summary.channels[c] +
                            ".csv for writing");
        file << "trace";
        for (long j = 0; j < T; ++j) file << ",p" << j;
        file << '\n';
        for (size_t s = 0; s < summary.traces.size(); ++s) {
            file << "segment_" << s;
            for (long j = 0; j < T; ++j)
                file << ',' << format_double(summary.traces[s](c, j));
            file << '\n';
        }
        file << "mean";
        for (long j = 0; j < T; ++j) file << ',' << format_double(summary.average(c, j));
        file << '\n';
    }

    // Small multiples: one panel per channel, stacked vertically.
    const double panel_w = 360, panel_h = 90, margin = 24, label_h = 14;
    double total_h = margin + d * (panel_h + label_h + margin);
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << panel_w + 2 * margin
        << "\" height=\"" << total_h << "\">\n";
    for (long c = 0; c < d; ++c) {
        double y0 = margin + c * (panel_h + label_h + margin) + label_h;
        double lo = summary.average.row(c).minCoeff();
        double hi = summary.average.row(c).maxCoeff();
        for (const auto& trace : summary.traces) {
            lo = std::min(lo, trace.row(c).minCoeff());
            hi = std::max(hi, trace.row(c).maxCoeff());
        }
        svg << "  <text x=\"" << margin << "\" y=\"" << y0 - 4
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << summary.channels[c]
            << " (cluster " << summary.cluster << ")</text>\n";
        for (const auto& trace : summary.traces)
            svg << svg_polyline(trace.row(c), lo, hi, margin, y0, panel_w, panel_h,
                                "stroke=\"#bbbbbb\" stroke-width=\"1\"");
        svg << svg_polyline(summary.average.row(c), lo, hi, margin, y0, panel_w, panel_h,
                            "stroke=\"#000000\" stroke-width=\"1.5\" "
                            "stroke-dasharray=\"5,3\"");
    }
    svg << "</svg>\n";

    std::ofstream file(basename + ".svg");
    if (!file) throw DataError("cannot open " + basename + ".svg for writing");
    file << svg.str();
    if (!file) throw DataError("failed writing " + basename + ".svg");
}

}  // namespace driveseg
