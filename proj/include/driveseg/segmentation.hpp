#pragma once

#include <map>
#include <string>
#include <vector>

#include "driveseg/timeseries.hpp"

namespace driveseg {

/// Per-session cluster assignment, one id per representation row.
/// Row i sits at original timestep alignment_offset + i, so segments
/// can be reported in raw-series coordinates.
struct ClusterAssignmentSequence {
    std::string session_id;
    std::vector<int> values;     // over {0..k-1}
    long alignment_offset = 0;   // w-1 for width-w sliding windows
    double sample_rate_hz = 1.0;
};

/// Maximal constant-cluster run, inclusive on both ends, in
/// original-series timesteps.
struct Segment {
    std::string session_id;
    long start = 0;
    long end = 0;
    int cluster = 0;
    double seconds = 0.0;

    long length() const { return end - start + 1; }
};

/// Segments per session (contiguous, non-overlapping, adjacent runs
/// differ in cluster) plus a grouping index by cluster id.
struct SegmentSet {
    std::vector<std::vector<Segment>> sessions;
    std::map<int, std::vector<Segment>> by_cluster;
};

/// Length-normalized view of one cluster's segments: every segment's
/// raw-channel trace stretched to the longest segment's length, plus
/// the pointwise mean trace.
struct ClusterSummary {
    int cluster = 0;
    long normalized_length = 0;
    std::vector<std::string> channels;
    std::vector<Eigen::MatrixXd> traces;  // one d x normalized_length block per segment
    Eigen::MatrixXd average;              // d x normalized_length
};

/// Run-length encode each session's assignment sequence. Throws
/// DataError on an empty sequence.
SegmentSet segment(const std::vector<ClusterAssignmentSequence>& sequences);

/// Report-level duration filter: keeps segments strictly longer than
/// min_seconds. The assignment sequences behind the set are untouched;
/// survivors keep their exact boundaries. Warns on stderr when nothing
/// survives.
SegmentSet filter_min_duration(const SegmentSet& set, double min_seconds,
                               double sample_rate_hz);

/// Stretch every segment of one cluster to the longest segment's length
/// (linear interpolation) and average pointwise. Sessions are matched to
/// raw series by session_id. Throws DataError on an unknown cluster id
/// or a missing session.
ClusterSummary summarize_cluster(const SegmentSet& set, int cluster,
                                 const std::vector<MultivariateTimeSeries>& raw);

/// One JSON object per line: {session, start, end, cluster, seconds}.
std::string segments_to_jsonl(const SegmentSet& set);
void write_segments_jsonl(const SegmentSet& set, const std::string& path);

/// Per-channel CSV matrices (one row per segment plus a trailing mean
/// row) and an SVG small-multiples plot, one panel per channel, grey
/// segment traces with a dashed mean. Files land at
/// {basename}_{channel}.csv and {basename}.svg.
void write_cluster_summary(const ClusterSummary& summary, const std::string& basename);

}  // namespace driveseg
