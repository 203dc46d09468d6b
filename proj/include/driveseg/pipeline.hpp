#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "driveseg/encoders.hpp"
#include "driveseg/evaluation.hpp"
#include "driveseg/ticc.hpp"
#include "driveseg/timeseries.hpp"

namespace driveseg {

enum class ClusterAlgorithm { KMeans, Ticc };

std::string algorithm_name(ClusterAlgorithm a);
ClusterAlgorithm algorithm_from_name(const std::string& name);

/// Where z-normalization statistics come from: the pooled training
/// sessions (applied to everything, so held-out data is scored in the
/// training frame), each session by itself, or not at all.
enum class NormalizationScope { Collection, Session, None };

std::string scope_name(NormalizationScope s);
NormalizationScope scope_from_name(const std::string& name);

struct PipelineDataConfig {
    // Builtin benchmark name ("drivelike-5") or a path to a generator
    // JSON; empty switches to CSV ingestion via the path lists.
    std::string benchmark;
    int train_sessions = 3;
    int held_out_sessions = 1;
    double session_seconds = 600.0;
    std::vector<std::string> train_paths;
    std::vector<std::string> held_out_paths;
    std::vector<std::string> channels;  // subset by name; empty = all
    double sample_rate_hz = 10.0;       // declared rate of CSV input
};

struct PipelinePreprocessConfig {
    double target_hz = 0.0;  // block-mean resample; 0 keeps the native rate
    NormalizationScope normalization = NormalizationScope::Collection;
};

struct PipelineEncoderConfig {
    EncoderVariant variant = EncoderVariant::AE;
    int window_width = 10;
    int embedding_dim = 10;
    TrainingConfig training;
};

struct PipelineClusterConfig {
    ClusterAlgorithm algorithm = ClusterAlgorithm::KMeans;
    int k = 5;
    int restarts = 15;   // k-means restarts
    TiccParams ticc;     // k and seed are overwritten from the pipeline fields
};

struct PipelineEvaluationConfig {
    bool enabled = true;  // score labeled held-out sessions
    bool probe = false;   // cross-validated linear probe on held-out embeddings
    double min_segment_seconds = 0.0;  // drop shorter segments from the exports
    bool export_embeddings = true;
};

struct PipelineConfig {
    PipelineDataConfig data;
    PipelinePreprocessConfig preprocess;
    PipelineEncoderConfig encoder;
    PipelineClusterConfig clustering;
    PipelineEvaluationConfig evaluation;
    std::string output_dir = "out";
    std::uint64_t seed = 0;

    /// Throws ConfigError; checked again by run_pipeline.
    void validate() const;
};

std::string pipeline_config_to_json(const PipelineConfig& config);
PipelineConfig pipeline_config_from_json(const std::string& text);
PipelineConfig read_pipeline_config(const std::string& path);

/// FNV-1a over the canonical config serialization; stamped into the
/// manifest so a replayed run can prove it used the same configuration.
std::string pipeline_config_hash(const PipelineConfig& config);

/// Ingest (or synthesize) -> preprocess -> train the encoder on the
/// training sessions -> encode every session at step 1 -> fit one
/// cluster model on the pooled training representations -> segment per
/// session -> evaluate labeled held-out sessions -> write artifacts and
/// a manifest into output_dir. Everything downstream of the seed is
/// deterministic: the same config file replays to byte-identical
/// reports. Stage failures are rethrown with the stage name prefixed
/// after a failure manifest is written.
EvaluationReport run_pipeline(const PipelineConfig& config);

/// k-means over flattened width-w windows of the series exactly as
/// ingested, no normalization and no learned features: the untrained
/// yardstick a representation pipeline has to beat. Fits on the training
/// sessions, scores the held-out ones.
EvaluationReport raw_window_baseline(const std::vector<MultivariateTimeSeries>& train,
                                     const std::vector<MultivariateTimeSeries>& held_out,
                                     int window_width, int k, std::uint64_t seed);

/// Uniform assignment over k clusters along the held-out timeline,
/// mapped and scored like any other prediction.
EvaluationReport random_assignment_baseline(
    const std::vector<MultivariateTimeSeries>& held_out, int window_width, int k,
    std::uint64_t seed);

struct SweepSpec {
    std::vector<EncoderVariant> variants;
    std::vector<int> window_widths;   // w grid
    std::vector<int> embedding_dims;  // e grid
};

struct SweepRow {
    std::string variant;
    std::string algorithm;
    int window_width = 0;
    int embedding_dim = 0;
    double macro_f1 = 0.0;
    bool failed = false;
    std::string error;
};

/// Run every grid combination as its own pipeline (artifacts in
/// per-combination subdirectories of the base output_dir), plus one
/// uniform-random baseline row. Individual failures are recorded and the
/// sweep continues. Rows come back sorted by descending F1, failures
/// last; the same table lands in output_dir/sweep.csv.
std::vector<SweepRow> sweep(const PipelineConfig& base, const SweepSpec& grid);

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

}  // namespace driveseg
