#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "driveseg/segmentation.hpp"
#include "driveseg/timeseries.hpp"

namespace driveseg {

/// Timestep-level precision/recall/F1 for one ground-truth class.
struct ClassScore {
    int label = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    long support = 0;
};

struct MacroF1Result {
    double macro_f1 = 0.0;
    std::vector<ClassScore> per_class;  // one entry per truth class, ascending label
};

/// Cross-validated one-vs-rest linear classifier scores.
struct ProbeResult {
    double accuracy = 0.0;
    std::vector<ClassScore> per_class;  // mean over test folds
    std::vector<int> excluded;          // classes with fewer samples than folds
};

/// Cluster x label overlap counts. rows/cols name the axes; counts sum
/// to the number of labeled timesteps.
struct ConfusionMatrix {
    std::vector<int> cluster_ids;
    std::vector<int> label_ids;
    Eigen::MatrixXi counts;  // cluster_ids.size() x label_ids.size()
};

struct EvaluationReport {
    std::map<int, int> mapping;  // cluster -> truth label, -1 = unmatched
    MacroF1Result scores;
    ConfusionMatrix confusion;
    std::optional<ProbeResult> probe;
    std::string config_echo;  // serialized config of the run being scored
};

/// Embedding rows for one session, aligned like the representation:
/// column i sits at original timestep alignment_offset + i.
struct SessionEmbedding {
    std::string session_id;
    Eigen::MatrixXd values;  // e x M
    long alignment_offset = 0;
    std::vector<int> labels;  // aligned per column; empty when unlabeled
};

/// Drop the first `offset` labels so the remainder aligns with
/// window-end representation rows.
std::vector<int> align_labels(const std::vector<int>& labels, long offset);

/// Majority-overlap mapping, many-to-one allowed. Ties go to the lower
/// label id; clusters never overlapping a labeled timestep map to -1.
/// Truth entries < 0 are treated as unlabeled and skipped. Throws
/// DataError on length mismatch.
std::map<int, int> map_clusters(const std::vector<int>& pred,
                                const std::vector<int>& truth);

/// Replace each cluster id by its mapped label (-1 when unmatched).
std::vector<int> apply_mapping(const std::vector<int>& pred,
                               const std::map<int, int>& mapping);

/// Per-class F1 from timestep TP/FP/FN over every class present in
/// truth; classes never predicted score 0. Macro is their unweighted
/// mean. Truth entries < 0 are skipped.
MacroF1Result macro_f1(const std::vector<int>& mapped_pred,
                       const std::vector<int>& truth);

ConfusionMatrix confusion_counts(const std::vector<int>& pred,
                                 const std::vector<int>& truth);

/// Stratified k-fold one-vs-rest linear SVM (hinge + L2, C = 1.0,
/// stochastic subgradient descent). Classes with fewer than `folds`
/// samples are excluded with a warning. Reports mean test-fold metrics.
/// Throws DataError when fewer than two classes survive exclusion.
ProbeResult linear_probe(const Eigen::MatrixXd& embeddings,  // e x M
                         const std::vector<int>& labels, int folds = 10,
                         unsigned long long seed = 0);

/// Mapping + macro F1 + confusion in one pass over flattened sequences.
EvaluationReport evaluate(const std::vector<int>& pred, const std::vector<int>& truth,
                          const std::string& config_echo);

/// CSV rows (session, t, e columns, truth, pred); the truth cell is
/// empty for unlabeled sessions. Sessions are matched to predictions
/// by id.
void export_embeddings(const std::vector<SessionEmbedding>& embeddings,
                       const std::vector<ClusterAssignmentSequence>& pred,
                       const std::string& path);

void write_report_json(const EvaluationReport& report, const std::string& path);
void write_confusion_csv(const ConfusionMatrix& confusion, const std::string& path);

/// Rows (t, lat, lon, cluster, label) for sessions carrying
/// coordinates; silently skips sessions without them.
void write_trajectory_csv(const std::vector<MultivariateTimeSeries>& raw,
                          const std::vector<ClusterAssignmentSequence>& pred,
                          const std::string& path);

}  // namespace driveseg
