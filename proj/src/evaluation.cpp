#include "driveseg/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>

#include "driveseg/csv.hpp"
#include "driveseg/errors.hpp"
#include "driveseg/rng.hpp"
#include "json.hpp"

namespace driveseg {

std::vector<int> align_labels(const std::vector<int>& labels, long offset) {
    if (offset < 0 || offset > static_cast<long>(labels.size()))
        throw DataError("alignment offset " + std::to_string(offset) +
                        " out of range for " + std::to_string(labels.size()) +
                        " labels");
    return std::vector<int>(labels.begin() + offset, labels.end());
}

std::map<int, int> map_clusters(const std::vector<int>& pred,
                                const std::vector<int>& truth) {
    if (pred.size() != truth.size())
        throw DataError("prediction length " + std::to_string(pred.size()) +
                        " != truth length " + std::to_string(truth.size()));
    std::map<int, std::map<int, long>> overlap;  // cluster -> label -> count
    std::set<int> clusters;
    for (size_t i = 0; i < pred.size(); ++i) {
        clusters.insert(pred[i]);
        if (truth[i] >= 0) ++overlap[pred[i]][truth[i]];
    }
    std::map<int, int> mapping;
    for (int c : clusters) {
        auto it = overlap.find(c);
        if (it == overlap.end() || it->second.empty()) {
            mapping[c] = -1;  // never overlaps a labeled timestep
            continue;
        }
        int best_label = -1;
        long best_count = -1;
        for (const auto& [label, count] : it->second)
            if (count > best_count) {  // map iterates labels ascending, so ties keep the lower id
                best_count = count;
                best_label = label;
            }
        mapping[c] = best_label;
    }
    return mapping;
}

std::vector<int> apply_mapping(const std::vector<int>& pred,
                               const std::map<int, int>& mapping) {
    std::vector<int> mapped(pred.size());
    for (size_t i = 0; i < pred.size(); ++i) {
        auto it = mapping.find(pred[i]);
        mapped[i] = it == mapping.end() ? -1 : it->second;
    }
    return mapped;
}

MacroF1Result macro_f1(const std::vector<int>& mapped_pred,
                       const std::vector<int>& truth) {
    if (mapped_pred.size() != truth.size())
        throw DataError("prediction length " + std::to_string(mapped_pred.size()) +
                        " != truth length " + std::to_string(truth.size()));
    std::set<int> classes;
    for (int t : truth)
        if (t >= 0) classes.insert(t);

    MacroF1Result result;
    double sum = 0.0;
    for (int c : classes) {
        long tp = 0, fp = 0, fn = 0, support = 0;
        for (size_t i = 0; i < truth.size(); ++i) {
            if (truth[i] < 0) continue;
            bool is_true = truth[i] == c;
            bool is_pred = mapped_pred[i] == c;
            support += is_true;
            tp += is_true && is_pred;
            fp += !is_true && is_pred;
            fn += is_true && !is_pred;
        }
        ClassScore score;
        score.label = c;
        score.support = support;
        score.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        score.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        score.f1 = score.precision + score.recall > 0.0
                       ? 2.0 * score.precision * score.recall /
                             (score.precision + score.recall)
                       : 0.0;
        result.per_class.push_back(score);
        sum += score.f1;
    }
    result.macro_f1 = classes.empty() ? 0.0 : sum / static_cast<double>(classes.size());
    return result;
}

ConfusionMatrix confusion_counts(const std::vector<int>& pred,
                                 const std::vector<int>& truth) {
    if (pred.size() != truth.size())
        throw DataError("prediction length " + std::to_string(pred.size()) +
                        " != truth length " + std::to_string(truth.size()));
    std::set<int> clusters(pred.begin(), pred.end());
    std::set<int> labels;
    for (int t : truth)
        if (t >= 0) labels.insert(t);

    ConfusionMatrix cm;
    cm.cluster_ids.assign(clusters.begin(), clusters.end());
    cm.label_ids.assign(labels.begin(), labels.end());
    cm.counts = Eigen::MatrixXi::Zero(static_cast<long>(cm.cluster_ids.size()),
                                      static_cast<long>(cm.label_ids.size()));
    auto row_of = [&](int c) {
        return std::lower_bound(cm.cluster_ids.begin(), cm.cluster_ids.end(), c) -
               cm.cluster_ids.begin();
    };
    auto col_of = [&](int l) {
        return std::lower_bound(cm.label_ids.begin(), cm.label_ids.end(), l) -
               cm.label_ids.begin();
    };
    for (size_t i = 0; i < pred.size(); ++i)
        if (truth[i] >= 0) ++cm.counts(row_of(pred[i]), col_of(truth[i]));
    return cm;
}

namespace {

struct FoldScores {
    double accuracy = 0.0;
    std::map<int, ClassScore> per_class;
};

/// Hinge + L2 by Pegasos-style SGD: step 1/(lambda*t), lambda = 1/(C*n).
/// Expects the bias folded in as a constant feature row. Returns the
/// iterate average over the final epoch, which smooths the 1/t tail
/// noise.
Eigen::VectorXd train_binary_svm(const Eigen::MatrixXd& X,
                                 const std::vector<double>& y, double C, Rng& rng) {
    long n = X.cols();
    double lambda = 1.0 / (C * static_cast<double>(n));
    Eigen::VectorXd w = Eigen::VectorXd::Zero(X.rows());
    Eigen::VectorXd w_sum = Eigen::VectorXd::Zero(X.rows());
    const int epochs = 10;
    long t = 0;
    for (int e = 0; e < epochs; ++e)
        for (long i = 0; i < n; ++i) {
            ++t;
            long idx = static_cast<long>(rng.uniform_index(static_cast<std::uint64_t>(n)));
            double eta = 1.0 / (lambda * static_cast<double>(t));
            double margin = y[idx] * w.dot(X.col(idx));
            w *= 1.0 - eta * lambda;
            if (margin < 1.0) w += eta * y[idx] * X.col(idx);
            if (e == epochs - 1) w_sum += w;
        }
    return w_sum / static_cast<double>(n);
}

}  // namespace

ProbeResult linear_probe(const Eigen::MatrixXd& embeddings,
                         const std::vector<int>& labels, int folds,
                         unsigned long long seed) {
    if (folds < 2) throw ConfigError("linear probe needs at least 2 folds");
    if (embeddings.cols() != static_cast<long>(labels.size()))
        throw DataError("embedding count " + std::to_string(embeddings.cols()) +
                        " != label count " + std::to_string(labels.size()));

    std::map<int, std::vector<long>> by_class;
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0) continue;
        by_class[labels[i]].push_back(static_cast<long>(i));
    }

    ProbeResult result;
    std::vector<int> classes;
    for (const auto& [label, members] : by_class) {
        if (members.size() < static_cast<size_t>(folds)) {
            result.excluded.push_back(label);
            std::cerr << "warning: class " << label << " has " << members.size()
                      << " samples, fewer than " << folds << " folds; excluded\n";
        } else {
            classes.push_back(label);
        }
    }
    if (classes.size() < 2)
        throw DataError("linear probe needs at least two classes with >= " +
                        std::to_string(folds) + " samples");

    // Stratified folds: shuffle each class, deal round-robin.
    Rng rng(seed);
    std::vector<std::vector<long>> fold_members(folds);
    for (int c : classes) {
        auto members = by_class[c];
        Rng class_rng = rng.fork(static_cast<std::uint64_t>(c));
        class_rng.shuffle(members);
        for (size_t i = 0; i < members.size(); ++i)
            fold_members[i % folds].push_back(members[i]);
    }

    std::vector<FoldScores> fold_scores;
    for (int f = 0; f < folds; ++f) {
        std::vector<long> train_idx, test_idx = fold_members[f];
        for (int g = 0; g < folds; ++g)
            if (g != f)
                train_idx.insert(train_idx.end(), fold_members[g].begin(),
                                 fold_members[g].end());

        Eigen::MatrixXd Xtr(embeddings.rows(), static_cast<long>(train_idx.size()));
        for (size_t i = 0; i < train_idx.size(); ++i)
            Xtr.col(static_cast<long>(i)) = embeddings.col(train_idx[i]);

        // Standardize with train-fold statistics, then fold the bias in
        // as a constant feature (standardizing after would zero it out).
        Eigen::VectorXd mean = Xtr.rowwise().mean();
        Eigen::VectorXd std =
            ((Xtr.colwise() - mean).array().square().rowwise().mean()).sqrt();
        for (long r = 0; r < std.size(); ++r)
            if (std[r] < 1e-12) std[r] = 1.0;
        Eigen::MatrixXd Xaug(Xtr.rows() + 1, Xtr.cols());
        Xaug.topRows(Xtr.rows()) =
            (Xtr.colwise() - mean).array().colwise() / std.array();
        Xaug.row(Xtr.rows()).setOnes();

        std::map<int, Eigen::VectorXd> models;
        Rng fold_rng = rng.fork(1000 + static_cast<std::uint64_t>(f));
        for (int c : classes) {
            std::vector<double> y(train_idx.size());
            for (size_t i = 0; i < train_idx.size(); ++i)
                y[i] = labels[train_idx[i]] == c ? 1.0 : -1.0;
            Rng class_rng = fold_rng.fork(static_cast<std::uint64_t>(c));
            models[c] = train_binary_svm(Xaug, y, 1.0, class_rng);
        }

        FoldScores fs;
        std::map<int, std::array<long, 3>> counts;  // label -> tp, fp, fn
        long correct = 0;
        for (long idx : test_idx) {
            Eigen::VectorXd x(embeddings.rows() + 1);
            x.head(embeddings.rows()) =
                (embeddings.col(idx) - mean).array() / std.array();
            x[embeddings.rows()] = 1.0;
            int best = classes.front();
            double best_score = -std::numeric_limits<double>::infinity();
            for (int c : classes) {
                double s = models[c].dot(x);
                if (s > best_score) {
                    best_score = s;
                    best = c;
                }
            }
            int actual = labels[idx];
            correct += best == actual;
            counts[actual][best == actual ? 0 : 2] += 1;  // tp or fn
            if (best != actual) counts[best][1] += 1;     // fp
        }
        fs.accuracy = static_cast<double>(correct) / static_cast<double>(test_idx.size());
        for (int c : classes) {
            auto [tp, fp, fn] = counts[c];
            ClassScore score;
            score.label = c;
            score.support = tp + fn;
            score.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
            score.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
            score.f1 = score.precision + score.recall > 0.0
                           ? 2.0 * score.precision * score.recall /
                                 (score.precision + score.recall)
                           : 0.0;
            fs.per_class[c] = score;
        }
        fold_scores.push_back(std::move(fs));
    }

    for (const auto& fs : fold_scores) result.accuracy += fs.accuracy;
    result.accuracy /= static_cast<double>(folds);
    for (int c : classes) {
        ClassScore mean_score;
        mean_score.label = c;
        for (const auto& fs : fold_scores) {
            const auto& s = fs.per_class.at(c);
            mean_score.precision += s.precision;
            mean_score.recall += s.recall;
            mean_score.f1 += s.f1;
            mean_score.support += s.support;
        }
        mean_score.precision /= folds;
        mean_score.recall /= folds;
        mean_score.f1 /= folds;
        result.per_class.push_back(mean_score);
    }
    return result;
}

EvaluationReport evaluate(const std::vector<int>& pred, const std::vector<int>& truth,
                          const std::string& config_echo) {
    EvaluationReport report;
    report.mapping = map_clusters(pred, truth);
    report.scores = macro_f1(apply_mapping(pred, report.mapping), truth);
    report.confusion = confusion_counts(pred, truth);
    report.config_echo = config_echo;
    return report;
}

void export_embeddings(const std::vector<SessionEmbedding>& embeddings,
                       const std::vector<ClusterAssignmentSequence>& pred,
                       const std::string& path) {
    std::ofstream file(path);
    if (!file) throw DataError("cannot open " + path + " for writing");

    long e = embeddings.empty() ? 0 : embeddings.front().values.rows();
    file << "session,t";
    for (long r = 0; r < e; ++r) file << ",e" << r;
    file << ",truth,pred\n";

    for (const auto& emb : embeddings) {
        const ClusterAssignmentSequence* seq = nullptr;
        for (const auto& p : pred)
            if (p.session_id == emb.session_id) {
                seq = &p;
                break;
            }
        if (seq == nullptr)
            throw DataError("no predictions for session \"" + emb.session_id + "\"");
        long M = emb.values.cols();
        if (static_cast<long>(seq->values.size()) != M)
            throw DataError("prediction length mismatch for session \"" +
                            emb.session_id + "\"");
        if (!emb.labels.empty() && static_cast<long>(emb.labels.size()) != M)
            throw DataError("label length mismatch for session \"" + emb.session_id +
                            "\"");
        for (long i = 0; i < M; ++i) {
            file << emb.session_id << ',' << emb.alignment_offset + i;
            for (long r = 0; r < e; ++r) file << ',' << format_double(emb.values(r, i));
            file << ',';
            if (!emb.labels.empty()) file << emb.labels[i];
            file << ',' << seq->values[i] << '\n';
        }
    }
    if (!file) throw DataError("failed writing " + path);
}

namespace {

nlohmann::ordered_json scores_to_json(const std::vector<ClassScore>& scores) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& s : scores)
        arr.push_back({{"label", s.label},
                       {"precision", s.precision},
                       {"recall", s.recall},
                       {"f1", s.f1},
                       {"support", s.support}});
    return arr;
}

}  // namespace

void write_report_json(const EvaluationReport& report, const std::string& path) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json mapping = nlohmann::ordered_json::object();
    for (const auto& [cluster, label] : report.mapping)
        mapping[std::to_string(cluster)] = label;
    j["mapping"] = mapping;
    j["macro_f1"] = report.scores.macro_f1;
    j["per_class"] = scores_to_json(report.scores.per_class);

    nlohmann::ordered_json confusion;
    confusion["clusters"] = report.confusion.cluster_ids;
    confusion["labels"] = report.confusion.label_ids;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (long r = 0; r < report.confusion.counts.rows(); ++r) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (long c = 0; c < report.confusion.counts.cols(); ++c)
            row.push_back(report.confusion.counts(r, c));
        rows.push_back(row);
    }
    confusion["counts"] = rows;
    j["confusion"] = confusion;

    if (report.probe) {
        nlohmann::ordered_json probe;
        probe["accuracy"] = report.probe->accuracy;
        probe["per_class"] = scores_to_json(report.probe->per_class);
        probe["excluded"] = report.probe->excluded;
        j["probe"] = probe;
    } else {
        j["probe"] = nullptr;
    }

    if (!report.config_echo.empty()) {
        auto parsed = nlohmann::ordered_json::parse(report.config_echo, nullptr, false);
        j["config"] = parsed.is_discarded() ? nlohmann::ordered_json(report.config_echo)
                                            : parsed;
    }

    std::ofstream file(path);
    if (!file) throw DataError("cannot open " + path + " for writing");
    file << j.dump(2) << '\n';
    if (!file) throw DataError("failed writing " + path);
}

void write_confusion_csv(const ConfusionMatrix& confusion, const std::string& path) {
    std::ofstream file(path);
    if (!file) throw DataError("cannot open " + path + " for writing");
    file << "cluster";
    for (int l : confusion.label_ids) file << ",label_" << l;
    file << '\n';
    for (size_t r = 0; r < confusion.cluster_ids.size(); ++r) {
        file << confusion.cluster_ids[r];
        for (long c = 0; c < confusion.counts.cols(); ++c)
            file << ',' << confusion.counts(static_cast<long>(r), c);
        file << '\n';
    }
    if (!file) throw DataError("failed writing " + path);
}

void write_trajectory_csv(const std::vector<MultivariateTimeSeries>& raw,
                          const std::vector<ClusterAssignmentSequence>& pred,
                          const std::string& path) {
    std::ofstream file(path);
    if (!file) throw DataError("cannot open " + path + " for writing");
    file << "t,lat,lon,cluster,label\n";
    for (const auto& seq : pred) {
        const MultivariateTimeSeries* series = nullptr;
        for (const auto& s : raw)
            if (s.session_id == seq.session_id) {
                series = &s;
                break;
            }
        if (series == nullptr || !series->coordinates) continue;
        const auto& coords = *series->coordinates;
        for (size_t i = 0; i < seq.values.size(); ++i) {
            long t = seq.alignment_offset + static_cast<long>(i);
            if (t >= static_cast<long>(coords.size())) break;
            file << t << ',' << format_double(coords[t].first) << ','
                 << format_double(coords[t].second) << ',' << seq.values[i] << ',';
            if (series->labels && t < static_cast<long>(series->labels->size()))
                file << (*series->labels)[t];
            file << '\n';
        }
    }
    if (!file) throw DataError("failed writing " + path);
}

}  // namespace driveseg
