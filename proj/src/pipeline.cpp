#include "driveseg/pipeline.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <utility>

#include "json.hpp"

#include "driveseg/csv.hpp"
#include "driveseg/embedding_transform.hpp"
#include "driveseg/errors.hpp"
#include "driveseg/kmeans.hpp"
#include "driveseg/rng.hpp"
#include "driveseg/segmentation.hpp"
#include "driveseg/synthgen.hpp"

namespace driveseg {

namespace {

using nlohmann::ordered_json;

constexpr const char* kVersion = "driveseg 1.0.0";

void check_keys(const ordered_json& obj, std::initializer_list<const char*> allowed,
                const std::string& context) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed)
            if (item.key() == key) known = true;
        if (!known) throw ConfigError("unknown key '" + item.key() + "' in " + context);
    }
}

template <typename T>
void read_field(const ordered_json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

std::string sanitize_id(const std::string& id) {
    std::string out = id;
    for (char& c : out)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '_' && c != '-')
            c = '_';
    return out.empty() ? std::string("session") : out;
}

MultivariateTimeSeries select_channels(const MultivariateTimeSeries& series,
                                       const std::vector<std::string>& names) {
    if (names.empty()) return series;
    MultivariateTimeSeries out = series;
    out.channels = names;
    out.data.resize(static_cast<long>(names.size()), series.data.cols());
    for (std::size_t i = 0; i < names.size(); ++i) {
        int idx = series.channel_index(names[i]);
        if (idx < 0) throw DataError("channel subset names '" + names[i] +
                                     "', which session " + series.session_id + " lacks");
        out.data.row(static_cast<long>(i)) = series.data.row(idx);
    }
    return out;
}

BenchmarkConfig resolve_benchmark(const std::string& name) {
    if (name == "drivelike-5") return drivelike_5();
    if (name.size() > 5 && name.substr(name.size() - 5) == ".json")
        return read_benchmark_json(name);
    throw ConfigError("unknown benchmark '" + name + "' (builtin: drivelike-5, or a .json path)");
}

struct LoadedData {
    std::vector<MultivariateTimeSeries> train;
    std::vector<MultivariateTimeSeries> held;
    bool synthetic = false;
    BenchmarkConfig benchmark;
};

LoadedData load_sessions(const PipelineConfig& config) {
    LoadedData out;
    const auto& dc = config.data;
    if (!dc.benchmark.empty()) {
        out.synthetic = true;
        out.benchmark = resolve_benchmark(dc.benchmark);
        for (int i = 0; i < dc.train_sessions; ++i)
            out.train.push_back(generate_session(out.benchmark, dc.session_seconds,
                                                 config.seed + static_cast<std::uint64_t>(i),
                                                 "train-" + std::to_string(i)));
        for (int j = 0; j < dc.held_out_sessions; ++j)
            out.held.push_back(generate_session(
                out.benchmark, dc.session_seconds,
                config.seed + static_cast<std::uint64_t>(dc.train_sessions + j),
                "held-" + std::to_string(j)));
        if (!dc.channels.empty())
            for (auto* list : {&out.train, &out.held})
                for (auto& s : *list) s = select_channels(s, dc.channels);
        return out;
    }
    CsvSchema schema;
    schema.channels = dc.channels;
    schema.sample_rate_hz = dc.sample_rate_hz;
    auto ingest = [&](const std::string& path) {
        MultivariateTimeSeries s = ingest_csv(path, schema);
        s.session_id = std::filesystem::path(path).stem().string();
        return s;
    };
    for (const auto& p : dc.train_paths) out.train.push_back(ingest(p));
    for (const auto& p : dc.held_out_paths) out.held.push_back(ingest(p));
    return out;
}

/// (d*w) x M matrix of column-stacked sliding windows, step 1.
Eigen::MatrixXd flatten_windows(const MultivariateTimeSeries& series, int width) {
    const auto ends = window_end_indices(series.length(), {width, 1});
    const long d = series.channel_count();
    Eigen::MatrixXd out(d * width, static_cast<long>(ends.size()));
    for (std::size_t i = 0; i < ends.size(); ++i) {
        Eigen::MatrixXd win = window_at(series, ends[i], width);
        out.col(static_cast<long>(i)) = Eigen::Map<Eigen::VectorXd>(win.data(), d * width);
    }
    return out;
}

Eigen::MatrixXd pool_columns(const std::vector<Eigen::MatrixXd>& mats) {
    long total = 0;
    for (const auto& m : mats) total += m.cols();
    if (mats.empty() || total == 0) throw DataError("nothing to pool for clustering");
    Eigen::MatrixXd out(mats.front().rows(), total);
    long off = 0;
    for (const auto& m : mats) {
        out.middleCols(off, m.cols()) = m;
        off += m.cols();
    }
    return out;
}

EvaluationReport score_held_out(const std::vector<std::vector<int>>& preds,
                                const std::vector<const MultivariateTimeSeries*>& sessions,
                                int width, const std::string& echo) {
    std::vector<int> pred, truth;
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        if (!sessions[i]->labels) continue;
        auto aligned = align_labels(*sessions[i]->labels, width - 1);
        pred.insert(pred.end(), preds[i].begin(), preds[i].end());
        truth.insert(truth.end(), aligned.begin(), aligned.end());
    }
    if (truth.empty()) throw DataError("no labeled held-out timesteps to score");
    return evaluate(pred, truth, echo);
}

struct RunState {
    const PipelineConfig& config;
    std::filesystem::path dir;
    std::vector<std::string> stages;
    std::vector<std::string> artifacts;
};

void write_manifest(const RunState& state, const std::string& status,
                    const std::string& failed_stage, const std::string& error) {
    ordered_json m;
    m["version"] = kVersion;
    m["config_hash"] = pipeline_config_hash(state.config);
    m["seed"] = state.config.seed;
    m["status"] = status;
    if (!failed_stage.empty()) {
        m["failed_stage"] = failed_stage;
        m["error"] = error;
    }
    m["stages"] = state.stages;
    m["artifacts"] = state.artifacts;
    m["config"] = ordered_json::parse(pipeline_config_to_json(state.config));
    std::ofstream out(state.dir / "manifest.json");
    out << m.dump(2) << "\n";
}

template <typename F>
auto stage(RunState& state, const char* name, F&& body) {
    auto fail = [&](const std::string& what) {
        try {
            write_manifest(state, "failed", name, what);
        } catch (...) {
        }
        return "stage " + std::string(name) + ": " + what;
    };
    try {
        auto result = body();
        state.stages.push_back(name);
        return result;
    } catch (ConfigError& e) {
        throw ConfigError(fail(e.what()));
    } catch (DataError& e) {
        throw DataError(fail(e.what()));
    } catch (NumericalError& e) {
        throw NumericalError(fail(e.what()));
    } catch (std::exception& e) {
        throw NumericalError(fail(e.what()));
    }
}

}  // namespace

std::string algorithm_name(ClusterAlgorithm a) {
    return a == ClusterAlgorithm::KMeans ? "kmeans" : "ticc";
}

ClusterAlgorithm algorithm_from_name(const std::string& name) {
    if (name == "kmeans") return ClusterAlgorithm::KMeans;
    if (name == "ticc") return ClusterAlgorithm::Ticc;
    throw ConfigError("unknown clustering algorithm '" + name + "' (kmeans, ticc)");
}

std::string scope_name(NormalizationScope s) {
    switch (s) {
        case NormalizationScope::Collection: return "collection";
        case NormalizationScope::Session: return "session";
        default: return "none";
    }
}

NormalizationScope scope_from_name(const std::string& name) {
    if (name == "collection") return NormalizationScope::Collection;
    if (name == "session") return NormalizationScope::Session;
    if (name == "none") return NormalizationScope::None;
    throw ConfigError("unknown normalization scope '" + name + "' (collection, session, none)");
}

void PipelineConfig::validate() const {
    if (data.benchmark.empty()) {
        if (data.train_paths.empty())
            throw ConfigError("no data: set data.benchmark or data.train paths");
    } else {
        if (data.train_sessions < 1) throw ConfigError("data.train_sessions must be at least 1");
        if (data.held_out_sessions < 0) throw ConfigError("data.held_out_sessions must be >= 0");
        if (data.session_seconds <= 0.0) throw ConfigError("data.session_seconds must be > 0");
    }
    if (data.sample_rate_hz <= 0.0) throw ConfigError("data.sample_rate_hz must be > 0");
    if (preprocess.target_hz < 0.0) throw ConfigError("preprocess.target_hz must be >= 0");
    if (encoder.window_width < 1) throw ConfigError("encoder.w must be positive");
    if (encoder.embedding_dim < 1) throw ConfigError("encoder.e must be positive");
    encoder.training.validate();
    if (clustering.k < 2) throw ConfigError("clustering.k must be at least 2");
    if (clustering.restarts < 1) throw ConfigError("clustering.restarts must be at least 1");
    if (evaluation.min_segment_seconds < 0.0)
        throw ConfigError("evaluation.min_segment_seconds must be >= 0");
    if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

std::string pipeline_config_to_json(const PipelineConfig& c) {
    ordered_json j;
    j["data"] = {{"benchmark", c.data.benchmark},
                 {"train_sessions", c.data.train_sessions},
                 {"held_out_sessions", c.data.held_out_sessions},
                 {"session_seconds", c.data.session_seconds},
                 {"train", c.data.train_paths},
                 {"held_out", c.data.held_out_paths},
                 {"channels", c.data.channels},
                 {"sample_rate_hz", c.data.sample_rate_hz}};
    j["preprocess"] = {{"target_hz", c.preprocess.target_hz},
                       {"normalization", scope_name(c.preprocess.normalization)}};
    const auto& t = c.encoder.training;
    j["encoder"] = {{"variant", variant_name(c.encoder.variant)},
                    {"w", c.encoder.window_width},
                    {"e", c.encoder.embedding_dim},
                    {"training",
                     {{"epochs", t.epochs},
                      {"steps", t.steps},
                      {"learning_rate", t.learning_rate},
                      {"train_step", t.train_step},
                      {"batch_size", t.batch_size},
                      {"ref_multiplier", t.ref_multiplier},
                      {"negatives", t.negatives},
                      {"neighborhood_alpha", t.neighborhood_alpha},
                      {"max_neighborhood", t.max_neighborhood},
                      {"pu_weight", t.pu_weight},
                      {"kl_anneal_fraction", t.kl_anneal_fraction},
                      {"hidden_width", t.hidden_width}}}};
    const auto& tp = c.clustering.ticc;
    j["clustering"] = {{"algorithm", algorithm_name(c.clustering.algorithm)},
                       {"k", c.clustering.k},
                       {"restarts", c.clustering.restarts},
                       {"ticc",
                        {{"window", tp.window},
                         {"lambda", tp.lambda},
                         {"beta", tp.beta},
                         {"threshold", tp.threshold},
                         {"max_iterations", tp.max_iterations},
                         {"rho", tp.rho},
                         {"init_restarts", tp.init_restarts}}}};
    j["evaluation"] = {{"enabled", c.evaluation.enabled},
                       {"probe", c.evaluation.probe},
                       {"min_segment_seconds", c.evaluation.min_segment_seconds},
                       {"export_embeddings", c.evaluation.export_embeddings}};
    j["output_dir"] = c.output_dir;
    j["seed"] = c.seed;
    return j.dump(2);
}

PipelineConfig pipeline_config_from_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    PipelineConfig c;
    try {
        if (!j.is_object()) throw ConfigError("config root must be a JSON object");
        // A manifest is itself a replayable config.
        if (j.contains("config") && j.contains("config_hash"))
            return pipeline_config_from_json(j.at("config").dump());
        check_keys(j, {"data", "preprocess", "encoder", "clustering", "evaluation",
                       "output_dir", "seed"},
                   "config");
        if (j.contains("data")) {
            const auto& d = j.at("data");
            check_keys(d, {"benchmark", "train_sessions", "held_out_sessions", "session_seconds",
                           "train", "held_out", "channels", "sample_rate_hz"},
                       "data");
            read_field(d, "benchmark", c.data.benchmark);
            read_field(d, "train_sessions", c.data.train_sessions);
            read_field(d, "held_out_sessions", c.data.held_out_sessions);
            read_field(d, "session_seconds", c.data.session_seconds);
            read_field(d, "train", c.data.train_paths);
            read_field(d, "held_out", c.data.held_out_paths);
            read_field(d, "channels", c.data.channels);
            read_field(d, "sample_rate_hz", c.data.sample_rate_hz);
        }
        if (j.contains("preprocess")) {
            const auto& p = j.at("preprocess");
            check_keys(p, {"target_hz", "normalization"}, "preprocess");
            read_field(p, "target_hz", c.preprocess.target_hz);
            if (p.contains("normalization"))
                c.preprocess.normalization = scope_from_name(p.at("normalization").get<std::string>());
        }
        if (j.contains("encoder")) {
            const auto& e = j.at("encoder");
            check_keys(e, {"variant", "w", "e", "training"}, "encoder");
            if (e.contains("variant"))
                c.encoder.variant = variant_from_name(e.at("variant").get<std::string>());
            read_field(e, "w", c.encoder.window_width);
            read_field(e, "e", c.encoder.embedding_dim);
            if (e.contains("training")) {
                const auto& t = e.at("training");
                check_keys(t, {"epochs", "steps", "learning_rate", "train_step", "batch_size",
                               "ref_multiplier", "negatives", "neighborhood_alpha",
                               "max_neighborhood", "pu_weight", "kl_anneal_fraction",
                               "hidden_width"},
                           "encoder.training");
                auto& tc = c.encoder.training;
                read_field(t, "epochs", tc.epochs);
                read_field(t, "steps", tc.steps);
                read_field(t, "learning_rate", tc.learning_rate);
                read_field(t, "train_step", tc.train_step);
                read_field(t, "batch_size", tc.batch_size);
                read_field(t, "ref_multiplier", tc.ref_multiplier);
                read_field(t, "negatives", tc.negatives);
                read_field(t, "neighborhood_alpha", tc.neighborhood_alpha);
                read_field(t, "max_neighborhood", tc.max_neighborhood);
                read_field(t, "pu_weight", tc.pu_weight);
                read_field(t, "kl_anneal_fraction", tc.kl_anneal_fraction);
                read_field(t, "hidden_width", tc.hidden_width);
            }
        }
        if (j.contains("clustering")) {
            const auto& cl = j.at("clustering");
            check_keys(cl, {"algorithm", "k", "restarts", "ticc"}, "clustering");
            if (cl.contains("algorithm"))
                c.clustering.algorithm = algorithm_from_name(cl.at("algorithm").get<std::string>());
            read_field(cl, "k", c.clustering.k);
            read_field(cl, "restarts", c.clustering.restarts);
            if (cl.contains("ticc")) {
                const auto& tp = cl.at("ticc");
                check_keys(tp, {"window", "lambda", "beta", "threshold", "max_iterations", "rho",
                                "init_restarts"},
                           "clustering.ticc");
                auto& tj = c.clustering.ticc;
                read_field(tp, "window", tj.window);
                read_field(tp, "lambda", tj.lambda);
                read_field(tp, "beta", tj.beta);
                read_field(tp, "threshold", tj.threshold);
                read_field(tp, "max_iterations", tj.max_iterations);
                read_field(tp, "rho", tj.rho);
                read_field(tp, "init_restarts", tj.init_restarts);
            }
        }
        if (j.contains("evaluation")) {
            const auto& ev = j.at("evaluation");
            check_keys(ev, {"enabled", "probe", "min_segment_seconds", "export_embeddings"},
                       "evaluation");
            read_field(ev, "enabled", c.evaluation.enabled);
            read_field(ev, "probe", c.evaluation.probe);
            read_field(ev, "min_segment_seconds", c.evaluation.min_segment_seconds);
            read_field(ev, "export_embeddings", c.evaluation.export_embeddings);
        }
        read_field(j, "output_dir", c.output_dir);
        read_field(j, "seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    return c;
}

PipelineConfig read_pipeline_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read config file " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return pipeline_config_from_json(text);
}

std::string pipeline_config_hash(const PipelineConfig& config) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : pipeline_config_to_json(config)) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

EvaluationReport run_pipeline(const PipelineConfig& config) {
    config.validate();
    std::filesystem::create_directories(config.output_dir);
    RunState state{config, config.output_dir, {}, {}};
    const std::string echo = pipeline_config_to_json(config);
    const int w = config.encoder.window_width;

    LoadedData data = stage(state, "ingest", [&] { return load_sessions(config); });
    if (data.synthetic) {
        write_benchmark_json(data.benchmark, (state.dir / "benchmark.json").string());
        state.artifacts.push_back("benchmark.json");
    }

    stage(state, "preprocess", [&] {
        auto prep = [&](std::vector<MultivariateTimeSeries>& list) {
            for (auto& s : list) {
                if (config.preprocess.target_hz > 0.0) s = resample(s, config.preprocess.target_hz);
                if (config.preprocess.normalization == NormalizationScope::Session)
                    s = znormalize(s).first;
            }
        };
        prep(data.train);
        prep(data.held);
        if (config.preprocess.normalization == NormalizationScope::Collection) {
            NormalizationStats stats = fit_normalization(data.train);
            for (auto* list : {&data.train, &data.held})
                for (auto& s : *list) s = stats.apply(s);
        }
        return 0;
    });

    EncoderModel model = stage(state, "train", [&] {
        TrainingConfig tc = config.encoder.training;
        tc.seed = config.seed;
        EncoderModel m =
            EncoderModel::create(config.encoder.variant, data.train.front().channel_count(), w,
                                 config.encoder.embedding_dim, tc);
        m.train(data.train);
        m.freeze();
        return m;
    });
    model.save((state.dir / "model.json").string(), (state.dir / "model.meta.json").string());
    state.artifacts.push_back("model.json");
    state.artifacts.push_back("model.meta.json");

    std::vector<const MultivariateTimeSeries*> all;
    for (const auto& s : data.train) all.push_back(&s);
    for (const auto& s : data.held) all.push_back(&s);

    std::vector<TimeSeriesRepresentation> reps = stage(state, "encode", [&] {
        std::vector<TimeSeriesRepresentation> r;
        for (const auto* s : all) r.push_back(model.encode_series(*s));
        return r;
    });

    // One cluster model over the pooled training representations; every
    // session (training and held-out alike) is assigned from it.
    std::vector<std::vector<int>> assignments = stage(state, "cluster", [&] {
        std::vector<std::vector<int>> out;
        if (config.clustering.algorithm == ClusterAlgorithm::KMeans) {
            std::vector<Eigen::MatrixXd> train_embs;
            for (std::size_t i = 0; i < data.train.size(); ++i)
                train_embs.push_back(reps[i].embedding);
            EmbeddingConditioner cond = fit_embedding_conditioner(train_embs, w);
            std::vector<Eigen::MatrixXd> conditioned;
            for (std::size_t i = 0; i < data.train.size(); ++i)
                conditioned.push_back(cond.apply(train_embs[i]));
            KMeansModel km =
                kmeans_fit(pool_columns(conditioned), config.clustering.k,
                           config.clustering.restarts, config.seed);
            for (const auto& r : reps) out.push_back(kmeans_assign(km, cond.apply(r.embedding)));
        } else {
            TiccParams tp = config.clustering.ticc;
            tp.k = config.clustering.k;
            tp.seed = config.seed;
            std::vector<Eigen::MatrixXd> embs;
            for (const auto& r : reps) embs.push_back(r.embedding);
            out = ticc_fit(embs, tp).assignments;
        }
        return out;
    });

    std::vector<ClusterAssignmentSequence> sequences;
    for (std::size_t i = 0; i < all.size(); ++i)
        sequences.push_back({all[i]->session_id, assignments[i], static_cast<long>(w - 1),
                             all[i]->sample_rate_hz});

    stage(state, "segment", [&] {
        for (const auto& seq : sequences) {
            SegmentSet set = segment({seq});
            if (config.evaluation.min_segment_seconds > 0.0)
                set = filter_min_duration(set, config.evaluation.min_segment_seconds,
                                          seq.sample_rate_hz);
            std::string name = "segments_" + sanitize_id(seq.session_id) + ".jsonl";
            write_segments_jsonl(set, (state.dir / name).string());
            state.artifacts.push_back(name);
        }
        return 0;
    });

    EvaluationReport report;
    report.config_echo = echo;
    bool labeled_held = false;
    for (const auto& s : data.held)
        if (s.labels) labeled_held = true;
    if (config.evaluation.enabled && labeled_held) {
        report = stage(state, "evaluate", [&] {
            std::vector<std::vector<int>> held_preds(assignments.begin() + data.train.size(),
                                                     assignments.end());
            std::vector<const MultivariateTimeSeries*> held_ptrs(all.begin() + data.train.size(),
                                                                 all.end());
            EvaluationReport rep = score_held_out(held_preds, held_ptrs, w, echo);
            if (config.evaluation.probe) {
                std::vector<Eigen::MatrixXd> embs;
                std::vector<int> truth;
                for (std::size_t i = 0; i < held_ptrs.size(); ++i) {
                    if (!held_ptrs[i]->labels) continue;
                    auto aligned = align_labels(*held_ptrs[i]->labels, w - 1);
                    truth.insert(truth.end(), aligned.begin(), aligned.end());
                    embs.push_back(reps[data.train.size() + i].embedding);
                }
                rep.probe = linear_probe(pool_columns(embs), truth, 10, config.seed);
            }
            return rep;
        });
        write_report_json(report, (state.dir / "report.json").string());
        state.artifacts.push_back("report.json");
        write_confusion_csv(report.confusion, (state.dir / "confusion.csv").string());
        state.artifacts.push_back("confusion.csv");
    }

    stage(state, "export", [&] {
        if (config.evaluation.export_embeddings) {
            std::vector<SessionEmbedding> embs;
            for (std::size_t i = 0; i < all.size(); ++i) {
                SessionEmbedding se;
                se.session_id = all[i]->session_id;
                se.values = reps[i].embedding;
                se.alignment_offset = w - 1;
                if (all[i]->labels) se.labels = align_labels(*all[i]->labels, w - 1);
                embs.push_back(std::move(se));
            }
            export_embeddings(embs, sequences, (state.dir / "embeddings.csv").string());
            state.artifacts.push_back("embeddings.csv");
        }
        bool any_coords = false;
        for (const auto* s : all)
            if (s->coordinates) any_coords = true;
        if (any_coords) {
            std::vector<MultivariateTimeSeries> raw;
            for (const auto* s : all) raw.push_back(*s);
            write_trajectory_csv(raw, sequences, (state.dir / "trajectory.csv").string());
            state.artifacts.push_back("trajectory.csv");
        }
        return 0;
    });

    state.artifacts.push_back("manifest.json");
    write_manifest(state, "complete", "", "");
    return report;
}

EvaluationReport raw_window_baseline(const std::vector<MultivariateTimeSeries>& train,
                                     const std::vector<MultivariateTimeSeries>& held_out,
                                     int window_width, int k, std::uint64_t seed) {
    std::vector<Eigen::MatrixXd> mats;
    for (const auto& s : train) mats.push_back(flatten_windows(s, window_width));
    KMeansModel km = kmeans_fit(pool_columns(mats), k, 15, seed);
    std::vector<std::vector<int>> preds;
    std::vector<const MultivariateTimeSeries*> ptrs;
    for (const auto& s : held_out) {
        preds.push_back(kmeans_assign(km, flatten_windows(s, window_width)));
        ptrs.push_back(&s);
    }
    return score_held_out(preds, ptrs, window_width, "raw-window baseline");
}

EvaluationReport random_assignment_baseline(
    const std::vector<MultivariateTimeSeries>& held_out, int window_width, int k,
    std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<int>> preds;
    std::vector<const MultivariateTimeSeries*> ptrs;
    for (const auto& s : held_out) {
        const long m = static_cast<long>(window_end_indices(s.length(), {window_width, 1}).size());
        std::vector<int> p(static_cast<std::size_t>(m));
        for (auto& v : p) v = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(k)));
        preds.push_back(std::move(p));
        ptrs.push_back(&s);
    }
    return score_held_out(preds, ptrs, window_width, "uniform-random baseline");
}

std::vector<SweepRow> sweep(const PipelineConfig& base, const SweepSpec& grid) {
    if (grid.variants.empty() || grid.window_widths.empty() || grid.embedding_dims.empty())
        throw ConfigError("sweep grid must name at least one variant, w and e");
    std::vector<SweepRow> rows;
    for (EncoderVariant variant : grid.variants)
        for (int w : grid.window_widths)
            for (int e : grid.embedding_dims) {
                PipelineConfig cfg = base;
                cfg.encoder.variant = variant;
                cfg.encoder.window_width = w;
                cfg.encoder.embedding_dim = e;
                SweepRow row{variant_name(variant), algorithm_name(cfg.clustering.algorithm),
                             w, e, 0.0, false, ""};
                cfg.output_dir = base.output_dir + "/" + row.variant + "_" + row.algorithm +
                                 "_w" + std::to_string(w) + "_e" + std::to_string(e);
                try {
                    row.macro_f1 = run_pipeline(cfg).scores.macro_f1;
                } catch (const std::exception& ex) {
                    row.failed = true;
                    row.error = ex.what();
                }
                rows.push_back(std::move(row));
            }

    SweepRow baseline{"random", "uniform", base.encoder.window_width, base.encoder.embedding_dim,
                      0.0, false, ""};
    try {
        PipelineConfig cfg = base;
        LoadedData data = load_sessions(cfg);
        baseline.macro_f1 = random_assignment_baseline(data.held, base.encoder.window_width,
                                                       base.clustering.k, base.seed)
                                .scores.macro_f1;
    } catch (const std::exception& ex) {
        baseline.failed = true;
        baseline.error = ex.what();
    }
    rows.push_back(std::move(baseline));

    std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        if (a.failed != b.failed) return !a.failed;
        return a.macro_f1 > b.macro_f1;
    });
    std::filesystem::create_directories(base.output_dir);
    write_sweep_csv(rows, base.output_dir + "/sweep.csv");
    return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write sweep table to " + path);
    out << "variant,cluster_algorithm,w,e,macro_f1,error\n";
    for (const auto& r : rows) {
        out << r.variant << "," << r.algorithm << "," << r.window_width << ","
            << r.embedding_dim << ",";
        if (!r.failed) out << format_double(r.macro_f1);
        std::string msg = r.error;
        for (char& ch : msg)
            if (ch == ',' || ch == '\n') ch = ';';
        out << "," << msg << "\n";
    }
}

}  // namespace driveseg
