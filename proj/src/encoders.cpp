#include "driveseg/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "driveseg/adf.hpp"
#include "driveseg/errors.hpp"

namespace driveseg {

using nn::NodePtr;
using nlohmann::json;

std::string variant_name(EncoderVariant v) {
    switch (v) {
        case EncoderVariant::AE: return "ae";
        case EncoderVariant::Drive2Vec: return "drive2vec";
        case EncoderVariant::VAME: return "vame";
        case EncoderVariant::VAMEstar: return "vamestar";
        case EncoderVariant::TLoss: return "tloss";
        case EncoderVariant::TNC: return "tnc";
    }
    throw ConfigError("unknown encoder variant");
}

EncoderVariant variant_from_name(const std::string& name) {
    std::string s;
    for (char c : name)
        if (c != '-' && c != '_') s.push_back(static_cast<char>(std::tolower(c)));
    if (s == "ae") return EncoderVariant::AE;
    if (s == "drive2vec") return EncoderVariant::Drive2Vec;
    if (s == "vame") return EncoderVariant::VAME;
    if (s == "vamestar" || s == "vame*") return EncoderVariant::VAMEstar;
    if (s == "tloss") return EncoderVariant::TLoss;
    if (s == "tnc") return EncoderVariant::TNC;
    throw ConfigError("unknown encoder variant '" + name +
                      "' (expected ae, drive2vec, vame, vamestar, tloss or tnc)");
}

void TrainingConfig::validate() const {
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (steps < 0) throw ConfigError("steps must be >= 0");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (train_step < 1) throw ConfigError("train window step must be >= 1");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (ref_multiplier < 1) throw ConfigError("reference window multiplier must be >= 1");
    if (negatives < 1) throw ConfigError("negatives per anchor must be >= 1");
    if (!(neighborhood_alpha > 0.0 && neighborhood_alpha < 1.0))
        throw ConfigError("neighborhood significance must lie in (0, 1)");
    if (max_neighborhood < 1) throw ConfigError("max neighborhood must be >= 1");
    if (pu_weight < 0.0 || pu_weight > 1.0)
        throw ConfigError("unlabeled-positive weight must lie in [0, 1]");
    if (kl_anneal_fraction < 0.0 || kl_anneal_fraction > 1.0)
        throw ConfigError("KL anneal fraction must lie in [0, 1]");
    if (hidden_width < 1) throw ConfigError("hidden width must be >= 1");
}

int estimate_neighborhood(const MultivariateTimeSeries& series, long anchor_end, int width,
                          double alpha, int max_radius, int lags) {
    long n = series.length();
    if (anchor_end < width - 1 || anchor_end >= n)
        throw DataError("anchor end " + std::to_string(anchor_end) +
                        " is not a valid window end for width " + std::to_string(width));
    int d = series.channel_count();
    int accepted = 1;
    for (int r = 1; r <= max_radius; ++r) {
        long lo = std::max<long>(0, anchor_end - (width - 1) - static_cast<long>(r) * width);
        long hi = std::min<long>(n - 1, anchor_end + static_cast<long>(r) * width);
        long span = hi - lo + 1;
        int stationary = 0;
        for (int c = 0; c < d; ++c) {
            if (adf_test(series.data.row(c).segment(lo, span).transpose(), alpha, lags).stationary)
                ++stationary;
        }
        if (2 * stationary > d)
            accepted = r;
        else
            break;
    }
    return accepted;
}

Eigen::MatrixXd pack_windows(const MultivariateTimeSeries& series,
                             const std::vector<long>& end_indices, int width) {
    long d = series.channel_count();
    Eigen::MatrixXd out(d, static_cast<long>(end_indices.size()) * width);
    for (std::size_t b = 0; b < end_indices.size(); ++b)
        out.middleCols(static_cast<long>(b) * width, width) =
            window_at(series, end_indices[b], width);
    return out;
}

namespace {

// (d x B*w) packed windows -> (d*w x B), one flattened window per column.
Eigen::MatrixXd flatten_windows(const Eigen::MatrixXd& packed, int width) {
    long d = packed.rows();
    long batch = packed.cols() / width;
    Eigen::MatrixXd out(d * width, batch);
    for (long b = 0; b < batch; ++b)
        out.col(b) = Eigen::Map<const Eigen::VectorXd>(packed.data() + b * width * d, d * width);
    return out;
}

// Per-window sum of squared errors, averaged over the batch. Used by the
// variational variants so the reconstruction scale stays commensurate
// with a dimension-summed KL term; a per-element mean would let the KL
// dominate and collapse the posterior.
NodePtr batch_sse(const NodePtr& pred, const Eigen::MatrixXd& target) {
    auto diff = nn::sub(pred, nn::constant(target));
    return nn::scale(nn::sum(nn::mul(diff, diff)), 1.0 / static_cast<double>(target.cols()));
}

json config_to_json(const TrainingConfig& c) {
    return json{{"epochs", c.epochs},
                {"steps", c.steps},
                {"learning_rate", c.learning_rate},
                {"train_step", c.train_step},
                {"batch_size", c.batch_size},
                {"ref_multiplier", c.ref_multiplier},
                {"negatives", c.negatives},
                {"neighborhood_alpha", c.neighborhood_alpha},
                {"max_neighborhood", c.max_neighborhood},
                {"pu_weight", c.pu_weight},
                {"kl_anneal_fraction", c.kl_anneal_fraction},
                {"hidden_width", c.hidden_width},
                {"seed", c.seed}};
}

TrainingConfig config_from_json(const json& j) {
    TrainingConfig c;
    c.epochs = j.at("epochs").get<int>();
    c.steps = j.at("steps").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.train_step = j.at("train_step").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.ref_multiplier = j.at("ref_multiplier").get<int>();
    c.negatives = j.at("negatives").get<int>();
    c.neighborhood_alpha = j.at("neighborhood_alpha").get<double>();
    c.max_neighborhood = j.at("max_neighborhood").get<int>();
    c.pu_weight = j.at("pu_weight").get<double>();
    c.kl_anneal_fraction = j.at("kl_anneal_fraction").get<double>();
    c.hidden_width = j.at("hidden_width").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

void check_sessions(const std::vector<MultivariateTimeSeries>& sessions, int d) {
    if (sessions.empty()) throw DataError("training requires at least one session");
    for (const auto& s : sessions) {
        s.validate();
        if (s.channel_count() != d)
            throw DataError("session '" + s.session_id + "' has " +
                            std::to_string(s.channel_count()) + " channels, model expects " +
                            std::to_string(d));
    }
}

struct Sample {
    int session;
    long end;
};

}  // namespace

EncoderModel EncoderModel::create(EncoderVariant variant, int input_channels, int window_width,
                                  int embedding_dim, const TrainingConfig& config) {
    if (input_channels < 1) throw ConfigError("input channels must be >= 1");
    if (window_width < 2) throw ConfigError("window width must be >= 2");
    if (embedding_dim < 1) throw ConfigError("embedding dim must be >= 1");
    config.validate();

    EncoderModel m;
    m.variant_ = variant;
    m.input_channels_ = input_channels;
    m.window_width_ = window_width;
    m.embedding_dim_ = embedding_dim;
    m.config_ = config;

    int h = config.hidden_width;
    int d = input_channels;
    int e = embedding_dim;
    bool variational = variant == EncoderVariant::VAME || variant == EncoderVariant::VAMEstar;
    int head_out = variational ? 2 * e : e;

    Rng init_rng = Rng(config.seed).fork(1);
    auto weight = [&](long rows, long cols, long fan_in, const std::string& name) {
        return nn::parameter_init(rows, cols, fan_in, init_rng, name);
    };
    auto bias = [&](long rows, const std::string& name) {
        return nn::parameter(Eigen::MatrixXd::Zero(rows, 1), name);
    };

    m.encoder_params_.add(weight(h, static_cast<long>(d) * 3, static_cast<long>(d) * 3, "enc.conv1.w"));
    m.encoder_params_.add(bias(h, "enc.conv1.b"));
    m.encoder_params_.add(weight(h, static_cast<long>(h) * 3, static_cast<long>(h) * 3, "enc.conv2.w"));
    m.encoder_params_.add(bias(h, "enc.conv2.b"));
    m.encoder_params_.add(weight(h, static_cast<long>(h) * 3, static_cast<long>(h) * 3, "enc.conv3.w"));
    m.encoder_params_.add(bias(h, "enc.conv3.b"));
    m.encoder_params_.add(weight(head_out, h, h, "enc.head.w"));
    m.encoder_params_.add(bias(head_out, "enc.head.b"));

    auto add_decoder = [&](const std::string& head) {
        long out = static_cast<long>(d) * window_width;
        m.aux_params_.add(weight(h, e, e, head + ".l1.w"));
        m.aux_params_.add(bias(h, head + ".l1.b"));
        m.aux_params_.add(weight(out, h, h, head + ".l2.w"));
        m.aux_params_.add(bias(out, head + ".l2.b"));
    };

    switch (variant) {
        case EncoderVariant::AE:
            add_decoder("dec.self");
            break;
        case EncoderVariant::Drive2Vec:
            add_decoder("dec.self");
            add_decoder("dec.next");
            break;
        case EncoderVariant::VAME:
            add_decoder("dec.self");
            add_decoder("dec.future");
            break;
        case EncoderVariant::VAMEstar:
            add_decoder("dec.self");
            add_decoder("dec.future");
            add_decoder("dec.past");
            break;
        case EncoderVariant::TLoss:
            break;
        case EncoderVariant::TNC:
            m.aux_params_.add(weight(e, e, e, "disc.w"));
            m.aux_params_.add(bias(e, "disc.wb"));
            m.aux_params_.add(bias(1, "disc.b"));
            break;
    }
    return m;
}

NodePtr EncoderModel::backbone_apply(const NodePtr& x) const {
    long w = window_width_;
    auto h1 = nn::relu(nn::conv1d_causal(x, encoder_params_.get("enc.conv1.w"),
                                         encoder_params_.get("enc.conv1.b"), 3, 1, w));
    auto h2 = nn::relu(nn::conv1d_causal(h1, encoder_params_.get("enc.conv2.w"),
                                         encoder_params_.get("enc.conv2.b"), 3, 2, w));
    auto h3 = nn::relu(nn::conv1d_causal(h2, encoder_params_.get("enc.conv3.w"),
                                         encoder_params_.get("enc.conv3.b"), 3, 4, w));
    auto last = nn::block_last_col(h3, w);
    return nn::dense(encoder_params_.get("enc.head.w"), encoder_params_.get("enc.head.b"), last);
}

NodePtr EncoderModel::embed(const NodePtr& x) const {
    auto out = backbone_apply(x);
    if (variant_ == EncoderVariant::VAME || variant_ == EncoderVariant::VAMEstar)
        return nn::slice_rows(out, 0, embedding_dim_);
    return out;
}

NodePtr EncoderModel::decode(const std::string& head, const NodePtr& z) const {
    auto h = nn::relu(nn::dense(aux_params_.get(head + ".l1.w"), aux_params_.get(head + ".l1.b"), z));
    return nn::dense(aux_params_.get(head + ".l2.w"), aux_params_.get(head + ".l2.b"), h);
}

NodePtr EncoderModel::discriminate(const NodePtr& z1, const NodePtr& z2) const {
    // Bilinear head z1'Wz2 + b'z2 + c: a deeper head can separate pairs
    // without shaping the embedding geometry, leaving the encoder with
    // no gradient pressure; a bilinear one forces the neighborhood
    // structure into z itself.
    auto wz = nn::dense(aux_params_.get("disc.w"), aux_params_.get("disc.wb"), z2);
    auto logit = nn::colwise_sum(nn::mul(z1, wz));
    return nn::add(logit, nn::repeat_cols(aux_params_.get("disc.b"), z1->cols()));
}

NodePtr EncoderModel::build_ae_loss(const Eigen::MatrixXd& windows) const {
    auto z = embed(nn::constant(windows));
    return nn::mse(decode("dec.self", z), nn::constant(flatten_windows(windows, window_width_)));
}

NodePtr EncoderModel::build_drive2vec_loss(const Eigen::MatrixXd& current,
                                           const Eigen::MatrixXd& next) const {
    auto z = embed(nn::constant(current));
    auto self_loss =
        nn::mse(decode("dec.self", z), nn::constant(flatten_windows(current, window_width_)));
    auto next_loss =
        nn::mse(decode("dec.next", z), nn::constant(flatten_windows(next, window_width_)));
    return nn::add(self_loss, next_loss);
}

NodePtr EncoderModel::build_vame_loss(const Eigen::MatrixXd& current, const Eigen::MatrixXd& future,
                                      const Eigen::MatrixXd* past, const Eigen::MatrixXd& noise,
                                      double kl_weight) const {
    long batch = current.cols() / window_width_;
    auto out = backbone_apply(nn::constant(current));
    auto mu = nn::slice_rows(out, 0, embedding_dim_);
    auto logvar = nn::slice_rows(out, embedding_dim_, embedding_dim_);
    auto z = nn::gaussian_sample(mu, logvar, nn::constant(noise));

    auto loss = batch_sse(decode("dec.self", z), flatten_windows(current, window_width_));
    loss = nn::add(loss, batch_sse(decode("dec.future", z), flatten_windows(future, window_width_)));
    if (past != nullptr)
        loss = nn::add(loss, batch_sse(decode("dec.past", z), flatten_windows(*past, window_width_)));

    // KL(q || N(0,I)) = 0.5 * sum(mu^2 + sigma^2 - 1 - log sigma^2), batch-averaged
    auto kl_terms = nn::sub(nn::add_const(nn::add(nn::mul(mu, mu), nn::exp_op(logvar)), -1.0), logvar);
    auto kl = nn::scale(nn::sum(kl_terms), 0.5 / static_cast<double>(batch));
    return nn::add(loss, nn::scale(kl, kl_weight));
}

NodePtr EncoderModel::build_tloss_loss(const Eigen::MatrixXd& ref_center,
                                       const Eigen::MatrixXd& positive,
                                       const Eigen::MatrixXd& negatives,
                                       int negatives_per_anchor) const {
    auto zr = embed(nn::constant(ref_center));
    auto zp = embed(nn::constant(positive));
    auto zn = embed(nn::constant(negatives));
    // -log sigma(zr.zp) - sum_k log sigma(-zr.zn_k), written with softplus
    auto pos_term = nn::softplus(nn::scale(nn::sum(nn::mul(zr, zp)), -1.0));
    auto neg_dots = nn::colwise_sum(nn::mul(nn::repeat_cols(zr, negatives_per_anchor), zn));
    return nn::add(pos_term, nn::sum(nn::softplus(neg_dots)));
}

NodePtr EncoderModel::build_tnc_loss(const Eigen::MatrixXd& anchors,
                                     const Eigen::MatrixXd& neighbors,
                                     const Eigen::MatrixXd& distants, double pu_weight) const {
    double batch = static_cast<double>(anchors.cols() / window_width_);
    auto za = embed(nn::constant(anchors));
    auto zn = embed(nn::constant(neighbors));
    auto zd = embed(nn::constant(distants));
    auto pos_logits = discriminate(za, zn);
    auto dist_logits = discriminate(za, zd);
    // neighbors labeled 1; distants a (1-w_pu):(w_pu) mixture of labels 0 and 1
    auto loss = nn::scale(nn::sum(nn::softplus(nn::scale(pos_logits, -1.0))), 1.0 / batch);
    loss = nn::add(loss, nn::scale(nn::sum(nn::softplus(dist_logits)), (1.0 - pu_weight) / batch));
    loss = nn::add(loss, nn::scale(nn::sum(nn::softplus(nn::scale(dist_logits, -1.0))),
                                   pu_weight / batch));
    return loss;
}

nn::ParameterSet EncoderModel::all_parameters() const {
    nn::ParameterSet all = encoder_params_;
    all.absorb(aux_params_);
    return all;
}

Eigen::VectorXd EncoderModel::encode(const Eigen::MatrixXd& window) const {
    if (window.rows() != input_channels_ || window.cols() != window_width_)
        throw DataError("encode expects a " + std::to_string(input_channels_) + "x" +
                        std::to_string(window_width_) + " window, got " +
                        std::to_string(window.rows()) + "x" + std::to_string(window.cols()));
    return embed(nn::constant(window))->value.col(0);
}

TimeSeriesRepresentation EncoderModel::encode_series(const MultivariateTimeSeries& series) const {
    if (series.channel_count() != input_channels_)
        throw DataError("series has " + std::to_string(series.channel_count()) +
                        " channels, model expects " + std::to_string(input_channels_));
    if (series.length() < window_width_)
        throw DataError("series of length " + std::to_string(series.length()) +
                        " is shorter than the window width " + std::to_string(window_width_));
    auto ends = window_end_indices(series.length(), {window_width_, 1});
    TimeSeriesRepresentation rep;
    rep.session_id = series.session_id;
    rep.window_width = window_width_;
    rep.sample_rate_hz = series.sample_rate_hz;
    rep.embedding.resize(embedding_dim_, static_cast<long>(ends.size()));
    for (std::size_t i = 0; i < ends.size(); ++i)
        rep.embedding.col(static_cast<long>(i)) = encode(window_at(series, ends[i], window_width_));
    return rep;
}

std::vector<double> EncoderModel::train(const std::vector<MultivariateTimeSeries>& sessions) {
    if (frozen_) throw ConfigError("cannot train a frozen model");
    check_sessions(sessions, input_channels_);
    std::vector<double> history;
    switch (variant_) {
        case EncoderVariant::AE:
        case EncoderVariant::Drive2Vec:
        case EncoderVariant::VAME:
        case EncoderVariant::VAMEstar:
            history = train_generative(sessions);
            break;
        case EncoderVariant::TLoss:
            history = train_tloss(sessions);
            break;
        case EncoderVariant::TNC:
            history = train_tnc(sessions);
            break;
    }
    loss_history_ = history;
    final_loss_ = history.empty() ? 0.0 : history.back();
    return history;
}

std::vector<double> EncoderModel::train_generative(
    const std::vector<MultivariateTimeSeries>& sessions) {
    int w = window_width_;
    bool needs_next = variant_ != EncoderVariant::AE;
    bool needs_past = variant_ == EncoderVariant::VAMEstar;
    bool variational = variant_ == EncoderVariant::VAME || variant_ == EncoderVariant::VAMEstar;

    std::vector<Sample> samples;
    for (std::size_t s = 0; s < sessions.size(); ++s) {
        for (long end : window_end_indices(sessions[s].length(), {w, config_.train_step})) {
            if (needs_next && end + w > sessions[s].length() - 1) continue;
            if (needs_past && end - w < w - 1) continue;
            samples.push_back({static_cast<int>(s), end});
        }
    }
    if (samples.empty()) throw DataError("no training windows fit the sessions");

    Rng rng = Rng(config_.seed).fork(2);
    nn::ParameterSet all = all_parameters();
    nn::AdamOptimizer opt(all, config_.learning_rate);
    double anneal_span = config_.kl_anneal_fraction * config_.epochs;

    std::vector<double> history;
    for (int epoch = 0; epoch < config_.epochs; ++epoch) {
        rng.shuffle(samples);
        double kl_weight =
            !variational ? 0.0
                         : (anneal_span <= 0.0 ? 1.0 : std::min(1.0, epoch / anneal_span));
        double loss_sum = 0.0;
        long seen = 0;
        for (std::size_t off = 0; off < samples.size(); off += config_.batch_size) {
            std::size_t take = std::min<std::size_t>(config_.batch_size, samples.size() - off);
            Eigen::MatrixXd current(input_channels_, static_cast<long>(take) * w);
            Eigen::MatrixXd next, past;
            if (needs_next) next.resize(input_channels_, static_cast<long>(take) * w);
            if (needs_past) past.resize(input_channels_, static_cast<long>(take) * w);
            for (std::size_t i = 0; i < take; ++i) {
                const Sample& sm = samples[off + i];
                const auto& series = sessions[sm.session];
                current.middleCols(static_cast<long>(i) * w, w) = window_at(series, sm.end, w);
                if (needs_next)
                    next.middleCols(static_cast<long>(i) * w, w) = window_at(series, sm.end + w, w);
                if (needs_past)
                    past.middleCols(static_cast<long>(i) * w, w) = window_at(series, sm.end - w, w);
            }

            NodePtr loss;
            if (variant_ == EncoderVariant::AE) {
                loss = build_ae_loss(current);
            } else if (variant_ == EncoderVariant::Drive2Vec) {
                loss = build_drive2vec_loss(current, next);
            } else {
                Eigen::MatrixXd noise(embedding_dim_, static_cast<long>(take));
                for (long r = 0; r < noise.rows(); ++r)
                    for (long c = 0; c < noise.cols(); ++c) noise(r, c) = rng.normal();
                loss = build_vame_loss(current, next, needs_past ? &past : nullptr, noise,
                                       kl_weight);
            }

            double value = loss->value(0, 0);
            if (!std::isfinite(value)) return history;  // abort, parameters still finite
            nn::backward(loss);
            try {
                opt.step();
            } catch (const NumericalError&) {
                return history;
            }
            loss_sum += value * static_cast<double>(take);
            seen += static_cast<long>(take);
        }
        history.push_back(loss_sum / static_cast<double>(seen));
    }
    return history;
}

std::vector<double> EncoderModel::train_tloss(
    const std::vector<MultivariateTimeSeries>& sessions) {
    int w = window_width_;
    long ref_len = static_cast<long>(config_.ref_multiplier) * w;

    // reference placements (start index per session) and the global
    // negative pool of plain window starts
    std::vector<std::pair<int, long>> ref_counts, neg_counts;
    long ref_total = 0, neg_total = 0;
    for (std::size_t s = 0; s < sessions.size(); ++s) {
        long n = sessions[s].length();
        if (n >= ref_len) {
            ref_counts.push_back({static_cast<int>(s), n - ref_len + 1});
            ref_total += n - ref_len + 1;
        }
        if (n >= w) {
            neg_counts.push_back({static_cast<int>(s), n - w + 1});
            neg_total += n - w + 1;
        }
    }
    if (ref_total == 0)
        throw DataError("no session is long enough for a reference window of length " +
                        std::to_string(ref_len));

    auto draw = [](Rng& rng, const std::vector<std::pair<int, long>>& counts, long total) {
        long idx = static_cast<long>(rng.uniform_index(static_cast<std::uint64_t>(total)));
        for (const auto& [session, count] : counts) {
            if (idx < count) return std::pair<int, long>{session, idx};
            idx -= count;
        }
        return counts.back();  // unreachable
    };

    Rng rng = Rng(config_.seed).fork(3);
    nn::ParameterSet all = all_parameters();
    nn::AdamOptimizer opt(all, config_.learning_rate);

    std::vector<double> history;
    for (int step = 0; step < config_.steps; ++step) {
        auto [rs, r0] = draw(rng, ref_counts, ref_total);
        long center_start = r0 + (ref_len - w) / 2;
        Eigen::MatrixXd ref_center = window_at(sessions[rs], center_start + w - 1, w);
        // Positives come from inside the reference but never overlap the
        // central window: overlapping pairs share samples, and the loss
        // then rewards fingerprinting noise instead of shared structure.
        long span = ref_len - w;  // positive start offsets: [0, span]
        long lo_cut = std::max<long>(0, (center_start - r0) - w);
        long hi_cut = std::min<long>(span, (center_start - r0) + w);
        long left = lo_cut + 1, right = span - hi_cut + 1;
        long pick = static_cast<long>(
            rng.uniform_index(static_cast<std::uint64_t>(left + right)));
        long p0 = r0 + (pick < left ? pick : hi_cut + (pick - left));
        Eigen::MatrixXd positive = window_at(sessions[rs], p0 + w - 1, w);
        Eigen::MatrixXd negatives(input_channels_, static_cast<long>(config_.negatives) * w);
        for (int k = 0; k < config_.negatives; ++k) {
            auto [ns, n0] = draw(rng, neg_counts, neg_total);
            negatives.middleCols(static_cast<long>(k) * w, w) =
                window_at(sessions[ns], n0 + w - 1, w);
        }

        auto loss = build_tloss_loss(ref_center, positive, negatives, config_.negatives);
        double value = loss->value(0, 0);
        if (!std::isfinite(value)) return history;
        nn::backward(loss);
        try {
            opt.step();
        } catch (const NumericalError&) {
            return history;
        }
        history.push_back(value);
    }
    return history;
}

std::vector<double> EncoderModel::train_tnc(const std::vector<MultivariateTimeSeries>& sessions) {
    int w = window_width_;

    struct Anchor {
        int session;
        long end;
        long nb_lo, nb_hi;  // neighborhood window-end range, inclusive
    };
    std::vector<Anchor> anchors;
    for (std::size_t s = 0; s < sessions.size(); ++s) {
        const auto& series = sessions[s];
        long n = series.length();
        for (long end : window_end_indices(n, {w, config_.train_step})) {
            int radius = estimate_neighborhood(series, end, w, config_.neighborhood_alpha,
                                               config_.max_neighborhood);
            long lo = std::max<long>(w - 1, end - static_cast<long>(radius) * w);
            long hi = std::min<long>(n - 1, end + static_cast<long>(radius) * w);
            // distant windows must exist in the same session
            if (lo > w - 1 || hi < n - 1) anchors.push_back({static_cast<int>(s), end, lo, hi});
        }
    }
    if (anchors.empty())
        throw DataError("no anchor has both a neighborhood and distant windows; sessions too short");

    Rng rng = Rng(config_.seed).fork(4);
    nn::ParameterSet all = all_parameters();
    nn::AdamOptimizer opt(all, config_.learning_rate);

    std::vector<double> history;
    for (int epoch = 0; epoch < config_.epochs; ++epoch) {
        rng.shuffle(anchors);
        double loss_sum = 0.0;
        long seen = 0;
        for (std::size_t off = 0; off < anchors.size(); off += config_.batch_size) {
            std::size_t take = std::min<std::size_t>(config_.batch_size, anchors.size() - off);
            Eigen::MatrixXd a(input_channels_, static_cast<long>(take) * w);
            Eigen::MatrixXd nb(input_channels_, static_cast<long>(take) * w);
            Eigen::MatrixXd di(input_channels_, static_cast<long>(take) * w);
            for (std::size_t i = 0; i < take; ++i) {
                const Anchor& an = anchors[off + i];
                const auto& series = sessions[an.session];
                long n = series.length();
                // Neighbors never overlap the anchor window (overlap lets
                // the discriminator match shared samples instead of
                // shared dynamics); fall back to the full neighborhood
                // when the series boundary leaves no such position.
                long nb_left = std::max<long>(0, (an.end - w) - an.nb_lo + 1);
                long nb_right = std::max<long>(0, an.nb_hi - (an.end + w) + 1);
                long nb_end;
                if (nb_left + nb_right > 0) {
                    long pick = static_cast<long>(rng.uniform_index(
                        static_cast<std::uint64_t>(nb_left + nb_right)));
                    nb_end = pick < nb_left ? an.nb_lo + pick : (an.end + w) + (pick - nb_left);
                } else {
                    long nb_count = an.nb_hi - an.nb_lo + 1;
                    nb_end = an.nb_lo + static_cast<long>(rng.uniform_index(
                                            static_cast<std::uint64_t>(nb_count)));
                }
                long left = an.nb_lo - (w - 1);            // distant ends below the neighborhood
                long right = (n - 1) - an.nb_hi;           // and above it
                long pick = static_cast<long>(rng.uniform_index(
                    static_cast<std::uint64_t>(left + right)));
                long di_end = pick < left ? (w - 1) + pick : an.nb_hi + 1 + (pick - left);
                a.middleCols(static_cast<long>(i) * w, w) = window_at(series, an.end, w);
                nb.middleCols(static_cast<long>(i) * w, w) = window_at(series, nb_end, w);
                di.middleCols(static_cast<long>(i) * w, w) = window_at(series, di_end, w);
            }

            auto loss = build_tnc_loss(a, nb, di, config_.pu_weight);
            double value = loss->value(0, 0);
            if (!std::isfinite(value)) return history;
            nn::backward(loss);
            try {
                opt.step();
            } catch (const NumericalError&) {
                return history;
            }
            loss_sum += value * static_cast<double>(take);
            seen += static_cast<long>(take);
        }
        history.push_back(loss_sum / static_cast<double>(seen));
    }
    return history;
}

void EncoderModel::freeze() {
    aux_params_ = nn::ParameterSet();
    frozen_ = true;
}

void EncoderModel::save(const std::string& checkpoint_path, const std::string& sidecar_path) const {
    nn::save_checkpoint(all_parameters(), config_.seed,
                        static_cast<long>(loss_history_.size()), checkpoint_path);
    json doc;
    doc["variant"] = variant_name(variant_);
    doc["input_channels"] = input_channels_;
    doc["window_width"] = window_width_;
    doc["embedding_dim"] = embedding_dim_;
    doc["frozen"] = frozen_;
    doc["final_loss"] = final_loss_;
    doc["config"] = config_to_json(config_);
    std::ofstream out(sidecar_path);
    if (!out) throw DataError("cannot write sidecar file: " + sidecar_path);
    out << doc.dump(2) << "\n";
}

EncoderModel EncoderModel::load(const std::string& checkpoint_path,
                                const std::string& sidecar_path) {
    std::ifstream in(sidecar_path);
    if (!in) throw DataError("cannot read sidecar file: " + sidecar_path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw DataError("malformed sidecar JSON in " + sidecar_path + ": " + e.what());
    }

    EncoderModel m;
    try {
        m = create(variant_from_name(doc.at("variant").get<std::string>()),
                   doc.at("input_channels").get<int>(), doc.at("window_width").get<int>(),
                   doc.at("embedding_dim").get<int>(), config_from_json(doc.at("config")));
        m.final_loss_ = doc.at("final_loss").get<double>();
    } catch (const json::exception& e) {
        throw DataError("sidecar " + sidecar_path + " is missing fields: " + e.what());
    }

    bool frozen = doc.value("frozen", false);
    nn::Checkpoint ckpt = nn::load_checkpoint(checkpoint_path);
    for (const auto& [name, stored] : ckpt.params.items()) {
        nn::NodePtr target;
        if (m.encoder_params_.contains(name))
            target = m.encoder_params_.get(name);
        else if (m.aux_params_.contains(name))
            target = m.aux_params_.get(name);
        else
            throw DataError("checkpoint parameter '" + name + "' does not belong to a " +
                            variant_name(m.variant_) + " model");
        if (target->value.rows() != stored->value.rows() ||
            target->value.cols() != stored->value.cols())
            throw DataError("checkpoint parameter '" + name + "' has the wrong shape");
        target->value = stored->value;
    }
    for (const auto& [name, node] : m.encoder_params_.items()) {
        (void)node;
        if (!ckpt.params.contains(name))
            throw DataError("checkpoint is missing encoder parameter '" + name + "'");
    }
    if (!frozen) {
        for (const auto& [name, node] : m.aux_params_.items()) {
            (void)node;
            if (!ckpt.params.contains(name))
                throw DataError("checkpoint is missing auxiliary parameter '" + name + "'");
        }
    }
    if (frozen) m.freeze();
    return m;
}

}  // namespace driveseg
