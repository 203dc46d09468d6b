#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "driveseg/nn/checkpoint.hpp"
#include "driveseg/nn/graph.hpp"
#include "driveseg/nn/optimizer.hpp"
#include "driveseg/representation.hpp"
#include "driveseg/timeseries.hpp"

namespace driveseg {

enum class EncoderVariant { AE, Drive2Vec, VAME, VAMEstar, TLoss, TNC };

std::string variant_name(EncoderVariant v);
EncoderVariant variant_from_name(const std::string& name);

struct TrainingConfig {
    int epochs = 200;
    int steps = 800;  // contrastive triplet training runs by steps, not epochs
    double learning_rate = 1e-4;
    int train_step = 3;      // sliding-window step while training
    int batch_size = 64;
    int ref_multiplier = 3;  // reference segment length = multiplier * w
    int negatives = 10;      // negative windows per anchor
    double neighborhood_alpha = 0.01;   // ADF significance for neighborhoods
    int max_neighborhood = 5;           // neighborhood cap, in windows
    double pu_weight = 0.05;            // unlabeled-positive mixture weight
    double kl_anneal_fraction = 0.25;   // KL weight ramps 0->1 over this share of epochs
    int hidden_width = 64;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Estimate how far around an anchor window the series stays stationary.
/// Expands symmetrically in whole windows, testing the concatenated span
/// per channel with an ADF test combined by majority vote. Returns the
/// last accepted radius, at least 1, at most max_radius.
int estimate_neighborhood(const MultivariateTimeSeries& series, long anchor_end, int width,
                          double alpha, int max_radius, int lags = 1);

/// Encoder f mapping a (d x w) window to an e-dimensional embedding,
/// one of six variants sharing a dilated causal convolution backbone.
/// Training attaches variant-specific auxiliary heads (decoders or a
/// discriminator) which freeze() discards; inference needs only the
/// backbone.
class EncoderModel {
public:
    static EncoderModel create(EncoderVariant variant, int input_channels, int window_width,
                               int embedding_dim, const TrainingConfig& config);

    EncoderVariant variant() const { return variant_; }
    int input_channels() const { return input_channels_; }
    int window_width() const { return window_width_; }
    int embedding_dim() const { return embedding_dim_; }
    const TrainingConfig& config() const { return config_; }
    bool frozen() const { return frozen_; }
    double final_loss() const { return final_loss_; }
    const std::vector<double>& loss_history() const { return loss_history_; }

    /// Deterministic embedding of one window. For the variational
    /// variants this is the posterior mean; no sampling at inference.
    Eigen::VectorXd encode(const Eigen::MatrixXd& window) const;

    /// Encode every step-1 sliding window, preserving temporal order.
    TimeSeriesRepresentation encode_series(const MultivariateTimeSeries& series) const;

    /// Dispatches to the variant's training procedure. Returns the
    /// per-epoch (or per-step for the triplet variant) loss history.
    std::vector<double> train(const std::vector<MultivariateTimeSeries>& sessions);

    void freeze();

    void save(const std::string& checkpoint_path, const std::string& sidecar_path) const;
    static EncoderModel load(const std::string& checkpoint_path,
                             const std::string& sidecar_path);

    // Loss graphs on explicit batches; exposed so gradients can be
    // checked against finite differences with frozen randomness.
    nn::NodePtr build_ae_loss(const Eigen::MatrixXd& windows) const;  // (d x B*w)
    nn::NodePtr build_drive2vec_loss(const Eigen::MatrixXd& current,
                                     const Eigen::MatrixXd& next) const;
    nn::NodePtr build_vame_loss(const Eigen::MatrixXd& current, const Eigen::MatrixXd& future,
                                const Eigen::MatrixXd* past, const Eigen::MatrixXd& noise,
                                double kl_weight) const;
    nn::NodePtr build_tloss_loss(const Eigen::MatrixXd& ref_center, const Eigen::MatrixXd& positive,
                                 const Eigen::MatrixXd& negatives, int negatives_per_anchor) const;
    nn::NodePtr build_tnc_loss(const Eigen::MatrixXd& anchors, const Eigen::MatrixXd& neighbors,
                               const Eigen::MatrixXd& distants, double pu_weight) const;

    /// Every trainable tensor (backbone plus auxiliaries), sorted by name.
    nn::ParameterSet all_parameters() const;

private:
    EncoderModel() = default;

    nn::NodePtr backbone_apply(const nn::NodePtr& x) const;  // (d x B*w) -> (out x B)
    nn::NodePtr embed(const nn::NodePtr& x) const;           // posterior mean for VAME
    nn::NodePtr decode(const std::string& head, const nn::NodePtr& z) const;
    nn::NodePtr discriminate(const nn::NodePtr& z1, const nn::NodePtr& z2) const;

    std::vector<double> train_generative(const std::vector<MultivariateTimeSeries>& sessions);
    std::vector<double> train_tloss(const std::vector<MultivariateTimeSeries>& sessions);
    std::vector<double> train_tnc(const std::vector<MultivariateTimeSeries>& sessions);

    EncoderVariant variant_ = EncoderVariant::AE;
    int input_channels_ = 0;
    int window_width_ = 0;
    int embedding_dim_ = 0;
    TrainingConfig config_;
    bool frozen_ = false;
    double final_loss_ = 0.0;
    std::vector<double> loss_history_;

    nn::ParameterSet encoder_params_;
    nn::ParameterSet aux_params_;
};

/// (d x B*w) matrix holding the windows ending at the given 0-based
/// indices, in order.
Eigen::MatrixXd pack_windows(const MultivariateTimeSeries& series,
                             const std::vector<long>& end_indices, int width);

}  // namespace driveseg
