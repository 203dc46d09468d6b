#pragma once

#include <Eigen/Dense>
#include <vector>

namespace driveseg {

/// Linear conditioner fitted on pooled training embeddings that prepares
/// them for Euclidean clustering. Encoders calibrate neither the scale
/// nor the reliability of individual latent directions: some carry the
/// event structure at tiny variance, others carry high-variance nuisance
/// (frame noise, collapsed posterior dimensions). Variance alone cannot
/// tell the two apart, but persistence can: event content stays
/// correlated across a window length while nuisance decorrelates. The
/// conditioner therefore whitens to unit covariance, rotates to the
/// eigenbasis of the lag-L difference covariance, and scales every
/// direction by its lag-L autocorrelation, so signal sits at unit scale
/// and junk shrinks wherever it lives in the spectrum.
struct EmbeddingConditioner {
    Eigen::VectorXd mean;        // pooled training mean, length e
    Eigen::MatrixXd projection;  // autocorrelation-weighted whitening map, e x e
    Eigen::VectorXd slowness;    // per-direction lag-L autocorrelation in [0,1]
    long lag = 1;

    /// Project one session (e x M, columns are timesteps) and subtract
    /// the session's own mean afterwards: whole-session offsets are
    /// nuisance a pooled clustering must not separate on.
    Eigen::MatrixXd apply(const Eigen::MatrixXd& session_embeddings) const;
};

/// Fit on per-session training embeddings. The lag should match the
/// encoder window width: windows closer than w timesteps share samples,
/// so only differences at lag >= w separate regime persistence from
/// window overlap. Difference statistics are pooled within sessions
/// (never across a session boundary); sessions shorter than lag+1 still
/// contribute to the covariance. With no usable difference pair the
/// conditioner degrades to plain whitening. Throws DataError on an empty
/// collection or mismatched embedding dimensions.
EmbeddingConditioner fit_embedding_conditioner(
    const std::vector<Eigen::MatrixXd>& sessions, long lag);

}  // namespace driveseg
