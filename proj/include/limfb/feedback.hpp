// SPDX-License-Identifier: Apache-2.0
//
// Feedback inference at the terminals: DFT codebooks with codebook matching on
// a channel estimate, and GMM feedback from pilot observations or perfect CSI.
// Component and codebook indices are zero-based.

#pragma once

#include "limfb/channel_scene.hpp"
#include "limfb/common.hpp"
#include "limfb/gmm.hpp"
#include "limfb/pilots.hpp"

#include <string>
#include <vector>

namespace limfb {

struct Codebook {
    CMatrix entries; // N x K, unit-norm columns
    int bits = 0;
    int beams_vert = 0;
    int beams_horiz = 0;
    double oversampling_vert = 1.0;  // beams_vert / N_v
    double oversampling_horiz = 1.0; // beams_horiz / N_h

    Index size() const { return entries.cols(); }
};

/// Columns of F_v (x) F_h with F_T[a,b] = exp(-i 2 pi a b / beams_T), normalized.
///
/// Beam allocation for K = 2^B: with K >= N the vertical count stays at N_v and
/// the horizontal dimension is oversampled; with K < N the vertical dimension is
/// undersampled first (horizontal count stays N_h while possible). Combinations
/// whose counts are not integers are rejected with the attempted allocation.
Codebook build_dft_codebook(const ArrayGeometry& geometry, int bits);

struct FeedbackReport {
    std::size_t user = 0;
    Index index = 0;
    std::string scheme;
    bool degenerate = false; // zero channel estimate in codebook matching
};

/// argmax_k |c_k^H h_hat|, lowest index on ties.
FeedbackReport select_codebook_index(const Codebook& codebook, const CVector& h_hat, std::string scheme = "dft");

/// Index of the largest responsibility p(k | y); O(K n_p^2).
FeedbackReport gmm_feedback_index(const ObservationGmm& observation_model, const CVector& y);
/// Index of the largest responsibility p(k | h).
FeedbackReport gmm_feedback_index_perfect(const GmmModel& model, const CVector& h);

// ---------------------------------------------------------------------------
// Channel estimators

/// Convex combination of per-component LMMSE estimates weighted by p(k | y).
class GmmEstimator {
  public:
    GmmEstimator(const GmmModel& model, const PilotSetup& setup);
    CVector estimate(const CVector& y) const;
    const ObservationGmm& observation_model() const { return observation_; }

  private:
    ObservationGmm observation_;
    std::vector<CVector> means_;
    std::vector<CVector> projected_means_;
    std::vector<CMatrix> filters_; // C_k P^H (P C_k P^H + sigma^2 I)^{-1}
};

CVector estimate_gmm(const GmmModel& model, const PilotSetup& setup, const CVector& y);

struct SampleMoments {
    CVector mean;
    CMatrix covariance; // biased (1/L)
};
SampleMoments sample_moments(const ChannelDataset& dataset);

class LmmseEstimator {
  public:
    LmmseEstimator(CVector mean, const CMatrix& covariance, const PilotSetup& setup);
    CVector estimate(const CVector& y) const;

  private:
    CVector mean_;
    CVector projected_mean_;
    CMatrix filter_;
};

CVector estimate_lmmse(const CVector& mean, const CMatrix& covariance, const PilotSetup& setup, const CVector& y);

/// 2x oversampled 2D-DFT grid: 4N unit-norm atoms exp(i 2 pi (a v / 2Nv + b h / 2Nh)).
CMatrix omp_dictionary(const ArrayGeometry& geometry);

struct OmpStop {
    Index max_support = 0;           // s_max; capped at n_p
    double residual_threshold = 0.0; // stop once ||r|| <= threshold
    static OmpStop for_setup(const PilotSetup& setup);
};

struct OmpResult {
    CVector estimate;
    std::vector<Index> support;
    CVector coefficients;
    double residual_norm = 0.0;
};

class OmpEstimator {
  public:
    OmpEstimator(const PilotSetup& setup, CMatrix dictionary, OmpStop stop);
    OmpResult estimate(const CVector& y) const;

  private:
    CMatrix dictionary_;
    CMatrix sensing_; // P * dictionary
    RVector atom_norms_;
    OmpStop stop_;
};

/// Greedy selection on normalized residual correlation with a least-squares refit
/// of the support every iteration (ridge 1e-10 when the refit is rank deficient).
OmpResult estimate_omp(const PilotSetup& setup, const CMatrix& dictionary, const CVector& y, const OmpStop& stop);

} // namespace limfb
