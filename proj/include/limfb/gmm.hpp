// SPDX-License-Identifier: Apache-2.0
//
// Circularly-symmetric complex Gaussian mixtures: densities, responsibilities,
// projection into the pilot-observation domain, sampling, EM fitting with full
// or block-Toeplitz covariances, and the "LFBM" model container.

#pragma once

#include "limfb/channel_scene.hpp"
#include "limfb/common.hpp"
#include "limfb/pilots.hpp"
#include "limfb/toeplitz.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace limfb {

enum class CovarianceConstraint : std::uint8_t { Full = 0, Toeplitz = 1 };

std::string to_string(CovarianceConstraint c);
CovarianceConstraint parse_constraint(const std::string& s);

struct FullCovariance {
    CMatrix matrix;
};
struct SpectralCovariance {
    RVector spectrum; // length 4N, realized as D^H diag(spectrum) D
};
using CovarianceRepr = std::variant<FullCovariance, SpectralCovariance>;

/// N_C(mean, cov) with a cached Cholesky factor.
class GaussianDensity {
  public:
    /// Throws NumericalDomainError if `cov` is not positive definite.
    GaussianDensity(CVector mean, const CMatrix& cov);

    double log_density(const CVector& x) const;
    const CVector& mean() const { return mean_; }
    /// Lower-triangular L with cov = L L^H.
    const CMatrix& cholesky() const { return chol_; }
    double log_det() const { return log_det_; }
    Index dim() const { return mean_.size(); }

  private:
    CVector mean_;
    CMatrix chol_;
    double log_det_ = 0.0;
};

/// log N_C(x; mean, cov) = -N log(pi) - log det(cov) - (x-mean)^H cov^{-1} (x-mean).
double log_density(const CVector& x, const CVector& mean, const CMatrix& cov);

class GmmModel {
  public:
    /// All covariances must share one representation. Spectral covariances are
    /// realized against the dictionary of `geometry`. Weights must be positive
    /// and sum to one within 1e-10; they are renormalized exactly.
    GmmModel(ArrayGeometry geometry, std::vector<double> weights, std::vector<CVector> means,
             std::vector<CovarianceRepr> covariances);

    Index components() const { return static_cast<Index>(means_.size()); }
    Index dim() const { return geometry_.size(); }
    CovarianceConstraint constraint() const { return constraint_; }
    const ArrayGeometry& geometry() const { return geometry_; }

    double weight(Index k) const { return weights_(k); }
    const RVector& weights() const { return weights_; }
    const CVector& mean(Index k) const { return means_[static_cast<std::size_t>(k)]; }
    const CovarianceRepr& covariance_repr(Index k) const { return reprs_[static_cast<std::size_t>(k)]; }
    /// Realized N x N covariance.
    const CMatrix& covariance(Index k) const { return covs_[static_cast<std::size_t>(k)]; }

    /// Throws NumericalDomainError if component k's covariance is singular.
    const GaussianDensity& density(Index k) const;
    /// Square-root factor R with cov = R R^H (Cholesky, or clipped eigen square root).
    const CMatrix& sampling_factor(Index k) const { return sqrt_factors_[static_cast<std::size_t>(k)]; }
    /// True when component k fell back to the eigen square root.
    bool sampling_fallback(Index k) const { return sqrt_fallback_[static_cast<std::size_t>(k)]; }

    /// log(pi_k) + log N_C(x; mu_k, C_k) for every k.
    RVector log_scores(const CVector& x) const;

    /// Weights share `bits` only when K is a power of two.
    std::optional<int> bits() const;

  private:
    ArrayGeometry geometry_;
    CovarianceConstraint constraint_;
    RVector weights_;
    std::vector<CVector> means_;
    std::vector<CovarianceRepr> reprs_;
    std::vector<CMatrix> covs_;
    std::vector<std::optional<GaussianDensity>> densities_;
    std::vector<CMatrix> sqrt_factors_;
    std::vector<bool> sqrt_fallback_;
};

/// GMM of the pilot observations: means P mu_k, covariances P C_k P^H + sigma_n^2 I.
class ObservationGmm {
  public:
    ObservationGmm(const GmmModel& model, const PilotSetup& setup);

    Index components() const { return static_cast<Index>(densities_.size()); }
    Index dim() const { return dim_; }
    CovarianceConstraint source_constraint() const { return constraint_; }
    const RVector& weights() const { return weights_; }
    const GaussianDensity& density(Index k) const { return densities_[static_cast<std::size_t>(k)]; }

    /// log(pi_k) + log N_C(y; P mu_k, P C_k P^H + sigma^2 I); O(K n_p^2).
    RVector log_scores(const CVector& y) const;

  private:
    Index dim_;
    CovarianceConstraint constraint_;
    RVector weights_;
    RVector log_weights_;
    std::vector<GaussianDensity> densities_;
};

ObservationGmm project_to_observation(const GmmModel& model, const PilotSetup& setup);

/// Posterior component probabilities via log-sum-exp.
RVector responsibilities(const GmmModel& model, const CVector& h);
RVector responsibilities(const ObservationGmm& model, const CVector& y);
RVector responsibilities_from_scores(const RVector& log_scores);

/// `count` i.i.d. draws from component k, one per column (N x count).
CMatrix sample_component(const GmmModel& model, Index k, Index count, std::uint64_t seed);
/// Draws one sample of component k from an existing generator.
CVector sample_component(const GmmModel& model, Index k, Rng& rng);

/// Covariance parameters transferred per model: K N (N+1) / 2 (full) or 4 K N (Toeplitz).
std::uint64_t param_count(std::uint64_t components, std::uint64_t dim, CovarianceConstraint constraint);

// ---------------------------------------------------------------------------
// EM fitting

enum class EmInit { KMeansPlusPlus, RandomSamples };

struct EmOptions {
    int max_iters = 100;
    double rel_loglik_tol = 1e-6;
    double floor_scale = 1e-6; // floor = floor_scale * trace(global covariance) / N
    EmInit init = EmInit::KMeansPlusPlus;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EmReport {
    std::vector<double> loglik; // average log-likelihood, initial parameters first
    int iterations = 0;
    bool converged = false;
    int reseeded = 0;          // collapsed components re-seeded from a training sample
    double floor = 0.0;
    double max_rel_decrease = 0.0; // largest relative per-step drop in loglik
};

struct EmResult {
    GmmModel model;
    EmReport report;
};

/// Maximum-likelihood mixture fit. Requires a normalized dataset with L >= K.
EmResult fit_em(const ChannelDataset& dataset, Index components, CovarianceConstraint constraint,
                const EmOptions& options);

/// Average log-likelihood of the columns of `data` under `model`.
double average_loglik(const GmmModel& model, const CMatrix& data);

// ---------------------------------------------------------------------------
// LFBM container

class ModelFormatError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint16_t kModelFormatVersion = 1;

/// magic "LFBM", version u16, B u8, N u32, constraint u8, n_vert u32, n_horiz u32,
/// then per component: weight f64, mean (N complex f64), covariance payload
/// (full: row-major upper triangle incl. diagonal as complex f64; Toeplitz: 4N f64).
void save_model(const GmmModel& model, const std::filesystem::path& path);
GmmModel load_model(const std::filesystem::path& path);

/// Number of covariance entries stored in a model file (counted while parsing).
std::uint64_t count_covariance_entries(const std::filesystem::path& path);

} // namespace limfb
