// SPDX-License-Identifier: Apache-2.0
//
// Downlink precoder design from feedback indices. Rates are computed with
// h^T v, so every designer consumes conj(representative): a representative
// equal to the channel direction then yields the maximal beamforming gain.

#pragma once

#include "limfb/common.hpp"
#include "limfb/feedback.hpp"
#include "limfb/gmm.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace limfb {

struct DirectionalRepresentative {
    CVector direction;       // unit norm, largest-magnitude entry real positive
    bool degenerate = false; // top eigenvalue gap below 1e-10 (relative)
};

/// Dominant eigenvector of C_k + mu_k mu_k^H.
DirectionalRepresentative directional_representative(const GmmModel& model, Index k);
/// All K representatives as columns (N x K); meant to be computed once per model.
CMatrix directional_representatives(const GmmModel& model);

struct SwmmseIteration {
    int iteration = 0;
    double power = 0.0;              // sum_j ||v_j||^2 after the update
    double sample_sum_rate = 0.0;    // rate of the previous precoders on this iteration's samples
    double averaged_sample_rate = 0.0; // running mean of sample_sum_rate over the reporting window
};

struct PrecoderSet {
    CMatrix vectors; // N x J, column j is v_j
    double rho = 1.0;
    std::string designer;
    double regularizer = 0.0; // RCI: J sigma^2 / rho (plus ridge, if added)
    bool ridge_added = false;
    std::vector<SwmmseIteration> trajectory;

    Index users() const { return vectors.cols(); }
    double total_power() const { return vectors.squaredNorm(); }
};

/// Regularized channel inversion on representatives (columns of `representatives`):
/// u_j = (sum_m conj(h_m) h_m^T + (J sigma^2 / rho) I)^{-1} conj(h_j), scaled by one
/// common factor so that sum_j ||v_j||^2 = rho.
PrecoderSet rci_precoders(const CMatrix& representatives, double sigma_n2, double rho);

struct SwmmseOptions {
    int max_iters = 300;
    double step_exponent = 1.0;   // gamma_t = t^-step_exponent
    double bisection_tol = 1e-9;  // relative to rho
    double weight_clamp = 1e6;
    std::uint64_t seed = 0;
    int report_window = 10;
    /// Called after each iteration with the current precoders.
    std::function<void(int, const CMatrix&)> on_iteration;

    void validate() const;
};

/// Stochastic WMMSE fed with one GMM sample per user per iteration.
/// Precoders start at sqrt(rho/J) conj(representative of k*_j).
PrecoderSet swmmse_precoders(const GmmModel& model, const std::vector<FeedbackReport>& reports, double sigma_n2,
                             double rho, const SwmmseOptions& options);

} // namespace limfb
