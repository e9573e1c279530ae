// SPDX-License-Identifier: Apache-2.0
//
// Pilot matrices and noisy pilot observations y = P h + n.

#pragma once

#include "limfb/channel_scene.hpp"
#include "limfb/common.hpp"

#include <cstdint>

namespace limfb {

struct PilotSetup {
    CMatrix pilots;              // n_p x N; every row has squared norm rho
    double noise_variance = 0.0; // sigma_n^2, linear
    double rho = 1.0;            // total transmit power, linear

    Index num_pilots() const { return pilots.rows(); }
    Index dim() const { return pilots.cols(); }
    double snr() const { return rho / noise_variance; }
    PilotSetup with_noise_variance(double sigma_n2) const;
};

/// Unitary 2D-DFT F_{Nv} (x) F_{Nh}, rows picked at flat indices round(i*N/n_p),
/// each row rescaled to squared norm rho. Noise variance is left at 0.
PilotSetup build_pilot_matrix(const ArrayGeometry& geometry, Index num_pilots, double rho);

/// y = P h + sigma_n * w with w ~ CN(0, I) drawn from `seed`.
CVector observe(const PilotSetup& setup, const CVector& h, std::uint64_t seed);

/// y = P h + sigma_n * w for a caller-supplied standard noise draw w (length >= n_p;
/// the first n_p entries are used). Lets several schemes share one noise realization.
CVector observe_with_noise(const PilotSetup& setup, const CVector& h, const CVector& standard_noise);

/// Unitary T-point DFT matrix, F[a,b] = exp(-i 2 pi a b / T) / sqrt(T).
CMatrix unitary_dft(int t);

CMatrix kronecker(const CMatrix& a, const CMatrix& b);

} // namespace limfb
