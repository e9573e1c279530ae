// SPDX-License-Identifier: Apache-2.0
//
// Shared numeric types, error classes and seeded random helpers.

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace limfb {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;
using Index = Eigen::Index;

using Rng = std::mt19937_64;

/// Raised when a covariance (or a system built from one) is not positive definite.
class NumericalDomainError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/// Mixes (master, stream, index) into an independent 64-bit seed (SplitMix64 finalizer).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0);

/// Draws n i.i.d. CN(0, 1) entries (real and imaginary parts each N(0, 1/2)).
CVector complex_gaussian(Rng& rng, Index n);
CMatrix complex_gaussian(Rng& rng, Index rows, Index cols);

/// log(sum(exp(v))) without overflow; -inf for an all -inf input.
double log_sum_exp(const RVector& v);

/// Index of the largest entry, lowest index on ties.
Index argmax_first(const RVector& v);

} // namespace limfb
