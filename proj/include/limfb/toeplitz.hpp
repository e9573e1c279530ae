// SPDX-License-Identifier: Apache-2.0
//
// Block-Toeplitz-with-Toeplitz-blocks covariances in the spectral form
//   C = D^H diag(c) D,   D = D_{Nv} (x) D_{Nh},   c >= 0, length 4N,
// where D_T holds the first T columns of the unitary 2T x 2T DFT matrix.

#pragma once

#include "limfb/channel_scene.hpp"
#include "limfb/common.hpp"

namespace limfb {

class ToeplitzDictionary {
  public:
    ToeplitzDictionary(int n_vert, int n_horiz);
    explicit ToeplitzDictionary(const ArrayGeometry& geometry) : ToeplitzDictionary(geometry.n_vert, geometry.n_horiz) {}

    int n_vert() const { return n_vert_; }
    int n_horiz() const { return n_horiz_; }
    Index dim() const { return d_.cols(); }
    Index atoms() const { return d_.rows(); }

    /// D, 4N x N.
    const CMatrix& matrix() const { return d_; }
    /// G[i,j] = |(D D^H)[i,j]|^2, the Gram matrix of the rank-one atoms.
    const RMatrix& gram() const { return gram_; }

    CMatrix realize(const RVector& spectrum) const;
    /// b[i] = (D S D^H)[i,i], the inner products of S with each atom.
    RVector atom_projections(const CMatrix& s) const;

  private:
    int n_vert_;
    int n_horiz_;
    CMatrix d_;
    RMatrix gram_;
};

/// Frobenius-nearest spectral covariance to a Hermitian scatter matrix under c >= floor.
///
/// Solves min ||D^H diag(c) D - S||_F subject to c >= floor as a bound-constrained
/// quadratic program in Gram form (active-set NNLS after shifting by the floor).
/// Passive-set subsystems carry a ridge of 1e-10 * trace(G) because G is rank
/// deficient: (2Nv-1)(2Nh-1) < 4N.
RVector toeplitz_mstep(const ToeplitzDictionary& dictionary, const CMatrix& scatter, double floor);

/// True iff `cov` is Hermitian and constant along block diagonals and along the
/// diagonals inside each block, within 1e-8 relative to its largest entry.
bool check_structure(const CMatrix& cov, const ArrayGeometry& geometry);

} // namespace limfb
