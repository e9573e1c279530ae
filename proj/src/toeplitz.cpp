// SPDX-License-Identifier: Apache-2.0

#include "limfb/toeplitz.hpp"

#include "limfb/pilots.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace limfb {

namespace {

CMatrix truncated_dft(int t)
{
    const int m = 2 * t;
    CMatrix d(m, t);
    const double scale = 1.0 / std::sqrt(static_cast<double>(m));
    for (int a = 0; a < m; ++a) {
        for (int b = 0; b < t; ++b)
            d(a, b) = std::polar(scale, -2.0 * std::numbers::pi * a * b / m);
    }
    return d;
}

} // namespace

ToeplitzDictionary::ToeplitzDictionary(int n_vert, int n_horiz) : n_vert_(n_vert), n_horiz_(n_horiz)
{
    if (n_vert < 1 || n_horiz < 1)
        throw std::invalid_argument("ToeplitzDictionary: dimensions must be positive");
    d_ = kronecker(truncated_dft(n_vert), truncated_dft(n_horiz));
    gram_ = (d_ * d_.adjoint()).cwiseAbs2();
}

CMatrix ToeplitzDictionary::realize(const RVector& spectrum) const
{
    if (spectrum.size() != atoms())
        throw std::invalid_argument("ToeplitzDictionary::realize: spectrum length must be 4N");
    CMatrix c = d_.adjoint() * spectrum.cast<cplx>().asDiagonal() * d_;
    // exact Hermitian symmetry on the diagonal and across it
    c = 0.5 * (c + c.adjoint()).eval();
    return c;
}

RVector ToeplitzDictionary::atom_projections(const CMatrix& s) const
{
    // (D S D^H)_ii = sum_n (D S)_{in} conj(D_{in})
    const CMatrix ds = d_ * s;
    return (ds.array() * d_.conjugate().array()).rowwise().sum().real();
}

RVector toeplitz_mstep(const ToeplitzDictionary& dictionary, const CMatrix& scatter, double floor)
{
    if (scatter.rows() != dictionary.dim() || scatter.cols() != dictionary.dim())
        throw std::invalid_argument("toeplitz_mstep: scatter matrix has wrong size");
    if (floor < 0.0)
        throw std::invalid_argument("toeplitz_mstep: negative floor");

    const RMatrix& g = dictionary.gram();
    const Index m = g.rows();
    const double ridge = 1e-10 * g.trace();

    // shift c = floor + x, x >= 0
    const RVector q = dictionary.atom_projections(scatter) - floor * (g * RVector::Ones(m));
    const double tol = 1e-12 * std::max(1.0, q.cwiseAbs().maxCoeff());

    std::vector<char> passive(static_cast<std::size_t>(m), 0);
    RVector x = RVector::Zero(m);

    const auto solve_passive = [&](RVector& s) {
        std::vector<Index> idx;
        for (Index i = 0; i < m; ++i) {
            if (passive[i])
                idx.push_back(i);
        }
        s.setZero(m);
        if (idx.empty())
            return;
        const auto p = static_cast<Index>(idx.size());
        RMatrix gp(p, p);
        RVector qp(p);
        for (Index a = 0; a < p; ++a) {
            qp(a) = q(idx[a]);
            for (Index b = 0; b < p; ++b)
                gp(a, b) = g(idx[a], idx[b]);
            gp(a, a) += ridge;
        }
        const RVector sp = gp.ldlt().solve(qp);
        for (Index a = 0; a < p; ++a)
            s(idx[a]) = sp(a);
    };

    RVector w = q - g * x;
    RVector s(m);
    const int max_outer = static_cast<int>(3 * m);
    for (int outer = 0; outer < max_outer; ++outer) {
        Index j = -1;
        double best = tol;
        for (Index i = 0; i < m; ++i) {
            if (!passive[i] && w(i) > best) {
                best = w(i);
                j = i;
            }
        }
        if (j < 0)
            break;
        passive[j] = 1;
        solve_passive(s);

        for (int inner = 0; inner < static_cast<int>(m); ++inner) {
            double alpha = 1.0;
            bool infeasible = false;
            for (Index i = 0; i < m; ++i) {
                if (passive[i] && s(i) <= 0.0) {
                    infeasible = true;
                    alpha = std::min(alpha, x(i) / (x(i) - s(i)));
                }
            }
            if (!infeasible)
                break;
            x += alpha * (s - x);
            for (Index i = 0; i < m; ++i) {
                if (passive[i] && x(i) <= 1e-15 * std::max(1.0, x.maxCoeff())) {
                    passive[i] = 0;
                    x(i) = 0.0;
                }
            }
            solve_passive(s);
        }
        x = s.cwiseMax(0.0);
        w = q - g * x;
    }
    return (x.array() + floor).matrix();
}

bool check_structure(const CMatrix& cov, const ArrayGeometry& geometry)
{
    const Index n = geometry.size();
    if (cov.rows() != n || cov.cols() != n)
        return false;
    const double scale = std::max(cov.cwiseAbs().maxCoeff(), 1e-300);
    const double tol = 1e-8 * scale;

    if ((cov - cov.adjoint()).cwiseAbs().maxCoeff() > tol)
        return false;

    const int nh = geometry.n_horiz;
    for (Index r = 0; r < n; ++r) {
        const int va = static_cast<int>(r / nh);
        const int ha = static_cast<int>(r % nh);
        for (Index c = 0; c < n; ++c) {
            const int vb = static_cast<int>(c / nh);
            const int hb = static_cast<int>(c % nh);
            // canonical representative with the same block lag and in-block lag
            const int dv = va - vb;
            const int dh = ha - hb;
            const Index rr = static_cast<Index>(std::max(dv, 0)) * nh + std::max(dh, 0);
            const Index cc = static_cast<Index>(std::max(-dv, 0)) * nh + std::max(-dh, 0);
            if (std::abs(cov(r, c) - cov(rr, cc)) > tol)
                return false;
        }
    }
    return true;
}

} // namespace limfb
