// SPDX-License-Identifier: Apache-2.0

#include "limfb/pilots.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace limfb {

PilotSetup PilotSetup::with_noise_variance(double sigma_n2) const
{
    if (sigma_n2 < 0.0)
        throw std::invalid_argument("noise variance must be non-negative");
    PilotSetup out = *this;
    out.noise_variance = sigma_n2;
    return out;
}

CMatrix unitary_dft(int t)
{
    CMatrix f(t, t);
    const double scale = 1.0 / std::sqrt(static_cast<double>(t));
    for (int a = 0; a < t; ++a) {
        for (int b = 0; b < t; ++b)
            f(a, b) = std::polar(scale, -2.0 * std::numbers::pi * ((static_cast<long>(a) * b) % t) / t);
    }
    return f;
}

CMatrix kronecker(const CMatrix& a, const CMatrix& b)
{
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i) {
        for (Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
    return out;
}

PilotSetup build_pilot_matrix(const ArrayGeometry& geometry, Index num_pilots, double rho)
{
    geometry.validate();
    const Index n = geometry.size();
    if (num_pilots < 1 || num_pilots > n)
        throw std::invalid_argument("build_pilot_matrix: need 1 <= n_p <= N (n_p=" + std::to_string(num_pilots) +
                                    ", N=" + std::to_string(n) + ")");
    if (!(rho > 0.0))
        throw std::invalid_argument("build_pilot_matrix: rho must be positive");

    const CMatrix f = kronecker(unitary_dft(geometry.n_vert), unitary_dft(geometry.n_horiz));
    PilotSetup setup;
    setup.rho = rho;
    setup.pilots.resize(num_pilots, n);
    for (Index i = 0; i < num_pilots; ++i) {
        const Index row = std::llround(static_cast<double>(i) * static_cast<double>(n) / static_cast<double>(num_pilots));
        setup.pilots.row(i) = f.row(row) * (std::sqrt(rho) / f.row(row).norm());
    }
    return setup;
}

CVector observe_with_noise(const PilotSetup& setup, const CVector& h, const CVector& standard_noise)
{
    if (h.size() != setup.dim())
        throw std::invalid_argument("observe: channel dimension does not match the pilot matrix");
    if (standard_noise.size() < setup.num_pilots())
        throw std::invalid_argument("observe: noise draw shorter than n_p");
    return setup.pilots * h + std::sqrt(setup.noise_variance) * standard_noise.head(setup.num_pilots());
}

CVector observe(const PilotSetup& setup, const CVector& h, std::uint64_t seed)
{
    Rng rng(seed);
    return observe_with_noise(setup, h, complex_gaussian(rng, setup.num_pilots()));
}

} // namespace limfb
