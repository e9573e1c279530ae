// SPDX-License-Identifier: Apache-2.0

#include "limfb/common.hpp"

#include <cmath>
#include <limits>

namespace limfb {

namespace {

std::uint64_t splitmix64(std::uint64_t z)
{
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index)
{
    return splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index);
}

CVector complex_gaussian(Rng& rng, Index n)
{
    std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
    CVector out(n);
    for (Index i = 0; i < n; ++i) {
        const double re = normal(rng);
        const double im = normal(rng);
        out(i) = cplx(re, im);
    }
    return out;
}

CMatrix complex_gaussian(Rng& rng, Index rows, Index cols)
{
    std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
    CMatrix out(rows, cols);
    for (Index c = 0; c < cols; ++c) {
        for (Index r = 0; r < rows; ++r) {
            const double re = normal(rng);
            const double im = normal(rng);
            out(r, c) = cplx(re, im);
        }
    }
    return out;
}

double log_sum_exp(const RVector& v)
{
    if (v.size() == 0)
        return -std::numeric_limits<double>::infinity();
    const double m = v.maxCoeff();
    if (!std::isfinite(m))
        return m;
    return m + std::log((v.array() - m).exp().sum());
}

Index argmax_first(const RVector& v)
{
    Index best = 0;
    for (Index i = 1; i < v.size(); ++i) {
        if (v(i) > v(best))
            best = i;
    }
    return best;
}

} // namespace limfb
