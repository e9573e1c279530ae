// SPDX-License-Identifier: Apache-2.0
//
// Independent reference computations for the tests. These use explicit
// inverses, determinants and index loops rather than the library's helpers.

#pragma once

#include "limfb/common.hpp"

#include <Eigen/LU>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>

namespace oracle {

using limfb::cplx;
using limfb::CMatrix;
using limfb::CVector;
using limfb::Index;
using limfb::RVector;

inline CMatrix random_matrix(std::mt19937_64& rng, Index rows, Index cols)
{
    std::normal_distribution<double> g(0.0, 1.0);
    CMatrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            m(i, j) = cplx(g(rng), g(rng));
    return m;
}

inline CVector random_vector(std::mt19937_64& rng, Index n) { return random_matrix(rng, n, 1).col(0); }

/// Random Hermitian positive definite matrix A A^H + shift I.
inline CMatrix random_hpd(std::mt19937_64& rng, Index n, double shift = 0.5)
{
    const CMatrix a = random_matrix(rng, n, n);
    CMatrix c = a * a.adjoint() / static_cast<double>(n);
    c += shift * CMatrix::Identity(n, n);
    return 0.5 * (c + c.adjoint());
}

inline double log_density(const CVector& x, const CVector& mu, const CMatrix& c)
{
    const Eigen::FullPivLU<CMatrix> lu(c);
    const CMatrix inv = lu.inverse();
    const cplx det = lu.determinant();
    const CVector d = x - mu;
    const cplx q = (d.adjoint() * inv * d)(0, 0);
    return -static_cast<double>(x.size()) * std::log(std::numbers::pi) - std::log(std::abs(det)) - q.real();
}

inline CMatrix kron(const CMatrix& a, const CMatrix& b)
{
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j)
            for (Index k = 0; k < b.rows(); ++k)
                for (Index l = 0; l < b.cols(); ++l)
                    out(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
    return out;
}

/// Unitary T x T DFT with entries exp(-i 2 pi a b / T) / sqrt(T).
inline CMatrix dft(int t)
{
    CMatrix f(t, t);
    for (int a = 0; a < t; ++a)
        for (int b = 0; b < t; ++b)
            f(a, b) = std::exp(cplx(0.0, -2.0 * std::numbers::pi * a * b / t)) / std::sqrt(static_cast<double>(t));
    return f;
}

/// Per-user rate terms of the sum-rate formula evaluated one by one.
inline double sum_rate(const CMatrix& h, const CMatrix& v, double sigma2)
{
    double total = 0.0;
    for (Index j = 0; j < h.cols(); ++j) {
        cplx s(0.0, 0.0);
        for (Index i = 0; i < h.rows(); ++i)
            s += h(i, j) * v(i, j);
        double interference = 0.0;
        for (Index m = 0; m < h.cols(); ++m) {
            if (m == j)
                continue;
            cplx t(0.0, 0.0);
            for (Index i = 0; i < h.rows(); ++i)
                t += h(i, j) * v(i, m);
            interference += std::norm(t);
        }
        total += std::log2(1.0 + std::norm(s) / (interference + sigma2));
    }
    return total;
}

/// Fresh scratch directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("limfb_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace oracle
