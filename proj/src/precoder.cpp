// SPDX-License-Identifier: Apache-2.0

#include "limfb/precoder.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace limfb {

DirectionalRepresentative directional_representative(const GmmModel& model, Index k)
{
    if (k < 0 || k >= model.components())
        throw std::out_of_range("directional_representative: component index out of range");
    const CVector& mu = model.mean(k);
    CMatrix corr = model.covariance(k) + mu * mu.adjoint();
    corr = 0.5 * (corr + corr.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(corr);
    const Index n = corr.rows();

    DirectionalRepresentative rep;
    rep.direction = eig.eigenvectors().col(n - 1);
    if (n > 1) {
        const double top = eig.eigenvalues()(n - 1);
        rep.degenerate = top - eig.eigenvalues()(n - 2) < 1e-10 * std::max(1.0, std::abs(top));
    }
    Index pivot = 0;
    rep.direction.cwiseAbs().maxCoeff(&pivot);
    const cplx p = rep.direction(pivot);
    rep.direction *= std::conj(p) / std::abs(p);
    rep.direction(pivot) = std::abs(rep.direction(pivot));
    rep.direction.normalize();
    return rep;
}

CMatrix directional_representatives(const GmmModel& model)
{
    CMatrix reps(model.dim(), model.components());
    for (Index k = 0; k < model.components(); ++k)
        reps.col(k) = directional_representative(model, k).direction;
    return reps;
}

PrecoderSet rci_precoders(const CMatrix& representatives, double sigma_n2, double rho)
{
    const Index j = representatives.cols();
    if (j < 1)
        throw std::invalid_argument("rci_precoders: need at least one user");
    if (!(rho > 0.0) || sigma_n2 < 0.0)
        throw std::invalid_argument("rci_precoders: invalid power or noise variance");
    if ((representatives.colwise().squaredNorm().array() == 0.0).any())
        throw std::invalid_argument("rci_precoders: representatives must be nonzero");

    PrecoderSet out;
    out.designer = "rci";
    out.rho = rho;
    out.regularizer = static_cast<double>(j) * sigma_n2 / rho;

    // (G G^H + a I)^{-1} G = G (G^H G + a I)^{-1} with G = conj(H~)
    const CMatrix g = representatives.conjugate();
    CMatrix gram = g.adjoint() * g;
    gram += out.regularizer * CMatrix::Identity(j, j);
    Eigen::LLT<CMatrix> llt(gram);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-13) {
        const double ridge = 1e-12 * static_cast<double>(j);
        gram += ridge * CMatrix::Identity(j, j);
        out.regularizer += ridge;
        out.ridge_added = true;
        llt.compute(gram);
    }
    const CMatrix u = g * llt.solve(CMatrix::Identity(j, j));
    out.vectors = u * std::sqrt(rho / u.squaredNorm());
    return out;
}

// ---------------------------------------------------------------------------

void SwmmseOptions::validate() const
{
    if (max_iters < 1)
        throw std::invalid_argument("SwmmseOptions: max_iters must be at least 1");
    if (!(bisection_tol > 0.0) || !(weight_clamp >= 1.0) || step_exponent < 0.0)
        throw std::invalid_argument("SwmmseOptions: invalid tolerance, clamp or step exponent");
}

namespace {

// v_j = (A + lambda I)^{-1} b_j with the smallest lambda >= 0 meeting sum ||v_j||^2 <= rho.
CMatrix power_constrained_solve(const CMatrix& a, const CMatrix& b, double rho, double tol)
{
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(a);
    const RVector lambda = eig.eigenvalues().cwiseMax(0.0);
    const CMatrix bt = eig.eigenvectors().adjoint() * b;
    const RVector mass = bt.rowwise().squaredNorm();
    const double null_tol = 1e-12 * std::max(lambda.maxCoeff(), 1e-300);

    const auto power = [&](double mu) {
        double p = 0.0;
        for (Index i = 0; i < lambda.size(); ++i) {
            const double d = lambda(i) + mu;
            if (mu == 0.0 && lambda(i) <= null_tol)
                continue; // pseudo-inverse on the null space of A
            p += mass(i) / (d * d);
        }
        return p;
    };
    const auto solution = [&](double mu) {
        RVector inv(lambda.size());
        for (Index i = 0; i < lambda.size(); ++i) {
            const double d = lambda(i) + mu;
            inv(i) = (mu == 0.0 && lambda(i) <= null_tol) ? 0.0 : 1.0 / d;
        }
        return CMatrix(eig.eigenvectors() * (inv.cast<cplx>().asDiagonal() * bt));
    };

    if (power(0.0) <= rho)
        return solution(0.0);

    double lo = 0.0;
    double hi = std::sqrt(mass.sum() / rho);
    while (power(hi) > rho)
        hi *= 2.0;
    for (int it = 0; it < 200 && power(hi) < rho * (1.0 - tol); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (power(mid) > rho)
            lo = mid;
        else
            hi = mid;
    }
    return solution(hi);
}

} // namespace

PrecoderSet swmmse_precoders(const GmmModel& model, const std::vector<FeedbackReport>& reports, double sigma_n2,
                             double rho, const SwmmseOptions& options)
{
    options.validate();
    const auto j_count = static_cast<Index>(reports.size());
    if (j_count < 1)
        throw std::invalid_argument("swmmse_precoders: need at least one user");
    if (!(rho > 0.0) || sigma_n2 < 0.0)
        throw std::invalid_argument("swmmse_precoders: invalid power or noise variance");
    for (const auto& r : reports) {
        if (r.index < 0 || r.index >= model.components())
            throw std::out_of_range("swmmse_precoders: feedback index out of range");
    }

    const Index n = model.dim();
    PrecoderSet out;
    out.designer = "swmmse";
    out.rho = rho;
    out.vectors.resize(n, j_count);
    for (Index j = 0; j < j_count; ++j) {
        const auto rep = directional_representative(model, reports[static_cast<std::size_t>(j)].index);
        out.vectors.col(j) = std::sqrt(rho / static_cast<double>(j_count)) * rep.direction.conjugate();
    }

    CMatrix a = CMatrix::Zero(n, n);
    CMatrix b = CMatrix::Zero(n, j_count);
    CMatrix h(n, j_count);
    Rng rng(options.seed);
    std::vector<double> window;

    for (int t = 1; t <= options.max_iters; ++t) {
        for (Index j = 0; j < j_count; ++j)
            h.col(j) = sample_component(model, reports[static_cast<std::size_t>(j)].index, rng);

        const CMatrix gains = h.transpose() * out.vectors; // (j, m) = h_j^T v_m
        const double gamma = std::pow(static_cast<double>(t), -options.step_exponent);
        // weighted conj(h_j) columns whose outer products form the A update
        CMatrix scaled(n, j_count);
        CMatrix b_update(n, j_count);
        double sample_rate = 0.0;
        for (Index j = 0; j < j_count; ++j) {
            const double signal = std::norm(gains(j, j));
            const double total = gains.row(j).squaredNorm() + sigma_n2;
            const cplx u = std::conj(gains(j, j)) / total;
            const double mse = (total - signal) / total;
            const double w = std::clamp(1.0 / mse, 1.0, options.weight_clamp);
            sample_rate += std::log2(total / (total - signal));
            scaled.col(j) = std::sqrt(w) * std::abs(u) * h.col(j).conjugate();
            b_update.col(j) = w * std::conj(u) * h.col(j).conjugate();
        }
        a = (1.0 - gamma) * a + gamma * (scaled * scaled.adjoint());
        b = (1.0 - gamma) * b + gamma * b_update;
        a = 0.5 * (a + a.adjoint()).eval();

        out.vectors = power_constrained_solve(a, b, rho, options.bisection_tol);
        if (!out.vectors.allFinite()) {
            std::ostringstream msg;
            msg << "swmmse_precoders: non-finite precoders at iteration " << t << " (trace A = " << a.trace().real()
                << ", ||B|| = " << b.norm() << ")";
            throw std::runtime_error(msg.str());
        }

        window.push_back(sample_rate);
        if (options.report_window > 0 && static_cast<int>(window.size()) > options.report_window)
            window.erase(window.begin());
        double avg = 0.0;
        for (double r : window)
            avg += r;
        avg /= static_cast<double>(window.size());

        out.trajectory.push_back({t, out.vectors.squaredNorm(), sample_rate, avg});
        if (options.on_iteration)
            options.on_iteration(t, out.vectors);
    }
    return out;
}

} // namespace limfb
