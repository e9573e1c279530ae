// SPDX-License-Identifier: Apache-2.0
//
// EM for complex Gaussian mixtures. The E-step works on the whole N x L data
// block per component; all reductions run in a fixed order so that a seeded
// fit is reproducible bit for bit.

#include "limfb/gmm.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <numbers>

namespace limfb {

void EmOptions::validate() const
{
    if (max_iters < 0)
        throw std::invalid_argument("EmOptions: max_iters must be non-negative");
    if (!(rel_loglik_tol > 0.0) || !(floor_scale > 0.0))
        throw std::invalid_argument("EmOptions: tolerances must be positive");
}

namespace {

constexpr int kSpectralPasses = 4;

CMatrix clip_eigenvalues(const CMatrix& s, double floor)
{
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(s);
    const RVector lambda = eig.eigenvalues().cwiseMax(floor);
    CMatrix c = eig.eigenvectors() * lambda.cast<cplx>().asDiagonal() * eig.eigenvectors().adjoint();
    return 0.5 * (c + c.adjoint());
}

// -(log det C + tr(C^{-1} S)): per-unit-mass Gaussian fit of C to the scatter S.
double gaussian_fit(const CMatrix& cov, const CMatrix& s)
{
    Eigen::LLT<CMatrix> llt(cov);
    if (llt.info() != Eigen::Success)
        return -std::numeric_limits<double>::infinity();
    const CMatrix chol = llt.matrixL();
    const double log_det = 2.0 * chol.diagonal().real().array().log().sum();
    return -log_det - llt.solve(s).trace().real();
}

// Spectral-embedding EM: h = D^H z, z ~ CN(0, diag(c)). Each pass cannot lower
// gaussian_fit(realize(c), s); the floor clip is the exact constrained update.
RVector refine_spectrum(const ToeplitzDictionary& dict, const CMatrix& s, RVector c, double floor, int passes)
{
    const CMatrix& d = dict.matrix();
    for (int t = 0; t < passes; ++t) {
        Eigen::LLT<CMatrix> llt(dict.realize(c));
        if (llt.info() != Eigen::Success)
            break;
        const CMatrix w = llt.solve(d.adjoint()).adjoint(); // D C^{-1}
        const RVector q1 = w.cwiseProduct(d.conjugate()).rowwise().sum().real();
        const RVector q2 = (w * s).cwiseProduct(w.conjugate()).rowwise().sum().real();
        const RVector e = c.array() - c.array().square() * q1.array() + c.array().square() * q2.array();
        c = e.cwiseMax(floor);
    }
    return c;
}

struct Params {
    RVector weights;
    std::vector<CVector> means;
    std::vector<CMatrix> covs;
    std::vector<RVector> spectra; // Toeplitz only
};

// Log joint scores log(pi_k) + log N(x_l; mu_k, C_k), L x K.
RMatrix joint_log_scores(const Params& p, const CMatrix& x)
{
    const Index n = x.rows();
    const Index l = x.cols();
    const auto k_count = static_cast<Index>(p.means.size());
    const double log_pi_n = static_cast<double>(n) * std::log(std::numbers::pi);
    RMatrix lp(l, k_count);
    for (Index k = 0; k < k_count; ++k) {
        Eigen::LLT<CMatrix> llt(p.covs[static_cast<std::size_t>(k)]);
        if (llt.info() != Eigen::Success)
            throw NumericalDomainError("EM: component covariance lost positive definiteness");
        const CMatrix chol = llt.matrixL();
        const double log_det = 2.0 * chol.diagonal().real().array().log().sum();
        CMatrix z = x.colwise() - p.means[static_cast<std::size_t>(k)];
        chol.triangularView<Eigen::Lower>().solveInPlace(z);
        lp.col(k) = (std::log(p.weights(k)) - log_pi_n - log_det) - z.colwise().squaredNorm().transpose().array();
    }
    return lp;
}

// Turns joint scores into responsibilities in place; returns the average log-likelihood.
double normalize_rows(RMatrix& lp)
{
    double total = 0.0;
    for (Index l = 0; l < lp.rows(); ++l) {
        const double lse = log_sum_exp(lp.row(l).transpose());
        lp.row(l) = (lp.row(l).array() - lse).exp();
        total += lse;
    }
    return total / static_cast<double>(lp.rows());
}

std::vector<Index> kmeanspp_seeds(const CMatrix& x, Index k, Rng& rng)
{
    const Index l = x.cols();
    std::vector<Index> seeds;
    std::uniform_int_distribution<Index> first(0, l - 1);
    seeds.push_back(first(rng));
    RVector d2 = (x.colwise() - x.col(seeds.back())).colwise().squaredNorm().transpose();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (static_cast<Index>(seeds.size()) < k) {
        const double total = d2.sum();
        Index pick = 0;
        if (total > 0.0) {
            const double target = unit(rng) * total;
            double acc = 0.0;
            pick = l - 1;
            for (Index i = 0; i < l; ++i) {
                acc += d2(i);
                if (acc > target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = first(rng);
        }
        seeds.push_back(pick);
        d2 = d2.cwiseMin((x.colwise() - x.col(pick)).colwise().squaredNorm().transpose());
    }
    return seeds;
}

std::vector<Index> random_seeds(Index l, Index k, Rng& rng)
{
    std::vector<Index> order(static_cast<std::size_t>(l));
    for (Index i = 0; i < l; ++i)
        order[static_cast<std::size_t>(i)] = i;
    for (Index i = 0; i < k; ++i) {
        std::uniform_int_distribution<Index> pick(i, l - 1);
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick(rng))]);
    }
    order.resize(static_cast<std::size_t>(k));
    return order;
}

} // namespace

EmResult fit_em(const ChannelDataset& dataset, Index components, CovarianceConstraint constraint,
                const EmOptions& options)
{
    options.validate();
    if (components < 1)
        throw std::invalid_argument("fit_em: need at least one component");
    if (dataset.size() < components)
        throw std::invalid_argument("fit_em: fewer training samples than components");
    if (!dataset.normalized)
        throw std::invalid_argument("fit_em: dataset must be normalized first");
    const ArrayGeometry& geometry = dataset.scene.geometry;
    if (geometry.size() != dataset.dim())
        throw std::invalid_argument("fit_em: dataset scene geometry does not match the sample dimension");

    const CMatrix& x = dataset.samples;
    const Index n = x.rows();
    const Index l = x.cols();
    const auto kk = static_cast<std::size_t>(components);

    const CVector global_mean = x.rowwise().mean();
    const CMatrix centered = x.colwise() - global_mean;
    const CMatrix global_cov = (centered * centered.adjoint()) / static_cast<double>(l);

    EmReport report;
    report.floor = options.floor_scale * global_cov.trace().real() / static_cast<double>(n);
    const double floor = report.floor;

    std::optional<ToeplitzDictionary> dictionary;
    if (constraint == CovarianceConstraint::Toeplitz)
        dictionary.emplace(geometry);

    // structured / floored estimate of a scatter matrix; a Toeplitz update never
    // scores below the current spectrum on the new scatter
    const auto fit_cov = [&](const CMatrix& s, CMatrix& cov, RVector& spectrum) {
        if (dictionary) {
            RVector start = toeplitz_mstep(*dictionary, s, floor);
            if (spectrum.size() == start.size() &&
                gaussian_fit(dictionary->realize(spectrum), s) > gaussian_fit(dictionary->realize(start), s))
                start = spectrum;
            spectrum = refine_spectrum(*dictionary, s, start, floor, kSpectralPasses);
            cov = dictionary->realize(spectrum);
        } else {
            cov = clip_eigenvalues(s, floor);
        }
    };

    CMatrix reset_cov;
    RVector reset_spectrum;
    fit_cov(global_cov, reset_cov, reset_spectrum);

    Rng rng(derive_seed(options.seed, 0xE3));
    Params p;
    p.weights = RVector::Constant(components, 1.0 / static_cast<double>(components));
    const auto seeds = options.init == EmInit::KMeansPlusPlus ? kmeanspp_seeds(x, components, rng)
                                                              : random_seeds(l, components, rng);
    for (std::size_t k = 0; k < kk; ++k) {
        p.means.push_back(x.col(seeds[k]));
        p.covs.push_back(reset_cov);
        p.spectra.push_back(reset_spectrum);
    }
    std::uniform_int_distribution<Index> any_sample(0, l - 1);

    RMatrix resp = joint_log_scores(p, x);
    double ll = normalize_rows(resp);
    report.loglik.push_back(ll);

    for (int it = 0; it < options.max_iters; ++it) {
        // M-step
        const RVector mass = resp.colwise().sum().transpose();
        bool reseeded = false;
        for (std::size_t k = 0; k < kk; ++k) {
            const auto ki = static_cast<Index>(k);
            if (!(mass(ki) > 0.0) || mass(ki) / static_cast<double>(l) < 1e-8) {
                p.means[k] = x.col(any_sample(rng));
                p.covs[k] = reset_cov;
                p.spectra[k] = reset_spectrum;
                p.weights(ki) = 1.0 / static_cast<double>(components);
                ++report.reseeded;
                reseeded = true;
                continue;
            }
            p.weights(ki) = mass(ki) / static_cast<double>(l);
            const RVector r = resp.col(ki);
            p.means[k] = (x * r.cast<cplx>()) / mass(ki);
            CMatrix y = x.colwise() - p.means[k];
            y = y * r.cwiseSqrt().cast<cplx>().asDiagonal();
            CMatrix scatter = (y * y.adjoint()) / mass(ki);
            scatter = 0.5 * (scatter + scatter.adjoint()).eval();
            fit_cov(scatter, p.covs[k], p.spectra[k]);
        }
        if (reseeded)
            p.weights /= p.weights.sum();
        ++report.iterations;

        // E-step
        resp = joint_log_scores(p, x);
        const double ll_new = normalize_rows(resp);
        report.loglik.push_back(ll_new);
        const double rel_change = std::abs(ll_new - ll) / std::max(std::abs(ll), 1e-300);
        if (ll_new < ll && !reseeded)
            report.max_rel_decrease = std::max(report.max_rel_decrease, rel_change);
        ll = ll_new;
        if (!reseeded && rel_change < options.rel_loglik_tol) {
            report.converged = true;
            break;
        }
    }

    std::vector<double> weights(p.weights.data(), p.weights.data() + p.weights.size());
    std::vector<CovarianceRepr> reprs;
    for (std::size_t k = 0; k < kk; ++k) {
        if (dictionary)
            reprs.emplace_back(SpectralCovariance{p.spectra[k]});
        else
            reprs.emplace_back(FullCovariance{p.covs[k]});
    }
    return EmResult{GmmModel(geometry, std::move(weights), std::move(p.means), std::move(reprs)), report};
}

double average_loglik(const GmmModel& model, const CMatrix& data)
{
    double total = 0.0;
    for (Index l = 0; l < data.cols(); ++l)
        total += log_sum_exp(model.log_scores(data.col(l)));
    return total / static_cast<double>(data.cols());
}

} // namespace limfb
