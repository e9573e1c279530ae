// SPDX-License-Identifier: Apache-2.0

#include "limfb/feedback.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace limfb {

namespace {

// C P^H (P C P^H + sigma^2 I)^{-1}, given the Cholesky factor of the observation covariance.
CMatrix lmmse_filter(const CMatrix& cov, const CMatrix& pilots, const CMatrix& obs_chol)
{
    CMatrix pc = pilots * cov; // n_p x N
    const auto l = obs_chol.triangularView<Eigen::Lower>();
    l.solveInPlace(pc);
    l.adjoint().solveInPlace(pc);
    return pc.adjoint();
}

} // namespace

GmmEstimator::GmmEstimator(const GmmModel& model, const PilotSetup& setup) : observation_(model, setup)
{
    for (Index k = 0; k < model.components(); ++k) {
        means_.push_back(model.mean(k));
        projected_means_.push_back(observation_.density(k).mean());
        filters_.push_back(lmmse_filter(model.covariance(k), setup.pilots, observation_.density(k).cholesky()));
    }
}

CVector GmmEstimator::estimate(const CVector& y) const
{
    const RVector r = responsibilities(observation_, y);
    CVector h = CVector::Zero(means_.front().size());
    for (std::size_t k = 0; k < means_.size(); ++k)
        h += r(static_cast<Index>(k)) * (means_[k] + filters_[k] * (y - projected_means_[k]));
    return h;
}

CVector estimate_gmm(const GmmModel& model, const PilotSetup& setup, const CVector& y)
{
    return GmmEstimator(model, setup).estimate(y);
}

SampleMoments sample_moments(const ChannelDataset& dataset)
{
    if (dataset.size() == 0)
        throw std::invalid_argument("sample_moments: empty dataset");
    SampleMoments m;
    m.mean = dataset.samples.rowwise().mean();
    const CMatrix centered = dataset.samples.colwise() - m.mean;
    m.covariance = (centered * centered.adjoint()) / static_cast<double>(dataset.size());
    return m;
}

LmmseEstimator::LmmseEstimator(CVector mean, const CMatrix& covariance, const PilotSetup& setup)
    : mean_(std::move(mean))
{
    if (mean_.size() != setup.dim() || covariance.rows() != setup.dim() || covariance.cols() != setup.dim())
        throw std::invalid_argument("LmmseEstimator: moment dimensions do not match the pilot matrix");
    const CMatrix& p = setup.pilots;
    CMatrix obs = p * covariance * p.adjoint() + setup.noise_variance * CMatrix::Identity(p.rows(), p.rows());
    obs = 0.5 * (obs + obs.adjoint()).eval();
    Eigen::LLT<CMatrix> llt(obs);
    if (llt.info() != Eigen::Success)
        throw NumericalDomainError("LMMSE: observation covariance is not positive definite");
    filter_ = lmmse_filter(covariance, p, llt.matrixL());
    projected_mean_ = p * mean_;
}

CVector LmmseEstimator::estimate(const CVector& y) const
{
    if (y.size() != projected_mean_.size())
        throw std::invalid_argument("LmmseEstimator: observation dimension mismatch");
    return mean_ + filter_ * (y - projected_mean_);
}

CVector estimate_lmmse(const CVector& mean, const CMatrix& covariance, const PilotSetup& setup, const CVector& y)
{
    return LmmseEstimator(mean, covariance, setup).estimate(y);
}

// ---------------------------------------------------------------------------

CMatrix omp_dictionary(const ArrayGeometry& geometry)
{
    geometry.validate();
    const int gv = 2 * geometry.n_vert;
    const int gh = 2 * geometry.n_horiz;
    const double scale = 1.0 / std::sqrt(static_cast<double>(geometry.size()));
    CMatrix dict(geometry.size(), static_cast<Index>(gv) * gh);
    for (int a = 0; a < gv; ++a) {
        for (int b = 0; b < gh; ++b) {
            const Index col = static_cast<Index>(a) * gh + b;
            for (int v = 0; v < geometry.n_vert; ++v) {
                for (int h = 0; h < geometry.n_horiz; ++h) {
                    const double phase = 2.0 * std::numbers::pi *
                                         (static_cast<double>((a * v) % gv) / gv + static_cast<double>((b * h) % gh) / gh);
                    dict(static_cast<Index>(v) * geometry.n_horiz + h, col) = std::polar(scale, phase);
                }
            }
        }
    }
    return dict;
}

OmpStop OmpStop::for_setup(const PilotSetup& setup)
{
    OmpStop stop;
    stop.max_support = setup.num_pilots();
    stop.residual_threshold = std::sqrt(static_cast<double>(setup.num_pilots()) * setup.noise_variance);
    return stop;
}

OmpEstimator::OmpEstimator(const PilotSetup& setup, CMatrix dictionary, OmpStop stop)
    : dictionary_(std::move(dictionary)), stop_(stop)
{
    if (dictionary_.rows() != setup.dim())
        throw std::invalid_argument("OmpEstimator: dictionary rows must equal N");
    sensing_ = setup.pilots * dictionary_;
    atom_norms_ = sensing_.colwise().norm().transpose();
    const Index cap = setup.num_pilots();
    stop_.max_support = stop_.max_support > 0 ? std::min(stop_.max_support, cap) : cap;
}

OmpResult OmpEstimator::estimate(const CVector& y) const
{
    if (y.size() != sensing_.rows())
        throw std::invalid_argument("OmpEstimator: observation dimension mismatch");

    OmpResult out;
    const double threshold = std::max(stop_.residual_threshold, 1e-12 * y.norm());
    CVector residual = y;
    std::vector<char> used(static_cast<std::size_t>(sensing_.cols()), 0);
    const double norm_floor = 1e-12 * std::max(1.0, atom_norms_.maxCoeff());

    while (residual.norm() > threshold && static_cast<Index>(out.support.size()) < stop_.max_support) {
        const RVector corr = (sensing_.adjoint() * residual).cwiseAbs();
        Index best = -1;
        double best_val = -1.0;
        for (Index i = 0; i < corr.size(); ++i) {
            if (used[static_cast<std::size_t>(i)] || atom_norms_(i) <= norm_floor)
                continue;
            const double v = corr(i) / atom_norms_(i);
            if (v > best_val) {
                best_val = v;
                best = i;
            }
        }
        if (best < 0)
            break;
        used[static_cast<std::size_t>(best)] = 1;
        out.support.push_back(best);

        const auto s = static_cast<Index>(out.support.size());
        CMatrix a(sensing_.rows(), s);
        for (Index j = 0; j < s; ++j)
            a.col(j) = sensing_.col(out.support[static_cast<std::size_t>(j)]);
        CMatrix gram = a.adjoint() * a;
        const CVector rhs = a.adjoint() * y;
        Eigen::LLT<CMatrix> llt(gram);
        if (llt.info() != Eigen::Success || llt.rcond() < 1e-12) {
            gram += 1e-10 * std::max(gram.trace().real(), 1e-300) * CMatrix::Identity(s, s);
            llt.compute(gram);
        }
        out.coefficients = llt.solve(rhs);
        residual = y - a * out.coefficients;
    }

    out.residual_norm = residual.norm();
    out.estimate = CVector::Zero(dictionary_.rows());
    for (std::size_t j = 0; j < out.support.size(); ++j)
        out.estimate += out.coefficients(static_cast<Index>(j)) * dictionary_.col(out.support[j]);
    return out;
}

OmpResult estimate_omp(const PilotSetup& setup, const CMatrix& dictionary, const CVector& y, const OmpStop& stop)
{
    return OmpEstimator(setup, dictionary, stop).estimate(y);
}

} // namespace limfb
