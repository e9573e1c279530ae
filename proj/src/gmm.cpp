// SPDX-License-Identifier: Apache-2.0

#include "limfb/gmm.hpp"

#include "binary_io.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <bit>
#include <cmath>
#include <numbers>

namespace limfb {

std::string to_string(CovarianceConstraint c)
{
    return c == CovarianceConstraint::Full ? "full" : "toeplitz";
}

CovarianceConstraint parse_constraint(const std::string& s)
{
    if (s == "full")
        return CovarianceConstraint::Full;
    if (s == "toeplitz")
        return CovarianceConstraint::Toeplitz;
    throw std::invalid_argument("unknown covariance constraint '" + s + "' (expected full|toeplitz)");
}

GaussianDensity::GaussianDensity(CVector mean, const CMatrix& cov) : mean_(std::move(mean))
{
    if (cov.rows() != mean_.size() || cov.cols() != mean_.size())
        throw std::invalid_argument("GaussianDensity: covariance size does not match mean");
    Eigen::LLT<CMatrix> llt(cov);
    if (llt.info() != Eigen::Success)
        throw NumericalDomainError("covariance is not positive definite");
    chol_ = llt.matrixL();
    const auto diag = chol_.diagonal().real().array();
    if (!(diag > 0.0).all() || !diag.isFinite().all())
        throw NumericalDomainError("covariance is not positive definite");
    log_det_ = 2.0 * diag.log().sum();
}

double GaussianDensity::log_density(const CVector& x) const
{
    if (x.size() != mean_.size())
        throw std::invalid_argument("log_density: dimension mismatch");
    const CVector z = chol_.triangularView<Eigen::Lower>().solve(x - mean_);
    return -static_cast<double>(dim()) * std::log(std::numbers::pi) - log_det_ - z.squaredNorm();
}

double log_density(const CVector& x, const CVector& mean, const CMatrix& cov)
{
    return GaussianDensity(mean, cov).log_density(x);
}

// ---------------------------------------------------------------------------

GmmModel::GmmModel(ArrayGeometry geometry, std::vector<double> weights, std::vector<CVector> means,
                   std::vector<CovarianceRepr> covariances)
    : geometry_(geometry), means_(std::move(means)), reprs_(std::move(covariances))
{
    geometry_.validate();
    const std::size_t k = weights.size();
    if (k == 0)
        throw std::invalid_argument("GmmModel: at least one component required");
    if (means_.size() != k || reprs_.size() != k)
        throw std::invalid_argument("GmmModel: weights, means and covariances differ in count");

    weights_ = Eigen::Map<const RVector>(weights.data(), static_cast<Index>(k));
    if (!(weights_.array() > 0.0).all())
        throw std::invalid_argument("GmmModel: every weight must be positive");
    const double total = weights_.sum();
    if (std::abs(total - 1.0) > 1e-10)
        throw std::invalid_argument("GmmModel: weights must sum to one");
    weights_ /= total;

    constraint_ = std::holds_alternative<FullCovariance>(reprs_.front()) ? CovarianceConstraint::Full
                                                                         : CovarianceConstraint::Toeplitz;
    std::optional<ToeplitzDictionary> dictionary;
    if (constraint_ == CovarianceConstraint::Toeplitz)
        dictionary.emplace(geometry_);

    const Index n = geometry_.size();
    for (std::size_t i = 0; i < k; ++i) {
        if (means_[i].size() != n)
            throw std::invalid_argument("GmmModel: mean dimension does not match the array");
        CMatrix cov;
        if (const auto* full = std::get_if<FullCovariance>(&reprs_[i])) {
            if (constraint_ != CovarianceConstraint::Full)
                throw std::invalid_argument("GmmModel: mixed covariance representations");
            if (full->matrix.rows() != n || full->matrix.cols() != n)
                throw std::invalid_argument("GmmModel: covariance size does not match the array");
            cov = 0.5 * (full->matrix + full->matrix.adjoint());
        } else {
            const auto& spectral = std::get<SpectralCovariance>(reprs_[i]);
            if (constraint_ != CovarianceConstraint::Toeplitz)
                throw std::invalid_argument("GmmModel: mixed covariance representations");
            if ((spectral.spectrum.array() < 0.0).any())
                throw std::invalid_argument("GmmModel: spectral covariance entries must be non-negative");
            cov = dictionary->realize(spectral.spectrum);
        }

        try {
            densities_.emplace_back(GaussianDensity(means_[i], cov));
            sqrt_factors_.push_back(densities_.back()->cholesky());
            sqrt_fallback_.push_back(false);
        } catch (const NumericalDomainError&) {
            densities_.emplace_back(std::nullopt);
            Eigen::SelfAdjointEigenSolver<CMatrix> eig(cov);
            const RVector lambda = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
            sqrt_factors_.push_back(eig.eigenvectors() * lambda.cast<cplx>().asDiagonal());
            sqrt_fallback_.push_back(true);
        }
        covs_.push_back(std::move(cov));
    }
}

const GaussianDensity& GmmModel::density(Index k) const
{
    const auto& d = densities_.at(static_cast<std::size_t>(k));
    if (!d)
        throw NumericalDomainError("GMM component " + std::to_string(k) + " has a singular covariance");
    return *d;
}

RVector GmmModel::log_scores(const CVector& x) const
{
    if (x.size() != dim())
        throw std::invalid_argument("GmmModel::log_scores: dimension mismatch");
    RVector s(components());
    for (Index k = 0; k < components(); ++k)
        s(k) = std::log(weights_(k)) + density(k).log_density(x);
    return s;
}

std::optional<int> GmmModel::bits() const
{
    const auto k = static_cast<std::uint64_t>(components());
    if (!std::has_single_bit(k))
        return std::nullopt;
    return std::countr_zero(k);
}

// ---------------------------------------------------------------------------

ObservationGmm::ObservationGmm(const GmmModel& model, const PilotSetup& setup)
    : dim_(setup.num_pilots()), constraint_(model.constraint()), weights_(model.weights())
{
    if (setup.dim() != model.dim())
        throw std::invalid_argument("project_to_observation: pilot matrix has " + std::to_string(setup.dim()) +
                                    " columns, model dimension is " + std::to_string(model.dim()));
    if (setup.noise_variance < 0.0)
        throw std::invalid_argument("project_to_observation: negative noise variance");
    log_weights_ = weights_.array().log();

    const CMatrix& p = setup.pilots;
    const CMatrix noise = setup.noise_variance * CMatrix::Identity(dim_, dim_);
    densities_.reserve(static_cast<std::size_t>(model.components()));
    for (Index k = 0; k < model.components(); ++k) {
        CMatrix cov = p * model.covariance(k) * p.adjoint() + noise;
        cov = 0.5 * (cov + cov.adjoint()).eval();
        try {
            densities_.emplace_back(p * model.mean(k), cov);
        } catch (const NumericalDomainError&) {
            throw NumericalDomainError("observation covariance of component " + std::to_string(k) +
                                       " is not positive definite; use a noise variance sigma_n^2 > 0");
        }
    }
}

RVector ObservationGmm::log_scores(const CVector& y) const
{
    if (y.size() != dim_)
        throw std::invalid_argument("ObservationGmm::log_scores: observation dimension mismatch");
    RVector s(components());
    for (Index k = 0; k < components(); ++k)
        s(k) = log_weights_(k) + densities_[static_cast<std::size_t>(k)].log_density(y);
    return s;
}

ObservationGmm project_to_observation(const GmmModel& model, const PilotSetup& setup)
{
    return ObservationGmm(model, setup);
}

RVector responsibilities_from_scores(const RVector& log_scores)
{
    const double lse = log_sum_exp(log_scores);
    if (!std::isfinite(lse))
        throw NumericalDomainError("responsibilities: no component assigns finite likelihood");
    RVector r = (log_scores.array() - lse).exp();
    return r / r.sum();
}

RVector responsibilities(const GmmModel& model, const CVector& h)
{
    return responsibilities_from_scores(model.log_scores(h));
}

RVector responsibilities(const ObservationGmm& model, const CVector& y)
{
    return responsibilities_from_scores(model.log_scores(y));
}

// ---------------------------------------------------------------------------

CVector sample_component(const GmmModel& model, Index k, Rng& rng)
{
    if (k < 0 || k >= model.components())
        throw std::out_of_range("sample_component: component index out of range");
    return model.mean(k) + model.sampling_factor(k) * complex_gaussian(rng, model.dim());
}

CMatrix sample_component(const GmmModel& model, Index k, Index count, std::uint64_t seed)
{
    if (k < 0 || k >= model.components())
        throw std::out_of_range("sample_component: component index out of range");
    if (count < 0)
        throw std::invalid_argument("sample_component: negative count");
    Rng rng(seed);
    const CMatrix w = complex_gaussian(rng, model.dim(), count);
    CMatrix out = model.sampling_factor(k) * w;
    out.colwise() += model.mean(k);
    return out;
}

std::uint64_t param_count(std::uint64_t components, std::uint64_t dim, CovarianceConstraint constraint)
{
    if (components < 1 || dim < 1)
        throw std::invalid_argument("param_count: K and N must be positive");
    if (constraint == CovarianceConstraint::Full)
        return components * dim * (dim + 1) / 2;
    return 4 * components * dim;
}

// ---------------------------------------------------------------------------

void save_model(const GmmModel& model, const std::filesystem::path& path)
{
    const auto bits = model.bits();
    if (!bits)
        throw std::invalid_argument("save_model: component count must be a power of two");

    detail::ByteWriter w;
    w.put_bytes("LFBM");
    w.put_u16(kModelFormatVersion);
    w.put_u8(static_cast<std::uint8_t>(*bits));
    w.put_u32(static_cast<std::uint32_t>(model.dim()));
    w.put_u8(static_cast<std::uint8_t>(model.constraint()));
    w.put_u32(static_cast<std::uint32_t>(model.geometry().n_vert));
    w.put_u32(static_cast<std::uint32_t>(model.geometry().n_horiz));

    const Index n = model.dim();
    for (Index k = 0; k < model.components(); ++k) {
        w.put_f64(model.weight(k));
        for (Index i = 0; i < n; ++i) {
            w.put_f64(model.mean(k)(i).real());
            w.put_f64(model.mean(k)(i).imag());
        }
        if (const auto* full = std::get_if<FullCovariance>(&model.covariance_repr(k))) {
            for (Index i = 0; i < n; ++i) {
                for (Index j = i; j < n; ++j) {
                    w.put_f64(full->matrix(i, j).real());
                    w.put_f64(full->matrix(i, j).imag());
                }
            }
        } else {
            const auto& spectrum = std::get<SpectralCovariance>(model.covariance_repr(k)).spectrum;
            for (Index i = 0; i < spectrum.size(); ++i)
                w.put_f64(spectrum(i));
        }
    }
    w.write_to(path);
}

namespace {

struct ModelFile {
    int bits = 0;
    Index dim = 0;
    CovarianceConstraint constraint = CovarianceConstraint::Full;
    ArrayGeometry geometry;
    std::vector<double> weights;
    std::vector<CVector> means;
    std::vector<CovarianceRepr> covariances;
    std::uint64_t covariance_entries = 0;
};

ModelFile parse_model(const std::filesystem::path& path)
{
    auto r = detail::ByteReader::from_file(path);
    ModelFile f;
    try {
        if (r.get_bytes(4) != "LFBM")
            throw ModelFormatError("'" + path.string() + "': bad magic, not an LFBM model");
        if (const auto v = r.get_u16(); v != kModelFormatVersion)
            throw ModelFormatError("'" + path.string() + "': unsupported model version " + std::to_string(v));
        f.bits = r.get_u8();
        f.dim = r.get_u32();
        const auto flag = r.get_u8();
        if (flag > 1)
            throw ModelFormatError("'" + path.string() + "': invalid constraint flag");
        f.constraint = static_cast<CovarianceConstraint>(flag);
        f.geometry.n_vert = static_cast<int>(r.get_u32());
        f.geometry.n_horiz = static_cast<int>(r.get_u32());
        if (f.bits > 16 || f.dim == 0 || f.geometry.size() != f.dim)
            throw ModelFormatError("'" + path.string() + "': inconsistent model header");

        const Index n = f.dim;
        const std::size_t k = std::size_t{1} << f.bits;
        for (std::size_t c = 0; c < k; ++c) {
            f.weights.push_back(r.get_f64());
            CVector mu(n);
            for (Index i = 0; i < n; ++i) {
                const double re = r.get_f64();
                const double im = r.get_f64();
                mu(i) = cplx(re, im);
            }
            f.means.push_back(std::move(mu));
            if (f.constraint == CovarianceConstraint::Full) {
                CMatrix m(n, n);
                for (Index i = 0; i < n; ++i) {
                    for (Index j = i; j < n; ++j) {
                        const double re = r.get_f64();
                        const double im = r.get_f64();
                        m(i, j) = cplx(re, im);
                        m(j, i) = std::conj(m(i, j));
                        ++f.covariance_entries;
                    }
                }
                f.covariances.emplace_back(FullCovariance{std::move(m)});
            } else {
                RVector s(4 * n);
                for (Index i = 0; i < 4 * n; ++i) {
                    s(i) = r.get_f64();
                    ++f.covariance_entries;
                }
                f.covariances.emplace_back(SpectralCovariance{std::move(s)});
            }
        }
    } catch (const detail::ShortRead&) {
        throw ModelFormatError("'" + path.string() + "': truncated model file");
    }
    if (r.remaining() != 0)
        throw ModelFormatError("'" + path.string() + "': trailing bytes after the last component");
    return f;
}

} // namespace

GmmModel load_model(const std::filesystem::path& path)
{
    ModelFile f = parse_model(path);
    return GmmModel(f.geometry, std::move(f.weights), std::move(f.means), std::move(f.covariances));
}

std::uint64_t count_covariance_entries(const std::filesystem::path& path)
{
    return parse_model(path).covariance_entries;
}

} // namespace limfb
