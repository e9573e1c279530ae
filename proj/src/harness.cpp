// SPDX-License-Identifier: Apache-2.0

#include "limfb/harness.hpp"

#include "limfb/pilots.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace limfb {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kRho = 1.0;

enum : std::uint64_t { kStreamUsers = 0x5553, kStreamNoise = 0x4e4f, kStreamSwmmse = 0x5357 };

std::string format_g17(double v)
{
    if (std::isnan(v))
        return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

bool is_integral(double v) { return std::isfinite(v) && v == std::floor(v); }

} // namespace

double sum_rate(const CMatrix& channels, const CMatrix& precoders, double sigma_n2)
{
    if (channels.rows() != precoders.rows() || channels.cols() != precoders.cols())
        throw std::invalid_argument("sum_rate: channels and precoders must both be N x J");
    if (sigma_n2 < 0.0)
        throw std::invalid_argument("sum_rate: negative noise variance");
    const CMatrix gains = channels.transpose() * precoders; // (j, m) = h_j^T v_m
    double rate = 0.0;
    for (Index j = 0; j < gains.rows(); ++j) {
        const double signal = std::norm(gains(j, j));
        const double interference = gains.row(j).squaredNorm() - signal;
        const double denom = std::max(interference, 0.0) + sigma_n2;
        if (signal == 0.0)
            continue;
        rate += denom > 0.0 ? std::log2(1.0 + signal / denom) : std::numeric_limits<double>::infinity();
    }
    return rate;
}

double sum_rate(const CMatrix& channels, const PrecoderSet& precoders, double sigma_n2)
{
    return sum_rate(channels, precoders.vectors, sigma_n2);
}

// ---------------------------------------------------------------------------
// Schemes and axes

std::string Scheme::name() const
{
    std::string base;
    switch (feedback) {
    case FeedbackKind::GmmObs: base = "gmm-obs"; break;
    case FeedbackKind::GmmPerfect: base = "gmm-perfect"; break;
    case FeedbackKind::TgmmObs: base = "tgmm-obs"; break;
    case FeedbackKind::TgmmPerfect: base = "tgmm-perfect"; break;
    case FeedbackKind::DftPerfect: base = "dft-perfect"; break;
    case FeedbackKind::DftGmm: base = "dft-gmm"; break;
    case FeedbackKind::DftTgmm: base = "dft-tgmm"; break;
    case FeedbackKind::DftLmmse: base = "dft-lmmse"; break;
    case FeedbackKind::DftOmp: base = "dft-omp"; break;
    }
    return precoder == PrecoderKind::Swmmse ? base + "@swmmse" : base;
}

bool Scheme::uses_codebook() const
{
    return feedback == FeedbackKind::DftPerfect || feedback == FeedbackKind::DftGmm ||
           feedback == FeedbackKind::DftTgmm || feedback == FeedbackKind::DftLmmse || feedback == FeedbackKind::DftOmp;
}

bool Scheme::uses_observation() const
{
    return feedback != FeedbackKind::GmmPerfect && feedback != FeedbackKind::TgmmPerfect &&
           feedback != FeedbackKind::DftPerfect;
}

Scheme parse_scheme(const std::string& text)
{
    std::string feedback = text;
    std::string precoder = "rci";
    if (const auto at = text.find('@'); at != std::string::npos) {
        feedback = text.substr(0, at);
        precoder = text.substr(at + 1);
    }
    if (feedback.rfind("dft:", 0) == 0)
        feedback = "dft-" + feedback.substr(4);
    static const std::map<std::string, FeedbackKind> names{
        {"gmm", FeedbackKind::GmmObs},          {"gmm-obs", FeedbackKind::GmmObs},
        {"gmm-perfect", FeedbackKind::GmmPerfect}, {"tgmm", FeedbackKind::TgmmObs},
        {"tgmm-obs", FeedbackKind::TgmmObs},    {"tgmm-perfect", FeedbackKind::TgmmPerfect},
        {"dft-perfect", FeedbackKind::DftPerfect}, {"dft-gmm", FeedbackKind::DftGmm},
        {"dft-tgmm", FeedbackKind::DftTgmm},    {"dft-lmmse", FeedbackKind::DftLmmse},
        {"dft-omp", FeedbackKind::DftOmp}};
    const auto it = names.find(feedback);
    if (it == names.end())
        throw std::invalid_argument("unknown scheme '" + text + "'");
    Scheme s;
    s.feedback = it->second;
    if (precoder == "rci")
        s.precoder = PrecoderKind::Rci;
    else if (precoder == "swmmse")
        s.precoder = PrecoderKind::Swmmse;
    else
        throw std::invalid_argument("unknown precoder '" + precoder + "' in scheme '" + text + "'");
    if (s.uses_codebook() && s.precoder == PrecoderKind::Swmmse)
        throw std::invalid_argument("scheme '" + text + "': codebook feedback supports the rci precoder only");
    return s;
}

std::string to_string(SweepAxis axis)
{
    switch (axis) {
    case SweepAxis::Snr: return "snr_db";
    case SweepAxis::Pilots: return "pilots";
    case SweepAxis::Bits: return "bits";
    case SweepAxis::Users: return "users";
    case SweepAxis::Iterations: return "iterations";
    }
    return "?";
}

SweepAxis parse_axis(const std::string& text)
{
    if (text == "snr" || text == "snr_db")
        return SweepAxis::Snr;
    if (text == "pilots")
        return SweepAxis::Pilots;
    if (text == "bits")
        return SweepAxis::Bits;
    if (text == "users")
        return SweepAxis::Users;
    if (text == "iterations" || text == "iters")
        return SweepAxis::Iterations;
    throw std::invalid_argument("unknown sweep axis '" + text + "' (snr, pilots, bits, users, iterations)");
}

// ---------------------------------------------------------------------------
// Configuration

ExperimentConfig ExperimentConfig::desk()
{
    ExperimentConfig c;
    c.bits = 4;
    c.constellations = 100;
    return c;
}

ExperimentConfig ExperimentConfig::large() { return ExperimentConfig{}; }

void ExperimentConfig::validate() const
{
    if (constellations < 1)
        throw std::invalid_argument("constellations must be at least 1");
    if (users < 1 || pilots < 1 || bits < 0 || swmmse_iters < 1 || threads < 1)
        throw std::invalid_argument("users, pilots, iters and threads must be positive and bits non-negative");
    if (!std::isfinite(snr_db))
        throw std::invalid_argument("snr_db must be finite");
    parsed_schemes();
    for (double v : axis_values) {
        if (axis == SweepAxis::Snr) {
            if (!std::isfinite(v))
                throw std::invalid_argument("snr axis values must be finite");
        } else if (!is_integral(v) || v < (axis == SweepAxis::Bits ? 0.0 : 1.0)) {
            throw std::invalid_argument("axis '" + to_string(axis) + "' needs positive integer values, got " +
                                        format_g17(v));
        }
    }
}

std::vector<Scheme> ExperimentConfig::parsed_schemes() const
{
    std::vector<Scheme> out;
    for (const auto& s : schemes) {
        const Scheme parsed = parse_scheme(s);
        if (std::find(out.begin(), out.end(), parsed) != out.end())
            throw std::invalid_argument("scheme '" + s + "' listed twice");
        out.push_back(parsed);
    }
    return out;
}

std::string ExperimentConfig::canonical() const
{
    std::ostringstream os;
    os << "bits=" << bits << "\nusers=" << users << "\npilots=" << pilots << "\nsnr_db=" << format_g17(snr_db)
       << "\nconstellations=" << constellations << "\niters=" << swmmse_iters << "\nseed=" << seed
       << "\naxis=" << to_string(axis) << "\nvalues=";
    for (double v : axis_values)
        os << format_g17(v) << ',';
    os << "\nschemes=";
    for (const auto& s : parsed_schemes())
        os << s.name() << ',';
    os << "\neval_data=" << eval_data << "\ntrain_data=" << train_data << "\ngmm_model=";
    for (const auto& m : gmm_models)
        os << m << ',';
    os << "\ntgmm_model=";
    for (const auto& m : tgmm_models)
        os << m << ',';
    os << '\n';
    return os.str();
}

std::uint64_t ExperimentConfig::hash() const
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

const std::set<std::string>& experiment_config_keys()
{
    static const std::set<std::string> keys{
        "profile", "bits", "users", "pilots", "snr_db", "constellations", "schemes", "iters", "seed", "threads",
        "axis", "values", "eval_data", "train_data", "gmm_model", "tgmm_model",
        // scene keys
        "n_vert", "n_horiz", "spacing_vert", "spacing_horiz", "clusters", "paths_per_cluster", "azimuth_spread",
        "elevation_spread", "sector_half_width", "elevation_min", "elevation_max", "scatterer_pool",
        "cluster_decay_db", "user_zones", "zone_spread", "layout_seed"};
    return keys;
}

ExperimentConfig experiment_config_from(const KeyValueConfig& config)
{
    config.require_known(experiment_config_keys());
    const std::string profile = config.get_string("profile", "desk");
    ExperimentConfig c;
    if (profile == "desk")
        c = ExperimentConfig::desk();
    else if (profile == "large")
        c = ExperimentConfig::large();
    else
        throw ConfigError("profile must be 'desk' or 'large', got '" + profile + "'");

    c.bits = static_cast<int>(config.get_int("bits", c.bits));
    c.users = static_cast<int>(config.get_int("users", c.users));
    c.pilots = static_cast<int>(config.get_int("pilots", c.pilots));
    c.snr_db = config.get_double("snr_db", c.snr_db);
    c.constellations = static_cast<int>(config.get_int("constellations", c.constellations));
    c.schemes = config.get_string_list("schemes", c.schemes);
    c.swmmse_iters = static_cast<int>(config.get_int("iters", c.swmmse_iters));
    c.seed = config.get_u64("seed", c.seed);
    c.threads = static_cast<int>(config.get_int("threads", c.threads));
    if (config.has("axis"))
        c.axis = parse_axis(config.get("axis"));
    c.axis_values = config.get_double_list("values", c.axis_values);
    c.eval_data = config.get_string("eval_data", c.eval_data);
    c.train_data = config.get_string("train_data", c.train_data);
    c.gmm_models = config.get_string_list("gmm_model", c.gmm_models);
    c.tgmm_models = config.get_string_list("tgmm_model", c.tgmm_models);
    c.validate();
    return c;
}

ExperimentResources load_resources(const ExperimentConfig& config)
{
    if (config.eval_data.empty())
        throw ConfigError("eval_data is required");
    ExperimentResources res;
    res.eval = load_dataset(config.eval_data);
    if (!config.train_data.empty())
        res.train_moments = sample_moments(load_dataset(config.train_data));

    const auto add = [](std::map<int, GmmModel>& bank, const std::string& path, CovarianceConstraint expected) {
        GmmModel m = load_model(path);
        if (m.constraint() != expected)
            throw ConfigError("model '" + path + "' has constraint " + to_string(m.constraint()) + ", expected " +
                              to_string(expected));
        const auto bits = m.bits();
        if (!bits)
            throw ConfigError("model '" + path + "': component count is not a power of two");
        if (bank.count(*bits))
            throw ConfigError("two models with B=" + std::to_string(*bits) + " were given");
        bank.emplace(*bits, std::move(m));
    };
    for (const auto& p : config.gmm_models)
        add(res.full, p, CovarianceConstraint::Full);
    for (const auto& p : config.tgmm_models)
        add(res.toeplitz, p, CovarianceConstraint::Toeplitz);
    return res;
}

// ---------------------------------------------------------------------------
// Seeds

double SweepPoint::noise_variance() const { return std::pow(10.0, -snr_db / 10.0); }

ConstellationSeeds constellation_seeds(std::uint64_t master, std::uint64_t constellation)
{
    return {derive_seed(master, kStreamUsers, constellation), derive_seed(master, kStreamNoise, constellation),
            derive_seed(master, kStreamSwmmse, constellation)};
}

std::vector<Index> draw_users(Index pool, Index users, std::uint64_t seed)
{
    if (users < 1 || users > pool)
        throw std::invalid_argument("draw_users: need 1 <= J <= eval-set size (J=" + std::to_string(users) +
                                    ", size=" + std::to_string(pool) + ")");
    std::vector<Index> idx(static_cast<std::size_t>(pool));
    for (Index i = 0; i < pool; ++i)
        idx[static_cast<std::size_t>(i)] = i;
    Rng rng(seed);
    for (Index j = 0; j < users; ++j) {
        std::uniform_int_distribution<Index> pick(j, pool - 1);
        std::swap(idx[static_cast<std::size_t>(j)], idx[static_cast<std::size_t>(pick(rng))]);
    }
    idx.resize(static_cast<std::size_t>(users));
    return idx;
}

CMatrix draw_standard_noise(Index dim, Index users, std::uint64_t seed)
{
    Rng rng(seed);
    CMatrix out(dim, users);
    for (Index j = 0; j < users; ++j)
        out.col(j) = complex_gaussian(rng, dim);
    return out;
}

// ---------------------------------------------------------------------------
// Experiment

struct PointContext {
    SweepPoint point;
    double sigma_n2 = 0.0;
    std::optional<PilotSetup> setup;
    std::optional<Codebook> codebook;
    const GmmModel* full = nullptr;
    const GmmModel* toeplitz = nullptr;
    std::optional<GmmEstimator> full_estimator; // also provides the observation GMM
    std::optional<GmmEstimator> toeplitz_estimator;
    std::optional<LmmseEstimator> lmmse;
    std::optional<OmpEstimator> omp;
    std::vector<std::string> missing; // per scheme, empty when runnable
};

Experiment::Experiment(ExperimentConfig config, ExperimentResources resources)
    : config_(std::move(config)), resources_(std::move(resources))
{
    config_.validate();
    schemes_ = config_.parsed_schemes();
    if (resources_.eval.size() == 0)
        throw std::invalid_argument("Experiment: empty evaluation set");
    const Index n = resources_.eval.dim();
    for (const auto* bank : {&resources_.full, &resources_.toeplitz}) {
        for (const auto& [bits, model] : *bank) {
            if (model.dim() != n)
                throw std::invalid_argument("Experiment: model with B=" + std::to_string(bits) + " has N=" +
                                            std::to_string(model.dim()) + " but the eval set has N=" +
                                            std::to_string(n));
            reps_.emplace(&model, directional_representatives(model));
        }
    }
    for (const auto& p : sweep_points()) {
        if (p.users > resources_.eval.size())
            throw std::invalid_argument("Experiment: J=" + std::to_string(p.users) + " exceeds the eval-set size " +
                                        std::to_string(resources_.eval.size()));
    }
}

Experiment::~Experiment() = default;

const CMatrix& Experiment::representatives(const GmmModel& model) const
{
    const auto it = reps_.find(&model);
    if (it == reps_.end())
        throw std::invalid_argument("representatives: model is not part of this experiment");
    return it->second;
}

SweepPoint Experiment::base_point() const
{
    SweepPoint p;
    p.bits = config_.bits;
    p.users = config_.users;
    p.pilots = config_.pilots;
    p.snr_db = config_.snr_db;
    p.iters = config_.swmmse_iters;
    return p;
}

std::vector<SweepPoint> Experiment::sweep_points() const
{
    const SweepPoint base = base_point();
    if (config_.axis_values.empty())
        return {base};
    if (config_.axis == SweepAxis::Iterations) {
        SweepPoint p = base;
        for (double v : config_.axis_values)
            p.iteration_marks.push_back(static_cast<int>(v));
        p.iters = *std::max_element(p.iteration_marks.begin(), p.iteration_marks.end());
        return {p};
    }
    std::vector<SweepPoint> out;
    for (double v : config_.axis_values) {
        SweepPoint p = base;
        switch (config_.axis) {
        case SweepAxis::Snr: p.snr_db = v; break;
        case SweepAxis::Pilots: p.pilots = static_cast<int>(v); break;
        case SweepAxis::Bits: p.bits = static_cast<int>(v); break;
        case SweepAxis::Users: p.users = static_cast<int>(v); break;
        case SweepAxis::Iterations: break;
        }
        out.push_back(p);
    }
    return out;
}

std::shared_ptr<const PointContext> Experiment::prepare(const SweepPoint& point) const
{
    auto ctx = std::make_shared<PointContext>();
    ctx->point = point;
    ctx->sigma_n2 = point.noise_variance();
    ctx->missing.assign(schemes_.size(), {});
    const ArrayGeometry geometry = !resources_.full.empty()       ? resources_.full.begin()->second.geometry()
                                   : !resources_.toeplitz.empty() ? resources_.toeplitz.begin()->second.geometry()
                                                                  : resources_.eval.scene.geometry;
    if (geometry.size() != resources_.eval.dim())
        throw std::invalid_argument("prepare: array geometry does not match the eval-set dimension");

    const auto find_model = [&](const std::map<int, GmmModel>& bank, bool exact) -> const GmmModel* {
        const auto it = bank.find(point.bits);
        if (it != bank.end())
            return &it->second;
        return (exact || bank.empty()) ? nullptr : &bank.rbegin()->second;
    };
    ctx->full = find_model(resources_.full, true);
    ctx->toeplitz = find_model(resources_.toeplitz, true);
    // estimators are not tied to the feedback rate; fall back to the largest model
    const GmmModel* full_est = find_model(resources_.full, false);
    const GmmModel* toep_est = find_model(resources_.toeplitz, false);

    std::string setup_error;
    try {
        ctx->setup = build_pilot_matrix(geometry, point.pilots, kRho).with_noise_variance(ctx->sigma_n2);
    } catch (const std::exception& e) {
        setup_error = e.what();
    }
    std::string codebook_error;
    try {
        ctx->codebook = build_dft_codebook(geometry, point.bits);
    } catch (const std::exception& e) {
        codebook_error = e.what();
    }

    const auto need = [&](FeedbackKind k) {
        return std::any_of(schemes_.begin(), schemes_.end(), [&](const Scheme& s) { return s.feedback == k; });
    };
    std::string full_obs_error, toep_obs_error, lmmse_error, omp_error;
    if (ctx->setup) {
        const auto build = [&](const GmmModel* m, std::optional<GmmEstimator>& slot, std::string& err) {
            try {
                slot.emplace(*m, *ctx->setup);
            } catch (const std::exception& e) {
                err = e.what();
            }
        };
        if (full_est && (need(FeedbackKind::GmmObs) || need(FeedbackKind::DftGmm)))
            build(full_est, ctx->full_estimator, full_obs_error);
        if (toep_est && (need(FeedbackKind::TgmmObs) || need(FeedbackKind::DftTgmm)))
            build(toep_est, ctx->toeplitz_estimator, toep_obs_error);
        if (need(FeedbackKind::DftLmmse) && resources_.train_moments) {
            try {
                ctx->lmmse.emplace(resources_.train_moments->mean, resources_.train_moments->covariance, *ctx->setup);
            } catch (const std::exception& e) {
                lmmse_error = e.what();
            }
        }
        if (need(FeedbackKind::DftOmp)) {
            try {
                ctx->omp.emplace(*ctx->setup, omp_dictionary(geometry), OmpStop::for_setup(*ctx->setup));
            } catch (const std::exception& e) {
                omp_error = e.what();
            }
        }
    }

    for (std::size_t i = 0; i < schemes_.size(); ++i) {
        const Scheme& s = schemes_[i];
        std::string& why = ctx->missing[i];
        if (s.uses_observation() && !ctx->setup)
            why = setup_error;
        if (s.uses_codebook() && !ctx->codebook)
            why = codebook_error;
        if (!why.empty())
            continue;
        switch (s.feedback) {
        case FeedbackKind::GmmObs:
            if (!ctx->full)
                why = "no full-covariance model with B=" + std::to_string(point.bits);
            else if (!ctx->full_estimator)
                why = full_obs_error;
            break;
        case FeedbackKind::GmmPerfect:
            if (!ctx->full)
                why = "no full-covariance model with B=" + std::to_string(point.bits);
            break;
        case FeedbackKind::TgmmObs:
            if (!ctx->toeplitz)
                why = "no Toeplitz model with B=" + std::to_string(point.bits);
            else if (!ctx->toeplitz_estimator)
                why = toep_obs_error;
            break;
        case FeedbackKind::TgmmPerfect:
            if (!ctx->toeplitz)
                why = "no Toeplitz model with B=" + std::to_string(point.bits);
            break;
        case FeedbackKind::DftPerfect: break;
        case FeedbackKind::DftGmm:
            if (!full_est)
                why = "no full-covariance model for the GMM estimator";
            else if (!ctx->full_estimator)
                why = full_obs_error;
            break;
        case FeedbackKind::DftTgmm:
            if (!toep_est)
                why = "no Toeplitz model for the tGMM estimator";
            else if (!ctx->toeplitz_estimator)
                why = toep_obs_error;
            break;
        case FeedbackKind::DftLmmse:
            if (!resources_.train_moments)
                why = "no training data for the LMMSE moments";
            else if (!ctx->lmmse)
                why = lmmse_error;
            break;
        case FeedbackKind::DftOmp:
            if (!ctx->omp)
                why = omp_error;
            break;
        }
        if (why.empty() && s.precoder == PrecoderKind::Swmmse && s.uses_codebook())
            why = "codebook feedback supports the rci precoder only";
    }
    return ctx;
}

std::vector<std::string> Experiment::missing_prerequisites(const PointContext& context) const
{
    std::vector<std::string> out;
    for (std::size_t i = 0; i < schemes_.size(); ++i) {
        if (!context.missing[i].empty())
            out.push_back(schemes_[i].name() + ": " + context.missing[i]);
    }
    return out;
}

ConstellationResult Experiment::run_constellation(const SweepPoint& point, std::uint64_t constellation) const
{
    return run_constellation(*prepare(point), constellation);
}

ConstellationResult Experiment::run_constellation(const PointContext& ctx, std::uint64_t constellation) const
{
    const SweepPoint& point = ctx.point;
    const ConstellationSeeds seeds = constellation_seeds(config_.seed, constellation);
    const Index n = resources_.eval.dim();
    const Index j_count = point.users;

    ConstellationResult out;
    out.users = draw_users(resources_.eval.size(), j_count, seeds.users);
    CMatrix h(n, j_count);
    for (Index j = 0; j < j_count; ++j)
        h.col(j) = resources_.eval.samples.col(out.users[static_cast<std::size_t>(j)]);
    const CMatrix noise = draw_standard_noise(n, j_count, seeds.noise);
    CMatrix y;
    if (ctx.setup) {
        y.resize(ctx.setup->num_pilots(), j_count);
        for (Index j = 0; j < j_count; ++j)
            y.col(j) = observe_with_noise(*ctx.setup, h.col(j), noise.col(j));
    }

    const std::size_t marks = point.iteration_marks.size();
    out.rates.assign(schemes_.size(), kNaN);
    out.marked_rates.assign(schemes_.size(), std::vector<double>(marks, kNaN));

    for (std::size_t si = 0; si < schemes_.size(); ++si) {
        if (!ctx.missing[si].empty())
            continue;
        const Scheme& s = schemes_[si];
        try {
            std::vector<FeedbackReport> reports(static_cast<std::size_t>(j_count));
            const GmmModel* model = nullptr;
            for (Index j = 0; j < j_count; ++j) {
                FeedbackReport& r = reports[static_cast<std::size_t>(j)];
                switch (s.feedback) {
                case FeedbackKind::GmmObs:
                    model = ctx.full;
                    r = gmm_feedback_index(ctx.full_estimator->observation_model(), y.col(j));
                    break;
                case FeedbackKind::GmmPerfect:
                    model = ctx.full;
                    r = gmm_feedback_index_perfect(*ctx.full, h.col(j));
                    break;
                case FeedbackKind::TgmmObs:
                    model = ctx.toeplitz;
                    r = gmm_feedback_index(ctx.toeplitz_estimator->observation_model(), y.col(j));
                    break;
                case FeedbackKind::TgmmPerfect:
                    model = ctx.toeplitz;
                    r = gmm_feedback_index_perfect(*ctx.toeplitz, h.col(j));
                    break;
                case FeedbackKind::DftPerfect: r = select_codebook_index(*ctx.codebook, h.col(j), "dft-perfect"); break;
                case FeedbackKind::DftGmm:
                    r = select_codebook_index(*ctx.codebook, ctx.full_estimator->estimate(y.col(j)), "dft-gmm");
                    break;
                case FeedbackKind::DftTgmm:
                    r = select_codebook_index(*ctx.codebook, ctx.toeplitz_estimator->estimate(y.col(j)), "dft-tgmm");
                    break;
                case FeedbackKind::DftLmmse:
                    r = select_codebook_index(*ctx.codebook, ctx.lmmse->estimate(y.col(j)), "dft-lmmse");
                    break;
                case FeedbackKind::DftOmp:
                    r = select_codebook_index(*ctx.codebook, ctx.omp->estimate(y.col(j)).estimate, "dft-omp");
                    break;
                }
                r.user = static_cast<std::size_t>(j);
            }

            if (s.precoder == PrecoderKind::Rci) {
                const CMatrix& source = s.uses_codebook() ? ctx.codebook->entries : representatives(*model);
                CMatrix reps(n, j_count);
                for (Index j = 0; j < j_count; ++j)
                    reps.col(j) = source.col(reports[static_cast<std::size_t>(j)].index);
                const PrecoderSet v = rci_precoders(reps, ctx.sigma_n2, kRho);
                out.rates[si] = sum_rate(h, v, ctx.sigma_n2);
                std::fill(out.marked_rates[si].begin(), out.marked_rates[si].end(), out.rates[si]);
            } else {
                SwmmseOptions opts;
                opts.max_iters = point.iters;
                opts.seed = seeds.swmmse;
                if (marks > 0) {
                    opts.on_iteration = [&](int t, const CMatrix& v) {
                        for (std::size_t m = 0; m < marks; ++m) {
                            if (point.iteration_marks[m] == t)
                                out.marked_rates[si][m] = sum_rate(h, v, ctx.sigma_n2);
                        }
                    };
                }
                const PrecoderSet v = swmmse_precoders(*model, reports, ctx.sigma_n2, kRho, opts);
                out.rates[si] = sum_rate(h, v, ctx.sigma_n2);
            }
        } catch (const std::exception& e) {
            out.rates[si] = kNaN;
            out.errors.push_back(s.name() + ": " + e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sweeps

std::pair<double, double> mean_and_se(const std::vector<double>& values)
{
    double sum = 0.0;
    std::size_t count = 0;
    for (double v : values) {
        if (!std::isnan(v)) {
            sum += v;
            ++count;
        }
    }
    if (count == 0)
        return {kNaN, kNaN};
    const double mean = sum / static_cast<double>(count);
    if (count == 1)
        return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) {
        if (!std::isnan(v))
            ss += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(ss / static_cast<double>(count - 1));
    return {mean, sd / std::sqrt(static_cast<double>(count))};
}

SweepResult run_sweep(const Experiment& experiment)
{
    const auto start = std::chrono::steady_clock::now();
    const ExperimentConfig& cfg = experiment.config();
    const auto& schemes = experiment.schemes();
    const std::size_t n_schemes = schemes.size();
    const auto c_count = static_cast<std::size_t>(cfg.constellations);

    SweepResult result;
    result.axis = to_string(cfg.axis);
    result.config_hash = cfg.hash();
    result.seed = cfg.seed;
    for (const auto& s : schemes)
        result.schemes.push_back(s.name());

    const std::vector<SweepPoint> points = experiment.sweep_points();
    const bool iterations = cfg.axis == SweepAxis::Iterations && !cfg.axis_values.empty();
    if (cfg.axis_values.empty()) {
        const SweepPoint& b = points.front();
        switch (cfg.axis) {
        case SweepAxis::Snr: result.values = {b.snr_db}; break;
        case SweepAxis::Pilots: result.values = {static_cast<double>(b.pilots)}; break;
        case SweepAxis::Bits: result.values = {static_cast<double>(b.bits)}; break;
        case SweepAxis::Users: result.values = {static_cast<double>(b.users)}; break;
        case SweepAxis::Iterations: result.values = {static_cast<double>(b.iters)}; break;
        }
    } else {
        result.values = cfg.axis_values;
    }
    const std::size_t n_rows = result.values.size();
    result.raw.assign(n_rows, std::vector<std::vector<double>>(n_schemes, std::vector<double>(c_count, kNaN)));

    for (std::size_t p = 0; p < points.size(); ++p) {
        std::shared_ptr<const PointContext> ctx;
        try {
            ctx = experiment.prepare(points[p]);
        } catch (const std::exception& e) {
            result.notes.push_back("point " + format_g17(result.values[p]) + ": " + e.what());
            continue;
        }
        for (const auto& m : experiment.missing_prerequisites(*ctx))
            result.notes.push_back("point " + format_g17(iterations ? 0.0 : result.values[p]) + ": " + m);

        std::vector<ConstellationResult> per(c_count);
        std::atomic<std::size_t> next{0};
        const auto worker = [&] {
            for (std::size_t c = next++; c < c_count; c = next++)
                per[c] = experiment.run_constellation(*ctx, c);
        };
        const auto n_threads = static_cast<std::size_t>(std::max(1, cfg.threads));
        if (n_threads == 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (std::size_t t = 0; t < std::min(n_threads, c_count); ++t)
                pool.emplace_back(worker);
            for (auto& t : pool)
                t.join();
        }

        for (std::size_t c = 0; c < c_count; ++c) {
            for (const auto& e : per[c].errors)
                result.notes.push_back("constellation " + std::to_string(c) + ": " + e);
            for (std::size_t s = 0; s < n_schemes; ++s) {
                if (iterations) {
                    for (std::size_t m = 0; m < n_rows; ++m)
                        result.raw[m][s][c] = per[c].marked_rates[s][m];
                } else {
                    result.raw[p][s][c] = per[c].rates[s];
                }
            }
        }
    }

    result.mean.resize(static_cast<Index>(n_rows), static_cast<Index>(n_schemes));
    result.se.resize(static_cast<Index>(n_rows), static_cast<Index>(n_schemes));
    for (std::size_t p = 0; p < n_rows; ++p) {
        for (std::size_t s = 0; s < n_schemes; ++s) {
            const auto [m, se] = mean_and_se(result.raw[p][s]);
            result.mean(static_cast<Index>(p), static_cast<Index>(s)) = m;
            result.se(static_cast<Index>(p), static_cast<Index>(s)) = se;
        }
    }
    result.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

std::string csv_text(const SweepResult& result)
{
    std::ostringstream os;
    os << result.axis;
    for (const auto& s : result.schemes)
        os << ',' << s << "_mean," << s << "_se";
    os << '\n';
    for (std::size_t p = 0; p < result.values.size(); ++p) {
        os << format_g17(result.values[p]);
        for (std::size_t s = 0; s < result.schemes.size(); ++s) {
            os << ',' << format_g17(result.mean(static_cast<Index>(p), static_cast<Index>(s))) << ','
               << format_g17(result.se(static_cast<Index>(p), static_cast<Index>(s)));
        }
        os << '\n';
    }
    return os.str();
}

void emit_csv(const SweepResult& result, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("emit_csv: cannot open '" + path.string() + "' for writing");
    out << csv_text(result);
    if (!out)
        throw std::runtime_error("emit_csv: write to '" + path.string() + "' failed");
}

void dump_raw(const SweepResult& result, const std::filesystem::path& path)
{
    const std::size_t rows = result.values.size();
    const std::size_t n_schemes = result.schemes.size();
    const std::size_t count = rows > 0 && n_schemes > 0 ? result.raw[0][0].size() : 0;

    ChannelDataset ds;
    ds.normalized = false;
    ds.samples = CMatrix::Zero(static_cast<Index>(count), static_cast<Index>(rows * n_schemes));
    for (std::size_t p = 0; p < rows; ++p) {
        for (std::size_t s = 0; s < n_schemes; ++s) {
            for (std::size_t c = 0; c < count; ++c)
                ds.samples(static_cast<Index>(c), static_cast<Index>(p * n_schemes + s)) = result.raw[p][s][c];
        }
    }
    save_dataset(ds, path);

    std::ofstream side(path.string() + ".jsonl", std::ios::binary);
    if (!side)
        throw std::runtime_error("dump_raw: cannot open the sidecar next to '" + path.string() + "'");
    nlohmann::json head{{"axis", result.axis},        {"values", result.values},
                        {"schemes", result.schemes},  {"constellations", count},
                        {"config_hash", result.config_hash}, {"seed", result.seed},
                        {"notes", result.notes}};
    side << head.dump() << '\n';
    for (std::size_t p = 0; p < rows; ++p) {
        for (std::size_t s = 0; s < n_schemes; ++s) {
            nlohmann::json line{{"column", p * n_schemes + s},
                                {"axis_value", result.values[p]},
                                {"scheme", result.schemes[s]},
                                {"values", result.raw[p][s]}};
            side << line.dump() << '\n';
        }
    }
}

} // namespace limfb
