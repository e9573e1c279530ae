// SPDX-License-Identifier: Apache-2.0
//
// Sum-rate evaluation and Monte-Carlo sweeps.
//
// A scheme is named `<feedback>[@<precoder>]`, with feedback one of
//   gmm-obs, gmm-perfect, tgmm-obs, tgmm-perfect   (index into the mixture)
//   dft-perfect, dft-gmm, dft-tgmm, dft-lmmse, dft-omp (codebook index after
//   channel estimation, or on the true channel for dft-perfect)
// and precoder `rci` (default) or `swmmse`. Codebook feedback supports RCI only.
//
// Within one constellation every scheme sees the same users and the same
// standard pilot noise. Users and noise depend only on (master seed,
// constellation index), so they are also shared across sweep points.

#pragma once

#include "limfb/channel_scene.hpp"
#include "limfb/common.hpp"
#include "limfb/config.hpp"
#include "limfb/feedback.hpp"
#include "limfb/gmm.hpp"
#include "limfb/precoder.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <optional>
#include <string>
#include <vector>

namespace limfb {

/// sum_j log2(1 + |h_j^T v_j|^2 / (sum_{m != j} |h_j^T v_m|^2 + sigma^2)); channels and
/// precoders are N x J.
double sum_rate(const CMatrix& channels, const CMatrix& precoders, double sigma_n2);
double sum_rate(const CMatrix& channels, const PrecoderSet& precoders, double sigma_n2);

enum class FeedbackKind { GmmObs, GmmPerfect, TgmmObs, TgmmPerfect, DftPerfect, DftGmm, DftTgmm, DftLmmse, DftOmp };
enum class PrecoderKind { Rci, Swmmse };

struct Scheme {
    FeedbackKind feedback = FeedbackKind::GmmObs;
    PrecoderKind precoder = PrecoderKind::Rci;

    std::string name() const;
    bool uses_codebook() const;
    bool uses_observation() const;
    bool operator==(const Scheme&) const = default;
};

/// Accepts the names above; `dft:<estimator>` is an alias of `dft-<estimator>`
/// and bare `gmm` / `tgmm` mean the observation-based variants.
Scheme parse_scheme(const std::string& text);

enum class SweepAxis { Snr, Pilots, Bits, Users, Iterations };
std::string to_string(SweepAxis axis);
SweepAxis parse_axis(const std::string& text);

struct ExperimentConfig {
    int bits = 6;
    int users = 8;
    int pilots = 8;
    double snr_db = 10.0;
    int constellations = 500;
    std::vector<std::string> schemes{"gmm-obs", "dft-lmmse", "dft-omp"};
    int swmmse_iters = 300;
    std::uint64_t seed = 0;
    int threads = 1;
    SweepAxis axis = SweepAxis::Snr;
    std::vector<double> axis_values; // empty: a single point at the base values

    // file inputs, used by the command line tool
    std::string eval_data;
    std::string train_data;
    std::vector<std::string> gmm_models;
    std::vector<std::string> tgmm_models;

    /// N_v=2, N_h=8 scale: B=4, 100 constellations.
    static ExperimentConfig desk();
    /// B=6, 500 constellations.
    static ExperimentConfig large();

    void validate() const;
    std::vector<Scheme> parsed_schemes() const;
    /// Canonical text of every field that influences the emitted numbers.
    std::string canonical() const;
    /// FNV-1a of canonical().
    std::uint64_t hash() const;
};

/// Keys: profile, bits, users, pilots, snr_db, constellations, schemes, iters,
/// seed, threads, axis, values, eval_data, train_data, gmm_model, tgmm_model.
/// Scene keys (see scene_config_from) are accepted and ignored here.
ExperimentConfig experiment_config_from(const KeyValueConfig& config);
const std::set<std::string>& experiment_config_keys();

/// Immutable inputs shared by all constellations.
struct ExperimentResources {
    ChannelDataset eval;
    std::optional<SampleMoments> train_moments;
    std::map<int, GmmModel> full;     // keyed by B
    std::map<int, GmmModel> toeplitz; // keyed by B
};

/// Loads the files named in `config`; models are keyed by their own B.
ExperimentResources load_resources(const ExperimentConfig& config);

struct SweepPoint {
    int bits = 6;
    int users = 8;
    int pilots = 8;
    double snr_db = 10.0;
    int iters = 300;
    std::vector<int> iteration_marks; // iterations axis: record the rate at these iterations

    double noise_variance() const;
};

struct ConstellationSeeds {
    std::uint64_t users = 0;
    std::uint64_t noise = 0;
    std::uint64_t swmmse = 0;
};
ConstellationSeeds constellation_seeds(std::uint64_t master, std::uint64_t constellation);

/// J distinct indices out of [0, pool), partial Fisher-Yates on mt19937_64(seed).
std::vector<Index> draw_users(Index pool, Index users, std::uint64_t seed);
/// Standard CN(0, I) noise of length N per user (columns); pilots use the first n_p rows.
CMatrix draw_standard_noise(Index dim, Index users, std::uint64_t seed);

struct ConstellationResult {
    std::vector<double> rates;                     // per scheme, NaN when unavailable
    std::vector<std::vector<double>> marked_rates; // per scheme, per iteration mark
    std::vector<Index> users;
    std::vector<std::string> errors;
};

/// Per-point cache of pilots, codebook, observation models and estimators.
struct PointContext;

class Experiment {
  public:
    Experiment(ExperimentConfig config, ExperimentResources resources);
    ~Experiment();
    Experiment(const Experiment&) = delete;
    Experiment& operator=(const Experiment&) = delete;

    const ExperimentConfig& config() const { return config_; }
    const std::vector<Scheme>& schemes() const { return schemes_; }
    const ExperimentResources& resources() const { return resources_; }

    SweepPoint base_point() const;
    /// One point per axis value; the iterations axis yields a single point with marks.
    std::vector<SweepPoint> sweep_points() const;

    std::shared_ptr<const PointContext> prepare(const SweepPoint& point) const;
    /// Schemes that cannot run at a prepared point, with the reason.
    std::vector<std::string> missing_prerequisites(const PointContext& context) const;

    ConstellationResult run_constellation(const PointContext& context, std::uint64_t constellation) const;
    ConstellationResult run_constellation(const SweepPoint& point, std::uint64_t constellation) const;

    /// Directional representatives of every component (N x K), computed once.
    const CMatrix& representatives(const GmmModel& model) const;

  private:
    ExperimentConfig config_;
    ExperimentResources resources_;
    std::vector<Scheme> schemes_;
    std::map<const GmmModel*, CMatrix> reps_;
};

struct SweepResult {
    std::string axis;
    std::vector<double> values;
    std::vector<std::string> schemes;
    /// raw[point][scheme][constellation]
    std::vector<std::vector<std::vector<double>>> raw;
    RMatrix mean; // points x schemes
    RMatrix se;   // sample standard deviation / sqrt(count); 0 for a single constellation
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    double runtime_seconds = 0.0;
    std::vector<std::string> notes; // missing prerequisites and per-point errors
};

SweepResult run_sweep(const Experiment& experiment);

/// Mean and standard error with NaN entries skipped.
std::pair<double, double> mean_and_se(const std::vector<double>& values);

void emit_csv(const SweepResult& result, const std::filesystem::path& path);
std::string csv_text(const SweepResult& result);

/// Binary container (dataset format, rates in the real part, one column per
/// point x scheme) plus `<path>.jsonl` describing the columns with full-precision values.
void dump_raw(const SweepResult& result, const std::filesystem::path& path);

} // namespace limfb
