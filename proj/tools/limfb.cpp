// SPDX-License-Identifier: Apache-2.0
//
// limfb: command line front end (generate, train, feedback, precode, sweep, report).

#include "limfb/channel_scene.hpp"
#include "limfb/config.hpp"
#include "limfb/feedback.hpp"
#include "limfb/gmm.hpp"
#include "limfb/harness.hpp"
#include "limfb/pilots.hpp"
#include "limfb/precoder.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace limfb;

namespace {

ArrayGeometry parse_array(const std::string& text)
{
    const auto x = text.find('x');
    if (x == std::string::npos)
        throw std::invalid_argument("--array expects NvxNh, e.g. 2x8");
    ArrayGeometry g;
    g.n_vert = std::stoi(text.substr(0, x));
    g.n_horiz = std::stoi(text.substr(x + 1));
    g.validate();
    return g;
}

// Geometry from --config, --array, or the desk/large profile matching N.
ArrayGeometry resolve_geometry(const std::string& config_path, const std::string& array, Index dim)
{
    ArrayGeometry g;
    if (!config_path.empty())
        g = scene_config_from(KeyValueConfig::load(config_path)).geometry;
    else if (!array.empty())
        g = parse_array(array);
    else if (dim == SceneConfig::desk_scale().geometry.size())
        g = SceneConfig::desk_scale().geometry;
    else if (dim == SceneConfig::large_scale().geometry.size())
        g = SceneConfig::large_scale().geometry;
    else
        throw std::invalid_argument("cannot infer the array geometry for N=" + std::to_string(dim) +
                                    "; pass --array or --config");
    if (g.size() != dim)
        throw std::invalid_argument("array geometry has " + std::to_string(g.size()) + " elements but the data has N=" +
                                    std::to_string(dim));
    return g;
}

std::string g17(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"limited-feedback multi-user MIMO simulation lab"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "draw a synthetic channel dataset");
    std::string gen_config, gen_out;
    std::size_t gen_count = 10000;
    std::uint64_t gen_seed = 1;
    bool gen_raw = false;
    gen->add_option("--config", gen_config, "scene config file (flat key = value)");
    gen->add_option("--count", gen_count, "number of samples L")->required();
    gen->add_option("--seed", gen_seed, "sample seed");
    gen->add_option("--out", gen_out, "output dataset path")->required();
    gen->add_flag("--raw", gen_raw, "skip normalization to mean ||h||^2 = N");

    // train
    auto* train = app.add_subcommand("train", "fit a GMM with EM");
    std::string tr_data, tr_out, tr_constraint = "full", tr_config, tr_array;
    int tr_bits = 4, tr_iters = 100;
    std::uint64_t tr_seed = 0;
    double tr_tol = 1e-6;
    train->add_option("--data", tr_data, "training dataset")->required();
    train->add_option("--bits", tr_bits, "feedback bits B (K = 2^B)")->required();
    train->add_option("--constraint", tr_constraint, "full or toeplitz")->check(CLI::IsMember({"full", "toeplitz"}));
    train->add_option("--out", tr_out, "output model path")->required();
    train->add_option("--config", tr_config, "scene config giving the array geometry");
    train->add_option("--array", tr_array, "array geometry NvxNh");
    train->add_option("--iters", tr_iters, "maximum EM iterations");
    train->add_option("--tol", tr_tol, "relative log-likelihood tolerance");
    train->add_option("--seed", tr_seed, "initialization seed");

    // feedback
    auto* fb = app.add_subcommand("feedback", "compute feedback indices for a dataset");
    std::string fb_model, fb_scheme = "gmm", fb_data, fb_train, fb_out;
    int fb_pilots = 8, fb_bits = -1;
    double fb_snr = 10.0;
    std::uint64_t fb_seed = 0;
    std::size_t fb_limit = 0;
    fb->add_option("--model", fb_model, "GMM model (gmm, tgmm, dft:gmm, dft:tgmm)");
    fb->add_option("--scheme", fb_scheme, "gmm|tgmm|dft:gmm|dft:tgmm|dft:lmmse|dft:omp|...-perfect");
    fb->add_option("--pilots", fb_pilots, "number of pilots n_p");
    fb->add_option("--snr-db", fb_snr, "SNR in dB");
    fb->add_option("--data", fb_data, "channels to observe")->required();
    fb->add_option("--train", fb_train, "training dataset for LMMSE moments");
    fb->add_option("--bits", fb_bits, "codebook bits (default: model B)");
    fb->add_option("--seed", fb_seed, "pilot-noise seed");
    fb->add_option("--limit", fb_limit, "only the first samples");
    fb->add_option("--out", fb_out, "write sample,index CSV here instead of stdout");

    // precode
    auto* pc = app.add_subcommand("precode", "design precoders for one constellation");
    std::string pc_model, pc_data, pc_precoder = "rci", pc_traj;
    int pc_users = 4, pc_iters = 300, pc_pilots = 0;
    double pc_snr = 10.0;
    std::uint64_t pc_seed = 0;
    pc->add_option("--model", pc_model, "GMM model")->required();
    pc->add_option("--data", pc_data, "channel pool")->required();
    pc->add_option("--users", pc_users, "number of users J");
    pc->add_option("--precoder", pc_precoder, "rci or swmmse")->check(CLI::IsMember({"rci", "swmmse"}));
    pc->add_option("--iters", pc_iters, "SWMMSE iterations I_max");
    pc->add_option("--pilots", pc_pilots, "pilots for observation feedback (0: perfect CSI)");
    pc->add_option("--snr-db", pc_snr, "SNR in dB");
    pc->add_option("--seed", pc_seed, "seed");
    pc->add_option("--trajectory", pc_traj, "write iteration,sum_rate,power CSV (swmmse)");

    // sweep
    auto* sw = app.add_subcommand("sweep", "Monte-Carlo sweep, CSV output");
    std::string sw_config, sw_out, sw_raw;
    std::optional<std::uint64_t> sw_seed;
    std::optional<int> sw_const, sw_threads;
    sw->add_option("config", sw_config, "experiment config file")->required();
    sw->add_option("--out", sw_out, "CSV path (default: stdout)");
    sw->add_option("--dump-raw", sw_raw, "per-constellation dump (dataset container + .jsonl sidecar)");
    sw->add_option("--seed", sw_seed, "override the master seed");
    sw->add_option("--constellations", sw_const, "override the constellation count");
    sw->add_option("--threads", sw_threads, "worker threads");

    // report
    auto* rep = app.add_subcommand("report", "summarize a sweep CSV or raw dump");
    std::string rep_csv, rep_raw;
    rep->add_option("--csv", rep_csv, "sweep CSV");
    rep->add_option("--raw", rep_raw, "raw dump (reads its .jsonl sidecar)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            SceneConfig scene = gen_config.empty() ? SceneConfig::desk_scale()
                                                   : scene_config_from(KeyValueConfig::load(gen_config));
            scene.seed = gen_seed;
            ChannelDataset ds = generate_channels(scene, gen_count);
            if (!gen_raw)
                ds = normalize_dataset(ds);
            save_dataset(ds, gen_out);
            std::cout << "wrote " << ds.size() << " samples of dimension " << ds.dim() << " to " << gen_out << "\n";
        } else if (*train) {
            ChannelDataset ds = load_dataset(tr_data);
            ds.scene.geometry = resolve_geometry(tr_config, tr_array, ds.dim());
            if (!ds.normalized)
                throw std::invalid_argument("training data must be normalized (generate without --raw)");
            EmOptions opts;
            opts.max_iters = tr_iters;
            opts.rel_loglik_tol = tr_tol;
            opts.seed = tr_seed;
            const EmResult res = fit_em(ds, Index{1} << tr_bits, parse_constraint(tr_constraint), opts);
            save_model(res.model, tr_out);
            std::cout << "EM: " << res.report.iterations << " iterations, converged=" << res.report.converged
                      << ", reseeded=" << res.report.reseeded << ", final loglik/sample=" << res.report.loglik.back()
                      << "\nparameters: " << param_count(res.model.components(), res.model.dim(), res.model.constraint())
                      << "\nwrote " << tr_out << "\n";
        } else if (*fb) {
            const Scheme scheme = parse_scheme(fb_scheme);
            const ChannelDataset ds = load_dataset(fb_data);
            std::optional<GmmModel> model;
            if (!fb_model.empty())
                model = load_model(fb_model);
            const ArrayGeometry geometry = model ? model->geometry() : resolve_geometry("", "", ds.dim());
            const PilotSetup setup = build_pilot_matrix(geometry, fb_pilots, 1.0)
                                         .with_noise_variance(std::pow(10.0, -fb_snr / 10.0));
            const bool needs_model = scheme.feedback != FeedbackKind::DftPerfect &&
                                     scheme.feedback != FeedbackKind::DftLmmse && scheme.feedback != FeedbackKind::DftOmp;
            if (needs_model && !model)
                throw std::invalid_argument("scheme " + scheme.name() + " needs --model");
            const int bits = fb_bits >= 0 ? fb_bits : (model && model->bits() ? *model->bits() : 4);
            std::optional<Codebook> cb;
            if (scheme.uses_codebook())
                cb = build_dft_codebook(geometry, bits);
            std::optional<GmmEstimator> gmm_est;
            if (model && (scheme.feedback == FeedbackKind::GmmObs || scheme.feedback == FeedbackKind::TgmmObs ||
                          scheme.feedback == FeedbackKind::DftGmm || scheme.feedback == FeedbackKind::DftTgmm))
                gmm_est.emplace(*model, setup);
            std::optional<LmmseEstimator> lmmse;
            if (scheme.feedback == FeedbackKind::DftLmmse) {
                if (fb_train.empty())
                    throw std::invalid_argument("dft:lmmse needs --train for the sample moments");
                const SampleMoments m = sample_moments(load_dataset(fb_train));
                lmmse.emplace(m.mean, m.covariance, setup);
            }
            std::optional<OmpEstimator> omp;
            if (scheme.feedback == FeedbackKind::DftOmp)
                omp.emplace(setup, omp_dictionary(geometry), OmpStop::for_setup(setup));

            std::ofstream file;
            if (!fb_out.empty()) {
                file.open(fb_out);
                if (!file)
                    throw std::runtime_error("cannot open " + fb_out);
            }
            std::ostream& os = fb_out.empty() ? std::cout : file;
            os << "sample,index\n";
            const Index count = fb_limit > 0 ? std::min<Index>(static_cast<Index>(fb_limit), ds.size()) : ds.size();
            const CMatrix noise = draw_standard_noise(ds.dim(), count, fb_seed);
            for (Index l = 0; l < count; ++l) {
                const CVector h = ds.sample(l);
                const CVector y = observe_with_noise(setup, h, noise.col(l));
                FeedbackReport r;
                switch (scheme.feedback) {
                case FeedbackKind::GmmObs:
                case FeedbackKind::TgmmObs: r = gmm_feedback_index(gmm_est->observation_model(), y); break;
                case FeedbackKind::GmmPerfect:
                case FeedbackKind::TgmmPerfect: r = gmm_feedback_index_perfect(*model, h); break;
                case FeedbackKind::DftPerfect: r = select_codebook_index(*cb, h); break;
                case FeedbackKind::DftGmm:
                case FeedbackKind::DftTgmm: r = select_codebook_index(*cb, gmm_est->estimate(y)); break;
                case FeedbackKind::DftLmmse: r = select_codebook_index(*cb, lmmse->estimate(y)); break;
                case FeedbackKind::DftOmp: r = select_codebook_index(*cb, omp->estimate(y).estimate); break;
                }
                os << l << ',' << r.index << '\n';
            }
        } else if (*pc) {
            const GmmModel model = load_model(pc_model);
            const ChannelDataset ds = load_dataset(pc_data, model.dim());
            const double sigma2 = std::pow(10.0, -pc_snr / 10.0);
            const ConstellationSeeds seeds = constellation_seeds(pc_seed, 0);
            const auto users = draw_users(ds.size(), pc_users, seeds.users);
            CMatrix h(model.dim(), pc_users);
            for (int j = 0; j < pc_users; ++j)
                h.col(j) = ds.sample(users[static_cast<std::size_t>(j)]);
            std::vector<FeedbackReport> reports;
            if (pc_pilots > 0) {
                const PilotSetup setup =
                    build_pilot_matrix(model.geometry(), pc_pilots, 1.0).with_noise_variance(sigma2);
                const ObservationGmm obs(model, setup);
                const CMatrix noise = draw_standard_noise(model.dim(), pc_users, seeds.noise);
                for (int j = 0; j < pc_users; ++j)
                    reports.push_back(gmm_feedback_index(obs, observe_with_noise(setup, h.col(j), noise.col(j))));
            } else {
                for (int j = 0; j < pc_users; ++j)
                    reports.push_back(gmm_feedback_index_perfect(model, h.col(j)));
            }
            PrecoderSet v;
            std::vector<std::pair<double, double>> traj;
            if (pc_precoder == "rci") {
                const CMatrix reps = directional_representatives(model);
                CMatrix chosen(model.dim(), pc_users);
                for (int j = 0; j < pc_users; ++j)
                    chosen.col(j) = reps.col(reports[static_cast<std::size_t>(j)].index);
                v = rci_precoders(chosen, sigma2, 1.0);
            } else {
                SwmmseOptions opts;
                opts.max_iters = pc_iters;
                opts.seed = seeds.swmmse;
                opts.on_iteration = [&](int, const CMatrix& vv) {
                    traj.emplace_back(sum_rate(h, vv, sigma2), vv.squaredNorm());
                };
                v = swmmse_precoders(model, reports, sigma2, 1.0, opts);
            }
            std::cout << "users:";
            for (std::size_t j = 0; j < users.size(); ++j)
                std::cout << ' ' << users[j] << "->k" << reports[j].index;
            std::cout << "\nprecoder: " << v.designer << "\ntotal power: " << g17(v.total_power())
                      << "\nsum-rate (bps/Hz): " << g17(sum_rate(h, v, sigma2)) << "\n";
            if (!pc_traj.empty()) {
                std::ofstream out(pc_traj);
                if (!out)
                    throw std::runtime_error("cannot open " + pc_traj);
                out << "iteration,sum_rate,power\n";
                for (std::size_t t = 0; t < traj.size(); ++t)
                    out << t + 1 << ',' << g17(traj[t].first) << ',' << g17(traj[t].second) << '\n';
            }
        } else if (*sw) {
            ExperimentConfig cfg = experiment_config_from(KeyValueConfig::load(sw_config));
            if (sw_seed)
                cfg.seed = *sw_seed;
            if (sw_const)
                cfg.constellations = *sw_const;
            if (sw_threads)
                cfg.threads = *sw_threads;
            // relative data and model paths resolve against the config file's directory
            const auto base = std::filesystem::path(sw_config).parent_path();
            const auto resolve = [&](std::string& p) {
                if (!p.empty() && std::filesystem::path(p).is_relative())
                    p = (base / p).string();
            };
            ExperimentConfig files = cfg;
            resolve(files.eval_data);
            resolve(files.train_data);
            for (auto& p : files.gmm_models)
                resolve(p);
            for (auto& p : files.tgmm_models)
                resolve(p);
            const Experiment experiment(cfg, load_resources(files));
            const SweepResult result = run_sweep(experiment);
            for (const auto& n : result.notes)
                std::cerr << "note: " << n << "\n";
            if (sw_out.empty())
                std::cout << csv_text(result);
            else
                emit_csv(result, sw_out);
            if (!sw_raw.empty())
                dump_raw(result, sw_raw);
            std::cerr << "config hash " << std::hex << result.config_hash << std::dec << ", " << result.runtime_seconds
                      << " s\n";
        } else if (*rep) {
            if (rep_csv.empty() == rep_raw.empty())
                throw std::invalid_argument("report needs exactly one of --csv or --raw");
            if (!rep_csv.empty()) {
                std::ifstream in(rep_csv);
                if (!in)
                    throw std::runtime_error("cannot open " + rep_csv);
                std::string line;
                while (std::getline(in, line)) {
                    std::stringstream ss(line);
                    std::string cell;
                    while (std::getline(ss, cell, ','))
                        std::cout << std::setw(22) << cell;
                    std::cout << '\n';
                }
            } else {
                std::ifstream in(rep_raw + ".jsonl");
                if (!in)
                    throw std::runtime_error("cannot open " + rep_raw + ".jsonl");
                std::string line;
                std::getline(in, line);
                const auto head = nlohmann::json::parse(line);
                std::cout << "axis " << head["axis"].get<std::string>() << ", " << head["constellations"]
                          << " constellations\n";
                while (std::getline(in, line)) {
                    const auto col = nlohmann::json::parse(line);
                    std::vector<double> values;
                    for (const auto& v : col["values"])
                        values.push_back(v.is_null() ? std::nan("") : v.get<double>());
                    const auto [m, se] = mean_and_se(values);
                    std::cout << std::setw(14) << g17(col["axis_value"].get<double>()) << std::setw(20)
                              << col["scheme"].get<std::string>() << "  mean " << std::setw(24) << g17(m) << "  se "
                              << g17(se) << '\n';
                }
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
