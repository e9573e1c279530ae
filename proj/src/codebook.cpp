// SPDX-License-Identifier: Apache-2.0

#include "limfb/feedback.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace limfb {

namespace {

CMatrix beam_matrix(int antennas, int beams)
{
    CMatrix f(antennas, beams);
    for (int a = 0; a < antennas; ++a) {
        for (int b = 0; b < beams; ++b)
            f(a, b) = std::polar(1.0, -2.0 * std::numbers::pi * ((static_cast<long>(a) * b) % beams) / beams);
    }
    return f;
}

} // namespace

Codebook build_dft_codebook(const ArrayGeometry& geometry, int bits)
{
    geometry.validate();
    if (bits < 0 || bits > 24)
        throw std::invalid_argument("build_dft_codebook: bits must lie in [0, 24]");
    const long k = 1L << bits;
    const long nv = geometry.n_vert;
    const long nh = geometry.n_horiz;

    long v = 0;
    long h = 0;
    std::string attempt;
    if (k >= nv * nh) {
        v = nv;
        attempt = "oversample horizontal: beams_vert=" + std::to_string(nv) + ", beams_horiz=" + std::to_string(k) + "/" +
                  std::to_string(nv);
        if (k % nv == 0)
            h = k / nv;
    } else if (k >= nh) {
        h = nh;
        attempt = "undersample vertical: beams_vert=" + std::to_string(k) + "/" + std::to_string(nh) +
                  ", beams_horiz=" + std::to_string(nh);
        if (k % nh == 0)
            v = k / nh;
    } else {
        v = 1;
        h = k;
    }
    if (v == 0 || h == 0)
        throw std::invalid_argument("build_dft_codebook: B=" + std::to_string(bits) + " is infeasible for a " +
                                    std::to_string(nv) + "x" + std::to_string(nh) + " array (" + attempt +
                                    " is not an integer beam count)");

    Codebook cb;
    cb.bits = bits;
    cb.beams_vert = static_cast<int>(v);
    cb.beams_horiz = static_cast<int>(h);
    cb.oversampling_vert = static_cast<double>(v) / static_cast<double>(nv);
    cb.oversampling_horiz = static_cast<double>(h) / static_cast<double>(nh);
    cb.entries = kronecker(beam_matrix(geometry.n_vert, cb.beams_vert), beam_matrix(geometry.n_horiz, cb.beams_horiz));
    cb.entries /= std::sqrt(static_cast<double>(geometry.size()));
    return cb;
}

FeedbackReport select_codebook_index(const Codebook& codebook, const CVector& h_hat, std::string scheme)
{
    if (h_hat.size() != codebook.entries.rows())
        throw std::invalid_argument("select_codebook_index: estimate dimension does not match the codebook");
    FeedbackReport report;
    report.scheme = std::move(scheme);
    if (h_hat.squaredNorm() == 0.0) {
        report.index = 0;
        report.degenerate = true;
        return report;
    }
    const RVector corr = (codebook.entries.adjoint() * h_hat).cwiseAbs();
    report.index = argmax_first(corr);
    return report;
}

FeedbackReport gmm_feedback_index(const ObservationGmm& observation_model, const CVector& y)
{
    FeedbackReport report;
    report.scheme = observation_model.source_constraint() == CovarianceConstraint::Full ? "gmm-obs" : "tgmm-obs";
    // the normalizer of the responsibilities is common to all k
    report.index = argmax_first(observation_model.log_scores(y));
    return report;
}

FeedbackReport gmm_feedback_index_perfect(const GmmModel& model, const CVector& h)
{
    FeedbackReport report;
    report.scheme = model.constraint() == CovarianceConstraint::Full ? "gmm-perfect" : "tgmm-perfect";
    report.index = argmax_first(model.log_scores(h));
    return report;
}

} // namespace limfb
