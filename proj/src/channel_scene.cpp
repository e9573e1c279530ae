// SPDX-License-Identifier: Apache-2.0

#include "limfb/channel_scene.hpp"

#include "binary_io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace limfb {

void ArrayGeometry::validate() const
{
    if (n_vert < 1 || n_horiz < 1)
        throw std::invalid_argument("array needs at least one antenna per dimension");
    if (!(spacing_vert > 0.0) || !(spacing_horiz > 0.0))
        throw std::invalid_argument("antenna spacings must be positive");
}

void SceneConfig::validate() const
{
    geometry.validate();
    if (num_clusters < 1 || paths_per_cluster < 1)
        throw std::invalid_argument("scene needs at least one cluster with one path");
    if (num_clusters - 1 > scatterer_pool)
        throw std::invalid_argument("scatterer pool smaller than the number of non-local clusters");
    const auto spread_ok = [](double s) { return s >= 0.0 && s < std::numbers::pi; };
    if (!spread_ok(azimuth_spread) || !spread_ok(elevation_spread))
        throw std::invalid_argument("angular spreads must lie in [0, pi)");
    if (!(sector_half_width >= 0.0) || elevation_max < elevation_min)
        throw std::invalid_argument("invalid sector bounds");
    if (user_zones < 0 || !(zone_spread >= 0.0))
        throw std::invalid_argument("user_zones and zone_spread must be non-negative");
}

SceneConfig SceneConfig::large_scale()
{
    SceneConfig cfg;
    cfg.geometry = ArrayGeometry{4, 16, 1.0, 0.5};
    return cfg;
}

SceneConfig SceneConfig::desk_scale()
{
    SceneConfig cfg;
    cfg.geometry = ArrayGeometry{2, 8, 1.0, 0.5};
    return cfg;
}

double ChannelDataset::mean_squared_norm() const
{
    if (size() == 0)
        return 0.0;
    return samples.colwise().squaredNorm().sum() / static_cast<double>(size());
}

CVector steering_vector(const ArrayGeometry& geometry, double elevation, double azimuth)
{
    geometry.validate();
    const double u_vert = std::sin(elevation);
    const double u_horiz = std::cos(elevation) * std::sin(azimuth);
    const double two_pi = 2.0 * std::numbers::pi;

    CVector a_horiz(geometry.n_horiz);
    for (int h = 0; h < geometry.n_horiz; ++h)
        a_horiz(h) = std::polar(1.0, two_pi * geometry.spacing_horiz * h * u_horiz);

    CVector a(geometry.size());
    for (int v = 0; v < geometry.n_vert; ++v) {
        const cplx av = std::polar(1.0, two_pi * geometry.spacing_vert * v * u_vert);
        a.segment(static_cast<Index>(v) * geometry.n_horiz, geometry.n_horiz) = av * a_horiz;
    }
    return a;
}

namespace {

struct Direction {
    double elevation;
    double azimuth;
};

std::vector<Direction> layout_directions(const SceneConfig& config, std::uint64_t stream, int count)
{
    Rng rng(derive_seed(config.layout_seed, stream));
    std::uniform_real_distribution<double> az(-config.sector_half_width, config.sector_half_width);
    std::uniform_real_distribution<double> el(config.elevation_min, config.elevation_max);
    std::vector<Direction> pool(static_cast<std::size_t>(count));
    for (auto& d : pool) {
        d.azimuth = az(rng);
        d.elevation = el(rng);
    }
    return pool;
}

} // namespace

ChannelDataset generate_channels(const SceneConfig& config, std::size_t count)
{
    config.validate();
    if (count == 0)
        throw std::invalid_argument("generate_channels: count must be positive");

    const auto pool = layout_directions(config, 0x5CA77E5, config.scatterer_pool);
    const auto zones = layout_directions(config, 0x20E5, config.user_zones);
    const Index n = config.geometry.size();

    std::vector<double> cluster_power(static_cast<std::size_t>(config.num_clusters));
    for (int c = 0; c < config.num_clusters; ++c)
        cluster_power[c] = std::pow(10.0, -config.cluster_decay_db * c / 10.0);
    const double total = std::accumulate(cluster_power.begin(), cluster_power.end(), 0.0);
    for (auto& p : cluster_power)
        p /= total;

    Rng rng(derive_seed(config.seed, 0xC4A77E1));
    std::uniform_real_distribution<double> az(-config.sector_half_width, config.sector_half_width);
    std::uniform_real_distribution<double> el(config.elevation_min, config.elevation_max);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::normal_distribution<double> gain(0.0, std::sqrt(0.5));

    std::vector<int> pool_order(pool.size());

    ChannelDataset out;
    out.scene = config;
    out.samples = CMatrix::Zero(n, static_cast<Index>(count));
    for (std::size_t l = 0; l < count; ++l) {
        std::vector<Direction> centers;
        if (zones.empty()) {
            centers.push_back({el(rng), az(rng)});
        } else {
            std::uniform_int_distribution<std::size_t> zone(0, zones.size() - 1);
            Direction d = zones[zone(rng)];
            d.azimuth += config.zone_spread * gauss(rng);
            centers.push_back(d);
        }
        // partial Fisher-Yates over the scatterer pool
        std::iota(pool_order.begin(), pool_order.end(), 0);
        for (int c = 1; c < config.num_clusters; ++c) {
            const auto i = static_cast<std::size_t>(c - 1);
            std::uniform_int_distribution<std::size_t> pick(i, pool_order.size() - 1);
            std::swap(pool_order[i], pool_order[pick(rng)]);
            centers.push_back(pool[pool_order[i]]);
        }

        auto col = out.samples.col(static_cast<Index>(l));
        for (int c = 0; c < config.num_clusters; ++c) {
            const double path_std = std::sqrt(cluster_power[c] / config.paths_per_cluster);
            for (int p = 0; p < config.paths_per_cluster; ++p) {
                const double e = centers[c].elevation + config.elevation_spread * gauss(rng);
                const double a = centers[c].azimuth + config.azimuth_spread * gauss(rng);
                const double g_re = gain(rng);
                const double g_im = gain(rng);
                col += path_std * cplx(g_re, g_im) * steering_vector(config.geometry, e, a);
            }
        }
    }
    return out;
}

ChannelDataset normalize_dataset(const ChannelDataset& dataset)
{
    if (dataset.size() == 0)
        throw std::invalid_argument("normalize_dataset: empty dataset");
    const double msn = dataset.mean_squared_norm();
    if (!(msn > 0.0))
        throw std::invalid_argument("normalize_dataset: all-zero dataset has no defined scale");

    ChannelDataset out = dataset;
    out.samples *= std::sqrt(static_cast<double>(dataset.dim()) / msn);
    out.normalized = true;
    return out;
}

void save_dataset(const ChannelDataset& dataset, const std::filesystem::path& path)
{
    detail::ByteWriter w;
    w.put_bytes("LFBD");
    w.put_u16(kDatasetFormatVersion);
    w.put_u32(static_cast<std::uint32_t>(dataset.dim()));
    w.put_u64(static_cast<std::uint64_t>(dataset.size()));
    w.put_u8(dataset.normalized ? 1 : 0);
    for (Index l = 0; l < dataset.size(); ++l) {
        for (Index i = 0; i < dataset.dim(); ++i) {
            const cplx z = dataset.samples(i, l);
            w.put_f32(static_cast<float>(z.real()));
            w.put_f32(static_cast<float>(z.imag()));
        }
    }
    w.write_to(path);
}

ChannelDataset load_dataset(const std::filesystem::path& path, std::optional<Index> expected_dim)
{
    auto r = detail::ByteReader::from_file(path);
    std::uint32_t dim = 0;
    std::uint64_t count = 0;
    std::uint8_t flag = 0;
    try {
        if (r.get_bytes(4) != "LFBD")
            throw MalformedHeaderError("'" + path.string() + "': bad magic, not an LFBD dataset");
        const auto version = r.get_u16();
        if (version != kDatasetFormatVersion)
            throw MalformedHeaderError("'" + path.string() + "': unsupported dataset version " + std::to_string(version));
        dim = r.get_u32();
        count = r.get_u64();
        flag = r.get_u8();
    } catch (const detail::ShortRead&) {
        throw MalformedHeaderError("'" + path.string() + "': header shorter than " +
                                   std::to_string(kDatasetHeaderBytes) + " bytes");
    }
    if (flag > 1)
        throw MalformedHeaderError("'" + path.string() + "': invalid normalized flag");
    if (dim == 0)
        throw DimensionMismatchError("'" + path.string() + "': zero channel dimension");
    if (expected_dim && *expected_dim != static_cast<Index>(dim))
        throw DimensionMismatchError("'" + path.string() + "': channel dimension " + std::to_string(dim) +
                                     ", expected " + std::to_string(*expected_dim));

    const std::uint64_t payload = static_cast<std::uint64_t>(dim) * count * 8u;
    if (r.remaining() < payload)
        throw TruncatedPayloadError("'" + path.string() + "': payload has " + std::to_string(r.remaining()) +
                                    " bytes, header announces " + std::to_string(payload));
    if (r.remaining() > payload)
        throw DimensionMismatchError("'" + path.string() + "': " + std::to_string(r.remaining() - payload) +
                                     " trailing bytes beyond N*L payload");

    ChannelDataset out;
    out.normalized = flag == 1;
    out.samples.resize(dim, static_cast<Index>(count));
    for (Index l = 0; l < static_cast<Index>(count); ++l) {
        for (Index i = 0; i < static_cast<Index>(dim); ++i) {
            const float re = r.get_f32();
            const float im = r.get_f32();
            out.samples(i, l) = cplx(re, im);
        }
    }
    return out;
}

} // namespace limfb
