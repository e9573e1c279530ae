// SPDX-License-Identifier: Apache-2.0
//
// Synthetic URA channel scenes: steering vectors, a cluster-based generator,
// dataset normalization and the "LFBD" binary container.
//
// Array convention: the URA lies in the vertical/horizontal plane with its
// normal along the boresight. For a direction (elevation, azimuth) the
// direction cosines are
//   u_vert  = sin(elevation)
//   u_horiz = cos(elevation) * sin(azimuth)
// and the response is a_vert (x) a_horiz with entries exp(i*2*pi*d*n*u).
// Flat antenna index = v * n_horiz + h.

#pragma once

#include "limfb/common.hpp"

#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <stdexcept>

namespace limfb {

struct ArrayGeometry {
    int n_vert = 4;
    int n_horiz = 16;
    double spacing_vert = 1.0;  // wavelengths
    double spacing_horiz = 0.5; // wavelengths

    Index size() const { return static_cast<Index>(n_vert) * n_horiz; }
    void validate() const;
    bool operator==(const ArrayGeometry&) const = default;
};

/// Cluster-based scene description.
///
/// Each sample draws `num_clusters` clusters: the first is local to the user
/// (centered on a user direction drawn uniformly over the sector), the others
/// are picked without replacement from a pool of `scatterer_pool` fixed
/// scatterer directions. The pool is drawn once from `layout_seed`, so
/// datasets generated with different `seed` share one environment.
/// Path angles are Gaussian around the cluster center with the given spreads.
/// With `user_zones` > 0 the local cluster is centered on one of that many
/// hotspot directions (also drawn from `layout_seed`), jittered in azimuth by
/// `zone_spread`.
struct SceneConfig {
    ArrayGeometry geometry;
    int num_clusters = 3;
    int paths_per_cluster = 10;
    double azimuth_spread = 0.10;   // radians, std of path azimuth around the cluster center
    double elevation_spread = 0.03; // radians
    double sector_half_width = std::numbers::pi / 3.0;
    double elevation_min = -0.35;
    double elevation_max = 0.0;
    int scatterer_pool = 6;
    double cluster_decay_db = 10.0; // power step between consecutive clusters of a sample
    int user_zones = 0;            // 0: local cluster uniform over the sector
    double zone_spread = 0.05;     // radians, azimuth std of the user direction inside a zone
    std::uint64_t layout_seed = 2017;
    std::uint64_t seed = 1;

    void validate() const;

    /// N_v=4, N_h=16 URA with lambda vertical / lambda/2 horizontal spacing.
    static SceneConfig large_scale();
    /// N_v=2, N_h=8 variant used for the fast profile.
    static SceneConfig desk_scale();
};

/// Channel samples are the columns of `samples` (N x L).
struct ChannelDataset {
    CMatrix samples;
    SceneConfig scene;
    bool normalized = false;

    Index dim() const { return samples.rows(); }
    Index size() const { return samples.cols(); }
    CVector sample(Index l) const { return samples.col(l); }
    double mean_squared_norm() const;
};

CVector steering_vector(const ArrayGeometry& geometry, double elevation, double azimuth);

/// Deterministic in (config, count); `normalized` is false on return.
ChannelDataset generate_channels(const SceneConfig& config, std::size_t count);

/// Scales every sample by one global factor so that mean ||h||^2 = N.
ChannelDataset normalize_dataset(const ChannelDataset& dataset);

// Dataset file errors. All derive from DatasetFormatError.
class DatasetFormatError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};
class MalformedHeaderError : public DatasetFormatError {
  public:
    using DatasetFormatError::DatasetFormatError;
};
class DimensionMismatchError : public DatasetFormatError {
  public:
    using DatasetFormatError::DatasetFormatError;
};
class TruncatedPayloadError : public DatasetFormatError {
  public:
    using DatasetFormatError::DatasetFormatError;
};

inline constexpr std::uint16_t kDatasetFormatVersion = 1;
/// magic(4) + version(2) + N(4) + L(8) + flag(1)
inline constexpr std::size_t kDatasetHeaderBytes = 19;

/// Writes the LFBD container. Samples are stored as 32-bit floats, so values
/// that are not float-representable are rounded on the way out.
void save_dataset(const ChannelDataset& dataset, const std::filesystem::path& path);

/// Reads an LFBD container. If `expected_dim` is given, a file with a
/// different N raises DimensionMismatchError. The scene metadata is not part
/// of the container; `scene` is left at its defaults apart from geometry size
/// checks done by callers.
ChannelDataset load_dataset(const std::filesystem::path& path, std::optional<Index> expected_dim = {});

} // namespace limfb
