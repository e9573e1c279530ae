// SPDX-License-Identifier: Apache-2.0
//
// Flat `key = value` configuration files. Lines starting with '#' are comments,
// blank lines are ignored, keys are unique and values are trimmed. Lists are
// comma separated.

#pragma once

#include "limfb/channel_scene.hpp"

#include <filesystem>
#include <istream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace limfb {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class KeyValueConfig {
  public:
    KeyValueConfig() = default;
    static KeyValueConfig parse(std::istream& in, const std::string& source = "<stream>");
    static KeyValueConfig load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { entries_[key] = value; }
    const std::string& get(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_double_list(const std::string& key, const std::vector<double>& fallback) const;
    std::vector<std::string> get_string_list(const std::string& key,
                                             const std::vector<std::string>& fallback) const;

    /// Throws ConfigError naming every key that is not in `allowed`.
    void require_known(const std::set<std::string>& allowed) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }
    const std::string& source() const { return source_; }

  private:
    std::map<std::string, std::string> entries_;
    std::string source_;
};

std::vector<std::string> split_list(const std::string& text);

/// Keys: profile (desk|large), n_vert, n_horiz, spacing_vert, spacing_horiz,
/// clusters, paths_per_cluster, azimuth_spread, elevation_spread,
/// sector_half_width, elevation_min, elevation_max, scatterer_pool,
/// cluster_decay_db, user_zones, zone_spread, layout_seed, seed. Unlisted keys are ignored.
SceneConfig scene_config_from(const KeyValueConfig& config);

} // namespace limfb
