// SPDX-License-Identifier: Apache-2.0

#include "limfb/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace limfb {

namespace {

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

template <typename T> T parse_number(const std::string& key, const std::string& text)
{
    T value{};
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end)
        throw ConfigError("config key '" + key + "': cannot parse '" + text + "' as a number");
    return value;
}

} // namespace

std::vector<std::string> split_list(const std::string& text)
{
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty())
            out.push_back(item);
    }
    return out;
}

KeyValueConfig KeyValueConfig::parse(std::istream& in, const std::string& source)
{
    KeyValueConfig cfg;
    cfg.source_ = source;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const std::string body = trim(line);
        if (body.empty() || body.front() == '#')
            continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source + ":" + std::to_string(number) + ": expected 'key = value'");
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        if (key.empty())
            throw ConfigError(source + ":" + std::to_string(number) + ": empty key");
        if (cfg.entries_.count(key))
            throw ConfigError(source + ":" + std::to_string(number) + ": duplicate key '" + key + "'");
        cfg.entries_[key] = value;
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path.string());
    return parse(in, path.string());
}

const std::string& KeyValueConfig::get(const std::string& key) const
{
    const auto it = entries_.find(key);
    if (it == entries_.end())
        throw ConfigError("missing config key '" + key + "'");
    return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const
{
    return has(key) ? get(key) : fallback;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const
{
    return has(key) ? parse_number<double>(key, get(key)) : fallback;
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const
{
    return has(key) ? parse_number<long long>(key, get(key)) : fallback;
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const
{
    return has(key) ? parse_number<std::uint64_t>(key, get(key)) : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const
{
    if (!has(key))
        return fallback;
    std::string v = get(key);
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "1" || v == "true" || v == "yes" || v == "on")
        return true;
    if (v == "0" || v == "false" || v == "no" || v == "off")
        return false;
    throw ConfigError("config key '" + key + "': expected a boolean, got '" + get(key) + "'");
}

std::vector<double> KeyValueConfig::get_double_list(const std::string& key, const std::vector<double>& fallback) const
{
    if (!has(key))
        return fallback;
    std::vector<double> out;
    for (const auto& item : split_list(get(key)))
        out.push_back(parse_number<double>(key, item));
    return out;
}

std::vector<std::string> KeyValueConfig::get_string_list(const std::string& key,
                                                         const std::vector<std::string>& fallback) const
{
    return has(key) ? split_list(get(key)) : fallback;
}

void KeyValueConfig::require_known(const std::set<std::string>& allowed) const
{
    std::string unknown;
    for (const auto& [key, value] : entries_) {
        if (!allowed.count(key))
            unknown += (unknown.empty() ? "" : ", ") + key;
    }
    if (!unknown.empty())
        throw ConfigError(source_ + ": unknown config keys: " + unknown);
}

SceneConfig scene_config_from(const KeyValueConfig& config)
{
    const std::string profile = config.get_string("profile", "desk");
    SceneConfig scene;
    if (profile == "desk")
        scene = SceneConfig::desk_scale();
    else if (profile == "large")
        scene = SceneConfig::large_scale();
    else
        throw ConfigError("profile must be 'desk' or 'large', got '" + profile + "'");

    scene.geometry.n_vert = static_cast<int>(config.get_int("n_vert", scene.geometry.n_vert));
    scene.geometry.n_horiz = static_cast<int>(config.get_int("n_horiz", scene.geometry.n_horiz));
    scene.geometry.spacing_vert = config.get_double("spacing_vert", scene.geometry.spacing_vert);
    scene.geometry.spacing_horiz = config.get_double("spacing_horiz", scene.geometry.spacing_horiz);
    scene.num_clusters = static_cast<int>(config.get_int("clusters", scene.num_clusters));
    scene.paths_per_cluster = static_cast<int>(config.get_int("paths_per_cluster", scene.paths_per_cluster));
    scene.azimuth_spread = config.get_double("azimuth_spread", scene.azimuth_spread);
    scene.elevation_spread = config.get_double("elevation_spread", scene.elevation_spread);
    scene.sector_half_width = config.get_double("sector_half_width", scene.sector_half_width);
    scene.elevation_min = config.get_double("elevation_min", scene.elevation_min);
    scene.elevation_max = config.get_double("elevation_max", scene.elevation_max);
    scene.scatterer_pool = static_cast<int>(config.get_int("scatterer_pool", scene.scatterer_pool));
    scene.cluster_decay_db = config.get_double("cluster_decay_db", scene.cluster_decay_db);
    scene.user_zones = static_cast<int>(config.get_int("user_zones", scene.user_zones));
    scene.zone_spread = config.get_double("zone_spread", scene.zone_spread);
    scene.layout_seed = config.get_u64("layout_seed", scene.layout_seed);
    scene.seed = config.get_u64("seed", scene.seed);
    scene.validate();
    return scene;
}

} // namespace limfb
