// SPDX-License-Identifier: Apache-2.0

#include "limfb/config.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace limfb;

namespace {

KeyValueConfig from_text(const std::string& text)
{
    std::istringstream in(text);
    return KeyValueConfig::parse(in, "test.cfg");
}

} // namespace

TEST_CASE("key value parsing")
{
    const auto cfg = from_text("# heading\n\n  users =  4 \nname=a = b\nlist = 1, 2.5 ,, 3\n  # indented comment\nflag = Yes\n");
    CHECK(cfg.entries().size() == 4);
    CHECK(cfg.get("users") == "4");
    CHECK(cfg.get("name") == "a = b");
    CHECK(cfg.get_int("users", 0) == 4);
    CHECK(cfg.get_double("users", 0.0) == 4.0);
    CHECK(cfg.get_u64("users", 0) == 4u);
    CHECK(cfg.get_bool("flag", false));
    CHECK(cfg.get_double_list("list", {}) == std::vector<double>{1.0, 2.5, 3.0});
    CHECK(cfg.get_string_list("name", {}) == std::vector<std::string>{"a = b"});
    CHECK(cfg.get_int("absent", -3) == -3);
    CHECK(cfg.get_string("absent", "x") == "x");
    CHECK(cfg.source() == "test.cfg");
    CHECK(split_list(" a, b ,c,") == std::vector<std::string>{"a", "b", "c"});
    CHECK(split_list("").empty());
}

TEST_CASE("key value errors")
{
    CHECK_THROWS_AS(from_text("a = 1\na = 2\n"), ConfigError);
    CHECK_THROWS_AS(from_text("just words\n"), ConfigError);
    CHECK_THROWS_AS(from_text(" = 3\n"), ConfigError);

    const auto cfg = from_text("n = 4x\nb = maybe\nneg = -1\nd = 1e400\n");
    CHECK_THROWS_AS(cfg.get_int("n", 0), ConfigError);
    CHECK_THROWS_AS(cfg.get_double("n", 0), ConfigError);
    CHECK_THROWS_AS(cfg.get_bool("b", false), ConfigError);
    CHECK_THROWS_AS(cfg.get_u64("neg", 0), ConfigError);
    CHECK_THROWS_AS(cfg.get_double("d", 0), ConfigError);
    CHECK_THROWS_AS(cfg.get("missing"), ConfigError);
    CHECK_THROWS_AS(cfg.require_known({"n", "b"}), ConfigError);
    CHECK_NOTHROW(cfg.require_known({"n", "b", "neg", "d"}));
    CHECK_THROWS_AS(KeyValueConfig::load("/nonexistent/limfb.cfg"), ConfigError);
}

TEST_CASE("config files")
{
    const auto dir = oracle::scratch_dir("config");
    {
        std::ofstream out(dir / "scene.cfg");
        out << "profile = large\nclusters = 2\nseed = 12\n";
    }
    const auto cfg = KeyValueConfig::load(dir / "scene.cfg");
    CHECK(cfg.source() == (dir / "scene.cfg").string());
    const SceneConfig scene = scene_config_from(cfg);
    CHECK(scene.geometry.n_vert == 4);
    CHECK(scene.geometry.n_horiz == 16);
    CHECK(scene.num_clusters == 2);
    CHECK(scene.seed == 12u);
}

TEST_CASE("scene configuration")
{
    const SceneConfig desk = scene_config_from(from_text(""));
    const SceneConfig ref = SceneConfig::desk_scale();
    CHECK(desk.geometry.n_vert == ref.geometry.n_vert);
    CHECK(desk.geometry.n_horiz == ref.geometry.n_horiz);
    CHECK(desk.cluster_decay_db == ref.cluster_decay_db);

    const SceneConfig s = scene_config_from(from_text("n_vert = 3\nn_horiz = 5\nazimuth_spread = 0.2\n"
                                                      "user_zones = 2\nzone_spread = 0\nlayout_seed = 5\n"
                                                      "cluster_decay_db = 3\nunrelated = 1\n"));
    CHECK(s.geometry.n_vert == 3);
    CHECK(s.geometry.n_horiz == 5);
    CHECK(s.azimuth_spread == 0.2);
    CHECK(s.user_zones == 2);
    CHECK(s.zone_spread == 0.0);
    CHECK(s.layout_seed == 5u);
    CHECK(s.cluster_decay_db == 3.0);

    CHECK_THROWS_AS(scene_config_from(from_text("profile = huge\n")), ConfigError);
    CHECK_THROWS_AS(scene_config_from(from_text("n_vert = 0\n")), std::invalid_argument);
    CHECK_THROWS_AS(scene_config_from(from_text("azimuth_spread = 4\n")), std::invalid_argument);
    CHECK_THROWS_AS(scene_config_from(from_text("clusters = two\n")), ConfigError);
}
