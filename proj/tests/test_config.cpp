#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <string>

#include "replab/config.hpp"

using namespace replab;

TEST_CASE("parse_text reads key = value lines, comments, and blanks") {
    const KeyValueConfig cfg = KeyValueConfig::parse_text(
        "# a comment\n"
        "alpha = 0.25\n"
        "\n"
        "name = power_law\n"
        "count = 42\n"
        "flag = true\n");
    CHECK(cfg.get_double("alpha") == 0.25);
    CHECK(cfg.get_string("name") == "power_law");
    CHECK(cfg.get_int64("count") == 42);
    CHECK(cfg.get_bool("flag"));
}

TEST_CASE("duplicate keys are rejected") {
    CHECK_THROWS_AS(KeyValueConfig::parse_text("a = 1\na = 2\n"), ConfigError);
}

TEST_CASE("malformed lines are rejected") {
    CHECK_THROWS_AS(KeyValueConfig::parse_text("just some text\n"), ConfigError);
}

TEST_CASE("missing or malformed values throw ConfigError naming the key") {
    const KeyValueConfig cfg = KeyValueConfig::parse_text("x = abc\n");
    CHECK_THROWS_WITH_AS(cfg.get_double("missing"),
                         doctest::Contains("missing"), ConfigError);
    CHECK_THROWS_WITH_AS(cfg.get_double("x"), doctest::Contains("x"), ConfigError);
}

TEST_CASE("defaulted getters fall back only when the key is absent") {
    const KeyValueConfig cfg = KeyValueConfig::parse_text("present = 2\n");
    CHECK(cfg.get_int64("present", 7) == 2);
    CHECK(cfg.get_int64("absent", 7) == 7);
    CHECK(cfg.get_string("absent", "dflt") == "dflt");
    CHECK(cfg.get_double("absent", 1.5) == 1.5);
    CHECK(cfg.get_bool("absent", true));
}

TEST_CASE("apply_overrides replaces and adds keys") {
    KeyValueConfig cfg = KeyValueConfig::parse_text("a = 1\nb = 2\n");
    cfg.apply_overrides("b=20,c=30");
    CHECK(cfg.get_int64("a") == 1);
    CHECK(cfg.get_int64("b") == 20);
    CHECK(cfg.get_int64("c") == 30);
    CHECK_THROWS_AS(cfg.apply_overrides("novalue"), ConfigError);
}

TEST_CASE("require_known_keys lists every unknown key") {
    const KeyValueConfig cfg = KeyValueConfig::parse_text("good = 1\noops = 2\ntypo = 3\n");
    CHECK_NOTHROW(cfg.require_known_keys({"good", "oops", "typo"}));
    CHECK_THROWS_WITH_AS(cfg.require_known_keys({"good"}),
                         doctest::Contains("oops"), ConfigError);
    try {
        cfg.require_known_keys({"good"});
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        CHECK(what.find("typo") != std::string::npos);
    }
}

TEST_CASE("has and set work together") {
    KeyValueConfig cfg;
    CHECK_FALSE(cfg.has("k"));
    cfg.set("k", "v");
    CHECK(cfg.has("k"));
    CHECK(cfg.get_string("k") == "v");
}
