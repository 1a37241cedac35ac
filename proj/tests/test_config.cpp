#include <doctest.h>

#include "tractshape/config.hpp"
#include "tractshape/error.hpp"

using namespace tractshape;

TEST_CASE("flat config parses keys, comments and blank lines") {
  const auto cfg = FlatConfig::parse(
      "# header comment\n"
      "\n"
      "seed = 42\n"
      "  name=  spaced value  \n"
      "ratio = 0.25\n"
      "flag = yes\n"
      "items = a, b , c\n");
  CHECK(cfg.require_seed() == 42);
  CHECK(cfg.get_string("name", "") == "spaced value");
  CHECK(cfg.get_double("ratio", 0) == doctest::Approx(0.25));
  CHECK(cfg.get_bool("flag", false));
  CHECK(cfg.get_list("items", ',') == std::vector<std::string>{"a", "b", "c"});
  CHECK(cfg.get_string("absent", "fallback") == "fallback");
  CHECK(cfg.get_int("absent", 7) == 7);
  CHECK(cfg.get_list("absent", ',').empty());
}

TEST_CASE("flat config rejects malformed input") {
  CHECK_THROWS_WITH_AS(FlatConfig::parse("just a line\n"),
                       doctest::Contains("key = value"), Error);
  CHECK_THROWS_AS(FlatConfig::parse("= value\n"), Error);
  CHECK_THROWS_WITH_AS(FlatConfig::parse("a = 1\na = 2\n"),
                       doctest::Contains("duplicate"), Error);
  const auto cfg = FlatConfig::parse("x = abc\nb = maybe\nseed = -3\n");
  CHECK_THROWS_AS(cfg.get_double("x", 0), Error);
  CHECK_THROWS_AS(cfg.get_int("x", 0), Error);
  CHECK_THROWS_AS(cfg.get_bool("b", false), Error);
  CHECK_THROWS_AS(cfg.require_seed(), Error);
  CHECK_THROWS_AS(cfg.require("missing"), Error);
  CHECK_THROWS_AS(FlatConfig::load("/nonexistent/path.cfg"), Error);
}

TEST_CASE("trim and split helpers") {
  CHECK(trim("  x y  ") == "x y");
  CHECK(trim("") == "");
  CHECK(split("a, ,b,,c", ',') == std::vector<std::string>{"a", "b", "c"});
  CHECK(split("", ',').empty());
  CHECK(split("one", ',') == std::vector<std::string>{"one"});
}

TEST_CASE("set overrides parsed values") {
  auto cfg = FlatConfig::parse("seed = 1\n");
  cfg.set("seed", "9");
  CHECK(cfg.require_seed() == 9);
}
