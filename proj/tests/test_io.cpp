// File formats: TOMOSET round-trips and error reporting, CSV layout, PGM
// output with sidecar scaling metadata, and key=value config parsing.

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <oedtomo/datagen.hpp>
#include <oedtomo/io.hpp>

using namespace oedtomo;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("oedtomo_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("tomoset round-trip preserves every bit") {
  TempDir tmp;
  Grid g{12, 10};
  TrainingSet ts = gen_shapes(3, g, 123);
  std::string path = tmp.file("set.tomoset");
  write_tomoset(path, ts);

  std::string head = slurp(path).substr(0, 16);
  REQUIRE(head.rfind("TOMOSET 1 3 12 1", 0) == 0);

  TrainingSet back = read_tomoset(path);
  REQUIRE(back.count() == 3);
  REQUIRE(back.grid.height == 12);
  REQUIRE(back.grid.width == 10);
  for (int i = 0; i < 3; ++i)
    REQUIRE((back.images[i].values - ts.images[i].values).lpNorm<Eigen::Infinity>() == 0.0);

  // Re-writing the parsed set is byte-identical (full-precision formatting).
  std::string path2 = tmp.file("set2.tomoset");
  write_tomoset(path2, back);
  REQUIRE(slurp(path) == slurp(path2));
}

TEST_CASE("tomoset reader rejects malformed files") {
  TempDir tmp;
  auto write_text = [&](const std::string& name, const std::string& text) {
    std::ofstream out(tmp.file(name));
    out << text;
    return tmp.file(name);
  };
  REQUIRE_THROWS_WITH(read_tomoset(tmp.file("missing.tomoset")),
                      Catch::Matchers::ContainsSubstring("cannot open"));
  REQUIRE_THROWS_WITH(read_tomoset(write_text("bad1", "NOTOMO 1 1 2 2\n1 2\n3 4\n")),
                      Catch::Matchers::ContainsSubstring("not a TOMOSET"));
  REQUIRE_THROWS_WITH(read_tomoset(write_text("bad2", "TOMOSET 9 1 2 2\n1 2\n3 4\n")),
                      Catch::Matchers::ContainsSubstring("version"));
  REQUIRE_THROWS_WITH(read_tomoset(write_text("bad3", "TOMOSET 1 1 2 2\n1 2\n3\n")),
                      Catch::Matchers::ContainsSubstring("truncated"));
  REQUIRE_THROWS_WITH(read_tomoset(write_text("bad4", "TOMOSET 1 1 2 2\n1 2\n3 4\n5\n")),
                      Catch::Matchers::ContainsSubstring("trailing"));
  REQUIRE_THROWS_WITH(read_tomoset(write_text("bad5", "TOMOSET 1 1 2 2\n1 nan\n3 4\n")),
                      Catch::Matchers::ContainsSubstring("non-finite"));
}

TEST_CASE("csv writer emits header plus quoted-free rows") {
  TempDir tmp;
  std::string path = tmp.file("t.csv");
  write_csv(path, {"a", "b"}, {{"1", "2"}, {"3.5", "x"}});
  REQUIRE(slurp(path) == "a,b\n1,2\n3.5,x\n");
}

TEST_CASE("pgm writer scales to 0..255 and records the range") {
  TempDir tmp;
  Grid g{2, 3};
  Image img{g, Vector(6)};
  img.values << -1.0, 0.0, 0.5, 1.0, 2.0, 3.0;
  std::string path = tmp.file("t.pgm");
  write_pgm(path, img);
  std::string text = slurp(path);
  REQUIRE(text.rfind("P2\n", 0) == 0);
  REQUIRE(text.find("2 3") == std::string::npos);  // width height order: "3 2"
  REQUIRE(text.find("3 2") != std::string::npos);
  REQUIRE(text.find("255") != std::string::npos);
  std::string meta = slurp(path + ".meta");
  REQUIRE(meta.find("min = -1") != std::string::npos);
  REQUIRE(meta.find("max = 3") != std::string::npos);
}

TEST_CASE("pgm writer handles constant images") {
  TempDir tmp;
  Grid g{2, 2};
  Image img{g, Vector::Constant(4, 7.0)};
  std::string path = tmp.file("c.pgm");
  REQUIRE_NOTHROW(write_pgm(path, img));
}

TEST_CASE("config parsing: comments, stripping, and typed access") {
  RunConfig cfg = RunConfig::parse_text(
      "# experiment settings\n"
      "alpha = 0.25   # inline comment\n"
      "workers=4\n"
      "name = box run\n"
      "\n",
      "inline");
  REQUIRE(cfg.get_double("alpha", 0.0) == 0.25);
  REQUIRE(cfg.get_int("workers", 0) == 4);
  REQUIRE(cfg.get_string("name", "") == "box run");
  REQUIRE(cfg.get_double("absent", 1.5) == 1.5);
}

TEST_CASE("config parsing rejects malformed input with location") {
  REQUIRE_THROWS_WITH(RunConfig::parse_text("novalue\n", "t"),
                      Catch::Matchers::ContainsSubstring("t:1"));
  RunConfig cfg2 = RunConfig::parse_text("n = 2.5\n", "t");
  REQUIRE_THROWS_AS(cfg2.get_int("n", 0), std::invalid_argument);
  RunConfig cfg3 = RunConfig::parse_text("x = abc\n", "t");
  REQUIRE_THROWS_AS(cfg3.get_double("x", 0.0), std::invalid_argument);
}

TEST_CASE("config rejects unknown keys by name") {
  RunConfig cfg = RunConfig::parse_text("alpha = 1\nbogus_key = 2\n", "t");
  REQUIRE_THROWS_WITH(cfg.restrict_keys({"alpha"}),
                      Catch::Matchers::ContainsSubstring("bogus_key"));
}

TEST_CASE("g17 formatting round-trips doubles") {
  for (double v : {0.1, 1.0 / 3.0, 1e-17, 123456.789012345678, -0.0}) {
    std::string s = fmt_g17(v);
    REQUIRE(std::stod(s) == v);
  }
}
