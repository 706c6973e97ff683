// Subprocess tests for the oedtomo command-line tool: flag and config
// handling, exit codes, emitted files, and run-to-run determinism.

#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using Catch::Matchers::ContainsSubstring;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

// Scratch directory removed when the test case ends.
struct TempDir {
  fs::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = fs::temp_directory_path() /
           ("oedtomo_cli_test_" + std::to_string(counter.fetch_add(1)));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string str(const std::string& name) const { return (path / name).string(); }
};

// Runs the tool with the given argument string, capturing exit code and both
// output streams.  `env_prefix` may carry VAR=value assignments.
RunResult run_cli(const TempDir& dir, const std::string& args,
                  const std::string& env_prefix = "") {
  static std::atomic<int> counter{0};
  int id = counter.fetch_add(1);
  fs::path out = dir.path / ("cap_out_" + std::to_string(id) + ".txt");
  fs::path err = dir.path / ("cap_err_" + std::to_string(id) + ".txt");
  std::string cmd;
  if (!env_prefix.empty()) cmd += env_prefix + " ";
  cmd += std::string("\"") + OEDTOMO_CLI_PATH + "\" " + args + " > \"" + out.string() +
         "\" 2> \"" + err.string() + "\"";
  int status = std::system(cmd.c_str());
  RunResult r;
  if (WIFEXITED(status)) r.exit_code = WEXITSTATUS(status);
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

// Small training set shared by the experiment subcommand tests.
std::string make_small_set(const TempDir& dir, const std::string& name = "small.tomoset") {
  RunResult r = run_cli(
      dir, "generate rectangles --count 2 --size 8 --seed 3 -o " + dir.str(name));
  REQUIRE(r.exit_code == 0);
  return dir.str(name);
}

}  // namespace

TEST_CASE("generate writes the documented header and identical bytes on rerun",
          "[cli][generate]") {
  TempDir dir;
  RunResult r = run_cli(
      dir, "generate rectangles --count 20 --size 40 --seed 7 -o " + dir.str("rect.tomoset"));
  REQUIRE(r.exit_code == 0);
  REQUIRE_THAT(r.out, ContainsSubstring("generated rectangles"));
  REQUIRE_THAT(r.out, ContainsSubstring("count=20"));

  std::string body = read_file(dir.str("rect.tomoset"));
  REQUIRE(body.substr(0, body.find('\n')) == "TOMOSET 1 20 40 40");

  RunResult r2 = run_cli(
      dir, "generate rectangles --count 20 --size 40 --seed 7 -o " + dir.str("rect2.tomoset"));
  REQUIRE(r2.exit_code == 0);
  REQUIRE(read_file(dir.str("rect2.tomoset")) == body);

  // The dataset can also be given as a flag instead of a positional.
  RunResult r3 = run_cli(dir, "generate --dataset rectangles --count 20 --size 40 --seed 7 -o " +
                                  dir.str("rect3.tomoset"));
  REQUIRE(r3.exit_code == 0);
  REQUIRE(read_file(dir.str("rect3.tomoset")) == body);
}

TEST_CASE("usage errors exit with code 2", "[cli][errors]") {
  TempDir dir;
  SECTION("grid too small for the dataset family") {
    RunResult r =
        run_cli(dir, "generate pentagons --count 2 --size 4 --seed 1 -o " + dir.str("x.tomoset"));
    REQUIRE(r.exit_code == 2);
    REQUIRE_THAT(r.err, ContainsSubstring("error:"));
  }
  SECTION("missing dataset name") {
    RunResult r = run_cli(dir, "generate --count 2 --size 8 -o " + dir.str("x.tomoset"));
    REQUIRE(r.exit_code == 2);
  }
  SECTION("missing output path") {
    RunResult r = run_cli(dir, "generate rectangles --count 2 --size 8");
    REQUIRE(r.exit_code == 2);
  }
  SECTION("unknown subcommand") {
    RunResult r = run_cli(dir, "frobnicate");
    REQUIRE(r.exit_code == 2);
  }
  SECTION("no subcommand") {
    RunResult r = run_cli(dir, "");
    REQUIRE(r.exit_code == 2);
  }
  SECTION("unknown flag") {
    RunResult r = run_cli(dir, "generate rectangles --does-not-exist 1");
    REQUIRE(r.exit_code == 2);
  }
}

TEST_CASE("missing dataset file is a usage error naming the path", "[cli][errors]") {
  TempDir dir;
  RunResult r = run_cli(dir, "landscape --data " + dir.str("nope.tomoset") +
                                 " --mode bayes --step 45 -o " + dir.str("out"));
  REQUIRE(r.exit_code == 2);
  REQUIRE_THAT(r.err, ContainsSubstring("cannot open"));
  REQUIRE_THAT(r.err, ContainsSubstring("nope.tomoset"));
}

TEST_CASE("unknown config keys are rejected by name", "[cli][config]") {
  TempDir dir;
  std::string data = make_small_set(dir);
  {
    std::ofstream cfg(dir.str("bad.cfg"));
    cfg << "alpha = 0.01\nbogus_key = 1\n";
  }
  RunResult r = run_cli(dir, "landscape --config " + dir.str("bad.cfg") + " --data " + data +
                                 " --mode bayes --step 45 -o " + dir.str("out"));
  REQUIRE(r.exit_code == 2);
  REQUIRE_THAT(r.err, ContainsSubstring("bogus_key"));
}

TEST_CASE("config file values apply and command-line flags override them",
          "[cli][config]") {
  TempDir dir;
  std::string data = make_small_set(dir);
  {
    std::ofstream cfg(dir.str("run.cfg"));
    cfg << "# scan settings\n"
        << "data = " << data << "\n"
        << "out = " << dir.str("cfg_out") << "\n"
        << "mode = bayes\n"
        << "step = 45\n";
  }

  // Everything from the file: 45-degree scan over the triangle has 15 cells.
  RunResult r = run_cli(dir, "landscape --config " + dir.str("run.cfg"));
  REQUIRE(r.exit_code == 0);
  REQUIRE(lines_of(read_file(dir.str("cfg_out") + "/landscape.csv")).size() == 1 + 15);

  // A flag beats the file: 90-degree step gives 6 cells.
  RunResult r2 = run_cli(dir, "landscape --config " + dir.str("run.cfg") + " --step 90 -o " +
                                  dir.str("cfg_out2"));
  REQUIRE(r2.exit_code == 0);
  REQUIRE(lines_of(read_file(dir.str("cfg_out2") + "/landscape.csv")).size() == 1 + 6);
}

TEST_CASE("landscape writes the scan table, heatmap, and best designs",
          "[cli][landscape]") {
  TempDir dir;
  std::string data = make_small_set(dir);
  RunResult r = run_cli(dir, "landscape --data " + data + " --mode bayes --step 45 -o " +
                                 dir.str("scan"));
  REQUIRE(r.exit_code == 0);
  REQUIRE_THAT(r.out, ContainsSubstring("best[0]"));
  REQUIRE_THAT(r.out, ContainsSubstring("best[1]"));

  std::vector<std::string> csv = lines_of(read_file(dir.str("scan") + "/landscape.csv"));
  REQUIRE(csv.size() == 1 + 15);
  REQUIRE(csv[0] == "p1_deg,p2_deg,objective");

  std::string pgm = read_file(dir.str("scan") + "/landscape.pgm");
  REQUIRE(pgm.substr(0, 3) == "P2\n");
  REQUIRE_THAT(pgm, ContainsSubstring("\n5 5\n255\n"));
  REQUIRE(fs::exists(dir.str("scan") + "/landscape.pgm.meta"));

  SECTION("invalid steps are usage errors") {
    REQUIRE(run_cli(dir, "landscape --data " + data + " --mode bayes --step 0 -o " +
                             dir.str("s0"))
                .exit_code == 2);
    REQUIRE(run_cli(dir, "landscape --data " + data + " --mode bayes --step 7 -o " +
                             dir.str("s7"))
                .exit_code == 2);
  }
  SECTION("unknown mode is a usage error") {
    REQUIRE(run_cli(dir, "landscape --data " + data + " --mode sideways --step 45 -o " +
                             dir.str("sx"))
                .exit_code == 2);
  }
}

TEST_CASE("scan output is byte-identical across runs and worker counts",
          "[cli][landscape][determinism]") {
  TempDir dir;
  std::string data = make_small_set(dir);
  std::string base = " --mode empirical --step 45 --constraint nonneg --data " + data;

  RunResult r1 = run_cli(dir, "landscape" + base + " --workers 1 -o " + dir.str("w1"));
  RunResult r4 = run_cli(dir, "landscape" + base + " --workers 4 -o " + dir.str("w4"));
  REQUIRE(r1.exit_code == 0);
  REQUIRE(r4.exit_code == 0);
  std::string csv1 = read_file(dir.str("w1") + "/landscape.csv");
  REQUIRE(csv1 == read_file(dir.str("w4") + "/landscape.csv"));

  // The environment variable supplies the default worker count.
  RunResult re = run_cli(dir, "landscape" + base + " -o " + dir.str("we"),
                         "OEDTOMO_WORKERS=4");
  REQUIRE(re.exit_code == 0);
  REQUIRE(read_file(dir.str("we") + "/landscape.csv") == csv1);
}

TEST_CASE("alpha sweep emits one row per alpha and constraint", "[cli][alpha-sweep]") {
  TempDir dir;
  std::string data = make_small_set(dir);
  RunResult r = run_cli(dir, "alpha-sweep --data " + data +
                                 " --design 0,90 --constraints unconstrained,box"
                                 " --alpha-min 0.01 --alpha-max 1 --alpha-count 3 -o " +
                                 dir.str("sweep"));
  REQUIRE(r.exit_code == 0);

  std::vector<std::string> csv = lines_of(read_file(dir.str("sweep") + "/alpha_sweep.csv"));
  REQUIRE(csv.size() == 1 + 6);
  REQUIRE(csv[0] == "alpha,constraint,mse_per_pixel");
  // Rows are alpha-major: both constraints appear before the next alpha.
  REQUIRE_THAT(csv[1], ContainsSubstring("unconstrained"));
  REQUIRE_THAT(csv[2], ContainsSubstring("box"));
  std::string a1 = csv[1].substr(0, csv[1].find(','));
  std::string a2 = csv[2].substr(0, csv[2].find(','));
  REQUIRE(a1 == a2);

  SECTION("a design is required") {
    REQUIRE(run_cli(dir, "alpha-sweep --data " + data + " -o " + dir.str("x")).exit_code == 2);
  }
  SECTION("unknown constraint name is a usage error") {
    REQUIRE(run_cli(dir, "alpha-sweep --data " + data +
                             " --design 0,90 --constraints sideways -o " + dir.str("x"))
                .exit_code == 2);
  }
}

TEST_CASE("oed-a writes the design table, summary, and reconstruction images",
          "[cli][oed-a]") {
  TempDir dir;
  std::string data = make_small_set(dir);
  RunResult r = run_cli(dir, "oed-a --data " + data +
                                 " --grid-step 45 --constraint box --beta 0.01"
                                 " --outer-iters 12 -o " +
                                 dir.str("a"));
  REQUIRE(r.exit_code == 0);
  REQUIRE_THAT(r.out, ContainsSubstring("support angles"));

  std::vector<std::string> design = lines_of(read_file(dir.str("a") + "/design.csv"));
  REQUIRE(design.size() == 1 + 4);  // angles 0, 45, 90, 135
  REQUIRE(design[0] == "angle_deg,weight");

  std::vector<std::string> result = lines_of(read_file(dir.str("a") + "/result.csv"));
  REQUIRE(result.size() == 1 + 1);
  REQUIRE(result[0] == "beta,support_size,mse_per_pixel,objective,iterations,converged");

  for (const std::string& stem : {"truth", "recon", "error"}) {
    REQUIRE(fs::exists(dir.str("a") + "/" + stem + "_00.pgm"));
    REQUIRE(fs::exists(dir.str("a") + "/" + stem + "_01.pgm"));
  }
}

TEST_CASE("over-regularized oed-a run exits with the numerical-failure code",
          "[cli][oed-a][errors]") {
  TempDir dir;
  std::string data = make_small_set(dir);
  RunResult r = run_cli(dir, "oed-a --data " + data +
                                 " --grid-step 45 --beta 1e6 --outer-iters 12 -o " +
                                 dir.str("a"));
  REQUIRE(r.exit_code == 3);
  REQUIRE_THAT(r.err, ContainsSubstring("numerical failure"));
}

TEST_CASE("oed-a beta sweep emits one row per beta", "[cli][oed-a]") {
  TempDir dir;
  std::string data = make_small_set(dir);
  RunResult r = run_cli(dir, "oed-a --data " + data +
                                 " --grid-step 45 --beta-sweep 0,0.01 --outer-iters 12 -o " +
                                 dir.str("bs"));
  REQUIRE(r.exit_code == 0);
  std::vector<std::string> csv = lines_of(read_file(dir.str("bs") + "/beta_sweep.csv"));
  REQUIRE(csv.size() == 1 + 2);
  REQUIRE(csv[0] == "beta,support_size,mse_per_pixel,support_angles_deg");
}

TEST_CASE("oed-b reports per-start rows and the best design", "[cli][oed-b]") {
  TempDir dir;
  std::string data = make_small_set(dir);
  RunResult r = run_cli(dir, "oed-b --data " + data +
                                 " --ell 2 --start 20.5,130.1 --outer-iters 12 -o " +
                                 dir.str("b"));
  REQUIRE(r.exit_code == 0);
  REQUIRE_THAT(r.out, ContainsSubstring("best angles"));

  std::vector<std::string> runs = lines_of(read_file(dir.str("b") + "/oed_b.csv"));
  REQUIRE(runs.size() == 1 + 1);
  REQUIRE(runs[0] ==
          "start_index,objective,mse_per_pixel,iterations,converged,angles_deg");

  std::vector<std::string> best = lines_of(read_file(dir.str("b") + "/best_design.csv"));
  REQUIRE(best.size() == 1 + 2);
  REQUIRE(best[0] == "angle_deg");

  SECTION("out-of-range start angles are usage errors") {
    REQUIRE(run_cli(dir, "oed-b --data " + data + " --ell 2 --start 20,200 -o " +
                             dir.str("x"))
                .exit_code == 2);
  }
  SECTION("start lists must match the angle count") {
    REQUIRE(run_cli(dir, "oed-b --data " + data + " --ell 3 --start 20,130 -o " +
                             dir.str("x"))
                .exit_code == 2);
  }
}
