// Command-line front end: dataset generation and design-optimization
// experiments for constrained tomographic reconstruction.
//
// Subcommands: generate, landscape, oed-a, oed-b, alpha-sweep.
// Common flags: --config PATH (key=value file; flags override), --out,
// --workers (default from OEDTOMO_WORKERS), --seed.
// Exit codes: 0 success, 2 usage error, 3 numerical failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <oedtomo/oedtomo.hpp>

namespace fs = std::filesystem;
using namespace oedtomo;

namespace {

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    size_t a = tok.find_first_not_of(" \t");
    size_t b = tok.find_last_not_of(" \t");
    if (a == std::string::npos) continue;
    tok = tok.substr(a, b - a + 1);
    try {
      size_t pos = 0;
      double v = std::stod(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument("trailing");
      out.push_back(v);
    } catch (const std::exception&) {
      throw std::invalid_argument(what + ": cannot parse number '" + tok + "'");
    }
  }
  if (out.empty()) throw std::invalid_argument(what + ": empty list");
  return out;
}

ConstraintKind constraint_from_name(const std::string& name) {
  if (name == "unconstrained") return ConstraintKind::Unconstrained;
  if (name == "equality") return ConstraintKind::EqualitySum;
  if (name == "nonneg") return ConstraintKind::NonNegative;
  if (name == "box") return ConstraintKind::Box;
  throw std::invalid_argument("unknown constraint '" + name +
                              "' (expected unconstrained|equality|nonneg|box)");
}

TrainingSet load_training_set(const std::string& path) {
  TrainingSet ts = read_tomoset(path);
  if (ts.count() < 1) throw std::invalid_argument("dataset '" + path + "' is empty");
  return ts;
}

void ensure_out_dir(const std::string& dir) {
  if (dir.empty()) throw std::invalid_argument("--out directory is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::invalid_argument("cannot create output directory '" + dir + "'");
}

std::string join_angles(const std::vector<double>& angles) {
  std::string s;
  for (size_t i = 0; i < angles.size(); ++i) {
    if (i) s += ";";
    s += fmt_g17(angles[i]);
  }
  return s;
}

// Per-command state shared by the config-file merge: a flag wins when given
// on the command line, otherwise the config value, otherwise the default.
struct Merge {
  RunConfig cfg;
  bool loaded = false;
  std::set<std::string> allowed;

  void load(const std::string& path) {
    if (path.empty()) return;
    cfg = RunConfig::parse_file(path);
    cfg.restrict_keys(allowed);
    loaded = true;
  }
  void str(const CLI::Option* opt, std::string& slot, const std::string& key) const {
    if (opt->count() == 0 && loaded && cfg.has(key)) slot = cfg.get_string(key, slot);
  }
  void num(const CLI::Option* opt, double& slot, const std::string& key) const {
    if (opt->count() == 0 && loaded && cfg.has(key)) slot = cfg.get_double(key, slot);
  }
  void integer(const CLI::Option* opt, int& slot, const std::string& key) const {
    if (opt->count() == 0 && loaded && cfg.has(key)) slot = cfg.get_int(key, slot);
  }
  void uint64(const CLI::Option* opt, std::uint64_t& slot, const std::string& key) const {
    if (opt->count() == 0 && loaded && cfg.has(key))
      slot = static_cast<std::uint64_t>(cfg.get_double(key, static_cast<double>(slot)));
  }
};

struct ExperimentArgs {
  std::string config_path, data_path, out_dir, constraint_name = "unconstrained";
  double alpha = 1e-2;
  double noise_level = 1e-3;
  std::uint64_t seed = 424242;
  int workers = 0;  // 0 = resolve from OEDTOMO_WORKERS / hardware
  int n_rays = 0;
  int outer_iters = 100;
  double outer_tol = 1e-6;
  double box_lo = 0.0, box_hi = 1.0;

  CLI::Option *o_config = nullptr, *o_data = nullptr, *o_out = nullptr, *o_constraint = nullptr,
              *o_alpha = nullptr, *o_noise = nullptr, *o_seed = nullptr, *o_workers = nullptr,
              *o_nrays = nullptr, *o_oiters = nullptr, *o_otol = nullptr, *o_blo = nullptr,
              *o_bhi = nullptr;

  void attach(CLI::App* app) {
    o_config = app->add_option("--config", config_path, "key=value config file; flags override");
    o_data = app->add_option("--data", data_path, "TOMOSET training-set file");
    o_out = app->add_option("--out,-o", out_dir, "output directory");
    o_constraint = app->add_option("--constraint", constraint_name,
                                   "unconstrained|equality|nonneg|box");
    o_alpha = app->add_option("--alpha", alpha, "regularization weight");
    o_noise = app->add_option("--noise-level", noise_level, "relative noise level");
    o_seed = app->add_option("--seed", seed, "noise seed");
    o_workers = app->add_option("--workers", workers, "worker threads (0 = auto)");
    o_nrays = app->add_option("--n-rays", n_rays, "detector count (0 = grid width)");
    o_oiters = app->add_option("--outer-iters", outer_iters, "outer iteration cap");
    o_otol = app->add_option("--outer-tol", outer_tol, "outer stationarity tolerance");
    o_blo = app->add_option("--box-lo", box_lo, "box lower bound");
    o_bhi = app->add_option("--box-hi", box_hi, "box upper bound");
  }
  std::set<std::string> config_keys() const {
    return {"data", "out", "constraint", "alpha", "noise_level", "seed",
            "workers", "n_rays", "outer_iters", "outer_tol", "box_lo", "box_hi"};
  }
  void merge(Merge& m) {
    m.str(o_data, data_path, "data");
    m.str(o_out, out_dir, "out");
    m.str(o_constraint, constraint_name, "constraint");
    m.num(o_alpha, alpha, "alpha");
    m.num(o_noise, noise_level, "noise_level");
    m.uint64(o_seed, seed, "seed");
    m.integer(o_workers, workers, "workers");
    m.integer(o_nrays, n_rays, "n_rays");
    m.integer(o_oiters, outer_iters, "outer_iters");
    m.num(o_otol, outer_tol, "outer_tol");
    m.num(o_blo, box_lo, "box_lo");
    m.num(o_bhi, box_hi, "box_hi");
  }
  OedConfig to_config() const {
    OedConfig c;
    c.alpha = alpha;
    c.constraint = constraint_from_name(constraint_name);
    c.box_lo = box_lo;
    c.box_hi = box_hi;
    c.noise_level = noise_level;
    c.noise_seed = seed;
    c.n_rays = n_rays;
    c.workers = resolve_workers(workers);
    c.outer.max_iter = outer_iters;
    c.outer.tol = outer_tol;
    return c;
  }
  TrainingSet dataset() const {
    if (data_path.empty()) throw std::invalid_argument("--data is required");
    return load_training_set(data_path);
  }
};

Image image_from_vector(const Grid& grid, const Vector& v) {
  Image img{grid, v};
  return img;
}

// ---------------------------------------------------------------- generate

int run_generate(const std::string& dataset, int count, int size, std::uint64_t seed,
                 const std::string& out_path) {
  if (out_path.empty()) throw std::invalid_argument("generate: output path is required");
  Grid grid{size, size};
  TrainingSet ts = generate_dataset(dataset, count, grid, seed);
  write_tomoset(out_path, ts);
  double lo = 0, hi = 0;
  for (int i = 0; i < ts.count(); ++i) {
    const Vector& v = ts.images[static_cast<size_t>(i)].values;
    if (i == 0) {
      lo = v.minCoeff();
      hi = v.maxCoeff();
    } else {
      lo = std::min(lo, v.minCoeff());
      hi = std::max(hi, v.maxCoeff());
    }
  }
  std::printf("generated %s: count=%d grid=%dx%d min=%s max=%s -> %s\n", dataset.c_str(),
              ts.count(), grid.height, grid.width, fmt_g17(lo).c_str(), fmt_g17(hi).c_str(),
              out_path.c_str());
  return 0;
}

// ---------------------------------------------------------------- landscape

int run_landscape(ExperimentArgs& args, const std::string& mode_name, double step,
                  double sigma) {
  TrainingSet ts = args.dataset();
  ensure_out_dir(args.out_dir);
  ScanMode mode;
  if (mode_name == "bayes")
    mode = ScanMode::Bayes;
  else if (mode_name == "empirical")
    mode = ScanMode::Empirical;
  else
    throw std::invalid_argument("unknown mode '" + mode_name + "' (expected bayes|empirical)");

  OedConfig cfg = args.to_config();
  ScanResult res = landscape_scan(ts, cfg, step, mode, sigma);

  std::vector<std::vector<std::string>> rows;
  rows.reserve(res.rows.size());
  for (const ScanRow& r : res.rows)
    rows.push_back({fmt_g17(r.p1), fmt_g17(r.p2), fmt_g17(r.value)});
  write_csv(args.out_dir + "/landscape.csv", {"p1_deg", "p2_deg", "objective"}, rows);

  // Heatmap over the full square, filled symmetrically from the triangle.
  int K = static_cast<int>(std::lround(180.0 / step)) + 1;
  Grid hgrid{K, K};
  Image heat{hgrid, Vector::Zero(hgrid.n())};
  for (const ScanRow& r : res.rows) {
    int i = static_cast<int>(std::lround(r.p1 / step));
    int j = static_cast<int>(std::lround(r.p2 / step));
    heat.at(i, j) = r.value;
    heat.at(j, i) = r.value;
  }
  write_pgm(args.out_dir + "/landscape.pgm", heat);

  // Two best designs.
  std::vector<const ScanRow*> order;
  for (const ScanRow& r : res.rows) order.push_back(&r);
  std::sort(order.begin(), order.end(),
            [](const ScanRow* a, const ScanRow* b) { return a->value < b->value; });
  std::printf("landscape (%s, step %s deg): %zu cells\n", mode_name.c_str(),
              fmt_g17(step).c_str(), res.rows.size());
  for (size_t i = 0; i < order.size() && i < 2; ++i)
    std::printf("  best[%zu]: p1=%s p2=%s objective=%s\n", i, fmt_g17(order[i]->p1).c_str(),
                fmt_g17(order[i]->p2).c_str(), fmt_g17(order[i]->value).c_str());
  return 0;
}

// ---------------------------------------------------------------- oed-a

int run_oed_a(ExperimentArgs& args, double grid_step, double beta,
              const std::string& beta_sweep_list, double support_threshold) {
  TrainingSet ts = args.dataset();
  ensure_out_dir(args.out_dir);
  if (!(grid_step > 0) || grid_step >= 180)
    throw std::invalid_argument("oed-a: grid step must be in (0, 180)");
  std::vector<double> angles;
  for (double a = 0; a < 180.0 - 1e-9; a += grid_step) angles.push_back(a);

  OedConfig cfg = args.to_config();
  cfg.support_threshold = support_threshold;

  if (!beta_sweep_list.empty()) {
    std::vector<double> betas = parse_double_list(beta_sweep_list, "beta-sweep");
    std::vector<BetaRow> rows = beta_sweep(ts, angles, cfg, betas);
    std::vector<std::vector<std::string>> csv;
    for (const BetaRow& r : rows)
      csv.push_back({fmt_g17(r.beta), std::to_string(r.support_size), fmt_g17(r.mse),
                     join_angles(r.support_angles)});
    write_csv(args.out_dir + "/beta_sweep.csv",
              {"beta", "support_size", "mse_per_pixel", "support_angles_deg"}, csv);
    std::printf("oed-a beta sweep: %zu runs on %zu angles\n", rows.size(), angles.size());
    for (const BetaRow& r : rows)
      std::printf("  beta=%s -> |support|=%d mse=%s angles=%s\n", fmt_g17(r.beta).c_str(),
                  r.support_size, fmt_g17(r.mse).c_str(), join_angles(r.support_angles).c_str());
    return 0;
  }

  cfg.beta = beta;
  OedResult res = solve_oed_a(ts, angles, cfg);

  std::vector<std::vector<std::string>> design;
  for (size_t k = 0; k < angles.size(); ++k)
    design.push_back({fmt_g17(angles[k]), fmt_g17(res.p_opt[static_cast<Eigen::Index>(k)])});
  write_csv(args.out_dir + "/design.csv", {"angle_deg", "weight"}, design);
  write_csv(args.out_dir + "/result.csv",
            {"beta", "support_size", "mse_per_pixel", "objective", "iterations", "converged"},
            {{fmt_g17(beta), std::to_string(res.support.size()), fmt_g17(res.mse),
              fmt_g17(res.objective), std::to_string(res.iterations),
              res.converged ? "1" : "0"}});

  // Sample reconstructions at the optimized design: truth / estimate / error.
  EmpiricalObjectiveA obj(ts, angles, cfg);
  int n_show = std::min(4, ts.count());
  for (int i = 0; i < n_show; ++i) {
    Vector f_hat = obj.reconstruct(res.p_opt, i);
    const Vector& f_true = ts.images[static_cast<size_t>(i)].values;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s/truth_%02d.pgm", args.out_dir.c_str(), i);
    write_pgm(buf, image_from_vector(ts.grid, f_true));
    std::snprintf(buf, sizeof(buf), "%s/recon_%02d.pgm", args.out_dir.c_str(), i);
    write_pgm(buf, image_from_vector(ts.grid, f_hat));
    std::snprintf(buf, sizeof(buf), "%s/error_%02d.pgm", args.out_dir.c_str(), i);
    write_pgm(buf, image_from_vector(ts.grid, (f_hat - f_true).cwiseAbs()));
  }

  std::printf("oed-a: beta=%s support=%zu mse_per_pixel=%s\n", fmt_g17(beta).c_str(),
              res.support.size(), fmt_g17(res.mse).c_str());
  std::printf("  support angles: %s\n", join_angles(res.support_angles).c_str());
  return 0;
}

// ---------------------------------------------------------------- oed-b

int run_oed_b(ExperimentArgs& args, int ell, int starts,
              const std::vector<std::string>& explicit_starts) {
  TrainingSet ts = args.dataset();
  ensure_out_dir(args.out_dir);
  if (ell < 1) throw std::invalid_argument("oed-b: --ell must be >= 1");
  OedConfig cfg = args.to_config();

  std::vector<std::vector<double>> start_list;
  if (!explicit_starts.empty()) {
    for (const std::string& s : explicit_starts) {
      std::vector<double> a = parse_double_list(s, "start");
      if (static_cast<int>(a.size()) != ell)
        throw std::invalid_argument("oed-b: start '" + s + "' does not have " +
                                    std::to_string(ell) + " angles");
      for (double v : a)
        if (v < 0 || v > 180)
          throw std::invalid_argument("oed-b: start angle " + fmt_g17(v) +
                                      " outside [0, 180]");
      start_list.push_back(std::move(a));
    }
  } else {
    if (starts < 1) throw std::invalid_argument("oed-b: --starts must be >= 1");
    Rng rng(cfg.noise_seed ^ 0x5EEDBA5EULL);
    for (int s = 0; s < starts; ++s) {
      Rng sr = rng.fork(static_cast<std::uint64_t>(s));
      std::vector<double> a(static_cast<size_t>(ell));
      for (int k = 0; k < ell; ++k) a[static_cast<size_t>(k)] = sr.uniform(0.0, 180.0);
      std::sort(a.begin(), a.end());
      start_list.push_back(std::move(a));
    }
  }

  std::vector<std::vector<std::string>> csv;
  int best = -1;
  double best_obj = 0;
  std::vector<OedResult> results;
  for (size_t s = 0; s < start_list.size(); ++s) {
    OedResult r = solve_oed_b(ts, start_list[s], cfg);
    csv.push_back({std::to_string(s), fmt_g17(r.objective), fmt_g17(r.mse),
                   std::to_string(r.iterations), r.converged ? "1" : "0",
                   join_angles(r.support_angles)});
    if (best < 0 || r.objective < best_obj) {
      best = static_cast<int>(s);
      best_obj = r.objective;
    }
    results.push_back(std::move(r));
  }
  write_csv(args.out_dir + "/oed_b.csv",
            {"start_index", "objective", "mse_per_pixel", "iterations", "converged",
             "angles_deg"},
            csv);
  const OedResult& rb = results[static_cast<size_t>(best)];
  write_csv(args.out_dir + "/best_design.csv", {"angle_deg"},
            [&] {
              std::vector<std::vector<std::string>> rows;
              for (double a : rb.support_angles) rows.push_back({fmt_g17(a)});
              return rows;
            }());
  std::printf("oed-b: ell=%d starts=%zu best_start=%d objective=%s mse_per_pixel=%s\n", ell,
              start_list.size(), best, fmt_g17(rb.objective).c_str(), fmt_g17(rb.mse).c_str());
  std::printf("  best angles: %s\n", join_angles(rb.support_angles).c_str());
  return 0;
}

// ---------------------------------------------------------------- alpha-sweep

int run_alpha_sweep(ExperimentArgs& args, const std::string& design,
                    const std::string& constraints, double amin, double amax, int acount) {
  TrainingSet ts = args.dataset();
  ensure_out_dir(args.out_dir);
  std::vector<double> angles = parse_double_list(design, "design");
  std::vector<ConstraintKind> kinds;
  {
    std::stringstream ss(constraints);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (!tok.empty()) kinds.push_back(constraint_from_name(tok));
    }
  }
  if (kinds.empty()) throw std::invalid_argument("alpha-sweep: no constraints given");
  if (acount < 1 || !(amin > 0) || !(amax >= amin))
    throw std::invalid_argument("alpha-sweep: need 0 < alpha-min <= alpha-max, count >= 1");
  std::vector<double> alphas(static_cast<size_t>(acount));
  for (int j = 0; j < acount; ++j)
    alphas[static_cast<size_t>(j)] =
        acount == 1 ? amin
                    : std::pow(10.0, std::log10(amin) +
                                         (std::log10(amax) - std::log10(amin)) * j / (acount - 1));

  OedConfig cfg = args.to_config();
  std::vector<AlphaRow> rows = alpha_sweep(ts, angles, cfg, alphas, kinds);
  std::vector<std::vector<std::string>> csv;
  for (const AlphaRow& r : rows)
    csv.push_back({fmt_g17(r.alpha), r.constraint, fmt_g17(r.mse)});
  write_csv(args.out_dir + "/alpha_sweep.csv", {"alpha", "constraint", "mse_per_pixel"}, csv);
  std::printf("alpha-sweep: %zu rows (%d alphas x %zu constraints) at design %s\n", rows.size(),
              acount, kinds.size(), design.c_str());
  for (ConstraintKind k : kinds) {
    const AlphaRow* best = nullptr;
    for (const AlphaRow& r : rows)
      if (r.constraint == constraint_name(k) && (!best || r.mse < best->mse)) best = &r;
    if (best)
      std::printf("  %s: best mse_per_pixel=%s at alpha=%s\n", best->constraint.c_str(),
                  fmt_g17(best->mse).c_str(), fmt_g17(best->alpha).c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained tomography design optimization"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "write a synthetic TOMOSET training set");
  std::string g_config, g_dataset, g_out;
  int g_count = 20, g_size = 40;
  std::uint64_t g_seed = 1;
  auto* g_o_config = gen->add_option("--config", g_config, "key=value config file");
  auto* g_o_dataset =
      gen->add_option("dataset,--dataset", g_dataset, "rectangles|pentagons|shapes|phantom");
  auto* g_o_count = gen->add_option("--count", g_count, "number of images");
  auto* g_o_size = gen->add_option("--size", g_size, "grid side length");
  auto* g_o_seed = gen->add_option("--seed", g_seed, "generator seed");
  auto* g_o_out = gen->add_option("--out,-o", g_out, "output TOMOSET path");

  // landscape
  auto* land = app.add_subcommand("landscape", "two-angle objective scan");
  ExperimentArgs land_args;
  land_args.attach(land);
  std::string l_mode = "empirical";
  double l_step = 5.0, l_sigma = 1.0;
  auto* l_o_mode = land->add_option("--mode", l_mode, "bayes|empirical");
  auto* l_o_step = land->add_option("--step", l_step, "scan step in degrees");
  auto* l_o_sigma = land->add_option("--sigma", l_sigma, "noise std for bayes mode");

  // oed-a
  auto* oa = app.add_subcommand("oed-a", "weighted-angle design with l1 sparsification");
  ExperimentArgs oa_args;
  oa_args.attach(oa);
  double a_grid_step = 10.0, a_beta = 1e-4, a_support_threshold = 1e-3;
  std::string a_beta_sweep;
  auto* a_o_step = oa->add_option("--grid-step", a_grid_step, "angle grid step in degrees");
  auto* a_o_beta = oa->add_option("--beta", a_beta, "l1 design penalty");
  auto* a_o_sweep = oa->add_option("--beta-sweep", a_beta_sweep,
                                   "comma list of betas; runs the sweep instead");
  auto* a_o_thresh =
      oa->add_option("--support-threshold", a_support_threshold, "phase-1 support cut");

  // oed-b
  auto* ob = app.add_subcommand("oed-b", "free-angle design (fixed count)");
  ExperimentArgs ob_args;
  ob_args.attach(ob);
  int b_ell = 2, b_starts = 10;
  std::vector<std::string> b_start_list;
  auto* b_o_ell = ob->add_option("--ell", b_ell, "number of angles");
  auto* b_o_starts = ob->add_option("--starts", b_starts, "number of random starts");
  ob->add_option("--start", b_start_list, "explicit start 'a1,a2,...' (repeatable)");

  // alpha-sweep
  auto* as = app.add_subcommand("alpha-sweep", "MSE vs regularization per constraint");
  ExperimentArgs as_args;
  as_args.attach(as);
  std::string s_design, s_constraints = "unconstrained,equality,nonneg,box";
  double s_amin = 1e-4, s_amax = 1e3;
  int s_acount = 20;
  auto* s_o_design = as->add_option("--design", s_design, "comma list of angles in degrees");
  auto* s_o_constraints = as->add_option("--constraints", s_constraints, "comma list");
  auto* s_o_amin = as->add_option("--alpha-min", s_amin, "smallest alpha");
  auto* s_o_amax = as->add_option("--alpha-max", s_amax, "largest alpha");
  auto* s_o_acount = as->add_option("--alpha-count", s_acount, "number of alphas");

  try {
    app.parse(argc, argv);

    if (gen->parsed()) {
      Merge m;
      m.allowed = {"dataset", "count", "size", "seed", "out"};
      m.load(g_config);
      m.str(g_o_dataset, g_dataset, "dataset");
      m.integer(g_o_count, g_count, "count");
      m.integer(g_o_size, g_size, "size");
      m.uint64(g_o_seed, g_seed, "seed");
      m.str(g_o_out, g_out, "out");
      if (g_dataset.empty()) throw std::invalid_argument("generate: --dataset is required");
      return run_generate(g_dataset, g_count, g_size, g_seed, g_out);
    }
    if (land->parsed()) {
      Merge m;
      m.allowed = land_args.config_keys();
      m.allowed.insert({"mode", "step", "sigma"});
      m.load(land_args.config_path);
      land_args.merge(m);
      m.str(l_o_mode, l_mode, "mode");
      m.num(l_o_step, l_step, "step");
      m.num(l_o_sigma, l_sigma, "sigma");
      return run_landscape(land_args, l_mode, l_step, l_sigma);
    }
    if (oa->parsed()) {
      Merge m;
      m.allowed = oa_args.config_keys();
      m.allowed.insert({"grid_step", "beta", "beta_sweep", "support_threshold"});
      m.load(oa_args.config_path);
      oa_args.merge(m);
      m.num(a_o_step, a_grid_step, "grid_step");
      m.num(a_o_beta, a_beta, "beta");
      m.str(a_o_sweep, a_beta_sweep, "beta_sweep");
      m.num(a_o_thresh, a_support_threshold, "support_threshold");
      return run_oed_a(oa_args, a_grid_step, a_beta, a_beta_sweep, a_support_threshold);
    }
    if (ob->parsed()) {
      Merge m;
      m.allowed = ob_args.config_keys();
      m.allowed.insert({"ell", "starts"});
      m.load(ob_args.config_path);
      ob_args.merge(m);
      m.integer(b_o_ell, b_ell, "ell");
      m.integer(b_o_starts, b_starts, "starts");
      return run_oed_b(ob_args, b_ell, b_starts, b_start_list);
    }
    if (as->parsed()) {
      Merge m;
      m.allowed = as_args.config_keys();
      m.allowed.insert({"design", "constraints", "alpha_min", "alpha_max", "alpha_count"});
      m.load(as_args.config_path);
      as_args.merge(m);
      m.str(s_o_design, s_design, "design");
      m.str(s_o_constraints, s_constraints, "constraints");
      m.num(s_o_amin, s_amin, "alpha_min");
      m.num(s_o_amax, s_amax, "alpha_max");
      m.integer(s_o_acount, s_acount, "alpha_count");
      if (s_design.empty()) throw std::invalid_argument("alpha-sweep: --design is required");
      return run_alpha_sweep(as_args, s_design, s_constraints, s_amin, s_amax, s_acount);
    }
    throw std::invalid_argument("no subcommand given");
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
