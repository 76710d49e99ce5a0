#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "sfpe/io.hpp"
#include "sfpe/process.hpp"
#include "sfpe/stats.hpp"
#include "sfpe/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// exit codes: 0 ok, 2 config error, 3 numerical failure, 4 audit fail
constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kNumericalFailure = 3;
constexpr int kAuditFail = 4;

struct Globals {
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out_dir;

  fs::path resolve(const std::string& name) const {
    fs::path dir = out_dir;
    if (dir.empty()) dir = ".";
    fs::create_directories(dir);
    return dir / name;
  }
};

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const auto start = clock::now();
  return std::chrono::duration<double>(clock::now() - start).count();
}

sfpe::RunManifest start_manifest(const std::string& command, const Globals& g) {
  sfpe::RunManifest m;
  m.command = command;
  m.seed = g.seed;
  m.threads = g.threads;
  m.version = sfpe::kVersion;
  return m;
}

void finish_manifest(sfpe::RunManifest& m, const Globals& g, double t0) {
  m.wall_clock_s = now_seconds() - t0;
  sfpe::write_manifest(g.resolve(m.command + "_manifest.json"), m);
}

void add_output(sfpe::RunManifest& m, const fs::path& path) {
  m.outputs.emplace_back(path.filename().string(), sfpe::sha256_file(path));
}

json model_config_json(const std::string& model, const std::string& config_path) {
  if (!config_path.empty()) return sfpe::parse_json_file(config_path);
  if (model.empty()) throw sfpe::ConfigError("need --model or --config");
  // bare names get default parameters; anything else goes through a config file
  if (model == "urn_det") return {{"model", model}, {"a", 4}, {"b", 1}, {"c", 1}, {"d", 4}};
  if (model == "urn_rand") return {{"model", model}, {"p1", 0.9}, {"p2", 0.8}};
  if (model == "urn_multi")
    return {{"model", model},
            {"replacement", {{3, 1, 0}, {0, 3, 1}, {1, 0, 3}}},
            {"lambda", {2.5, 0.8660254037844386}}};
  return {{"model", model}};
}

// ---- solve --------------------------------------------------------------

struct SolveArgs {
  json model;
  std::int64_t n = 200000;
  int iters = 60;
  double tol = 0;  // 0 = auto (2x resampling floor)
  double p = 2;
  std::string out = "pools.bin";

  json to_json() const {
    return {{"subcommand", "solve"}, {"model", model}, {"n", n},
            {"iters", iters},        {"tol", tol},     {"p", p},
            {"out", out}};
  }
  static SolveArgs from_json(const json& j) {
    SolveArgs a;
    a.model = j.at("model");
    a.n = j.at("n").get<std::int64_t>();
    a.iters = j.at("iters").get<int>();
    a.tol = j.at("tol").get<double>();
    a.p = j.at("p").get<double>();
    a.out = j.at("out").get<std::string>();
    return a;
  }
};

int run_solve(const SolveArgs& args, const Globals& g, sfpe::RunManifest& manifest) {
  manifest.config = args.to_json();
  const sfpe::EquationSystem system = sfpe::system_from_json(args.model);
  sfpe::SolveOptions opts;
  opts.max_iters = args.iters;
  opts.tol = args.tol;
  opts.p = args.p;
  opts.threads = g.threads;
  sfpe::SolveResult result = sfpe::solve(system, args.n, g.seed, opts);

  const fs::path pools_path = g.resolve(args.out);
  sfpe::write_pools(pools_path, result.pools);
  add_output(manifest, pools_path);

  const fs::path diag_path = g.resolve(fs::path(args.out).stem().string() + "_diagnostics.json");
  {
    std::ofstream out(diag_path);
    out << sfpe::to_json(result.diagnostics).dump(2) << '\n';
  }
  add_output(manifest, diag_path);

  std::cout << "solve: " << (result.diagnostics.converged ? "converged" : "NOT converged")
            << " after " << result.diagnostics.iterations << " iterations -> "
            << pools_path.string() << "\n";
  return result.diagnostics.converged ? kOk : kNumericalFailure;
}

// ---- audit ----------------------------------------------------------------

struct AuditArgs {
  json model;
  std::string pools;  // optional
  std::int64_t draws = 100000;
  int lattice_directions = 16;
  std::string out = "audit.json";

  json to_json() const {
    return {{"subcommand", "audit"}, {"model", model}, {"pools", pools},
            {"draws", draws},        {"lattice_directions", lattice_directions},
            {"out", out}};
  }
  static AuditArgs from_json(const json& j) {
    AuditArgs a;
    a.model = j.at("model");
    a.pools = j.value("pools", "");
    a.draws = j.at("draws").get<std::int64_t>();
    a.lattice_directions = j.value("lattice_directions", 16);
    a.out = j.at("out").get<std::string>();
    return a;
  }
};

int run_audit(const AuditArgs& args, const Globals& g, sfpe::RunManifest& manifest) {
  manifest.config = args.to_json();
  const sfpe::EquationSystem system = sfpe::system_from_json(args.model);
  sfpe::SplitRng rng(g.seed);
  sfpe::AuditOptions opts;
  opts.threads = g.threads;

  bool any_fail = false;
  json per_equation = json::array();
  for (int r = 0; r < system.m(); ++r) {
    sfpe::SplitRng eq_rng = rng.fork(static_cast<std::uint64_t>(r));
    const sfpe::ConditionReport report =
        sfpe::audit_coefficients(system, r, args.draws, eq_rng, opts);
    any_fail = any_fail || !report.all_pass_or_inconclusive();
    json entry = sfpe::to_json(report);
    entry["equation"] = r;
    per_equation.push_back(std::move(entry));
  }

  json out_json = {{"model", args.model}, {"equations", per_equation}};
  if (!args.pools.empty()) {
    const auto pools = sfpe::read_pools(args.pools);
    json support = json::array(), lattice = json::array();
    for (std::size_t r = 0; r < pools.size(); ++r) {
      const sfpe::SupportAudit sa = sfpe::audit_support(pools[r]);
      any_fail = any_fail || sa.verdict == sfpe::Verdict::kFail;
      support.push_back(sfpe::to_json(sa));
      sfpe::SplitRng lat_rng = rng.fork(0x6c617400 + r);
      const sfpe::LatticeAudit la =
          sfpe::audit_lattice(pools[r], args.lattice_directions, lat_rng);
      any_fail = any_fail || la.verdict == sfpe::Verdict::kFail;
      lattice.push_back(sfpe::to_json(la));
    }
    out_json["support"] = support;
    out_json["lattice"] = lattice;
  }

  const fs::path out_path = g.resolve(args.out);
  {
    std::ofstream out(out_path);
    out << out_json.dump(2) << '\n';
  }
  add_output(manifest, out_path);
  std::cout << "audit: " << (any_fail ? "FAIL" : "ok") << " -> " << out_path.string() << "\n";
  return any_fail ? kAuditFail : kOk;
}

// ---- density ----------------------------------------------------------------

struct DensityArgs {
  std::string pools;
  std::string method = "fourier";
  int pool_index = 0;
  int points = 0;
  std::string out = "grid.csv";

  json to_json() const {
    return {{"subcommand", "density"}, {"pools", pools}, {"method", method},
            {"pool_index", pool_index}, {"points", points}, {"out", out}};
  }
  static DensityArgs from_json(const json& j) {
    DensityArgs a;
    a.pools = j.at("pools").get<std::string>();
    a.method = j.at("method").get<std::string>();
    a.pool_index = j.at("pool_index").get<int>();
    a.points = j.at("points").get<int>();
    a.out = j.at("out").get<std::string>();
    return a;
  }
};

int run_density(const DensityArgs& args, const Globals& g, sfpe::RunManifest& manifest) {
  manifest.config = args.to_json();
  const auto pools = sfpe::read_pools(args.pools);
  if (args.pool_index < 0 || args.pool_index >= static_cast<int>(pools.size()))
    throw sfpe::ConfigError("pool index out of range");
  const sfpe::SamplePool& pool = pools[static_cast<std::size_t>(args.pool_index)];

  sfpe::DensityGrid grid;
  if (args.method == "fourier") {
    const auto axes = sfpe::auto_frequency_axes(pool, args.points);
    const sfpe::CharFunGrid cf = sfpe::ecf(pool, axes, g.threads);
    grid = sfpe::invert(cf, sfpe::Taper::kHann);
  } else if (args.method == "kde") {
    int points = args.points > 0 ? args.points : (pool.dim() == 1 ? 512 : 128);
    std::vector<sfpe::GridAxis> axes;
    for (int k = 0; k < pool.dim(); ++k) {
      const double lo = pool.values.row(k).minCoeff();
      const double hi = pool.values.row(k).maxCoeff();
      const double pad = 0.05 * (hi - lo) + 1e-9;
      sfpe::GridAxis ax;
      ax.min = lo - pad;
      ax.step = (hi - lo + 2 * pad) / (points - 1);
      ax.n = points;
      axes.push_back(ax);
    }
    grid = sfpe::kde(pool, 0.0, axes, g.threads);
  } else {
    throw sfpe::ConfigError("density method must be 'fourier' or 'kde'");
  }

  const fs::path csv_path = g.resolve(args.out);
  sfpe::write_density_csv(csv_path, grid);
  add_output(manifest, csv_path);
  const fs::path sidecar = g.resolve(fs::path(args.out).stem().string() + "_density.json");
  {
    std::ofstream out(sidecar);
    out << sfpe::to_json(grid).dump(2) << '\n';
  }
  add_output(manifest, sidecar);
  std::cout << "density: total mass " << grid.total_mass() << " -> " << csv_path.string() << "\n";
  return kOk;
}

// ---- simulate ----------------------------------------------------------------

struct SimulateArgs {
  json process;
  std::int64_t n = 10000;
  int runs = 10000;
  std::string out = "samples.csv";

  json to_json() const {
    return {{"subcommand", "simulate"}, {"process", process}, {"n", n}, {"runs", runs},
            {"out", out}};
  }
  static SimulateArgs from_json(const json& j) {
    SimulateArgs a;
    a.process = j.at("process");
    a.n = j.at("n").get<std::int64_t>();
    a.runs = j.at("runs").get<int>();
    a.out = j.at("out").get<std::string>();
    return a;
  }
};

sfpe::ProcessConfig process_from_json(const json& j) {
  const std::string name = j.at("process").get<std::string>();
  if (name == "quicksort_cmp") return sfpe::ProcessConfig::quicksort_cmp();
  if (name == "quicksort_cmp_xch") return sfpe::ProcessConfig::quicksort_cmp_xch();
  if (name == "rrt_pathlen") return sfpe::ProcessConfig::rrt_pathlen();
  if (name == "polya_det") {
    const auto rows = j.value("replacement", std::vector<std::vector<int>>{{4, 1}, {1, 4}});
    Eigen::MatrixXi r(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t k = 0; k < rows[i].size(); ++k)
        r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    auto init = j.value("init", std::vector<std::int64_t>{1, 0});
    return sfpe::ProcessConfig::polya_det(std::move(r), std::move(init));
  }
  if (name == "polya_rand")
    return sfpe::ProcessConfig::polya_rand(j.value("p1", 0.9), j.value("p2", 0.8),
                                           j.value("init", std::vector<std::int64_t>{1, 0}));
  if (name == "split_pathlen" || name == "split_pathlen_wiener") {
    const int b = j.value("b", 2), s = j.value("s", 1);
    const int s0 = j.value("s0", 1), s1 = j.value("s1", 1);
    sfpe::SplitVectorLaw law = sfpe::SplitVectorLaw::binary_uniform();
    if (b != 2) law = sfpe::SplitVectorLaw::dirichlet(b, j.value("alpha", 1.0));
    if (name == "split_pathlen") return sfpe::ProcessConfig::split_pathlen(b, s, s0, s1, law);
    return sfpe::ProcessConfig::split_pathlen_wiener(b, s, s0, s1, law);
  }
  throw sfpe::ConfigError("unknown process: " + name);
}

int run_simulate(const SimulateArgs& args, const Globals& g, sfpe::RunManifest& manifest) {
  manifest.config = args.to_json();
  const sfpe::ProcessConfig config = process_from_json(args.process);
  sfpe::SplitRng rng(g.seed);
  const Eigen::MatrixXd samples =
      sfpe::scaled_batch(config, args.n, args.runs, rng, true, g.threads);
  const fs::path out_path = g.resolve(args.out);
  sfpe::write_samples_csv(out_path, samples);
  add_output(manifest, out_path);
  std::cout << "simulate: " << args.runs << " runs -> " << out_path.string() << "\n";
  return kOk;
}

// ---- compare ----------------------------------------------------------------

struct CompareArgs {
  std::string pools;
  std::string samples;
  int pool_index = 0;
  int component = 0;
  std::string out = "compare.json";

  json to_json() const {
    return {{"subcommand", "compare"}, {"pools", pools},       {"samples", samples},
            {"pool_index", pool_index}, {"component", component}, {"out", out}};
  }
  static CompareArgs from_json(const json& j) {
    CompareArgs a;
    a.pools = j.at("pools").get<std::string>();
    a.samples = j.at("samples").get<std::string>();
    a.pool_index = j.at("pool_index").get<int>();
    a.component = j.at("component").get<int>();
    a.out = j.at("out").get<std::string>();
    return a;
  }
};

int run_compare(const CompareArgs& args, const Globals& g, sfpe::RunManifest& manifest) {
  manifest.config = args.to_json();
  const auto pools = sfpe::read_pools(args.pools);
  if (args.pool_index < 0 || args.pool_index >= static_cast<int>(pools.size()))
    throw sfpe::ConfigError("pool index out of range");
  const auto& pool = pools[static_cast<std::size_t>(args.pool_index)];
  const Eigen::MatrixXd samples = sfpe::read_samples_csv(args.samples);
  if (args.component < 0 || args.component >= samples.rows())
    throw sfpe::ConfigError("sample component out of range");
  if (pool.dim() != 1)
    throw sfpe::ConfigError("compare requires one-dimensional pools");

  std::vector<double> a(pool.values.data(), pool.values.data() + pool.size());
  std::vector<double> b(samples.row(args.component).begin(), samples.row(args.component).end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double ks = sfpe::ks_statistic(a, b);

  // l1 between equal-size quantile-thinned versions
  const std::size_t k = std::min(a.size(), b.size());
  auto thin = [k](const std::vector<double>& v) {
    std::vector<double> out(k);
    for (std::size_t i = 0; i < k; ++i)
      out[i] = v[i * v.size() / k + v.size() / (2 * k)];
    return out;
  };
  const std::vector<double> ta = thin(a), tb = thin(b);
  const double l1 = sfpe::wasserstein_1d(ta, tb, 1);

  // density sup estimated from a KDE peak on the pool
  sfpe::GridAxis ax;
  ax.min = a.front();
  ax.n = 256;
  ax.step = (a.back() - a.front()) / (ax.n - 1);
  const sfpe::DensityGrid kde_grid = sfpe::kde(pool, 0.0, {ax}, g.threads);
  const double f_sup = kde_grid.values.maxCoeff();
  const double bound = sfpe::ks_rate_bound(l1, f_sup, 1);

  json out_json = {{"ks", ks},        {"l1", l1},
                   {"f_sup", f_sup},  {"ks_rate_bound", bound},
                   {"bound_holds", ks <= bound}};
  const fs::path out_path = g.resolve(args.out);
  {
    std::ofstream out(out_path);
    out << out_json.dump(2) << '\n';
  }
  add_output(manifest, out_path);
  std::cout << "compare: ks = " << ks << ", bound = " << bound << " -> " << out_path.string()
            << "\n";
  return kOk;
}

// ---- replay ----------------------------------------------------------------

int dispatch(const std::string& subcommand, const json& config, const Globals& g,
             sfpe::RunManifest& manifest) {
  if (subcommand == "solve") return run_solve(SolveArgs::from_json(config), g, manifest);
  if (subcommand == "audit") return run_audit(AuditArgs::from_json(config), g, manifest);
  if (subcommand == "density") return run_density(DensityArgs::from_json(config), g, manifest);
  if (subcommand == "simulate") return run_simulate(SimulateArgs::from_json(config), g, manifest);
  if (subcommand == "compare") return run_compare(CompareArgs::from_json(config), g, manifest);
  throw sfpe::ConfigError("manifest subcommand unknown: " + subcommand);
}

int run_replay(const std::string& manifest_path, Globals g) {
  const sfpe::RunManifest recorded = sfpe::read_manifest(manifest_path);
  Globals replay_globals = g;
  replay_globals.seed = recorded.seed;
  replay_globals.threads = recorded.threads;
  fs::path dir = g.out_dir.empty() ? fs::path("replay") : fs::path(g.out_dir) / "replay";
  replay_globals.out_dir = dir.string();

  sfpe::RunManifest fresh = start_manifest(recorded.command, replay_globals);
  const double t0 = now_seconds();
  dispatch(recorded.command, recorded.config, replay_globals, fresh);
  finish_manifest(fresh, replay_globals, t0);

  bool ok = true;
  for (const auto& [name, digest] : recorded.outputs) {
    const auto it = std::find_if(fresh.outputs.begin(), fresh.outputs.end(),
                                 [&](const auto& o) { return o.first == name; });
    const bool match = it != fresh.outputs.end() && it->second == digest;
    std::cout << (match ? "  match   " : "  MISMATCH ") << name << "\n";
    ok = ok && match;
  }
  std::cout << "replay: " << (ok ? "all digests reproduced" : "digest mismatch") << "\n";
  return ok ? kOk : kNumericalFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stochastic fixed-point equation toolkit"};
  app.require_subcommand(1);

  Globals globals;
  if (const char* env = std::getenv("SFPE_OUT_DIR")) globals.out_dir = env;
  app.add_option("--seed", globals.seed, "master seed")->capture_default_str();
  app.add_option("--threads", globals.threads, "worker threads")->capture_default_str();
  app.add_option("--out-dir", globals.out_dir, "output directory (env SFPE_OUT_DIR)");

  std::string model, config_path;

  auto* solve = app.add_subcommand("solve", "solve a system on empirical pools");
  SolveArgs solve_args;
  solve->add_option("--model", model, "zoo model name");
  solve->add_option("--config", config_path, "model config JSON file");
  solve->add_option("--n", solve_args.n, "pool size")->capture_default_str();
  solve->add_option("--iters", solve_args.iters, "max iterations")->capture_default_str();
  solve->add_option("--tol", solve_args.tol, "convergence tolerance (0 = auto noise floor)")
      ->capture_default_str();
  solve->add_option("--p", solve_args.p, "metric order")->capture_default_str();
  solve->add_option("--out", solve_args.out, "pools output file")->capture_default_str();

  auto* audit = app.add_subcommand("audit", "audit coefficient and pool conditions");
  AuditArgs audit_args;
  audit->add_option("--model", model, "zoo model name");
  audit->add_option("--config", config_path, "model config JSON file");
  audit->add_option("--pools", audit_args.pools, "solved pools for support/lattice audits");
  audit->add_option("--draws", audit_args.draws, "coefficient draws")->capture_default_str();
  audit->add_option("--out", audit_args.out, "report file")->capture_default_str();

  auto* density = app.add_subcommand("density", "estimate a density from pools");
  DensityArgs density_args;
  density->add_option("--pools", density_args.pools, "pools file")->required();
  density->add_option("--method", density_args.method, "fourier|kde")->capture_default_str();
  density->add_option("--pool-index", density_args.pool_index, "equation index")
      ->capture_default_str();
  density->add_option("--points", density_args.points, "grid points per axis (0 = default)");
  density->add_option("--out", density_args.out, "grid CSV")->capture_default_str();

  auto* simulate = app.add_subcommand("simulate", "simulate a discrete process");
  SimulateArgs sim_args;
  std::string process_name;
  simulate->add_option("--model", process_name, "process name");
  simulate->add_option("--config", config_path, "process config JSON file");
  simulate->add_option("--n", sim_args.n, "process size")->capture_default_str();
  simulate->add_option("--runs", sim_args.runs, "number of runs")->capture_default_str();
  simulate->add_option("--out", sim_args.out, "samples CSV")->capture_default_str();

  auto* compare = app.add_subcommand("compare", "compare pools against simulated samples");
  CompareArgs compare_args;
  compare->add_option("--pools", compare_args.pools, "pools file")->required();
  compare->add_option("--samples", compare_args.samples, "samples CSV")->required();
  compare->add_option("--pool-index", compare_args.pool_index, "equation index")
      ->capture_default_str();
  compare->add_option("--component", compare_args.component, "sample component")
      ->capture_default_str();
  compare->add_option("--out", compare_args.out, "report file")->capture_default_str();

  auto* models = app.add_subcommand("models", "list models and parameters");
  auto* replay = app.add_subcommand("replay", "re-run a manifest and verify digests");
  std::string manifest_path;
  replay->add_option("manifest", manifest_path, "manifest file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (models->parsed()) {
      std::cout << sfpe::models_help();
      return kOk;
    }
    if (replay->parsed()) return run_replay(manifest_path, globals);

    sfpe::RunManifest manifest = start_manifest(app.get_subcommands().front()->get_name(), globals);
    const double t0 = now_seconds();
    int code = kOk;
    if (solve->parsed()) {
      solve_args.model = model_config_json(model, config_path);
      code = run_solve(solve_args, globals, manifest);
    } else if (audit->parsed()) {
      audit_args.model = model_config_json(model, config_path);
      code = run_audit(audit_args, globals, manifest);
    } else if (density->parsed()) {
      code = run_density(density_args, globals, manifest);
    } else if (simulate->parsed()) {
      if (!config_path.empty()) {
        sim_args.process = sfpe::parse_json_file(config_path);
      } else if (!process_name.empty()) {
        sim_args.process = {{"process", process_name}};
      } else {
        throw sfpe::ConfigError("need --model or --config");
      }
      code = run_simulate(sim_args, globals, manifest);
    } else if (compare->parsed()) {
      code = run_compare(compare_args, globals, manifest);
    }
    finish_manifest(manifest, globals, t0);
    return code;
  } catch (const sfpe::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::domain_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericalFailure;
  }
}
