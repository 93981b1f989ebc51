#include "nsdp/cli.hpp"

#include "nsdp/diagnostics.hpp"
#include "nsdp/problems.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

namespace nsdp {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

std::string log10_field(double v) {
  if (!std::isfinite(v)) return fmt17(v);
  if (v <= 0.0) return "-inf";
  return fmt17(std::log10(v));
}

ojson vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

ojson mat_json(const SymMat& m) {
  ojson rows = ojson::array();
  for (Index r = 0; r < m.dim(); ++r) {
    std::vector<double> row;
    for (Index c = 0; c < m.dim(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

ojson point_json(const PrimalDualPoint& v) {
  return {{"x", vec_json(v.x)}, {"y", vec_json(v.y)}, {"Z", mat_json(v.Z)}};
}

ojson rate_json(const RateSummary& r) {
  ojson o;
  o["classification"] = std::string(to_string(r.classification));
  o["window"] = {{"lo", RateWindow{}.lo}, {"hi", RateWindow{}.hi}};
  o["window_size"] = r.window_size;
  o["sigma_proxy"] = r.sigma_proxy;
  o["linear_ratios"] = r.linear_ratios;
  o["quadratic_ratios"] = r.quadratic_ratios;
  o["quadratic_spread"] = std::isfinite(r.quadratic_spread) ? ojson(r.quadratic_spread) : ojson(nullptr);
  return o;
}

ojson solver_config_json(const SolverConfig& cfg) {
  ojson o;
  o["tol_sigma"] = cfg.tol_sigma;
  o["max_iters"] = cfg.max_iters;
  o["hessian_mode"] = std::string(to_string(cfg.hessian_mode));
  o["perturbation"] = {{"scale", cfg.perturbation.scale}, {"exponent", cfg.perturbation.exponent}};
  o["nu"] = cfg.nu ? ojson(*cfg.nu) : ojson(nullptr);
  const auto& s = cfg.subproblem;
  ojson sub;
  sub["tolerance"] = s.tolerance ? ojson(*s.tolerance) : ojson("max(1e-12, 1e-4*sigma^2)");
  sub["max_newton_iters"] = s.max_newton_iters;
  sub["stall_window"] = s.stall_window;
  sub["armijo_slope"] = s.armijo_slope;
  sub["backtrack"] = s.backtrack;
  sub["initial_damping"] = s.initial_damping;
  sub["max_splitting_iters"] = s.max_splitting_iters;
  sub["max_ball_iters"] = s.max_ball_iters;
  sub["convexify"] = s.convexify;
  o["subproblem"] = std::move(sub);
  o["seed"] = cfg.seed;
  return o;
}

std::optional<PerturbationSchedule> parse_schedule(const std::string& text, HessianMode& mode) {
  PerturbationSchedule sched;
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const auto parsed = parse_hessian_mode(head);
  if (!parsed) return std::nullopt;
  mode = *parsed;
  if (colon != std::string::npos) {
    if (mode != HessianMode::perturbed) return std::nullopt;
    try {
      std::size_t used = 0;
      const std::string tail = text.substr(colon + 1);
      sched.exponent = std::stod(tail, &used);
      if (used != tail.size() || !(sched.exponent > 0.0)) return std::nullopt;
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  return sched;
}

std::string resolve_out_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return "nsdp-out";
}

struct ResolvedProblem {
  ProblemSpec spec;
  std::string source;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

ResolvedProblem resolve_problem(const std::string& name) {
  if (const ProblemSpec* s = find_problem(name)) return {*s, "registry"};
  if (fs::exists(name)) return {load_problem(name), name};
  std::string known;
  for (const auto& id : registry_ids()) known += (known.empty() ? "" : ", ") + id;
  throw UsageError("unknown problem '" + name + "' (known ids: " + known + "; or pass a problem file path)");
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : sep) + p;
  return out;
}

int exit_code_for(SolveStatus s) {
  switch (s) {
    case SolveStatus::kkt_reached: return 0;
    case SolveStatus::max_iters: return 2;
    case SolveStatus::subproblem_failure: return 3;
  }
  return 3;
}

std::uint64_t run_seed(std::uint64_t base, std::size_t problem, std::size_t radius, int trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(problem), static_cast<std::uint32_t>(radius),
                    static_cast<std::uint32_t>(trial)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

PrimalDualPoint perturbed_start(const ProblemSpec& spec, double r, std::uint64_t seed) {
  const PrimalDualPoint& vstar = spec.reference->v;
  if (r == 0.0) return vstar;
  std::mt19937_64 rng(seed);
  return vstar + random_perturbation(spec.n, spec.m, spec.d, r, rng);
}

struct SolveOptions {
  std::string problem;
  std::vector<double> x0, y0, z0;
  std::optional<double> perturb;
  std::uint64_t seed = 0;
  std::string hessian = "exact";
  double eps_scale = 1.0;
  double tol = 1e-10;
  int max_iters = 50;
  std::optional<double> nu;
  std::optional<double> sub_tol;
  bool convexify = false;
  std::string out;
};

SolverConfig make_config(const std::string& hessian, double eps_scale, double tol, int max_iters,
                         std::optional<double> nu, std::optional<double> sub_tol, bool convexify,
                         std::uint64_t seed) {
  SolverConfig cfg;
  auto sched = parse_schedule(hessian, cfg.hessian_mode);
  if (!sched) throw UsageError("invalid --hessian '" + hessian + "' (exact, fd, perturbed or perturbed:<exponent>)");
  cfg.perturbation = *sched;
  cfg.perturbation.scale = eps_scale;
  cfg.tol_sigma = tol;
  cfg.max_iters = max_iters;
  cfg.nu = nu;
  cfg.subproblem.tolerance = sub_tol;
  cfg.subproblem.convexify = convexify;
  cfg.seed = seed;
  try {
    cfg.validate();
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

int cmd_solve(const SolveOptions& o, std::ostream& out, std::ostream& err) {
  const ResolvedProblem rp = resolve_problem(o.problem);
  const ProblemSpec& spec = rp.spec;
  const PolynomialProblem prob(spec);
  const SolverConfig cfg =
      make_config(o.hessian, o.eps_scale, o.tol, o.max_iters, o.nu, o.sub_tol, o.convexify, o.seed);

  const bool explicit_start = !o.x0.empty() || !o.y0.empty() || !o.z0.empty();
  if (explicit_start && o.perturb) throw UsageError("--perturb cannot be combined with --x0/--y0/--Z0");
  if (!explicit_start && !o.perturb) throw UsageError("give a starting point: --x0 [--y0 --Z0] or --perturb r");

  ojson start;
  PrimalDualPoint v0;
  if (o.perturb) {
    if (!spec.reference) throw UsageError("--perturb needs a stored reference point; problem '" + spec.id + "' has none");
    if (!(*o.perturb >= 0.0)) throw UsageError("--perturb must be nonnegative");
    v0 = perturbed_start(spec, *o.perturb, o.seed);
    start = {{"mode", "perturb"}, {"radius", *o.perturb}, {"seed", o.seed}};
  } else {
    if (static_cast<Index>(o.x0.size()) != spec.n)
      throw UsageError("--x0 needs " + std::to_string(spec.n) + " values");
    v0.x = Eigen::Map<const Vec>(o.x0.data(), spec.n);
    if (o.y0.empty()) {
      v0.y = Vec::Zero(spec.m);
    } else if (static_cast<Index>(o.y0.size()) == spec.m) {
      v0.y = Eigen::Map<const Vec>(o.y0.data(), spec.m);
    } else {
      throw UsageError("--y0 needs " + std::to_string(spec.m) + " values");
    }
    if (o.z0.empty()) {
      v0.Z = SymMat::zero(spec.d);
    } else if (static_cast<Index>(o.z0.size()) == spec.d * spec.d) {
      Mat z = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          o.z0.data(), spec.d, spec.d);
      if (z != z.transpose())
        throw UsageError("--Z0 must be symmetric");
      v0.Z = SymMat(z);
    } else {
      throw UsageError("--Z0 needs " + std::to_string(spec.d * spec.d) + " values (row-major)");
    }
    start = {{"mode", "explicit"}};
  }
  start["v0"] = point_json(v0);

  std::optional<PrimalDualPoint> vstar;
  if (spec.reference) vstar = spec.reference->v;
  const SolveReport rep = run(prob, v0, cfg, vstar);

  const std::string dir = resolve_out_dir(o.out);
  fs::create_directories(dir);
  write_file_atomic((fs::path(dir) / "iterations.csv").string(), iterations_csv(rep));

  ojson doc;
  doc["tool"] = "nsdp solve";
  doc["csv_schema"] = kIterationsCsvHeader;
  doc["problem"] = {{"id", spec.id}, {"source", rp.source}, {"n", spec.n}, {"m", spec.m}, {"d", spec.d}};
  doc["start"] = std::move(start);
  doc["config"] = solver_config_json(cfg);
  doc["status"] = std::string(to_string(rep.status));
  doc["iterations"] = static_cast<int>(rep.history.size()) - 1;
  doc["final_sigma"] = rep.history.back().sigma;
  doc["final_error"] = rep.history.back().err ? ojson(*rep.history.back().err) : ojson(nullptr);
  doc["final_point"] = point_json(rep.final_point);
  doc["rate"] = rate_json(rep.rate);
  write_file_atomic((fs::path(dir) / "report.json").string(), doc.dump(2) + "\n");

  out << "problem " << spec.id << ": " << to_string(rep.status) << " after " << rep.history.size() - 1
      << " iterations, sigma = " << fmt_short(rep.history.back().sigma) << "\n";
  out << "   k       sigma         err   ratio e+/e  ratio e+/e^2\n";
  for (std::size_t k = 0; k < rep.history.size(); ++k) {
    const auto& r = rep.history[k];
    const double e = r.err.value_or(r.sigma);
    std::string lin = "-", quad = "-";
    if (k + 1 < rep.history.size()) {
      const double en = rep.history[k + 1].err.value_or(rep.history[k + 1].sigma);
      lin = fmt_short(en / e);
      quad = fmt_short(en / (e * e));
    }
    char line[160];
    std::snprintf(line, sizeof line, "%4d  %10.3e  %10s  %11s  %12s\n", r.k, r.sigma,
                  r.err ? fmt_short(*r.err).c_str() : "-", lin.c_str(), quad.c_str());
    out << line;
  }
  out << "rate: " << to_string(rep.rate.classification) << (rep.rate.sigma_proxy ? " (sigma proxy)" : "")
      << "\nartifacts: " << dir << "\n";
  if (rep.status == SolveStatus::subproblem_failure) err << "subproblem solve failed at the last iteration\n";
  return exit_code_for(rep.status);
}

// ---------------------------------------------------------------------------

struct BenchOptions {
  std::string suite = "all";
  std::vector<double> radii = {1e-1};
  int trials = 5;
  std::uint64_t seed = 0;
  std::string hessian = "exact";
  double eps_scale = 1.0;
  double tol = 1e-12;
  int max_iters = 50;
  unsigned jobs = 0;
  std::string out;
};

struct BenchRun {
  std::size_t problem = 0;
  std::size_t radius = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  SolveStatus status = SolveStatus::max_iters;
  int iterations = 0;
  RateSummary rate;
  std::string csv_name;
};

int class_rank(RateClass c) {
  switch (c) {
    case RateClass::quadratic: return 4;
    case RateClass::superlinear: return 3;
    case RateClass::linear: return 2;
    case RateClass::none: return 1;
    case RateClass::insufficient_data: return 0;
  }
  return 0;
}

int cmd_bench(const BenchOptions& o, std::ostream& out, std::ostream& err) {
  std::vector<const ProblemSpec*> selected;
  for (const auto& s : registry()) {
    if (o.suite == "all" || s.id == o.suite || s.has_tag(o.suite)) selected.push_back(&s);
  }
  if (selected.empty()) throw UsageError("suite '" + o.suite + "' selects no problems");
  if (o.radii.empty()) throw UsageError("--radii must list at least one radius");
  for (double r : o.radii)
    if (!(r > 0.0)) throw UsageError("--radii must be positive");
  if (o.trials < 1) throw UsageError("--trials must be at least 1");
  const SolverConfig cfg = make_config(o.hessian, o.eps_scale, o.tol, o.max_iters, std::nullopt,
                                       std::nullopt, false, o.seed);

  std::vector<BenchRun> runs;
  for (std::size_t p = 0; p < selected.size(); ++p)
    for (std::size_t r = 0; r < o.radii.size(); ++r)
      for (int t = 0; t < o.trials; ++t) {
        BenchRun b;
        b.problem = p;
        b.radius = r;
        b.trial = t;
        b.seed = run_seed(o.seed, p, r, t);
        char name[256];
        std::snprintf(name, sizeof name, "%s_r%zu_t%d.csv", selected[p]->id.c_str(), r, t);
        b.csv_name = name;
        runs.push_back(std::move(b));
      }

  const std::string dir = resolve_out_dir(o.out);
  const fs::path run_dir = fs::path(dir) / "runs";
  fs::create_directories(run_dir);

  std::vector<std::unique_ptr<PolynomialProblem>> problems;
  for (const auto* s : selected) problems.push_back(std::make_unique<PolynomialProblem>(*s));

  std::atomic<std::size_t> next{0};
  std::vector<std::string> errors(runs.size());
  auto worker = [&]() {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      BenchRun& b = runs[i];
      try {
        const ProblemSpec& spec = *selected[b.problem];
        const PrimalDualPoint v0 = perturbed_start(spec, o.radii[b.radius], b.seed);
        const SolveReport rep = run(*problems[b.problem], v0, cfg, spec.reference->v);
        b.status = rep.status;
        b.iterations = static_cast<int>(rep.history.size()) - 1;
        b.rate = rep.rate;
        write_file_atomic((run_dir / b.csv_name).string(), iterations_csv(rep));
      } catch (const std::exception& e) {
        b.status = SolveStatus::subproblem_failure;
        errors[i] = e.what();
      }
    }
  };
  unsigned jobs = o.jobs ? o.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, runs.size()));
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < runs.size(); ++i)
    if (!errors[i].empty()) err << "run " << runs[i].csv_name << " raised: " << errors[i] << "\n";

  std::ostringstream csv;
  csv << "problem,radius,trials,converged,median_iterations,rate_class,quadratic_trials,max_quadratic_ratio\n";
  out << "problem               radius      conv  med.it  rate           quad  max e+/e^2\n";
  bool failure = false;
  ojson groups = ojson::array();
  for (std::size_t p = 0; p < selected.size(); ++p) {
    for (std::size_t r = 0; r < o.radii.size(); ++r) {
      std::vector<const BenchRun*> grp;
      for (const auto& b : runs)
        if (b.problem == p && b.radius == r) grp.push_back(&b);
      int converged = 0, quadratic = 0;
      std::vector<int> iters;
      std::map<RateClass, int> tally;
      double max_quad = 0.0;
      ojson files = ojson::array();
      for (const auto* b : grp) {
        files.push_back({{"csv", "runs/" + b->csv_name},
                         {"seed", b->seed},
                         {"status", std::string(to_string(b->status))},
                         {"iterations", b->iterations},
                         {"rate_class", std::string(to_string(b->rate.classification))}});
        if (b->status == SolveStatus::kkt_reached) {
          ++converged;
          iters.push_back(b->iterations);
        }
        ++tally[b->rate.classification];
        if (b->rate.classification == RateClass::quadratic) ++quadratic;
        for (double q : b->rate.quadratic_ratios) max_quad = std::max(max_quad, q);
      }
      // Group class: most frequent measured class, the slower class on ties.
      RateClass group_class = RateClass::insufficient_data;
      int best_count = 0;
      for (const auto& [c, count] : tally) {
        if (c == RateClass::insufficient_data) continue;
        if (count > best_count || (count == best_count && class_rank(c) < class_rank(group_class))) {
          group_class = c;
          best_count = count;
        }
      }
      std::sort(iters.begin(), iters.end());
      const double median = iters.empty() ? std::nan("")
                            : iters.size() % 2 ? iters[iters.size() / 2]
                                               : 0.5 * (iters[iters.size() / 2 - 1] + iters[iters.size() / 2]);
      const bool gated = cfg.hessian_mode == HessianMode::exact && selected[p]->regular();
      // Runs that converge before four errors land in the window carry no
      // rate evidence either way; only a measured non-quadratic class fails.
      int measured_other = 0;
      for (const auto* b : grp)
        if (b->rate.classification != RateClass::quadratic &&
            b->rate.classification != RateClass::insufficient_data)
          ++measured_other;
      const bool ok = !gated || (converged == o.trials && measured_other == 0);
      failure = failure || !ok;
      csv << selected[p]->id << "," << fmt17(o.radii[r]) << "," << o.trials << "," << converged << ","
          << (iters.empty() ? "" : fmt17(median)) << "," << to_string(group_class) << "," << quadratic << ","
          << fmt17(max_quad) << "\n";
      char line[200];
      std::snprintf(line, sizeof line, "%-20s  %9.2e  %2d/%-2d  %6.1f  %-13s  %2d/%-2d  %10.3e%s\n",
                    selected[p]->id.c_str(), o.radii[r], converged, o.trials, median,
                    std::string(to_string(group_class)).c_str(), quadratic, o.trials, max_quad, ok ? "" : "  FAIL");
      out << line;
      groups.push_back({{"problem", selected[p]->id},
                        {"radius", o.radii[r]},
                        {"trials", o.trials},
                        {"converged", converged},
                        {"median_iterations", iters.empty() ? ojson(nullptr) : ojson(median)},
                        {"rate_class", std::string(to_string(group_class))},
                        {"quadratic_trials", quadratic},
                        {"max_quadratic_ratio", max_quad},
                        {"gated", gated},
                        {"passed", ok},
                        {"runs", files}});
    }
  }
  write_file_atomic((fs::path(dir) / "bench_summary.csv").string(), csv.str());

  ojson doc;
  doc["tool"] = "nsdp bench";
  doc["csv_schema"] = kIterationsCsvHeader;
  doc["suite"] = o.suite;
  doc["radii"] = o.radii;
  doc["trials"] = o.trials;
  doc["seed"] = o.seed;
  doc["config"] = solver_config_json(cfg);
  doc["groups"] = std::move(groups);
  doc["passed"] = !failure;
  write_file_atomic((fs::path(dir) / "bench_summary.json").string(), doc.dump(2) + "\n");
  out << "artifacts: " << dir << "\n";
  if (failure) err << "a problem tagged srcq+sosc failed to converge or measured a non-quadratic rate\n";
  return failure ? 2 : 0;
}

// ---------------------------------------------------------------------------

struct ProbeOptions {
  std::string problem;
  std::string what = "all";
  std::uint64_t seed = 0;
  int samples = 200;
  std::vector<double> radii = {1e-2, 1e-3, 1e-4};
  int dirs = 200;
  std::string out;
};

int cmd_probe(const ProbeOptions& o, std::ostream& out, std::ostream&) {
  const ResolvedProblem rp = resolve_problem(o.problem);
  const ProblemSpec& spec = rp.spec;
  if (!spec.reference)
    throw UsageError("probe needs a stored reference point (v*); problem '" + spec.id + "' has none");
  const bool all = o.what == "all";
  if (!all && o.what != "error-bound" && o.what != "spectrum" && o.what != "sosc")
    throw UsageError("--what must be error-bound, spectrum, sosc or all");
  const PolynomialProblem prob(spec);
  const PrimalDualPoint& vstar = spec.reference->v;

  ProbeReport rep;
  rep.problem_id = spec.id;
  rep.vstar = vstar;
  ojson doc;
  doc["tool"] = "nsdp probe";
  doc["problem"] = {{"id", spec.id}, {"source", rp.source}};
  doc["what"] = o.what;
  doc["seed"] = o.seed;
  doc["vstar"] = point_json(vstar);
  out << "problem " << spec.id << "\n";

  if (all || o.what == "error-bound") {
    rep.radii = error_bound_probe(prob, vstar, o.radii, o.samples, o.seed);
    ojson arr = ojson::array();
    out << "error bound (" << o.samples << " samples per radius)\n"
        << "    radius   min s/d    max s/d    min d/s    max d/s\n";
    for (const auto& r : rep.radii) {
      arr.push_back({{"radius", r.radius},
                     {"samples", r.samples},
                     {"min_sigma_over_dist", r.min_sigma_over_dist},
                     {"max_sigma_over_dist", r.max_sigma_over_dist},
                     {"min_dist_over_sigma", r.min_dist_over_sigma},
                     {"max_dist_over_sigma", r.max_dist_over_sigma}});
      char line[128];
      std::snprintf(line, sizeof line, "  %8.1e  %9.3e  %9.3e  %9.3e  %9.3e\n", r.radius, r.min_sigma_over_dist,
                    r.max_sigma_over_dist, r.min_dist_over_sigma, r.max_dist_over_sigma);
      out << line;
    }
    doc["error_bound"] = std::move(arr);
  }
  if (all || o.what == "spectrum") {
    rep.spectrum = complementarity_spectrum(prob, vstar);
    const auto& p = rep.spectrum->partition;
    doc["spectrum"] = {{"alpha", p.alpha.size()}, {"beta", p.beta.size()}, {"gamma", p.gamma.size()},
                       {"tol", p.tol},           {"fragile", p.fragile},  {"strict", rep.spectrum->strict}};
    out << "spectrum of X(x*) - Z*: |alpha| = " << p.alpha.size() << ", |beta| = " << p.beta.size()
        << ", |gamma| = " << p.gamma.size() << (rep.spectrum->strict ? " (strict complementarity)" : " (beta nonempty)")
        << (p.fragile ? ", fragile" : "") << "\n";
    if (spec.blocks) {
      const bool match = static_cast<Index>(p.alpha.size()) == spec.blocks->alpha &&
                         static_cast<Index>(p.beta.size()) == spec.blocks->beta &&
                         static_cast<Index>(p.gamma.size()) == spec.blocks->gamma;
      doc["spectrum"]["matches_declared"] = match;
      if (!match) rep.notes.push_back("spectrum differs from the declared block sizes");
    }
  }
  if (all || o.what == "sosc") {
    rep.sosc = sosc_probe(prob, vstar, o.dirs, o.seed);
    doc["sosc"] = {{"min_curvature", rep.sosc->min_curvature ? ojson(*rep.sosc->min_curvature) : ojson(nullptr)},
                   {"accepted", rep.sosc->accepted},
                   {"sampled", rep.sosc->sampled}};
    if (rep.sosc->min_curvature) {
      out << "second-order probe: min curvature " << fmt_short(*rep.sosc->min_curvature) << " over "
          << rep.sosc->accepted << " accepted directions\n";
    } else {
      rep.notes.push_back("no direction was accepted into the critical cone; second-order probe indeterminate");
      out << "second-order probe: indeterminate (no accepted directions)\n";
    }
  }
  doc["notes"] = rep.notes;

  const std::string dir = resolve_out_dir(o.out);
  fs::create_directories(dir);
  write_file_atomic((fs::path(dir) / "probe.json").string(), doc.dump(2) + "\n");
  out << "artifacts: " << dir << "\n";
  return 0;
}

int cmd_list(std::ostream& out) {
  for (const auto& s : registry()) {
    out << s.id << "  (n=" << s.n << ", m=" << s.m << ", d=" << s.d << ")  tags: " << join(s.tags, ",") << "\n";
  }
  return 0;
}

}  // namespace

std::string iterations_csv(const SolveReport& report) {
  std::ostringstream os;
  os << kIterationsCsvHeader << "\n" << kIterationsCsvColumns << "\n";
  for (const auto& r : report.history) {
    os << r.k << "," << fmt17(r.sigma) << "," << log10_field(r.sigma) << ",";
    if (r.err) os << fmt17(*r.err) << "," << log10_field(*r.err);
    else os << ",";
    os << "," << (r.norm_delta ? fmt17(*r.norm_delta) : "") << "," << r.sizes.alpha << "," << r.sizes.beta
       << "," << r.sizes.gamma << ",";
    if (r.step) {
      os << r.step->newton_iters + r.step->fallback_iters << "," << fmt17(r.step->kkt_res) << ","
         << to_string(r.step->status);
    } else {
      os << ",,";
    }
    os << "\n";
  }
  return os.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << content;
    f.flush();
    if (!f) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stabilized SQSDP solver for nonlinear semidefinite programs"};
  app.require_subcommand(1);

  SolveOptions so;
  auto* solve = app.add_subcommand("solve", "Solve a registry problem or a problem file");
  solve->add_option("problem", so.problem, "Registry id or path to a problem file")->required();
  solve->add_option("--x0", so.x0, "Initial x (comma separated)")->delimiter(',');
  solve->add_option("--y0", so.y0, "Initial y (comma separated, default 0)")->delimiter(',');
  solve->add_option("--Z0", so.z0, "Initial Z, row-major (comma separated, default 0)")->delimiter(',');
  solve->add_option("--perturb", so.perturb, "Start at v* plus a random perturbation of this sum-norm");
  solve->add_option("--seed", so.seed, "Seed for --perturb")->capture_default_str();
  solve->add_option("--hessian", so.hessian, "exact | fd | perturbed | perturbed:<exponent>")->capture_default_str();
  solve->add_option("--eps-scale", so.eps_scale, "Scale of the perturbed-Hessian shift")->capture_default_str();
  solve->add_option("--tol", so.tol, "Termination threshold on sigma")->capture_default_str();
  solve->add_option("--max-iters", so.max_iters, "Iteration limit")->capture_default_str();
  solve->add_option("--nu", so.nu, "Step-length ball radius");
  solve->add_option("--sub-tol", so.sub_tol, "Fixed subproblem tolerance");
  solve->add_flag("--convexify", so.convexify, "Shift H to be positive definite in subproblems");
  solve->add_option("--out", so.out, "Output directory (default $NSDP_OUT_DIR or nsdp-out)");

  BenchOptions bo;
  auto* bench = app.add_subcommand("bench", "Run the rate benchmark over registry problems");
  bench->add_option("--suite", bo.suite, "all, a tag, or a problem id")->capture_default_str();
  bench->add_option("--radii", bo.radii, "Start radii (comma separated)")->delimiter(',')->capture_default_str();
  bench->add_option("--trials", bo.trials, "Trials per problem and radius")->capture_default_str();
  bench->add_option("--seed", bo.seed, "Base seed")->capture_default_str();
  bench->add_option("--hessian", bo.hessian, "exact | fd | perturbed | perturbed:<exponent>")->capture_default_str();
  bench->add_option("--eps-scale", bo.eps_scale, "Scale of the perturbed-Hessian shift")->capture_default_str();
  bench->add_option("--tol", bo.tol, "Termination threshold on sigma")->capture_default_str();
  bench->add_option("--max-iters", bo.max_iters, "Iteration limit")->capture_default_str();
  bench->add_option("--jobs", bo.jobs, "Worker threads (0 = hardware concurrency)")->capture_default_str();
  bench->add_option("--out", bo.out, "Output directory (default $NSDP_OUT_DIR or nsdp-out)");

  ProbeOptions po;
  auto* probe = app.add_subcommand("probe", "Error-bound, spectrum and second-order probes at v*");
  probe->add_option("problem", po.problem, "Registry id or path to a problem file")->required();
  probe->add_option("--what", po.what, "error-bound | spectrum | sosc | all")->capture_default_str();
  probe->add_option("--seed", po.seed, "Sampling seed")->capture_default_str();
  probe->add_option("--samples", po.samples, "Error-bound samples per radius")->capture_default_str();
  probe->add_option("--radii", po.radii, "Error-bound radii (comma separated)")->delimiter(',')->capture_default_str();
  probe->add_option("--dirs", po.dirs, "Sampled directions for the second-order probe")->capture_default_str();
  probe->add_option("--out", po.out, "Output directory (default $NSDP_OUT_DIR or nsdp-out)");

  app.add_subcommand("list", "List registry problems");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*solve) return cmd_solve(so, out, err);
    if (*bench) return cmd_bench(bo, out, err);
    if (*probe) return cmd_probe(po, out, err);
    return cmd_list(out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    err << "error: problem file: " << e.what() << "\n";
    return 1;
  } catch (const VerificationError& e) {
    err << "error: reference verification: " << e.what() << "\n";
    return 1;
  } catch (const ContractError& e) {
    err << "error: invalid input: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "error: output: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace nsdp
