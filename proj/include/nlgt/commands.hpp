#pragma once

// Subcommand implementations behind the `nlgt` executable: building a problem
// from an ExperimentConfig, single runs with artifact output, bound reports
// and parameter sweeps.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "nlgt/config.hpp"
#include "nlgt/engine.hpp"
#include "nlgt/spectral.hpp"
#include "nlgt/svg.hpp"
#include "nlgt/svmlab.hpp"

namespace nlgt::cli {

namespace fs = std::filesystem;

// Exit codes, stable across subcommands.
enum ExitCode : int {
  exit_ok = 0,             // run converged / command succeeded
  exit_runtime = 1,        // IO or numerical failure
  exit_validation = 2,     // bad config or arguments
  exit_diverged = 3,       // state blew up
  exit_not_converged = 4,  // completed but missed a convergence tolerance
  exit_verify_failed = 5,  // verify found failing properties
};

// RNG stream layout under the experiment seed.
enum Stream : std::uint64_t {
  stream_data = 0,
  stream_partition = 1,
  stream_x0 = 2,
  stream_schedule_w = 3,
  stream_quadratic = 4,
  stream_schedule_a = 5,
};

struct Options {
  bool experimental_directed = false;
  unsigned jobs = 1;
};

inline LinkNonlinearity make_link(const LinkSpec& s) {
  if (s.kind == "identity") return LinkNonlinearity::identity();
  if (s.kind == "log_quantizer") return LinkNonlinearity::log_quantizer(s.rho);
  if (s.kind == "uniform_quantizer") return LinkNonlinearity::uniform_quantizer(s.rho);
  if (s.kind == "saturation") return LinkNonlinearity::saturation(s.limit);
  if (s.kind == "composite") return LinkNonlinearity::composite(make_link(*s.outer), make_link(*s.inner));
  throw InvalidInput("unknown link kind " + s.kind);
}

inline void set_rho(LinkSpec& s, double rho) {
  if (s.kind == "log_quantizer" || s.kind == "uniform_quantizer") s.rho = rho;
  if (s.outer) {
    s.outer = std::make_shared<LinkSpec>(*s.outer);
    set_rho(*s.outer, rho);
  }
  if (s.inner) {
    s.inner = std::make_shared<LinkSpec>(*s.inner);
    set_rho(*s.inner, rho);
  }
}

inline WeightedGraph make_graph(const NetworkSpec& s, std::size_t n, const Options& opt) {
  if (s.directed && !opt.experimental_directed) {
    throw ConfigError({"network.directed: directed networks need --experimental-directed"});
  }
  if (s.kind == "edge_list") {
    std::ifstream in(s.path);
    if (!in) throw std::runtime_error("cannot open edge list " + s.path);
    auto g = read_edge_list(in);
    if (g.size() != n) {
      throw ConfigError({"network.path: edge list has " + std::to_string(g.size()) + " nodes but there are " +
                         std::to_string(n) + " agents"});
    }
    if (!g.symmetric() && !opt.experimental_directed) {
      throw ConfigError({"network.path: directed edge list needs --experimental-directed"});
    }
    return g;
  }
  try {
    return make_khop_ring(n, s.khop, s.total_weight, s.directed);
  } catch (const InvalidInput& e) {
    throw ConfigError({std::string("network: ") + e.what()});
  }
}

inline SwitchingSchedule make_schedule(const NetworkSpec& s, std::size_t n, std::uint64_t seed, const Options& opt) {
  auto g = make_graph(s, n, opt);
  if (s.switch_mode == "fixed") return SwitchingSchedule::fixed(std::move(g));
  return SwitchingSchedule(std::move(g), s.switch_period, seed, SwitchMode::permute);
}

/// Everything a run needs, derived deterministically from the config.
struct Problem {
  ExperimentConfig config;
  CostModel model;
  Vector x0;
  Vector reference;  // minimizer of the global cost, in R^m
  std::optional<LabeledDataset> data;
  std::optional<Partition> parts;
  std::optional<OracleResult> oracle;
  SwitchingSchedule schedule_w;
  std::optional<SwitchingSchedule> schedule_a;
  LinkNonlinearity g_x;
  LinkNonlinearity g_y;
  SectorBounds sector;  // combined over both links
};

inline LabeledDataset load_data(const ExperimentConfig& c) {
  if (c.data.source == "csv") {
    std::ifstream in(c.data.path);
    if (!in) throw std::runtime_error("cannot open dataset " + c.data.path);
    return read_dataset_csv(in);
  }
  return generate_ellipse_data(c.data.n_points, mix_seed(c.seed, stream_data), c.data.radius, c.data.margin_gap);
}

inline Problem build_problem(const ExperimentConfig& c, const Options& opt) {
  const std::size_t n = c.partition.agents;
  std::optional<LabeledDataset> data;
  std::optional<Partition> parts;
  std::optional<OracleResult> oracle;
  std::vector<CostHandle> agents;
  Eigen::Index m = 0;
  Vector reference;
  if (c.cost.kind == "svm") {
    data = load_data(c);
    if (n > static_cast<std::size_t>(data->size())) throw ConfigError({"partition.agents: more agents than data points"});
    const auto mode = c.partition.mode == "contiguous" ? PartitionMode::contiguous : PartitionMode::stratified;
    parts = partition(*data, n, mode, mix_seed(c.seed, stream_partition));
    auto model = build_svm_model(*data, *parts, c.cost.c, c.cost.mu, c.cost.eps_nu);
    agents = model.agents();
    m = model.m();
    const auto reg = c.cost.regularizer == "literal" ? RegularizerMode::literal : RegularizerMode::matched;
    oracle = centralized_oracle(*data, c.cost.c, c.cost.mu, c.cost.eps_nu, c.cost.oracle_tol, reg_scale_for(reg, n));
    reference = oracle->classifier.as_decision();
  } else {
    m = static_cast<Eigen::Index>(c.cost.m);
    Rng rng(mix_seed(c.seed, stream_quadratic));
    Matrix q_sum = Matrix::Zero(m, m);
    Vector qb_sum = Vector::Zero(m);
    for (std::size_t i = 0; i < n; ++i) {
      Vector diag(m);
      Vector center(m);
      for (Eigen::Index k = 0; k < m; ++k) diag[k] = rng.uniform(c.cost.curvature_lo, c.cost.curvature_hi);
      for (Eigen::Index k = 0; k < m; ++k) center[k] = rng.uniform(c.cost.center_lo, c.cost.center_hi);
      const Matrix q = diag.asDiagonal();
      q_sum += q;
      qb_sum += q * center;
      agents.push_back(std::make_shared<QuadraticCost>(q, center));
    }
    reference = q_sum.ldlt().solve(qb_sum);
  }
  CostModel model(m, std::move(agents));

  Rng rng(mix_seed(c.seed, stream_x0));
  Vector x0(static_cast<Eigen::Index>(n) * m);
  for (Eigen::Index k = 0; k < x0.size(); ++k) x0[k] = rng.uniform(c.solver.x0_lo, c.solver.x0_hi);

  auto sw = make_schedule(c.network, n, mix_seed(c.seed, stream_schedule_w), opt);
  std::optional<SwitchingSchedule> sa;
  if (c.a_network) sa = make_schedule(*c.a_network, n, mix_seed(c.seed, stream_schedule_a), opt);

  const auto gx = make_link(c.nonlinearity.x);
  const auto gy = c.nonlinearity.y ? make_link(*c.nonlinearity.y) : gx;
  const Interval domain{c.nonlinearity.domain_lo, c.nonlinearity.domain_hi};
  const auto mode = c.nonlinearity.sector_mode == "tight" ? SectorMode::tight : SectorMode::linearized;
  const auto sector = combine_bounds(sector_bounds(gx, domain, mode), sector_bounds(gy, domain, mode));

  return Problem{c,  std::move(model), std::move(x0), std::move(reference), std::move(data), std::move(parts),
                 std::move(oracle), std::move(sw), std::move(sa), gx, gy, sector};
}

inline SolverConfig solver_config(const Problem& p) {
  const auto& s = p.config.solver;
  SolverConfig cfg(p.schedule_w);
  cfg.schedule_a = p.schedule_a;
  cfg.alpha = s.alpha;
  cfg.eta = s.eta;
  cfg.t_end = s.t_end;
  cfg.y_init = s.y_init == "zero" ? YInit::zero : YInit::gradient;
  cfg.integrator = s.integrator == "euler" ? Integrator::euler : Integrator::rk4;
  cfg.sample_stride = s.sample_stride;
  cfg.blowup = s.blowup;
  cfg.g_x = p.g_x;
  cfg.g_y = p.g_y;
  cfg.reference = p.reference;
  cfg.domain = p.sector.domain;
  return cfg;
}

inline Vector replicate(const Vector& v, std::size_t n) {
  Vector out(v.size() * static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) out.segment(static_cast<Eigen::Index>(i) * v.size(), v.size()) = v;
  return out;
}

// ---------------------------------------------------------------- bounds

struct BoundReport {
  SectorBounds sector;
  double gamma = 0.0;
  double lambda_under = 0.0;
  double lambda_max = 0.0;
  double eigen_ratio = 0.0;
  std::optional<StepSizeBounds> bounds;  // absent when kappa = 0
  std::string unavailable;
  double alpha = 0.0;
};

/// gamma is the larger Hessian infinity norm at x0 and at the consensus optimum.
inline BoundReport compute_bounds(const Problem& p) {
  BoundReport r;
  r.sector = p.sector;
  r.alpha = p.config.solver.alpha;
  const auto n = p.model.n();
  r.gamma = std::max(aggregate_hessian(p.model, p.x0).gamma, aggregate_hessian(p.model, replicate(p.reference, n)).gamma);
  auto sw = summarize_laplacian(laplacian(p.schedule_w.base_graph()).matrix());
  if (p.schedule_a) {
    const auto sa = summarize_laplacian(laplacian(p.schedule_a->base_graph()).matrix());
    sw.smallest_nonzero_real = std::min(sw.smallest_nonzero_real, sa.smallest_nonzero_real);
    sw.largest_modulus = std::max(sw.largest_modulus, sa.largest_modulus);
  }
  r.lambda_under = sw.smallest_nonzero_real;
  r.lambda_max = sw.largest_modulus;
  r.eigen_ratio = r.lambda_under > 0.0 ? r.lambda_max / r.lambda_under : std::numeric_limits<double>::infinity();
  if (!(r.sector.kappa > 0.0)) {
    r.unavailable = "link is not strongly sign-preserving (kappa = 0)";
  } else if (!(r.lambda_under > 0.0)) {
    r.unavailable = "network has a single node";
  } else {
    r.bounds = step_size_bounds(r.sector.kappa, r.sector.K, r.gamma, r.lambda_under, r.lambda_max, n,
                                static_cast<std::size_t>(p.model.m()));
    r.bounds->equal_graphs_assumed = !p.schedule_a;
  }
  return r;
}

inline std::string bound_report_text(const BoundReport& r) {
  std::ostringstream os;
  auto kv = [&](const char* k, const std::string& v) { os << k << ": " << v << '\n'; };
  auto yes = [](bool b) { return std::string(b ? "yes" : "no"); };
  kv("kappa", fmt_double(r.sector.kappa));
  kv("K", fmt_double(r.sector.K));
  kv("sector_ratio", fmt_double(r.sector.ratio()));
  kv("sector_mode", r.sector.mode == SectorMode::linearized ? "linearized" : "tight");
  kv("gamma", fmt_double(r.gamma));
  kv("lambda_under", fmt_double(r.lambda_under));
  kv("lambda_max", fmt_double(r.lambda_max));
  kv("eigen_ratio", fmt_double(r.eigen_ratio));
  kv("alpha", fmt_double(r.alpha));
  if (!r.bounds) {
    kv("bounds", "unavailable (" + r.unavailable + ")");
    return os.str();
  }
  const auto& b = *r.bounds;
  kv("alpha_bar_tight", fmt_double(b.alpha_bar_tight));
  kv("alpha_bar_matching", fmt_double(b.alpha_bar_matching));
  kv("alpha_bar_spectral", fmt_double(b.alpha_bar_spectral));
  kv("log10_alpha_bar_spectral", fmt_double(b.log10_alpha_bar_spectral));
  kv("matching_formula", b.matching_formula);
  kv("matching_residual", fmt_double(b.matching_residual));
  kv("matching_grid_lo", fmt_double(b.matching_grid_lo));
  kv("matching_at_grid_edge", yes(b.matching_at_grid_edge));
  kv("equal_graphs_assumed", yes(b.equal_graphs_assumed));
  kv("admissible_tight", yes(r.alpha < b.alpha_bar_tight));
  kv("admissible_matching", yes(r.alpha < b.alpha_bar_matching));
  kv("admissible_spectral", yes(r.alpha < b.alpha_bar_spectral));
  return os.str();
}

// ---------------------------------------------------------------- run

struct RunOutcome {
  int exit_code = exit_ok;
  std::string verdict;  // converged | diverged | not_converged
  RunResult run;
  std::optional<DsvmReport> dsvm;
  double distance_to_reference = 0.0;
  double final_sum_gradient_norm = 0.0;
  double final_consensus_error = 0.0;
  std::vector<std::string> missed;
};

inline RunOutcome execute(const Problem& p, std::optional<double> t_end = std::nullopt) {
  auto cfg = solver_config(p);
  if (t_end) cfg.t_end = *t_end;
  RunOutcome out;
  const Eigen::Index m = p.model.m();
  if (p.data) {
    DsvmSetup setup{*p.data, *p.parts, p.config.cost.c, p.config.cost.mu, p.config.cost.eps_nu,
                    p.config.cost.regularizer == "literal" ? RegularizerMode::literal : RegularizerMode::matched,
                    p.config.cost.oracle_tol, p.x0};
    auto rep = dsvm_experiment(setup, cfg);
    out.run = rep.run;
    out.distance_to_reference = rep.distance_to_oracle;
    out.dsvm = std::move(rep);
  } else {
    out.run = integrate(p.x0, p.model, cfg);
    out.distance_to_reference = out.run.x.allFinite()
                                    ? (agent_mean(out.run.x, m) - p.reference).cwiseAbs().maxCoeff()
                                    : std::numeric_limits<double>::infinity();
  }
  const bool finite = out.run.x.allFinite();
  out.final_sum_gradient_norm = finite ? sum_gradient(p.model, out.run.x).norm() : std::numeric_limits<double>::infinity();
  out.final_consensus_error = finite ? consensus_error(out.run.x, m) : std::numeric_limits<double>::infinity();
  if (out.run.status == RunStatus::diverged) {
    out.verdict = "diverged";
    out.exit_code = exit_diverged;
    return out;
  }
  const auto& tol = p.config.convergence;
  if (!(out.final_sum_gradient_norm <= tol.sum_gradient_tol)) out.missed.push_back("sum_gradient_norm");
  if (!(out.final_consensus_error <= tol.consensus_tol)) out.missed.push_back("consensus_error");
  if (!(out.distance_to_reference <= tol.oracle_distance_tol)) out.missed.push_back("distance_to_optimum");
  out.verdict = out.missed.empty() ? "converged" : "not_converged";
  out.exit_code = out.missed.empty() ? exit_ok : exit_not_converged;
  return out;
}

inline void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

inline std::string run_summary(const Problem& p, const RunOutcome& o) {
  std::ostringstream os;
  auto kv = [&](const char* k, const std::string& v) { os << k << ": " << v << '\n'; };
  kv("verdict", o.verdict);
  kv("exit_code", std::to_string(o.exit_code));
  kv("status", to_string(o.run.status));
  kv("t_final", fmt_double(o.run.t_final));
  kv("eta_used", fmt_double(o.run.eta_used));
  kv("steps_taken", std::to_string(o.run.steps_taken));
  kv("max_abs_state", fmt_double(o.run.max_abs_state));
  kv("final_sum_gradient_norm", fmt_double(o.final_sum_gradient_norm));
  kv("final_consensus_error", fmt_double(o.final_consensus_error));
  kv("distance_to_optimum", fmt_double(o.distance_to_reference));
  if (!o.missed.empty()) kv("missed", join_lines(o.missed, ", "));
  if (!o.run.trace.empty()) kv("final_cost", fmt_double(o.run.trace.back().cost));
  std::string ref;
  for (Eigen::Index k = 0; k < p.reference.size(); ++k) ref += (k ? " " : "") + fmt_double(p.reference[k]);
  kv("optimum", ref);
  if (o.dsvm) {
    const auto& d = *o.dsvm;
    kv("oracle_iterations", std::to_string(d.oracle.iterations));
    kv("oracle_objective", fmt_double(d.oracle.objective));
    kv("oracle_accuracy", fmt_double(d.oracle_eval.accuracy));
    kv("consensus_accuracy", fmt_double(d.consensus_eval.accuracy));
    kv("consensus_spread", fmt_double(d.consensus_spread));
    std::string cons;
    const Vector cd = d.consensus.as_decision();
    for (Eigen::Index k = 0; k < cd.size(); ++k) cons += (k ? " " : "") + fmt_double(cd[k]);
    kv("consensus_classifier", cons);
  }
  for (const auto& w : o.run.warnings) kv("warning", w);
  return os.str();
}

inline void write_run_svgs(const fs::path& dir, const Problem& p, const RunResult& run) {
  const Eigen::Index m = p.model.m();
  const auto n = p.model.n();
  std::vector<double> t;
  for (const auto& r : run.trace) t.push_back(r.t);
  auto column = [&](auto get) {
    std::vector<double> v;
    for (const auto& r : run.trace) v.push_back(get(r));
    return v;
  };
  std::vector<svg::Series> states;
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < m; ++k) {
      const Eigen::Index idx = static_cast<Eigen::Index>(i) * m + k;
      states.push_back({"x_" + std::to_string(i) + "_" + std::to_string(k), t,
                        column([&](const TraceRow& r) { return r.x[idx]; })});
    }
  }
  std::ostringstream s1, s2, s3;
  svg::line_plot(s1, "agent states", "t", "x", states);
  svg::line_plot(s2, "global cost", "t", "F(x)", {{"F", t, column([](const TraceRow& r) { return r.cost; })}});
  svg::line_plot(s3, "optimality residual", "t", "|sum grad f|",
                 {{"|sum grad f|", t, column([](const TraceRow& r) { return r.sum_gradient_norm; })},
                  {"consensus error", t, column([](const TraceRow& r) { return r.consensus_error; })}},
                 true);
  write_file(dir / "states.svg", s1.str());
  write_file(dir / "cost.svg", s2.str());
  write_file(dir / "residual.svg", s3.str());
}

inline std::string metadata_text(const Problem& p, const std::string& command, const std::string& body) {
  std::ostringstream os;
  os << "command: " << command << '\n' << body << "config:\n" << to_json(p.config).dump(2) << '\n';
  return os.str();
}

/// One run; artifacts go to `out` when non-empty.
inline RunOutcome cmd_run(const ExperimentConfig& c, const Options& opt, const fs::path& out, std::ostream& log) {
  const auto p = build_problem(c, opt);
  auto o = execute(p);
  const auto summary = run_summary(p, o);
  log << summary;
  if (!out.empty()) {
    fs::create_directories(out);
    write_file(out / "config.json", to_json(c).dump(2) + "\n");
    if (c.outputs.trace) {
      std::ostringstream tr;
      write_trace_csv(tr, o.run, p.model.m());
      write_file(out / "trace.csv", tr.str());
    }
    write_file(out / "metadata.txt", metadata_text(p, "run", summary));
    write_file(out / "bounds.txt", bound_report_text(compute_bounds(p)));
    if (p.data && c.outputs.dataset) {
      std::ostringstream ds;
      write_dataset_csv(ds, *p.data);
      write_file(out / "dataset.csv", ds.str());
    }
    if (o.dsvm) {
      std::ostringstream cl;
      write_classifier(cl, o.dsvm->consensus, "consensus");
      write_classifier(cl, o.dsvm->oracle.classifier, "oracle");
      write_file(out / "classifier.txt", cl.str());
    }
    if (c.outputs.svg && !o.run.trace.empty()) write_run_svgs(out, p, o.run);
  }
  return o;
}

inline BoundReport cmd_bounds(const ExperimentConfig& c, const Options& opt, const fs::path& out, std::ostream& log) {
  const auto p = build_problem(c, opt);
  const auto r = compute_bounds(p);
  const auto text = bound_report_text(r);
  log << text;
  if (!out.empty()) {
    fs::create_directories(out);
    write_file(out / "bounds.txt", text);
    write_file(out / "metadata.txt", metadata_text(p, "bounds", ""));
  }
  return r;
}

// ---------------------------------------------------------------- sweep

struct SweepResultCell {
  double alpha = 0.0;
  double rho = 0.0;
  double khop = 0.0;
  double eta = 0.0;
  double kappa = 0.0;
  double K = 0.0;
  double eigen_ratio = 0.0;
  double alpha_bar_tight = 0.0;  // 0 when undefined
  std::size_t zero_count = 0;    // worst regime (spectral mode)
  double max_nonzero_real = 0.0;
  bool continuous_stable = false;
  bool discrete_stable = false;
  std::string run_verdict;  // run mode
  int verdict = 2;          // 0 stable, 1 unstable, 2 failed
  std::string error;
};

struct SweepTable {
  std::string mode;
  std::vector<double> alphas;
  std::vector<double> rhos;
  std::vector<double> khops;
  std::vector<double> etas;
  std::vector<SweepResultCell> cells;  // alpha fastest, then eta, khop, rho
};

inline double link_rho(const LinkSpec& s) {
  if (s.kind == "log_quantizer" || s.kind == "uniform_quantizer") return s.rho;
  if (s.outer) return link_rho(*s.outer);
  if (s.inner) return link_rho(*s.inner);
  return 0.0;
}

inline ExperimentConfig cell_config(const ExperimentConfig& base, double alpha, double rho, double khop, double eta) {
  ExperimentConfig c = base;
  c.solver.alpha = alpha;
  c.solver.eta = eta;
  set_rho(c.nonlinearity.x, rho);
  if (c.nonlinearity.y) set_rho(*c.nonlinearity.y, rho);
  c.network.khop = static_cast<std::size_t>(khop);
  if (c.a_network) {
    c.a_network = std::make_shared<NetworkSpec>(*c.a_network);
    c.a_network->khop = static_cast<std::size_t>(khop);
  }
  return c;
}

/// Spectral verdict: every constant gain in {kappa, 1, K} (1 only when inside
/// the sector) must give exactly m zero eigenvalues with the rest in the open
/// left half-plane, and contracting Euler modes at the cell's eta. The Hessian
/// is taken at the consensus optimum. At large alpha the slow consensus modes
/// shrink below the relative zero tolerance, which fails the zero count.
inline void spectral_cell(const Problem& p, SweepResultCell& cell) {
  const auto n = p.model.n();
  const auto h = aggregate_hessian(p.model, replicate(p.reference, n));
  const auto lw = laplacian(p.schedule_w.base_graph());
  const auto la = p.schedule_a ? laplacian(p.schedule_a->base_graph()) : lw;
  std::vector<double> gains{p.sector.kappa};
  if (p.sector.kappa < 1.0 && 1.0 < p.sector.K) gains.push_back(1.0);
  if (p.sector.K != p.sector.kappa) gains.push_back(p.sector.K);
  const Eigen::Index nm = static_cast<Eigen::Index>(n) * p.model.m();
  cell.continuous_stable = true;
  cell.discrete_stable = true;
  cell.max_nonzero_real = -std::numeric_limits<double>::infinity();
  for (const double g : gains) {
    const auto mats = assemble(lw, la, h, LinkGainSnapshot::uniform(nm, g), p.config.solver.alpha, p.model.m());
    const auto rep = spectral_report(mats, p.model.m());
    cell.zero_count = std::max(cell.zero_count, rep.zero_count);
    cell.max_nonzero_real = std::max(cell.max_nonzero_real, rep.max_nonzero_real);
    cell.continuous_stable = cell.continuous_stable && rep.stable;
    cell.discrete_stable = cell.discrete_stable && rep.discrete_stable(p.config.solver.eta);
  }
  cell.verdict = cell.continuous_stable && cell.discrete_stable ? 0 : 1;
}

inline SweepTable run_sweep(const ExperimentConfig& c, const Options& opt) {
  SweepTable t;
  t.mode = c.sweep.mode;
  const bool empty = c.sweep.alpha.empty() && c.sweep.rho.empty() && c.sweep.khop.empty() && c.sweep.eta.empty();
  t.alphas = c.sweep.alpha.empty() ? std::vector<double>{c.solver.alpha} : c.sweep.alpha;
  t.rhos = c.sweep.rho.empty() ? std::vector<double>{link_rho(c.nonlinearity.x)} : c.sweep.rho;
  t.khops = c.sweep.khop.empty() ? std::vector<double>{static_cast<double>(c.network.khop)} : c.sweep.khop;
  t.etas = c.sweep.eta.empty() ? std::vector<double>{c.solver.eta} : c.sweep.eta;
  const std::size_t total = t.alphas.size() * t.rhos.size() * t.khops.size() * t.etas.size();
  t.cells.resize(total);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < total; k = next++) {
      std::size_t r = k;
      auto& cell = t.cells[k];
      cell.alpha = t.alphas[r % t.alphas.size()];
      r /= t.alphas.size();
      cell.eta = t.etas[r % t.etas.size()];
      r /= t.etas.size();
      cell.khop = t.khops[r % t.khops.size()];
      r /= t.khops.size();
      cell.rho = t.rhos[r];
      try {
        const auto cc = cell_config(c, cell.alpha, cell.rho, cell.khop, cell.eta);
        const auto p = build_problem(cc, opt);
        const auto b = compute_bounds(p);
        cell.kappa = b.sector.kappa;
        cell.K = b.sector.K;
        cell.eigen_ratio = b.eigen_ratio;
        cell.alpha_bar_tight = b.bounds ? b.bounds->alpha_bar_tight : 0.0;
        if (t.mode == "spectral") {
          spectral_cell(p, cell);
        } else {
          const auto o = execute(p, empty ? std::nullopt : std::optional<double>(c.sweep.run_t_end));
          cell.run_verdict = o.verdict;
          cell.verdict = o.run.status == RunStatus::diverged ? 1 : 0;
        }
      } catch (const std::exception& e) {
        cell.error = e.what();
        cell.verdict = 2;
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(opt.jobs, static_cast<unsigned>(std::max<std::size_t>(total, 1))));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return t;
}

inline std::string sweep_csv(const SweepTable& t) {
  std::ostringstream os;
  os << "alpha,rho,khop,eta,kappa,K,sector_ratio,eigen_ratio,alpha_bar_tight,zero_count,max_nonzero_real,"
        "continuous_stable,discrete_stable,run_verdict,verdict,error\n";
  for (const auto& c : t.cells) {
    std::string err = c.error;
    for (char& ch : err)
      if (ch == ',' || ch == '\n') ch = ';';
    const bool spectral = t.mode == "spectral" && c.error.empty();
    os << fmt_double(c.alpha) << ',' << fmt_double(c.rho) << ',' << fmt_double(c.khop) << ',' << fmt_double(c.eta)
       << ',' << fmt_double(c.kappa) << ',' << fmt_double(c.K) << ','
       << (c.kappa > 0.0 ? fmt_double(c.K / c.kappa) : std::string("inf")) << ',' << fmt_double(c.eigen_ratio) << ','
       << fmt_double(c.alpha_bar_tight) << ',' << (spectral ? std::to_string(c.zero_count) : "") << ','
       << (spectral ? fmt_double(c.max_nonzero_real) : "") << ',' << (spectral ? (c.continuous_stable ? "1" : "0") : "")
       << ',' << (spectral ? (c.discrete_stable ? "1" : "0") : "") << ',' << c.run_verdict << ','
       << (c.verdict == 0 ? "stable" : c.verdict == 1 ? "unstable" : "failed") << ',' << err << '\n';
  }
  return os.str();
}

inline std::string sweep_svg(const SweepTable& t) {
  std::vector<std::string> cols;
  for (const double a : t.alphas) cols.push_back("a=" + svg::num(a));
  std::vector<std::string> rows;
  std::vector<std::vector<int>> grid;
  const std::size_t na = t.alphas.size();
  for (std::size_t r = 0; r * na < t.cells.size(); ++r) {
    const auto& c0 = t.cells[r * na];
    rows.push_back("rho=" + svg::num(c0.rho) + " k=" + svg::num(c0.khop) + " eta=" + svg::num(c0.eta));
    std::vector<int> row;
    for (std::size_t a = 0; a < na; ++a) row.push_back(t.cells[r * na + a].verdict);
    grid.push_back(std::move(row));
  }
  std::ostringstream os;
  svg::heat_map(os, "stability (" + t.mode + ")", cols, rows, grid);
  return os.str();
}

inline SweepTable cmd_sweep(const ExperimentConfig& c, const Options& opt, const fs::path& out, std::ostream& log) {
  auto t = run_sweep(c, opt);
  const auto csv = sweep_csv(t);
  std::size_t stable = 0, unstable = 0, failed = 0;
  for (const auto& cell : t.cells) (cell.verdict == 0 ? stable : cell.verdict == 1 ? unstable : failed)++;
  std::ostringstream summary;
  summary << "mode: " << t.mode << "\ncells: " << t.cells.size() << "\nstable: " << stable << "\nunstable: " << unstable
          << "\nfailed: " << failed << '\n';
  log << summary.str();
  if (!out.empty()) {
    fs::create_directories(out);
    write_file(out / "sweep.csv", csv);
    if (c.outputs.svg) write_file(out / "sweep.svg", sweep_svg(t));
    write_file(out / "metadata.txt", "command: sweep\n" + summary.str() + "config:\n" + to_json(c).dump(2) + "\n");
  } else {
    log << csv;
  }
  return t;
}

}  // namespace nlgt::cli
