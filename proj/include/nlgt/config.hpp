#pragma once

// Experiment configuration: JSON with every field defaulted except `seed`.
// Parsing collects every problem (unknown keys, wrong types, out-of-range
// values) before reporting, and `to_json` echoes the effective configuration.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nlgt/types.hpp"

namespace nlgt {

using Json = nlohmann::ordered_json;

/// Raised with the full list of validation problems.
class ConfigError : public InvalidInput {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : InvalidInput("invalid configuration:\n  " + join_lines(problems, "\n  ")), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct LinkSpec {
  std::string kind = "identity";  // identity | log_quantizer | uniform_quantizer | saturation | composite
  double rho = 1.0;
  double limit = 1.0;
  std::shared_ptr<LinkSpec> outer;
  std::shared_ptr<LinkSpec> inner;
};

struct DataSpec {
  std::string source = "generate";  // generate | csv
  std::string path;
  std::size_t n_points = 200;
  double radius = 0.6;
  double margin_gap = 0.05;
};

struct PartitionSpec {
  std::string mode = "stratified";  // stratified | contiguous
  std::size_t agents = 5;
};

struct NetworkSpec {
  std::string kind = "khop_ring";  // khop_ring | edge_list
  std::size_t khop = 2;
  double total_weight = 0.8;
  bool directed = false;
  std::string path;
  std::string switch_mode = "permute";  // permute | fixed
  double switch_period = 0.001;
};

struct NonlinearitySpec {
  LinkSpec x;
  std::optional<LinkSpec> y;  // defaults to x
  std::string sector_mode = "linearized";  // linearized | tight
  double domain_lo = -1e3;
  double domain_hi = 1e3;
};

struct CostSpec {
  std::string kind = "svm";  // svm | quadratic
  double c = 1.0;
  double mu = 2.0;
  double eps_nu = 1e-6;
  std::string regularizer = "matched";  // matched | literal
  double oracle_tol = 1e-8;
  // quadratic fixtures: diagonal curvature U(curvature_lo, curvature_hi), centers U(center_lo, center_hi)
  std::size_t m = 1;
  double curvature_lo = 1.0;
  double curvature_hi = 2.0;
  double center_lo = -1.0;
  double center_hi = 1.0;
};

struct SolverSpec {
  double alpha = 6.0;
  double eta = 1e-3;
  double t_end = 300.0;
  std::string y_init = "gradient";  // gradient | zero
  std::string integrator = "rk4";   // euler | rk4
  std::size_t sample_stride = 100;
  double blowup = 1e12;
  double x0_lo = 0.0;
  double x0_hi = 1.0;
};

struct ConvergenceSpec {
  double sum_gradient_tol = 1e-3;
  double consensus_tol = 1e-2;
  double oracle_distance_tol = 1e-2;
};

struct OutputsSpec {
  bool trace = true;
  bool svg = true;
  bool dataset = true;
};

struct SweepSpec {
  std::vector<double> alpha;
  std::vector<double> rho;
  std::vector<double> khop;
  std::vector<double> eta;
  std::string mode = "spectral";  // spectral | run
  double run_t_end = 50.0;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string name;
  DataSpec data;
  PartitionSpec partition;
  NetworkSpec network;
  std::shared_ptr<NetworkSpec> a_network;  // optional separate y-line topology
  NonlinearitySpec nonlinearity;
  CostSpec cost;
  SolverSpec solver;
  ConvergenceSpec convergence;
  OutputsSpec outputs;
  SweepSpec sweep;
};

namespace detail {

class Reader {
 public:
  Reader(const Json& j, std::string path, std::vector<std::string>& errors)
      : j_(j), path_(std::move(path)), errors_(errors) {
    if (!j_.is_object()) errors_.push_back(path_ + ": expected an object");
  }

  bool has(const char* key) const { return j_.is_object() && j_.contains(key); }
  const Json& at(const char* key) const { return j_.at(key); }
  std::string path(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void read(const char* key, double& out) {
    if (!take(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number()) return type_error(key, "a number");
    out = v.get<double>();
  }
  void read(const char* key, std::size_t& out) {
    if (!take(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
      return type_error(key, "a non-negative integer");
    }
    out = v.get<std::size_t>();
  }
  void read(const char* key, std::uint64_t& out, bool) {
    if (!take(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<long long>() < 0)) {
      return type_error(key, "a non-negative integer");
    }
    out = v.get<std::uint64_t>();
  }
  void read(const char* key, bool& out) {
    if (!take(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) return type_error(key, "a boolean");
    out = v.get<bool>();
  }
  void read(const char* key, std::string& out) {
    if (!take(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_string()) return type_error(key, "a string");
    out = v.get<std::string>();
  }
  void read(const char* key, std::vector<double>& out) {
    if (!take(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_array()) return type_error(key, "an array of numbers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number()) return type_error(key, "an array of numbers");
      out.push_back(e.get<double>());
    }
  }
  /// Marks a nested object key as consumed; returns whether it is present.
  bool section(const char* key) { return take(key); }

  void finish() {
    if (!j_.is_object()) return;
    for (const auto& item : j_.items()) {
      if (std::find(seen_.begin(), seen_.end(), item.key()) == seen_.end()) {
        errors_.push_back(path(item.key().c_str()) + ": unknown key");
      }
    }
  }

 private:
  bool take(const char* key) {
    seen_.emplace_back(key);
    return has(key);
  }
  void type_error(const char* key, const char* what) { errors_.push_back(path(key) + ": expected " + what); }

  const Json& j_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::vector<std::string> seen_;
};

inline void check_one_of(const std::string& value, std::initializer_list<const char*> allowed, const std::string& where,
                         std::vector<std::string>& errors) {
  for (const char* a : allowed)
    if (value == a) return;
  std::string list;
  for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
  errors.push_back(where + ": '" + value + "' is not one of {" + list + "}");
}

inline LinkSpec parse_link(const Json& j, const std::string& path, std::vector<std::string>& errors) {
  LinkSpec s;
  Reader r(j, path, errors);
  r.read("kind", s.kind);
  r.read("rho", s.rho);
  r.read("limit", s.limit);
  if (r.section("outer")) s.outer = std::make_shared<LinkSpec>(parse_link(r.at("outer"), r.path("outer"), errors));
  if (r.section("inner")) s.inner = std::make_shared<LinkSpec>(parse_link(r.at("inner"), r.path("inner"), errors));
  r.finish();
  check_one_of(s.kind, {"identity", "log_quantizer", "uniform_quantizer", "saturation", "composite"}, path + ".kind",
               errors);
  if ((s.kind == "log_quantizer" || s.kind == "uniform_quantizer") && !(s.rho > 0.0)) {
    errors.push_back(path + ".rho: must be positive");
  }
  if (s.kind == "log_quantizer" && s.rho >= 2.0) errors.push_back(path + ".rho: log quantizer needs rho < 2");
  if (s.kind == "saturation" && !(s.limit > 0.0)) errors.push_back(path + ".limit: must be positive");
  if (s.kind == "composite" && (!s.outer || !s.inner)) errors.push_back(path + ": composite needs outer and inner");
  return s;
}

inline NetworkSpec parse_network(const Json& j, const std::string& path, std::vector<std::string>& errors) {
  NetworkSpec s;
  Reader r(j, path, errors);
  r.read("kind", s.kind);
  r.read("khop", s.khop);
  r.read("total_weight", s.total_weight);
  r.read("directed", s.directed);
  r.read("path", s.path);
  r.read("switch_mode", s.switch_mode);
  r.read("switch_period", s.switch_period);
  r.finish();
  check_one_of(s.kind, {"khop_ring", "edge_list"}, path + ".kind", errors);
  check_one_of(s.switch_mode, {"permute", "fixed"}, path + ".switch_mode", errors);
  if (s.kind == "khop_ring") {
    if (s.khop < 1) errors.push_back(path + ".khop: must be at least 1");
    if (!(s.total_weight > 0.0 && s.total_weight < 1.0)) errors.push_back(path + ".total_weight: must lie in (0, 1)");
  }
  if (s.kind == "edge_list" && s.path.empty()) errors.push_back(path + ".path: required for edge_list networks");
  if (!(s.switch_period > 0.0)) errors.push_back(path + ".switch_period: must be positive");
  return s;
}

inline Json link_to_json(const LinkSpec& s) {
  Json j;
  j["kind"] = s.kind;
  j["rho"] = s.rho;
  j["limit"] = s.limit;
  if (s.outer) j["outer"] = link_to_json(*s.outer);
  if (s.inner) j["inner"] = link_to_json(*s.inner);
  return j;
}

inline Json network_to_json(const NetworkSpec& s) {
  return Json{{"kind", s.kind},         {"khop", s.khop},   {"total_weight", s.total_weight},
              {"directed", s.directed}, {"path", s.path},   {"switch_mode", s.switch_mode},
              {"switch_period", s.switch_period}};
}

}  // namespace detail

inline ExperimentConfig parse_config(const Json& root) {
  std::vector<std::string> errors;
  ExperimentConfig c;
  detail::Reader r(root, "", errors);
  if (!r.has("seed")) errors.push_back("seed: required");
  r.read("seed", c.seed, true);
  r.read("name", c.name);

  if (r.section("data")) {
    detail::Reader s(r.at("data"), "data", errors);
    s.read("source", c.data.source);
    s.read("path", c.data.path);
    s.read("n_points", c.data.n_points);
    s.read("radius", c.data.radius);
    s.read("margin_gap", c.data.margin_gap);
    s.finish();
  }
  if (r.section("partition")) {
    detail::Reader s(r.at("partition"), "partition", errors);
    s.read("mode", c.partition.mode);
    s.read("agents", c.partition.agents);
    s.finish();
  }
  if (r.section("network")) c.network = detail::parse_network(r.at("network"), "network", errors);
  if (r.section("a_network")) {
    c.a_network = std::make_shared<NetworkSpec>(detail::parse_network(r.at("a_network"), "a_network", errors));
  }
  if (r.section("nonlinearity")) {
    detail::Reader s(r.at("nonlinearity"), "nonlinearity", errors);
    if (s.section("x")) c.nonlinearity.x = detail::parse_link(s.at("x"), "nonlinearity.x", errors);
    if (s.section("y")) c.nonlinearity.y = detail::parse_link(s.at("y"), "nonlinearity.y", errors);
    s.read("sector_mode", c.nonlinearity.sector_mode);
    s.read("domain_lo", c.nonlinearity.domain_lo);
    s.read("domain_hi", c.nonlinearity.domain_hi);
    s.finish();
  }
  if (r.section("cost")) {
    detail::Reader s(r.at("cost"), "cost", errors);
    s.read("kind", c.cost.kind);
    s.read("c", c.cost.c);
    s.read("mu", c.cost.mu);
    s.read("eps_nu", c.cost.eps_nu);
    s.read("regularizer", c.cost.regularizer);
    s.read("oracle_tol", c.cost.oracle_tol);
    s.read("m", c.cost.m);
    s.read("curvature_lo", c.cost.curvature_lo);
    s.read("curvature_hi", c.cost.curvature_hi);
    s.read("center_lo", c.cost.center_lo);
    s.read("center_hi", c.cost.center_hi);
    s.finish();
  }
  if (r.section("solver")) {
    detail::Reader s(r.at("solver"), "solver", errors);
    s.read("alpha", c.solver.alpha);
    s.read("eta", c.solver.eta);
    s.read("t_end", c.solver.t_end);
    s.read("y_init", c.solver.y_init);
    s.read("integrator", c.solver.integrator);
    s.read("sample_stride", c.solver.sample_stride);
    s.read("blowup", c.solver.blowup);
    s.read("x0_lo", c.solver.x0_lo);
    s.read("x0_hi", c.solver.x0_hi);
    s.finish();
  }
  if (r.section("convergence")) {
    detail::Reader s(r.at("convergence"), "convergence", errors);
    s.read("sum_gradient_tol", c.convergence.sum_gradient_tol);
    s.read("consensus_tol", c.convergence.consensus_tol);
    s.read("oracle_distance_tol", c.convergence.oracle_distance_tol);
    s.finish();
  }
  if (r.section("outputs")) {
    detail::Reader s(r.at("outputs"), "outputs", errors);
    s.read("trace", c.outputs.trace);
    s.read("svg", c.outputs.svg);
    s.read("dataset", c.outputs.dataset);
    s.finish();
  }
  if (r.section("sweep")) {
    detail::Reader s(r.at("sweep"), "sweep", errors);
    s.read("alpha", c.sweep.alpha);
    s.read("rho", c.sweep.rho);
    s.read("khop", c.sweep.khop);
    s.read("eta", c.sweep.eta);
    s.read("mode", c.sweep.mode);
    s.read("run_t_end", c.sweep.run_t_end);
    s.finish();
  }
  r.finish();

  // value checks
  detail::check_one_of(c.data.source, {"generate", "csv"}, "data.source", errors);
  if (c.data.source == "csv" && c.data.path.empty()) errors.push_back("data.path: required when data.source is csv");
  if (c.data.n_points < 2) errors.push_back("data.n_points: must be at least 2");
  if (!(c.data.radius > 0.0 && c.data.radius < 1.0)) errors.push_back("data.radius: must lie in (0, 1)");
  if (!(c.data.margin_gap >= 0.0)) errors.push_back("data.margin_gap: must be non-negative");
  detail::check_one_of(c.partition.mode, {"stratified", "contiguous"}, "partition.mode", errors);
  if (c.partition.agents < 1) errors.push_back("partition.agents: must be at least 1");
  if (c.cost.kind == "svm" && c.data.source == "generate" && c.partition.agents > c.data.n_points) {
    errors.push_back("partition.agents: more agents than data points");
  }
  detail::check_one_of(c.nonlinearity.sector_mode, {"linearized", "tight"}, "nonlinearity.sector_mode", errors);
  if (!(c.nonlinearity.domain_lo < c.nonlinearity.domain_hi)) {
    errors.push_back("nonlinearity.domain_lo: must be below domain_hi");
  }
  detail::check_one_of(c.cost.kind, {"svm", "quadratic"}, "cost.kind", errors);
  if (!(c.cost.c > 0.0)) errors.push_back("cost.c: must be positive");
  if (!(c.cost.mu > 0.0)) errors.push_back("cost.mu: must be positive");
  if (!(c.cost.eps_nu >= 0.0)) errors.push_back("cost.eps_nu: must be non-negative");
  detail::check_one_of(c.cost.regularizer, {"matched", "literal"}, "cost.regularizer", errors);
  if (!(c.cost.oracle_tol > 0.0)) errors.push_back("cost.oracle_tol: must be positive");
  if (c.cost.m < 1) errors.push_back("cost.m: must be at least 1");
  if (!(c.cost.curvature_lo > 0.0 && c.cost.curvature_lo <= c.cost.curvature_hi)) {
    errors.push_back("cost.curvature_lo: need 0 < curvature_lo <= curvature_hi");
  }
  if (!(c.cost.center_lo <= c.cost.center_hi)) errors.push_back("cost.center_lo: must not exceed center_hi");
  if (!(c.solver.alpha > 0.0)) errors.push_back("solver.alpha: must be positive");
  if (!(c.solver.eta > 0.0)) errors.push_back("solver.eta: must be positive");
  if (!(c.solver.t_end >= 0.0)) errors.push_back("solver.t_end: must be non-negative");
  detail::check_one_of(c.solver.y_init, {"gradient", "zero"}, "solver.y_init", errors);
  detail::check_one_of(c.solver.integrator, {"euler", "rk4"}, "solver.integrator", errors);
  if (c.solver.sample_stride < 1) errors.push_back("solver.sample_stride: must be at least 1");
  if (!(c.solver.blowup > 0.0)) errors.push_back("solver.blowup: must be positive");
  if (!(c.solver.x0_lo <= c.solver.x0_hi)) errors.push_back("solver.x0_lo: must not exceed x0_hi");
  if (!(c.convergence.sum_gradient_tol > 0.0)) errors.push_back("convergence.sum_gradient_tol: must be positive");
  if (!(c.convergence.consensus_tol > 0.0)) errors.push_back("convergence.consensus_tol: must be positive");
  if (!(c.convergence.oracle_distance_tol > 0.0)) errors.push_back("convergence.oracle_distance_tol: must be positive");
  detail::check_one_of(c.sweep.mode, {"spectral", "run"}, "sweep.mode", errors);
  for (const double a : c.sweep.alpha)
    if (!(a >= 0.0)) errors.push_back("sweep.alpha: values must be non-negative");
  for (const double v : c.sweep.rho)
    if (!(v > 0.0 && v < 2.0)) errors.push_back("sweep.rho: values must lie in (0, 2)");
  for (const double v : c.sweep.khop)
    if (!(v >= 1.0 && v == std::floor(v))) errors.push_back("sweep.khop: values must be positive integers");
  for (const double v : c.sweep.eta)
    if (!(v > 0.0)) errors.push_back("sweep.eta: values must be positive");
  if (!(c.sweep.run_t_end > 0.0)) errors.push_back("sweep.run_t_end: must be positive");

  if (!errors.empty()) throw ConfigError(std::move(errors));
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError({std::string("malformed JSON: ") + e.what()});
  }
  return parse_config(j);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

inline Json to_json(const ExperimentConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["name"] = c.name;
  j["data"] = {{"source", c.data.source},
               {"path", c.data.path},
               {"n_points", c.data.n_points},
               {"radius", c.data.radius},
               {"margin_gap", c.data.margin_gap}};
  j["partition"] = {{"mode", c.partition.mode}, {"agents", c.partition.agents}};
  j["network"] = detail::network_to_json(c.network);
  if (c.a_network) j["a_network"] = detail::network_to_json(*c.a_network);
  Json nl;
  nl["x"] = detail::link_to_json(c.nonlinearity.x);
  if (c.nonlinearity.y) nl["y"] = detail::link_to_json(*c.nonlinearity.y);
  nl["sector_mode"] = c.nonlinearity.sector_mode;
  nl["domain_lo"] = c.nonlinearity.domain_lo;
  nl["domain_hi"] = c.nonlinearity.domain_hi;
  j["nonlinearity"] = nl;
  j["cost"] = {{"kind", c.cost.kind},
               {"c", c.cost.c},
               {"mu", c.cost.mu},
               {"eps_nu", c.cost.eps_nu},
               {"regularizer", c.cost.regularizer},
               {"oracle_tol", c.cost.oracle_tol},
               {"m", c.cost.m},
               {"curvature_lo", c.cost.curvature_lo},
               {"curvature_hi", c.cost.curvature_hi},
               {"center_lo", c.cost.center_lo},
               {"center_hi", c.cost.center_hi}};
  j["solver"] = {{"alpha", c.solver.alpha},
                 {"eta", c.solver.eta},
                 {"t_end", c.solver.t_end},
                 {"y_init", c.solver.y_init},
                 {"integrator", c.solver.integrator},
                 {"sample_stride", c.solver.sample_stride},
                 {"blowup", c.solver.blowup},
                 {"x0_lo", c.solver.x0_lo},
                 {"x0_hi", c.solver.x0_hi}};
  j["convergence"] = {{"sum_gradient_tol", c.convergence.sum_gradient_tol},
                      {"consensus_tol", c.convergence.consensus_tol},
                      {"oracle_distance_tol", c.convergence.oracle_distance_tol}};
  j["outputs"] = {{"trace", c.outputs.trace}, {"svg", c.outputs.svg}, {"dataset", c.outputs.dataset}};
  j["sweep"] = {{"alpha", c.sweep.alpha}, {"rho", c.sweep.rho},   {"khop", c.sweep.khop},
                {"eta", c.sweep.eta},     {"mode", c.sweep.mode}, {"run_t_end", c.sweep.run_t_end}};
  return j;
}

}  // namespace nlgt
