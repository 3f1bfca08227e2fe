#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cordfo/optim.hpp"
#include "cordfo/problems.hpp"

namespace cordfo {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProblemSpec {
  std::string name = "power4";
  double sigma = 1.0;
  std::optional<std::size_t> dim;  // quadratic: dimension; chained_quartic: 2 * pairs
  std::optional<Vector> x0;
  std::optional<Interval> box;  // applied to every coordinate
  NoiseKind noise = NoiseKind::gaussian;
};

inline const std::vector<std::string>& problem_names() {
  static const std::vector<std::string> names = {"power4", "rosenbrock", "chained_quartic", "quadratic",
                                                 "scaled_sine"};
  return names;
}

inline Problem make_problem(const ProblemSpec& s) {
  if (!(s.sigma >= 0.0)) throw ConfigError("sigma must be nonnegative");
  Problem p;
  if (s.name == "power4") {
    p = problems::power4(s.sigma);
  } else if (s.name == "rosenbrock") {
    p = problems::rosenbrock(s.sigma);
  } else if (s.name == "chained_quartic") {
    const std::size_t d = s.dim.value_or(64);
    if (d == 0 || d % 2 != 0) throw ConfigError("chained_quartic needs an even positive dimension");
    p = problems::chained_quartic(s.sigma, d / 2);
  } else if (s.name == "quadratic") {
    const std::size_t d = s.dim.value_or(2);
    if (d == 0) throw ConfigError("quadratic needs a positive dimension");
    p = problems::quadratic(d, s.sigma);
  } else if (s.name == "scaled_sine") {
    p = problems::scaled_sine(s.sigma);
  } else {
    throw ConfigError("unknown problem: " + s.name);
  }
  if (s.dim && *s.dim != p.dim) throw ConfigError(s.name + " has fixed dimension " + std::to_string(p.dim));
  if (s.box) p.box.assign(p.dim, *s.box);
  if (s.x0) {
    if (s.x0->size() != p.dim) throw ConfigError("x0 has wrong length for " + s.name);
    p.x0 = *s.x0;
  }
  p.noise = s.noise;
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return p;
}

/// Per-problem defaults: a wide pilot design for the low-dimensional
/// problems, a tight one for the 64-d problem whose curvature is large at x0.
inline RunConfig default_run_config(const Problem& p) {
  RunConfig c;
  if (p.name == "chained_quartic") {
    c.corcfd.gen_std_scale = 0.1;
    c.corcfd.trunc_lo_scale = 0.01;
  }
  return c;
}

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": bad value for '" + key + "'");
  }
}

template <class T>
void read(const json& j, const char* key, std::optional<T>& out, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if (it->is_null()) {
    out.reset();
    return;
  }
  T v{};
  read(j, key, v, where);
  out = v;
}

inline NoiseKind noise_from_string(const std::string& s) {
  if (s == "gaussian") return NoiseKind::gaussian;
  if (s == "uniform") return NoiseKind::uniform;
  throw ConfigError("unknown noise kind: " + s);
}

}  // namespace detail

inline ProblemSpec parse_problem_spec(const json& j, ProblemSpec base = {}) {
  const std::string where = "problem";
  if (j.is_string()) {
    base.name = j.get<std::string>();
    return base;
  }
  detail::check_keys(j, {"name", "sigma", "sigmas", "dim", "x0", "box", "noise"}, where);
  detail::read(j, "name", base.name, where);
  detail::read(j, "sigma", base.sigma, where);
  detail::read(j, "dim", base.dim, where);
  detail::read(j, "x0", base.x0, where);
  if (auto it = j.find("box"); it != j.end()) {
    std::vector<double> b;
    detail::read(j, "box", b, where);
    if (b.size() != 2) throw ConfigError("problem: box must be [lo, hi]");
    base.box = Interval{b[0], b[1]};
  }
  if (auto it = j.find("noise"); it != j.end()) {
    std::string n;
    detail::read(j, "noise", n, where);
    base.noise = detail::noise_from_string(n);
  }
  return base;
}

/// Strict: unknown keys are errors, so typos never fall back to defaults.
inline RunConfig parse_run_config(const json& j, RunConfig c = {}) {
  const std::string where = "run config";
  detail::check_keys(j, {"algorithm", "budget", "n0", "step", "theta", "max_pairs_per_iteration", "corcfd",
                         "line_search", "gains", "seed", "replication", "strict_budget"},
                     where);
  if (auto it = j.find("algorithm"); it != j.end()) {
    try {
      c.algorithm = algorithm_from_string(it->get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  detail::read(j, "budget", c.budget, where);
  detail::read(j, "n0", c.n0, where);
  detail::read(j, "step", c.step, where);
  detail::read(j, "theta", c.theta, where);
  detail::read(j, "max_pairs_per_iteration", c.max_pairs_per_iteration, where);
  detail::read(j, "seed", c.seed, where);
  detail::read(j, "replication", c.replication, where);
  detail::read(j, "strict_budget", c.strict_budget, where);

  if (auto it = j.find("corcfd"); it != j.end()) {
    const std::string w = "corcfd";
    detail::check_keys(*it, {"K", "I", "gen_mean", "gen_std_scale", "trunc_lo_scale", "h_cap"}, w);
    detail::read(*it, "K", c.corcfd.num_perturbations, w);
    detail::read(*it, "I", c.corcfd.num_bootstrap, w);
    detail::read(*it, "gen_mean", c.corcfd.gen_mean, w);
    detail::read(*it, "gen_std_scale", c.corcfd.gen_std_scale, w);
    detail::read(*it, "trunc_lo_scale", c.corcfd.trunc_lo_scale, w);
    detail::read(*it, "h_cap", c.corcfd.h_cap, w);
  }
  if (auto it = j.find("line_search"); it != j.end()) {
    const std::string w = "line_search";
    detail::check_keys(*it, {"l1", "l2", "a_init", "a_lb", "N0", "sigma_f", "max_shrinks"}, w);
    detail::read(*it, "l1", c.ls.l1, w);
    detail::read(*it, "l2", c.ls.l2, w);
    detail::read(*it, "a_init", c.ls.a_init, w);
    detail::read(*it, "a_lb", c.ls.a_lb, w);
    detail::read(*it, "N0", c.ls.max_samples, w);
    detail::read(*it, "sigma_f", c.ls.sigma_f, w);
    detail::read(*it, "max_shrinks", c.ls.max_shrinks, w);
  }
  if (auto it = j.find("gains"); it != j.end()) {
    const std::string w = "gains";
    detail::check_keys(*it, {"theta_a", "theta_c"}, w);
    detail::read(*it, "theta_a", c.gains.theta_a, w);
    detail::read(*it, "theta_c", c.gains.theta_c, w);
  }
  return c;
}

/// Rejects settings the drivers would throw on, with config-level messages.
inline void validate_run_config(const RunConfig& c) {
  try {
    c.corcfd.validate();
    c.ls.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.budget == 0) throw ConfigError("budget must be positive");
  if (!(c.theta > 0.0)) throw ConfigError("theta must be positive");
  if (!(c.step > 0.0)) throw ConfigError("step must be positive");
  if (c.n0 < 2 * c.corcfd.num_perturbations) throw ConfigError("n0 must be at least 2K");
  if (c.max_pairs_per_iteration == 0) throw ConfigError("max_pairs_per_iteration must be positive");
}

struct AlgorithmSpec {
  std::string label;
  json overrides = json::object();  // applied on top of the per-problem defaults
  bool tune = false;                // SPSA gains from the tuning grid
};

struct ExperimentSpec {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  std::size_t replications = 1;
  std::vector<ProblemSpec> problems;  // one entry per (problem, sigma)
  std::vector<AlgorithmSpec> algorithms;
  std::vector<std::uint64_t> budget_pairs;
  bool pairs_per_dimension = true;  // budget in evaluations = 2 * pairs * d
  bool record_wall_time = false;
  std::size_t parallel = 1;
  std::size_t tune_replications = 20;
  std::string output_dir = "results";

  std::uint64_t budget_evals(std::uint64_t pairs, std::size_t dim) const {
    return 2 * pairs * (pairs_per_dimension ? dim : 1);
  }

  void validate() const {
    if (replications == 0) throw ConfigError("replications must be at least 1");
    if (problems.empty()) throw ConfigError("no problems given");
    if (algorithms.empty()) throw ConfigError("no algorithms given");
    if (budget_pairs.empty()) throw ConfigError("no budgets given");
    if (!std::is_sorted(budget_pairs.begin(), budget_pairs.end()) ||
        std::adjacent_find(budget_pairs.begin(), budget_pairs.end()) != budget_pairs.end())
      throw ConfigError("budget_pairs must be strictly ascending");
    if (budget_pairs.front() == 0) throw ConfigError("budget_pairs must be positive");
    if (parallel == 0) throw ConfigError("parallel must be at least 1");
    if (tune_replications == 0) throw ConfigError("tune_replications must be at least 1");
    for (const auto& ps : problems) {
      const Problem p = make_problem(ps);
      for (const auto& a : algorithms) validate_run_config(parse_run_config(a.overrides, default_run_config(p)));
    }
  }
};

inline ExperimentSpec parse_experiment(const json& j) {
  const std::string where = "experiment";
  detail::check_keys(j, {"name", "seed", "replications", "problems", "algorithms", "budget_pairs",
                         "pairs_per_dimension", "record_wall_time", "parallel", "tune_replications",
                         "output_dir"},
                     where);
  ExperimentSpec s;
  detail::read(j, "name", s.name, where);
  detail::read(j, "seed", s.seed, where);
  detail::read(j, "replications", s.replications, where);
  detail::read(j, "budget_pairs", s.budget_pairs, where);
  detail::read(j, "pairs_per_dimension", s.pairs_per_dimension, where);
  detail::read(j, "record_wall_time", s.record_wall_time, where);
  detail::read(j, "parallel", s.parallel, where);
  detail::read(j, "tune_replications", s.tune_replications, where);
  detail::read(j, "output_dir", s.output_dir, where);

  auto problems_it = j.find("problems");
  if (problems_it == j.end() || !problems_it->is_array()) throw ConfigError("experiment: 'problems' must be a list");
  for (const auto& pj : *problems_it) {
    ProblemSpec base = parse_problem_spec(pj);
    std::vector<double> sigmas{base.sigma};
    if (pj.is_object()) {
      if (pj.contains("sigma") && pj.contains("sigmas")) throw ConfigError("problem: give sigma or sigmas, not both");
      detail::read(pj, "sigmas", sigmas, "problem");
    }
    for (double sigma : sigmas) {
      ProblemSpec ps = base;
      ps.sigma = sigma;
      s.problems.push_back(ps);
    }
  }

  auto algs_it = j.find("algorithms");
  if (algs_it == j.end() || !algs_it->is_array()) throw ConfigError("experiment: 'algorithms' must be a list");
  for (const auto& aj : *algs_it) {
    detail::check_keys(aj, {"label", "config", "tune"}, "algorithm");
    AlgorithmSpec a;
    detail::read(aj, "tune", a.tune, "algorithm");
    if (auto it = aj.find("config"); it != aj.end()) a.overrides = *it;
    const RunConfig probe = parse_run_config(a.overrides);
    a.label = std::string(to_string(probe.algorithm));
    detail::read(aj, "label", a.label, "algorithm");
    if (a.tune && probe.algorithm != Algorithm::spsa) throw ConfigError("tune is only meaningful for spsa");
    s.algorithms.push_back(std::move(a));
  }
  s.validate();
  return s;
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace cordfo
