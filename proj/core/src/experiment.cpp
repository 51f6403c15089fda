#include "qedlab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "qedlab/error.hpp"

namespace qedlab {

using json = nlohmann::json;

namespace {

Vec vec_field(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorKind::ConfigError, std::string("missing field '") + key + "'");
  return j.at(key).get<Vec>();
}

CostSpec parse_cost(const json& j, const LimitParams& limits) {
  const std::string kind = j.at("kind").get<std::string>();
  const std::size_t k = limits.k;
  CostSpec spec;
  if (kind == "power_queue") {
    spec = power_queue_cost(vec_field(j, "coeffs"), vec_field(j, "powers"));
  } else if (kind == "linear_queue" || kind == "delay") {
    spec = linear_queue_cost(vec_field(j, "coeffs"));
  } else if (kind == "abandonment") {
    spec = abandonment_cost(vec_field(j, "coeffs"), limits.theta);
  } else if (kind == "idling") {
    spec = idling_cost(k);
  } else if (kind == "customers_in_system") {
    if (j.value("scale", std::string()) != "diffusion")
      throw Error(ErrorKind::ConfigError, "customers_in_system cost requires \"scale\": \"diffusion\"");
    spec = customers_in_system_cost(vec_field(j, "coeffs"));
  } else if (kind == "weighted_sum") {
    std::vector<CostSpec> terms;
    for (const auto& t : j.at("terms")) terms.push_back(parse_cost(t, limits));
    spec = weighted_sum_cost(std::move(terms));
  } else if (kind == "zero") {
    spec = zero_cost(k);
  } else {
    throw Error(ErrorKind::ConfigError, "unknown cost kind '" + kind + "'");
  }
  if (spec.kind != CostKind::Idling && spec.kind != CostKind::WeightedSum && spec.coeffs.size() != k)
    throw Error(ErrorKind::ConfigError, "cost coefficients must have one entry per class");
  spec.offset = j.value("offset", 0.0);
  spec.growth_constant += std::abs(spec.offset);
  if (j.contains("growth_degree")) spec.growth_degree = j.at("growth_degree").get<int>();
  if (spec.growth_degree < 1) throw Error(ErrorKind::ConfigError, "growth_degree must be >= 1");
  return spec;
}

PolicyDescriptor parse_policy(const json& j) {
  PolicyDescriptor d;
  std::string kind;
  if (j.is_string()) {
    kind = j.get<std::string>();
  } else {
    kind = j.at("kind").get<std::string>();
    if (j.contains("order"))
      for (int c : j.at("order").get<std::vector<int>>()) {
        if (c < 1) throw Error(ErrorKind::ConfigError, "priority classes are 1-based");
        d.order.push_back(static_cast<std::size_t>(c - 1));
      }
    d.eps_exponent = j.value("eps_exponent", 0.25);
  }
  if (kind == "pscp") d.kind = PolicyKind::PSCP;
  else if (kind == "nscp1") d.kind = PolicyKind::NSCP1;
  else if (kind == "nscp2") d.kind = PolicyKind::NSCP2;
  else if (kind == "prio") d.kind = PolicyKind::StaticPriority;
  else if (kind == "cmu") d.kind = PolicyKind::CMu;
  else if (kind == "cmutheta") d.kind = PolicyKind::CMuTheta;
  else throw Error(ErrorKind::ConfigError, "unknown policy kind '" + kind + "'");
  return d;
}

InterarrivalFamily parse_family(const std::string& s) {
  if (s == "auto") return InterarrivalFamily::Auto;
  if (s == "exponential") return InterarrivalFamily::Exponential;
  if (s == "gamma") return InterarrivalFamily::Gamma;
  if (s == "hyperexponential") return InterarrivalFamily::HyperExpBalanced;
  if (s == "deterministic") return InterarrivalFamily::Deterministic;
  throw Error(ErrorKind::ConfigError, "unknown interarrival family '" + s + "'");
}

std::string seed_range(std::uint64_t first, std::uint64_t last) {
  return std::to_string(first) + "-" + std::to_string(last);
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::shared_ptr<const ValueGrid> ensure_grid(const ExperimentConfig& cfg, std::shared_ptr<const ValueGrid> solved,
                                             std::ostream& log) {
  if (solved) {
    if (solved->cost_hash != cfg.cost.hash())
      throw Error(ErrorKind::ConfigError, "supplied value grid was solved for a different cost");
    return solved;
  }
  log << "solving HJB on [-" << cfg.grid.box_halfwidth << "," << cfg.grid.box_halfwidth << "]^" << cfg.limits.k
      << " with " << cfg.grid.points_per_axis << " points per axis\n";
  return std::make_shared<const ValueGrid>(solve_hjb(cfg.grid, cfg.cost, diffusion_coeffs(cfg.limits), cfg.limits));
}

}  // namespace

double sweep_horizon(const ExperimentConfig& cfg, const SystemParams& sys, const SchedulingPolicy& policy,
                    const QueueState& initial) {
  const double pilot_t = std::max(cfg.horizon_rule.pilot_horizon, 1e-3);
  const SimResult pilot = run_simulation(sys, policy, cfg.cost, initial, pilot_t, cfg.base_seed ^ 0x5eedULL);
  const double gamma = cfg.limits.gamma;
  const double scale = pilot.discounted_cost * gamma / (1.0 - std::exp(-gamma * pilot_t));
  return horizon_for(gamma, cfg.cost.growth_degree, pilot.max_running_cost, scale, cfg.horizon_rule);
}

std::string format_vec(const Vec& v, char sep) {
  std::ostringstream os;
  os << std::setprecision(10);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? std::string(1, sep) : "") << v[i];
  return os.str();
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    cfg.experiment_id = j.value("experiment_id", cfg.experiment_id);
    const json& lj = j.at("limits");
    LimitParams raw;
    raw.lambda = vec_field(lj, "lambda");
    raw.k = raw.lambda.size();
    raw.mu = vec_field(lj, "mu");
    raw.theta = vec_field(lj, "theta");
    raw.lambda_hat = lj.contains("lambda_hat") ? vec_field(lj, "lambda_hat") : Vec(raw.k, 0.0);
    raw.mu_hat = lj.contains("mu_hat") ? vec_field(lj, "mu_hat") : Vec(raw.k, 0.0);
    raw.c2u = lj.contains("c2u") ? vec_field(lj, "c2u") : Vec(raw.k, 1.0);
    raw.gamma = lj.value("gamma", 1.0);
    cfg.limits = validate_limits(std::move(raw));

    cfg.cost = parse_cost(j.at("cost"), cfg.limits);
    cfg.cost_id = j.at("cost").value("id", std::string());
    if (cfg.cost_id.empty()) {
      std::ostringstream os;
      os << "cost-" << std::hex << (cfg.cost.hash() & 0xffffffffULL);
      cfg.cost_id = os.str();
    }
    cfg.cost.id = cfg.cost_id;

    if (j.contains("grid")) {
      const json& g = j.at("grid");
      cfg.grid.box_halfwidth = g.value("box_halfwidth", cfg.grid.box_halfwidth);
      cfg.grid.points_per_axis = g.value("points_per_axis", cfg.grid.points_per_axis);
      cfg.grid.simplex_resolution = g.value("simplex_resolution", cfg.grid.simplex_resolution);
      cfg.grid.tol_residual = g.value("tol_residual", cfg.grid.tol_residual);
      cfg.grid.max_policy_iters = g.value("max_policy_iters", cfg.grid.max_policy_iters);
      cfg.grid.defect_sweeps = g.value("defect_sweeps", cfg.grid.defect_sweeps);
      const std::string scheme = g.value("scheme", std::string("hybrid"));
      if (scheme == "hybrid") cfg.grid.scheme = DriftScheme::Hybrid;
      else if (scheme == "upwind") cfg.grid.scheme = DriftScheme::Upwind;
      else throw Error(ErrorKind::ConfigError, "unknown scheme '" + scheme + "'");
    }
    cfg.grid.validate();

    cfg.sweep_n = j.value("sweep_n", std::vector<std::int64_t>{});
    for (std::size_t i = 1; i < cfg.sweep_n.size(); ++i)
      if (cfg.sweep_n[i] <= cfg.sweep_n[i - 1]) throw Error(ErrorKind::ConfigError, "sweep_n must be strictly increasing");
    if (j.contains("policies"))
      for (const auto& p : j.at("policies")) cfg.policies.push_back(parse_policy(p));
    cfg.reps = j.value("reps", cfg.reps);
    if (cfg.reps < 2) throw Error(ErrorKind::ConfigError, "reps must be >= 2");
    cfg.base_seed = j.value("base_seed", cfg.base_seed);
    if (j.contains("horizon_rule")) {
      const json& h = j.at("horizon_rule");
      cfg.horizon_rule.rel_tail = h.value("rel_tail", cfg.horizon_rule.rel_tail);
      cfg.horizon_rule.safety = h.value("safety", cfg.horizon_rule.safety);
      cfg.horizon_rule.pilot_horizon = h.value("pilot_horizon", cfg.horizon_rule.pilot_horizon);
    }
    cfg.output_path = j.value("output_path", cfg.output_path);
    cfg.x0 = j.contains("x0") ? vec_field(j, "x0") : Vec(cfg.limits.k, 0.0);
    if (cfg.x0.size() != cfg.limits.k) throw Error(ErrorKind::ConfigError, "x0 must have one entry per class");
    if (j.contains("probes")) cfg.probes = j.at("probes").get<std::vector<Vec>>();
    for (const auto& p : cfg.probes)
      if (p.size() != cfg.limits.k) throw Error(ErrorKind::ConfigError, "probe points must have one entry per class");
    cfg.interarrival = parse_family(j.value("interarrival", std::string("auto")));
    if (j.contains("sde")) {
      cfg.sde_dt = j.at("sde").value("dt", cfg.sde_dt);
      cfg.sde_reps = j.at("sde").value("reps", cfg.sde_reps);
    }
    cfg.inject_corrupt_policy = j.value("inject_corrupt_policy", false);
    cfg.control_variate = j.value("control_variate", true);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string policy_label(const PolicyDescriptor& d) {
  switch (d.kind) {
    case PolicyKind::PSCP: return "pscp";
    case PolicyKind::NSCP1: return "nscp1";
    case PolicyKind::NSCP2: return "nscp2";
    case PolicyKind::StaticPriority: return "prio";
    case PolicyKind::CMu: return "cmu";
    case PolicyKind::CMuTheta: return "cmutheta";
    case PolicyKind::CustomPreemptive: return "custom";
  }
  return "unknown";
}

SchedulingPolicy build_policy(const PolicyDescriptor& d, const ExperimentConfig& cfg,
                              std::shared_ptr<const ValueGrid> vg, std::int64_t n) {
  const std::size_t k = cfg.limits.k;
  switch (d.kind) {
    case PolicyKind::PSCP: return make_pscp(extract_policy_fn(std::move(vg)));
    case PolicyKind::NSCP1: return make_nscp1(extract_policy_fn(std::move(vg)));
    case PolicyKind::NSCP2: {
      const double exponent = d.eps_exponent;
      return make_nscp2(extract_policy_fn(std::move(vg)), k, n, cfg.cost,
                        [exponent](std::int64_t m) { return std::pow(static_cast<double>(m), -exponent); });
    }
    case PolicyKind::StaticPriority: {
      auto order = d.order;
      if (order.empty())
        for (std::size_t i = k; i-- > 0;) order.push_back(i);
      return make_static_priority(std::move(order));
    }
    case PolicyKind::CMu: return make_cmu(cfg.cost.coeffs);
    case PolicyKind::CMuTheta: return make_cmu_theta(cfg.cost.coeffs, cfg.limits.theta);
    case PolicyKind::CustomPreemptive: break;
  }
  throw Error(ErrorKind::ConfigError, "policy kind cannot be built from a config");
}

std::unique_ptr<std::ostream> open_csv_for_append(const std::string& path, const std::string& header) {
  bool fresh = true;
  {
    std::ifstream in(path);
    std::string first;
    if (in && std::getline(in, first)) {
      fresh = false;
      if (first != header)
        throw Error(ErrorKind::IoError, "'" + path + "' has a different CSV schema (header mismatch)");
    }
  }
  auto out = std::make_unique<std::ofstream>(path, std::ios::app);
  if (!*out) throw Error(ErrorKind::IoError, "cannot open '" + path + "' for writing");
  if (fresh) *out << header << "\n";
  return out;
}

SolveSummary cmd_solve(const ExperimentConfig& cfg, const std::string& grid_out, std::ostream& log) {
  const DiffusionCoeffs coeffs = diffusion_coeffs(cfg.limits);
  SolveSummary summary{solve_hjb(cfg.grid, cfg.cost, coeffs, cfg.limits), {}, {}};
  summary.residual = residual_report(summary.grid, cfg.cost, coeffs, cfg.limits);
  if (!grid_out.empty()) {
    std::ofstream out(grid_out);
    if (!out) throw Error(ErrorKind::IoError, "cannot write '" + grid_out + "'");
    write_value_grid_csv(summary.grid, out);
  }
  std::vector<Vec> probes = cfg.probes;
  probes.insert(probes.begin(), cfg.x0);
  for (const auto& p : probes) summary.probe_values.emplace_back(p, summary.grid.value_at(p));
  log << "solve: iterations=" << summary.grid.stats.iterations
      << " max_residual=" << summary.residual.max_interior_residual
      << " interior_fraction_below_1e-2=" << summary.residual.interior_fraction
      << " growth_C=" << summary.grid.stats.growth_constant;
  for (const auto& [p, v] : summary.probe_values) log << " V(" << format_vec(p, ',') << ")=" << std::setprecision(10) << v;
  log << "\n";
  return summary;
}

SweepResult cmd_sweep(const ExperimentConfig& cfg, std::ostream& csv, std::ostream& log,
                      std::shared_ptr<const ValueGrid> solved) {
  SweepResult result;
  if (cfg.sweep_n.empty() || cfg.policies.empty()) return result;
  const auto vg = ensure_grid(cfg, std::move(solved), log);
  const DiffusionCoeffs coeffs = diffusion_coeffs(cfg.limits);
  result.value_at_x0 = vg->value_at(cfg.x0);
  const double v = result.value_at_x0;
  const std::string x0 = format_vec(cfg.x0);
  const PolicyFn h = extract_policy_fn(vg);
  const auto value_fn = [vg](std::span<const double> x) { return vg->value_at(x); };

  auto emit = [&](const SweepRow& row) {
    csv << cfg.experiment_id << "," << row.n << "," << row.policy_id << "," << cfg.cost_id << "," << x0 << ","
        << fmt(row.mean) << "," << fmt(row.se) << "," << fmt(row.gap_to_v) << "," << row.wc_violations << ","
        << row.np_violations << "," << row.seed_range << "\n";
    result.rows.push_back(row);
  };

  for (std::int64_t n : cfg.sweep_n) {
    const SystemParams sys = build_system(cfg.limits, n);
    const QueueState initial = initial_state_for(cfg.x0, sys);
    const double horizon = sweep_horizon(cfg, sys, build_policy(cfg.policies.front(), cfg, vg, n), initial);
    for (const auto& d : cfg.policies) {
      const SchedulingPolicy policy = build_policy(d, cfg, vg, n);
      SimOptions opts;
      opts.family = cfg.interarrival;
      opts.diagnostic_h = h;
      if (cfg.control_variate) opts.control_value = value_fn;
      const ReplicationSummary rep = replicate(sys, policy, cfg.cost, initial, horizon, cfg.reps, cfg.base_seed, opts);
      SweepRow row;
      row.n = std::to_string(n);
      row.policy_id = policy.id;
      row.mean = rep.mean_cost;
      row.se = rep.std_error;
      row.gap_to_v = rep.mean_cost - v;
      row.wc_violations = rep.wc_violations;
      row.np_violations = rep.np_violations;
      row.seed_range = seed_range(rep.first_seed, rep.last_seed);
      row.control_gap = rep.mean_control_gap;
      row.control_gap_se = rep.se_control_gap;
      log << "n=" << n << " " << policy.id << " T=" << std::setprecision(4) << horizon << " mean=" << std::setprecision(6)
          << rep.mean_cost << " se=" << rep.std_error << " gap=" << row.gap_to_v;
      if (rep.control_variate) log << " (raw mean=" << rep.raw_mean_cost << " se=" << rep.raw_std_error << ")";
      log << "\n";
      emit(row);
    }
  }

  SdeRunConfig sde;
  sde.x0 = cfg.x0;
  sde.dt = cfg.sde_dt;
  sde.reps = cfg.sde_reps;
  sde.seed = cfg.base_seed;
  sde.horizon = horizon_for(cfg.limits.gamma, cfg.cost.growth_degree, 1.0, 1.0, cfg.horizon_rule);
  const DiffusionEstimate est = simulate_cost(sde, h, cfg.cost, coeffs, cfg.limits);
  emit({"diffusion", "hjb", est.mean, est.se, est.mean - v, 0, 0, seed_range(0, static_cast<std::uint64_t>(sde.reps - 1))});
  emit({"grid", "V", v, 0.0, 0.0, 0, 0, ""});
  return result;
}

std::vector<AuditLine> cmd_audit(const ExperimentConfig& cfg, std::ostream& log,
                                 std::shared_ptr<const ValueGrid> solved) {
  std::vector<AuditLine> lines;
  auto record = [&](std::string name, bool ok, std::string detail) {
    log << (ok ? "PASS " : "FAIL ") << name << (detail.empty() ? "" : "  (" + detail + ")") << "\n";
    lines.push_back({std::move(name), ok, std::move(detail)});
  };
  const std::size_t k = cfg.limits.k;
  std::mt19937_64 rng(cfg.base_seed);

  // Theta rounding over random nonnegative vectors with integer totals.
  {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> total_dist(0, 500);
    std::uniform_int_distribution<int> dim_dist(1, 6);
    bool ok = true;
    std::string detail;
    for (int trial = 0; trial < 10000 && ok; ++trial) {
      const auto dim = static_cast<std::size_t>(dim_dist(rng));
      Vec w(dim);
      for (double& x : w) x = unit(rng);
      const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
      const double total = total_dist(rng);
      Vec y(dim);
      for (std::size_t i = 0; i < dim; ++i) y[i] = wsum > 0 ? total * w[i] / wsum : 0.0;
      // Re-anchor the last entry so the total is exactly integral.
      y[dim - 1] = std::max(0.0, total - std::accumulate(y.begin(), y.end() - 1, 0.0));
      IVec z;
      try {
        z = theta_round(y);
      } catch (const Error& e) {
        ok = false;
        detail = e.what();
        break;
      }
      double err2 = 0.0;
      std::int64_t zsum = 0;
      for (std::size_t i = 0; i < dim; ++i) {
        if (z[i] < 0) ok = false;
        zsum += z[i];
        err2 += (static_cast<double>(z[i]) - y[i]) * (static_cast<double>(z[i]) - y[i]);
      }
      if (zsum != static_cast<std::int64_t>(std::llround(total))) ok = false;
      if (std::sqrt(err2) > 2.0 * static_cast<double>(dim)) ok = false;
      if (!ok) detail = "trial " + std::to_string(trial);
    }
    record("theta_round sum/nonnegativity/2k bound (10^4 cases)", ok, detail);
  }

  const auto vg = ensure_grid(cfg, std::move(solved), log);
  const DiffusionCoeffs coeffs = diffusion_coeffs(cfg.limits);
  const PolicyFn h = extract_policy_fn(vg);

  // Policy table on the simplex.
  {
    bool ok = true;
    for (std::size_t node = 0; node < vg->node_count() && ok; ++node) ok = on_simplex(vg->policy(node), 1e-10);
    std::uniform_real_distribution<double> box(-1.5 * cfg.grid.box_halfwidth, 1.5 * cfg.grid.box_halfwidth);
    Vec x(k);
    for (int trial = 0; trial < 2000 && ok; ++trial) {
      for (double& xi : x) xi = box(rng);
      ok = on_simplex(h(x), 1e-10);
    }
    record("policy outputs lie on the simplex", ok, "");
  }

  // Hamiltonian independent of u where 1.x <= 0.
  {
    bool ok = true;
    double worst = 0.0;
    std::exponential_distribution<double> e1(1.0);
    for (std::size_t node = 0; node < vg->node_count(); ++node) {
      const Vec x = vg->coordinates(node);
      if (std::accumulate(x.begin(), x.end(), 0.0) > 0.0) continue;
      const Vec p = grid_gradient(*vg, node);
      auto phi = [&](std::span<const double> u) {
        const Vec b = drift(x, u, coeffs, cfg.limits);
        double v = eval_L(cfg.cost, x, u);
        for (std::size_t i = 0; i < k; ++i) v += b[i] * p[i];
        return v;
      };
      const double stored = phi(vg->policy(node));
      for (int t = 0; t < 10; ++t) {
        Vec u(k);
        for (double& ui : u) ui = e1(rng);
        u = project_to_simplex(u);
        worst = std::max(worst, std::abs(phi(u) - stored));
      }
    }
    ok = worst <= 1e-10;
    record("Hamiltonian independent of u where 1.x <= 0", ok, "max deviation " + fmt(worst));
  }

  // P-SCP assignments satisfy the service constraints on random states.
  {
    const std::int64_t n = cfg.sweep_n.empty() ? 100 : cfg.sweep_n.front();
    const SystemParams sys = build_system(cfg.limits, n);
    std::uniform_int_distribution<std::int64_t> occ(0, 2 * n);
    bool ok = true;
    for (int trial = 0; trial < 10000 && ok; ++trial) {
      QueueState s(k);
      for (std::size_t i = 0; i < k; ++i) s.psi[i] = occ(rng);
      const IVec psi = p_scp_assign(s, sys, h);
      const IVec x = s.x();
      std::int64_t busy = 0;
      for (std::size_t i = 0; i < k; ++i) {
        if (psi[i] < 0 || psi[i] > x[i]) ok = false;
        busy += psi[i];
      }
      if (busy > n) ok = false;
      if (std::max<std::int64_t>(0, s.total() - n) != s.total() - busy) ok = false;
    }
    record("p_scp_assign respects service constraints and work conservation (10^4 states)", ok, "");
  }

  // Simulation invariants and abandonment-identity statistic per policy.
  const std::int64_t n = cfg.sweep_n.empty() ? 100 : cfg.sweep_n.front();
  const SystemParams sys = build_system(cfg.limits, n);
  const QueueState initial = initial_state_for(cfg.x0, sys);
  const int audit_reps = std::max(cfg.reps / 4, 20);
  std::vector<PolicyDescriptor> policies = cfg.policies;
  if (policies.empty()) policies.push_back({});
  const double horizon = sweep_horizon(cfg, sys, build_policy(policies.front(), cfg, vg, n), initial);
  for (const auto& d : policies) {
    const SchedulingPolicy policy = build_policy(d, cfg, vg, n);
    SimOptions opts;
    opts.family = cfg.interarrival;
    try {
      const ReplicationSummary rep = replicate(sys, policy, cfg.cost, initial, horizon, audit_reps, cfg.base_seed, opts);
      record(policy.id + ": flow balance and occupancy invariants", true, std::to_string(rep.events) + " events");
      record(policy.id + ": work conservation", rep.wc_violations == 0, std::to_string(rep.wc_violations) + " violations");
      if (policy.declares_nonpreemptive)
        record(policy.id + ": nonpreemption", rep.np_violations == 0, std::to_string(rep.np_violations) + " violations");
      const double worst = *std::max_element(rep.abandonment_gap_se.begin(), rep.abandonment_gap_se.end());
      record(policy.id + ": abandonment count matches theta * int phi (<= 3 SE)", worst <= 3.0, "max " + fmt(worst) + " SE");
      const SimResult a = run_simulation(sys, policy, cfg.cost, initial, horizon, cfg.base_seed + 7, opts);
      const SimResult b = run_simulation(sys, policy, cfg.cost, initial, horizon, cfg.base_seed + 7, opts);
      record(policy.id + ": seed replay is bit-identical",
             a.discounted_cost == b.discounted_cost && a.event_count == b.event_count, fmt(a.discounted_cost));
    } catch (const Error& e) {
      record(policy.id + ": simulation", false, e.what());
    }
  }

  if (cfg.inject_corrupt_policy) {
    const SchedulingPolicy bad = make_custom_preemptive("corrupt", [](const QueueState& s, const SystemParams& sp) {
      IVec psi = s.x();
      psi[0] += sp.n + 1;
      return psi;
    });
    try {
      run_simulation(sys, bad, cfg.cost, initial, horizon, cfg.base_seed);
      record("corrupt policy hook: contract enforced", false, "no violation raised");
    } catch (const Error& e) {
      record("corrupt policy hook: policy contract", false, e.what());
    }
  }
  return lines;
}

void cmd_simulate(const ExperimentConfig& cfg, std::ostream& csv, std::ostream& log,
                  std::shared_ptr<const ValueGrid> solved) {
  const auto vg = ensure_grid(cfg, std::move(solved), log);
  std::vector<std::int64_t> sizes = cfg.sweep_n;
  if (sizes.empty()) sizes.push_back(100);
  std::vector<PolicyDescriptor> policies = cfg.policies;
  if (policies.empty()) policies.push_back({});
  for (std::int64_t n : sizes) {
    const SystemParams sys = build_system(cfg.limits, n);
    const QueueState initial = initial_state_for(cfg.x0, sys);
    const double horizon = sweep_horizon(cfg, sys, build_policy(policies.front(), cfg, vg, n), initial);
    for (const auto& d : policies) {
      const SchedulingPolicy policy = build_policy(d, cfg, vg, n);
      SimOptions opts;
      opts.family = cfg.interarrival;
      for (int j = 0; j < cfg.reps; ++j) {
        const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(j);
        const SimResult r = run_simulation(sys, policy, cfg.cost, initial, horizon, seed, opts);
        csv << seed << "," << n << "," << policy.id << "," << cfg.cost_id << "," << fmt(r.discounted_cost) << ","
            << fmt(r.tail_bound) << "," << fmt(r.abandon_gap_max_se()) << "," << r.wc_violations << ","
            << r.np_violations << "," << r.event_count << "\n";
      }
      log << "n=" << n << " " << policy.id << ": " << cfg.reps << " replications\n";
    }
  }
}

}  // namespace qedlab
