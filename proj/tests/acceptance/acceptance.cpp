// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include <boost/math/distributions/chi_squared.hpp>

#include "qedlab/error.hpp"
#include "qedlab/experiment.hpp"
#include "qedlab/simplex.hpp"

using namespace qedlab;

namespace {

std::string config_path(const char* name) { return std::string(QEDLAB_CONFIG_DIR) + "/" + name; }

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string num(double v, int prec = 6) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

// 1. HJB grid value, k=1 ODE oracle and diffusion Monte Carlo agree pairwise.
Outcome k1_triangle() {
  const auto cfg = load_config(config_path("k1_linear.json"));
  const auto co = diffusion_coeffs(cfg.limits);
  const auto vg = std::make_shared<const ValueGrid>(solve_hjb(cfg.grid, cfg.cost, co, cfg.limits));
  const auto ode = solve_k1_reference(cfg.cost, co, cfg.limits, cfg.grid.box_halfwidth, 4000);
  const PolicyFn h = extract_policy_fn(vg);
  SdeRunConfig sde;
  sde.dt = 1e-3;
  sde.reps = 4000;
  sde.seed = cfg.base_seed;
  sde.horizon = horizon_for(cfg.limits.gamma, cfg.cost.growth_degree, 1.0, 1.0, cfg.horizon_rule);
  bool ok = true;
  std::ostringstream os;
  for (double x : {-1.0, 0.0, 1.0}) {
    sde.x0 = {x};
    const auto mc = simulate_cost(sde, h, cfg.cost, co, cfg.limits);
    const double v = vg->value_at(sde.x0), o = ode(x);
    const double tol_mc = std::max(3.0 * mc.se, 5e-3);
    const bool here = std::abs(v - o) <= 5e-3 && std::abs(v - mc.mean) <= tol_mc && std::abs(o - mc.mean) <= tol_mc;
    ok = ok && here;
    os << " x=" << x << ": grid " << num(v) << ", ode " << num(o) << ", mc " << num(mc.mean) << "±" << num(mc.se, 2)
       << ";";
  }
  return {ok, os.str()};
}

// 2. Erlang-A: sampled occupancy of the n=20 single-class system against the
// birth-death stationary law.
Outcome erlang_a() {
  const int n = 20;
  LimitParams p;
  p.k = 1;
  p.lambda = {1.0};
  p.mu = {1.0};
  p.theta = {0.5};
  p.lambda_hat = {-2.0 / std::sqrt(double(n))};
  p.mu_hat = {0.0};
  p.c2u = {1.0};
  p.gamma = 1.0;
  const auto sys = build_system(validate_limits(p), n);
  const double lam = sys.lambda_n[0], mu = sys.mu_n[0], th = sys.theta_n[0];

  const int cap = 200;
  std::vector<double> pi(cap + 1);
  pi[0] = 1.0;
  for (int x = 1; x <= cap; ++x) pi[x] = pi[x - 1] * lam / (std::min(x, n) * mu + std::max(x - n, 0) * th);
  const double z = std::accumulate(pi.begin(), pi.end(), 0.0);
  for (double& v : pi) v /= z;

  const long epochs = 100000;
  const double burn_in = 20.0, spacing = 5.0;
  std::vector<long> counts(cap + 1, 0);
  double next = burn_in;
  long sampled = 0;
  std::int64_t last = 0;
  SimOptions opts;
  opts.observer = [&](const QueueState& s) {
    while (s.now > next && sampled < epochs) {
      ++counts[std::min<std::int64_t>(last, cap)];
      next += spacing;
      ++sampled;
    }
    last = s.total();
  };
  QueueState init(1);
  init.psi = {18};
  run_simulation(sys, make_static_priority({0}), linear_queue_cost({1.0}), init, burn_in + spacing * epochs + 1.0,
                 20240601, opts);

  // bins with expected count >= 5
  std::vector<std::pair<double, double>> bins;  // expected, observed
  double e_acc = 0.0, o_acc = 0.0;
  for (int x = 0; x <= cap; ++x) {
    e_acc += pi[x] * epochs;
    o_acc += counts[x];
    if (e_acc >= 5.0 && x < cap) {
      bins.emplace_back(e_acc, o_acc);
      e_acc = o_acc = 0.0;
    }
  }
  if (!bins.empty()) {
    bins.back().first += e_acc;
    bins.back().second += o_acc;
  }
  double chi2 = 0.0;
  for (const auto& [e, o] : bins) chi2 += (o - e) * (o - e) / e;
  const double df = double(bins.size() - 1);
  const double pval = boost::math::cdf(boost::math::complement(boost::math::chi_squared(df), chi2));
  return {sampled == epochs && pval > 0.01,
          "chi2=" + num(chi2) + " df=" + num(df) + " p=" + num(pval, 4) + " (" + std::to_string(sampled) + " epochs)"};
}

std::shared_ptr<const ValueGrid> solve(const ExperimentConfig& cfg) {
  return std::make_shared<const ValueGrid>(solve_hjb(cfg.grid, cfg.cost, diffusion_coeffs(cfg.limits), cfg.limits));
}

// 3. Abandonment counts against theta * integral of the queue, n = 100.
Outcome lemma1(const ExperimentConfig& cfg, std::shared_ptr<const ValueGrid> vg) {
  const std::int64_t n = 100;
  const auto sys = build_system(cfg.limits, n);
  const auto init = initial_state_for(cfg.x0, sys);
  bool ok = true;
  std::ostringstream os;
  for (const auto& d : cfg.policies) {
    const auto pol = build_policy(d, cfg, vg, n);
    const double T = sweep_horizon(cfg, sys, pol, init);
    const auto rep = replicate(sys, pol, cfg.cost, init, T, 200, cfg.base_seed);
    os << " " << pol.id << ":";
    for (std::size_t i = 0; i < cfg.limits.k; ++i) {
      ok = ok && rep.abandonment_gap_se[i] <= 3.0;
      os << " class " << i + 1 << " R=" << num(rep.mean_observed_abandonments[i], 5)
         << " theta*int(phi)=" << num(rep.mean_expected_abandonments[i], 5) << " (" << num(rep.abandonment_gap_se[i], 3)
         << " SE)";
    }
    os << ";";
  }
  return {ok, os.str()};
}

// 4. Invariant suite: the audit matrix plus counters for every policy kind.
Outcome invariants(const ExperimentConfig& cfg, std::shared_ptr<const ValueGrid> vg) {
  std::ostringstream log;
  const auto lines = cmd_audit(cfg, log, vg);
  std::size_t failed = 0;
  std::string first_failure;
  for (const auto& l : lines)
    if (!l.passed && failed++ == 0) first_failure = l.name + " " + l.detail;

  std::vector<PolicyDescriptor> all;
  for (auto kind : {PolicyKind::PSCP, PolicyKind::NSCP1, PolicyKind::NSCP2, PolicyKind::StaticPriority, PolicyKind::CMu,
                    PolicyKind::CMuTheta})
    all.push_back({kind, {}, 0.25});
  std::int64_t wc = 0, np = 0, events = 0;
  for (std::int64_t n : {25, 100}) {
    const auto sys = build_system(cfg.limits, n);
    const auto init = initial_state_for(cfg.x0, sys);
    for (const auto& d : all) {
      const auto pol = build_policy(d, cfg, vg, n);
      const auto rep = replicate(sys, pol, cfg.cost, init, 10.0, 20, cfg.base_seed);
      wc += rep.wc_violations;
      if (pol.declares_nonpreemptive) np += rep.np_violations;
      events += rep.events;
    }
  }
  const bool ok = failed == 0 && wc == 0 && np == 0;
  std::string detail = std::to_string(lines.size() - failed) + "/" + std::to_string(lines.size()) +
                       " audit checks; all six policy kinds: " + std::to_string(events) + " events, " +
                       std::to_string(wc) + " work-conservation and " + std::to_string(np) +
                       " nonpreemption violations";
  if (failed) detail += "; first failure: " + first_failure;
  return {ok, detail};
}

// 5. HJB structure: monotone assembly, residual, domain doubling, concavity.
Outcome hjb_structure(const ExperimentConfig& cfg, std::shared_ptr<const ValueGrid> vg_in) {
  const auto co = diffusion_coeffs(cfg.limits);
  ValueGrid vg = *vg_in;
  std::vector<double> table;
  for (std::size_t node = 0; node < vg.node_count(); ++node)
    for (double u : vg.policy(node)) table.push_back(u);
  const auto mono = check_scheme_monotonicity(cfg.grid, table, cfg.cost, co, cfg.limits);
  const auto res = residual_report(vg, cfg.cost, co, cfg.limits);

  GridSpec big = cfg.grid;
  big.box_halfwidth *= 2.0;
  big.points_per_axis = 2 * cfg.grid.points_per_axis - 1;
  const auto wide = solve_hjb(big, cfg.cost, co, cfg.limits);
  double doubling = 0.0;
  const double half = 0.5 * cfg.grid.box_halfwidth;
  for (std::size_t node = 0; node < vg.node_count(); ++node) {
    const Vec x = vg.coordinates(node);
    if (std::all_of(x.begin(), x.end(), [&](double v) { return std::abs(v) <= half + 1e-12; }))
      doubling = std::max(doubling, std::abs(vg.values()[node] - wide.value_at(x)));
  }

  const SimplexMesh mesh(cfg.limits.k, cfg.grid.simplex_resolution);
  std::mt19937_64 rng(cfg.base_seed);
  std::uniform_real_distribution<double> box(-cfg.grid.box_halfwidth, cfg.grid.box_halfwidth), unit(0.0, 1.0),
      slope(-10.0, 10.0);
  double worst_concavity = 0.0;
  for (int t = 0; t < 1000; ++t) {
    Vec x(cfg.limits.k), p(cfg.limits.k), q(cfg.limits.k), m(cfg.limits.k);
    const double a = unit(rng);
    for (std::size_t i = 0; i < cfg.limits.k; ++i) {
      x[i] = box(rng);
      p[i] = slope(rng);
      q[i] = slope(rng);
      m[i] = a * p[i] + (1 - a) * q[i];
    }
    const double lhs = hamiltonian(x, m, cfg.cost, co, cfg.limits, mesh).value;
    const double rhs = a * hamiltonian(x, p, cfg.cost, co, cfg.limits, mesh).value +
                       (1 - a) * hamiltonian(x, q, cfg.cost, co, cfg.limits, mesh).value;
    worst_concavity = std::max(worst_concavity, rhs - lhs);
  }
  const bool ok = mono.offdiag_nonpositive && mono.strictly_diagonally_dominant &&
                  res.max_interior_residual <= 1e-2 && doubling <= 10.0 * cfg.grid.tol_residual &&
                  worst_concavity <= 1e-9;
  return {ok, "M-matrix margin " + num(mono.min_dominance_margin) + "; max interior residual " +
                  num(res.max_interior_residual, 3) + "; domain doubling " + num(doubling, 3) + " (limit " +
                  num(10.0 * cfg.grid.tol_residual, 3) + "); worst concavity defect " + num(worst_concavity, 3) +
                  " over 1000 samples"};
}

// 6. Proposed policies converge to V(x).
Outcome convergence(const ExperimentConfig& cfg, std::shared_ptr<const ValueGrid> vg, std::string& diagnostic,
                    bool& diagnostic_ok) {
  std::ostringstream csv, log;
  const auto sweep = cmd_sweep(cfg, csv, log, vg);
  const double v = sweep.value_at_x0;
  bool ok = true;
  diagnostic_ok = true;
  std::ostringstream os, diag;
  os << "V(x0)=" << num(v) << ";";
  for (const auto& d : cfg.policies) {
    std::vector<const SweepRow*> rows;
    for (const auto& r : sweep.rows)
      if (r.policy_id.rfind(policy_label(d), 0) == 0 && r.n != "diffusion" && r.n != "grid") rows.push_back(&r);
    os << " " << policy_label(d) << " |gap|:";
    diag << " " << policy_label(d) << ":";
    for (std::size_t j = 0; j < rows.size(); ++j) {
      const double gap = std::abs(rows[j]->gap_to_v);
      os << " n=" << rows[j]->n << " " << num(gap, 3) << "±" << num(rows[j]->se, 2);
      diag << " " << num(rows[j]->control_gap, 3) << "±" << num(rows[j]->control_gap_se, 2);
      if (j > 0) {
        ok = ok && gap <= std::abs(rows[j - 1]->gap_to_v) + rows[j]->se;
        diagnostic_ok = diagnostic_ok && rows[j]->control_gap <= rows[j - 1]->control_gap + rows[j]->control_gap_se;
      }
    }
    if (rows.empty()) ok = false;
    else {
      const double rel = std::abs(rows.back()->gap_to_v) / std::abs(v);
      ok = ok && rel <= 0.10;
      os << " (final relative gap " << num(100.0 * rel, 3) << "%);";
    }
  }
  diagnostic = "queue-composition gap |u^n - h(X^n)| by n:" + diag.str();
  return {ok, os.str()};
}

// 7. Baselines are never better than V(x) beyond Monte Carlo error.
Outcome lower_bound(const ExperimentConfig& cfg) {
  std::ostringstream csv, log;
  const auto sweep = cmd_sweep(cfg, csv, log);
  bool ok = true;
  int checked = 0;
  double worst = std::numeric_limits<double>::infinity();
  std::string worst_cell;
  for (const auto& r : sweep.rows) {
    if (r.n == "diffusion" || r.n == "grid" || r.policy_id == "pscp" || r.policy_id.rfind("nscp", 0) == 0) continue;
    ++checked;
    const double margin = (r.mean - sweep.value_at_x0) / r.se;  // in SE units
    ok = ok && r.mean >= sweep.value_at_x0 - 3.0 * r.se;
    if (margin < worst) {
      worst = margin;
      worst_cell = r.policy_id + " n=" + r.n;
    }
  }
  return {ok && checked > 0, std::to_string(checked) + " baseline cells, V(x0)=" + num(sweep.value_at_x0) +
                                 "; smallest margin (mean - V)/SE = " + num(worst, 3) + " at " + worst_cell};
}

// 8. The mollified policy nearly attains the Hamiltonian minimum.
Outcome mollifier(const ExperimentConfig& cfg, std::shared_ptr<const ValueGrid> vg) {
  const auto co = diffusion_coeffs(cfg.limits);
  const std::size_t k = cfg.limits.k;
  const PolicyFn he = mollify_policy(extract_policy_fn(vg), 0.05, k);
  const SimplexMesh mesh(k, cfg.grid.simplex_resolution);
  std::vector<std::size_t> eligible;
  const double inner = 0.8 * cfg.grid.box_halfwidth;
  for (std::size_t node = 0; node < vg->node_count(); ++node) {
    const Vec x = vg->coordinates(node);
    const double s = std::accumulate(x.begin(), x.end(), 0.0);
    if (s > 0.2 && std::all_of(x.begin(), x.end(), [&](double v) { return std::abs(v) <= inner; }))
      eligible.push_back(node);
  }
  std::mt19937_64 rng(cfg.base_seed);
  std::shuffle(eligible.begin(), eligible.end(), rng);
  eligible.resize(std::min<std::size_t>(100, eligible.size()));
  bool ok = eligible.size() == 100;
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t node : eligible) {
    const Vec x = vg->coordinates(node);
    const Vec p = grid_gradient(*vg, node);
    const double star = hamiltonian(x, p, cfg.cost, co, cfg.limits, mesh).value;
    const Vec u = he(x);
    const Vec b = drift(x, u, co, cfg.limits);
    double phi = eval_L(cfg.cost, x, u);
    for (std::size_t i = 0; i < k; ++i) phi += b[i] * p[i];
    const double delta = 0.05 * (1.0 + std::abs(star));
    ok = ok && phi <= star + delta;
    worst = std::max(worst, (phi - star) / delta);
  }
  return {ok, std::to_string(eligible.size()) + " nodes with 1.x > 0.2; worst (phi - phi*)/delta = " + num(worst, 3)};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.passed) ++failures;
    std::printf("%s [%d] %s (%.1fs): %s\n", o.passed ? "PASS" : "FAIL", id, name, secs, o.detail.c_str());
    std::fflush(stdout);
  };

  const auto canonical = load_config(config_path("canonical_k2.json"));
  const auto grid = solve(canonical);

  report(1, "k=1 grid / ODE oracle / diffusion MC agree", k1_triangle);
  report(2, "Erlang-A stationary law (chi-square p > 0.01)", erlang_a);
  report(3, "abandonment identity at n=100 within 3 SE", [&] { return lemma1(canonical, grid); });
  report(4, "invariant suite", [&] { return invariants(canonical, grid); });
  report(5, "HJB structural checks", [&] { return hjb_structure(canonical, grid); });
  std::string diagnostic;
  bool diagnostic_ok = false;
  report(6, "P-SCP and N-SCP(ii) converge to V(x)", [&] { return convergence(canonical, grid, diagnostic, diagnostic_ok); });
  std::printf("%s [6b] %s\n", diagnostic_ok ? "PASS" : "FAIL", diagnostic.c_str());
  if (!diagnostic_ok) ++failures;
  report(7, "baseline costs respect the lower bound V(x) - 3 SE",
         [&] { return lower_bound(load_config(config_path("asymmetric_k2.json"))); });
  report(8, "mollified policy within delta of the Hamiltonian minimum", [&] { return mollifier(canonical, grid); });

  std::printf("%d failure(s)\n", failures);
  return failures == 0 ? 0 : 1;
}
