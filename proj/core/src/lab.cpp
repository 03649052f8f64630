#include "sslab/lab.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "sslab/evolve.hpp"
#include "sslab/linop.hpp"
#include "sslab/modulation.hpp"
#include "sslab/spectral.hpp"
#include "sslab/stationary.hpp"
#include "sslab/version.hpp"

namespace sslab {

namespace fs = std::filesystem;

namespace {

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ValidationError("config: " + key + " expects a number, got '" + v + "'");
  }
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ValidationError("config: " + key + " expects an integer, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  throw ValidationError("config: " + key + " expects on/off, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

double max_of(const std::vector<double>& v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); }

FieldList header_for(const ExperimentConfig& c) {
  FieldList h;
  h.emplace_back("format", std::string("sslab-runlog"));
  h.emplace_back("version", std::string(kVersion));
  h.emplace_back("scenario", to_string(c.scenario));
  h.emplace_back("p", c.p);
  h.emplace_back("n", std::int64_t(c.resolved_n()));
  h.emplace_back("d", c.d);
  h.emplace_back("theta", c.theta);
  h.emplace_back("epsilon_star", c.epsilon_star);
  h.emplace_back("mu", c.mu);
  h.emplace_back("s_span", c.resolved_s_span());
  h.emplace_back("ds", c.resolved_ds());
  h.emplace_back("output_interval", c.output_interval);
  h.emplace_back("seed", std::int64_t(c.seed));
  h.emplace_back("filtering", c.filtering);
  if (c.scenario == Scenario::PhysicalBlowup) {
    h.emplace_back("amplitude", c.amplitude);
    h.emplace_back("phase", c.phase);
    h.emplace_back("u1_amplitude", c.u1_amplitude);
    h.emplace_back("x_half_width", c.x_half_width);
    h.emplace_back("x_points", std::int64_t(c.x_points));
    h.emplace_back("delta0", c.delta0);
  }
  const GridMetadata m = build_grid(c.resolved_n(), c.p)->metadata();
  h.emplace_back("grid_kind", to_string(m.kind));
  h.emplace_back("grid_nodes", m.node_family);
  h.emplace_back("grid_exactness_degree", std::int64_t(m.exactness_degree));
  h.emplace_back("scheme", std::string("rk4"));
  h.emplace_back("cfl", 0.5);
  h.emplace_back("cfl_bound", cfl_bound(*build_grid(c.resolved_n(), c.p), 0.5));
  return h;
}

// ---- scenarios -------------------------------------------------------------

RunLog stationary_residual_scenario(const ExperimentConfig& c) {
  RunLog log;
  log.columns = {"d", "theta", "residual_coarse", "residual_fine", "refinement_ratio", "energy_gap"};
  log.table_columns = log.columns;
  const int nf = c.resolved_n(), nc = nf / 2;
  const GridPtr gf = build_grid(nf, c.p), gc = build_grid(nc, c.p);
  const auto k0 = StateField::from_real(gf, Vec::Constant(nf, kappa0(c.p)), Vec::Zero(nf));
  const double e0 = energy(k0);
  double max_res = 0.0, min_ratio = std::numeric_limits<double>::infinity(), max_gap = 0.0;
  for (double d : {0.0, 0.5, -0.5, 0.9, -0.9}) {
    for (double th : {0.0, std::numbers::pi / 3.0}) {
      const SolitonParams sp = SolitonParams::from_d(d, th);
      const double rc = stationary_residual(kappa_profile(sp, gc));
      const ScalarField kf = kappa_profile(sp, gf);
      const double rf = stationary_residual(kf);
      const double ratio = rf > 0.0 ? rc / rf : std::numeric_limits<double>::infinity();
      const double gap = std::abs(energy(StateField(gf, kf.values, CVec::Zero(nf))) - e0);
      log.records.push_back({d, th, rc, rf, ratio, gap});
      max_res = std::max(max_res, rf);
      min_ratio = std::min(min_ratio, ratio);
      max_gap = std::max(max_gap, gap);
    }
  }
  log.summary.emplace_back("n_coarse", std::int64_t(nc));
  log.summary.emplace_back("n_fine", std::int64_t(nf));
  log.summary.emplace_back("max_residual", max_res);
  log.summary.emplace_back("min_refinement_ratio", min_ratio);
  log.summary.emplace_back("max_energy_gap", max_gap);
  log.summary.emplace_back("E_kappa0", e0);
  log.summary.emplace_back("E_zero", energy(StateField(gf, CVec::Zero(nf), CVec::Zero(nf))));
  return log;
}

RunLog eigen_audit_scenario(const ExperimentConfig& c) {
  RunLog log;
  log.columns = {"k", "gamma", "rayleigh", "rayleigh_error", "eigen_residual"};
  log.table_columns = log.columns;
  const int n = c.resolved_n();
  const GridPtr g = build_grid(n, c.p);
  const BasisPtr basis = build_eigenbasis(g, std::min(40, n - 2));
  double max_err = 0.0;
  for (int k = 0; k <= 8; ++k) {
    const Vec h = basis->mode(k);
    const Vec Lh = apply_L(*g, h);
    const double rq = g->integrate(Vec(h.cwiseProduct(Lh))) / g->integrate(Vec(h.cwiseProduct(h)));
    const double gk = eigenvalue_L(k, c.p);
    const double res = l2rho_norm(g, CVec((Lh - gk * h).cast<cplx>())) / l2rho_norm(g, CVec(h.cast<cplx>()));
    log.records.push_back({double(k), gk, rq, std::abs(rq - gk), res});
    max_err = std::max({max_err, std::abs(rq - gk), res});
  }
  // Poincare gap on mean-zero random fields of unit L2_rho norm.
  std::mt19937_64 rng(c.seed);
  double max_gap = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < 100; ++t) {
    Vec u = random_smooth_state(*basis, rng).first.real();
    u.array() -= g->integrate(u) / g->integrate(Vec(Vec::Ones(n)));
    u /= std::sqrt(g->integrate(Vec(u.cwiseProduct(u))));
    max_gap = std::max(max_gap, poincare_gap_check(ScalarField(g, u.cast<cplx>())));
  }
  log.summary.emplace_back("max_residual", max_err);
  log.summary.emplace_back("orthogonality_defect", basis->orthogonality_defect());
  log.summary.emplace_back("basis_eigen_residual", basis->eigen_residual());
  log.summary.emplace_back("poincare_max_gap", max_gap);
  log.summary.emplace_back("poincare_samples", std::int64_t(100));
  return log;
}

RunLog operator_duality_scenario(const ExperimentConfig& c) {
  RunLog log;
  log.columns = {"d", "eigen_residual_F1", "eigen_residual_F0", "eigen_residual_Ft0", "duality_defect", "pair_Wt0_Ft0",
                 "adjoint_residual", "dissipativity_residual", "norm_ratio_min", "norm_ratio_max"};
  log.table_columns = log.columns;
  const int n = c.resolved_n();
  const GridPtr g = build_grid(n, c.p);
  const BasisPtr basis = build_eigenbasis(g, n - 2);
  double worst_eig = 0.0, worst_dual = 0.0, worst_adj = 0.0, worst_diss = 0.0;
  std::string variant;
  bool ct0_match = true;
  for (double d : {0.0, 0.5, -0.5, 0.9, -0.9}) {
    const LinearizedFrame fr = build_frame(d, g, basis);
    variant = fr.w_check_variant;
    ct0_match = ct0_match && fr.ct0_formula_matches;
    const double e1 = norms(apply_linearized(fr.F1, d, Part::Real) - fr.F1).H;
    const double e0 = norms(apply_linearized(fr.F0, d, Part::Real)).H;
    const double et = norms(apply_linearized(fr.Ft0, d, Part::Imag)).H;
    // Check duals act on real parts and the tilde dual on imaginary parts, so
    // the two families only pair within their own block.
    Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
    M(0, 0) = fr.W1_dual.pair(fr.F1);
    M(0, 1) = fr.W1_dual.pair(fr.F0);
    M(1, 0) = fr.W0_dual.pair(fr.F1);
    M(1, 1) = fr.W0_dual.pair(fr.F0);
    M(2, 2) = fr.Wt0_dual.pair(fr.Ft0);
    const double dual = (M - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    std::mt19937_64 rng(c.seed);
    double adj = 0.0, diss = 0.0;
    for (int k = 0; k < 50; ++k) {
      const StateField q = random_smooth_state(*basis, rng), r = random_smooth_state(*basis, rng);
      for (Part part : {Part::Real, Part::Imag}) {
        const double lhs = inner_phi(apply_linearized(q, d, part), r).real();
        const double rhs = inner_phi(q, apply_adjoint(r, d, part, *basis)).real();
        adj = std::max(adj, std::abs(lhs - rhs) / (norms(q).H * norms(r).H));
      }
      const StateField qt = q - fr.Wt0_dual.pair(q) * fr.Ft0;
      const double v = quad_form(qt, apply_linearized(qt, d, Part::Imag), d, FormVariant::ImagPart) +
                       4.0 / (c.p - 1.0) * g->integrate_over_omega(Vec(qt.second.real().array().square().matrix()));
      diss = std::max(diss, std::abs(v) / std::pow(norms(qt).H, 2));
    }
    const RatioRange rr = norm_equivalence_sample(fr, *basis, Part::Real, 20, c.seed);
    log.records.push_back({d, e1, e0, et, dual, fr.Wt0_dual.pair(fr.Ft0), adj, diss, rr.min_ratio, rr.max_ratio});
    worst_eig = std::max({worst_eig, e1, e0, et});
    worst_dual = std::max(worst_dual, dual);
    worst_adj = std::max(worst_adj, adj);
    worst_diss = std::max(worst_diss, diss);
  }
  log.summary.emplace_back("max_eigen_residual", worst_eig);
  log.summary.emplace_back("max_duality_defect", worst_dual);
  log.summary.emplace_back("max_adjoint_residual", worst_adj);
  log.summary.emplace_back("max_dissipativity_residual", worst_diss);
  log.summary.emplace_back("w_check_variant", variant);
  log.summary.emplace_back("ct0_formula_matches", ct0_match);
  return log;
}

void add_run_summary(FieldList& s, const SelfSimilarRun& run) {
  s.emplace_back("max_energy_increase", run.max_energy_increase);
  s.emplace_back("max_identity_residual", max_of(run.identity_residual));
  s.emplace_back("integrated_dissipation", run.integrated_dissipation);
  s.emplace_back("initial_energy", run.initial_energy);
  s.emplace_back("cfl_bound_used", run.cfl_bound);
}

RunLog trapping_scenario(const ExperimentConfig& c) {
  TrappingSetup su;
  su.p = c.p;
  su.n = c.resolved_n();
  su.d_star = c.d;
  su.theta_star = c.theta;
  su.epsilon_star = c.epsilon_star;
  su.s_span = c.resolved_s_span();
  su.ds = c.resolved_ds();
  su.output_interval = c.output_interval;
  su.seed = c.seed;
  su.filtering = c.filtering;
  const TrappingRun tr = run_trapping(su);

  RunLog log;
  log.columns = {"s",       "E",            "normH",        "a",           "b",          "d",
                 "theta",   "dissipation",  "lambda",       "a1check",     "aminus_check", "aminus_tilde",
                 "Rminus",  "dprime",       "thetaprime",   "ortho_check", "ortho_tilde",  "lyapunov"};
  log.table_columns = {"s", "E", "normH", "a", "b", "d", "theta"};
  double max_ortho = 0.0;
  for (std::size_t i = 0; i < tr.series.size(); ++i) {
    const DecompRecord& r = tr.series[i];
    log.records.push_back({r.s, tr.run.energy[i], r.normH, r.a, r.b, r.d, r.theta, tr.run.dissipation[i], r.lambda,
                           r.a1check, r.aminus_check, r.aminus_tilde, r.Rminus, r.dprime, r.thetaprime, r.ortho_check,
                           r.ortho_tilde, tr.lyapunov[i]});
    max_ortho = std::max({max_ortho, std::abs(r.ortho_check), std::abs(r.ortho_tilde)});
  }
  const TrappingEstimate& e = tr.estimate;
  auto& s = log.summary;
  s.emplace_back("verdict", to_string(e.verdict));
  s.emplace_back("mu_est", e.mu_est);
  s.emplace_back("C_est", e.C_est);
  s.emplace_back("fit_residual", e.fit_residual);
  s.emplace_back("monotone_tail", e.monotone_tail);
  s.emplace_back("d_infinity", e.d_infinity);
  s.emplace_back("theta_infinity", e.theta_infinity);
  s.emplace_back("epsilon_star", e.epsilon_star);
  s.emplace_back("param_distance", e.param_distance);
  s.emplace_back("param_distance_over_eps", e.param_distance / e.epsilon_star);
  s.emplace_back("param_rate", e.param_rate);
  s.emplace_back("param_rate_ratio", e.param_rate_ratio);
  s.emplace_back("q_initial", tr.series.front().normH);
  s.emplace_back("q_final", tr.series.back().normH);
  s.emplace_back("max_orthogonality_residual", max_ortho);
  s.emplace_back("terminal_orthogonality_residual",
                 std::max(std::abs(tr.series.back().ortho_check), std::abs(tr.series.back().ortho_tilde)));
  s.emplace_back("shoot_coefficient", tr.shoot_coefficient);
  s.emplace_back("bisections", std::int64_t(tr.bisections));
  s.emplace_back("initial_distance", tr.initial_distance);
  s.emplace_back("energy_margin", tr.energy_margin);
  add_run_summary(s, tr.run);
  s.emplace_back("mu6", tr.monitors.mu6);
  s.emplace_back("lyapunov_bracket", tr.monitors.lyapunov_bracket);
  s.emplace_back("monitor_flags", std::int64_t(tr.monitors.total_violations()));
  for (const auto& chk : tr.monitors.checks) {
    s.emplace_back("monitor." + chk.name + ".C", chk.fitted_constant);
    s.emplace_back("monitor." + chk.name + ".flags", std::int64_t(chk.violations));
  }
  return log;
}

RunLog escape_scenario(const ExperimentConfig& c) {
  EscapeSetup su;
  su.p = c.p;
  su.n = c.resolved_n();
  su.d = c.d;
  su.mu = c.mu;
  su.s_span = c.resolved_s_span();
  su.ds = c.resolved_ds();
  su.output_interval = c.output_interval;
  su.filtering = c.filtering;
  const EscapeRun er = run_escape(su);

  RunLog log;
  log.columns = {"s", "E", "dissipation", "state_normH", "modulated", "normH", "a", "b", "d", "theta", "a1check",
                 "aminus_check", "aminus_tilde"};
  log.table_columns = {"s", "E", "normH", "a", "b", "d", "theta"};
  for (std::size_t i = 0; i < er.run.s.size(); ++i) {
    std::vector<double> row = {er.run.s[i], er.run.energy[i], er.run.dissipation[i], norms(er.run.states[i]).H};
    if (i < er.series.size()) {
      const DecompRecord& r = er.series[i];
      row.insert(row.end(), {1.0, r.normH, r.a, r.b, r.d, r.theta, r.a1check, r.aminus_check, r.aminus_tilde});
    } else {
      row.insert(row.end(), 9, 0.0);
    }
    log.records.push_back(std::move(row));
  }
  auto& s = log.summary;
  s.emplace_back("verdict", to_string(er.verdict));
  s.emplace_back("energy_margin", er.energy_margin);
  s.emplace_back("initial_normH", er.initial_normH);
  s.emplace_back("final_normH", er.final_normH);
  s.emplace_back("final_over_initial", er.final_normH / er.initial_normH);
  s.emplace_back("modulation_lost_at", er.modulation_lost_at);
  s.emplace_back("a1_dominates", er.a1_dominates);
  add_run_summary(s, er.run);
  return log;
}

RunLog physical_scenario(const ExperimentConfig& c) {
  ProfileSetup su;
  su.p = c.p;
  su.amplitude = c.amplitude;
  su.phase = c.phase;
  su.u1_amplitude = c.u1_amplitude;
  su.x_half_width = c.x_half_width;
  su.x_points = c.x_points;
  su.delta0 = c.delta0;
  su.n = c.resolved_n();
  const ProfileRun pr = run_profile_pipeline(su);

  RunLog log;
  log.columns = {"s", "bracket", "kappa0_distance", "modulated", "normH", "d", "theta", "dprime", "thetaprime"};
  log.table_columns = {"s", "bracket", "normH", "d", "theta"};
  for (std::size_t i = 0; i < pr.s.size(); ++i) {
    std::vector<double> row = {pr.s[i], pr.bracket[i], pr.kappa0_distance[i]};
    const std::size_t k = i - pr.modulation_start;
    if (i >= pr.modulation_start && k < pr.series.size()) {
      const DecompRecord& r = pr.series[k];
      row.insert(row.end(), {1.0, r.normH, r.d, r.theta, r.dprime, r.thetaprime});
    } else {
      row.insert(row.end(), 6, 0.0);
    }
    log.records.push_back(std::move(row));
  }
  auto& s = log.summary;
  s.emplace_back("That", pr.That);
  s.emplace_back("fit_residual", pr.fit.residual);
  s.emplace_back("fit_C", pr.fit.C);
  s.emplace_back("x0", pr.x0);
  s.emplace_back("s_window_end", pr.s_window_end);
  s.emplace_back("modulation_start_s", pr.s[pr.modulation_start]);
  s.emplace_back("modulated_samples", std::int64_t(pr.series.size()));
  s.emplace_back("window_samples", std::int64_t(pr.s.size() - pr.modulation_start));
  s.emplace_back("q_decreasing", pr.q_decreasing);
  s.emplace_back("params_converging", pr.params_converging);
  s.emplace_back("q_initial", pr.series.front().normH);
  s.emplace_back("q_final", pr.series.back().normH);
  s.emplace_back("d_final", pr.series.back().d);
  s.emplace_back("theta_final", pr.series.back().theta);
  s.emplace_back("bracket_min", *std::min_element(pr.bracket.begin(), pr.bracket.end()));
  s.emplace_back("bracket_max", max_of(pr.bracket));
  return log;
}

RunLog sweep_scenario(const ExperimentConfig& c) {
  const SweepResult sr = sweep(c, c.axes);
  RunLog log;
  log.columns = {"cell", "ok"};
  for (std::size_t i = 0; i < sr.cells.size(); ++i) log.records.push_back({double(i), sr.cells[i].ok ? 1.0 : 0.0});
  log.table_columns = log.columns;
  const auto failed = std::count_if(sr.cells.begin(), sr.cells.end(), [](const SweepCell& x) { return !x.ok; });
  log.summary.emplace_back("cells", std::int64_t(sr.cells.size()));
  log.summary.emplace_back("failed", std::int64_t(failed));
  log.summary.emplace_back("aggregate_table", sr.table_path);
  return log;
}

}  // namespace

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::StationaryResidual: return "stationary-residual";
    case Scenario::EigenAudit: return "eigen-audit";
    case Scenario::Trapping: return "trapping";
    case Scenario::Escape: return "escape";
    case Scenario::PhysicalBlowup: return "physical-blowup";
    case Scenario::OperatorDuality: return "operator-duality";
    case Scenario::Sweep: return "sweep";
  }
  return "unknown";
}

Scenario scenario_from_string(const std::string& s) {
  for (Scenario x : {Scenario::StationaryResidual, Scenario::EigenAudit, Scenario::Trapping, Scenario::Escape,
                     Scenario::PhysicalBlowup, Scenario::OperatorDuality, Scenario::Sweep})
    if (to_string(x) == s) return x;
  throw ValidationError("unknown scenario '" + s + "'");
}

int ExperimentConfig::resolved_n() const {
  if (n > 0) return n;
  switch (scenario) {
    case Scenario::StationaryResidual:
    case Scenario::OperatorDuality: return 128;
    default: return 64;
  }
}

double ExperimentConfig::resolved_s_span() const {
  if (s_span > 0.0) return s_span;
  return scenario == Scenario::Escape ? 16.0 : 8.0;
}

double ExperimentConfig::resolved_ds() const {
  if (ds > 0.0) return ds;
  return scenario == Scenario::Escape ? 2e-3 : 5e-3;
}

void ExperimentConfig::validate() const {
  if (!(p > 1.0)) throw ValidationError("config: p must exceed 1");
  if (!(std::abs(d) < 1.0)) throw ValidationError("config: |d| must be < 1");
  if (n != 0 && n < 8) throw ValidationError("config: n must be at least 8");
  if (!std::isfinite(theta)) throw ValidationError("config: theta must be finite");
  if (s_span < 0.0 || ds < 0.0) throw ValidationError("config: s_span and ds must be nonnegative");
  if (!(output_interval > 0.0)) throw ValidationError("config: output_interval must be positive");
  if (output_dir.empty()) throw ValidationError("config: output_dir is required");
  switch (scenario) {
    case Scenario::Trapping:
      if (!(epsilon_star > 0.0)) throw ValidationError("config: epsilon_star must be positive");
      if (resolved_s_span() < 30 * output_interval) throw ValidationError("config: s_span too short for a decay fit");
      break;
    case Scenario::Escape:
      if (!(mu > 0.0)) throw ValidationError("config: escape needs mu > 0");
      break;
    case Scenario::PhysicalBlowup:
      if (x_points < 16 || !(x_half_width > 0.0)) throw ValidationError("config: bad physical grid");
      if (!(delta0 > 0.0 && delta0 < 1.0)) throw ValidationError("config: delta0 must lie in (0,1)");
      break;
    case Scenario::Sweep:
      if (sweep_scenario == Scenario::Sweep) throw ValidationError("config: sweep_scenario cannot be sweep");
      if (sweep_cap < 1) throw ValidationError("config: sweep_cap must be positive");
      break;
    default: break;
  }
  if (resolved_ds() > cfl_bound(*build_grid(resolved_n(), p), 0.5) &&
      (scenario == Scenario::Trapping || scenario == Scenario::Escape))
    throw ValidationError("config: ds above the CFL bound for this n");
}

void ExperimentConfig::set(const std::string& key, const std::string& v) {
  if (key == "scenario") scenario = scenario_from_string(v);
  else if (key == "p") p = parse_double(key, v);
  else if (key == "n") n = int(parse_int(key, v));
  else if (key == "d") d = parse_double(key, v);
  else if (key == "theta") theta = parse_double(key, v);
  else if (key == "epsilon_star") epsilon_star = parse_double(key, v);
  else if (key == "mu") mu = parse_double(key, v);
  else if (key == "s_span") s_span = parse_double(key, v);
  else if (key == "seed") seed = std::uint64_t(parse_int(key, v));
  else if (key == "output_dir") output_dir = v;
  else if (key == "filtering") filtering = parse_bool(key, v);
  else if (key == "ds") ds = parse_double(key, v);
  else if (key == "output_interval") output_interval = parse_double(key, v);
  else if (key == "amplitude") amplitude = parse_double(key, v);
  else if (key == "phase") phase = parse_double(key, v);
  else if (key == "u1_amplitude") u1_amplitude = parse_double(key, v);
  else if (key == "x_half_width") x_half_width = parse_double(key, v);
  else if (key == "x_points") x_points = int(parse_int(key, v));
  else if (key == "delta0") delta0 = parse_double(key, v);
  else if (key == "sweep_scenario") sweep_scenario = scenario_from_string(v);
  else if (key == "sweep_cap") sweep_cap = int(parse_int(key, v));
  else if (key == "workers") workers = int(parse_int(key, v));
  else throw ValidationError("config: unknown key '" + key + "'");
}

ExperimentConfig parse_config(std::istream& is) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  const auto apply = [&](const pt::ptree& t) {
    for (const auto& [k, v] : t)
      if (v.empty()) c.set(k, v.data());
  };
  apply(tree);
  if (const auto ex = tree.get_child_optional("experiment")) apply(*ex);
  if (c.scenario == Scenario::Sweep) {
    if (const auto sw = tree.get_child_optional("sweep")) {
      for (const auto& [k, v] : *sw) {
        if (k.rfind("axis.", 0) == 0)
          c.axes.emplace_back(k.substr(5), split_list(v.data()));
        else
          c.set(k, v.data());
      }
    }
    if (const auto sec = tree.get_child_optional(to_string(c.sweep_scenario))) apply(*sec);
  } else if (const auto sec = tree.get_child_optional(to_string(c.scenario))) {
    apply(*sec);
  }
  for (const auto& [k, v] : tree) {
    static const std::vector<std::string> known = {"experiment",   "sweep",  "stationary-residual", "eigen-audit",
                                                   "trapping",     "escape", "physical-blowup",     "operator-duality"};
    if (!v.empty() && std::find(known.begin(), known.end(), k) == known.end())
      throw ValidationError("config: unknown section [" + k + "]");
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open config " + path);
  return parse_config(is);
}

RunLog execute_scenario(const ExperimentConfig& c) {
  c.validate();
  RunLog log;
  switch (c.scenario) {
    case Scenario::StationaryResidual: log = stationary_residual_scenario(c); break;
    case Scenario::EigenAudit: log = eigen_audit_scenario(c); break;
    case Scenario::Trapping: log = trapping_scenario(c); break;
    case Scenario::Escape: log = escape_scenario(c); break;
    case Scenario::PhysicalBlowup: log = physical_scenario(c); break;
    case Scenario::OperatorDuality: log = operator_duality_scenario(c); break;
    case Scenario::Sweep: log = sweep_scenario(c); break;
  }
  log.header = header_for(c);
  return log;
}

RunLog run_experiment(const ExperimentConfig& c) {
  c.validate();
  fs::create_directories(c.output_dir);
  RunLog log = execute_scenario(c);
  export_runlog(log, (fs::path(c.output_dir) / to_string(c.scenario)).string(), ExportFormat::Records);
  return log;
}

std::pair<std::string, std::vector<std::string>> parse_axis(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError("axis '" + spec + "': expected key=v1,v2,...");
  auto vals = split_list(spec.substr(eq + 1));
  if (vals.empty()) throw ValidationError("axis '" + spec + "': no values");
  return {spec.substr(0, eq), std::move(vals)};
}

SweepResult sweep(const ExperimentConfig& base,
                  const std::vector<std::pair<std::string, std::vector<std::string>>>& axes) {
  ExperimentConfig cell_base = base;
  if (cell_base.scenario == Scenario::Sweep) cell_base.scenario = base.sweep_scenario;
  cell_base.axes.clear();
  std::size_t total = 1;
  for (const auto& [k, vals] : axes) {
    if (vals.empty()) throw ValidationError("sweep: axis " + k + " has no values");
    total *= vals.size();
    if (total > std::size_t(base.sweep_cap))
      throw ValidationError("sweep: grid exceeds the cap of " + std::to_string(base.sweep_cap) + " cells");
  }

  SweepResult res;
  res.cells.resize(total);
  std::vector<ExperimentConfig> configs(total, cell_base);
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t rem = i;
    for (std::size_t a = axes.size(); a-- > 0;) {
      const auto& [k, vals] = axes[a];
      const std::string& v = vals[rem % vals.size()];
      rem /= vals.size();
      res.cells[i].values[k] = v;
    }
    char name[32];
    std::snprintf(name, sizeof name, "cell_%03zu", i);
    res.cells[i].output_dir = (fs::path(base.output_dir) / name).string();
  }
  // Validate every cell before running any.
  std::vector<std::string> early(total);
  for (std::size_t i = 0; i < total; ++i) {
    try {
      for (const auto& [k, v] : res.cells[i].values) configs[i].set(k, v);
      configs[i].output_dir = res.cells[i].output_dir;
      configs[i].validate();
    } catch (const std::exception& e) {
      early[i] = e.what();
    }
  }

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < total;) {
      SweepCell& cell = res.cells[i];
      if (!early[i].empty()) {
        cell.error = early[i];
        continue;
      }
      try {
        cell.log = run_experiment(configs[i]);
        cell.ok = true;
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t nworkers = std::min<std::size_t>(total, base.workers > 0 ? std::size_t(base.workers) : hw);
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < nworkers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  // Aggregate: axis values, status, then the union of summary keys.
  res.columns = {"cell"};
  for (const auto& [k, vals] : axes) res.columns.push_back(k);
  res.columns.push_back("status");
  std::vector<std::string> keys;
  for (const auto& cell : res.cells)
    for (const auto& [k, v] : cell.log.summary)
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
  res.columns.insert(res.columns.end(), keys.begin(), keys.end());
  res.columns.push_back("error");
  for (std::size_t i = 0; i < total; ++i) {
    const SweepCell& cell = res.cells[i];
    std::vector<std::string> row = {std::to_string(i)};
    for (const auto& [k, vals] : axes) row.push_back(cell.values.at(k));
    row.push_back(cell.ok ? "ok" : "failed");
    for (const auto& k : keys) {
      const Field* f = cell.ok ? cell.log.summary_field(k) : nullptr;
      row.push_back(f ? field_to_string(*f) : "");
    }
    std::string err = cell.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    row.push_back(err);
    res.rows.push_back(std::move(row));
  }
  fs::create_directories(base.output_dir);
  res.table_path = (fs::path(base.output_dir) / "aggregate.csv").string();
  std::ofstream os(res.table_path);
  if (!os) throw ValidationError("sweep: cannot write " + res.table_path);
  for (std::size_t k = 0; k < res.columns.size(); ++k) os << (k ? "," : "") << res.columns[k];
  os << '\n';
  for (const auto& row : res.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << row[k];
    os << '\n';
  }
  return res;
}

std::vector<std::pair<std::string, double>> pilot_constants() {
  std::vector<std::pair<std::string, double>> out;
  // Parameter-distance constant from the eps* = 1e-2 trapping pilots.
  double pd_max = 0.0;
  for (double d : {0.0, 0.5}) {
    TrappingSetup su;
    su.epsilon_star = 1e-2;
    su.d_star = d;
    su.theta_star = 0.4;
    const TrappingRun tr = run_trapping(su);
    const double ratio = tr.estimate.param_distance / su.epsilon_star;
    pd_max = std::max(pd_max, ratio);
    const std::string tag = d == 0.0 ? "d0" : "d05";
    out.emplace_back("trapping.pilot_mu_" + tag, tr.estimate.mu_est);
    out.emplace_back("trapping.pilot_param_ratio_" + tag, ratio);
  }
  out.emplace_back("trapping.C_param", 1.5 * pd_max);

  // Norm-equivalence constant for the projection decomposition.
  const GridPtr g = build_grid(64, 3.0);
  const BasisPtr basis = build_eigenbasis(g, 40);
  double c0 = 0.0;
  for (double d : {0.0, 0.5}) {
    const LinearizedFrame fr = build_frame(d, g, basis);
    for (Part part : {Part::Real, Part::Imag}) {
      const RatioRange rr = norm_equivalence_sample(fr, *basis, part, 40);
      c0 = std::max({c0, rr.max_ratio, 1.0 / rr.min_ratio});
    }
  }
  out.emplace_back("decompose.C0", 1.5 * c0);

  // H^1 bracket of the transformed profile.
  const ProfileRun pr = run_profile_pipeline(ProfileSetup{});
  const double bmin = *std::min_element(pr.bracket.begin(), pr.bracket.end());
  out.emplace_back("profile.eps0", 0.5 * bmin);
  out.emplace_back("profile.K", 2.0 * max_of(pr.bracket));
  out.emplace_back("profile.pilot_That", pr.That);
  return out;
}

}  // namespace sslab
