#include "sslab/modulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "sslab/spectral.hpp"

namespace sslab {

namespace {

struct PhiEval {
  Eigen::Vector2d phi;
  Eigen::Vector2d dtheta;  // analytic theta column
};

PhiEval eval_phi(const StateField& state, double d, double theta) {
  const GridPtr& grid = state.grid;
  const LinearizedFrame fr = build_frame(d, grid);
  const cplx rot = std::polar(1.0, -theta);
  const CVec z1 = rot * state.first, z2 = rot * state.second;
  const Vec kap = kappa_values(*grid, d);
  const StateField re = StateField::from_real(grid, Vec(z1.real()) - kap, Vec(z2.real()));
  const StateField im = StateField::from_real(grid, Vec(z1.imag()), Vec(z2.imag()));
  const StateField re_full = StateField::from_real(grid, Vec(z1.real()), Vec(z2.real()));
  PhiEval out;
  out.phi << fr.W0_dual.pair(re), fr.Wt0_dual.pair(im);
  // d/dtheta e^{-i theta} v = -i e^{-i theta} v
  out.dtheta << fr.W0_dual.pair(im), -fr.Wt0_dual.pair(re_full);
  return out;
}

double inf_norm(const Eigen::Vector2d& v) { return v.cwiseAbs().maxCoeff(); }

StateField residual_field(const StateField& state, double d, double theta) {
  const cplx rot = std::polar(1.0, -theta);
  StateField q(state.grid, rot * state.first, rot * state.second);
  q.first -= kappa_values(*state.grid, d).cast<cplx>();
  return q;
}

double integrate_over_omega_sq(const WeightedGrid& g, const CVec& f) {
  return g.integrate_over_omega(Vec(f.real().array().square().matrix()));
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  return v[static_cast<std::size_t>(std::floor(q * (v.size() - 1)))];
}

// Least squares slope and intercept of y against x.
std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

std::vector<double> centered_derivative(const std::vector<double>& s, const std::vector<double>& f) {
  const std::size_t n = s.size();
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0) {
      out[i] = (f[1] - f[0]) / (s[1] - s[0]);
    } else if (i == n - 1) {
      out[i] = (f[n - 1] - f[n - 2]) / (s[n - 1] - s[n - 2]);
    } else if (i >= 2 && i + 2 < n && std::abs((s[i + 2] - s[i - 2]) - 2.0 * (s[i + 1] - s[i - 1])) <
                                          1e-9 * (s[i + 2] - s[i - 2])) {
      // fourth order on uniform spacing
      const double h = 0.25 * (s[i + 2] - s[i - 2]);
      out[i] = (-f[i + 2] + 8.0 * f[i + 1] - 8.0 * f[i - 1] + f[i - 2]) / (12.0 * h);
    } else {
      out[i] = (f[i + 1] - f[i - 1]) / (s[i + 1] - s[i - 1]);
    }
  }
  return out;
}

// (1+X)^m - 1 - m X - m(m-1)/2 X^2
double cubic_tail(double X, double m) {
  if (std::abs(X) < 0.1) {
    double term = m * (m - 1.0) * (m - 2.0) / 6.0 * X * X * X;
    double acc = term;
    for (int k = 3; k < 60 && std::abs(term) > 1e-18 * std::abs(acc); ++k) {
      term *= (m - k) / (k + 1.0) * X;
      acc += term;
    }
    return acc;
  }
  return std::expm1(m * std::log1p(X)) - m * X - 0.5 * m * (m - 1.0) * X * X;
}

}  // namespace

Eigen::Vector2d modulation_map(const StateField& state, double d, double theta) {
  state.validate();
  if (!(std::abs(d) < 1.0)) throw ValidationError("modulation_map: |d| must be < 1");
  return eval_phi(state, d, theta).phi;
}

ModulationResult modulate(const StateField& state, double d_init, double theta_init, const ModulationOptions& opts) {
  state.validate();
  if (!(std::abs(d_init) < 1.0)) throw ValidationError("modulate: |d_init| must be < 1");
  if (norms(residual_field(state, d_init, theta_init)).H > opts.basin)
    throw NumericalError("modulate: state outside the modulation basin");

  double lam = std::atanh(d_init), theta = theta_init;
  const double h = opts.fd_step;
  ModulationResult out;
  PhiEval cur = eval_phi(state, d_init, theta);
  const auto jacobian = [&](const PhiEval& at) {
    const Eigen::Vector2d fp = eval_phi(state, std::tanh(lam + h), theta).phi;
    const Eigen::Vector2d fm = eval_phi(state, std::tanh(lam - h), theta).phi;
    Eigen::Matrix2d J;
    J.col(0) = (fp - fm) / (2.0 * h);
    J.col(1) = at.dtheta;
    return J;
  };
  const auto newton_step = [&](PhiEval& at, bool must_decrease) {
    const Eigen::Matrix2d J = jacobian(at);
    const double det = J.determinant();
    if (!(std::abs(det) > 1e-14 * J.cwiseAbs().maxCoeff() * J.cwiseAbs().maxCoeff()))
      throw NumericalError("modulate: Jacobian near-singular");
    const Eigen::Vector2d delta = -J.partialPivLu().solve(at.phi);
    const double r0 = inf_norm(at.phi);
    double step = 1.0;
    PhiEval trial = eval_phi(state, std::tanh(lam + delta(0)), theta + delta(1));
    for (int k = 0; k < opts.max_halvings && !(inf_norm(trial.phi) < r0); ++k) {
      step *= 0.5;
      trial = eval_phi(state, std::tanh(lam + step * delta(0)), theta + step * delta(1));
    }
    if (must_decrease && !(inf_norm(trial.phi) < r0)) return false;
    lam += step * delta(0);
    theta += step * delta(1);
    at = trial;
    out.jacobian = J;
    return true;
  };

  int it = 0;
  while (!(inf_norm(cur.phi) < opts.tol)) {
    if (it >= opts.max_iter) throw NumericalError("modulate: Newton did not converge in the iteration limit");
    newton_step(cur, false);
    ++it;
    if (!cur.phi.allFinite()) throw NumericalError("modulate: non-finite residual");
  }
  // One polishing step so that the parameters sit at round-off level.
  if (inf_norm(cur.phi) > 0.0) newton_step(cur, true);
  out.jacobian = jacobian(cur);

  const double d = std::tanh(lam);
  out.params = SolitonParams::from_lambda(lam, theta);
  out.params.d = d;
  out.q = residual_field(state, d, theta);
  out.iterations = it;
  out.phi_check = cur.phi(0);
  out.phi_tilde = cur.phi(1);
  if (norms(out.q).H > opts.basin) throw NumericalError("modulate: converged outside the modulation basin");
  return out;
}

NonlinearTerms nonlinear_terms(const ScalarField& q1, double d) {
  q1.validate();
  const WeightedGrid& g = *q1.grid;
  const double p = g.p();
  const Vec kap = kappa_values(g, d);
  const int n = g.size();
  const double m = 0.5 * (p + 1.0);
  Vec fc(n), ft(n), F(n);
  for (int j = 0; j < n; ++j) {
    const double k = kap(j);
    const double qc = q1.values(j).real(), qt = q1.values(j).imag();
    const double mod2 = (k + qc) * (k + qc) + qt * qt;
    const double pw = std::pow(mod2, 0.5 * (p - 1.0));
    const double kp1 = std::pow(k, p - 1.0);
    fc(j) = pw * (k + qc) - kp1 * k - p * kp1 * qc;
    ft(j) = (pw - kp1) * qt;
    // F = k^{p+1}/(p+1) [ m(m-1)/2 (4 Re z |z|^2 + |z|^4) + tail(X) ], z = q1/k, X = 2 Re z + |z|^2
    const double zr = qc / k, zi = qt / k;
    const double z2 = zr * zr + zi * zi;
    const double X = 2.0 * zr + z2;
    F(j) = std::pow(k, p + 1.0) / (p + 1.0) * (0.5 * m * (m - 1.0) * (4.0 * zr * z2 + z2 * z2) + cubic_tail(X, m));
  }
  NonlinearTerms out;
  out.f_check = ScalarField::from_real(q1.grid, fc);
  out.f_tilde = ScalarField::from_real(q1.grid, ft);
  out.F_integral = g.integrate(F);
  out.R_minus = -out.F_integral;
  return out;
}

DecompRecord decompose(const StateField& q, const LinearizedFrame& frame, double ortho_tol) {
  q.validate();
  if (q.grid != frame.grid) throw ValidationError("decompose: grid mismatch");
  const WeightedGrid& g = *q.grid;
  const double d = frame.d;
  const StateField qr = q.real_part(), qi = q.imag_part();
  DecompRecord r;
  r.d = d;
  r.lambda = std::atanh(d);
  r.ortho_check = frame.W0_dual.pair(qr);
  r.ortho_tilde = frame.Wt0_dual.pair(qi);
  if (std::abs(r.ortho_check) > ortho_tol || std::abs(r.ortho_tilde) > ortho_tol)
    throw ValidationError("decompose: orthogonality violated");
  r.a1check = frame.W1_dual.pair(qr);
  const StateField qm_c = qr - r.a1check * frame.F1 - r.ortho_check * frame.F0;
  const StateField qm_t = qi - r.ortho_tilde * frame.Ft0;
  r.aminus_check = std::sqrt(std::max(0.0, quad_form(qm_c, qm_c, d, FormVariant::RealPart)));
  r.aminus_tilde = std::sqrt(std::max(0.0, quad_form(qm_t, qm_t, d, FormVariant::ImagPart)));
  r.form_check = quad_form(qr, qr, d, FormVariant::RealPart);
  r.form_tilde = quad_form(qi, qi, d, FormVariant::ImagPart);
  const NonlinearTerms nl = nonlinear_terms(ScalarField(q.grid, q.first), d);
  r.Rminus = nl.R_minus;
  r.a = r.a1check * r.a1check;
  r.b = r.aminus_check * r.aminus_check + r.aminus_tilde * r.aminus_tilde + r.Rminus;
  r.diss_check = integrate_over_omega_sq(g, qm_c.second);
  r.diss_minus = r.diss_check + integrate_over_omega_sq(g, qm_t.second);
  r.diss_tilde = integrate_over_omega_sq(g, qi.second);
  r.cross_check = g.integrate(Vec(qr.first.real().cwiseProduct(qr.second.real())));
  r.cross_tilde = g.integrate(Vec(qi.first.real().cwiseProduct(qi.second.real())));
  r.normH = norms(q).H;
  StateField full = q;
  full.first += kappa_values(g, d).cast<cplx>();
  r.E = energy(full);
  return r;
}

void finite_difference_rates(std::vector<DecompRecord>& series) {
  std::vector<double> s, d, th;
  for (const auto& r : series) {
    s.push_back(r.s);
    d.push_back(r.d);
    th.push_back(r.theta);
  }
  const auto dd = centered_derivative(s, d);
  const auto dt = centered_derivative(s, th);
  for (std::size_t i = 0; i < series.size(); ++i) {
    series[i].dprime = dd[i];
    series[i].thetaprime = dt[i];
  }
}

double lyapunov_candidate(const StateField& q, double b, double eta6) {
  q.validate();
  if (eta6 < 0.0) throw ValidationError("lyapunov_candidate: eta6 must be >= 0");
  if (eta6 == 0.0) return b;
  const WeightedGrid& g = *q.grid;
  const Vec prod = (q.first.real().array() * q.second.real().array() + q.first.imag().array() * q.second.imag().array())
                       .matrix();
  return b + eta6 * g.integrate(prod);
}

int MonitorReport::total_violations() const {
  int n = 0;
  for (const auto& c : checks) n += c.violations;
  return n;
}

MonitorReport monitor_inequalities(const std::vector<DecompRecord>& series, double p, double eta6,
                                   const std::vector<double>* lyapunov) {
  if (series.size() < 10) throw ValidationError("monitor_inequalities: series too short (< 10 samples)");
  const std::size_t n = series.size();
  std::vector<double> s(n), a1(n), a(n), b(n), lyap_minus(n), cc(n), ct(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = series[i];
    s[i] = r.s;
    a1[i] = r.a1check;
    a[i] = r.a;
    b[i] = r.b;
    lyap_minus[i] = r.Rminus + 0.5 * (r.aminus_check * r.aminus_check + r.aminus_tilde * r.aminus_tilde);
    cc[i] = r.cross_check;
    ct[i] = r.cross_tilde;
  }
  const auto da1 = centered_derivative(s, a1);
  const auto da = centered_derivative(s, a);
  const auto db = centered_derivative(s, b);
  const auto dl = centered_derivative(s, lyap_minus);
  const auto dcc = centered_derivative(s, cc);
  const auto dct = centered_derivative(s, ct);
  const double pcheck = std::min(p, 2.0);
  const double tiny = 1e-300;

  MonitorReport rep;
  const auto add = [&](const std::string& name, const std::vector<double>& lhs, const std::vector<double>& rhs) {
    InequalityCheck c;
    c.name = name;
    std::vector<double> ratios;
    for (std::size_t i = 0; i < lhs.size(); ++i) {
      if (!(rhs[i] > tiny)) continue;
      ratios.push_back(std::max(0.0, lhs[i]) / rhs[i]);
    }
    c.samples = static_cast<int>(ratios.size());
    c.fitted_constant = percentile(ratios, 0.9);
    c.max_ratio = ratios.empty() ? 0.0 : *std::max_element(ratios.begin(), ratios.end());
    for (double r : ratios)
      if (r > 2.0 * c.fitted_constant && r > 0.0) ++c.violations;
    rep.checks.push_back(c);
  };

  // Interior samples only for derivative-based relations.
  std::vector<double> L1, R1, L2, L3, R3, L4, R4, L5, R5, L6, R6, L7, R7, L8, R8, L9, R9, L10, R10;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = series[i];
    const double N2 = r.a + r.aminus_check * r.aminus_check + r.aminus_tilde * r.aminus_tilde;
    const bool interior = i > 0 && i + 1 < n;
    L4.push_back(std::abs(r.Rminus));
    R4.push_back(std::pow(N2, 0.5 * (1.0 + pcheck)));
    L9.push_back(std::abs(r.a1check));
    R9.push_back(r.aminus_check + r.aminus_tilde);
    L10.push_back(r.a);
    R10.push_back(r.b);
    if (!interior) continue;
    L1.push_back(std::abs(r.thetaprime) + std::abs(r.dprime) / (1.0 - r.d * r.d));
    R1.push_back(N2);
    L2.push_back(std::abs(da1[i] - r.a1check));
    L3.push_back(dl[i] + 4.0 / (p - 1.0) * r.diss_minus);
    R3.push_back(std::pow(N2, 1.5));
    L5.push_back(dcc[i] + 0.8 * r.aminus_check * r.aminus_check);
    R5.push_back(r.diss_check + r.a + r.aminus_tilde * r.aminus_tilde);
    L6.push_back(dct[i] + 0.8 * r.aminus_tilde * r.aminus_tilde);
    R6.push_back(r.diss_tilde + r.a + r.aminus_check * r.aminus_check);
    // |a' - 2a| <= a/2 + K eps b
    L7.push_back(std::abs(da[i] - 2.0 * r.a) - 0.5 * r.a);
    R7.push_back(r.b);
    L8.push_back(db[i] + 8.0 / (p - 1.0) * r.diss_minus);
    R8.push_back(r.a + r.b);
  }
  add("parameter_rates", L1, R1);
  add("unstable_mode", L2, R1);
  add("minus_lyapunov", L3, R3);
  add("R_minus_bound", L4, R4);
  add("cross_check", L5, R5);
  add("cross_tilde", L6, R6);
  add("a_prime_bracket", L7, R7);
  add("b_prime", L8, R8);
  add("energy_barrier", L9, R9);
  add("a_le_K5_b", L10, R10);

  if (lyapunov && lyapunov->size() == n) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < n; ++i) {
      const double f = (*lyapunov)[i];
      if (!(0.5 * f <= b[i] + 1e-15 && b[i] <= 2.0 * f + 1e-15)) rep.lyapunov_bracket = false;
      if (i >= n / 2 && f > 0.0) {
        xs.push_back(s[i]);
        ys.push_back(std::log(f));
      }
    }
    if (xs.size() >= 3) rep.mu6 = -0.5 * linear_fit(xs, ys).first;
  }
  (void)eta6;
  return rep;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Trapped: return "trapped";
    case Verdict::Escaped: return "escaped";
    default: return "inconclusive";
  }
}

TrappingEstimate fit_decay(const std::vector<DecompRecord>& series, double epsilon_star, double d_star,
                           double theta_star) {
  if (series.size() < 30) throw ValidationError("fit_decay: at least 30 samples required");
  const std::size_t n = series.size();
  const std::size_t h = n / 2;
  TrappingEstimate est;
  est.epsilon_star = epsilon_star;
  std::vector<double> xs, ys;
  est.monotone_tail = true;
  for (std::size_t i = h; i < n; ++i) {
    xs.push_back(series[i].s);
    ys.push_back(std::log(std::max(series[i].normH, 1e-300)));
    if (i > h && series[i].normH > series[i - 1].normH) est.monotone_tail = false;
  }
  const auto [slope, icept] = linear_fit(xs, ys);
  est.mu_est = -slope;
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (icept + slope * xs[i]);
    acc += r * r;
  }
  est.fit_residual = std::sqrt(acc / xs.size());
  est.C_est = std::exp(icept + slope * series.front().s) / std::max(epsilon_star, 1e-300);
  est.d_infinity = series.back().d;
  est.theta_infinity = series.back().theta;
  est.param_distance =
      std::abs(std::atanh(est.d_infinity) - std::atanh(d_star)) + std::abs(angular_distance(est.theta_infinity, theta_star));

  // Parameter rate: |lambda'| + |theta'| over the final half, above the difference-quotient floor.
  std::vector<double> px, py;
  for (std::size_t i = h; i + 1 < n; ++i) {
    const auto& r = series[i];
    const double v = std::abs(r.dprime) / (1.0 - r.d * r.d) + std::abs(r.thetaprime);
    if (v > 1e-12) {
      px.push_back(r.s);
      py.push_back(std::log(v));
    }
  }
  if (px.size() >= 5) {
    est.param_rate = -linear_fit(px, py).first;
    est.param_rate_ratio = est.mu_est > 0.0 ? est.param_rate / (2.0 * est.mu_est) : 0.0;
  } else {
    est.param_rate = std::numeric_limits<double>::quiet_NaN();
    est.param_rate_ratio = std::numeric_limits<double>::quiet_NaN();
  }

  const double q0 = series.front().normH, q1 = series.back().normH;
  if (est.monotone_tail && est.mu_est > 0.0 && est.fit_residual < 0.1 && q1 < q0 / 10.0)
    est.verdict = Verdict::Trapped;
  else if (q1 > q0 && slope > 0.0)
    est.verdict = Verdict::Escaped;
  else
    est.verdict = Verdict::Inconclusive;
  return est;
}

std::vector<DecompRecord> modulate_series(const std::vector<double>& s, const std::vector<StateField>& states,
                                          double d_init, double theta_init, const ModulationOptions& opts,
                                          std::vector<double>* lyapunov, double eta6) {
  if (s.size() != states.size()) throw ValidationError("modulate_series: size mismatch");
  std::vector<DecompRecord> out;
  double d = d_init, th = theta_init;
  for (std::size_t i = 0; i < states.size(); ++i) {
    ModulationResult m;
    try {
      m = modulate(states[i], d, th, opts);
    } catch (const NumericalError&) {
      const Classification cls = classify_stationary(ScalarField(states[i].grid, states[i].first), 1.0);
      if (cls.kind != Classification::Kind::Soliton) break;
      // Keep theta continuous with the previous sample.
      const double th2 = th + angular_distance(cls.params.theta, th);
      try {
        m = modulate(states[i], cls.params.d, th2, opts);
      } catch (const NumericalError&) {
        break;
      }
    }
    d = m.params.d;
    th = m.params.theta;
    const LinearizedFrame fr = build_frame(d, states[i].grid);
    DecompRecord r = decompose(m.q, fr);
    r.s = s[i];
    r.theta = th;
    out.push_back(r);
    if (lyapunov) lyapunov->push_back(lyapunov_candidate(m.q, r.b, eta6));
  }
  finite_difference_rates(out);
  return out;
}

TrappingRun run_trapping(const TrappingSetup& su) {
  if (!(std::abs(su.d_star) < 1.0)) throw ValidationError("run_trapping: |d*| must be < 1");
  if (!(su.epsilon_star > 0.0)) throw ValidationError("run_trapping: epsilon* must be positive");
  const GridPtr grid = build_grid(su.n, su.p);
  const BasisPtr basis = build_eigenbasis(grid, std::min(40, su.n - 2));
  std::mt19937_64 rng(su.seed);
  const StateField re = random_smooth_state(*basis, rng);
  const StateField im = random_smooth_state(*basis, rng);
  StateField pert(grid, re.first + cplx(0, 1) * im.first, re.second + cplx(0, 1) * im.second);
  pert *= cplx(su.epsilon_star / norms(pert).H);
  const LinearizedFrame fr = build_frame(su.d_star, grid);
  const StateField base = StateField::from_real(grid, kappa_values(*grid, su.d_star), Vec::Zero(su.n));
  const cplx rot = std::polar(1.0, su.theta_star);

  const auto seed_state = [&](double c) {
    StateField st = base + pert + c * StateField(grid, fr.F1.first, fr.F1.second);
    st *= rot;
    return st;
  };

  RunOptions ro;
  ro.ds = su.ds;
  ro.output_interval = su.output_interval;
  ro.filtering = su.filtering;
  const double thr = 0.5 * su.epsilon_star;

  struct Shot {
    int side = 0;  // sign of the unstable component when the run was stopped
    bool survived = false;
    double a1_end = 0.0, q_end = 0.0;
  };
  const auto shoot = [&](double c) {
    Shot sh;
    double d = su.d_star, th = su.theta_star;
    double last_a1 = 0.0, last_q = 0.0;
    bool escaped = false;
    RunOptions o = ro;
    o.keep_states = false;
    o.monitor = [&](double, const StateField& st) {
      try {
        const ModulationResult m = modulate(st, d, th);
        d = m.params.d;
        th = m.params.theta;
        const LinearizedFrame f = build_frame(d, grid);
        last_a1 = f.W1_dual.pair(m.q.real_part());
        last_q = norms(m.q).H;
      } catch (const NumericalError&) {
        escaped = true;
        return false;
      }
      if (std::abs(last_a1) > thr) {
        escaped = true;
        return false;
      }
      return true;
    };
    try {
      run_selfsimilar(seed_state(c), 0.0, su.s_span, o);
    } catch (const NumericalError&) {
      escaped = true;
      if (last_a1 == 0.0) last_a1 = 1.0;  // overflow only happens on the blow-up side
    }
    sh.side = last_a1 > 0.0 ? 1 : -1;
    sh.survived = !escaped;
    sh.a1_end = last_a1;
    sh.q_end = last_q;
    return sh;
  };

  const double c0 = -fr.W1_dual.pair(pert.real_part());
  double lo = c0 - 2.0 * su.epsilon_star, hi = c0 + 2.0 * su.epsilon_star;
  const Shot slo = shoot(lo), shi = shoot(hi);
  if (slo.side == shi.side) throw NumericalError("run_trapping: shooting bracket does not separate the two sides");
  const int side_lo = slo.side;
  TrappingRun out;
  double c = 0.5 * (lo + hi);
  for (int it = 0; it < su.max_bisections; ++it) {
    c = 0.5 * (lo + hi);
    const Shot sh = shoot(c);
    ++out.bisections;
    if (sh.survived && std::abs(sh.a1_end) <= 1e-4 * sh.q_end) break;
    if (sh.side == side_lo)
      lo = c;
    else
      hi = c;
    if (hi - lo <= 1e-15 * std::max(1.0, std::abs(c))) break;
  }
  out.shoot_coefficient = c;

  const StateField init = seed_state(c);
  out.initial_distance = norms(init - rot * base).H;
  const StateField k0 = StateField::from_real(grid, Vec::Constant(su.n, kappa0(su.p)), Vec::Zero(su.n));
  out.energy_margin = energy(init) - energy(k0);
  out.run = run_selfsimilar(init, 0.0, su.s_span, ro);
  out.series = modulate_series(out.run.s, out.run.states, su.d_star, su.theta_star, {}, &out.lyapunov);
  if (out.series.size() != out.run.s.size()) throw NumericalError("run_trapping: modulation lost along the run");
  out.estimate = fit_decay(out.series, su.epsilon_star, su.d_star, su.theta_star);
  out.monitors = monitor_inequalities(out.series, su.p, 0.05, &out.lyapunov);
  return out;
}

EscapeRun run_escape(const EscapeSetup& su) {
  if (!(su.mu > 0.0)) throw ValidationError("run_escape: mu must be positive");
  if (!(std::abs(su.d) < 1.0)) throw ValidationError("run_escape: |d| must be < 1");
  const GridPtr grid = build_grid(su.n, su.p);
  const StateField init = explicit_degenerate_solution(su.d, su.mu, grid, 0.0);
  EscapeRun out;
  const StateField k0 = StateField::from_real(grid, Vec::Constant(su.n, kappa0(su.p)), Vec::Zero(su.n));
  out.energy_margin = energy(init) - energy(k0);
  RunOptions ro;
  ro.ds = su.ds;
  ro.output_interval = su.output_interval;
  ro.filtering = su.filtering;
  out.run = run_selfsimilar(init, 0.0, su.s_span, ro);
  out.initial_normH = norms(out.run.states.front()).H;
  out.final_normH = norms(out.run.states.back()).H;
  out.series = modulate_series(out.run.s, out.run.states, su.d, 0.0);
  out.modulation_lost_at =
      out.series.size() < out.run.s.size() ? out.run.s[out.series.size()] : out.run.s.back();
  if (!out.series.empty()) {
    const DecompRecord& r = out.series.back();
    out.a1_dominates = std::abs(r.a1check) > r.aminus_check + r.aminus_tilde;
  }
  // Escape: the unstable component takes over, the state leaves the soliton
  // neighbourhood and decays to the zero solution.
  const bool left = out.series.size() < out.run.s.size() || out.a1_dominates;
  if (left && out.final_normH < 0.1 * out.initial_normH)
    out.verdict = Verdict::Escaped;
  else if (out.series.size() >= 30)
    out.verdict = fit_decay(out.series, out.series.front().normH, su.d, 0.0).verdict;
  return out;
}

double h1_bracket(const StateField& state) {
  state.validate();
  const WeightedGrid& g = *state.grid;
  const Vec& wq = g.quad_weights();
  const CVec dw = g.derivative(state.first);
  const double h1 = std::sqrt(wq.dot(Vec(state.first.array().abs2().matrix())) + wq.dot(Vec(dw.array().abs2().matrix())));
  const double l2 = std::sqrt(wq.dot(Vec(state.second.array().abs2().matrix())));
  return h1 + l2;
}

ProfileRun run_profile_pipeline(const ProfileSetup& su) {
  if (!(su.p > 1.0)) throw ValidationError("run_profile_pipeline: p must exceed 1");
  if (!(su.s_step > 0.0)) throw ValidationError("run_profile_pipeline: s_step must be positive");
  PhysicalGrid xg;
  xg.x_min = -su.x_half_width;
  xg.x_max = su.x_half_width;
  xg.n = su.x_points;
  CVec u0(xg.n), u1(xg.n);
  for (int j = 0; j < xg.n; ++j) {
    const double x = xg.x(j);
    const double e = std::exp(-x * x);
    u0(j) = su.amplitude * std::polar(1.0, su.phase) * e;
    u1(j) = cplx(0.0, su.u1_amplitude) * e;
  }
  Cone cone;
  cone.delta0 = su.delta0;
  PhysicalOptions po;
  po.p = su.p;
  po.cfl = su.cfl;
  const PhysicalRun pilot = run_physical(u0, u1, xg, cone, po);

  ProfileRun out;
  out.fit = pilot.fit;
  out.That = pilot.That;
  out.x0 = pilot.x_peak;
  out.s_window_end = -std::log(su.resolve_factor * xg.h());
  const double s0 = -std::log(out.That);
  if (!(out.s_window_end > s0 + 10.0 * su.s_step))
    throw NumericalError("run_profile_pipeline: resolvable window too short; refine the x-grid");

  CaptureSpec cap;
  cap.That = out.That;
  for (long k = 0;; ++k) {
    const double s = s0 + k * su.s_step;
    if (s > out.s_window_end + 1e-12) break;
    cap.s_targets.push_back(s);
  }
  po.capture = cap;
  cone.x0 = out.x0;
  const PhysicalRun second = run_physical(u0, u1, xg, cone, po);
  const GridPtr grid = build_grid(su.n, su.p);
  const auto samples = to_selfsimilar(second, out.x0, out.That, grid);

  std::vector<StateField> states;
  const double k0 = kappa0(su.p);
  for (const auto& [s, st] : samples) {
    out.s.push_back(s);
    out.bracket.push_back(h1_bracket(st));
    const double th = std::arg(grid->integrate(st.first));
    out.kappa0_distance.push_back(
        norms(st - std::polar(1.0, th) * StateField::from_real(grid, Vec::Constant(su.n, k0), Vec::Zero(su.n))).H);
    states.push_back(st);
  }

  // Modulation starts at the first sample inside the basin.
  std::size_t start = 0;
  double d_init = 0.0, th_init = 0.0;
  for (; start < states.size(); ++start) {
    const Classification cls = classify_stationary(ScalarField(grid, states[start].first), 1.0);
    if (cls.kind != Classification::Kind::Soliton) continue;
    try {
      const ModulationResult m = modulate(states[start], cls.params.d, cls.params.theta);
      d_init = m.params.d;
      th_init = m.params.theta;
      break;
    } catch (const NumericalError&) {
    }
  }
  if (start == states.size()) throw NumericalError("run_profile_pipeline: no sample enters the modulation basin");
  out.modulation_start = start;
  const std::vector<double> s_tail(out.s.begin() + start, out.s.end());
  const std::vector<StateField> st_tail(states.begin() + start, states.end());
  out.series = modulate_series(s_tail, st_tail, d_init, th_init);

  const std::size_t m = out.series.size();
  if (m == st_tail.size() && m >= 6) {
    std::vector<double> xs, ys;
    for (const auto& r : out.series) {
      xs.push_back(r.s);
      ys.push_back(std::log(std::max(r.normH, 1e-300)));
    }
    out.q_decreasing = linear_fit(xs, ys).first < 0.0 && out.series.back().normH < out.series.front().normH;
    const auto rate = [&](std::size_t i) {
      const auto& r = out.series[i];
      return std::abs(r.dprime) / (1.0 - r.d * r.d) + std::abs(r.thetaprime);
    };
    double first = 0.0, last = 0.0;
    const std::size_t third = m / 3;
    for (std::size_t i = 0; i < third; ++i) {
      first += rate(i);
      last += rate(m - 1 - i);
    }
    out.params_converging = last < first;
  }
  return out;
}

}  // namespace sslab
