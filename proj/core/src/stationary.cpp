#include "sslab/stationary.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include <boost/numeric/odeint.hpp>

#include "sslab/spectral.hpp"

namespace sslab {

double kappa0(double p) {
  if (!(p > 1.0 + 1e-6)) throw ValidationError("kappa0: p must exceed 1");
  return std::pow(2.0 * (p + 1.0) / ((p - 1.0) * (p - 1.0)), 1.0 / (p - 1.0));
}

SolitonParams SolitonParams::from_d(double d, double theta) {
  if (!(std::abs(d) < 1.0)) throw ValidationError("soliton parameter |d| must be < 1");
  return {d, theta, std::atanh(d)};
}

SolitonParams SolitonParams::from_lambda(double lambda, double theta) {
  if (!std::isfinite(lambda)) throw ValidationError("rapidity must be finite");
  return {std::tanh(lambda), theta, lambda};
}

double angular_distance(double a, double b) {
  double x = std::remainder(a - b, 2.0 * std::numbers::pi);
  return x;
}

Vec kappa_values(const WeightedGrid& g, double d) {
  if (!(std::abs(d) < 1.0)) throw ValidationError("kappa: |d| must be < 1");
  const double p = g.p();
  const double pref = kappa0(p) * std::pow(1.0 - d * d, 1.0 / (p - 1.0));
  return (pref * (1.0 + d * g.nodes().array()).pow(-2.0 / (p - 1.0))).matrix();
}

Vec kappa_d_derivative(const WeightedGrid& g, double d) {
  const double p = g.p();
  const double pref = -2.0 * kappa0(p) / ((p - 1.0) * (1.0 - d * d)) * std::pow(1.0 - d * d, 1.0 / (p - 1.0));
  const auto y = g.nodes().array();
  return (pref * (y + d) * (1.0 + d * y).pow(-(p + 1.0) / (p - 1.0))).matrix();
}

ScalarField kappa_profile(const SolitonParams& params, const GridPtr& grid) {
  const Vec k = kappa_values(*grid, params.d);
  return ScalarField(grid, std::polar(1.0, params.theta) * k.cast<cplx>());
}

CVec lorentz_values(const WeightedGrid& g, const CVec& f, double d) {
  if (!(std::abs(d) < 1.0)) throw ValidationError("lorentz: |d| must be < 1");
  if (d == 0.0) return f;
  const double p = g.p();
  const auto Y = g.nodes().array();
  const Vec z = ((Y + d) / (1.0 + d * Y)).matrix();
  const Vec factor = (std::pow(1.0 - d * d, 1.0 / (p - 1.0)) * (1.0 + d * Y).pow(-2.0 / (p - 1.0))).matrix();
  const CVec fz = g.interpolate(f, z);
  return (factor.array().cast<cplx>() * fz.array()).matrix();
}

ScalarField lorentz(const ScalarField& f, double d) {
  f.validate();
  return ScalarField(f.grid, lorentz_values(*f.grid, f.values, d));
}

double stationary_residual(const ScalarField& f) {
  f.validate();
  const WeightedGrid& g = *f.grid;
  const double p = g.p();
  const double c = 2.0 * (p + 1.0) / ((p - 1.0) * (p - 1.0));
  const CVec Lf = apply_L(g, f.values);
  const CVec res =
      (Lf.array() - c * f.values.array() + f.values.array().abs().pow(p - 1.0).cast<cplx>() * f.values.array())
          .matrix();
  return l2rho_norm(f.grid, res);
}

double kcheck(double xi, double p) { return kappa0(p) / std::pow(std::cosh(xi), 2.0 / (p - 1.0)); }

double ConnectionTrajectory::energy_at(std::size_t k) const {
  const double c0 = 4.0 / ((p - 1.0) * (p - 1.0));
  const double m = std::abs(v[k]);
  return 0.5 * std::norm(v_prime[k]) - 0.5 * c0 * m * m + std::pow(m, p + 1.0) / (p + 1.0);
}

void ConnectionTrajectory::write_csv(std::ostream& os) const {
  const auto prec = os.precision();
  os.precision(17);
  os << "xi,re_v,im_v,r,h\n";
  for (std::size_t k = 0; k < xi.size(); ++k)
    os << xi[k] << ',' << v[k].real() << ',' << v[k].imag() << ',' << r[k] << ',' << h[k] << '\n';
  os.precision(prec);
}

namespace {

using OdeState = std::array<double, 4>;

struct ConnectionRhs {
  double p;
  double c0;
  void operator()(const OdeState& x, OdeState& dx, double /*xi*/) const {
    const double m = std::hypot(x[0], x[1]);
    const double nl = m > 0.0 ? std::pow(m, p - 1.0) : 0.0;
    dx[0] = x[2];
    dx[1] = x[3];
    dx[2] = c0 * x[0] - nl * x[0];
    dx[3] = c0 * x[1] - nl * x[1];
  }
};

void integrate_half(const ConnectionRhs& rhs, cplx v0, cplx v0p, double xi_end, int count, double tol,
                    std::vector<double>& xs, std::vector<OdeState>& states) {
  namespace odeint = boost::numeric::odeint;
  OdeState x{v0.real(), v0.imag(), v0p.real(), v0p.imag()};
  std::vector<double> times(count + 1);
  for (int k = 0; k <= count; ++k) times[k] = xi_end * k / count;
  auto stepper = odeint::make_dense_output(tol, tol, odeint::runge_kutta_dopri5<OdeState>());
  const double dt0 = (xi_end >= 0 ? 1.0 : -1.0) * 1e-3;
  xs.clear();
  states.clear();
  odeint::integrate_times(stepper, rhs, x, times.begin(), times.end(), dt0, [&](const OdeState& s, double t) {
    xs.push_back(t);
    states.push_back(s);
  });
}

}  // namespace

ConnectionTrajectory integrate_connection_ode(cplx v0, cplx v0p, double xi_max, double p,
                                              const ConnectionOptions& opts) {
  kappa0(p);
  if (v0 == cplx(0.0) && v0p == cplx(0.0)) throw ValidationError("connection ODE: zero initial data");
  if (std::abs(v0) <= opts.phase_threshold)
    throw ValidationError("connection ODE: |v(0)| below the phase threshold");
  if (!(xi_max > 0.0)) throw ValidationError("connection ODE: xi_max must be positive");

  const ConnectionRhs rhs{p, 4.0 / ((p - 1.0) * (p - 1.0))};
  const int count = std::max(1, static_cast<int>(std::ceil(xi_max * opts.samples_per_unit)));
  std::vector<double> xf, xb;
  std::vector<OdeState> sf, sb;
  try {
    integrate_half(rhs, v0, v0p, xi_max, count, opts.tolerance, xf, sf);
    integrate_half(rhs, v0, v0p, -xi_max, count, opts.tolerance, xb, sb);
  } catch (const std::exception& e) {
    throw NumericalError(std::string("connection ODE integrator failed: ") + e.what());
  }
  if (xf.size() != static_cast<std::size_t>(count + 1) || xb.size() != static_cast<std::size_t>(count + 1))
    throw NumericalError("connection ODE integrator returned an incomplete trajectory");

  ConnectionTrajectory t;
  t.p = p;
  const auto push = [&](double xi, const OdeState& s) {
    if (!std::isfinite(s[0]) || !std::isfinite(s[1]) || !std::isfinite(s[2]) || !std::isfinite(s[3]))
      throw NumericalError("connection ODE produced non-finite values");
    t.xi.push_back(xi);
    t.v.emplace_back(s[0], s[1]);
    t.v_prime.emplace_back(s[2], s[3]);
  };
  for (int k = count; k >= 1; --k) push(xb[k], sb[k]);
  for (int k = 0; k <= count; ++k) push(xf[k], sf[k]);

  const std::size_t n = t.xi.size();
  const std::size_t k0 = static_cast<std::size_t>(count);
  t.r.resize(n);
  t.h.resize(n);
  t.phase.resize(n);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double J0 = (t.v_prime[k0] * std::conj(t.v[k0])).imag();
  t.mu = J0 * J0;
  t.energy0 = t.energy_at(k0);
  t.inf_modulus = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    t.r[k] = std::abs(t.v[k]);
    t.inf_modulus = std::min(t.inf_modulus, t.r[k]);
    const double J = (t.v_prime[k] * std::conj(t.v[k])).imag();
    t.max_mu_drift = std::max(t.max_mu_drift, std::abs(J * J - t.mu));
    t.max_energy_drift = std::max(t.max_energy_drift, std::abs(t.energy_at(k) - t.energy0));
    t.h[k] = t.r[k] > opts.phase_threshold ? J / (t.r[k] * t.r[k]) : nan;
  }
  // Phase unwrapped by continuity outward from xi = 0.
  t.phase[k0] = std::arg(t.v[k0]);
  const auto unwrap = [&](std::size_t from, std::size_t to) {
    const double prev = t.phase[from];
    if (t.r[to] <= opts.phase_threshold) {
      t.phase[to] = prev;
      return;
    }
    t.phase[to] = prev + std::remainder(std::arg(t.v[to]) - prev, 2.0 * std::numbers::pi);
  };
  for (std::size_t k = k0 + 1; k < n; ++k) unwrap(k - 1, k);
  for (std::size_t k = k0; k-- > 0;) unwrap(k + 1, k);

  t.decaying = std::abs(t.mu) < opts.classify_tolerance && std::abs(t.energy0) < opts.classify_tolerance;
  return t;
}

Classification classify_stationary(const ScalarField& f, double tol) {
  f.validate();
  const GridPtr& g = f.grid;
  const int n = g->size();
  Classification out;
  const double nrm = h0_norm(g, f.values);
  if (nrm < tol) {
    out.kind = Classification::Kind::Zero;
    out.distance = nrm;
    return out;
  }
  const double p = g->p();
  const double a = 2.0 / (p - 1.0);
  Eigen::Index jmax = 0;
  f.values.array().abs().maxCoeff(&jmax);
  double theta = std::arg(f.values(jmax));

  // Initial d from the end-point modulus ratio, which kappa(d, .) fixes exactly.
  double d = 0.0;
  const double lo = std::abs(f.values(0));
  const double hi = std::abs(f.values(n - 1));
  if (lo > 0.0 && hi > 0.0) {
    const double Y = g->nodes()(n - 1);
    const double q = std::pow(lo / hi, 1.0 / a);
    d = std::clamp((q - 1.0) / (Y * (q + 1.0)), -0.999, 0.999);
  }
  double lambda = std::atanh(d);

  // Gauss-Newton refinement on (lambda, theta) in L2_rho.
  const Vec sw = g->rho_weights().array().sqrt().matrix();
  for (int it = 0; it < 30; ++it) {
    d = std::tanh(lambda);
    const Vec k = kappa_values(*g, d);
    const Vec dk = (1.0 - d * d) * kappa_d_derivative(*g, d);
    const cplx e = std::polar(1.0, theta);
    const CVec r = f.values - e * k.cast<cplx>();
    Mat J(2 * n, 2);
    Vec rv(2 * n);
    for (int j = 0; j < n; ++j) {
      const cplx jl = -e * dk(j);
      const cplx jt = -cplx(0.0, 1.0) * e * k(j);
      J(j, 0) = sw(j) * jl.real();
      J(j, 1) = sw(j) * jt.real();
      J(n + j, 0) = sw(j) * jl.imag();
      J(n + j, 1) = sw(j) * jt.imag();
      rv(j) = sw(j) * r(j).real();
      rv(n + j) = sw(j) * r(j).imag();
    }
    const Eigen::Vector2d step = J.colPivHouseholderQr().solve(-rv);
    if (!step.allFinite()) break;
    lambda += std::clamp(step(0), -1.0, 1.0);
    theta += step(1);
    if (step.norm() < 1e-15) break;
  }
  out.params = SolitonParams::from_lambda(lambda, theta);
  const CVec diff = f.values - std::polar(1.0, theta) * kappa_values(*g, out.params.d).cast<cplx>();
  out.distance = h0_norm(g, diff);
  out.kind = out.distance < tol ? Classification::Kind::Soliton : Classification::Kind::NotStationary;
  return out;
}

}  // namespace sslab
