#include "sslab/evolve.hpp"

#include <algorithm>
#include <cmath>

#include "sslab/spectral.hpp"
#include "sslab/stationary.hpp"

namespace sslab {

namespace {

bool all_finite(const CVec& v) { return v.allFinite(); }

// |w|^{p-1} w
CVec power_term(const CVec& w, double p) {
  CVec out(w.size());
  for (int j = 0; j < w.size(); ++j) {
    const double m2 = std::norm(w(j));
    out(j) = (p == 3.0 ? m2 : (m2 == 0.0 ? 0.0 : std::pow(m2, 0.5 * (p - 1.0)))) * w(j);
  }
  return out;
}

}  // namespace

double energy(const StateField& state) {
  state.validate();
  const WeightedGrid& g = *state.grid;
  const double p = g.p();
  const CVec dw = g.derivative(state.first);
  Vec integrand(g.size());
  for (int j = 0; j < g.size(); ++j) {
    const double m = std::abs(state.first(j));
    integrand(j) = 0.5 * std::norm(state.second(j)) + 0.5 * std::norm(dw(j)) * g.omega()(j) +
                   (p + 1.0) / ((p - 1.0) * (p - 1.0)) * m * m - std::pow(m, p + 1.0) / (p + 1.0);
  }
  return g.integrate(integrand);
}

double dissipation(const StateField& state) {
  state.validate();
  const WeightedGrid& g = *state.grid;
  return 4.0 / (g.p() - 1.0) * g.integrate_over_omega(Vec(state.second.array().abs2().matrix()));
}

double cfl_bound(const WeightedGrid& g, double cfl) {
  const double n = g.size();
  return cfl * 54.0 / (n * n);
}

SelfSimilarSystem::SelfSimilarSystem(GridPtr grid, bool filtering) : grid_(std::move(grid)), filtering_(filtering) {
  if (!grid_) throw ValidationError("SelfSimilarSystem: null grid");
  const double p = grid_->p();
  c_shift_ = 2.0 * (p + 1.0) / ((p - 1.0) * (p - 1.0));
  c_damp_ = (p + 3.0) / (p - 1.0);
  c_first_ = 2.0 * (p + 1.0) / (p - 1.0);
  if (filtering_) {
    // exp(-36 ((k - k0)/(N - k0))^8) on the top 10% of the orthonormal modes
    const int n = grid_->size();
    const BasisPtr basis = build_eigenbasis(grid_, n - 2);
    Mat V(n, n);
    V.leftCols(n - 1) = basis->values();
    V.col(n - 1) = basis->eval(n - 1, grid_->nodes());
    Vec sigma = Vec::Ones(n);
    const int k0 = static_cast<int>(std::floor(0.9 * (n - 1)));
    for (int k = k0 + 1; k < n; ++k) {
      const double t = double(k - k0) / double(n - 1 - k0);
      sigma(k) = std::exp(-36.0 * std::pow(t, 8));
    }
    filter_ = V * sigma.asDiagonal() * V.partialPivLu().inverse();
  }
  const int n = grid_->size();
  for (CVec* v : {&k1w_, &k1v_, &k2w_, &k2v_, &k3w_, &k3v_, &k4w_, &k4v_, &tw_, &tv_}) v->resize(n);
}

void SelfSimilarSystem::rhs(const CVec& w, const CVec& v, CVec& dw, CVec& dv) const {
  const WeightedGrid& g = *grid_;
  const auto y = g.nodes().array();
  const Mat& D = g.diff_matrix();
  const Mat& D2 = g.diff2_matrix();
  // Real and imaginary parts through real matrix products.
  Mat wv(w.size(), 4);
  wv.col(0) = w.real();
  wv.col(1) = w.imag();
  wv.col(2) = v.real();
  wv.col(3) = v.imag();
  const Mat d1 = D * wv;
  const Mat d2 = D2 * wv.leftCols(2);
  const CVec nl = power_term(w, g.p());
  dw = v;
  for (int j = 0; j < w.size(); ++j) {
    const double om = g.omega()(j);
    const cplx Lw(om * d2(j, 0) - c_first_ * y(j) * d1(j, 0), om * d2(j, 1) - c_first_ * y(j) * d1(j, 1));
    const cplx dyv(d1(j, 2), d1(j, 3));
    dv(j) = Lw - c_shift_ * w(j) + nl(j) - c_damp_ * v(j) - 2.0 * y(j) * dyv;
  }
}

void SelfSimilarSystem::apply_filter(CVec& f) const {
  const Vec re = filter_ * f.real();
  const Vec im = filter_ * f.imag();
  f.real() = re;
  f.imag() = im;
}

void SelfSimilarSystem::step(CVec& w, CVec& v, double ds) const {
  rhs(w, v, k1w_, k1v_);
  tw_ = w + 0.5 * ds * k1w_;
  tv_ = v + 0.5 * ds * k1v_;
  rhs(tw_, tv_, k2w_, k2v_);
  tw_ = w + 0.5 * ds * k2w_;
  tv_ = v + 0.5 * ds * k2v_;
  rhs(tw_, tv_, k3w_, k3v_);
  tw_ = w + ds * k3w_;
  tv_ = v + ds * k3v_;
  rhs(tw_, tv_, k4w_, k4v_);
  w += (ds / 6.0) * (k1w_ + 2.0 * k2w_ + 2.0 * k3w_ + k4w_);
  v += (ds / 6.0) * (k1v_ + 2.0 * k2v_ + 2.0 * k3v_ + k4v_);
  if (filtering_) {
    apply_filter(w);
    apply_filter(v);
  }
}

StateField step_selfsimilar(const StateField& state, double ds, double cfl) {
  state.validate();
  if (!(ds > 0.0)) throw ValidationError("step_selfsimilar: ds must be positive");
  if (ds > cfl_bound(*state.grid, cfl)) throw ValidationError("step_selfsimilar: ds above the CFL bound");
  SelfSimilarSystem sys(state.grid);
  StateField out = state;
  sys.step(out.first, out.second, ds);
  if (!all_finite(out.first) || !all_finite(out.second)) throw NumericalError("step_selfsimilar: non-finite state");
  return out;
}

StateField explicit_degenerate_solution(double d, double mu, const GridPtr& grid, double s) {
  if (!grid) throw ValidationError("explicit_degenerate_solution: null grid");
  if (!(std::abs(d) < 1.0)) throw ValidationError("explicit_degenerate_solution: |d| must be < 1");
  const WeightedGrid& g = *grid;
  const double p = g.p();
  const double a = g.a();
  const double A = kappa0(p) * std::pow(1.0 - d * d, 1.0 / (p - 1.0));
  const double m = mu * std::exp(s);
  const Vec den = (1.0 + m + d * g.nodes().array()).matrix();
  if (!(den.minCoeff() > 0.0)) throw ValidationError("explicit_degenerate_solution: denominator nonpositive");
  const Vec w = (A * den.array().pow(-a)).matrix();
  const Vec ws = (-a * m * A * den.array().pow(-a - 1.0)).matrix();
  return StateField::from_real(grid, w, ws);
}

SelfSimilarRun run_selfsimilar(const StateField& initial, double s0, double s_span, const RunOptions& opts) {
  initial.validate();
  if (!(s_span > 0.0)) throw ValidationError("run_selfsimilar: s_span must be positive");
  if (!(opts.ds > 0.0)) throw ValidationError("run_selfsimilar: ds must be positive");
  if (!(opts.output_interval >= opts.ds)) throw ValidationError("run_selfsimilar: output interval below ds");
  const GridPtr& grid = initial.grid;
  SelfSimilarRun run;
  run.grid = grid;
  run.p = grid->p();
  run.ds = opts.ds;
  run.cfl_bound = cfl_bound(*grid, opts.cfl);
  run.filtering = opts.filtering;
  if (opts.ds > run.cfl_bound) throw ValidationError("run_selfsimilar: ds above the CFL bound");

  const long nsteps = std::lround(s_span / opts.ds);
  const long every = std::max(1L, std::lround(opts.output_interval / opts.ds));
  SelfSimilarSystem sys(grid, opts.filtering);
  StateField st = initial;

  std::vector<double> E;  // per step
  std::vector<long> out_steps;
  E.reserve(nsteps + 1);
  double prev_diss = dissipation(st);
  E.push_back(energy(st));
  run.initial_energy = E.front();

  const auto record = [&](long k) {
    run.s.push_back(s0 + k * opts.ds);
    run.energy.push_back(E.back());
    run.dissipation.push_back(prev_diss);
    if (opts.keep_states) run.states.push_back(st);
    out_steps.push_back(k);
    if (opts.monitor && !opts.monitor(run.s.back(), st)) return false;
    return true;
  };

  bool go = record(0);
  long k = 0;
  while (go && k < nsteps) {
    sys.step(st.first, st.second, opts.ds);
    ++k;
    if (!all_finite(st.first) || !all_finite(st.second))
      throw NumericalError("run_selfsimilar: non-finite state at s = " + std::to_string(s0 + k * opts.ds));
    const double e = energy(st);
    const double diss = dissipation(st);
    const double inc = e - E.back();
    run.max_energy_increase = std::max(run.max_energy_increase, inc);
    if (inc > 10.0 * opts.energy_tol)
      throw NumericalError("run_selfsimilar: energy increased beyond 10x tolerance (solver failure)");
    run.integrated_dissipation += 0.5 * opts.ds * (prev_diss + diss) * (run.p - 1.0) / 4.0;
    E.push_back(e);
    prev_diss = diss;
    if (k % every == 0 || k == nsteps) go = record(k);
  }
  run.stopped_by_monitor = !go;

  // dE/ds by centered differences on the step grid, one-sided at the ends.
  const long last = static_cast<long>(E.size()) - 1;
  for (std::size_t i = 0; i < out_steps.size(); ++i) {
    const long j = out_steps[i];
    double dE;
    if (last < 2)
      dE = last == 1 ? (E[1] - E[0]) / opts.ds : 0.0;
    else if (j == 0)
      dE = (-3.0 * E[0] + 4.0 * E[1] - E[2]) / (2.0 * opts.ds);
    else if (j == last)
      dE = (3.0 * E[j] - 4.0 * E[j - 1] + E[j - 2]) / (2.0 * opts.ds);
    else
      dE = (E[j + 1] - E[j - 1]) / (2.0 * opts.ds);
    run.identity_residual.push_back(std::abs(dE + run.dissipation[i]));
  }
  return run;
}

}  // namespace sslab
