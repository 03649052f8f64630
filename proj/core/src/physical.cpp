#include <algorithm>
#include <cmath>
#include <limits>

#include "sslab/evolve.hpp"

namespace sslab {

namespace {

// Weights c[m][k] of the m-th derivative at z from nodes x[0..n-1] (Fornberg).
void fornberg(double z, const double* x, int n, int m, std::vector<std::vector<double>>& c) {
  c.assign(m + 1, std::vector<double>(n, 0.0));
  double c1 = 1.0, c4 = x[0] - z;
  c[0][0] = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - z;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
        c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
      }
      for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
      c[0][j] = c4 * c[0][j] / c3;
    }
    c1 = c2;
  }
}

class WaveSystem {
 public:
  WaveSystem(const PhysicalGrid& g, double p) : n_(g.n), inv12h2_(1.0 / (12.0 * g.h() * g.h())), p_(p) {}

  void rhs(const CVec& u, const CVec& v, CVec& du, CVec& dv) const {
    du = v;
    for (int j = 0; j < n_; ++j) {
      const int jm2 = (j - 2 + n_) % n_, jm1 = (j - 1 + n_) % n_, jp1 = (j + 1) % n_, jp2 = (j + 2) % n_;
      const cplx lap = (-u(jm2) + 16.0 * u(jm1) - 30.0 * u(j) + 16.0 * u(jp1) - u(jp2)) * inv12h2_;
      const double m2 = std::norm(u(j));
      const double f = p_ == 3.0 ? m2 : (m2 == 0.0 ? 0.0 : std::pow(m2, 0.5 * (p_ - 1.0)));
      dv(j) = lap + f * u(j);
    }
  }

  void step(CVec& u, CVec& v, double dt) {
    if (k1u_.size() != n_)
      for (CVec* w : {&k1u_, &k1v_, &k2u_, &k2v_, &k3u_, &k3v_, &k4u_, &k4v_, &tu_, &tv_}) w->resize(n_);
    rhs(u, v, k1u_, k1v_);
    tu_ = u + 0.5 * dt * k1u_;
    tv_ = v + 0.5 * dt * k1v_;
    rhs(tu_, tv_, k2u_, k2v_);
    tu_ = u + 0.5 * dt * k2u_;
    tv_ = v + 0.5 * dt * k2v_;
    rhs(tu_, tv_, k3u_, k3v_);
    tu_ = u + dt * k3u_;
    tv_ = v + dt * k3v_;
    rhs(tu_, tv_, k4u_, k4v_);
    u += (dt / 6.0) * (k1u_ + 2.0 * k2u_ + 2.0 * k3u_ + k4u_);
    v += (dt / 6.0) * (k1v_ + 2.0 * k2v_ + 2.0 * k3v_ + k4v_);
  }

 private:
  int n_;
  double inv12h2_, p_;
  CVec k1u_, k1v_, k2u_, k2v_, k3u_, k3v_, k4u_, k4v_, tu_, tv_;
};

double sse_for(double T, const std::vector<double>& t, const std::vector<double>& logm, int b, int e, double a,
               double* logC) {
  double mean = 0.0;
  for (int k = b; k <= e; ++k) mean += logm[k] + a * std::log(T - t[k]);
  mean /= (e - b + 1);
  double s = 0.0;
  for (int k = b; k <= e; ++k) {
    const double r = logm[k] - (mean - a * std::log(T - t[k]));
    s += r * r;
  }
  if (logC) *logC = mean;
  return s;
}

}  // namespace

BlowupFit fit_blowup_time(const std::vector<double>& t, const std::vector<double>& sup, double p) {
  if (t.size() != sup.size() || t.size() < 3) throw ValidationError("fit_blowup_time: trace too short");
  const double a = 2.0 / (p - 1.0);
  // Reliable prefix: per-step growth of sup|u| below 1%.
  int kr = static_cast<int>(t.size()) - 1;
  for (std::size_t k = 1; k < t.size(); ++k) {
    if (!(sup[k] < 1.01 * sup[k - 1])) {
      kr = static_cast<int>(k) - 1;
      break;
    }
  }
  int kb = kr;
  while (kb > 0 && sup[kb - 1] >= sup[kr] / 10.0) --kb;
  if (kr - kb + 1 < 10 || sup[kb] > sup[kr] / 9.0)
    throw NumericalError("fit_blowup_time: no resolved decade of growth to fit");
  std::vector<double> logm(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) logm[k] = std::log(sup[k]);

  // Scan log(T - t_kr), then golden-section refine.
  const double span = t[kr] - t[kb];
  const double lo = std::log(1e-6 * span), hi = std::log(10.0 * span);
  const auto f = [&](double x) { return sse_for(t[kr] + std::exp(x), t, logm, kb, kr, a, nullptr); };
  const int nscan = 400;
  int best = 0;
  double bestv = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= nscan; ++i) {
    const double v = f(lo + (hi - lo) * i / nscan);
    if (v < bestv) {
      bestv = v;
      best = i;
    }
  }
  double xa = lo + (hi - lo) * std::max(0, best - 1) / nscan;
  double xb = lo + (hi - lo) * std::min(nscan, best + 1) / nscan;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = xb - gr * (xb - xa), x2 = xa + gr * (xb - xa);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 200 && xb - xa > 1e-13; ++it) {
    if (f1 < f2) {
      xb = x2;
      x2 = x1;
      f2 = f1;
      x1 = xb - gr * (xb - xa);
      f1 = f(x1);
    } else {
      xa = x1;
      x1 = x2;
      f1 = f2;
      x2 = xa + gr * (xb - xa);
      f2 = f(x2);
    }
  }
  BlowupFit fit;
  fit.T = t[kr] + std::exp(0.5 * (xa + xb));
  double logC = 0.0;
  sse_for(fit.T, t, logm, kb, kr, a, &logC);
  fit.C = std::exp(logC);
  double acc = 0.0;
  for (int k = kb; k <= kr; ++k) {
    const double model = fit.C * std::pow(fit.T - t[k], -a);
    acc += (model / sup[k] - 1.0) * (model / sup[k] - 1.0);
  }
  fit.residual = std::sqrt(acc / (kr - kb + 1));
  fit.begin = kb;
  fit.end = kr;
  return fit;
}

PhysicalRun run_physical(const CVec& u0, const CVec& u1, const PhysicalGrid& xgrid, const Cone& cone,
                         const PhysicalOptions& opts) {
  if (xgrid.n < 16 || !(xgrid.x_max > xgrid.x_min)) throw ValidationError("run_physical: bad x-grid");
  if (u0.size() != xgrid.n || u1.size() != xgrid.n) throw ValidationError("run_physical: data size mismatch");
  if (!(cone.delta0 > 0.0 && cone.delta0 < 1.0)) throw ValidationError("run_physical: delta0 must lie in (0,1)");
  if (!(opts.p > 1.0)) throw ValidationError("run_physical: p must exceed 1");
  if (!(opts.cfl > 0.0 && opts.cfl <= 1.0)) throw ValidationError("run_physical: cfl must lie in (0,1]");
  if (!u0.allFinite() || !u1.allFinite()) throw ValidationError("run_physical: non-finite data");

  PhysicalRun run;
  run.xgrid = xgrid;
  run.cone = cone;
  run.p = opts.p;
  const double h = xgrid.h();
  run.dt = opts.cfl * h;

  WaveSystem sys(xgrid, opts.p);
  CVec u = u0, v = u1;
  double t = 0.0;

  std::vector<double> capture_t;
  if (opts.capture) {
    for (double s : opts.capture->s_targets) capture_t.push_back(opts.capture->That - std::exp(-s));
    std::sort(capture_t.begin(), capture_t.end());
    if (!capture_t.empty() && capture_t.front() < 0.0)
      throw ValidationError("run_physical: capture time before t = 0");
  }
  std::size_t next_capture = 0;

  const auto sup_of = [&](int* arg) {
    double m = 0.0;
    int jm = 0;
    for (int j = 0; j < xgrid.n; ++j) {
      const double v2 = std::abs(u(j));
      if (v2 > m) {
        m = v2;
        jm = j;
      }
    }
    if (arg) *arg = jm;
    return m;
  };
  const auto push_trace = [&]() {
    int jm = 0;
    const double m = sup_of(&jm);
    run.t_trace.push_back(t);
    run.sup_trace.push_back(m);
    run.argmax_trace.push_back(xgrid.x(jm));
    return m;
  };
  const auto capture = [&]() {
    const double tau = opts.capture->That - t;
    const double half = tau / cone.delta0 + 8.0 * h;
    const int j0 = static_cast<int>(std::floor((cone.x0 - half - xgrid.x_min) / h));
    const int j1 = static_cast<int>(std::ceil((cone.x0 + half - xgrid.x_min) / h));
    if (j0 < 0 || j1 >= xgrid.n) throw ValidationError("run_physical: capture window leaves the x-grid");
    Snapshot sn;
    sn.t = t;
    sn.j_start = j0;
    sn.u = u.segment(j0, j1 - j0 + 1);
    sn.ut = v.segment(j0, j1 - j0 + 1);
    run.snapshots.push_back(std::move(sn));
  };

  push_trace();
  const long max_steps = static_cast<long>(std::ceil(opts.t_max / run.dt));
  for (long k = 0; k < max_steps; ++k) {
    if (opts.capture) {
      while (next_capture < capture_t.size() && std::abs(t - capture_t[next_capture]) <= 0.5 * run.dt + 1e-15) {
        capture();
        ++next_capture;
      }
      if (next_capture == capture_t.size()) break;
    }
    sys.step(u, v, run.dt);
    t = (k + 1) * run.dt;
    if (!u.allFinite()) {
      run.halted_by_overflow = true;
      break;
    }
    const double m = push_trace();
    if (m > opts.overflow) {
      run.halted_by_overflow = true;
      break;
    }
  }
  if (opts.capture) {
    if (next_capture < capture_t.size())
      throw NumericalError("run_physical: solution left the resolvable range before all captures");
    run.That = opts.capture->That;
    run.x_peak = cone.x0;
    return run;
  }
  if (!run.halted_by_overflow) throw NumericalError("run_physical: no blow-up detected within t_max");
  run.fit = fit_blowup_time(run.t_trace, run.sup_trace, opts.p);
  run.That = run.fit.T;
  run.x_peak = run.argmax_trace[run.fit.end];
  return run;
}

std::vector<std::pair<double, StateField>> to_selfsimilar(const PhysicalRun& run, double x0, double That,
                                                          const GridPtr& grid) {
  if (!grid) throw ValidationError("to_selfsimilar: null grid");
  if (run.snapshots.empty()) throw ValidationError("to_selfsimilar: run has no captured snapshots");
  const double a = 2.0 / (run.p - 1.0);
  const double h = run.xgrid.h();
  const int n = grid->size();
  const auto& y = grid->nodes();
  std::vector<std::pair<double, StateField>> out;
  std::vector<std::vector<double>> c;
  double xs[8];
  for (const Snapshot& sn : run.snapshots) {
    const double tau = That - sn.t;
    if (!(tau > 0.0)) throw ValidationError("to_selfsimilar: requested s beyond available t-samples");
    CVec w(n), ws(n);
    for (int j = 0; j < n; ++j) {
      const double x = x0 + y(j) * tau;
      const double r = (x - run.xgrid.x_min) / h - sn.j_start;
      const int i0 = static_cast<int>(std::floor(r)) - 3;
      if (i0 < 0 || i0 + 7 >= sn.u.size()) throw ValidationError("to_selfsimilar: point outside the captured window");
      for (int k = 0; k < 8; ++k) xs[k] = i0 + k;
      fornberg(r, xs, 8, 1, c);
      cplx u = 0.0, ux = 0.0, ut = 0.0;
      for (int k = 0; k < 8; ++k) {
        u += c[0][k] * sn.u(i0 + k);
        ux += c[1][k] * sn.u(i0 + k) / h;
        ut += c[0][k] * sn.ut(i0 + k);
      }
      const double ta = std::pow(tau, a);
      w(j) = ta * u;
      // d/ds w = tau^{a+1} (u_t - y u_x) - a w
      ws(j) = ta * tau * (ut - y(j) * ux) - a * w(j);
    }
    out.emplace_back(-std::log(tau), StateField(grid, w, ws));
  }
  return out;
}

}  // namespace sslab
