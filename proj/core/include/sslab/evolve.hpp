#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "sslab/wspace.hpp"

namespace sslab {

// int (1/2|w_s|^2 + 1/2|w_y|^2 (1-y^2) + (p+1)/(p-1)^2 |w|^2 - |w|^{p+1}/(p+1)) rho
double energy(const StateField& state);
// (4/(p-1)) int |w_s|^2 rho/(1-y^2)
double dissipation(const StateField& state);

// Largest admissible RK4 step: cfl * 54 / n^2.  The constant is the measured
// RK4 stability limit around kappa(d, .) for p in {2,3,5}, |d| <= 0.9,
// n in [64, 192] (the collocation operator is far from normal, so the
// limit follows its pseudospectrum, not the exact eigenvalues).
double cfl_bound(const WeightedGrid& g, double cfl = 0.5);

// Method-of-lines right-hand side of the self-similar equation as a first
// order system in (w, w_s).
class SelfSimilarSystem {
 public:
  explicit SelfSimilarSystem(GridPtr grid, bool filtering = false);
  void rhs(const CVec& w, const CVec& v, CVec& dw, CVec& dv) const;
  void step(CVec& w, CVec& v, double ds) const;
  const GridPtr& grid() const { return grid_; }

 private:
  void apply_filter(CVec& f) const;
  GridPtr grid_;
  double c_shift_, c_damp_, c_first_;
  bool filtering_;
  Mat filter_;
  mutable CVec k1w_, k1v_, k2w_, k2v_, k3w_, k3v_, k4w_, k4v_, tw_, tv_;
};

// One RK4 step; rejects ds above the CFL bound.
StateField step_selfsimilar(const StateField& state, double ds, double cfl = 0.5);

// Pair (w, w_s) of the explicit solution with parameters (d, mu) at time s.
StateField explicit_degenerate_solution(double d, double mu, const GridPtr& grid, double s);

struct RunOptions {
  double ds = 1e-3;
  double output_interval = 0.05;
  double cfl = 0.5;
  bool filtering = false;
  // Per-step energy increase above this is recorded; above 10x it aborts.
  double energy_tol = 1e-6;
  bool keep_states = true;
  // Called at every output sample; returning false stops the run.
  std::function<bool(double s, const StateField& state)> monitor;
};

struct SelfSimilarRun {
  GridPtr grid;
  double p = 3.0;
  double ds = 0.0;
  double cfl_bound = 0.0;
  bool filtering = false;
  std::vector<double> s;
  std::vector<StateField> states;
  std::vector<double> energy;
  std::vector<double> dissipation;
  // |dE/ds + dissipation| at each output sample (centered differences in s).
  std::vector<double> identity_residual;
  double max_energy_increase = 0.0;
  double integrated_dissipation = 0.0;
  double initial_energy = 0.0;
  bool stopped_by_monitor = false;
};

SelfSimilarRun run_selfsimilar(const StateField& initial, double s0, double s_span, const RunOptions& opts = {});

// ---- physical space -------------------------------------------------------

struct PhysicalGrid {
  double x_min = -4.0;
  double x_max = 4.0;
  int n = 4096;  // periodic, x_j = x_min + j h
  double h() const { return (x_max - x_min) / n; }
  double x(int j) const { return x_min + j * h(); }
};

struct Cone {
  double x0 = 0.0;
  double delta0 = 0.5;
};

struct CaptureSpec {
  double That = 1.0;
  std::vector<double> s_targets;
};

struct PhysicalOptions {
  double p = 3.0;
  double cfl = 0.5;
  double t_max = 10.0;
  double overflow = 1e12;
  std::optional<CaptureSpec> capture;
};

struct Snapshot {
  double t = 0.0;
  int j_start = 0;  // first grid index of the stored window
  CVec u, ut;
};

struct BlowupFit {
  double T = 0.0;
  double C = 0.0;
  double residual = 0.0;  // RMS relative misfit of sup|u| over the window
  int begin = 0, end = 0;
};

struct PhysicalRun {
  PhysicalGrid xgrid;
  Cone cone;
  double p = 3.0;
  double dt = 0.0;
  std::vector<double> t_trace;
  std::vector<double> sup_trace;
  std::vector<double> argmax_trace;
  bool halted_by_overflow = false;
  BlowupFit fit;
  double That = 0.0;
  double x_peak = 0.0;  // location of sup|u| at the end of the fit window
  std::vector<Snapshot> snapshots;
};

PhysicalRun run_physical(const CVec& u0, const CVec& u1, const PhysicalGrid& xgrid, const Cone& cone,
                         const PhysicalOptions& opts);

// Least squares of log sup|u| against log(T - t) with T free, over the last
// decade of reliably resolved growth.
BlowupFit fit_blowup_time(const std::vector<double>& t, const std::vector<double>& sup, double p);

// Similarity transform of the captured snapshots onto the y-grid.
std::vector<std::pair<double, StateField>> to_selfsimilar(const PhysicalRun& run, double x0, double That,
                                                          const GridPtr& grid);

}  // namespace sslab
