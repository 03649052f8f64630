#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sslab/evolve.hpp"
#include "sslab/linop.hpp"
#include "sslab/stationary.hpp"

namespace sslab {

struct ModulationOptions {
  int max_iter = 50;
  double tol = 1e-12;
  double fd_step = 1e-6;  // lambda step of the Jacobian column
  int max_halvings = 8;
  // Basin radius eps1: H-distance from the seed soliton above which we refuse.
  double basin = 0.5;
};

struct ModulationResult {
  SolitonParams params;
  StateField q;  // e^{-i theta} state - (kappa(d), 0)
  int iterations = 0;
  double phi_check = 0.0;  // orthogonality residuals at the root
  double phi_tilde = 0.0;
  Eigen::Matrix2d jacobian;  // d Phi / d(lambda, theta) at the root
};

// Newton on (lambda, theta) for Phi = 0.
ModulationResult modulate(const StateField& state, double d_init, double theta_init,
                          const ModulationOptions& opts = {});

// Phi(v, d, theta).
Eigen::Vector2d modulation_map(const StateField& state, double d, double theta);

struct NonlinearTerms {
  ScalarField f_check;
  ScalarField f_tilde;
  double F_integral = 0.0;  // int F_d(q1) rho
  double R_minus = 0.0;     // -F_integral
};

NonlinearTerms nonlinear_terms(const ScalarField& q1, double d);

struct DecompRecord {
  double s = 0.0;
  double d = 0.0;
  double theta = 0.0;
  double lambda = 0.0;
  double a1check = 0.0;
  double aminus_check = 0.0;
  double aminus_tilde = 0.0;
  double a = 0.0;
  double b = 0.0;
  double Rminus = 0.0;
  double E = 0.0;
  double normH = 0.0;
  double dprime = 0.0;
  double thetaprime = 0.0;
  // auxiliary quantities for the monitors
  double ortho_check = 0.0;  // pi-check_0 of Re q
  double ortho_tilde = 0.0;  // pi-tilde_0 of Im q
  double diss_minus = 0.0;   // int (q-check_{-,2}^2 + q-tilde_{-,2}^2) rho/(1-y^2)
  double diss_check = 0.0;   // int q-check_{-,2}^2 rho/(1-y^2)
  double diss_tilde = 0.0;   // int q-tilde_2^2 rho/(1-y^2)
  double cross_check = 0.0;  // int q-check_1 q-check_2 rho
  double cross_tilde = 0.0;  // int q-tilde_1 q-tilde_2 rho
  double form_check = 0.0;   // phi-check(q-check, q-check)
  double form_tilde = 0.0;   // phi-tilde(q-tilde, q-tilde)
};

// Projection part of the record; frame must be built at d.
DecompRecord decompose(const StateField& q, const LinearizedFrame& frame, double ortho_tol = 1e-8);

// Fill dprime/thetaprime by centered differences (one-sided at the ends).
void finite_difference_rates(std::vector<DecompRecord>& series);

double lyapunov_candidate(const StateField& q, double b, double eta6 = 0.05);

struct InequalityCheck {
  std::string name;
  double fitted_constant = 0.0;  // 90th percentile of lhs/rhs
  double max_ratio = 0.0;
  int samples = 0;
  int violations = 0;  // samples with lhs > 2 * fitted_constant * rhs
};

struct MonitorReport {
  std::vector<InequalityCheck> checks;
  double mu6 = 0.0;  // decay rate fitted to log f
  bool lyapunov_bracket = true;  // f/2 <= b <= 2 f on every sample
  int total_violations() const;
};

MonitorReport monitor_inequalities(const std::vector<DecompRecord>& series, double p, double eta6 = 0.05,
                                   const std::vector<double>* lyapunov = nullptr);

enum class Verdict { Trapped, Escaped, Inconclusive };
std::string to_string(Verdict v);

struct TrappingEstimate {
  double mu_est = 0.0;
  double C_est = 0.0;
  double fit_residual = 0.0;
  double d_infinity = 0.0;
  double theta_infinity = 0.0;
  double epsilon_star = 0.0;
  double param_distance = 0.0;  // |arctanh d_inf - arctanh d*| + |theta_inf - theta*|
  double param_rate = 0.0;      // decay rate of |lambda'| + |theta'|
  double param_rate_ratio = 0.0;  // param_rate / (2 mu_est)
  bool monotone_tail = false;
  Verdict verdict = Verdict::Inconclusive;
};

TrappingEstimate fit_decay(const std::vector<DecompRecord>& series, double epsilon_star, double d_star,
                           double theta_star);

// ---- trapping experiment -------------------------------------------------

struct TrappingSetup {
  double p = 3.0;
  int n = 64;
  double d_star = 0.0;
  double theta_star = 0.0;
  double epsilon_star = 1e-3;
  double s_span = 8.0;
  double ds = 5e-3;
  double output_interval = 0.1;
  std::uint64_t seed = 1;
  bool filtering = false;
  int max_bisections = 60;
};

struct TrappingRun {
  double shoot_coefficient = 0.0;  // multiple of F-check_1 added to the perturbation
  int bisections = 0;
  double initial_distance = 0.0;
  double energy_margin = 0.0;  // E(initial) - E(kappa0, 0)
  SelfSimilarRun run;
  std::vector<DecompRecord> series;
  TrappingEstimate estimate;
  MonitorReport monitors;
  std::vector<double> lyapunov;
};

// Perturbs e^{i theta*}(kappa(d*), 0) by a random smooth field of H-norm eps*,
// places the seed on the stable side by bisection along F-check_1, and
// integrates with modulation attached.
TrappingRun run_trapping(const TrappingSetup& setup);

// ---- escape experiment ---------------------------------------------------

struct EscapeSetup {
  double p = 3.0;
  int n = 64;
  double d = 0.2;
  double mu = 1e-4;  // K-bar seed parameter; mu > 0 puts the energy below E(kappa0, 0)
  double s_span = 16.0;
  double ds = 2e-3;
  double output_interval = 0.1;
  bool filtering = false;
};

struct EscapeRun {
  SelfSimilarRun run;
  std::vector<DecompRecord> series;  // up to the first modulation failure
  double energy_margin = 0.0;        // E(initial) - E(kappa0, 0)
  double initial_normH = 0.0;        // ||(w, w_s)(0)||_H
  double final_normH = 0.0;
  double modulation_lost_at = 0.0;   // s of the first failure (end of run if none)
  bool a1_dominates = false;         // |a1check| exceeds aminus_check + aminus_tilde at the last modulated sample
  Verdict verdict = Verdict::Inconclusive;
};

EscapeRun run_escape(const EscapeSetup& setup);

// ---- profile pipeline ----------------------------------------------------

struct ProfileSetup {
  double p = 3.0;
  // u0 = amplitude e^{i phase} e^{-x^2}, u1 = i u1_amplitude e^{-x^2}
  double amplitude = 3.0;
  double phase = 0.3;
  double u1_amplitude = 0.5;
  double x_half_width = 3.0;
  int x_points = 32768;
  double delta0 = 0.5;
  double cfl = 0.5;
  int n = 64;
  double s_step = 0.05;
  // resolvable window ends where the cone radius falls to resolve_factor grid cells
  double resolve_factor = 400.0;
};

struct ProfileRun {
  BlowupFit fit;
  double That = 0.0;
  double x0 = 0.0;
  double s_window_end = 0.0;
  std::vector<double> s;             // all transformed samples
  std::vector<double> bracket;       // ||w||_{H^1} + ||w_s||_{L^2} per sample
  std::vector<double> kappa0_distance;  // ||(w, w_s) - e^{i theta}(kappa0, 0)||_H, best theta
  std::size_t modulation_start = 0;  // index into s of the first modulated sample
  std::vector<DecompRecord> series;
  bool q_decreasing = false;
  bool params_converging = false;
};

ProfileRun run_profile_pipeline(const ProfileSetup& setup);

// ||w||_{H^1} + ||w_s||_{L^2} on (-1, 1) with unit weight.
double h1_bracket(const StateField& state);

// Modulation attached to an existing trajectory; stops at the first failure.
std::vector<DecompRecord> modulate_series(const std::vector<double>& s, const std::vector<StateField>& states,
                                          double d_init, double theta_init, const ModulationOptions& opts = {},
                                          std::vector<double>* lyapunov = nullptr, double eta6 = 0.05);

}  // namespace sslab
