#pragma once

#include <optional>
#include <vector>

#include "bbmgap/grid.hpp"
#include "bbmgap/kpp.hpp"
#include "bbmgap/reaction.hpp"
#include "bbmgap/wave.hpp"

namespace bbmgap {

/// Symbols of the free problem p_t = p_xx - 3/(2 lambda* (t+1)) p_x - N p,
/// p(0) = delta(x + a).
struct FreeSolutionParams {
    double a = 0.0;
    double N = 0.0;
    double lambda = 0.0;
    double sqrtN = 0.0;
    double xi_e = 0.0;

    /// xi_e defaults to the midpoint of its admissible interval.
    static FreeSolutionParams make(const Reaction& r, double a, std::optional<double> xi_e = std::nullopt);

    double log_shift(double t) const { return 1.5 / lambda * std::log1p(t); }
    double mu(double t) const { return -a + log_shift(t); }
    double nu(double t) const { return mu(t) + 2.0 * sqrtN * t; }
    double Lambda(double t) const;
    double g(double t, double x) const;
    double theta(double xi) const { return N * xi + 0.25 / xi; }
    double theta_second(double xi) const { return 0.5 / (xi * xi * xi); }
    double t_star() const { return a / (2.0 * sqrtN); }
    double xi_star() const { return 1.0 / (2.0 * sqrtN); }
    double xi_e_lower() const { return 1.0 / (2.0 * (2.0 * sqrtN - lambda)); }
    double xi_e_upper() const { return xi_star(); }
    double t_e() const { return xi_e * a; }
};

/// log p(t, x); throws std::invalid_argument for t <= 0.
double log_free_solution(double t, double x, const FreeSolutionParams& fp);

/// Closed form p(t, x). Also evaluates the factored form Lambda e^{-ax/2t} g
/// and throws NumericalError if the two disagree by more than 1e-12 relative.
double free_solution(double t, double x, const FreeSolutionParams& fp);

double free_solution_factored(double t, double x, const FreeSolutionParams& fp);

struct GapConfig {
    double t0 = 0.001;
    double T_final = 0.0;        // 0 selects max(20 t*, 10 a)
    double T_max = 0.0;          // 0 selects the potential horizon
    bool extend_until_flat = true;
    double flatness_tol = 1e-4;  // on |dI/dt| / I at the stopping time
    double positivity_tol = 1e-12;
    int rannacher = 2;
    double dt = 0.0;             // 0 selects min(0.25 dx, 0.01)
    bool store_fields = false;
    SampleSchedule schedule;
    std::vector<double> times;   // explicit sample instants from t0 (z solve only); empty uses the schedule
};

struct GapSample {
    double t = 0.0;
    double I = 0.0;
    double dI = 0.0;          // analytic right side
    double dI_fd = 0.0;       // finite difference of the I samples
    double drift_term = 0.0;  // 3/(2 lambda* (t+1)) int r psi'
    double error_term = 0.0;  // int E r psi
    double M = 0.0;           // (t+1)^{3/2} int e^{-lambda*(x+a)} r
    double r_min = 0.0;
    double r_max = 0.0;
};

struct GapSolution {
    double a = 0.0;
    double xbar0 = 0.0;
    Grid1D grid;
    double t0 = 0.0;
    std::vector<GapSample> samples;
    std::vector<std::vector<double>> fields;  // r at each sample when requested
    double T_final = 0.0;
    double I_final = 0.0;
    double tail_prob = 0.0;
    double flatness_residual = 0.0;  // |dI/dt| / I at T_final
    double worst_negativity = 0.0;   // max over samples of -r_min / r_max

    // I(t) = I_inf + b t^{-1/2} + c / t over the last decade, when T_final >= 20
    double I_extrapolated = 0.0;
    double tail_prob_extrapolated = 0.0;

    double psi_at_minus_a = 0.0;
};

/// Tail probability prefactor: P = e^{-lambda*(a + 2 xbar0)} I / (2 lambda*^2 sqrt(pi)).
double tail_from_moment(const Reaction& r, double a, double xbar0, double I);

/// Integrates r_t = r_xx - 3/(2 lambda*(t+1)) r_x - V r from the free solution
/// at t0. Throws NumericalError when r goes negative beyond tolerance or
/// when I is not flat at the stopping time; ConfigError when the potential,
/// adjoint and domain are incompatible.
GapSolution solve_gap(const Reaction& r, double a, const Potential& V, const AdjointProfile& adj,
                      const GapConfig& cfg);

struct FlatnessReport {
    double late_start = 0.0;             // max(a, 4 t*)
    double late_slope = 0.0;             // of log |dI/dt / I| against log t for t >= late_start
    std::size_t late_points = 0;
    bool nondecreasing_after_2tstar = true;
    double late_log_variation = 0.0;     // max_{t >= 2 t*} |log I(t) - log I(T_final)|
    double envelope_C = 0.0;             // smallest C with a|dI/I| <= C[(t-t*+1)^{-1/2} + e^{-(t-t*)^2/a}] on [t*, a]
};

FlatnessReport flatness_diagnostics(const GapSolution& gs, const FreeSolutionParams& fp);

struct ZMassSeries {
    double a = 0.0;
    std::vector<double> t;
    std::vector<double> M;
    double min_value = 0.0;  // smallest nodal value relative to the largest
    double M_extrapolated = 0.0;  // same tail model as I, when T_final >= 20
};

/// Moving-frame z solve w_t = w_yy + m'(t) w_y - (V - (N-1)) w started from
/// e^{-t0} G(t0, y + m(t0) + a); returns M(t) = int w dy at the sample times.
ZMassSeries solve_z_mass(const Reaction& r, double a, const Potential& V, const GapConfig& cfg);

/// Mass M at time t by linear interpolation in the series.
double interpolate_mass(const ZMassSeries& z, double t);

struct CorrectorReport {
    double a = 0.0;
    double t_star = 0.0;
    double t_e = 0.0;
    std::vector<double> t;
    std::vector<double> moment_p;   // int psi p
    std::vector<double> moment_qe;  // int psi q_e
    std::vector<double> moment_qm;  // int psi q_m
    std::vector<double> moment_r;   // I(t) from the r solve
    double crossover = 0.0;         // first t with int psi q >= int psi p
    bool crossover_in_band = false; // within [t* - 3 sqrt a, t* + 3 sqrt a]
    bool p_dominates_early = true;  // > 90% of I for t <= t* - 3 sqrt a
    bool q_dominates_late = true;   // > 90% of I for t >= t* + 3 sqrt a
    double q_min = 0.0;             // most negative q_e + q_m nodal value
    double q_min_relative = 0.0;    // relative to max q
    double max_moment_qe = 0.0;
    double max_moment_r = 0.0;
    double consistency = 0.0;       // max_t |p + q - r| moment mismatch relative to I
};

/// Solves the gated corrector equations for q_e and q_m next to the r solve
/// and reports how the moment is shared between p and q. Diagnostic only.
CorrectorReport corrector_diagnostics(const Reaction& r, const GapSolution& gs, const FreeSolutionParams& fp,
                                      const Potential& V, const AdjointProfile& adj, const GapConfig& cfg);

}  // namespace bbmgap
