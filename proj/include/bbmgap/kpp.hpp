#pragma once

#include <span>
#include <vector>

#include "bbmgap/grid.hpp"
#include "bbmgap/parabolic.hpp"
#include "bbmgap/reaction.hpp"
#include "bbmgap/wave.hpp"

namespace bbmgap {

/// Bramson centering m(t) = c* t - 3/(2 lambda*) log(t+1).
double m_shift(double t, const Reaction& r);
/// Frame drift m'(t) = c* - 3/(2 lambda* (t+1)).
double m_drift(double t, const Reaction& r);

/// 1_{(-inf,0]} - 1_{(y-a,-a]} with y <= 0; y = 0 is the Heaviside datum.
struct InitialData {
    double y = 0.0;
    double a = 0.0;

    static InitialData heaviside() { return {}; }
    static InitialData perturbed(double y, double a);

    /// Cell averages over [x_i - dx/2, x_i + dx/2]; a jump on a node gives 1/2.
    std::vector<double> sample(const Grid1D& g) const;
};

enum class Frame { moving, lab };

/// Stored sample instants: dense_dt up to dense_until, mid_dt up to
/// mid_until, then geometric with the given ratio; snapped to the time-step
/// lattice t_start + k dt.
struct SampleSchedule {
    double dense_until = 2.0;
    double dense_dt = 0.02;
    double mid_until = 10.0;
    double mid_dt = 0.1;
    double geometric_ratio = 1.02;

    std::vector<double> times(double t_start, double T, double dt) const;
};

struct PdeConfig {
    double dx = 0.05;
    double dt = 0.0;       // 0 selects min(0.25 dx, 0.01)
    double L_left = 0.0;   // 0 selects domain_a + 50
    double L_right = 0.0;  // 0 selects 8 sqrt(T_final + 1) + 20
    double domain_a = 0.0;
    double T_final = 200.0;
    int rannacher = 2;
    Frame frame = Frame::moving;
    SampleSchedule schedule;

    double clamp_monitor = 1e-6;
    double shift_halfwidth = 5.0;
    double error_halfwidth = 20.0;

    double time_step() const;
    double left_extent() const;
    double right_extent() const;
    Grid1D grid() const;
    std::vector<double> sample_times() const;
};

/// Explicit stepping of the KPP equation; used directly by tests that need
/// lockstep access and by solve_front.
class FrontStepper {
public:
    FrontStepper(const Reaction& r, const PdeConfig& cfg, const InitialData& init);

    void step();
    double time() const { return t_; }
    long steps_taken() const { return step_; }
    std::span<const double> field() const { return u_; }
    double max_overshoot() const { return max_overshoot_; }
    const Grid1D& grid() const { return stepper_.grid(); }
    double dt() const { return plan_.dt; }

private:
    void react(double h);

    const Reaction* r_;
    Frame frame_;
    TimeStepPlan plan_;
    ParabolicStepper stepper_;
    std::vector<double> u_;
    double t_ = 0.0;
    long step_ = 0;
    double clamp_monitor_;
    double max_overshoot_ = 0.0;
};

struct FrontSolution {
    Grid1D grid;
    Frame frame = Frame::moving;
    InitialData init;
    double dt = 0.0;
    std::vector<double> times;
    std::vector<std::vector<double>> H;     // H(t, x + m(t)) at each sample
    std::vector<double> shift_series;       // s(t)
    std::vector<double> sup_error;          // sup_{|x|<=error_halfwidth} |H - U(x - s)|
    double max_overshoot = 0.0;
    double xbar0 = 0.0;                     // filled when T_final >= 100
    double xbar0_error = 0.0;

    double T_final() const { return times.empty() ? 0.0 : times.back(); }
};

/// Least-squares shift s minimizing sum_{|x|<=halfwidth} (H(x) - U(x-s))^2.
/// Throws NumericalError when Gauss-Newton does not converge.
double fit_front_shift(std::span<const double> H, const Grid1D& g, const WaveProfile& w, double guess,
                       double halfwidth);

FrontSolution solve_front(const Reaction& r, const WaveProfile& w, const InitialData& init, const PdeConfig& cfg);

struct ShiftEstimate {
    double xbar0 = 0.0;
    double error_bar = 0.0;
    double rate_coefficient = 0.0;  // c in s(t) = xbar0 + c t^{-1/2} + d / t
    double next_coefficient = 0.0;  // d
    double r_squared = 0.0;
    std::size_t points = 0;
    double late_window_xbar0 = 0.0;  // same fit over [T/sqrt(10), T]
};

/// Extrapolates s(t) = xbar0 + c t^{-1/2} + d/t over the last decade of
/// samples. The error bar is twice the change of xbar0 when the window is cut
/// to the last half decade, plus the largest fit residual.
ShiftEstimate estimate_bramson_shift(const FrontSolution& fs);

/// Potential V(t, x) = F'(H(t, x + m(t))) supplied to the linear solvers.
class Potential {
public:
    virtual ~Potential() = default;
    virtual const Grid1D& grid() const = 0;
    virtual double horizon() const = 0;
    virtual void fill(double t, std::span<double> V) const = 0;
};

class ConstantPotential final : public Potential {
public:
    ConstantPotential(Grid1D g, double value, double horizon) : grid_(g), value_(value), horizon_(horizon) {}
    const Grid1D& grid() const override { return grid_; }
    double horizon() const override { return horizon_; }
    void fill(double, std::span<double> V) const override;

private:
    Grid1D grid_;
    double value_;
    double horizon_;
};

struct PotentialDiagnostics {
    double V_min = 0.0;
    double V_max = 0.0;
    double B_left = 0.0;    // sup (N - V) e^{-gamma* x}
    double B_right = 0.0;   // sup V e^{c x}
    double c_right = 0.0;
    double right_edge_max = 0.0;  // max_t>=1 V at the right boundary node
    double left_edge_min_gap = 0.0;  // max_t>=1 (N - V) at the left boundary node
    bool within_bounds = true;
};

/// Piecewise-linear interpolation in t between stored front samples.
class StoredPotential final : public Potential {
public:
    const Grid1D& grid() const override { return grid_; }
    double horizon() const override { return times_.back(); }
    void fill(double t, std::span<double> V) const override;

    /// E(t, x) = V(inf, x) - V(t, x) at sample k.
    void fill_E(std::size_t k, std::span<double> E) const;

    const std::vector<double>& times() const { return times_; }
    const std::vector<double>& V_inf() const { return V_inf_; }
    const std::vector<double>& sup_E() const { return sup_E_; }
    const PotentialDiagnostics& diagnostics() const { return diag_; }
    const std::vector<double>& sample(std::size_t k) const { return V_[k]; }

private:
    friend StoredPotential build_potential(const FrontSolution&, const Reaction&, const AdjointProfile&);
    Grid1D grid_;
    std::vector<double> times_;
    std::vector<std::vector<double>> V_;
    std::vector<double> V_inf_;
    std::vector<double> sup_E_;
    PotentialDiagnostics diag_;
};

/// Throws std::invalid_argument on grid mismatch.
StoredPotential build_potential(const FrontSolution& fs, const Reaction& r, const AdjointProfile& adj);

struct ShiftDerivative {
    double a = 0.0;
    double s0 = 0.0;
    std::vector<double> y;
    std::vector<double> s_y;
    std::vector<double> slopes;     // (s(y,a) - s(0,a)) / y
    double estimate = 0.0;          // Richardson extrapolation of the two smallest |y|
};

/// Finite-difference estimate of d s(y, a) / dy at y = 0. Each perturbed
/// front runs as an independent job. Throws NumericalError when the slope
/// sequence is not monotone in |y|.
ShiftDerivative shift_derivative_check(const Reaction& r, const WaveProfile& w, double a,
                                       std::span<const double> y_steps, const PdeConfig& cfg, int workers = 1);

}  // namespace bbmgap
