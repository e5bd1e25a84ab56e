#pragma once

#include <optional>
#include <vector>

#include "bbmgap/fit.hpp"
#include "bbmgap/grid.hpp"
#include "bbmgap/reaction.hpp"

namespace bbmgap {

struct Window {
    double lo = 0.0;
    double hi = 0.0;
};

struct WaveSolverConfig {
    double x_min = 0.0;
    double x_max = 0.0;
    double dx = 0.05;
    double rtol = 1e-10;
    double seed_level = 1e-22;  // 1-U at the shooting seed
    std::optional<Window> right_window;  // default [x_max-10/lambda, x_max-2/lambda]
    std::optional<Window> left_window;   // default [x_min+2/gamma, x_min+10/gamma]
};

/// Grid bounds x_max = 40/lambda*, x_min = -45/gamma*.
WaveSolverConfig default_wave_config(const Reaction& r, double dx = 0.05);

/// Default config widened so that [g.x_min - margin, g.x_max + margin] is covered.
WaveSolverConfig wave_config_covering(const Reaction& r, const Grid1D& g, double margin);

/// Everything the profile knows at one abscissa.
struct WavePoint {
    double U = 0.0;
    double V = 0.0;      // 1 - U, accurate in the left tail
    double Up = 0.0;     // U'
    double Upp = 0.0;    // U'' from the ODE
    double W = 0.0;      // U e^{lambda x}
    double psi0 = 0.0;   // -U' e^{lambda x}
    double psi0_prime = 0.0;
};

/// Critical traveling wave -c* U' = U'' + f(U), normalized so that
/// U(x) e^{lambda* x} = x + beta + o(1) as x -> +infinity.
///
/// Nodes store the integrator state: (1-U, (1-U)') while U > 1/2 and the
/// scaled pair (U e^{lambda x}, (U e^{lambda x})') afterwards. Off-node values
/// are produced by a short RK4 integration from the nearest node.
class WaveProfile {
public:
    const Grid1D& grid() const { return grid_; }
    const Reaction& reaction() const { return reaction_; }

    const std::vector<double>& U() const { return U_; }
    const std::vector<double>& V() const { return V_; }
    const std::vector<double>& U_prime() const { return Up_; }

    double C_U() const { return C_U_; }
    double applied_shift() const { return applied_shift_; }
    double raw_alpha() const { return raw_alpha_; }
    const LinearFit& right_tail_fit() const { return right_fit_; }  // W ~ slope x + intercept
    const LinearFit& left_tail_fit() const { return left_fit_; }    // log(1-U) ~ slope x + intercept
    Window right_window() const { return right_window_; }
    Window left_window() const { return left_window_; }

    /// Throws std::out_of_range outside the grid.
    WavePoint eval(double x) const;

    /// sup over interior nodes of |U'' + c* U' + f(U)| with U'' from a
    /// sixth-order difference of the stored U'.
    double ode_residual_sup() const;

private:
    friend WaveProfile solve_wave(const Reaction&, const WaveSolverConfig&);
    explicit WaveProfile(Reaction r) : reaction_(std::move(r)) {}

    WavePoint point_from_state(double x, bool complement, double y1, double y2) const;

    Reaction reaction_;
    Grid1D grid_;
    std::vector<unsigned char> complement_;
    std::vector<double> y1_, y2_;
    std::vector<double> U_, V_, Up_;
    double C_U_ = 0.0;
    double applied_shift_ = 0.0;
    double raw_alpha_ = 0.0;
    LinearFit right_fit_, left_fit_;
    Window right_window_{}, left_window_{};
};

WaveProfile solve_wave(const Reaction& r, const WaveSolverConfig& cfg);

/// psi(x) = -U'(x - xbar0) e^{lambda* x}, the positive steady state of the
/// tilted linearized operator, sampled on a grid.
struct AdjointProfile {
    Grid1D grid;
    double xbar0 = 0.0;
    std::vector<double> psi;
    std::vector<double> psi_prime;
    std::vector<double> U0;            // U(x - xbar0)
    std::vector<double> V_inf;         // F'(U0)
    std::vector<double> N_minus_V_inf; // N - F'(U0), accurate on the left

    /// sup over interior nodes of |psi'' - F'(U0) psi|, psi'' from a
    /// sixth-order difference of psi'.
    double residual_sup() const;
};

/// Throws std::out_of_range when x - xbar0 leaves the wave's grid for some
/// node of `grid`.
AdjointProfile build_adjoint(const WaveProfile& w, double xbar0, const Grid1D& grid);

/// Same on the largest sub-grid of the wave's own grid that stays covered.
AdjointProfile build_adjoint(const WaveProfile& w, double xbar0);

}  // namespace bbmgap
