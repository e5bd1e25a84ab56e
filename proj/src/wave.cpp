#include "bbmgap/wave.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include <boost/numeric/odeint.hpp>

namespace bbmgap {

namespace odeint = boost::numeric::odeint;

namespace {

using State = std::array<double, 2>;

// (1-U)'' = -c (1-U)' + f(U), written in v = 1-U.
struct ComplementSystem {
    const Reaction* r;
    void operator()(const State& s, State& d, double /*x*/) const
    {
        d[0] = s[1];
        d[1] = -r->c_star() * s[1] + r->f_of_complement(std::clamp(s[0], 0.0, 1.0));
    }
};

// W = U e^{lambda x} satisfies W'' = e^{lambda x} F(W e^{-lambda x}).
struct ScaledSystem {
    const Reaction* r;
    void operator()(const State& s, State& d, double x) const
    {
        const double lam = r->lambda_star();
        const double u = std::clamp(s[0] * std::exp(-lam * x), 0.0, 1.0);
        d[0] = s[1];
        d[1] = u > 0.0 ? std::exp(lam * x) * r->F(u) : 0.0;
    }
};

State to_scaled(const Reaction& r, double x, const State& comp)
{
    const double lam = r.lambda_star();
    const double U = 1.0 - comp[0], Up = -comp[1];
    const double e = std::exp(lam * x);
    return {U * e, (Up + lam * U) * e};
}

template <class System>
State rk4(const System& sys, State s, double x0, double x1, int substeps)
{
    const double h = (x1 - x0) / substeps;
    State k1, k2, k3, k4, tmp;
    double x = x0;
    for (int i = 0; i < substeps; ++i) {
        sys(s, k1, x);
        for (int j = 0; j < 2; ++j) tmp[j] = s[j] + 0.5 * h * k1[j];
        sys(tmp, k2, x + 0.5 * h);
        for (int j = 0; j < 2; ++j) tmp[j] = s[j] + 0.5 * h * k2[j];
        sys(tmp, k3, x + 0.5 * h);
        for (int j = 0; j < 2; ++j) tmp[j] = s[j] + h * k3[j];
        sys(tmp, k4, x + h);
        for (int j = 0; j < 2; ++j) s[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        x += h;
    }
    return s;
}

struct NodeState {
    bool complement;
    State s;
};

/// Shoots from the U=1 saddle at xi_seed (1-U = seed e^{gamma(xi-xi_seed)})
/// and reports the state at each requested abscissa (ascending).
std::vector<NodeState> shoot(const Reaction& r, const std::vector<double>& xs, double seed_level, double rtol)
{
    const double gam = r.gamma_star();
    const double xi_seed = std::log(seed_level) / gam;  // 1-U = e^{gamma xi}
    const double max_chunk = 0.05;
    std::vector<NodeState> out(xs.size());

    auto stepper = odeint::make_controlled(1e-300, rtol, odeint::runge_kutta_dopri5<State>());
    ComplementSystem comp{&r};
    ScaledSystem scaled{&r};

    bool in_complement = true;
    State s{seed_level, gam * seed_level};
    double x = xi_seed;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double target = xs[i];
        if (target <= xi_seed) {
            const double v = std::exp(gam * target);
            out[i] = {true, {v, gam * v}};
            continue;
        }
        // Advance in chunks so the switch to scaled variables happens near 1-U = 1/2
        // regardless of how sparse the requested abscissae are.
        while (x < target) {
            const double next = std::min(target, x + max_chunk);
            if (in_complement) {
                odeint::integrate_adaptive(stepper, comp, s, x, next, 1e-3);
                if (!(s[0] >= 0.0) || s[0] > 1.0 + 1e-9 || !(s[1] >= 0.0))
                    throw std::runtime_error("wave shooting diverged at x = " + std::to_string(next));
                if (s[0] >= 0.5) {
                    s = to_scaled(r, next, s);
                    in_complement = false;
                }
            } else {
                odeint::integrate_adaptive(stepper, scaled, s, x, next, 1e-3);
                if (!(s[0] >= 0.0) || !std::isfinite(s[1]) || s[0] * std::exp(-r.lambda_star() * next) > 1.0)
                    throw std::runtime_error("wave shooting diverged at x = " + std::to_string(next));
            }
            x = next;
        }
        out[i] = {in_complement, s};
    }
    return out;
}

LinearFit fit_right_tail(const std::vector<double>& xs, const std::vector<double>& W, Window win)
{
    std::vector<double> x, y;
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (xs[i] >= win.lo && xs[i] <= win.hi) {
            x.push_back(xs[i]);
            y.push_back(W[i]);
        }
    if (x.size() < 3) throw std::invalid_argument("right tail window holds fewer than three nodes");
    return fit_line(x, y);
}

}  // namespace

WaveSolverConfig default_wave_config(const Reaction& r, double dx)
{
    WaveSolverConfig cfg;
    cfg.dx = dx;
    cfg.x_max = 40.0 / r.lambda_star();
    cfg.x_min = -45.0 / r.gamma_star();
    return cfg;
}

WaveSolverConfig wave_config_covering(const Reaction& r, const Grid1D& g, double margin)
{
    WaveSolverConfig cfg = default_wave_config(r, g.dx);
    cfg.x_min = std::min(cfg.x_min, g.x_min - margin);
    cfg.x_max = std::max(cfg.x_max, g.x_max() + margin);
    return cfg;
}

WavePoint WaveProfile::point_from_state(double x, bool complement, double y1, double y2) const
{
    const Reaction& r = reaction_;
    const double lam = r.lambda_star(), c = r.c_star();
    WavePoint p;
    const double e = std::exp(lam * x);
    if (complement) {
        const double v = std::clamp(y1, 0.0, 1.0);
        const double vpp = -c * y2 + r.f_of_complement(v);
        p.V = v;
        p.U = 1.0 - v;
        p.Up = -y2;
        p.Upp = -vpp;
        p.W = p.U * e;
        p.psi0 = y2 * e;
        p.psi0_prime = (vpp + lam * y2) * e;
    } else {
        const double em = std::exp(-lam * x);
        const double u = std::clamp(y1 * em, 0.0, 1.0);
        const double wpp = u > 0.0 ? e * r.F(u) : 0.0;
        p.W = y1;
        p.U = u;
        p.V = 1.0 - u;
        p.Up = (y2 - lam * y1) * em;
        p.Upp = (wpp - 2.0 * lam * y2 + lam * lam * y1) * em;
        p.psi0 = lam * y1 - y2;
        p.psi0_prime = lam * y2 - wpp;
    }
    return p;
}

WavePoint WaveProfile::eval(double x) const
{
    if (!grid_.covers(x, x)) throw std::out_of_range("wave profile evaluated outside its grid at x = " + std::to_string(x));
    const std::size_t i = grid_.nearest(x);
    const double xi = grid_.x(i);
    const bool comp = complement_[i] != 0;
    State s{y1_[i], y2_[i]};
    if (x != xi) {
        const int sub = 4;
        s = comp ? rk4(ComplementSystem{&reaction_}, s, xi, x, sub) : rk4(ScaledSystem{&reaction_}, s, xi, x, sub);
    }
    return point_from_state(x, comp, s[0], s[1]);
}

double WaveProfile::ode_residual_sup() const
{
    const auto Upp = derivative6(Up_, grid_.dx);
    double sup = 0.0;
    for (std::size_t i = 3; i + 3 < grid_.n; ++i) {
        const double f = complement_[i] ? reaction_.f_of_complement(V_[i]) : reaction_.f(U_[i]);
        sup = std::max(sup, std::abs(Upp[i] + reaction_.c_star() * Up_[i] + f));
    }
    return sup;
}

WaveProfile solve_wave(const Reaction& r, const WaveSolverConfig& cfg)
{
    const double lam = r.lambda_star(), gam = r.gamma_star();
    if (cfg.x_max < 30.0 / lam - 1e-9)
        throw std::invalid_argument("wave grid: x_max must be at least 30/lambda*");
    if (cfg.x_min > -40.0 / gam + 1e-9)
        throw std::invalid_argument("wave grid: x_min must be at most -40/gamma*");
    if (lam * cfg.x_max > 600.0) throw std::invalid_argument("wave grid: x_max too large for double range");

    const Window right = cfg.right_window.value_or(Window{cfg.x_max - 10.0 / lam, cfg.x_max - 2.0 / lam});
    const Window left = cfg.left_window.value_or(Window{cfg.x_min + 2.0 / gam, cfg.x_min + 10.0 / gam});

    // Raw pass: only the right window matters, translation is unknown yet.
    std::vector<double> raw_x;
    for (double x = right.lo - 2.0 * cfg.dx; x <= right.hi + 2.0 * cfg.dx; x += cfg.dx) raw_x.push_back(x);
    const auto raw = shoot(r, raw_x, cfg.seed_level, cfg.rtol);
    std::vector<double> raw_W(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i].complement) throw std::runtime_error("wave: right window lies left of the front");
        raw_W[i] = raw[i].s[0];
    }
    const LinearFit raw_fit = fit_right_tail(raw_x, raw_W, right);
    if (!(raw_fit.slope > 0.0)) throw std::runtime_error("wave: nonpositive right-tail coefficient");
    // U(x) = U_raw(x + s) has W(x) = e^{-lambda s}(alpha (x+s) + beta); unit slope needs e^{lambda s} = alpha.
    const double shift = std::log(raw_fit.slope) / lam;

    WaveProfile w(r);
    w.grid_ = make_grid(cfg.x_min, cfg.x_max, cfg.dx);
    const Grid1D& g = w.grid_;
    std::vector<double> xi(g.n);
    for (std::size_t i = 0; i < g.n; ++i) xi[i] = g.x(i) + shift;
    const auto nodes = shoot(r, xi, cfg.seed_level, cfg.rtol);

    // Stored state is re-expressed in the translated coordinate x = xi - shift:
    // 1-U is unchanged pointwise, W picks up the factor e^{-lambda shift}.
    const double wscale = std::exp(-lam * shift);
    w.complement_.resize(g.n);
    w.y1_.resize(g.n);
    w.y2_.resize(g.n);
    w.U_.resize(g.n);
    w.V_.resize(g.n);
    w.Up_.resize(g.n);
    std::vector<double> W(g.n), logV(g.n);
    for (std::size_t i = 0; i < g.n; ++i) {
        const auto& ns = nodes[i];
        w.complement_[i] = ns.complement;
        w.y1_[i] = ns.complement ? ns.s[0] : ns.s[0] * wscale;
        w.y2_[i] = ns.complement ? ns.s[1] : ns.s[1] * wscale;
        const WavePoint p = w.point_from_state(g.x(i), ns.complement, w.y1_[i], w.y2_[i]);
        w.U_[i] = p.U;
        w.V_[i] = p.V;
        w.Up_[i] = p.Up;
        W[i] = p.W;
        logV[i] = std::log(p.V);
        if (!(p.V > 0.0) || !(p.W > 0.0) || !(p.Up < 0.0))
            throw std::runtime_error("wave profile lost monotonicity at x = " + std::to_string(g.x(i)));
    }

    w.applied_shift_ = shift;
    w.raw_alpha_ = raw_fit.slope;
    w.right_window_ = right;
    w.left_window_ = left;
    w.right_fit_ = fit_right_tail(g.nodes(), W, right);
    if (w.right_fit_.r_squared < 0.999) throw std::runtime_error("wave: right-tail fit R^2 below 0.999");

    std::vector<double> lx, ly, lshift;
    for (std::size_t i = 0; i < g.n; ++i)
        if (g.x(i) >= left.lo && g.x(i) <= left.hi) {
            lx.push_back(g.x(i));
            ly.push_back(logV[i]);
            lshift.push_back(logV[i] - gam * g.x(i));
        }
    if (lx.size() < 3) throw std::invalid_argument("left tail window holds fewer than three nodes");
    w.left_fit_ = fit_line(lx, ly);
    if (w.left_fit_.r_squared < 0.999) throw std::runtime_error("wave: left-tail fit R^2 below 0.999");
    double mean = 0.0;
    for (double v : lshift) mean += v;
    w.C_U_ = std::exp(mean / static_cast<double>(lshift.size()));
    return w;
}

double AdjointProfile::residual_sup() const
{
    const auto psipp = derivative6(psi_prime, grid.dx);
    double sup = 0.0;
    for (std::size_t i = 3; i + 3 < grid.n; ++i) sup = std::max(sup, std::abs(psipp[i] - V_inf[i] * psi[i]));
    return sup;
}

AdjointProfile build_adjoint(const WaveProfile& w, double xbar0, const Grid1D& grid)
{
    if (!w.grid().covers(grid.x_min - xbar0, grid.x_max() - xbar0))
        throw std::out_of_range("adjoint grid shifted by xbar0 leaves the wave's grid");
    const Reaction& r = w.reaction();
    const double scale = std::exp(r.lambda_star() * xbar0);
    AdjointProfile a;
    a.grid = grid;
    a.xbar0 = xbar0;
    a.psi.resize(grid.n);
    a.psi_prime.resize(grid.n);
    a.U0.resize(grid.n);
    a.V_inf.resize(grid.n);
    a.N_minus_V_inf.resize(grid.n);
    for (std::size_t i = 0; i < grid.n; ++i) {
        const WavePoint p = w.eval(grid.x(i) - xbar0);
        a.psi[i] = p.psi0 * scale;
        a.psi_prime[i] = p.psi0_prime * scale;
        a.U0[i] = p.U;
        if (p.U > 0.5) {
            a.N_minus_V_inf[i] = r.N_minus_F_prime_of_complement(p.V);
            a.V_inf[i] = r.N() - a.N_minus_V_inf[i];
        } else {
            a.V_inf[i] = r.F_prime(p.U);
            a.N_minus_V_inf[i] = r.N() - a.V_inf[i];
        }
    }
    return a;
}

AdjointProfile build_adjoint(const WaveProfile& w, double xbar0)
{
    const Grid1D& wg = w.grid();
    const auto pad = static_cast<std::size_t>(std::ceil(std::abs(xbar0) / wg.dx)) + 1;
    if (2 * pad + 7 > wg.n) throw std::out_of_range("xbar0 too large for the wave's grid");
    Grid1D g{wg.x_min + static_cast<double>(pad) * wg.dx, wg.dx, wg.n - 2 * pad};
    return build_adjoint(w, xbar0, g);
}

}  // namespace bbmgap
