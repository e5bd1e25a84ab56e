#include "bbmgap/kpp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "bbmgap/errors.hpp"
#include "bbmgap/fit.hpp"
#include "bbmgap/work_pool.hpp"

namespace bbmgap {

double m_shift(double t, const Reaction& r)
{
    return r.c_star() * t - 1.5 / r.lambda_star() * std::log1p(t);
}

double m_drift(double t, const Reaction& r) { return r.c_star() - 1.5 / (r.lambda_star() * (t + 1.0)); }

InitialData InitialData::perturbed(double y, double a)
{
    if (!(y <= 0.0)) throw std::invalid_argument("perturbed data needs y <= 0");
    if (!(a > 0.0)) throw std::invalid_argument("perturbed data needs a > 0");
    return {y, a};
}

std::vector<double> InitialData::sample(const Grid1D& g) const
{
    // length of [lo, hi] inside (p, q]
    auto overlap = [](double lo, double hi, double p, double q) { return std::max(0.0, std::min(hi, q) - std::max(lo, p)); };
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(g.n);
    for (std::size_t i = 0; i < g.n; ++i) {
        const double lo = g.x(i) - 0.5 * g.dx, hi = g.x(i) + 0.5 * g.dx;
        double m = overlap(lo, hi, -inf, 0.0);
        if (y < 0.0) m -= overlap(lo, hi, y - a, -a);
        u[i] = std::clamp(m / g.dx, 0.0, 1.0);
    }
    return u;
}

double PdeConfig::time_step() const
{
    if (dt > 0.0) return dt;
    return std::min(0.25 * dx, 0.01);
}

double PdeConfig::left_extent() const { return L_left > 0.0 ? L_left : domain_a + 50.0; }

double PdeConfig::right_extent() const { return L_right > 0.0 ? L_right : 8.0 * std::sqrt(T_final + 1.0) + 20.0; }

Grid1D PdeConfig::grid() const
{
    if (!(dx > 0.0)) throw ConfigError("dx must be positive");
    // Node 0 sits on a multiple of dx so x = 0 and x = -a land on nodes.
    const double left = std::ceil(left_extent() / dx - 1e-9) * dx;
    return make_grid(-left, right_extent(), dx);
}

std::vector<double> SampleSchedule::times(double t_start, double T, double dt) const
{
    if (!(T > t_start)) throw ConfigError("sample horizon must exceed the start time");
    if (!(dense_dt > 0.0 && mid_dt > 0.0 && geometric_ratio > 1.0)) throw ConfigError("invalid sample schedule");
    std::vector<double> raw{t_start};
    double t = t_start;
    while (t < T) {
        if (t < dense_until - 1e-12)
            t = std::min(t + dense_dt, dense_until);
        else if (t < mid_until - 1e-12)
            t = std::min(t + mid_dt, mid_until);
        else
            t *= geometric_ratio;
        raw.push_back(std::min(t, T));
    }
    std::vector<double> out;
    for (double s : raw) {
        const double snapped = t_start + std::round((s - t_start) / dt) * dt;
        if (out.empty() || snapped > out.back() + 0.5 * dt) out.push_back(snapped);
    }
    return out;
}

std::vector<double> PdeConfig::sample_times() const
{
    if (!(T_final > 0.0)) throw ConfigError("T_final must be positive");
    return schedule.times(0.0, T_final, time_step());
}

FrontStepper::FrontStepper(const Reaction& r, const PdeConfig& cfg, const InitialData& init)
    : r_(&r),
      frame_(cfg.frame),
      plan_{cfg.time_step(), cfg.rannacher},
      stepper_(cfg.grid(), r.lambda_star()),
      u_(init.sample(stepper_.grid())),
      clamp_monitor_(cfg.clamp_monitor)
{
    u_.front() = 1.0;
    u_.back() = 0.0;
}

void FrontStepper::react(double h)
{
    // Integrating-factor Heun for u' = L u - F(u): exact on the linear
    // leading edge, so the pulled tail grows at the continuum rate.
    const double L = r_->N() - 1.0;
    const double E = std::exp(L * h);
    for (std::size_t i = 1; i + 1 < u_.size(); ++i) {
        const double u0 = u_[i];
        const double k1 = -r_->F(u0);
        const double u1 = std::clamp(E * (u0 + h * k1), 0.0, 1.0);
        const double k2 = -r_->F(u1);
        u_[i] = std::clamp(E * (u0 + 0.5 * h * k1) + 0.5 * h * k2, 0.0, 1.0);
    }
}

void FrontStepper::step()
{
    const int sub = plan_.substeps(step_);
    const double theta = plan_.theta(step_);
    const double h = plan_.dt / sub;
    // The transport step damps the critical mode e^{-lambda* x} by R(-L h)
    // instead of e^{-L h}; stretching the reaction time by kappa restores the
    // exact per-step growth of that mode (kappa = 1 + O(h^2)).
    const double z = -(r_->N() - 1.0) * h;
    const double R = (1.0 + (1.0 - theta) * z) / (1.0 - theta * z);
    const double kappa = -std::log(R) / (-z);
    for (int k = 0; k < sub; ++k) {
        const double t0 = static_cast<double>(step_) * plan_.dt + k * h;
        const double drift = frame_ == Frame::moving ? m_drift(t0 + 0.5 * h, *r_) : 0.0;
        react(0.5 * kappa * h);
        stepper_.step(u_, h, theta, drift, {}, {}, 1.0, 0.0);
        double worst = 0.0;
        for (double& v : u_) {
            const double c = std::clamp(v, 0.0, 1.0);
            worst = std::max(worst, std::abs(v - c));
            v = c;
        }
        max_overshoot_ = std::max(max_overshoot_, worst);
        if (worst > clamp_monitor_)
            throw NumericalError("front solver left [0,1] by " + std::to_string(worst) + " at t = " +
                                 std::to_string(t0 + h) + "; reduce dt or dx");
        react(0.5 * kappa * h);
    }
    ++step_;
    t_ = static_cast<double>(step_) * plan_.dt;
}

double fit_front_shift(std::span<const double> H, const Grid1D& g, const WaveProfile& w, double guess,
                       double halfwidth)
{
    const std::size_t lo = g.nearest(-halfwidth), hi = g.nearest(halfwidth);
    double s = guess;
    for (int it = 0; it < 60; ++it) {
        double num = 0.0, den = 0.0;
        for (std::size_t i = lo; i <= hi; ++i) {
            const WavePoint p = w.eval(g.x(i) - s);
            const double res = H[i] - p.U;
            num += res * p.Up;
            den += p.Up * p.Up;
        }
        if (!(den > 0.0)) break;
        double delta = -num / den;
        delta = std::clamp(delta, -1.0, 1.0);
        s += delta;
        if (std::abs(delta) < 1e-12 * std::max(1.0, std::abs(s))) return s;
    }
    throw NumericalError("front shift fit did not converge (last s = " + std::to_string(s) + ")");
}

FrontSolution solve_front(const Reaction& r, const WaveProfile& w, const InitialData& init, const PdeConfig& cfg)
{
    if (init.y > 0.0) throw ConfigError("perturbed data needs y <= 0");
    FrontStepper stepper(r, cfg, init);
    FrontSolution fs;
    fs.grid = stepper.grid();
    fs.frame = cfg.frame;
    fs.init = init;
    fs.dt = stepper.dt();
    fs.times = cfg.sample_times();

    const Grid1D& g = fs.grid;
    const std::size_t e_lo = g.nearest(-cfg.error_halfwidth), e_hi = g.nearest(cfg.error_halfwidth);
    double guess = 0.0;
    for (double ts : fs.times) {
        const long target = std::lround(ts / fs.dt);
        while (stepper.steps_taken() < target) stepper.step();
        auto field = stepper.field();
        fs.H.emplace_back(field.begin(), field.end());
        if (cfg.frame != Frame::moving) continue;
        const double s = fit_front_shift(field, g, w, guess, cfg.shift_halfwidth);
        guess = s;
        double sup = 0.0;
        for (std::size_t i = e_lo; i <= e_hi; ++i) sup = std::max(sup, std::abs(field[i] - w.eval(g.x(i) - s).U));
        fs.shift_series.push_back(s);
        fs.sup_error.push_back(sup);
    }
    fs.max_overshoot = stepper.max_overshoot();
    if (cfg.frame == Frame::moving && fs.T_final() >= 100.0) {
        // left NaN when the extrapolation is rejected; estimate_bramson_shift reports why
        fs.xbar0 = fs.xbar0_error = std::numeric_limits<double>::quiet_NaN();
        try {
            const ShiftEstimate est = estimate_bramson_shift(fs);
            fs.xbar0 = est.xbar0;
            fs.xbar0_error = est.error_bar;
        } catch (const NumericalError&) {
        }
    }
    return fs;
}

namespace {

ShiftEstimate extrapolate_series(const std::vector<double>& times, const std::vector<double>& s)
{
    const double T = times.back();
    if (T < 100.0) throw std::invalid_argument("shift extrapolation needs T_final >= 100, got " + std::to_string(T));
    const ModelFit fit = fit_inverse_sqrt_tail(times, s, 0.1 * T);
    const ModelFit late = fit_inverse_sqrt_tail(times, s, T / std::sqrt(10.0));
    ShiftEstimate est;
    est.xbar0 = fit.coef[0];
    est.rate_coefficient = fit.coef[1];
    est.next_coefficient = fit.coef[2];
    est.r_squared = fit.r_squared;
    est.points = static_cast<std::size_t>(std::count_if(times.begin(), times.end(), [&](double t) { return t >= 0.1 * T - 1e-9; }));
    est.late_window_xbar0 = late.coef[0];
    est.error_bar = std::max(2.0 * std::abs(fit.coef[0] - late.coef[0]), fit.stderr_[0]) + fit.max_abs_residual;
    if (fit.r_squared < 0.99)
        throw NumericalError("extrapolation of the front shift has R^2 = " + std::to_string(fit.r_squared));
    return est;
}

}  // namespace

ShiftEstimate estimate_bramson_shift(const FrontSolution& fs)
{
    if (fs.shift_series.size() != fs.times.size() || fs.times.empty())
        throw std::invalid_argument("front solution carries no shift series");
    return extrapolate_series(fs.times, fs.shift_series);
}

void ConstantPotential::fill(double, std::span<double> V) const { std::fill(V.begin(), V.end(), value_); }

void StoredPotential::fill(double t, std::span<double> V) const
{
    if (V.size() != grid_.n) throw std::invalid_argument("potential buffer does not match grid");
    if (t < times_.front() || t > times_.back() + 1e-9)
        throw std::out_of_range("potential requested at t = " + std::to_string(t) + " beyond stored horizon " +
                                std::to_string(times_.back()));
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    if (it == times_.end()) {
        std::copy(V_.back().begin(), V_.back().end(), V.begin());
        return;
    }
    const std::size_t k1 = static_cast<std::size_t>(it - times_.begin()), k0 = k1 - 1;
    const double th = (t - times_[k0]) / (times_[k1] - times_[k0]);
    const auto& a = V_[k0];
    const auto& b = V_[k1];
    for (std::size_t i = 0; i < V.size(); ++i) V[i] = a[i] + th * (b[i] - a[i]);
}

void StoredPotential::fill_E(std::size_t k, std::span<double> E) const
{
    for (std::size_t i = 0; i < E.size(); ++i) E[i] = V_inf_[i] - V_[k][i];
}

StoredPotential build_potential(const FrontSolution& fs, const Reaction& r, const AdjointProfile& adj)
{
    if (!fs.grid.same_as(adj.grid)) throw std::invalid_argument("front and adjoint grids differ");
    if (fs.frame != Frame::moving) throw std::invalid_argument("potential needs a moving-frame front");
    const Grid1D& g = fs.grid;
    const double N = r.N(), gamma = r.gamma_star();
    StoredPotential P;
    P.grid_ = g;
    P.times_ = fs.times;
    P.V_inf_ = adj.V_inf;
    PotentialDiagnostics& d = P.diag_;
    d.c_right = 0.5 * r.lambda_star();
    d.V_min = std::numeric_limits<double>::infinity();
    d.V_max = -d.V_min;

    P.V_.reserve(fs.H.size());
    for (std::size_t k = 0; k < fs.H.size(); ++k) {
        const auto& H = fs.H[k];
        std::vector<double> V(g.n);
        double supE = 0.0;
        for (std::size_t i = 0; i < g.n; ++i) {
            const double u = std::clamp(H[i], 0.0, 1.0);
            V[i] = r.F_prime_unchecked(u);
            const double gap = r.N_minus_F_prime_of_complement(1.0 - u);
            d.V_min = std::min(d.V_min, V[i]);
            d.V_max = std::max(d.V_max, V[i]);
            const double x = g.x(i);
            if (x <= 0.0)
                d.B_left = std::max(d.B_left, gap * std::exp(-gamma * x));
            else
                d.B_right = std::max(d.B_right, V[i] * std::exp(d.c_right * x));
            supE = std::max(supE, std::abs(P.V_inf_[i] - V[i]));
        }
        if (fs.times[k] >= 1.0) {
            d.right_edge_max = std::max(d.right_edge_max, V[g.n - 2]);
            d.left_edge_min_gap = std::max(d.left_edge_min_gap, N - V[1]);
        }
        P.sup_E_.push_back(supE);
        P.V_.push_back(std::move(V));
    }
    d.within_bounds = d.V_min >= 0.0 && d.V_max <= N && std::isfinite(d.B_left) && std::isfinite(d.B_right) &&
                      d.right_edge_max < 1e-6 && d.left_edge_min_gap < 1e-6;
    return P;
}

ShiftDerivative shift_derivative_check(const Reaction& r, const WaveProfile& w, double a,
                                       std::span<const double> y_steps, const PdeConfig& cfg, int workers)
{
    if (!(a > 0.0)) throw ConfigError("shift derivative needs a > 0");
    if (y_steps.empty()) throw ConfigError("shift derivative needs at least one y step");
    double ymax = 0.0;
    for (double y : y_steps) {
        if (!(y < 0.0)) throw ConfigError("shift derivative steps must be negative");
        ymax = std::max(ymax, -y);
    }
    PdeConfig c = cfg;
    c.domain_a = std::max(c.domain_a, a + ymax);

    std::vector<FrontSolution> runs(y_steps.size() + 1);
    parallel_for(runs.size(), workers, [&](std::size_t j) {
        const InitialData init = j == 0 ? InitialData::heaviside() : InitialData::perturbed(y_steps[j - 1], a);
        runs[j] = solve_front(r, w, init, c);
    });

    // The difference s(t; y, a) - s(t; 0, a) is extrapolated rather than the two
    // limits separately, so the common discretization error cancels.
    ShiftDerivative out;
    out.a = a;
    out.s0 = runs[0].xbar0;
    for (std::size_t j = 1; j < runs.size(); ++j) {
        std::vector<double> diff(runs[0].times.size());
        for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = runs[j].shift_series[k] - runs[0].shift_series[k];
        const ShiftEstimate est = extrapolate_series(runs[0].times, diff);
        out.y.push_back(y_steps[j - 1]);
        out.s_y.push_back(out.s0 + est.xbar0);
        out.slopes.push_back(est.xbar0 / y_steps[j - 1]);
    }

    std::vector<std::size_t> order(out.y.size());
    for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
    std::sort(order.begin(), order.end(), [&](auto p, auto q) { return out.y[p] > out.y[q]; });
    if (order.size() >= 3) {
        const double d0 = out.slopes[order[1]] - out.slopes[order[0]];
        for (std::size_t j = 2; j < order.size(); ++j)
            if ((out.slopes[order[j]] - out.slopes[order[j - 1]]) * d0 < 0.0)
                throw NumericalError("shift-derivative slopes are not monotone in |y|");
    }
    if (order.size() >= 2) {
        const double y1 = out.y[order[0]], y2 = out.y[order[1]];
        const double s1 = out.slopes[order[0]], s2 = out.slopes[order[1]];
        out.estimate = (y2 * s1 - y1 * s2) / (y2 - y1);
    } else {
        out.estimate = out.slopes[0];
    }
    return out;
}

}  // namespace bbmgap
