#include "bbmgap/gap.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "bbmgap/errors.hpp"
#include "bbmgap/fit.hpp"
#include "bbmgap/parabolic.hpp"

namespace bbmgap {

FreeSolutionParams FreeSolutionParams::make(const Reaction& r, double a, std::optional<double> xi_e)
{
    if (!(a > 0.0)) throw std::invalid_argument("free solution needs a > 0");
    FreeSolutionParams fp;
    fp.a = a;
    fp.N = r.N();
    fp.lambda = r.lambda_star();
    fp.sqrtN = r.sqrt_N();
    fp.xi_e = xi_e.value_or(0.5 * (fp.xi_e_lower() + fp.xi_e_upper()));
    if (!(fp.xi_e > fp.xi_e_lower() && fp.xi_e < fp.xi_e_upper()))
        throw std::invalid_argument("xi_e = " + std::to_string(fp.xi_e) + " outside its admissible interval");
    return fp;
}

double FreeSolutionParams::Lambda(double t) const
{
    return std::exp(0.75 * a / (lambda * t) * std::log1p(t) - N * t - a * a / (4.0 * t)) /
           std::sqrt(4.0 * std::numbers::pi * t);
}

double FreeSolutionParams::g(double t, double x) const
{
    const double d = x - log_shift(t);
    return std::exp(-d * d / (4.0 * t));
}

double log_free_solution(double t, double x, const FreeSolutionParams& fp)
{
    if (!(t > 0.0)) throw std::invalid_argument("free solution needs t > 0");
    const double d = x + fp.a - fp.log_shift(t);
    return -0.5 * std::log(4.0 * std::numbers::pi * t) - fp.N * t - d * d / (4.0 * t);
}

double free_solution_factored(double t, double x, const FreeSolutionParams& fp)
{
    if (!(t > 0.0)) throw std::invalid_argument("free solution needs t > 0");
    return fp.Lambda(t) * std::exp(-fp.a * x / (2.0 * t)) * fp.g(t, x);
}

double free_solution(double t, double x, const FreeSolutionParams& fp)
{
    const double p = std::exp(log_free_solution(t, x, fp));
    const double q = free_solution_factored(t, x, fp);
    // the factored form loses everything once one of its factors under/overflows
    const bool comparable = p > 1e-280 && q > 1e-280 && std::isfinite(q);
    if (comparable && std::abs(p - q) > 1e-12 * p * (1.0 + std::abs(fp.a * x / (2.0 * t)) * 1e-3))
        throw NumericalError("closed and factored free solutions disagree at t = " + std::to_string(t));
    return p;
}

double tail_from_moment(const Reaction& r, double a, double xbar0, double I)
{
    const double lam = r.lambda_star();
    return std::exp(-lam * (a + 2.0 * xbar0)) * I / (2.0 * lam * lam * std::sqrt(std::numbers::pi));
}

namespace {

using Source = std::function<void(double, std::span<const double>, std::span<double>)>;

// u_t = u_xx + b(t) u_x - (V(t,x) - kappa) u + s(t,x), Dirichlet zero ends,
// Crank-Nicolson with a backward-Euler start. Steps grow geometrically from
// a fraction of t_start up to dt so the narrow initial Gaussian is resolved.
class LinearEvolution {
public:
    LinearEvolution(const Grid1D& g, const Potential& V, double fit_rate, double kappa, std::function<double(double)> drift,
                    double t_start, double dt, int rannacher)
        : V_(V), stepper_(g, fit_rate), kappa_(kappa), drift_(std::move(drift)), t_(t_start), dt_(dt),
          h_(std::min(dt, 0.1 * t_start)), rannacher_(rannacher), absorb_(g.n), src_(g.n)
    {
    }

    void set_source(Source s) { source_ = std::move(s); }

    double time() const { return t_; }

    void advance_to(double target, std::vector<double>& u)
    {
        while (target - t_ > 1e-12 * std::max(1.0, target)) {
            const double remaining = target - t_;
            double h = h_;
            if (remaining <= h * (1.0 + 1e-9))
                h = remaining;
            else if (remaining < 2.0 * h)
                h = 0.5 * remaining;
            step(u, h);
            h_ = std::min(dt_, growth * h_);
        }
        t_ = target;
    }

private:
    static constexpr double growth = 1.1;

    void step(std::vector<double>& u, double h)
    {
        const bool start = steps_ < rannacher_;
        const int sub = start ? 2 : 1;
        const double theta = start ? 1.0 : 0.5;
        const double hs = h / sub;
        for (int k = 0; k < sub; ++k) {
            const double tm = t_ + (k + 0.5) * hs;
            V_.fill(tm, absorb_);
            if (source_) source_(tm, absorb_, src_);
            for (double& c : absorb_) c -= kappa_;
            stepper_.step(u, hs, theta, drift_(tm), absorb_, source_ ? std::span<const double>(src_) : std::span<const double>{},
                          0.0, 0.0);
        }
        t_ += h;
        ++steps_;
    }

    const Potential& V_;
    ParabolicStepper stepper_;
    double kappa_;
    std::function<double(double)> drift_;
    double t_;
    double dt_;
    double h_;
    int rannacher_;
    long steps_ = 0;
    std::vector<double> absorb_, src_;
    Source source_;
};

double default_T_final(const FreeSolutionParams& fp) { return std::max(20.0 * fp.t_star(), 10.0 * fp.a); }

double step_for(const GapConfig& cfg, const Grid1D& g) { return cfg.dt > 0.0 ? cfg.dt : std::min(0.25 * g.dx, 0.01); }

// t0 followed by the schedule's instants after t0
std::vector<double> sample_times(const GapConfig& cfg, double T, double dt)
{
    std::vector<double> ts{cfg.t0};
    for (double t : cfg.schedule.times(0.0, T, dt))
        if (t > cfg.t0 + 1e-12 && t <= T + 1e-9) ts.push_back(t);
    return ts;
}

double interpolate_on(const Grid1D& g, std::span<const double> f, double x)
{
    const double s = (x - g.x_min) / g.dx;
    const auto i = static_cast<std::size_t>(std::clamp(std::floor(s), 0.0, static_cast<double>(g.n - 2)));
    const double th = s - static_cast<double>(i);
    return f[i] + th * (f[i + 1] - f[i]);
}

void check_domain(const Grid1D& g, const Potential& V, double a)
{
    if (!g.same_as(V.grid())) throw ConfigError("potential grid does not match the solver grid");
    if (g.x_min > -a - 50.0 + 1e-9)
        throw ConfigError("domain left edge " + std::to_string(g.x_min) + " does not reach -a-50 = " +
                          std::to_string(-a - 50.0) + "; raise the front's domain_a");
}

std::vector<double> free_profile(const Grid1D& g, double t, const FreeSolutionParams& fp)
{
    std::vector<double> p(g.n);
    for (std::size_t i = 0; i < g.n; ++i) p[i] = std::exp(log_free_solution(t, g.x(i), fp));
    return p;
}

// derivative at interior samples from the quadratic through three neighbours
void fill_fd_derivative(std::vector<GapSample>& s)
{
    for (std::size_t k = 1; k + 1 < s.size(); ++k) {
        const double t0 = s[k - 1].t, t1 = s[k].t, t2 = s[k + 1].t;
        const double h0 = t1 - t0, h1 = t2 - t1;
        s[k].dI_fd = (-h1 / (h0 * (h0 + h1))) * s[k - 1].I + ((h1 - h0) / (h0 * h1)) * s[k].I +
                     (h0 / (h1 * (h0 + h1))) * s[k + 1].I;
    }
    if (s.size() >= 2) {
        s.front().dI_fd = (s[1].I - s[0].I) / (s[1].t - s[0].t);
        s.back().dI_fd = (s[s.size() - 1].I - s[s.size() - 2].I) / (s[s.size() - 1].t - s[s.size() - 2].t);
    }
}

}  // namespace

GapSolution solve_gap(const Reaction& r, double a, const Potential& V, const AdjointProfile& adj, const GapConfig& cfg)
{
    if (!(a >= 0.5)) throw ConfigError("solve_gap needs a >= 0.5");
    const Grid1D& g = V.grid();
    check_domain(g, V, a);
    if (!g.same_as(adj.grid)) throw ConfigError("adjoint grid does not match the potential grid");
    const FreeSolutionParams fp = FreeSolutionParams::make(r, a);
    const double lam = r.lambda_star();
    const double T_final = cfg.T_final > 0.0 ? cfg.T_final : default_T_final(fp);
    const double T_max = cfg.T_max > 0.0 ? std::min(cfg.T_max, V.horizon()) : V.horizon();
    if (T_final > T_max + 1e-9)
        throw ConfigError("gap horizon " + std::to_string(T_final) + " exceeds the stored potential horizon " +
                          std::to_string(T_max));
    if (!(cfg.t0 > 0.0 && cfg.t0 < 0.5)) throw ConfigError("t0 must lie in (0, 0.5)");
    const double dt = step_for(cfg, g);

    GapSolution gs;
    gs.a = a;
    gs.xbar0 = adj.xbar0;
    gs.grid = g;
    gs.t0 = cfg.t0;
    gs.psi_at_minus_a = interpolate_on(g, adj.psi, -a);

    std::vector<double> u = free_profile(g, cfg.t0, fp);
    LinearEvolution ev(g, V, r.sqrt_N(), 0.0, [lam](double t) { return -1.5 / (lam * (t + 1.0)); }, cfg.t0, dt,
                       cfg.rannacher);

    std::vector<double> tilt(g.n), Vt(g.n), Er(g.n);
    for (std::size_t i = 0; i < g.n; ++i) tilt[i] = std::exp(-lam * (g.x(i) + a));

    for (double ts : sample_times(cfg, T_max, dt)) {
        ev.advance_to(ts, u);
        GapSample s;
        s.t = ts;
        s.I = trapezoid_product(adj.psi, u, g.dx);
        s.drift_term = 1.5 / (lam * (ts + 1.0)) * trapezoid_product(adj.psi_prime, u, g.dx);
        V.fill(ts, Vt);
        for (std::size_t i = 0; i < g.n; ++i) Er[i] = (adj.V_inf[i] - Vt[i]) * u[i];
        s.error_term = trapezoid_product(Er, adj.psi, g.dx);
        s.dI = s.drift_term + s.error_term;
        s.M = std::pow(ts + 1.0, 1.5) * trapezoid_product(tilt, u, g.dx);
        const auto [mn, mx] = std::minmax_element(u.begin(), u.end());
        s.r_min = *mn;
        s.r_max = *mx;
        gs.worst_negativity = std::max(gs.worst_negativity, -s.r_min / s.r_max);
        if (s.r_min < -cfg.positivity_tol * s.r_max)
            throw NumericalError("gap solution negative: min r = " + std::to_string(s.r_min) + " at t = " +
                                 std::to_string(ts) + " (max r = " + std::to_string(s.r_max) + ")");
        if (!(s.I > 0.0)) throw NumericalError("adjoint moment not positive at t = " + std::to_string(ts));
        gs.samples.push_back(s);
        if (cfg.store_fields) gs.fields.push_back(u);
        if (ts >= T_final - 1e-9) {
            const double flat = std::abs(s.dI / s.I);
            if (!cfg.extend_until_flat || flat <= cfg.flatness_tol) break;
        }
    }
    fill_fd_derivative(gs.samples);

    const GapSample& last = gs.samples.back();
    gs.T_final = last.t;
    gs.I_final = last.I;
    gs.flatness_residual = std::abs(last.dI / last.I);
    gs.tail_prob = tail_from_moment(r, a, adj.xbar0, gs.I_final);

    std::vector<double> ts, Is;
    for (const GapSample& s : gs.samples) {
        ts.push_back(s.t);
        Is.push_back(s.I);
    }
    if (gs.T_final >= 20.0) {
        gs.I_extrapolated = fit_inverse_sqrt_tail(ts, Is, 0.1 * gs.T_final).coef[0];
        gs.tail_prob_extrapolated = tail_from_moment(r, a, adj.xbar0, gs.I_extrapolated);
    }
    if (gs.flatness_residual > cfg.flatness_tol)
        throw NumericalError("adjoint moment not flat at T = " + std::to_string(gs.T_final) +
                             ": |dI/dt|/I = " + std::to_string(gs.flatness_residual) + "; run longer");
    return gs;
}

FlatnessReport flatness_diagnostics(const GapSolution& gs, const FreeSolutionParams& fp)
{
    FlatnessReport f;
    const double a = fp.a, ts = fp.t_star();
    f.late_start = std::max(a, 4.0 * ts);
    std::vector<double> lx, ly;
    const double logIT = std::log(gs.I_final);
    for (std::size_t k = 0; k < gs.samples.size(); ++k) {
        const GapSample& s = gs.samples[k];
        const double rel = std::abs(s.dI / s.I);
        if (s.t >= f.late_start && rel > 0.0) {
            lx.push_back(std::log(s.t));
            ly.push_back(std::log(rel));
        }
        if (s.t >= 2.0 * ts) {
            f.late_log_variation = std::max(f.late_log_variation, std::abs(std::log(s.I) - logIT));
            if (k > 0 && gs.samples[k - 1].t >= 2.0 * ts && s.I < gs.samples[k - 1].I) f.nondecreasing_after_2tstar = false;
        }
        if (s.t >= ts && s.t <= a) {
            const double d = s.t - ts;
            f.envelope_C = std::max(f.envelope_C, a * rel / (1.0 / std::sqrt(d + 1.0) + std::exp(-d * d / a)));
        }
    }
    f.late_points = lx.size();
    f.late_slope = lx.size() >= 3 ? fit_line(lx, ly).slope : std::numeric_limits<double>::quiet_NaN();
    return f;
}

ZMassSeries solve_z_mass(const Reaction& r, double a, const Potential& V, const GapConfig& cfg)
{
    if (!(a >= 0.5)) throw ConfigError("solve_z_mass needs a >= 0.5");
    const Grid1D& g = V.grid();
    check_domain(g, V, a);
    const FreeSolutionParams fp = FreeSolutionParams::make(r, a);
    const double lam = r.lambda_star();
    const double T_final =
        !cfg.times.empty() ? cfg.times.back() : (cfg.T_final > 0.0 ? cfg.T_final : default_T_final(fp));
    if (T_final > V.horizon() + 1e-9) throw ConfigError("z horizon exceeds the stored potential horizon");
    const double dt = step_for(cfg, g);

    std::vector<double> u(g.n);
    for (std::size_t i = 0; i < g.n; ++i)
        u[i] = std::exp(log_free_solution(cfg.t0, g.x(i), fp) + 1.5 * std::log1p(cfg.t0) - lam * (g.x(i) + a));
    u.front() = u.back() = 0.0;
    LinearEvolution ev(g, V, lam, r.N() - 1.0, [&r](double t) { return m_drift(t, r); }, cfg.t0, dt, cfg.rannacher);

    ZMassSeries z;
    z.a = a;
    std::vector<double> times = cfg.times.empty() ? sample_times(cfg, T_final, dt) : cfg.times;
    if (std::abs(times.front() - cfg.t0) > 1e-12 || !std::is_sorted(times.begin(), times.end()))
        throw ConfigError("explicit z sample times must be increasing and start at t0");
    for (double ts : times) {
        ev.advance_to(ts, u);
        z.t.push_back(ts);
        z.M.push_back(trapezoid(u, g.dx));
        const auto [mn, mx] = std::minmax_element(u.begin(), u.end());
        z.min_value = std::min(z.min_value, *mn / *mx);
    }
    if (z.t.back() >= 20.0) z.M_extrapolated = fit_inverse_sqrt_tail(z.t, z.M, 0.1 * z.t.back()).coef[0];
    return z;
}

double interpolate_mass(const ZMassSeries& z, double t)
{
    if (z.t.empty() || t < z.t.front() || t > z.t.back() + 1e-9) throw std::out_of_range("mass series does not cover t");
    auto it = std::lower_bound(z.t.begin(), z.t.end(), t - 1e-12);
    const std::size_t k = static_cast<std::size_t>(it - z.t.begin());
    if (k == 0) return z.M.front();
    if (k >= z.t.size()) return z.M.back();
    const double th = (t - z.t[k - 1]) / (z.t[k] - z.t[k - 1]);
    return z.M[k - 1] + th * (z.M[k] - z.M[k - 1]);
}

CorrectorReport corrector_diagnostics(const Reaction& r, const GapSolution& gs, const FreeSolutionParams& fp,
                                      const Potential& V, const AdjointProfile& adj, const GapConfig& cfg)
{
    const Grid1D& g = gs.grid;
    const double lam = r.lambda_star(), N = r.N();
    const double dt = step_for(cfg, g);
    CorrectorReport rep;
    rep.a = gs.a;
    rep.t_star = fp.t_star();
    rep.t_e = fp.t_e();

    auto drift = [lam](double t) { return -1.5 / (lam * (t + 1.0)); };
    auto gated = [&](bool early) {
        return [&, early](double t, std::span<const double> Vt, std::span<double> out) {
            const bool on = early ? t <= fp.t_e() : t > fp.t_e();
            if (!on) {
                std::fill(out.begin(), out.end(), 0.0);
                return;
            }
            for (std::size_t i = 0; i < g.n; ++i) out[i] = (N - Vt[i]) * std::exp(log_free_solution(t, g.x(i), fp));
        };
    };
    std::vector<double> qe(g.n, 0.0), qm(g.n, 0.0);
    LinearEvolution ev_e(g, V, r.sqrt_N(), 0.0, drift, gs.t0, dt, cfg.rannacher);
    LinearEvolution ev_m(g, V, r.sqrt_N(), 0.0, drift, gs.t0, dt, cfg.rannacher);
    ev_e.set_source(gated(true));
    ev_m.set_source(gated(false));

    rep.crossover = std::numeric_limits<double>::quiet_NaN();
    const double band = 3.0 * std::sqrt(gs.a);
    for (const GapSample& s : gs.samples) {
        ev_e.advance_to(s.t, qe);
        ev_m.advance_to(s.t, qm);
        const std::vector<double> p = free_profile(g, s.t, fp);
        const double mp = trapezoid_product(adj.psi, p, g.dx);
        const double me = trapezoid_product(adj.psi, qe, g.dx);
        const double mm = trapezoid_product(adj.psi, qm, g.dx);
        rep.t.push_back(s.t);
        rep.moment_p.push_back(mp);
        rep.moment_qe.push_back(me);
        rep.moment_qm.push_back(mm);
        rep.moment_r.push_back(s.I);
        double qmin = 0.0, qmax = 0.0;
        for (std::size_t i = 0; i < g.n; ++i) {
            const double q = qe[i] + qm[i];
            qmin = std::min(qmin, q);
            qmax = std::max(qmax, q);
        }
        rep.q_min = std::min(rep.q_min, qmin);
        if (qmax > 0.0) rep.q_min_relative = std::min(rep.q_min_relative, qmin / qmax);
        const double mq = me + mm;
        if (std::isnan(rep.crossover) && mq >= mp) rep.crossover = s.t;
        const double share_p = mp / (mp + mq);
        if (s.t <= rep.t_star - band && share_p <= 0.9) rep.p_dominates_early = false;
        if (s.t >= rep.t_star + band && share_p >= 0.1) rep.q_dominates_late = false;
        rep.max_moment_qe = std::max(rep.max_moment_qe, me);
        rep.max_moment_r = std::max(rep.max_moment_r, s.I);
        rep.consistency = std::max(rep.consistency, std::abs(mp + mq - s.I) / s.I);
    }
    rep.crossover_in_band =
        !std::isnan(rep.crossover) && rep.crossover >= rep.t_star - band && rep.crossover <= rep.t_star + band;
    (void)lam;
    return rep;
}

}  // namespace bbmgap
