#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "within.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "bbmgap/errors.hpp"
#include "bbmgap/fit.hpp"
#include "bbmgap/kpp.hpp"
#include "bbmgap/wave.hpp"

using namespace bbmgap;

namespace {

const Reaction& binary()
{
    static const Reaction r(OffspringLaw::binary());
    return r;
}

const WaveProfile& wave()
{
    static const WaveProfile w = solve_wave(binary(), default_wave_config(binary(), 0.05));
    return w;
}

PdeConfig config(double T, double domain_a = 0.0)
{
    PdeConfig c;
    c.T_final = T;
    c.domain_a = domain_a;
    return c;
}

const FrontSolution& front200()
{
    static const FrontSolution fs = solve_front(binary(), wave(), InitialData::heaviside(), config(200.0));
    return fs;
}

const FrontSolution& front1000()
{
    static const FrontSolution fs = solve_front(binary(), wave(), InitialData::heaviside(), config(1000.0));
    return fs;
}

std::size_t sample_index(const FrontSolution& fs, double t)
{
    std::size_t best = 0;
    for (std::size_t k = 0; k < fs.times.size(); ++k)
        if (std::abs(fs.times[k] - t) < std::abs(fs.times[best] - t)) best = k;
    return best;
}

}  // namespace

TEST_CASE("centering")
{
    CHECK(m_shift(0.0, binary()) == 0.0);
    const double e1 = std::exp(1.0) - 1.0;
    CHECK(within(m_shift(e1, binary()), 2.0 * e1 - 1.5, 1e-14));
    CHECK(within(m_shift(10.0, binary()), 20.0 - 1.5 * std::log(11.0), 1e-14));
    CHECK(within(m_shift(10.0, binary()), 16.403, 1e-4));
    CHECK(m_drift(0.0, binary()) == doctest::Approx(0.5));
}

TEST_CASE("initial data")
{
    const Grid1D g = make_grid(-10.0, 10.0, 0.05);
    const auto H = InitialData::heaviside().sample(g);
    CHECK(H[g.nearest(0.0)] == 0.5);
    CHECK(H.front() == 1.0);
    CHECK(H.back() == 0.0);
    const auto P = InitialData::perturbed(-0.2, 1.0).sample(g);
    CHECK(P[g.nearest(-1.1)] == 0.0);
    CHECK(P[g.nearest(-0.5)] == 1.0);
    CHECK_THROWS_AS(InitialData::perturbed(0.1, 1.0), std::invalid_argument);
}

TEST_CASE("y = 0 is the Heaviside run")
{
    const PdeConfig c = config(5.0, 2.0);
    const FrontSolution a = solve_front(binary(), wave(), InitialData::heaviside(), c);
    const FrontSolution b = solve_front(binary(), wave(), InitialData::perturbed(0.0, 2.0), c);
    double diff = 0.0;
    for (std::size_t k = 0; k < a.H.size(); ++k)
        for (std::size_t i = 0; i < a.H[k].size(); ++i) diff = std::max(diff, std::abs(a.H[k][i] - b.H[k][i]));
    CHECK(diff <= 1e-12);
}

TEST_CASE("convergence to the wave")
{
    const FrontSolution& fs = front200();
    const std::size_t k = sample_index(fs, 50.0);
    CHECK(std::abs(fs.times[k] - 50.0) < 1.0);
    CHECK(fs.sup_error[k] < 0.01);
    CHECK(fs.max_overshoot <= 1e-6);
}

TEST_CASE("field invariants")
{
    const FrontSolution& fs = front200();
    for (const auto& H : fs.H)
        for (std::size_t i = 0; i < H.size(); ++i) {
            REQUIRE(H[i] >= -Reaction::clamp_tolerance);
            REQUIRE(H[i] <= 1.0 + Reaction::clamp_tolerance);
            if (i > 0) REQUIRE(H[i] <= H[i - 1] + 1e-12);
        }
}

TEST_CASE("shift series")
{
    const FrontSolution& fs = front1000();
    // s(t) overshoots below xbar0 until t ~ 40, then rises towards it; the
    // increments over doublings peak near t = 150
    for (std::size_t k = 1; k < fs.times.size(); ++k)
        if (fs.times[k - 1] >= 50.0) REQUIRE(fs.shift_series[k] >= fs.shift_series[k - 1]);
    auto s_at = [&](double t) { return fs.shift_series[sample_index(fs, t)]; };
    double prev = 1e300;
    for (double t : {200.0, 400.0}) {
        const double d = s_at(2 * t) - s_at(t);
        CHECK(d > 0.0);
        CHECK(d < prev);
        prev = d;
    }
}

TEST_CASE("Bramson shift regression value")
{
    const ShiftEstimate est = estimate_bramson_shift(front200());
    // frozen from this configuration; dx = 0.025 agrees to 2e-4
    CHECK(within(est.xbar0, -0.6126166, 1e-6));
    CHECK(est.error_bar > 0.0);
    CHECK(est.r_squared > 0.99);

    const FrontSolution longer = solve_front(binary(), wave(), InitialData::heaviside(), config(400.0));
    CHECK(std::abs(longer.xbar0 - est.xbar0) < est.error_bar);
}

TEST_CASE("shift fit of the wave itself")
{
    const Grid1D g = make_grid(-30.0, 30.0, 0.05);
    std::vector<double> H(g.n);
    for (std::size_t i = 0; i < g.n; ++i) H[i] = wave().eval(g.x(i)).U;
    CHECK(std::abs(fit_front_shift(H, g, wave(), 0.7, 5.0)) < 1e-6);
    for (std::size_t i = 0; i < g.n; ++i) H[i] = wave().eval(g.x(i) - 0.3).U;
    CHECK(within(fit_front_shift(H, g, wave(), 0.0, 5.0), 0.3, 1e-6));
}

TEST_CASE("short runs are not extrapolated")
{
    const FrontSolution fs = solve_front(binary(), wave(), InitialData::heaviside(), config(20.0));
    CHECK_THROWS_AS(estimate_bramson_shift(fs), std::invalid_argument);
}

TEST_CASE("comparison principle for perturbed data")
{
    const PdeConfig c = config(20.0, 1.5);
    FrontStepper lo(binary(), c, InitialData::perturbed(-0.2, 1.0));
    FrontStepper hi(binary(), c, InitialData::perturbed(-0.1, 1.0));
    double worst = 0.0;
    while (lo.time() < 20.0 - 1e-9) {
        lo.step();
        hi.step();
        for (std::size_t i = 0; i < lo.field().size(); ++i) worst = std::max(worst, lo.field()[i] - hi.field()[i]);
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("lab and moving frames agree at small times")
{
    PdeConfig c = config(2.0);
    const FrontSolution mv = solve_front(binary(), wave(), InitialData::heaviside(), c);
    c.frame = Frame::lab;
    const FrontSolution lab = solve_front(binary(), wave(), InitialData::heaviside(), c);
    REQUIRE(mv.times.size() == lab.times.size());
    const Grid1D& g = mv.grid;
    double worst = 0.0;
    for (std::size_t k = 0; k < mv.times.size(); ++k) {
        const double m = m_shift(mv.times[k], binary());
        for (std::size_t i = 0; i < g.n; ++i) {
            const double x = g.x(i) + m;
            if (x > lab.grid.x_max()) break;
            const double q = (x - lab.grid.x_min) / lab.grid.dx;
            const auto j = static_cast<std::size_t>(q);
            const double w = q - static_cast<double>(j);
            const double u = (1 - w) * lab.H[k][j] + w * lab.H[k][j + 1];
            worst = std::max(worst, std::abs(u - mv.H[k][i]));
        }
    }
    CHECK(worst < 10.0 * g.dx * g.dx);
}

TEST_CASE("potential")
{
    const FrontSolution& fs = front1000();
    const WaveProfile wide = solve_wave(binary(), wave_config_covering(binary(), fs.grid, 5.0));
    const AdjointProfile adj = build_adjoint(wide, fs.xbar0, fs.grid);
    const StoredPotential V = build_potential(fs, binary(), adj);
    const PotentialDiagnostics& d = V.diagnostics();
    CHECK(d.V_min >= 0.0);
    CHECK(d.V_max <= 2.0);
    CHECK(d.right_edge_max < 1e-6);
    CHECK(d.left_edge_min_gap < 1e-6);
    CHECK(d.within_bounds);

    // sup|E| follows |s(t) - xbar0|, which grows while s(t) undershoots (t < 40)
    std::vector<double> lt, ls;
    for (std::size_t k = 0; k < V.times().size(); ++k)
        if (V.times()[k] >= 200.0) {
            lt.push_back(std::log(V.times()[k]));
            ls.push_back(std::log(V.sup_E()[k]));
        }
    const double slope = fit_line(lt, ls).slope;
    MESSAGE("sup|E| log-log slope on [200, 1000]: " << slope);
    CHECK(slope >= -0.65);
    CHECK(slope <= -0.35);

    std::vector<double> v(fs.grid.n);
    V.fill(0.5 * (V.times()[40] + V.times()[41]), v);
    const auto& a = V.sample(40);
    const auto& b = V.sample(41);
    for (std::size_t i = 0; i < v.size(); i += 97) CHECK(within(v[i], 0.5 * (a[i] + b[i]), 1e-12));

    const AdjointProfile other = build_adjoint(wide, fs.xbar0, make_grid(-40.0, 20.0, 0.05));
    CHECK_THROWS_AS(build_potential(fs, binary(), other), std::invalid_argument);
}

TEST_CASE("shift derivative")
{
    const double ys[] = {-0.05, -0.1, -0.2};
    const ShiftDerivative d = shift_derivative_check(binary(), wave(), 1.0, ys, config(200.0), 1);
    REQUIRE(d.slopes.size() == 3);
    MESSAGE("slopes " << d.slopes[0] << " " << d.slopes[1] << " " << d.slopes[2] << " estimate " << d.estimate);
    CHECK(std::abs(d.slopes[0] / d.slopes[1] - 1.0) < 0.05);
    CHECK(within(d.s0, front200().xbar0, 1e-3));
    CHECK(d.estimate > 0.0);
    const double bad[] = {0.1};
    CHECK_THROWS_AS(shift_derivative_check(binary(), wave(), 1.0, bad, config(200.0), 1), ConfigError);
}
