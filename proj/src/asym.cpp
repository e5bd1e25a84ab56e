#include "bbmgap/asym.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include "json.hpp"

#include "bbmgap/fit.hpp"

namespace bbmgap {

ExponentMode parse_exponent_mode(const std::string& s)
{
    if (s == "derivation") return ExponentMode::derivation;
    if (s == "theorem") return ExponentMode::theorem;
    throw std::invalid_argument("exponent_mode must be 'derivation' or 'theorem', got '" + s + "'");
}

std::string to_string(ExponentMode m) { return m == ExponentMode::derivation ? "derivation" : "theorem"; }

Constants Constants::make(const Reaction& r, double C_U, double xbar0, ExponentMode mode)
{
    Constants c;
    c.N = r.N();
    c.lambda_star = r.lambda_star();
    c.gamma_star = r.gamma_star();
    c.C_U = C_U;
    c.xbar0 = xbar0;
    c.exponent_mode = mode;
    if (!std::isfinite(C_U) || !(C_U > 0.0)) throw std::invalid_argument("C_U must be finite and positive");
    if (!std::isfinite(xbar0)) throw std::invalid_argument("xbar0 must be finite");
    return c;
}

double Constants::sqrt_N() const { return std::sqrt(N); }

double Constants::exponent_for(ExponentMode m) const
{
    return m == ExponentMode::derivation ? 1.5 * sqrt_N() / lambda_star : 1.5 * sqrt_N();
}

double theorem1_prediction(double a, const Constants& c) { return theorem1_prediction(a, c, c.exponent_mode); }

double theorem1_prediction(double a, const Constants& c, ExponentMode mode)
{
    if (!(a > 0.0)) throw std::invalid_argument("theorem1_prediction needs a > 0");
    const double pre = c.C_U * c.gamma_star / (2.0 * c.lambda_star * c.lambda_star * std::sqrt(std::numbers::pi));
    return pre * std::exp(c.exponent_for(mode) * std::log(a / (2.0 * c.sqrt_N())) - c.rate() * (a + c.xbar0));
}

FittedRate fit_exponential_rate(const std::vector<double>& a, const std::vector<double>& P)
{
    if (a.size() != P.size() || a.size() < 2) throw std::invalid_argument("rate fit needs two or more points");
    std::vector<double> y(P.size());
    for (std::size_t i = 0; i < P.size(); ++i) {
        if (!(P[i] > 0.0)) throw std::invalid_argument("rate fit needs positive probabilities");
        y[i] = std::log(P[i]);
    }
    const LinearFit f = fit_line(a, y);
    return {-f.slope, f.slope_stderr, a.size()};
}

FittedRate fit_prefactor_exponent(const std::vector<double>& a, const std::vector<double>& P, const Constants& c,
                                  const std::vector<double>& weights)
{
    if (a.size() != P.size() || a.size() < 2) throw std::invalid_argument("exponent fit needs two or more points");
    std::vector<double> x(a.size()), y(a.size()), w;
    for (std::size_t i = 0; i < a.size(); ++i) {
        x[i] = std::log(a[i]);
        y[i] = std::log(P[i]) + c.rate() * a[i];
    }
    if (!weights.empty()) {
        if (weights.size() != a.size()) throw std::invalid_argument("weight count differs from point count");
        for (double r : weights) w.push_back(1.0 / std::max(r, 1e-300));
    }
    const LinearFit f = fit_line(x, y, w);
    return {f.slope, f.slope_stderr, a.size()};
}

namespace {

bool same_a(double x, double y) { return std::abs(x - y) <= 1e-9 * std::max(1.0, std::abs(x)); }

}  // namespace

Report compare_report(const std::vector<PdeTailRow>& pde, const std::vector<McTailRow>& mc, const Constants& c)
{
    if (pde.empty() && mc.empty()) throw std::invalid_argument("compare_report needs PDE or MC results");
    if (!pde.empty() && !mc.empty()) {
        bool match = pde.size() == mc.size();
        for (std::size_t i = 0; match && i < pde.size(); ++i) match = same_a(pde[i].a, mc[i].a);
        if (!match) throw std::invalid_argument("PDE and MC results use different a grids");
    }
    Report rep;
    rep.constants = c;
    const ExponentMode other =
        c.exponent_mode == ExponentMode::derivation ? ExponentMode::theorem : ExponentMode::derivation;
    rep.exponent_modes_differ = c.exponent_for(ExponentMode::derivation) != c.exponent_for(ExponentMode::theorem);
    const std::size_t n = std::max(pde.size(), mc.size());
    std::vector<double> as, ps, pes, flat, ms, ts;
    for (std::size_t i = 0; i < n; ++i) {
        ReportRow row;
        row.a = pde.empty() ? mc[i].a : pde[i].a;
        row.theorem = theorem1_prediction(row.a, c);
        row.theorem_alt = theorem1_prediction(row.a, c, other);
        if (!pde.empty()) {
            row.pde = pde[i].tail_prob;
            row.pde_extrapolated = pde[i].tail_prob_extrapolated;
            row.pde_over_theorem = pde[i].tail_prob / row.theorem;
            ps.push_back(pde[i].tail_prob);
            pes.push_back(pde[i].tail_prob_extrapolated);
            flat.push_back(pde[i].flatness_residual);
        }
        if (!mc.empty()) {
            row.mc = mc[i].value;
            row.mc_stderr = mc[i].stderr_;
            if (row.pde) row.mc_over_pde = mc[i].value / *row.pde;
            ms.push_back(mc[i].value);
        }
        as.push_back(row.a);
        ts.push_back(row.theorem);
        rep.rows.push_back(row);
    }
    if (as.size() >= 2) {
        rep.theorem_rate = fit_exponential_rate(as, ts);
        if (!ps.empty()) {
            rep.pde_rate = fit_exponential_rate(as, ps);
            if (std::all_of(pes.begin(), pes.end(), [](double v) { return v > 0.0; }))
                rep.pde_rate_extrapolated = fit_exponential_rate(as, pes);
            rep.pde_prefactor_exponent = fit_prefactor_exponent(as, ps, c, flat);
        }
        if (!ms.empty() && std::all_of(ms.begin(), ms.end(), [](double v) { return v > 0.0; }))
            rep.mc_rate = fit_exponential_rate(as, ms);
    }
    return rep;
}

namespace {

std::string cell(const std::optional<double>& v) { return v ? fmt::format("{:.10e}", *v) : std::string{}; }

nlohmann::json jcell(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

nlohmann::json jrate(const std::optional<FittedRate>& r)
{
    if (!r) return nullptr;
    return {{"value", r->value}, {"stderr", r->stderr_}, {"points", r->points}};
}

}  // namespace

std::string report_csv(const Report& r)
{
    std::ostringstream os;
    const Constants& c = r.constants;
    os << "# bbmgap report v1\n";
    os << fmt::format("# N={:.10g} lambda_star={:.10g} gamma_star={:.10g} C_U={:.10g} xbar0={:.10g} exponent_mode={}\n",
                      c.N, c.lambda_star, c.gamma_star, c.C_U, c.xbar0, to_string(c.exponent_mode));
    if (r.exponent_modes_differ)
        os << fmt::format("# exponent modes differ for N != 2: derivation {:.6f}, theorem {:.6f}\n",
                          c.exponent_for(ExponentMode::derivation), c.exponent_for(ExponentMode::theorem));
    os << "a,pde_tail,pde_tail_extrapolated,mc_tail,mc_stderr,theorem,theorem_other_mode,pde_over_theorem,mc_over_pde\n";
    for (const ReportRow& row : r.rows)
        os << fmt::format("{:.6g},{},{},{},{},{:.10e},{},{},{}\n", row.a, cell(row.pde), cell(row.pde_extrapolated),
                          cell(row.mc), cell(row.mc_stderr), row.theorem,
                          r.exponent_modes_differ ? fmt::format("{:.10e}", row.theorem_alt) : std::string{},
                          cell(row.pde_over_theorem), cell(row.mc_over_pde));
    return os.str();
}

std::string report_json(const Report& r)
{
    const Constants& c = r.constants;
    nlohmann::json j;
    j["schema"] = "bbmgap-report/1";
    j["constants"] = {{"N", c.N},         {"lambda_star", c.lambda_star}, {"gamma_star", c.gamma_star},
                      {"C_U", c.C_U},     {"xbar0", c.xbar0},             {"exponent_mode", to_string(c.exponent_mode)},
                      {"exponent", c.exponent()}};
    if (r.exponent_modes_differ)
        j["exponent_modes"] = {{"derivation", c.exponent_for(ExponentMode::derivation)},
                               {"theorem", c.exponent_for(ExponentMode::theorem)}};
    nlohmann::json rows = nlohmann::json::array();
    for (const ReportRow& row : r.rows)
        rows.push_back({{"a", row.a},
                        {"pde_tail", jcell(row.pde)},
                        {"pde_tail_extrapolated", jcell(row.pde_extrapolated)},
                        {"mc_tail", jcell(row.mc)},
                        {"mc_stderr", jcell(row.mc_stderr)},
                        {"theorem", row.theorem},
                        {"theorem_other_mode", r.exponent_modes_differ ? nlohmann::json(row.theorem_alt) : nlohmann::json(nullptr)},
                        {"pde_over_theorem", jcell(row.pde_over_theorem)},
                        {"mc_over_pde", jcell(row.mc_over_pde)}});
    j["rows"] = rows;
    j["fits"] = {{"pde_rate", jrate(r.pde_rate)},
                 {"pde_rate_extrapolated", jrate(r.pde_rate_extrapolated)},
                 {"mc_rate", jrate(r.mc_rate)},
                 {"theorem_rate", jrate(r.theorem_rate)},
                 {"pde_prefactor_exponent", jrate(r.pde_prefactor_exponent)}};
    return j.dump(2) + "\n";
}

}  // namespace bbmgap
