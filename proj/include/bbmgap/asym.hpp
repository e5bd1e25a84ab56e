#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bbmgap/reaction.hpp"

namespace bbmgap {

/// Power of the algebraic prefactor (a / (2 sqrt N))^pow: the proof's
/// 3 sqrt(N) / (2 lambda*) or the theorem statement's 3 sqrt(N) / 2.
enum class ExponentMode { derivation, theorem };

ExponentMode parse_exponent_mode(const std::string& s);
std::string to_string(ExponentMode m);

struct Constants {
    double N = 0.0;
    double lambda_star = 0.0;
    double gamma_star = 0.0;
    double C_U = 0.0;
    double xbar0 = 0.0;
    ExponentMode exponent_mode = ExponentMode::derivation;

    /// Throws std::invalid_argument unless all fields are finite and C_U > 0.
    static Constants make(const Reaction& r, double C_U, double xbar0, ExponentMode mode = ExponentMode::derivation);

    double sqrt_N() const;
    double rate() const { return sqrt_N() + lambda_star; }
    double exponent() const { return exponent_for(exponent_mode); }
    double exponent_for(ExponentMode m) const;
};

/// (C_U gamma* / (2 lambda*^2 sqrt(pi))) (a / (2 sqrt N))^pow e^{-(sqrt N + lambda*)(a + xbar0)}
double theorem1_prediction(double a, const Constants& c);
double theorem1_prediction(double a, const Constants& c, ExponentMode mode);

struct PdeTailRow {
    double a = 0.0;
    double tail_prob = 0.0;
    double tail_prob_extrapolated = 0.0;
    double I_final = 0.0;
    double crossover = 0.0;
    double flatness_residual = 0.0;
    double T_final = 0.0;
};

struct McTailRow {
    double a = 0.0;
    double value = 0.0;
    double stderr_ = 0.0;
    std::size_t replicates = 0;
    double t_end = 0.0;
};

struct ReportRow {
    double a = 0.0;
    std::optional<double> pde, pde_extrapolated, mc, mc_stderr;
    double theorem = 0.0;
    double theorem_alt = 0.0;  // the other exponent mode
    std::optional<double> pde_over_theorem, mc_over_pde;
};

struct FittedRate {
    double value = 0.0;
    double stderr_ = 0.0;
    std::size_t points = 0;
};

struct Report {
    Constants constants;
    std::vector<ReportRow> rows;
    std::optional<FittedRate> pde_rate, pde_rate_extrapolated, mc_rate, theorem_rate;
    std::optional<FittedRate> pde_prefactor_exponent;
    bool exponent_modes_differ = false;
};

/// -d log P / da from least squares of log P on a.
FittedRate fit_exponential_rate(const std::vector<double>& a, const std::vector<double>& P);

/// Slope of log P + (sqrt N + lambda*) a against log a, weighted by
/// 1 / flatness residual when weights are given.
FittedRate fit_prefactor_exponent(const std::vector<double>& a, const std::vector<double>& P, const Constants& c,
                                  const std::vector<double>& weights = {});

/// Joins the pipelines on a. Either input may be empty but not both; throws
/// std::invalid_argument when both are given and their a grids differ.
Report compare_report(const std::vector<PdeTailRow>& pde, const std::vector<McTailRow>& mc, const Constants& c);

std::string report_csv(const Report& r);
std::string report_json(const Report& r);

}  // namespace bbmgap
