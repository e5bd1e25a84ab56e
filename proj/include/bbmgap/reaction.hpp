#pragma once

#include <utility>
#include <vector>

namespace bbmgap {

/// Offspring distribution of the branching mechanism. Only finite laws with
/// k >= 2 are supported.
struct OffspringLaw {
    std::vector<std::pair<int, double>> probs;  // (k, p_k)
    double beta = 0.5;                          // Hoelder exponent, reporting only

    static OffspringLaw binary() { return {{{2, 1.0}}, 0.5}; }

    /// Throws std::invalid_argument when the law is empty, has k < 2, negative
    /// probabilities, or does not sum to one within 1e-12.
    void validate() const;

    bool operator==(const OffspringLaw&) const = default;
};

enum class Nonlinearity { f, f_prime, F, F_prime };

/// KPP reaction f(u) = 1 - u - sum_k p_k (1-u)^k induced by an offspring law,
/// together with its nonlinear part F(u) = (N-1)u - f(u).
///
/// Small arguments are evaluated through a power series in u with no constant
/// or linear term, arguments near one through the complement v = 1 - u, so
/// both tails keep full relative precision.
class Reaction {
public:
    explicit Reaction(OffspringLaw law);

    const OffspringLaw& law() const { return law_; }
    double N() const { return N_; }
    double c_star() const { return c_star_; }
    double lambda_star() const { return lambda_star_; }
    double gamma_star() const { return gamma_star_; }
    double sqrt_N() const { return sqrt_N_; }

    // Values slightly outside [0,1] (<= 1e-9) are clamped; larger excursions
    // and NaN throw std::domain_error.
    double f(double u) const;
    double f_prime(double u) const;
    double F(double u) const;
    double F_prime(double u) const;
    double eval(double u, Nonlinearity which) const;

    // Complement forms, v = 1 - u with v in [0,1].
    double f_of_complement(double v) const;        // f(1-v)
    double N_minus_F_prime_of_complement(double v) const;  // N - F'(1-v)

    // Unchecked kernels for solver inner loops; u must already lie in [0,1].
    double F_prime_unchecked(double u) const;
    double f_unchecked(double u) const;

    static constexpr double clamp_tolerance = 1e-9;

private:
    double clamp_checked(double u) const;
    double F_series(double u) const;
    double F_prime_series(double u) const;

    OffspringLaw law_;
    double N_ = 0, c_star_ = 0, lambda_star_ = 0, gamma_star_ = 0, sqrt_N_ = 0;
    // F(u) = sum_{j>=2} coef_[j] u^j
    std::vector<double> coef_;
};

Reaction build_reaction(const OffspringLaw& law);

}  // namespace bbmgap
