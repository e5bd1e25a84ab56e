#include "bbmgap/reaction.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace bbmgap {

namespace {

constexpr double series_cutoff = 0.05;

double binomial(int n, int k)
{
    double c = 1.0;
    for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
    return c;
}

}  // namespace

void OffspringLaw::validate() const
{
    if (probs.empty()) throw std::invalid_argument("offspring law is empty");
    double total = 0.0;
    for (const auto& [k, p] : probs) {
        if (k < 2) throw std::invalid_argument("offspring count k=" + std::to_string(k) + " < 2");
        if (!(p >= 0.0) || p > 1.0)
            throw std::invalid_argument("offspring probability outside [0,1] for k=" + std::to_string(k));
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw std::invalid_argument("offspring probabilities sum to " + std::to_string(total) + ", not 1");
    if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0,1)");
}

Reaction::Reaction(OffspringLaw law) : law_(std::move(law))
{
    law_.validate();
    int kmax = 0;
    for (const auto& [k, p] : law_.probs) {
        N_ += k * p;
        kmax = std::max(kmax, k);
    }
    if (!(N_ > 1.0)) throw std::invalid_argument("mean offspring N must exceed 1");
    lambda_star_ = std::sqrt(N_ - 1.0);
    c_star_ = 2.0 * lambda_star_;
    sqrt_N_ = std::sqrt(N_);
    gamma_star_ = sqrt_N_ - lambda_star_;

    coef_.assign(kmax + 1, 0.0);
    for (int j = 2; j <= kmax; ++j) {
        double c = 0.0;
        for (const auto& [k, p] : law_.probs)
            if (k >= j) c += p * binomial(k, j);
        coef_[j] = (j % 2 == 0) ? c : -c;
    }
}

double Reaction::clamp_checked(double u) const
{
    if (std::isnan(u)) throw std::domain_error("nonlinearity evaluated at NaN");
    if (u < 0.0) {
        if (u < -clamp_tolerance) throw std::domain_error("u = " + std::to_string(u) + " below [0,1]");
        return 0.0;
    }
    if (u > 1.0) {
        if (u > 1.0 + clamp_tolerance) throw std::domain_error("u = " + std::to_string(u) + " above [0,1]");
        return 1.0;
    }
    return u;
}

double Reaction::F_series(double u) const
{
    double acc = 0.0;
    for (std::size_t j = coef_.size() - 1; j >= 2; --j) acc = acc * u + coef_[j];
    return acc * u * u;
}

double Reaction::F_prime_series(double u) const
{
    double acc = 0.0;
    for (std::size_t j = coef_.size() - 1; j >= 2; --j) acc = acc * u + j * coef_[j];
    return acc * u;
}

double Reaction::F_prime_unchecked(double u) const
{
    if (u < series_cutoff) return F_prime_series(u);
    return N_ - N_minus_F_prime_of_complement(1.0 - u);
}

double Reaction::f_unchecked(double u) const
{
    if (u <= 0.5) {
        const double F = u < series_cutoff ? F_series(u) : [&] {
            double s = 0.0;
            for (const auto& [k, p] : law_.probs) s += p * (std::pow(1.0 - u, k) - 1.0 + k * u);
            return s;
        }();
        return (N_ - 1.0) * u - F;
    }
    return f_of_complement(1.0 - u);
}

double Reaction::f(double u) const { return f_unchecked(clamp_checked(u)); }

double Reaction::f_prime(double u) const { return N_ - 1.0 - F_prime(u); }

double Reaction::F(double u) const
{
    u = clamp_checked(u);
    if (u < series_cutoff) return F_series(u);
    return (N_ - 1.0) * u - f_unchecked(u);
}

double Reaction::F_prime(double u) const { return F_prime_unchecked(clamp_checked(u)); }

double Reaction::eval(double u, Nonlinearity which) const
{
    switch (which) {
        case Nonlinearity::f: return f(u);
        case Nonlinearity::f_prime: return f_prime(u);
        case Nonlinearity::F: return F(u);
        case Nonlinearity::F_prime: return F_prime(u);
    }
    throw std::logic_error("unknown nonlinearity selector");
}

double Reaction::f_of_complement(double v) const
{
    double s = 0.0;
    for (const auto& [k, p] : law_.probs) s += p * std::pow(v, k);
    return v - s;
}

double Reaction::N_minus_F_prime_of_complement(double v) const
{
    double s = 0.0;
    for (const auto& [k, p] : law_.probs) s += k * p * std::pow(v, k - 1);
    return s;
}

Reaction build_reaction(const OffspringLaw& law) { return Reaction(law); }

}  // namespace bbmgap
