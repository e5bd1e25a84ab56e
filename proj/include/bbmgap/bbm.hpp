#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "bbmgap/reaction.hpp"

namespace bbmgap {

struct Particle {
    double position = 0.0;
    double birth_time = 0.0;
};

struct BbmConfig {
    std::size_t population_cap = 1'000'000;
    bool branching = true;  // false leaves a single Brownian particle
};

using BbmRng = std::mt19937_64;

/// Generator for replicate `replicate` of a run seeded with `seed`; streams
/// depend only on the pair, so replicates can run on any worker.
BbmRng replicate_rng(std::uint64_t seed, std::uint64_t replicate);

/// Positions at t_end sorted descending. Motions have variance 2t, branching
/// is at rate 1, offspring counts follow the law. Throws ConfigError for
/// t_end outside (0, 15] and NumericalError when the population cap is hit.
std::vector<double> simulate_bbm(const OffspringLaw& law, double t_end, BbmRng& rng, const BbmConfig& cfg = {});
std::vector<double> simulate_bbm(const OffspringLaw& law, double t_end, std::uint64_t seed, const BbmConfig& cfg = {});

struct TopTwo {
    double x1 = 0.0;
    double x2 = 0.0;  // -infinity while the ancestor has not branched
    std::size_t population = 0;
    double first_branch = 0.0;  // +infinity when no branching before t_end

    double gap() const { return x1 - x2; }
};

/// Same simulation as simulate_bbm, keeping only the two rightmost positions.
TopTwo simulate_top_two(const OffspringLaw& law, double t_end, BbmRng& rng, const BbmConfig& cfg = {});

struct McEstimate {
    double value = 0.0;
    double stderr_ = 0.0;
    std::size_t replicates = 0;
    std::size_t hits = 0;
    double t_end = 0.0;
    double a = 0.0;
};

/// Fraction of replicates with x1(t_end) - x2(t_end) > a, one shared set of
/// replicates for every a in the list. Throws ConfigError for fewer than 1000
/// replicates.
std::vector<McEstimate> estimate_gap_tail_mc(const OffspringLaw& law, double t_end, std::span<const double> a_list,
                                             std::size_t replicates, std::uint64_t seed, int workers = 1,
                                             const BbmConfig& cfg = {});

McEstimate estimate_gap_tail_mc(const OffspringLaw& law, double t_end, double a, std::size_t replicates,
                                std::uint64_t seed, int workers = 1, const BbmConfig& cfg = {});

/// Per-replicate outcomes in replicate order.
std::vector<TopTwo> sample_top_two(const OffspringLaw& law, double t_end, std::size_t replicates, std::uint64_t seed,
                                   int workers = 1, const BbmConfig& cfg = {});

}  // namespace bbmgap
