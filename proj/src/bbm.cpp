#include "bbmgap/bbm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "bbmgap/errors.hpp"
#include "bbmgap/work_pool.hpp"

namespace bbmgap {

BbmRng replicate_rng(std::uint64_t seed, std::uint64_t replicate)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replicate), static_cast<std::uint32_t>(replicate >> 32)};
    return BbmRng(seq);
}

namespace {

// Depth-first over the genealogy: each particle draws its exponential
// lifetime at birth and either survives to t_end or splits.
template <class Visit>
void run_genealogy(const OffspringLaw& law, double t_end, BbmRng& rng, const BbmConfig& cfg, Visit&& visit,
                   double& first_branch)
{
    if (!(t_end > 0.0 && t_end <= 15.0)) throw ConfigError("t_end must lie in (0, 15], got " + std::to_string(t_end));
    law.validate();
    std::vector<int> ks;
    std::vector<double> ps;
    for (const auto& [k, p] : law.probs) {
        ks.push_back(k);
        ps.push_back(p);
    }
    std::discrete_distribution<std::size_t> pick(ps.begin(), ps.end());
    std::exponential_distribution<double> clock(1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    first_branch = std::numeric_limits<double>::infinity();
    std::vector<Particle> stack{{0.0, 0.0}};
    std::size_t finished = 0;
    while (!stack.empty()) {
        const Particle p = stack.back();
        stack.pop_back();
        const double life = cfg.branching ? clock(rng) : std::numeric_limits<double>::infinity();
        if (p.birth_time + life >= t_end) {
            visit(p.position + std::sqrt(2.0 * (t_end - p.birth_time)) * gauss(rng));
            ++finished;
            continue;
        }
        const double t = p.birth_time + life;
        first_branch = std::min(first_branch, t);
        const double x = p.position + std::sqrt(2.0 * life) * gauss(rng);
        const int k = ks[pick(rng)];
        for (int j = 0; j < k; ++j) stack.push_back({x, t});
        if (finished + stack.size() > cfg.population_cap)
            throw NumericalError("population cap " + std::to_string(cfg.population_cap) + " exceeded before t_end = " +
                                 std::to_string(t_end));
    }
}

}  // namespace

std::vector<double> simulate_bbm(const OffspringLaw& law, double t_end, BbmRng& rng, const BbmConfig& cfg)
{
    std::vector<double> out;
    double first = 0.0;
    run_genealogy(law, t_end, rng, cfg, [&](double x) { out.push_back(x); }, first);
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
}

std::vector<double> simulate_bbm(const OffspringLaw& law, double t_end, std::uint64_t seed, const BbmConfig& cfg)
{
    BbmRng rng = replicate_rng(seed, 0);
    return simulate_bbm(law, t_end, rng, cfg);
}

TopTwo simulate_top_two(const OffspringLaw& law, double t_end, BbmRng& rng, const BbmConfig& cfg)
{
    TopTwo out;
    out.x1 = out.x2 = -std::numeric_limits<double>::infinity();
    run_genealogy(
        law, t_end, rng, cfg,
        [&](double x) {
            ++out.population;
            if (x > out.x1) {
                out.x2 = out.x1;
                out.x1 = x;
            } else if (x > out.x2) {
                out.x2 = x;
            }
        },
        out.first_branch);
    return out;
}

std::vector<TopTwo> sample_top_two(const OffspringLaw& law, double t_end, std::size_t replicates, std::uint64_t seed,
                                   int workers, const BbmConfig& cfg)
{
    std::vector<TopTwo> out(replicates);
    constexpr std::size_t chunk = 256;
    const std::size_t chunks = (replicates + chunk - 1) / chunk;
    parallel_for(chunks, workers, [&](std::size_t c) {
        for (std::size_t i = c * chunk; i < std::min(replicates, (c + 1) * chunk); ++i) {
            BbmRng rng = replicate_rng(seed, i);
            out[i] = simulate_top_two(law, t_end, rng, cfg);
        }
    });
    return out;
}

std::vector<McEstimate> estimate_gap_tail_mc(const OffspringLaw& law, double t_end, std::span<const double> a_list,
                                             std::size_t replicates, std::uint64_t seed, int workers,
                                             const BbmConfig& cfg)
{
    if (replicates < 1000) throw ConfigError("Monte Carlo needs at least 1000 replicates");
    for (double a : a_list)
        if (!(a >= 0.0)) throw ConfigError("gap thresholds must be nonnegative");
    const std::vector<TopTwo> runs = sample_top_two(law, t_end, replicates, seed, workers, cfg);
    std::vector<McEstimate> out;
    for (double a : a_list) {
        McEstimate e;
        e.a = a;
        e.t_end = t_end;
        e.replicates = replicates;
        // a single particle has gap +infinity
        e.hits = static_cast<std::size_t>(
            std::count_if(runs.begin(), runs.end(), [a](const TopTwo& r) { return r.gap() > a; }));
        e.value = static_cast<double>(e.hits) / static_cast<double>(replicates);
        e.stderr_ = std::sqrt(e.value * (1.0 - e.value) / static_cast<double>(replicates));
        out.push_back(e);
    }
    return out;
}

McEstimate estimate_gap_tail_mc(const OffspringLaw& law, double t_end, double a, std::size_t replicates,
                                std::uint64_t seed, int workers, const BbmConfig& cfg)
{
    const double as[] = {a};
    return estimate_gap_tail_mc(law, t_end, as, replicates, seed, workers, cfg).front();
}

}  // namespace bbmgap
