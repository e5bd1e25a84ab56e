#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "bbmgap/asym.hpp"
#include "bbmgap/kpp.hpp"
#include "bbmgap/gap.hpp"
#include "bbmgap/reaction.hpp"

namespace bbmgap::cli {

/// Everything a run needs. Defaults are the documented ones; see
/// README.md for the file layout.
struct RunConfig {
    OffspringLaw law = OffspringLaw::binary();

    double dx = 0.05;
    double dt = 0.0;       // 0: min(0.25 dx, 0.01)
    double L_left = 0.0;   // 0: max(a_list) + 50
    double L_right = 0.0;  // 0: 8 sqrt(T + 1) + 20
    int rannacher = 2;
    double front_T_final = 1000.0;
    double wave_xbar0 = 0.0;  // shift of psi in the wave stage's CSV

    std::vector<double> a_list{1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
    double t0 = 0.001;
    double tail_T_final = 0.0;  // 0: max(20 t*, 10 a), then extended until flat
    double flatness_tol = 1e-4;
    bool emit_fields = false;
    int dump_every = 0;  // front field dumps every k-th sample, 0 = none

    std::size_t replicates = 100000;
    double t_end = 4.0;
    std::uint64_t seed = 20240601;
    int workers = 1;

    std::string output_dir;  // empty: $BBMGAP_OUTPUT_ROOT (or ./runs) / run-<hash>
    ExponentMode exponent_mode = ExponentMode::derivation;

    /// Throws ConfigError naming the first offending field.
    void validate() const;

    PdeConfig front_config() const;
    GapConfig gap_config() const;

    bool operator==(const RunConfig&) const = default;
};

RunConfig parse_config(std::string_view toml_text, std::string_view source = "<string>");
RunConfig load_config(const std::filesystem::path& path);
std::string to_toml(const RunConfig& cfg);

std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t h);

/// Hash of the canonical serialization; identical configs hash identically.
std::string config_hash(const RunConfig& cfg);
/// Hash of the offspring law alone; stages with equal law hashes share N, c*, lambda*, gamma*.
std::string law_hash(const OffspringLaw& law);

/// "2:0.5,3:0.5"
OffspringLaw parse_offspring(std::string_view text);
/// "1,2,3.5"
std::vector<double> parse_list(std::string_view text);

std::filesystem::path resolve_output_dir(const RunConfig& cfg);

}  // namespace bbmgap::cli
