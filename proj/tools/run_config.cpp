#include "run_config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "bbmgap/errors.hpp"
#include "toml.hpp"

namespace bbmgap::cli {

namespace {

const std::set<std::string> known_sections = {"law", "grid", "front", "wave", "tail", "mc", "output", "asym"};

const std::set<std::string> known_keys = {
    "law.offspring",   "grid.dx",          "grid.dt",        "grid.L_left",      "grid.L_right", "grid.rannacher",
    "front.T_final",   "front.dump_every", "wave.xbar0",     "tail.a_list",      "tail.t0",      "tail.T_final",
    "tail.flatness_tol", "tail.emit_fields", "mc.replicates", "mc.t_end",        "mc.seed",      "mc.workers",
    "output.dir",      "asym.exponent_mode"};

[[noreturn]] void bad(std::string_view source, const std::string& what)
{
    throw ConfigError(fmt::format("{}: {}", source, what));
}

double get_double(const toml::table& t, const char* sec, const char* key, double dflt, std::string_view src)
{
    const toml::node_view<const toml::node> n = t[sec][key];
    if (!n) return dflt;
    if (auto v = n.value<double>()) return *v;
    bad(src, fmt::format("{}.{} must be a number", sec, key));
}

std::int64_t get_int(const toml::table& t, const char* sec, const char* key, std::int64_t dflt, std::string_view src)
{
    const toml::node_view<const toml::node> n = t[sec][key];
    if (!n) return dflt;
    if (!n.is_integer()) bad(src, fmt::format("{}.{} must be an integer", sec, key));
    return *n.value<std::int64_t>();
}

std::vector<double> get_list(const toml::table& t, const char* sec, const char* key, std::vector<double> dflt,
                             std::string_view src)
{
    const toml::node_view<const toml::node> n = t[sec][key];
    if (!n) return dflt;
    const toml::array* arr = n.as_array();
    if (!arr) bad(src, fmt::format("{}.{} must be an array of numbers", sec, key));
    std::vector<double> out;
    for (const toml::node& e : *arr) {
        auto v = e.value<double>();
        if (!v) bad(src, fmt::format("{}.{} must be an array of numbers", sec, key));
        out.push_back(*v);
    }
    return out;
}

void check_keys(const toml::table& t, std::string_view src)
{
    for (const auto& [sec, node] : t) {
        const toml::table* st = node.as_table();
        if (!st) bad(src, fmt::format("top-level key '{}' must be a section", sec.str()));
        if (!known_sections.count(std::string(sec.str()))) bad(src, fmt::format("unknown section '{}'", sec.str()));
        for (const auto& [key, _] : *st) {
            const std::string full = std::string(sec.str()) + "." + std::string(key.str());
            if (!known_keys.count(full)) bad(src, fmt::format("unknown key '{}'", full));
        }
    }
}

toml::array to_array(const std::vector<double>& v)
{
    toml::array a;
    for (double x : v) a.push_back(x);
    return a;
}

}  // namespace

void RunConfig::validate() const
{
    try {
        Reaction r(law);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("law.offspring: ") + e.what());
    }
    auto need = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(what);
    };
    need(dx > 0.0 && dx <= 0.5, "grid.dx must lie in (0, 0.5]");
    need(dt >= 0.0 && dt <= 0.1, "grid.dt must lie in [0, 0.1] (0 selects the default)");
    need(L_left >= 0.0 && L_right >= 0.0, "grid.L_left and grid.L_right must be >= 0 (0 selects the default)");
    need(rannacher >= 0 && rannacher <= 10, "grid.rannacher must lie in [0, 10]");
    need(front_T_final >= 1.0 && front_T_final <= 1e5, "front.T_final must lie in [1, 1e5]");
    need(dump_every >= 0, "front.dump_every must be >= 0");
    need(std::isfinite(wave_xbar0), "wave.xbar0 must be finite");
    need(!a_list.empty(), "tail.a_list must not be empty");
    for (double a : a_list) need(a >= 0.5 && a <= 200.0, "tail.a_list entries must lie in [0.5, 200]");
    need(std::is_sorted(a_list.begin(), a_list.end()) &&
             std::adjacent_find(a_list.begin(), a_list.end()) == a_list.end(),
         "tail.a_list must be strictly increasing");
    need(t0 > 0.0 && t0 < 0.5, "tail.t0 must lie in (0, 0.5)");
    need(tail_T_final >= 0.0, "tail.T_final must be >= 0 (0 selects the default)");
    need(flatness_tol > 0.0 && flatness_tol < 1.0, "tail.flatness_tol must lie in (0, 1)");
    need(replicates >= 1000, "mc.replicates must be >= 1000");
    need(seed <= static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()), "mc.seed must be below 2^63");
    need(t_end > 0.0 && t_end <= 15.0, "mc.t_end must lie in (0, 15]");
    need(workers >= 1 && workers <= 256, "mc.workers must lie in [1, 256]");
}

PdeConfig RunConfig::front_config() const
{
    PdeConfig c;
    c.dx = dx;
    c.dt = dt;
    c.L_left = L_left;
    c.L_right = L_right;
    c.rannacher = rannacher;
    c.T_final = front_T_final;
    c.domain_a = *std::max_element(a_list.begin(), a_list.end());
    return c;
}

GapConfig RunConfig::gap_config() const
{
    GapConfig g;
    g.t0 = t0;
    g.T_final = tail_T_final;
    g.flatness_tol = flatness_tol;
    g.rannacher = rannacher;
    g.dt = dt;
    g.store_fields = emit_fields;
    return g;
}

RunConfig parse_config(std::string_view text, std::string_view source)
{
    toml::table t;
    try {
        t = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        bad(source, fmt::format("line {}: {}", e.source().begin.line, e.description()));
    }
    check_keys(t, source);
    RunConfig c;
    if (auto n = t["law"]["offspring"]) {
        const toml::array* arr = n.as_array();
        if (!arr) bad(source, "law.offspring must be an array of [k, p] pairs");
        c.law.probs.clear();
        for (const toml::node& e : *arr) {
            const toml::array* pair = e.as_array();
            if (!pair || pair->size() != 2 || !(*pair)[0].is_integer() || !(*pair)[1].value<double>())
                bad(source, "law.offspring entries must be [k, p] with integer k");
            c.law.probs.emplace_back(static_cast<int>(*(*pair)[0].value<std::int64_t>()), *(*pair)[1].value<double>());
        }
    }
    c.dx = get_double(t, "grid", "dx", c.dx, source);
    c.dt = get_double(t, "grid", "dt", c.dt, source);
    c.L_left = get_double(t, "grid", "L_left", c.L_left, source);
    c.L_right = get_double(t, "grid", "L_right", c.L_right, source);
    c.rannacher = static_cast<int>(get_int(t, "grid", "rannacher", c.rannacher, source));
    c.front_T_final = get_double(t, "front", "T_final", c.front_T_final, source);
    c.dump_every = static_cast<int>(get_int(t, "front", "dump_every", c.dump_every, source));
    c.wave_xbar0 = get_double(t, "wave", "xbar0", c.wave_xbar0, source);
    c.a_list = get_list(t, "tail", "a_list", c.a_list, source);
    c.t0 = get_double(t, "tail", "t0", c.t0, source);
    c.tail_T_final = get_double(t, "tail", "T_final", c.tail_T_final, source);
    c.flatness_tol = get_double(t, "tail", "flatness_tol", c.flatness_tol, source);
    if (auto n = t["tail"]["emit_fields"]) {
        if (!n.is_boolean()) bad(source, "tail.emit_fields must be true or false");
        c.emit_fields = *n.value<bool>();
    }
    const std::int64_t reps = get_int(t, "mc", "replicates", static_cast<std::int64_t>(c.replicates), source);
    if (reps < 0) bad(source, "mc.replicates must be positive");
    c.replicates = static_cast<std::size_t>(reps);
    c.t_end = get_double(t, "mc", "t_end", c.t_end, source);
    const std::int64_t seed = get_int(t, "mc", "seed", static_cast<std::int64_t>(c.seed), source);
    if (seed < 0) bad(source, "mc.seed must be nonnegative");
    c.seed = static_cast<std::uint64_t>(seed);
    c.workers = static_cast<int>(get_int(t, "mc", "workers", c.workers, source));
    if (auto n = t["output"]["dir"]) {
        if (!n.is_string()) bad(source, "output.dir must be a string");
        c.output_dir = *n.value<std::string>();
    }
    if (auto n = t["asym"]["exponent_mode"]) {
        if (!n.is_string()) bad(source, "asym.exponent_mode must be a string");
        try {
            c.exponent_mode = parse_exponent_mode(*n.value<std::string>());
        } catch (const std::invalid_argument& e) {
            bad(source, e.what());
        }
    }
    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::string to_toml(const RunConfig& c)
{
    toml::array law;
    for (const auto& [k, p] : c.law.probs) law.push_back(toml::array{static_cast<std::int64_t>(k), p});
    toml::table t{
        {"law", toml::table{{"offspring", law}}},
        {"grid", toml::table{{"dx", c.dx},
                             {"dt", c.dt},
                             {"L_left", c.L_left},
                             {"L_right", c.L_right},
                             {"rannacher", static_cast<std::int64_t>(c.rannacher)}}},
        {"front", toml::table{{"T_final", c.front_T_final}, {"dump_every", static_cast<std::int64_t>(c.dump_every)}}},
        {"wave", toml::table{{"xbar0", c.wave_xbar0}}},
        {"tail", toml::table{{"a_list", to_array(c.a_list)},
                             {"t0", c.t0},
                             {"T_final", c.tail_T_final},
                             {"flatness_tol", c.flatness_tol},
                             {"emit_fields", c.emit_fields}}},
        {"mc", toml::table{{"replicates", static_cast<std::int64_t>(c.replicates)},
                           {"t_end", c.t_end},
                           {"seed", static_cast<std::int64_t>(c.seed)},
                           {"workers", static_cast<std::int64_t>(c.workers)}}},
        {"output", toml::table{{"dir", c.output_dir}}},
        {"asym", toml::table{{"exponent_mode", to_string(c.exponent_mode)}}},
    };
    std::ostringstream os;
    os << t << "\n";
    return os.str();
}

std::uint64_t fnv1a(std::string_view bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex64(std::uint64_t h) { return fmt::format("{:016x}", h); }

std::string config_hash(const RunConfig& cfg)
{
    // the output location and worker count do not change any result
    RunConfig c = cfg;
    c.output_dir.clear();
    c.workers = 1;
    return hex64(fnv1a(to_toml(c)));
}

std::string law_hash(const OffspringLaw& law)
{
    std::string s;
    for (const auto& [k, p] : law.probs) s += fmt::format("{}:{:.17g};", k, p);
    return hex64(fnv1a(s));
}

OffspringLaw parse_offspring(std::string_view text)
{
    OffspringLaw law;
    law.probs.clear();
    std::string s(text);
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError("offspring entries look like k:p, got '" + item + "'");
        try {
            law.probs.emplace_back(std::stoi(item.substr(0, colon)), std::stod(item.substr(colon + 1)));
        } catch (const std::logic_error&) {
            throw ConfigError("cannot parse offspring entry '" + item + "'");
        }
    }
    try {
        law.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return law;
}

std::vector<double> parse_list(std::string_view text)
{
    std::vector<double> out;
    std::string s(text);
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
        } catch (const std::logic_error&) {
            throw ConfigError("cannot parse number '" + item + "'");
        }
    }
    if (out.empty()) throw ConfigError("empty list");
    return out;
}

std::filesystem::path resolve_output_dir(const RunConfig& cfg)
{
    if (!cfg.output_dir.empty()) return cfg.output_dir;
    const char* root = std::getenv("BBMGAP_OUTPUT_ROOT");
    return std::filesystem::path(root && *root ? root : "runs") / ("run-" + config_hash(cfg).substr(0, 8));
}

}  // namespace bbmgap::cli
