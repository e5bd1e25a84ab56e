#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "bbmgap/errors.hpp"
#include "run_config.hpp"
#include "stages.hpp"

using namespace bbmgap;
using namespace bbmgap::cli;

namespace {

struct Overrides {
    std::string config;
    std::string out;
    bool overwrite = false;
    std::optional<std::string> offspring, a_list, exponent_mode;
    std::optional<double> dx, t_final, t_end;
    std::optional<std::size_t> replicates;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    bool emit_fields = false;
    std::string front_dir, tail_dir, mc_dir;
};

void add_common(CLI::App* sub, Overrides& o)
{
    sub->add_option("--config", o.config, "TOML run configuration");
    sub->add_option("--out", o.out, "run directory (default: $BBMGAP_OUTPUT_ROOT or ./runs, then run-<config hash>)");
    sub->add_flag("--overwrite", o.overwrite, "replace this stage's previous outputs");
    sub->add_option("--offspring", o.offspring, "offspring law as k:p pairs, e.g. 2:0.5,3:0.5");
    sub->add_option("--workers", o.workers, "worker threads");
}

RunConfig resolve(const Overrides& o, StageOptions& opt)
{
    RunConfig cfg = o.config.empty() ? RunConfig{} : load_config(o.config);
    if (o.offspring) cfg.law = parse_offspring(*o.offspring);
    if (o.a_list) cfg.a_list = parse_list(*o.a_list);
    if (o.dx) cfg.dx = *o.dx;
    if (o.t_final) cfg.front_T_final = *o.t_final;
    if (o.t_end) cfg.t_end = *o.t_end;
    if (o.replicates) cfg.replicates = *o.replicates;
    if (o.seed) cfg.seed = *o.seed;
    if (o.workers) cfg.workers = *o.workers;
    if (o.exponent_mode) cfg.exponent_mode = parse_exponent_mode(*o.exponent_mode);
    if (o.emit_fields) cfg.emit_fields = true;
    if (!o.out.empty()) cfg.output_dir = o.out;
    cfg.validate();
    opt.out = resolve_output_dir(cfg);
    opt.overwrite = o.overwrite;
    opt.front_dir = o.front_dir;
    opt.tail_dir = o.tail_dir;
    opt.mc_dir = o.mc_dir;
    return cfg;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Branching Brownian motion: tail of the gap between the two rightmost particles"};
    app.require_subcommand(1);
    Overrides o;

    CLI::App* wave = app.add_subcommand("wave", "traveling wave and adjoint profile");
    CLI::App* front = app.add_subcommand("front", "KPP front from Heaviside data, Bramson shift, potential");
    CLI::App* tail = app.add_subcommand("tail", "gap tail probabilities from the linearized equation");
    CLI::App* mc = app.add_subcommand("mc", "Monte Carlo estimate of P(x1 - x2 > a) at t_end");
    CLI::App* compare = app.add_subcommand("compare", "join tail and mc results with the asymptotic formula");
    CLI::App* all = app.add_subcommand("all", "wave, front, tail, mc and compare in one process");
    CLI::App* show = app.add_subcommand("config", "print the resolved configuration and its hash");
    for (CLI::App* s : {wave, front, tail, mc, compare, all, show}) add_common(s, o);
    for (CLI::App* s : {front, tail, all}) {
        s->add_option("--dx", o.dx, "grid spacing");
        s->add_option("--t-final", o.t_final, "front horizon");
    }
    for (CLI::App* s : {tail, mc, all, show}) s->add_option("--a-list", o.a_list, "gap thresholds, e.g. 1,2,3");
    for (CLI::App* s : {tail, all}) s->add_flag("--emit-fields", o.emit_fields, "write r(t,x) snapshots");
    for (CLI::App* s : {mc, all}) {
        s->add_option("--t-end", o.t_end, "simulation horizon");
        s->add_option("--replicates", o.replicates, "replicates");
        s->add_option("--seed", o.seed, "seed");
    }
    for (CLI::App* s : {compare, all}) s->add_option("--exponent-mode", o.exponent_mode, "derivation or theorem");
    tail->add_option("--front-dir", o.front_dir, "front stage directory (default <out>/front)");
    compare->add_option("--front-dir", o.front_dir, "front stage directory (default <out>/front)");
    compare->add_option("--tail-dir", o.tail_dir, "tail stage directory (default <out>/tail)");
    compare->add_option("--mc-dir", o.mc_dir, "mc stage directory (default <out>/mc)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        StageOptions opt;
        const RunConfig cfg = resolve(o, opt);
        if (show->parsed()) {
            std::cout << to_toml(cfg) << "# config_hash = " << config_hash(cfg) << "\n# run_dir = " << opt.out.string()
                      << "\n";
            return 0;
        }
        if (wave->parsed()) run_wave(cfg, opt);
        if (front->parsed()) run_front(cfg, opt);
        if (tail->parsed()) run_tail(cfg, opt);
        if (mc->parsed()) run_mc(cfg, opt);
        if (compare->parsed()) run_compare(cfg, opt);
        if (all->parsed()) run_all(cfg, opt);
        std::cout << opt.out.string() << "\n";
        return 0;
    } catch (const ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return 2;
    } catch (const ArtifactError& e) {
        fmt::print(stderr, "artifact error: {}\n", e.what());
        return 3;
    } catch (const NumericalError& e) {
        fmt::print(stderr, "numerical error: {}\n", e.what());
        return 4;
    } catch (const std::invalid_argument& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
}
