#include "stages.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>

#include <fmt/format.h>

#include "bbmgap/bbm.hpp"
#include "bbmgap/errors.hpp"
#include "bbmgap/gap.hpp"
#include "bbmgap/kpp.hpp"
#include "bbmgap/wave.hpp"
#include "bbmgap/work_pool.hpp"

namespace bbmgap::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* version = "1.0.0";

struct Clock {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); }
};

fs::path stage_dir(const StageOptions& opt, const char* stage)
{
    fs::path d = opt.out / stage;
    if (fs::exists(d) && !fs::is_empty(d)) {
        if (!opt.overwrite)
            throw ArtifactError("stage directory " + d.string() + " already holds outputs; pass --overwrite or pick a new --out");
        fs::remove_all(d);
    }
    fs::create_directories(d);
    return d;
}

void write_file(const fs::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary);
    out << text;
    if (!out) throw ArtifactError("cannot write " + p.string());
}

std::string constants_line(const Reaction& r, double C_U, double xbar0)
{
    return fmt::format("# N={:.12g} c_star={:.12g} lambda_star={:.12g} gamma_star={:.12g} C_U={:.12g} xbar0={:.12g}\n",
                       r.N(), r.c_star(), r.lambda_star(), r.gamma_star(), C_U, xbar0);
}

json constants_json(const Reaction& r, std::optional<double> C_U, std::optional<double> xbar0)
{
    json c = {{"N", r.N()}, {"c_star", r.c_star()}, {"lambda_star", r.lambda_star()}, {"gamma_star", r.gamma_star()}};
    c["C_U"] = C_U ? json(*C_U) : json(nullptr);
    c["xbar0"] = xbar0 ? json(*xbar0) : json(nullptr);
    return c;
}

void write_manifest(const fs::path& dir, const char* stage, const RunConfig& cfg, const Reaction& r, json constants,
                    const std::vector<std::string>& artifacts, json upstream, double wall, json extra = json::object())
{
    json m;
    m["schema"] = manifest_schema;
    m["stage"] = stage;
    m["config_hash"] = config_hash(cfg);
    m["law_hash"] = law_hash(r.law());
    m["constants"] = std::move(constants);
    m["versions"] = {{"bbmgap", version}, {"compiler", __VERSION__}, {"csv_schema", 1}};
    m["wall_time_s"] = wall;
    m["artifacts"] = artifacts;
    m["upstream"] = std::move(upstream);
    m["config"] = to_toml(cfg);
    for (auto& [k, v] : extra.items()) m[k] = v;
    write_file(dir / "manifest.json", m.dump(2) + "\n");
}

json upstream_entry(const fs::path& dir, const json& m)
{
    return {{"stage", m.at("stage")}, {"dir", dir.string()}, {"config_hash", m.at("config_hash")},
            {"law_hash", m.at("law_hash")}};
}

// In-memory results shared between stages of one process.
struct Shared {
    std::optional<Reaction> reaction;
    std::optional<WaveProfile> wave;
    std::optional<FrontSolution> front;
    std::optional<ShiftEstimate> shift;
    std::optional<WaveProfile> wide_wave;
    std::optional<AdjointProfile> adjoint;
    std::optional<StoredPotential> potential;
};

const Reaction& reaction(Shared& s, const RunConfig& cfg)
{
    if (!s.reaction) s.reaction.emplace(cfg.law);
    return *s.reaction;
}

const WaveProfile& wave(Shared& s, const RunConfig& cfg)
{
    if (!s.wave) s.wave.emplace(solve_wave(reaction(s, cfg), default_wave_config(reaction(s, cfg), cfg.dx)));
    return *s.wave;
}

void solve_front_chain(Shared& s, const RunConfig& cfg)
{
    if (s.potential) return;
    const Reaction& r = reaction(s, cfg);
    const PdeConfig pc = cfg.front_config();
    if (pc.T_final < 100.0) throw ConfigError("front.T_final must be >= 100 to extrapolate the Bramson shift");
    s.front.emplace(solve_front(r, wave(s, cfg), InitialData::heaviside(), pc));
    s.shift = estimate_bramson_shift(*s.front);
    s.wide_wave.emplace(solve_wave(r, wave_config_covering(r, s.front->grid, 5.0)));
    s.adjoint.emplace(build_adjoint(*s.wide_wave, s.shift->xbar0, s.front->grid));
    s.potential.emplace(build_potential(*s.front, r, *s.adjoint));
}

std::string num(double v) { return fmt::format("{:.12e}", v); }

void wave_stage(Shared& sh, const RunConfig& cfg, const StageOptions& opt)
{
    Clock clock;
    const Reaction& r = reaction(sh, cfg);
    const WaveProfile& w = wave(sh, cfg);
    const AdjointProfile adj = build_adjoint(w, cfg.wave_xbar0);
    const fs::path dir = stage_dir(opt, "wave");
    std::string csv = "# bbmgap wave v1\n" + constants_line(r, w.C_U(), cfg.wave_xbar0);
    csv += "x,U,U_prime,psi,psi_prime\n";
    for (std::size_t i = 0; i < adj.grid.n; ++i) {
        const double x = adj.grid.x(i);
        const WavePoint p = w.eval(x);
        csv += fmt::format("{},{},{},{},{}\n", num(x), num(p.U), num(p.Up), num(adj.psi[i]), num(adj.psi_prime[i]));
    }
    write_file(dir / "wave.csv", csv);
    write_manifest(dir, "wave", cfg, r, constants_json(r, w.C_U(), cfg.wave_xbar0), {"wave.csv"}, json::array(),
                   clock.seconds(),
                   {{"ode_residual_sup", w.ode_residual_sup()},
                    {"applied_shift", w.applied_shift()},
                    {"psi_xbar0_note", "psi in wave.csv uses wave.xbar0; the front stage reports the fitted xbar0"}});
}

void front_stage(Shared& sh, const RunConfig& cfg, const StageOptions& opt)
{
    Clock clock;
    const Reaction& r = reaction(sh, cfg);
    solve_front_chain(sh, cfg);
    const FrontSolution& f = *sh.front;
    const fs::path dir = stage_dir(opt, "front");
    std::string csv = "# bbmgap front v1\n" + constants_line(r, sh.wave->C_U(), sh.shift->xbar0);
    csv += "t,s_fit,sup_error,sup_E\n";
    const auto& supE = sh.potential->sup_E();
    for (std::size_t k = 0; k < f.times.size(); ++k)
        csv += fmt::format("{},{},{},{}\n", num(f.times[k]), num(f.shift_series[k]), num(f.sup_error[k]), num(supE[k]));
    write_file(dir / "front.csv", csv);
    std::vector<std::string> artifacts{"front.csv"};
    if (cfg.dump_every > 0) {
        fs::create_directories(dir / "fields");
        for (std::size_t k = 0; k < f.times.size(); k += static_cast<std::size_t>(cfg.dump_every)) {
            std::string fcsv = fmt::format("# bbmgap front-field v1\n# t={}\nx,H\n", num(f.times[k]));
            for (std::size_t i = 0; i < f.grid.n; ++i) fcsv += fmt::format("{},{}\n", num(f.grid.x(i)), num(f.H[k][i]));
            const std::string name = fmt::format("fields/H_{:05d}.csv", k);
            write_file(dir / name, fcsv);
            artifacts.push_back(name);
        }
    }
    const PotentialDiagnostics& d = sh.potential->diagnostics();
    write_manifest(dir, "front", cfg, r, constants_json(r, sh.wave->C_U(), sh.shift->xbar0), artifacts, json::array(),
                   clock.seconds(),
                   {{"xbar0", sh.shift->xbar0},
                    {"xbar0_error", sh.shift->error_bar},
                    {"xbar0_r_squared", sh.shift->r_squared},
                    {"grid", {{"x_min", f.grid.x_min}, {"dx", f.grid.dx}, {"n", f.grid.n}}},
                    {"max_overshoot", f.max_overshoot},
                    {"potential",
                     {{"V_min", d.V_min}, {"V_max", d.V_max}, {"B_left", d.B_left}, {"B_right", d.B_right},
                      {"within_bounds", d.within_bounds}}}});
}

nlohmann::json require_manifest(const fs::path& dir, const RunConfig& cfg)
{
    json m = read_manifest(dir);
    if (m.at("config_hash") != config_hash(cfg))
        throw ArtifactError(fmt::format("upstream {} was produced with config hash {}, this run has {}", dir.string(),
                                        m.at("config_hash").get<std::string>(), config_hash(cfg)));
    return m;
}

struct TailResult {
    GapSolution gs;
    ZMassSeries z;
    CorrectorReport corr;
};

void tail_stage(Shared& sh, const RunConfig& cfg, const StageOptions& opt, const fs::path& front_dir)
{
    Clock clock;
    const json fm = require_manifest(front_dir, cfg);
    const Reaction& r = reaction(sh, cfg);
    solve_front_chain(sh, cfg);
    if (std::abs(fm.at("xbar0").get<double>() - sh.shift->xbar0) > 1e-12 * (1.0 + std::abs(sh.shift->xbar0)))
        throw ArtifactError(fmt::format("front manifest xbar0 {} differs from the recomputed {}",
                                        fm.at("xbar0").get<double>(), sh.shift->xbar0));
    const GapConfig gc = cfg.gap_config();
    std::vector<std::unique_ptr<TailResult>> res(cfg.a_list.size());
    parallel_for(cfg.a_list.size(), cfg.workers, [&](std::size_t i) {
        const double a = cfg.a_list[i];
        auto t = std::make_unique<TailResult>();
        t->gs = solve_gap(r, a, *sh.potential, *sh.adjoint, gc);
        GapConfig zc = gc;
        for (const GapSample& s : t->gs.samples) zc.times.push_back(s.t);
        t->z = solve_z_mass(r, a, *sh.potential, zc);
        t->corr = corrector_diagnostics(r, t->gs, FreeSolutionParams::make(r, a), *sh.potential, *sh.adjoint, gc);
        res[i] = std::move(t);
    });

    const fs::path dir = stage_dir(opt, "tail");
    const std::string head = "# bbmgap tail v1\n" + constants_line(r, sh.wave->C_U(), sh.shift->xbar0);
    std::string rows = head +
                       "a,I_final,tail_prob,tail_prob_extrapolated,M_direct_final,M_extrapolated,crossover,"
                       "flatness_residual,T_final,psi_at_minus_a\n";
    std::string series = "# bbmgap tail-series v1\n" + constants_line(r, sh.wave->C_U(), sh.shift->xbar0) +
                         "a,t,I,dI_dt,dI_dt_fd,drift_term,error_term,M_tilt,M_direct\n";
    std::vector<std::string> artifacts{"tail.csv", "tail_series.csv"};
    json per_a = json::array();
    for (std::size_t i = 0; i < res.size(); ++i) {
        const TailResult& t = *res[i];
        const double a = cfg.a_list[i];
        rows += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", num(a), num(t.gs.I_final), num(t.gs.tail_prob),
                            num(t.gs.tail_prob_extrapolated), num(t.z.M.back()), num(t.z.M_extrapolated),
                            num(t.corr.crossover), num(t.gs.flatness_residual), num(t.gs.T_final),
                            num(t.gs.psi_at_minus_a));
        for (std::size_t k = 0; k < t.gs.samples.size(); ++k) {
            const GapSample& s = t.gs.samples[k];
            series += fmt::format("{},{},{},{},{},{},{},{},{}\n", num(a), num(s.t), num(s.I), num(s.dI), num(s.dI_fd),
                                  num(s.drift_term), num(s.error_term), num(s.M), num(t.z.M[k]));
        }
        if (cfg.emit_fields) {
            const std::string name = fmt::format("r_field_a{:g}.csv", a);
            std::string f = fmt::format("# bbmgap tail-field v1\n# a={}\nt,x,r\n", num(a));
            for (std::size_t k = 0; k < t.gs.fields.size(); k += 10)
                for (std::size_t j = 0; j < t.gs.grid.n; j += 4)
                    f += fmt::format("{},{},{}\n", num(t.gs.samples[k].t), num(t.gs.grid.x(j)), num(t.gs.fields[k][j]));
            write_file(dir / name, f);
            artifacts.push_back(name);
        }
        const FlatnessReport fl = flatness_diagnostics(t.gs, FreeSolutionParams::make(r, a));
        per_a.push_back({{"a", a},
                         {"worst_negativity", t.gs.worst_negativity},
                         {"late_slope", fl.late_slope},
                         {"late_log_variation", fl.late_log_variation},
                         {"crossover_in_band", t.corr.crossover_in_band},
                         {"q_min", t.corr.q_min},
                         {"corrector_consistency", t.corr.consistency},
                         {"z_min_value", t.z.min_value}});
    }
    write_file(dir / "tail.csv", rows);
    write_file(dir / "tail_series.csv", series);
    write_manifest(dir, "tail", cfg, r, constants_json(r, sh.wave->C_U(), sh.shift->xbar0), artifacts,
                   json::array({upstream_entry(front_dir, fm)}), clock.seconds(), {{"diagnostics", per_a}});
}

void mc_stage(Shared& sh, const RunConfig& cfg, const StageOptions& opt)
{
    Clock clock;
    const Reaction& r = reaction(sh, cfg);
    const std::vector<McEstimate> est =
        estimate_gap_tail_mc(cfg.law, cfg.t_end, cfg.a_list, cfg.replicates, cfg.seed, cfg.workers);
    const fs::path dir = stage_dir(opt, "mc");
    std::string csv = fmt::format("# bbmgap mc v1\n# N={:.12g} t_end={} seed={}\n", r.N(), cfg.t_end, cfg.seed);
    csv += "a,estimate,stderr,replicates,hits,t_end\n";
    for (const McEstimate& e : est)
        csv += fmt::format("{},{},{},{},{},{}\n", num(e.a), num(e.value), num(e.stderr_), e.replicates, e.hits,
                           num(e.t_end));
    write_file(dir / "mc.csv", csv);
    write_manifest(dir, "mc", cfg, r, constants_json(r, std::nullopt, std::nullopt), {"mc.csv"}, json::array(),
                   clock.seconds(), {{"seed", cfg.seed}, {"replicates", cfg.replicates}, {"t_end", cfg.t_end}});
}

void compare_stage(const RunConfig& cfg, const StageOptions& opt)
{
    Clock clock;
    const fs::path front_dir = opt.front_dir.empty() ? opt.out / "front" : opt.front_dir;
    const fs::path tail_dir = opt.tail_dir.empty() ? opt.out / "tail" : opt.tail_dir;
    const fs::path mc_dir = opt.mc_dir.empty() ? opt.out / "mc" : opt.mc_dir;
    const json fm = read_manifest(front_dir);
    std::optional<json> tm, mm;
    if (fs::exists(tail_dir / "manifest.json")) tm = read_manifest(tail_dir);
    if (fs::exists(mc_dir / "manifest.json")) mm = read_manifest(mc_dir);
    if (!tm && !mm) throw ArtifactError("compare needs tail or mc results; neither " + tail_dir.string() + " nor " +
                                        mc_dir.string() + " holds a manifest");
    json upstream = json::array({upstream_entry(front_dir, fm)});
    for (const auto* m : {tm ? &*tm : nullptr, mm ? &*mm : nullptr}) {
        if (!m) continue;
        if (m->at("law_hash") != fm.at("law_hash"))
            throw ArtifactError(fmt::format("constant hash mismatch: front has {}, {} has {}",
                                            fm.at("law_hash").get<std::string>(), m->at("stage").get<std::string>(),
                                            m->at("law_hash").get<std::string>()));
    }
    if (tm && mm && tm->at("law_hash") != mm->at("law_hash"))
        throw ArtifactError(fmt::format("constant hash mismatch: tail has {}, mc has {}",
                                        tm->at("law_hash").get<std::string>(), mm->at("law_hash").get<std::string>()));

    const Reaction r(cfg.law);
    if (law_hash(cfg.law) != fm.at("law_hash"))
        throw ArtifactError(fmt::format("constant hash mismatch: config law has {}, front has {}", law_hash(cfg.law),
                                        fm.at("law_hash").get<std::string>()));
    const Constants c = Constants::make(r, fm.at("constants").at("C_U").get<double>(), fm.at("xbar0").get<double>(),
                                        cfg.exponent_mode);
    std::vector<PdeTailRow> pde;
    std::vector<McTailRow> mc;
    if (tm) {
        upstream.push_back(upstream_entry(tail_dir, *tm));
        const CsvTable t = read_csv(tail_dir / "tail.csv");
        const auto a = t.column("a"), P = t.column("tail_prob"), Pe = t.column("tail_prob_extrapolated"),
                   I = t.column("I_final"), cr = t.column("crossover"), fl = t.column("flatness_residual"),
                   T = t.column("T_final");
        for (std::size_t i = 0; i < a.size(); ++i) pde.push_back({a[i], P[i], Pe[i], I[i], cr[i], fl[i], T[i]});
    }
    if (mm) {
        upstream.push_back(upstream_entry(mc_dir, *mm));
        const CsvTable t = read_csv(mc_dir / "mc.csv");
        const auto a = t.column("a"), v = t.column("estimate"), se = t.column("stderr"), n = t.column("replicates"),
                   te = t.column("t_end");
        for (std::size_t i = 0; i < a.size(); ++i)
            mc.push_back({a[i], v[i], se[i], static_cast<std::size_t>(n[i]), te[i]});
    }
    Report rep;
    try {
        rep = compare_report(pde, mc, c);
    } catch (const std::invalid_argument& e) {
        throw ArtifactError(e.what());
    }
    const fs::path dir = stage_dir(opt, "compare");
    write_file(dir / "report.csv", report_csv(rep));
    write_file(dir / "report.json", report_json(rep));
    write_manifest(dir, "compare", cfg, r, constants_json(r, c.C_U, c.xbar0), {"report.csv", "report.json"}, upstream,
                   clock.seconds());
}

}  // namespace

nlohmann::json read_manifest(const fs::path& dir)
{
    const fs::path p = dir / "manifest.json";
    std::ifstream in(p);
    if (!in) throw ArtifactError("missing upstream manifest " + p.string());
    json m;
    try {
        in >> m;
    } catch (const json::exception& e) {
        throw ArtifactError("unreadable manifest " + p.string() + ": " + e.what());
    }
    if (!m.contains("schema") || m["schema"] != manifest_schema)
        throw ArtifactError("manifest " + p.string() + " has an unknown schema");
    return m;
}

std::vector<double> CsvTable::column(const std::string& name) const
{
    for (std::size_t j = 0; j < header.size(); ++j)
        if (header[j] == name) {
            std::vector<double> out;
            for (const auto& row : rows) out.push_back(row.at(j));
            return out;
        }
    throw ArtifactError("CSV has no column '" + name + "'");
}

CsvTable read_csv(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw ArtifactError("missing upstream artifact " + path.string());
    CsvTable t;
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) out.push_back(cell);
        if (!s.empty() && s.back() == ',') out.emplace_back();
        return out;
    };
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (t.header.empty()) {
            t.header = split(line);
            continue;
        }
        std::vector<double> row;
        for (const std::string& c : split(line)) {
            if (c.empty()) {
                row.push_back(std::numeric_limits<double>::quiet_NaN());
                continue;
            }
            try {
                row.push_back(std::stod(c));
            } catch (const std::logic_error&) {
                row.push_back(std::numeric_limits<double>::quiet_NaN());
            }
        }
        if (row.size() != t.header.size()) throw ArtifactError("malformed row in " + path.string());
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw ArtifactError("empty CSV " + path.string());
    return t;
}

void run_wave(const RunConfig& cfg, const StageOptions& opt)
{
    Shared sh;
    wave_stage(sh, cfg, opt);
}

void run_front(const RunConfig& cfg, const StageOptions& opt)
{
    Shared sh;
    front_stage(sh, cfg, opt);
}

void run_tail(const RunConfig& cfg, const StageOptions& opt)
{
    Shared sh;
    tail_stage(sh, cfg, opt, opt.front_dir.empty() ? opt.out / "front" : opt.front_dir);
}

void run_mc(const RunConfig& cfg, const StageOptions& opt)
{
    Shared sh;
    mc_stage(sh, cfg, opt);
}

void run_compare(const RunConfig& cfg, const StageOptions& opt) { compare_stage(cfg, opt); }

void run_all(const RunConfig& cfg, const StageOptions& opt)
{
    Shared sh;
    wave_stage(sh, cfg, opt);
    front_stage(sh, cfg, opt);
    tail_stage(sh, cfg, opt, opt.out / "front");
    mc_stage(sh, cfg, opt);
    compare_stage(cfg, opt);
}

}  // namespace bbmgap::cli
