#include "curvedqi/cli.hpp"

#include <toml.hpp>

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "curvedqi/cosmo.hpp"
#include "curvedqi/detector.hpp"
#include "curvedqi/echo.hpp"
#include "curvedqi/harvest.hpp"
#include "curvedqi/parallel.hpp"

namespace cqi::cli {

using json = nlohmann::ordered_json;

namespace {

constexpr const char* kUnits = "natural units, hbar = c = k_B = 1; echo in Planck units (l_p = 1)";

std::string fmt(double v)
{
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

double parse_double(std::string_view s)
{
    double v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw std::runtime_error("malformed number '" + std::string(s) + "'");
    return v;
}

std::int64_t parse_int(std::string_view s)
{
    std::int64_t v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw std::runtime_error("malformed integer '" + std::string(s) + "'");
    return v;
}

std::vector<double> L(std::initializer_list<double> v) { return v; }

std::vector<ParamSpec> cavity_specs(int cycles)
{
    return {
        {"cavity.length", 1.0, "Dirichlet cavity length"},
        {"cavity.n_modes", std::int64_t{40}, "field modes kept"},
        {"detectors.gap", M_PI, "detector gap Omega (both detectors)"},
        {"detectors.coupling", 0.2, "peak coupling lambda_0"},
        {"detectors.x_a", 0.3, "detector a position / L"},
        {"detectors.x_b", 0.7, "detector b position / L"},
        {"detectors.ramp_fraction", 0.1, "window ramp / cycle duration"},
        {"protocol.cycle_duration", 10.0, "T_c"},
        {"protocol.max_cycles", std::int64_t{cycles}, "cycle cap"},
        {"protocol.convergence_tol", 1e-6, "spread of the negativity over the settle window"},
        {"protocol.settle_cycles", std::int64_t{10}, "successive differences that must all fall inside the tolerance"},
        {"tolerances.rel_tol", 1e-10, "propagator relative tolerance"},
        {"tolerances.abs_tol", 1e-12, "propagator absolute tolerance"},
    };
}

const std::map<std::string, std::vector<ParamSpec>>& spec_table()
{
    static const std::map<std::string, std::vector<ParamSpec>> t = [] {
        std::map<std::string, std::vector<ParamSpec>> m;
        m["unruh"] = {
            {"unruh.omega", L({1.0}), "Rindler mode frequencies"},
            {"unruh.accel", L({0.5, 1.0, 2.0}), "proper accelerations"},
            {"unruh.n_levels", std::int64_t{400}, "truncation of the number distribution"},
        };
        m["cosmo-spectrum"] = {
            {"model.epsilon", 0.5, "expansion amplitude, |epsilon| < 1"},
            {"model.rho", 1.0, "expansion rapidity"},
            {"model.mass", 1.0, "field mass"},
            {"model.statistics", std::string("boson"), "boson | fermion"},
            {"grid.k_min", 0.05, ""},
            {"grid.k_max", 10.0, ""},
            {"grid.n_k", std::int64_t{40}, ""},
            {"grid.spacing", std::string("log"), "log | linear"},
            {"tolerances.rtol", 1e-11, "mode ODE relative tolerance"},
            {"tolerances.lambda", 20.0, "integrate rho*eta over [-lambda, lambda]"},
        };
        m["echo"] = {
            {"background.pi_phi", 1000.0, "scalar-field momentum"},
            {"background.l", L({0.25, 0.5, 1.0}), "LQC quantization lengths"},
            {"background.L_torus", 1.0, "torus side"},
            {"detector.Omega", 0.1, "detector gap"},
            {"detector.lambda", 1.0, "coupling"},
            {"detector.x0", L({0.0, 0.0, 0.0}), "comoving position"},
            {"switching.kind", std::string("constant"), "constant | linear | tanh | smooth"},
            {"switching.delta", 1e-3, "ramp timescale"},
            {"window.T0", 0.01, "switch-on time"},
            {"window.T", 100.0, "switch-off time"},
            {"window.Tm", 5.0, "split time (split formula only)"},
            {"estimator.Ttilde", 10.0, "running-average resolution"},
            {"estimator.T_late", 50.0, "start of the estimator window"},
            {"estimator.DeltaT", 0.0, "window length, 0 -> T - T_late"},
            {"modes.n_max", std::int64_t{15}, "shell cutoff |n| <= n_max"},
            {"tolerances.rel_tol", 1e-6, "mode-integral relative tolerance"},
            {"output.curve", false, "emit the averaged curves instead of E"},
        };
        m["harvest-map"] = {
            {"harvest.case", std::string("minkowski"), "desitter | thermal | minkowski | parallel | antiparallel"},
            {"harvest.kappa", 1.0, "acceleration / expansion rate"},
            {"harvest.sigma", 0.3, "Gaussian switching width"},
            {"harvest.lambda", 1.0, "coupling"},
            {"harvest.rel_tol", 1e-8, "quadrature tolerance"},
            {"grid.Lk_max", 4.0, ""},
            {"grid.n_L", std::int64_t{40}, ""},
            {"grid.theta_max", M_PI, "max kappa sigma^2 Omega"},
            {"grid.n_theta", std::int64_t{40}, ""},
            {"map.numeric", true, "evaluate A and X wherever the Wightman function is known"},
        };
        m["harvest-point"] = {
            {"harvest.case", std::string("parallel"), "desitter | thermal | minkowski | parallel | antiparallel"},
            {"harvest.kappa", 1.0, ""},
            {"harvest.L", 1.0, "separation"},
            {"harvest.Omega", 4.0, "detector gap"},
            {"harvest.sigma", 0.5, ""},
            {"harvest.lambda", 1.0, ""},
            {"harvest.rel_tol", 1e-8, ""},
        };
        auto farm = cavity_specs(200);
        farm.push_back({"initial.nbar", 0.0, "thermal occupation of every cavity mode"});
        farm.push_back({"scan.gaps", std::vector<double>{}, "working-point scan; empty: single run"});
        farm.push_back({"scan.cycle_durations", std::vector<double>{}, ""});
        farm.push_back({"scan.couplings", std::vector<double>{}, ""});
        m["farm"] = farm;
        auto seismo = cavity_specs(20);
        seismo.push_back({"vibration.amplitudes", L({1e-3, 2e-3}), "delta L"});
        seismo.push_back({"vibration.frequencies", L({0.05, 0.1}), "f"});
        seismo.push_back({"vibration.phase", 0.0, "phi"});
        m["seismo"] = seismo;
        return m;
    }();
    return t;
}

const char* type_name(const Value& v)
{
    switch (v.index()) {
    case 0: return "boolean";
    case 1: return "integer";
    case 2: return "float";
    case 3: return "string";
    default: return "array of numbers";
    }
}

std::optional<double> as_number(const toml::node& n)
{
    if (auto f = n.value_exact<double>()) return *f;
    if (auto i = n.value_exact<std::int64_t>()) return double(*i);
    return std::nullopt;
}

// Converts a TOML node to the type of `like`; nullopt on mismatch.
std::optional<Value> convert(const toml::node& n, const Value& like)
{
    switch (like.index()) {
    case 0:
        if (auto b = n.value_exact<bool>()) return Value{*b};
        break;
    case 1:
        if (auto i = n.value_exact<std::int64_t>()) return Value{*i};
        break;
    case 2:
        if (auto d = as_number(n)) return Value{*d};
        break;
    case 3:
        if (auto s = n.value_exact<std::string>()) return Value{*s};
        break;
    case 4: {
        std::vector<double> out;
        if (auto d = as_number(n)) return Value{std::vector<double>{*d}};
        const auto* arr = n.as_array();
        if (!arr) break;
        for (const auto& e : *arr) {
            auto d = as_number(e);
            if (!d) return std::nullopt;
            out.push_back(*d);
        }
        return Value{out};
    }
    }
    return std::nullopt;
}

// Untyped conversion used when reading inputs back from a CSV header.
Value convert_any(const toml::node& n)
{
    if (auto b = n.value_exact<bool>()) return *b;
    if (auto i = n.value_exact<std::int64_t>()) return *i;
    if (auto d = n.value_exact<double>()) return *d;
    if (auto s = n.value_exact<std::string>()) return *s;
    if (const auto* arr = n.as_array()) {
        std::vector<double> out;
        for (const auto& e : *arr) out.push_back(as_number(e).value_or(NAN));
        return out;
    }
    throw std::runtime_error("unsupported value in inputs");
}

struct Checker {
    const RunConfig& c;
    std::vector<std::string>& v;

    void bad(const std::string& key, const std::string& why) { v.push_back(key + ": " + why); }
    void positive(const std::string& k)
    {
        if (!(c.num(k) > 0)) bad(k, "must be positive");
    }
    void nonneg(const std::string& k)
    {
        if (!(c.num(k) >= 0)) bad(k, "must be non-negative");
    }
    void finite(const std::string& k)
    {
        if (!std::isfinite(c.num(k))) bad(k, "must be finite");
    }
    void int_min(const std::string& k, std::int64_t m)
    {
        if (c.integer(k) < m) bad(k, "must be >= " + std::to_string(m));
    }
    void one_of(const std::string& k, std::initializer_list<const char*> opts)
    {
        for (const char* o : opts)
            if (c.str(k) == o) return;
        std::string s;
        for (const char* o : opts) s += std::string(s.empty() ? "" : " | ") + o;
        bad(k, "must be one of " + s);
    }
    void list_positive(const std::string& k, bool allow_empty = false)
    {
        const auto& l = c.list(k);
        if (l.empty() && !allow_empty) bad(k, "must not be empty");
        for (double x : l)
            if (!(x > 0)) {
                bad(k, "entries must be positive");
                return;
            }
    }
    void open_unit(const std::string& k)
    {
        if (!(c.num(k) > 0 && c.num(k) < 1)) bad(k, "must lie in (0, 1)");
    }
};

void validate_cavity(Checker& ck)
{
    ck.positive("cavity.length");
    ck.int_min("cavity.n_modes", 1);
    ck.positive("detectors.gap");
    ck.finite("detectors.coupling");
    ck.open_unit("detectors.x_a");
    ck.open_unit("detectors.x_b");
    ck.open_unit("detectors.ramp_fraction");
    if (ck.c.num("detectors.ramp_fraction") >= 0.5) ck.bad("detectors.ramp_fraction", "must be below 1/2");
    ck.positive("protocol.cycle_duration");
    ck.int_min("protocol.max_cycles", 1);
    ck.int_min("protocol.settle_cycles", 1);
    ck.positive("protocol.convergence_tol");
    ck.positive("tolerances.rel_tol");
    ck.positive("tolerances.abs_tol");
}

std::vector<std::string> validate(const RunConfig& c)
{
    std::vector<std::string> v;
    Checker ck{c, v};
    const auto& s = c.subcommand;
    if (s == "unruh") {
        ck.list_positive("unruh.omega");
        ck.list_positive("unruh.accel");
        ck.int_min("unruh.n_levels", 1);
    } else if (s == "cosmo-spectrum") {
        if (!(std::abs(c.num("model.epsilon")) < 1)) ck.bad("model.epsilon", "must satisfy |epsilon| < 1");
        ck.positive("model.rho");
        ck.nonneg("model.mass");
        ck.one_of("model.statistics", {"boson", "fermion"});
        ck.positive("grid.k_min");
        if (!(c.num("grid.k_max") >= c.num("grid.k_min"))) ck.bad("grid.k_max", "must be >= grid.k_min");
        ck.int_min("grid.n_k", 1);
        ck.one_of("grid.spacing", {"log", "linear"});
        ck.positive("tolerances.rtol");
        ck.positive("tolerances.lambda");
    } else if (s == "echo") {
        ck.positive("background.pi_phi");
        ck.list_positive("background.l");
        ck.positive("background.L_torus");
        ck.positive("detector.Omega");
        ck.finite("detector.lambda");
        if (c.list("detector.x0").size() != 3) ck.bad("detector.x0", "must have three components");
        ck.one_of("switching.kind", {"constant", "linear", "tanh", "smooth"});
        ck.positive("switching.delta");
        ck.positive("window.T0");
        if (!(c.num("window.T") > c.num("window.T0"))) ck.bad("window.T", "must exceed window.T0");
        if (!(c.num("window.Tm") > c.num("window.T0") && c.num("window.Tm") < c.num("window.T")))
            ck.bad("window.Tm", "must lie inside (window.T0, window.T)");
        ck.positive("estimator.Ttilde");
        if (!(c.num("estimator.T_late") >= c.num("window.T0") + c.num("estimator.Ttilde")))
            ck.bad("estimator.T_late", "must be >= window.T0 + estimator.Ttilde");
        ck.nonneg("estimator.DeltaT");
        const double dT = c.num("estimator.DeltaT") > 0 ? c.num("estimator.DeltaT")
                                                        : c.num("window.T") - c.num("estimator.T_late");
        if (!(dT > 0 && c.num("estimator.T_late") + dT <= c.num("window.T") * (1 + 1e-12)))
            ck.bad("estimator.DeltaT", "window [T_late, T_late + DeltaT] must be non-empty and end by window.T");
        ck.int_min("modes.n_max", 1);
        ck.positive("tolerances.rel_tol");
    } else if (s == "harvest-map" || s == "harvest-point") {
        try {
            harvest_case_from_string(c.str("harvest.case"));
        } catch (const std::exception&) {
            ck.one_of("harvest.case", {"desitter", "thermal", "minkowski", "parallel", "antiparallel"});
        }
        ck.positive("harvest.kappa");
        ck.positive("harvest.sigma");
        ck.finite("harvest.lambda");
        if (!(c.num("harvest.rel_tol") > 0 && c.num("harvest.rel_tol") < 1)) ck.bad("harvest.rel_tol", "must lie in (0, 1)");
        if (s == "harvest-map") {
            ck.positive("grid.Lk_max");
            ck.int_min("grid.n_L", 1);
            ck.positive("grid.theta_max");
            ck.int_min("grid.n_theta", 1);
        } else {
            ck.positive("harvest.L");
            ck.positive("harvest.Omega");
        }
    } else if (s == "farm") {
        validate_cavity(ck);
        ck.nonneg("initial.nbar");
        const bool any = !c.list("scan.gaps").empty() || !c.list("scan.cycle_durations").empty() ||
                         !c.list("scan.couplings").empty();
        if (any) {
            ck.list_positive("scan.gaps");
            ck.list_positive("scan.cycle_durations");
            if (c.list("scan.couplings").empty()) ck.bad("scan.couplings", "must not be empty when scanning");
        }
    } else if (s == "seismo") {
        validate_cavity(ck);
        ck.list_positive("vibration.amplitudes");
        ck.list_positive("vibration.frequencies");
        ck.finite("vibration.phase");
        for (double a : c.list("vibration.amplitudes"))
            if (a >= c.num("cavity.length")) {
                ck.bad("vibration.amplitudes", "must stay below cavity.length");
                break;
            }
    }
    return v;
}

std::string sanitize(std::string s)
{
    for (char& ch : s)
        if (ch == '\n' || ch == '\r') ch = ' ';
    return s;
}

uint64_t fnv1a(std::string_view s)
{
    uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Result assembly

struct Table {
    ResultEnvelope env;
    std::vector<Cell> row;

    void col(const std::string& n, const std::string& unit, const std::string& type)
    {
        env.columns.push_back({n, unit, type});
    }
    void prov(const std::string& k, const std::string& v) { env.provenance.emplace_back(k, sanitize(v)); }
};

Table start(const RunConfig& cfg, int schema)
{
    Table t;
    t.env.subcommand = cfg.subcommand;
    t.env.schema = cfg.subcommand + "/" + std::to_string(schema);
    t.env.inputs = cfg.params;
    t.prov("units", kUnits);
    t.prov("config_hash", config_hash(cfg));
    t.prov("workers", std::to_string(cfg.workers));
    return t;
}

PropagatorOptions propagator_options(const RunConfig& c)
{
    PropagatorOptions o;
    o.rel_tol = c.num("tolerances.rel_tol");
    o.abs_tol = c.num("tolerances.abs_tol");
    return o;
}

CavitySpec cavity_of(const RunConfig& c)
{
    return CavitySpec(c.num("cavity.length"), int(c.integer("cavity.n_modes")));
}

WorkingPointGrid grid_of(const RunConfig& c)
{
    WorkingPointGrid g;
    g.x_a = c.num("detectors.x_a");
    g.x_b = c.num("detectors.x_b");
    g.ramp_fraction = c.num("detectors.ramp_fraction");
    g.max_cycles = int(c.integer("protocol.max_cycles"));
    g.convergence_tol = c.num("protocol.convergence_tol");
    g.settle_cycles = int(c.integer("protocol.settle_cycles"));
    return g;
}

ResultEnvelope run_unruh(const RunConfig& c)
{
    Table t = start(c, 1);
    t.prov("method", "r = artanh(exp(-pi omega / a)); nbar = sinh^2 r; distribution mean truncated at n_levels");
    for (const char* n : {"omega", "a", "r", "nbar", "nbar_distribution", "T_U"}) t.col(n, "1", "double");
    t.col("n_levels", "1", "int");
    t.col("config_hash", "-", "string");
    const int N = int(c.integer("unruh.n_levels"));
    for (double w : c.list("unruh.omega"))
        for (double a : c.list("unruh.accel")) {
            const double r = unruh_squeezing(w, a);
            const auto p = rindler_number_distribution(r, N);
            double mean = 0;
            for (size_t n = 0; n < p.size(); ++n) mean += double(n) * p[n];
            t.env.rows.push_back({w, a, r, unruh_mean_number(w, a), mean, unruh_temperature(a), std::int64_t{N},
                                  config_hash(c)});
        }
    return t.env;
}

ResultEnvelope run_cosmo(const RunConfig& c)
{
    Table t = start(c, 1);
    const bool boson = c.str("model.statistics") == "boson";
    const ExpansionModel model(c.num("model.epsilon"), c.num("model.rho"), c.num("model.mass"),
                               boson ? Statistics::boson : Statistics::fermion);
    ModeSolveOptions opt;
    opt.rtol = c.num("tolerances.rtol");
    opt.lambda = c.num("tolerances.lambda");
    t.prov("method", "mode ODE across the expansion, asymptotic matching at rho*eta = +-lambda");
    for (const char* n : {"k", "omega_in", "omega_out", "alpha_abs2", "beta_abs2", "entropy", "normalization_defect"})
        t.col(n, "1", "double");
    t.col("rtol", "1", "double");
    t.col("config_hash", "-", "string");

    const int nk = int(c.integer("grid.n_k"));
    const double k0 = c.num("grid.k_min"), k1 = c.num("grid.k_max");
    const bool logsp = c.str("grid.spacing") == "log";
    std::vector<std::vector<Cell>> rows(nk);
    const std::string hash = config_hash(c);
    parallel_for(nk, c.workers, [&](int i) {
        const double f = nk == 1 ? 0.0 : double(i) / (nk - 1);
        const double k = logsp ? k0 * std::pow(k1 / k0, f) : k0 + (k1 - k0) * f;
        const auto pair = boson ? solve_mode_boson(k, model, opt) : solve_mode_fermion(k, model, opt);
        const auto [win, wout] = asymptotic_frequencies(k, model);
        const double S = boson ? bosonic_entropy(pair) : fermionic_entropy(fermionic_theta(pair, model));
        rows[i] = {k, win, wout, std::norm(pair.alpha), std::norm(pair.beta), S, pair.normalization_defect(),
                   opt.rtol, hash};
    });
    t.env.rows = std::move(rows);
    return t.env;
}

SwitchingKind switching_kind(const std::string& s)
{
    if (s == "linear") return SwitchingKind::linear_ramp;
    if (s == "tanh") return SwitchingKind::tanh_ramp;
    if (s == "smooth") return SwitchingKind::smooth_compact;
    return SwitchingKind::constant;
}

ResultEnvelope run_echo(const RunConfig& c)
{
    Table t = start(c, 1);
    EchoConfig e;
    e.Omega = c.num("detector.Omega");
    e.lambda = c.num("detector.lambda");
    const auto& x0 = c.list("detector.x0");
    e.x0 = {x0[0], x0[1], x0[2]};
    e.T0 = c.num("window.T0");
    e.T = c.num("window.T");
    e.Tm = c.num("window.Tm");
    e.Ttilde = c.num("estimator.Ttilde");
    e.T_late = c.num("estimator.T_late");
    e.DeltaT = c.num("estimator.DeltaT");
    e.n_max = int(c.integer("modes.n_max"));
    e.rel_tol = c.num("tolerances.rel_tol");
    e.workers = c.workers;
    e.validate();
    const SwitchingFunction sw(switching_kind(c.str("switching.kind")), e.T0, e.T, c.num("switching.delta"));
    const double pi_phi = c.num("background.pi_phi"), Lt = c.num("background.L_torus");
    const auto gr = CosmologyBackground::gr(pi_phi, Lt);
    const bool curve = c.flag("output.curve");

    t.prov("method", "shell-grouped mode sums, adaptive Gauss-Kronrod mode integrals, Simpson outer average");
    t.prov("n_max", std::to_string(e.n_max));
    t.col("l", "l_p", "double");
    if (curve) {
        t.col("T", "t_p", "double");
        for (const char* n : {"mean_gr", "mean_lqc", "ratio"}) t.col(n, "1", "double");
    }
    t.col("E", "1", "double");
    t.col("tail_ratio", "1", "double");
    t.col("flagged", "-", "bool");
    t.col("n_max", "1", "int");
    t.col("rel_tol", "1", "double");
    t.col("config_hash", "-", "string");
    const std::string hash = config_hash(c);
    for (double l : c.list("background.l")) {
        const auto lqc = CosmologyBackground::lqc(pi_phi, l, Lt);
        for (const auto& w : e.regime_warnings(lqc)) t.prov("warning", "l = " + fmt(l) + ": " + w);
        const EchoEstimate est = estimator_E(e, lqc, gr, sw);
        const Cell tail = est.tail_ratio, flagged = est.flagged;
        if (curve) {
            for (size_t i = 0; i < est.times.size(); ++i)
                t.env.rows.push_back({l, est.times[i], est.mean_gr[i], est.mean_lqc[i], est.ratio[i], est.E, tail,
                                      flagged, std::int64_t{e.n_max}, e.rel_tol, hash});
        } else {
            t.env.rows.push_back({l, est.E, tail, flagged, std::int64_t{e.n_max}, e.rel_tol, hash});
        }
    }
    return t.env;
}

HarvestConfiguration harvest_defaults(const RunConfig& c)
{
    HarvestConfiguration h;
    h.kind = harvest_case_from_string(c.str("harvest.case"));
    h.kappa = c.num("harvest.kappa");
    h.sigma = c.num("harvest.sigma");
    h.lambda = c.num("harvest.lambda");
    h.rel_tol = c.num("harvest.rel_tol");
    return h;
}

constexpr const char* kHarvestMethod =
    "X: analytic continuation in centre time, pole residues and steepest-descent residue path; "
    "A: shifted-line quadrature with crossed double poles; no finite regulator (exact i0 limit)";

ResultEnvelope run_harvest_map(const RunConfig& c)
{
    Table t = start(c, 1);
    const HarvestConfiguration d = harvest_defaults(c);
    const auto grid = RegionGrid::uniform(c.num("grid.Lk_max"), int(c.integer("grid.n_L")), c.num("grid.theta_max"),
                                          int(c.integer("grid.n_theta")));
    const auto cells = region_map(d.kind, grid, d, {c.flag("map.numeric"), c.workers});
    t.prov("method", kHarvestMethod);
    t.prov("eps_schedule", "none (contour evaluation)");
    t.col("Lk", "1", "double");
    t.col("theta", "1", "double");
    t.col("L", "1/kappa", "double");
    t.col("Omega", "kappa", "double");
    t.col("entangled", "-", "bool");
    t.col("closed_form", "-", "int");
    t.col("numeric", "-", "bool");
    for (const char* n : {"A", "X_re", "X_im", "negativity"}) t.col(n, "1", "double");
    t.col("flagged", "-", "bool");
    t.col("error", "-", "string");
    t.col("rel_tol", "1", "double");
    t.col("config_hash", "-", "string");
    const std::string hash = config_hash(c);
    for (const auto& cell : cells) {
        const bool num = cell.numeric;
        t.env.rows.push_back({cell.Lk, cell.theta, cell.Lk / d.kappa, cell.theta / (d.kappa * d.sigma * d.sigma),
                              cell.entangled, std::int64_t{cell.closed_form}, num, num ? cell.A : NAN,
                              num ? cell.X.real() : NAN, num ? cell.X.imag() : NAN, num ? cell.negativity : NAN,
                              cell.flagged, cell.error, d.rel_tol, hash});
    }
    return t.env;
}

ResultEnvelope run_harvest_point(const RunConfig& c)
{
    Table t = start(c, 1);
    HarvestConfiguration h = harvest_defaults(c);
    h.L = c.num("harvest.L");
    h.Omega = c.num("harvest.Omega");
    t.prov("method", kHarvestMethod);
    t.prov("eps_schedule", "none (contour evaluation)");
    for (const char* n : {"Lk", "theta", "A", "X_re", "X_im", "abs_X", "negativity"}) t.col(n, "1", "double");
    t.col("entangled", "-", "bool");
    t.col("closed_form", "-", "int");
    t.col("numeric", "-", "bool");
    t.col("flagged", "-", "bool");
    t.col("note", "-", "string");
    t.col("rel_tol", "1", "double");
    t.col("config_hash", "-", "string");
    const double Lk = h.L * h.kappa, th = h.theta();
    const std::int64_t closed =
        h.kind == HarvestCase::AntiParallelAccel ? -1 : (region_boundary(h.kind, Lk, th) ? 1 : 0);
    if (h.numeric()) {
        const HarvestValue v = harvest(h);
        t.env.rows.push_back({Lk, th, v.A, v.X.real(), v.X.imag(), std::abs(v.X), negativity_estimate(v.A, v.X),
                              std::abs(v.X) > v.A, closed, true, v.flagged, v.note, h.rel_tol, config_hash(c)});
    } else {
        t.env.rows.push_back({Lk, th, NAN, NAN, NAN, NAN, NAN, closed == 1, closed, false, false,
                              std::string("closed-form condition only"), h.rel_tol, config_hash(c)});
    }
    return t.env;
}

ResultEnvelope run_farm(const RunConfig& c)
{
    Table t = start(c, 1);
    const CavitySpec cav = cavity_of(c);
    const WorkingPointGrid g = grid_of(c);
    const auto opt = propagator_options(c);
    const std::string hash = config_hash(c);
    t.prov("method", "Gaussian covariance evolution, symplectic propagator per cycle, partial-transpose log-negativity");
    t.prov("n_modes", std::to_string(cav.n_modes));
    if (!c.list("scan.gaps").empty()) {
        struct Item {
            double gap, Tc, lam;
        };
        std::vector<Item> items;
        for (double gap : c.list("scan.gaps"))
            for (double Tc : c.list("scan.cycle_durations"))
                for (double lam : c.list("scan.couplings")) items.push_back({gap, Tc, lam});
        std::vector<WorkingPoint> pts(items.size());
        parallel_for(int(items.size()), c.workers, [&](int i) {
            WorkingPointGrid one = g;
            one.gaps = {items[i].gap};
            one.cycle_durations = {items[i].Tc};
            one.couplings = {items[i].lam};
            pts[i] = scan_working_points(cav, one, opt).at(0);
        });
        for (const char* n : {"gap", "cycle_duration", "coupling", "fixed_point_negativity"}) t.col(n, "1", "double");
        t.col("converged", "-", "bool");
        t.col("converged_at", "1", "int");
        t.col("best", "-", "bool");
        t.col("config_hash", "-", "string");
        const WorkingPoint best = best_working_point(pts);
        for (const auto& p : pts) {
            const bool is_best = p.gap == best.gap && p.cycle_duration == best.cycle_duration &&
                                 p.coupling == best.coupling;
            t.env.rows.push_back({p.gap, p.cycle_duration, p.coupling, p.fixed_point_negativity, p.converged,
                                  std::int64_t{p.converged_at}, is_best, hash});
        }
        return t.env;
    }
    FarmingProtocol proto = make_pair_protocol(cav, g, c.num("detectors.gap"), c.num("protocol.cycle_duration"),
                                               c.num("detectors.coupling"));
    proto.keep_snapshots = false;
    const PhaseSpaceLayout layout(0, cav.n_modes);
    const double nbar = c.num("initial.nbar");
    const auto init = nbar > 0 ? thermal_state(layout, nbar) : vacuum_state(layout);
    const FarmingReport rep = farm(cav, proto, init, opt);
    t.col("cycle", "1", "int");
    t.col("negativity", "1", "double");
    t.col("difference", "1", "double");
    t.col("converged", "-", "bool");
    t.col("converged_at", "1", "int");
    t.col("fixed_point_negativity", "1", "double");
    t.col("config_hash", "-", "string");
    for (size_t i = 0; i < rep.negativities.size(); ++i) {
        const double d = i == 0 ? NAN : rep.negativities[i] - rep.negativities[i - 1];
        t.env.rows.push_back({std::int64_t(i + 1), rep.negativities[i], d, rep.converged,
                              std::int64_t{rep.converged_at}, rep.fixed_point_negativity, hash});
    }
    return t.env;
}

ResultEnvelope run_seismo(const RunConfig& c)
{
    Table t = start(c, 1);
    const CavitySpec cav = cavity_of(c);
    const auto opt = propagator_options(c);
    FarmingProtocol proto = make_pair_protocol(cav, grid_of(c), c.num("detectors.gap"),
                                               c.num("protocol.cycle_duration"), c.num("detectors.coupling"));
    proto.keep_snapshots = false;
    const double base = farm(cav, proto, vacuum_state(PhaseSpaceLayout(0, cav.n_modes)), opt).negativities.back();
    const double phase = c.num("vibration.phase");
    std::vector<std::pair<double, double>> items;
    for (double a : c.list("vibration.amplitudes"))
        for (double f : c.list("vibration.frequencies")) items.emplace_back(a, f);
    std::vector<SeismoPoint> pts(items.size());
    parallel_for(int(items.size()), c.workers, [&](int i) {
        pts[i] = seismograph_response(cav, proto, base, items[i].first, items[i].second, phase, opt);
    });
    t.prov("method", "last-cycle negativity with vibrating mode frequencies minus the static cavity, both from vacuum");
    t.prov("baseline_negativity", fmt(base));
    for (const char* n : {"amplitude", "frequency", "delta_negativity", "perturbed_negativity"}) t.col(n, "1", "double");
    t.col("ok", "-", "bool");
    t.col("error", "-", "string");
    t.col("config_hash", "-", "string");
    const std::string hash = config_hash(c);
    for (const auto& p : pts)
        t.env.rows.push_back({p.amplitude, p.frequency, p.delta_negativity, p.perturbed_negativity, p.ok, p.error, hash});
    return t.env;
}

// ---------------------------------------------------------------------------
// Serialization helpers

std::string csv_escape(const std::string& s)
{
    const bool quote = s.empty() || s.find_first_of(",\"\n\r") != std::string::npos || s.front() == ' ' ||
                       s.back() == ' ';
    if (!quote) return s;
    std::string out = "\"";
    for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return out + "\"";
}

std::vector<std::string> csv_split(std::string_view line)
{
    std::vector<std::string> out;
    std::string cur;
    bool in_q = false, was_q = false;
    for (size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (in_q) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    in_q = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            in_q = was_q = true;
        } else if (ch == ',') {
            out.push_back(cur);
            cur.clear();
            was_q = false;
        } else {
            cur += ch;
        }
    }
    (void)was_q;
    out.push_back(cur);
    return out;
}

std::string cell_text(const Cell& c)
{
    switch (c.index()) {
    case 0: return std::to_string(std::get<std::int64_t>(c));
    case 1: return fmt(std::get<double>(c));
    case 2: return std::get<bool>(c) ? "true" : "false";
    default: return csv_escape(std::get<std::string>(c));
    }
}

Cell cell_from_text(const std::string& s, const std::string& type)
{
    if (type == "int") return parse_int(s);
    if (type == "double") return parse_double(s);
    if (type == "bool") {
        if (s == "true") return true;
        if (s == "false") return false;
        throw std::runtime_error("malformed boolean '" + s + "'");
    }
    return s;
}

json cell_json(const Cell& c)
{
    switch (c.index()) {
    case 0: return std::get<std::int64_t>(c);
    case 1: {
        const double v = std::get<double>(c);
        if (std::isfinite(v)) return v;
        return fmt(v);  // "nan", "inf", "-inf"
    }
    case 2: return std::get<bool>(c);
    default: return std::get<std::string>(c);
    }
}

Cell cell_from_json(const json& j, const std::string& type)
{
    if (type == "int") return j.get<std::int64_t>();
    if (type == "double") return j.is_string() ? parse_double(j.get<std::string>()) : j.get<double>();
    if (type == "bool") return j.get<bool>();
    return j.get<std::string>();
}

json value_json(const Value& v)
{
    switch (v.index()) {
    case 0: return std::get<bool>(v);
    case 1: return std::get<std::int64_t>(v);
    case 2: {
        const double d = std::get<double>(v);
        return std::isfinite(d) ? json(d) : json(fmt(d));
    }
    case 3: return std::get<std::string>(v);
    default: {
        json a = json::array();
        for (double d : std::get<std::vector<double>>(v)) a.push_back(d);
        return a;
    }
    }
}

Value value_from_json(const json& j)
{
    if (j.is_boolean()) return j.get<bool>();
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_number_float()) return j.get<double>();
    if (j.is_string()) return j.get<std::string>();
    if (j.is_array()) return j.get<std::vector<double>>();
    throw std::runtime_error("unsupported input value in JSON envelope");
}

bool same_cell(const Cell& a, const Cell& b)
{
    if (a.index() != b.index()) return false;
    if (a.index() == 1) {
        const double x = std::get<double>(a), y = std::get<double>(b);
        return x == y || (std::isnan(x) && std::isnan(y));
    }
    return a == b;
}

}  // namespace

// ---------------------------------------------------------------------------

ConfigError::ConfigError(std::vector<std::string> v)
    : std::runtime_error([&] {
          std::string s = "invalid configuration:";
          for (const auto& x : v) s += "\n  " + x;
          return s;
      }()),
      violations(std::move(v))
{
}

Format format_from_string(const std::string& s)
{
    if (s == "csv") return Format::csv;
    if (s == "json") return Format::json;
    throw std::invalid_argument("unknown format '" + s + "' (csv | json)");
}

const char* to_string(Format f) { return f == Format::csv ? "csv" : "json"; }

const std::vector<std::string>& subcommands()
{
    static const std::vector<std::string> s{"unruh",         "cosmo-spectrum", "echo", "harvest-map",
                                            "harvest-point", "farm",           "seismo"};
    return s;
}

const std::vector<ParamSpec>& param_specs(const std::string& subcommand)
{
    const auto& t = spec_table();
    const auto it = t.find(subcommand);
    if (it == t.end()) throw std::invalid_argument("unknown subcommand '" + subcommand + "'");
    return it->second;
}

double RunConfig::num(const std::string& key) const { return std::get<double>(params.at(key)); }
std::int64_t RunConfig::integer(const std::string& key) const { return std::get<std::int64_t>(params.at(key)); }
bool RunConfig::flag(const std::string& key) const { return std::get<bool>(params.at(key)); }
const std::string& RunConfig::str(const std::string& key) const { return std::get<std::string>(params.at(key)); }
const std::vector<double>& RunConfig::list(const std::string& key) const
{
    return std::get<std::vector<double>>(params.at(key));
}

Format RunConfig::output_format() const
{
    if (format) return *format;
    return subcommand == "harvest-point" ? Format::json : Format::csv;
}

RunConfig default_config(const std::string& subcommand)
{
    RunConfig c;
    c.subcommand = subcommand;
    for (const auto& p : param_specs(subcommand)) c.params[p.key] = p.def;
    return c;
}

RunConfig parse_config(const std::string& subcommand, std::string_view text)
{
    RunConfig c = default_config(subcommand);
    const auto& specs = param_specs(subcommand);
    toml::table root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << "syntax error at line " << e.source().begin.line << ", column " << e.source().begin.column << ": "
           << e.description();
        throw ConfigError({os.str()});
    }
    std::vector<std::string> v;
    auto known_section = [&](const std::string& sec) {
        return std::any_of(specs.begin(), specs.end(),
                           [&](const ParamSpec& p) { return p.key.compare(0, sec.size() + 1, sec + ".") == 0; });
    };
    for (const auto& [sk, node] : root) {
        const std::string sec(sk.str());
        const auto* tbl = node.as_table();
        if (!tbl) {
            v.push_back(sec + ": expected a [section], found a bare key");
            continue;
        }
        if (!known_section(sec)) {
            v.push_back(sec + ": unknown section for '" + subcommand + "'");
            continue;
        }
        for (const auto& [kk, val] : *tbl) {
            const std::string key = sec + "." + std::string(kk.str());
            const auto it = std::find_if(specs.begin(), specs.end(), [&](const ParamSpec& p) { return p.key == key; });
            if (it == specs.end()) {
                v.push_back(key + ": unknown parameter");
                continue;
            }
            if (auto conv = convert(val, it->def))
                c.params[key] = *conv;
            else
                v.push_back(key + ": expected " + type_name(it->def) + " (line " +
                            std::to_string(val.source().begin.line) + ")");
        }
    }
    // Semantic checks run on whatever parsed (defaults stand in for rejected keys).
    for (auto& x : validate(c)) v.push_back(std::move(x));
    if (!v.empty()) throw ConfigError(v);
    return c;
}

std::string toml_literal(const Value& v)
{
    switch (v.index()) {
    case 0: return std::get<bool>(v) ? "true" : "false";
    case 1: return std::to_string(std::get<std::int64_t>(v));
    case 2: {
        std::string s = fmt(std::get<double>(v));
        if (s.find_first_of(".eEn") == std::string::npos) s += ".0";  // keep it a TOML float
        return s;
    }
    case 3: {
        std::string s = "\"";
        for (char ch : std::get<std::string>(v)) {
            if (ch == '"' || ch == '\\') s += '\\';
            s += ch;
        }
        return s + "\"";
    }
    default: {
        std::string s = "[";
        const auto& l = std::get<std::vector<double>>(v);
        for (size_t i = 0; i < l.size(); ++i) s += (i ? ", " : "") + toml_literal(Value{l[i]});
        return s + "]";
    }
    }
}

std::string emit_config(const RunConfig& cfg)
{
    std::string out, section;
    for (const auto& p : param_specs(cfg.subcommand)) {
        const auto dot = p.key.find('.');
        const std::string sec = p.key.substr(0, dot);
        if (sec != section) {
            out += (out.empty() ? "[" : "\n[") + sec + "]\n";
            section = sec;
        }
        out += p.key.substr(dot + 1) + " = " + toml_literal(cfg.params.at(p.key));
        if (!p.doc.empty()) out += "  # " + p.doc;
        out += "\n";
    }
    return out;
}

std::string config_hash(const RunConfig& cfg)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(cfg.subcommand + "\n" + emit_config(cfg))));
    return buf;
}

int resolve_workers(std::optional<int> flag)
{
    if (flag) {
        if (*flag < 1) throw std::invalid_argument("--workers must be >= 1");
        return *flag;
    }
    if (const char* env = std::getenv("CURVEDQI_WORKERS")) {
        try {
            const int w = int(parse_int(env));
            if (w >= 1) return w;
        } catch (const std::exception&) {
        }
        throw std::invalid_argument(std::string("CURVEDQI_WORKERS must be a positive integer, got '") + env + "'");
    }
    return 1;
}

size_t ResultEnvelope::column(const std::string& name) const
{
    for (size_t i = 0; i < columns.size(); ++i)
        if (columns[i].name == name) return i;
    throw std::out_of_range("no column '" + name + "'");
}

bool same_envelope(const ResultEnvelope& a, const ResultEnvelope& b, bool include_wall_clock)
{
    if (a.version != b.version || a.subcommand != b.subcommand || a.schema != b.schema || a.inputs != b.inputs ||
        a.provenance != b.provenance || a.columns != b.columns || a.rows.size() != b.rows.size())
        return false;
    if (include_wall_clock && a.wall_clock_s != b.wall_clock_s) return false;
    for (size_t i = 0; i < a.rows.size(); ++i) {
        if (a.rows[i].size() != b.rows[i].size()) return false;
        for (size_t j = 0; j < a.rows[i].size(); ++j)
            if (!same_cell(a.rows[i][j], b.rows[i][j])) return false;
    }
    return true;
}

ResultEnvelope run(const RunConfig& cfg)
{
    const auto v = validate(cfg);
    if (!v.empty()) throw ConfigError(v);
    const auto t0 = std::chrono::steady_clock::now();
    ResultEnvelope env;
    const auto& s = cfg.subcommand;
    if (s == "unruh")
        env = run_unruh(cfg);
    else if (s == "cosmo-spectrum")
        env = run_cosmo(cfg);
    else if (s == "echo")
        env = run_echo(cfg);
    else if (s == "harvest-map")
        env = run_harvest_map(cfg);
    else if (s == "harvest-point")
        env = run_harvest_point(cfg);
    else if (s == "farm")
        env = run_farm(cfg);
    else if (s == "seismo")
        env = run_seismo(cfg);
    else
        throw std::invalid_argument("unknown subcommand '" + s + "'");
    env.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return env;
}

std::string to_csv(const ResultEnvelope& env)
{
    std::string out = "# curvedqi " + env.version + "\n";
    out += "# schema: " + env.schema + "\n";
    out += "# subcommand: " + env.subcommand + "\n";
    for (const auto& [k, v] : env.inputs) out += "# input: " + k + " = " + toml_literal(v) + "\n";
    for (const auto& [k, v] : env.provenance) out += "# provenance: " + k + " = " + v + "\n";
    for (const auto& c : env.columns) out += "# column: " + c.name + " | " + c.unit + " | " + c.type + "\n";
    out += "# wall_clock_s: " + fmt(env.wall_clock_s) + "\n";
    for (size_t i = 0; i < env.columns.size(); ++i) out += (i ? "," : "") + env.columns[i].name;
    out += "\n";
    for (const auto& row : env.rows) {
        for (size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + cell_text(row[i]);
        out += "\n";
    }
    return out;
}

ResultEnvelope from_csv(std::string_view text)
{
    ResultEnvelope env;
    env.version.clear();
    std::istringstream in{std::string(text)};
    std::string line;
    bool header = false;
    auto after = [](const std::string& l, const std::string& tag) { return l.substr(tag.size()); };
    auto split_kv = [](const std::string& s) {
        const auto p = s.find(" = ");
        if (p == std::string::npos) throw std::runtime_error("malformed metadata line '" + s + "'");
        return std::make_pair(s.substr(0, p), s.substr(p + 3));
    };
    while (std::getline(in, line)) {
        if (line.rfind("#", 0) == 0) {
            if (line.rfind("# curvedqi ", 0) == 0) {
                env.version = after(line, "# curvedqi ");
            } else if (line.rfind("# schema: ", 0) == 0) {
                env.schema = after(line, "# schema: ");
            } else if (line.rfind("# subcommand: ", 0) == 0) {
                env.subcommand = after(line, "# subcommand: ");
            } else if (line.rfind("# input: ", 0) == 0) {
                const auto [k, lit] = split_kv(after(line, "# input: "));
                const auto tbl = toml::parse("v = " + lit);
                env.inputs[k] = convert_any(*tbl.get("v"));
            } else if (line.rfind("# provenance: ", 0) == 0) {
                env.provenance.push_back(split_kv(after(line, "# provenance: ")));
            } else if (line.rfind("# column: ", 0) == 0) {
                const std::string s = after(line, "# column: ");
                const auto a = s.find(" | "), b = s.find(" | ", a + 3);
                if (a == std::string::npos || b == std::string::npos)
                    throw std::runtime_error("malformed column line '" + line + "'");
                env.columns.push_back({s.substr(0, a), s.substr(a + 3, b - a - 3), s.substr(b + 3)});
            } else if (line.rfind("# wall_clock_s: ", 0) == 0) {
                env.wall_clock_s = parse_double(after(line, "# wall_clock_s: "));
            }
            continue;
        }
        if (line.empty()) continue;
        const auto cells = csv_split(line);
        if (!header) {
            header = true;
            if (cells.size() != env.columns.size()) throw std::runtime_error("CSV header does not match column metadata");
            for (size_t i = 0; i < cells.size(); ++i)
                if (cells[i] != env.columns[i].name) throw std::runtime_error("CSV header does not match column metadata");
            continue;
        }
        if (cells.size() != env.columns.size()) throw std::runtime_error("CSV row has the wrong number of fields");
        std::vector<Cell> row;
        for (size_t i = 0; i < cells.size(); ++i) row.push_back(cell_from_text(cells[i], env.columns[i].type));
        env.rows.push_back(std::move(row));
    }
    return env;
}

std::string to_json(const ResultEnvelope& env)
{
    json j;
    json inputs = json::object();
    for (const auto& [k, v] : env.inputs) {
        const auto dot = k.find('.');
        inputs[k.substr(0, dot)][k.substr(dot + 1)] = value_json(v);
    }
    j["inputs"] = inputs;
    json prov = json::object();
    prov["subcommand"] = env.subcommand;
    prov["schema"] = env.schema;
    json entries = json::array();
    for (const auto& [k, v] : env.provenance) entries.push_back({k, v});
    prov["entries"] = entries;
    json cols = json::array();
    for (const auto& c : env.columns) cols.push_back({{"name", c.name}, {"unit", c.unit}, {"type", c.type}});
    prov["columns"] = cols;
    prov["wall_clock_s"] = env.wall_clock_s;
    j["provenance"] = prov;
    json rows = json::array();
    for (const auto& r : env.rows) {
        json o = json::object();
        for (size_t i = 0; i < r.size(); ++i) o[env.columns[i].name] = cell_json(r[i]);
        rows.push_back(o);
    }
    j["rows"] = rows;
    j["version"] = env.version;
    return j.dump(2) + "\n";
}

ResultEnvelope from_json(std::string_view text)
{
    const json j = json::parse(text);
    ResultEnvelope env;
    env.version = j.at("version").get<std::string>();
    for (const auto& [sec, tbl] : j.at("inputs").items())
        for (const auto& [k, v] : tbl.items()) env.inputs[sec + "." + k] = value_from_json(v);
    const json& prov = j.at("provenance");
    env.subcommand = prov.at("subcommand").get<std::string>();
    env.schema = prov.at("schema").get<std::string>();
    for (const auto& e : prov.at("entries")) env.provenance.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
    for (const auto& c : prov.at("columns"))
        env.columns.push_back({c.at("name").get<std::string>(), c.at("unit").get<std::string>(), c.at("type").get<std::string>()});
    env.wall_clock_s = prov.at("wall_clock_s").get<double>();
    for (const auto& r : j.at("rows")) {
        std::vector<Cell> row;
        for (const auto& c : env.columns) row.push_back(cell_from_json(r.at(c.name), c.type));
        env.rows.push_back(std::move(row));
    }
    return env;
}

std::string serialize(const ResultEnvelope& env, Format f) { return f == Format::csv ? to_csv(env) : to_json(env); }

std::string data_section(std::string_view text, Format f)
{
    if (f == Format::json) return json::parse(text).at("rows").dump();
    std::istringstream in{std::string(text)};
    std::string line, out;
    while (std::getline(in, line))
        if (line.rfind("#", 0) != 0) out += line + "\n";
    return out;
}

}  // namespace cqi::cli
