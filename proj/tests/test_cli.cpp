#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "curvedqi/cli.hpp"

using namespace cqi::cli;

namespace {

bool mentions(const ConfigError& e, const std::string& what)
{
    for (const auto& v : e.violations)
        if (v.find(what) != std::string::npos) return true;
    return false;
}

ConfigError config_error(const std::string& sub, const std::string& text)
{
    try {
        parse_config(sub, text);
    } catch (const ConfigError& e) {
        return e;
    }
    FAIL("configuration was accepted");
    return ConfigError({});
}

// Small but complete configurations for every subcommand.
RunConfig small(const std::string& sub)
{
    const std::map<std::string, std::string> text{
        {"unruh", "[unruh]\nomega = [0.5, 1.0]\naccel = [0.5, 1, 2]\n"},
        {"cosmo-spectrum", "[grid]\nn_k = 6\nk_max = 4.0\n"},
        {"echo",
         "[background]\nl = [0.5]\n[window]\nT = 30.0\n[estimator]\nT_late = 20.0\nTtilde = 5.0\n[modes]\nn_max = 3\n"},
        {"harvest-map", "[harvest]\ncase = \"antiparallel\"\nsigma = 0.5\n[grid]\nn_L = 3\nn_theta = 3\n"},
        {"harvest-point", ""},
        {"farm", "[cavity]\nn_modes = 6\n[protocol]\nmax_cycles = 4\n"},
        {"seismo", "[cavity]\nn_modes = 4\n[protocol]\nmax_cycles = 2\n[vibration]\namplitudes = [0.01]\n"},
    };
    return parse_config(sub, text.at(sub));
}

}  // namespace

TEST_CASE("defaults round-trip through the emitted TOML")
{
    for (const auto& sub : subcommands()) {
        CAPTURE(sub);
        const RunConfig d = default_config(sub);
        const RunConfig back = parse_config(sub, emit_config(d));
        CHECK(back.params == d.params);
        CHECK(config_hash(back) == config_hash(d));
        // Every subcommand's defaults are themselves valid.
        CHECK_NOTHROW(parse_config(sub, ""));
    }
    // Non-default values, including awkward doubles, survive the trip too.
    RunConfig c = default_config("echo");
    c.params["background.l"] = std::vector<double>{0.1 + 0.2, 1.0 / 3.0, 1e-300};
    c.params["detector.Omega"] = 6.02214076e23;
    CHECK(parse_config("echo", emit_config(c)).params == c.params);
}

TEST_CASE("empty optional section applies defaults")
{
    CHECK(parse_config("cosmo-spectrum", "[model]\n").params == default_config("cosmo-spectrum").params);
    CHECK(parse_config("farm", "[scan]\n[initial]\n").params == default_config("farm").params);
}

TEST_CASE("violations are collected and named")
{
    const auto e = config_error("cosmo-spectrum", "[model]\nmass = -1.0\nepsilon = 1.5\n[grid]\nn_k = 0\n");
    CHECK(e.violations.size() == 3);
    CHECK(mentions(e, "mass"));
    CHECK(mentions(e, "model.epsilon"));
    CHECK(mentions(e, "grid.n_k"));

    const auto s = config_error("echo", "[window]\nT0 = 0.01\nT = [1, 2\n");
    REQUIRE(s.violations.size() == 1);
    CHECK(mentions(s, "syntax error at line 3"));

    const auto u = config_error("harvest-point", "[harvest]\nkappa = \"fast\"\nshape = 1\n[extra]\nx = 1\ntop = 2\n");
    CHECK(mentions(u, "harvest.kappa: expected float (line 2)"));
    CHECK(mentions(u, "harvest.shape: unknown parameter"));
    CHECK(mentions(u, "extra: unknown section"));

    CHECK(mentions(config_error("harvest-map", "[harvest]\ncase = \"rindler\"\n"), "harvest.case"));
    CHECK(mentions(config_error("farm", "[protocol]\nmax_cycles = 2.5\n"), "protocol.max_cycles: expected integer"));
    CHECK(mentions(config_error("farm", "[scan]\ngaps = [1.0]\n"), "scan.cycle_durations"));
    CHECK(mentions(config_error("echo", "[detector]\nx0 = [0.0, 0.5]\n"), "detector.x0"));

    // Integers are accepted where floats are expected; scalars where lists are.
    const auto ok = parse_config("unruh", "[unruh]\nomega = 2\naccel = [1, 2.5]\n");
    CHECK(ok.list("unruh.omega") == std::vector<double>{2.0});
    CHECK(ok.list("unruh.accel") == std::vector<double>{1.0, 2.5});
}

TEST_CASE("config hash tracks parameters, not run options")
{
    RunConfig a = default_config("unruh"), b = a;
    b.workers = 8;
    b.format = Format::json;
    b.out = "x.json";
    CHECK(config_hash(a) == config_hash(b));
    b.params["unruh.n_levels"] = std::int64_t{401};
    CHECK(config_hash(a) != config_hash(b));
    CHECK(config_hash(a).size() == 16);
}

TEST_CASE("worker resolution")
{
    ::unsetenv("CURVEDQI_WORKERS");
    CHECK(resolve_workers(std::nullopt) == 1);
    ::setenv("CURVEDQI_WORKERS", "6", 1);
    CHECK(resolve_workers(std::nullopt) == 6);
    CHECK(resolve_workers(3) == 3);
    ::setenv("CURVEDQI_WORKERS", "many", 1);
    CHECK_THROWS_AS(resolve_workers(std::nullopt), std::invalid_argument);
    CHECK_THROWS_AS(resolve_workers(0), std::invalid_argument);
    ::unsetenv("CURVEDQI_WORKERS");
}

TEST_CASE("unruh rows")
{
    RunConfig c = parse_config("unruh", "[unruh]\nomega = [1.0]\naccel = [0.5, 1.0, 2.0]\n");
    const auto env = run(c);
    REQUIRE(env.rows.size() == 3);
    const size_t ia = env.column("a"), iT = env.column("T_U"), in = env.column("nbar"), id = env.column("nbar_distribution");
    for (const auto& row : env.rows) {
        const double a = std::get<double>(row[ia]);
        CHECK(std::get<double>(row[iT]) == doctest::Approx(a / (2 * M_PI)).epsilon(1e-15));
        const double bose = 1 / std::expm1(2 * M_PI / a);
        CHECK(std::get<double>(row[in]) == doctest::Approx(bose).epsilon(1e-12));
        CHECK(std::get<double>(row[id]) == doctest::Approx(bose).epsilon(1e-10));
    }
    CHECK(env.schema == "unruh/1");
    CHECK(std::get<std::string>(env.rows[0][env.column("config_hash")]) == config_hash(c));
}

TEST_CASE("massless cosmo spectrum creates no particles")
{
    for (const char* stats : {"boson", "fermion"}) {
        const auto env = run(parse_config(
            "cosmo-spectrum", std::string("[model]\nmass = 0.0\nstatistics = \"") + stats + "\"\n[grid]\nn_k = 5\n"));
        REQUIRE(env.rows.size() == 5);
        for (const auto& row : env.rows) CHECK(std::get<double>(row[env.column("beta_abs2")]) <= 1e-10);
    }
}

TEST_CASE("envelopes serialize losslessly")
{
    ResultEnvelope e;
    e.subcommand = "unruh";
    e.schema = "unruh/1";
    e.inputs = default_config("echo").params;
    e.provenance = {{"units", "natural"}, {"note", "a = b, \"quoted\""}};
    e.columns = {{"x", "1", "double"}, {"n", "1", "int"}, {"ok", "-", "bool"}, {"msg", "-", "string"}};
    e.rows = {{0.1 + 0.2, std::int64_t{-3}, true, std::string("plain")},
              {NAN, std::int64_t{0}, false, std::string("with, comma and \"quotes\"")},
              {-INFINITY, std::int64_t{1} << 40, true, std::string("")},
              {5e-324, std::int64_t{7}, false, std::string(" padded ")}};
    e.wall_clock_s = 1.25;
    CHECK(same_envelope(from_csv(to_csv(e)), e));
    CHECK(same_envelope(from_json(to_json(e)), e));
    CHECK(to_csv(from_csv(to_csv(e))) == to_csv(e));

    const auto real = run(small("harvest-point"));
    CHECK(same_envelope(from_json(to_json(real)), real));
    CHECK(same_envelope(from_csv(to_csv(real)), real));
}

TEST_CASE("data sections are reproducible across runs and worker counts")
{
    for (const auto& sub : subcommands()) {
        CAPTURE(sub);
        RunConfig c = small(sub);
        c.workers = 1;
        const auto first = run(c);
        const auto again = run(c);
        c.workers = 8;
        const auto wide = run(c);
        CHECK_FALSE(first.rows.empty());
        for (Format f : {Format::csv, Format::json}) {
            const std::string d1 = data_section(serialize(first, f), f);
            CHECK(d1 == data_section(serialize(again, f), f));
            CHECK(d1 == data_section(serialize(wide, f), f));
        }
    }
}

TEST_CASE("partial grid failures keep the file complete")
{
    // Closed-form-only cells carry no numeric values but are still emitted.
    const auto env = run(parse_config("harvest-map", "[harvest]\ncase = \"desitter\"\n[grid]\nn_L = 4\nn_theta = 2\n"));
    CHECK(env.rows.size() == 8);
    for (const auto& row : env.rows) {
        CHECK_FALSE(std::get<bool>(row[env.column("numeric")]));
        CHECK(std::isnan(std::get<double>(row[env.column("A")])));
    }
}
