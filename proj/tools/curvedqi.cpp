#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "curvedqi/cli.hpp"

namespace {

// Machine-readable error on stderr; exit codes: 2 configuration/usage, 3 runtime.
int fail(const std::string& kind, const std::vector<std::string>& messages, int code)
{
    nlohmann::ordered_json j;
    j["error"] = kind;
    j["messages"] = messages;
    std::cerr << j.dump() << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv)
{
    using namespace cqi::cli;
    CLI::App app{"curvedqi: Gaussian quantum information and detector models in curved spacetime"};
    app.set_version_flag("--version", std::string("curvedqi ") + kVersion);
    app.require_subcommand(1);

    struct Opts {
        std::string config, out, format;
        std::optional<int> workers;
        bool print_config = false;
    };
    const std::map<std::string, std::string> about{
        {"unruh", "Unruh temperature, occupation and Rindler number distribution over (omega, a)"},
        {"cosmo-spectrum", "Bogoliubov coefficients, |beta|^2 and entanglement entropy for the tanh expansion"},
        {"echo", "LQC vs GR detector excitation and the late-time estimator E"},
        {"harvest-map", "harvesting region over (L kappa, kappa sigma^2 Omega), closed form and numeric"},
        {"harvest-point", "A, X and negativity estimate for one detector pair"},
        {"farm", "entanglement farming in a cavity, or a working-point scan"},
        {"seismo", "change of the farmed negativity under cavity-length vibration"},
    };
    std::map<std::string, Opts> opts;
    for (const auto& name : subcommands()) {
        auto* sub = app.add_subcommand(name, about.at(name));
        Opts& o = opts[name];
        sub->add_option("--config", o.config, "TOML configuration file (defaults when omitted)");
        sub->add_option("--out", o.out, "output path (stdout when omitted)");
        sub->add_option("--workers", o.workers, "worker threads (fallback: CURVEDQI_WORKERS, else 1)");
        sub->add_option("--format", o.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
        sub->add_flag("--print-config", o.print_config, "print the effective configuration as TOML and exit");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", {e.what()}, 2);
    }

    const std::string name = app.get_subcommands().front()->get_name();
    const Opts& o = opts.at(name);
    RunConfig cfg;
    try {
        if (o.config.empty()) {
            cfg = default_config(name);
        } else {
            std::ifstream in(o.config);
            if (!in) return fail("config", {"cannot read '" + o.config + "'"}, 2);
            std::stringstream ss;
            ss << in.rdbuf();
            cfg = parse_config(name, ss.str());
        }
        cfg.workers = resolve_workers(o.workers);
        if (!o.format.empty()) cfg.format = format_from_string(o.format);
        cfg.out = o.out;
    } catch (const ConfigError& e) {
        return fail("config", e.violations, 2);
    } catch (const std::exception& e) {
        return fail("config", {e.what()}, 2);
    }

    if (o.print_config) {
        std::cout << emit_config(cfg);
        return 0;
    }

    std::string text;
    try {
        text = serialize(run(cfg), cfg.output_format());
    } catch (const ConfigError& e) {
        return fail("config", e.violations, 2);
    } catch (const std::exception& e) {
        return fail("runtime", {std::string(name) + ": " + e.what()}, 3);
    }
    if (cfg.out.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(cfg.out, std::ios::binary);
        out << text;
        if (!out) return fail("runtime", {"cannot write '" + cfg.out + "'"}, 3);
    }
    return 0;
}
