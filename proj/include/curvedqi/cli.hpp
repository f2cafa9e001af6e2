#pragma once
// Configuration, dispatch and result serialization for the `curvedqi` command line.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace cqi::cli {

inline constexpr const char* kVersion = "1.0.0";

enum class Format { csv, json };
Format format_from_string(const std::string& s);
const char* to_string(Format f);

using Value = std::variant<bool, std::int64_t, double, std::string, std::vector<double>>;

struct ParamSpec {
    std::string key;  // "section.name"
    Value def;
    std::string doc;
};

// Thrown with every violation found, syntax errors carrying their line number.
struct ConfigError : std::runtime_error {
    std::vector<std::string> violations;
    explicit ConfigError(std::vector<std::string> v);
};

const std::vector<std::string>& subcommands();
const std::vector<ParamSpec>& param_specs(const std::string& subcommand);

struct RunConfig {
    std::string subcommand;
    std::map<std::string, Value> params;
    int workers = 1;
    std::optional<Format> format;  // subcommand default when unset
    std::string out;                // empty: stdout

    double num(const std::string& key) const;
    std::int64_t integer(const std::string& key) const;
    bool flag(const std::string& key) const;
    const std::string& str(const std::string& key) const;
    const std::vector<double>& list(const std::string& key) const;

    Format output_format() const;
};

RunConfig default_config(const std::string& subcommand);
RunConfig parse_config(const std::string& subcommand, std::string_view toml_text);
// Documented-grammar TOML for the parameters only; parse_config(emit_config(c)) == c.params.
std::string emit_config(const RunConfig& cfg);
std::string toml_literal(const Value& v);
std::string config_hash(const RunConfig& cfg);  // FNV-1a 64 of emit_config, hex

// --workers, else CURVEDQI_WORKERS, else 1.
int resolve_workers(std::optional<int> flag);

using Cell = std::variant<std::int64_t, double, bool, std::string>;

struct Column {
    std::string name;
    std::string unit;  // "1" for dimensionless, "-" for labels
    std::string type;  // int | double | bool | string
    bool operator==(const Column&) const = default;
};

struct ResultEnvelope {
    std::string version = kVersion;
    std::string subcommand;
    std::string schema;  // "<subcommand>/<n>", bumped on column changes
    std::map<std::string, Value> inputs;
    std::vector<std::pair<std::string, std::string>> provenance;
    std::vector<Column> columns;
    std::vector<std::vector<Cell>> rows;
    double wall_clock_s = 0.0;

    size_t column(const std::string& name) const;
};

// Field-by-field equality; NaN cells compare equal to NaN.
bool same_envelope(const ResultEnvelope& a, const ResultEnvelope& b, bool include_wall_clock = true);

ResultEnvelope run(const RunConfig& cfg);

std::string to_csv(const ResultEnvelope& env);
std::string to_json(const ResultEnvelope& env);
ResultEnvelope from_csv(std::string_view text);
ResultEnvelope from_json(std::string_view text);
std::string serialize(const ResultEnvelope& env, Format f);

// The part of a serialized result that must be reproducible: CSV lines not starting
// with '#', or the JSON "rows" array.
std::string data_section(std::string_view text, Format f);

}  // namespace cqi::cli
