// Experiment harness implementation: TOML-style config round-trip, trace CSV
// IO, the simulate/recover/shadows commands, and the methodology sweep tables.
#include "lindlearn/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <utility>

#include "lindlearn/oracle.hpp"
#include "lindlearn/shadows.hpp"

namespace lindlearn {

namespace fs = std::filesystem;

namespace {

// --- small shared helpers ---------------------------------------------------

// Shortest text that survives a text->double->text round trip would need
// std::to_chars; %.17g is deterministic and always reparses to the same bits.
// snprintf uses the "C" locale unless the program changes it (we never do),
// so the decimal separator is always '.'.
std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_config("cannot open file '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail_config("cannot write file '" + path + "'");
    out << text;
    if (!out) fail_config("short write to '" + path + "'");
}

// Linear-interpolation quantile of a copy of `v` (q in [0, 1]).
double quantile(std::vector<double> v, double q) {
    if (v.empty()) fail_numerical("quantile of an empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

// Deterministic sub-seed for a named stage of a sweep; feeding this to
// apply_measurement_noise (which splits further by trace identity) keeps every
// (instance, level, trace) noise draw independent of the others.
std::uint64_t derive_seed(std::uint64_t master, const std::string& tag, std::uint64_t k) {
    return Rng::stream(master, fnv1a64(tag), k).next_u64();
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

// --- TOML subset ------------------------------------------------------------
//
// Supported: [section] headers, key = value lines, # comments, strings with
// \\ and \" escapes, integers, floats, booleans, and single-line arrays of
// those scalars. That covers every config this tool writes; anything else is
// rejected with the offending line number.

struct TomlValue {
    enum class Kind { string_v, number, boolean, array };
    Kind kind = Kind::number;
    std::string text;  // string contents, or the raw numeric token
    bool flag = false;
    std::vector<TomlValue> items;
    int line = 0;
};

using TomlSection = std::map<std::string, TomlValue>;

struct TomlDoc {
    std::map<std::string, TomlSection> sections;  // "" = root
};

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void toml_fail(int line, const std::string& msg) {
    fail_config("config line " + std::to_string(line) + ": " + msg);
}

// Strip an unquoted # comment (quotes toggle on ", respecting \" escapes).
std::string strip_comment(const std::string& s) {
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
        } else if (c == '"') {
            in_string = true;
        } else if (c == '#') {
            return s.substr(0, i);
        }
    }
    return s;
}

TomlValue parse_scalar(const std::string& token, int line) {
    TomlValue v;
    v.line = line;
    if (token.empty()) toml_fail(line, "empty value");
    if (token.front() == '"') {
        if (token.size() < 2 || token.back() != '"')
            toml_fail(line, "unterminated string");
        v.kind = TomlValue::Kind::string_v;
        for (std::size_t i = 1; i + 1 < token.size(); ++i) {
            char c = token[i];
            if (c == '\\') {
                if (i + 2 >= token.size()) toml_fail(line, "dangling escape in string");
                char e = token[++i];
                if (e == '\\' || e == '"') v.text += e;
                else toml_fail(line, std::string("unsupported escape '\\") + e + "'");
            } else if (c == '"') {
                toml_fail(line, "unescaped quote inside string");
            } else {
                v.text += c;
            }
        }
        return v;
    }
    if (token == "true" || token == "false") {
        v.kind = TomlValue::Kind::boolean;
        v.flag = (token == "true");
        return v;
    }
    // Numeric token: validated lazily by the typed accessors, which know
    // whether an integer or a float is expected.
    v.kind = TomlValue::Kind::number;
    v.text = token;
    std::size_t pos = 0;
    try {
        (void)std::stod(token, &pos);
    } catch (const std::exception&) {
        toml_fail(line, "cannot parse value '" + token + "'");
    }
    if (pos != token.size()) toml_fail(line, "trailing characters in value '" + token + "'");
    return v;
}

// Split a [...] body on top-level commas (quotes shield commas; no nesting).
TomlValue parse_value(const std::string& token, int line) {
    if (token.empty()) toml_fail(line, "missing value");
    if (token.front() != '[') return parse_scalar(token, line);
    if (token.back() != ']') toml_fail(line, "array must open and close on one line");
    TomlValue v;
    v.kind = TomlValue::Kind::array;
    v.line = line;
    const std::string body = trim(token.substr(1, token.size() - 2));
    if (body.empty()) return v;
    std::vector<std::string> parts;
    std::string cur;
    bool in_string = false;
    for (std::size_t i = 0; i < body.size(); ++i) {
        char c = body[i];
        if (in_string) {
            cur += c;
            if (c == '\\' && i + 1 < body.size()) cur += body[++i];
            else if (c == '"') in_string = false;
        } else if (c == '"') {
            cur += c;
            in_string = true;
        } else if (c == ',') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (in_string) toml_fail(line, "unterminated string in array");
    parts.push_back(cur);
    for (const std::string& p : parts) {
        const std::string t = trim(p);
        if (t.empty()) toml_fail(line, "empty array element");
        v.items.push_back(parse_scalar(t, line));
    }
    return v;
}

bool valid_key_name(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'))
            return false;
    return true;
}

TomlDoc toml_parse(const std::string& text) {
    TomlDoc doc;
    doc.sections[""];
    std::string current;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') toml_fail(lineno, "malformed section header");
            const std::string name = trim(line.substr(1, line.size() - 2));
            if (!valid_key_name(name)) toml_fail(lineno, "invalid section name '" + name + "'");
            current = name;
            doc.sections[name];
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) toml_fail(lineno, "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!valid_key_name(key)) toml_fail(lineno, "invalid key '" + key + "'");
        TomlSection& sec = doc.sections[current];
        if (sec.count(key)) {
            const std::string where = current.empty() ? "top level" : "[" + current + "]";
            toml_fail(lineno, "duplicate key '" + key + "' in " + where);
        }
        sec[key] = parse_value(value, lineno);
    }
    return doc;
}

// Strict typed access: every key that exists must be consumed by the schema,
// so typos surface as errors instead of silently keeping a default.
class ConfigReader {
  public:
    explicit ConfigReader(const std::string& text) : doc_(toml_parse(text)) {}

    double get_double(const std::string& sec, const std::string& key, double def) {
        const TomlValue* v = fetch(sec, key);
        return v ? as_double(*v) : def;
    }

    long long get_int(const std::string& sec, const std::string& key, long long def) {
        const TomlValue* v = fetch(sec, key);
        return v ? as_int(*v) : def;
    }

    std::uint64_t get_u64(const std::string& sec, const std::string& key, std::uint64_t def) {
        const TomlValue* v = fetch(sec, key);
        if (!v) return def;
        if (v->kind != TomlValue::Kind::number || v->text.find_first_of(".eE") != std::string::npos ||
            v->text.front() == '-')
            toml_fail(v->line, "expected a non-negative integer for '" + key + "'");
        try {
            return std::stoull(v->text);
        } catch (const std::exception&) {
            toml_fail(v->line, "integer out of range for '" + key + "'");
        }
    }

    bool get_bool(const std::string& sec, const std::string& key, bool def) {
        const TomlValue* v = fetch(sec, key);
        if (!v) return def;
        if (v->kind != TomlValue::Kind::boolean)
            toml_fail(v->line, "expected true/false for '" + key + "'");
        return v->flag;
    }

    std::string get_string(const std::string& sec, const std::string& key, std::string def) {
        const TomlValue* v = fetch(sec, key);
        if (!v) return def;
        if (v->kind != TomlValue::Kind::string_v)
            toml_fail(v->line, "expected a quoted string for '" + key + "'");
        return v->text;
    }

    std::vector<std::string> get_string_array(const std::string& sec, const std::string& key,
                                              std::vector<std::string> def) {
        const TomlValue* v = fetch(sec, key);
        if (!v) return def;
        if (v->kind != TomlValue::Kind::array)
            toml_fail(v->line, "expected an array for '" + key + "'");
        std::vector<std::string> out;
        for (const TomlValue& item : v->items) {
            if (item.kind != TomlValue::Kind::string_v)
                toml_fail(item.line, "expected quoted strings in '" + key + "'");
            out.push_back(item.text);
        }
        return out;
    }

    std::vector<int> get_int_array(const std::string& sec, const std::string& key,
                                   std::vector<int> def) {
        const TomlValue* v = fetch(sec, key);
        if (!v) return def;
        if (v->kind != TomlValue::Kind::array)
            toml_fail(v->line, "expected an array for '" + key + "'");
        std::vector<int> out;
        for (const TomlValue& item : v->items)
            out.push_back(static_cast<int>(as_int(item)));
        return out;
    }

    // Every present key must have been fetched; unknown sections/keys fail.
    void finish() const {
        for (const auto& [sec, keys] : doc_.sections) {
            const std::string where = sec.empty() ? "the top level" : "section [" + sec + "]";
            if (!allowed_sections().count(sec))
                fail_config("config: unknown section [" + sec + "]");
            for (const auto& [key, value] : keys)
                if (!consumed_.count({sec, key}))
                    toml_fail(value.line, "unknown key '" + key + "' in " + where);
        }
    }

  private:
    static const std::set<std::string>& allowed_sections() {
        static const std::set<std::string> s = {"",      "model",   "grid",   "sim",
                                                "fit",   "noise",   "shadows", "figure"};
        return s;
    }

    const TomlValue* fetch(const std::string& sec, const std::string& key) {
        consumed_.insert({sec, key});
        auto s = doc_.sections.find(sec);
        if (s == doc_.sections.end()) return nullptr;
        auto k = s->second.find(key);
        return k == s->second.end() ? nullptr : &k->second;
    }

    static double as_double(const TomlValue& v) {
        if (v.kind != TomlValue::Kind::number) toml_fail(v.line, "expected a number");
        return std::stod(v.text);
    }

    static long long as_int(const TomlValue& v) {
        if (v.kind != TomlValue::Kind::number ||
            v.text.find_first_of(".eE") != std::string::npos)
            toml_fail(v.line, "expected an integer");
        try {
            return std::stoll(v.text);
        } catch (const std::exception&) {
            toml_fail(v.line, "integer out of range");
        }
    }

    TomlDoc doc_;
    std::set<std::pair<std::string, std::string>> consumed_;
};

// --- enum <-> string --------------------------------------------------------

const char* to_string(GridSpacing s) {
    return s == GridSpacing::chebyshev ? "chebyshev" : "uniform";
}

GridSpacing spacing_from_string(const std::string& s) {
    if (s == "chebyshev") return GridSpacing::chebyshev;
    if (s == "uniform") return GridSpacing::uniform;
    fail_config("grid.spacing must be 'chebyshev' or 'uniform', got '" + s + "'");
}

const char* to_string(ModelSection::Kind k) {
    switch (k) {
        case ModelSection::Kind::chip_preset: return "chip_preset";
        case ModelSection::Kind::chip_recipe: return "chip_recipe";
        case ModelSection::Kind::chip_file: return "chip_file";
        case ModelSection::Kind::general_file: return "general_file";
    }
    return "chip_preset";
}

ModelSection::Kind model_kind_from_string(const std::string& s) {
    if (s == "chip_preset") return ModelSection::Kind::chip_preset;
    if (s == "chip_recipe") return ModelSection::Kind::chip_recipe;
    if (s == "chip_file") return ModelSection::Kind::chip_file;
    if (s == "general_file") return ModelSection::Kind::general_file;
    fail_config("model.kind must be chip_preset, chip_recipe, chip_file or general_file, got '" +
                s + "'");
}

const char* to_string(SimBackend b) {
    return b == SimBackend::trajectory ? "trajectory" : "oracle";
}

SimBackend backend_from_string(const std::string& s) {
    if (s == "trajectory") return SimBackend::trajectory;
    if (s == "oracle") return SimBackend::oracle;
    fail_config("backend must be 'trajectory' or 'oracle', got '" + s + "'");
}

const char* to_string(DephasingConvention d) {
    return d == DephasingConvention::calibrated ? "calibrated" : "paper_variance";
}

DephasingConvention dephasing_from_string(const std::string& s) {
    if (s == "calibrated") return DephasingConvention::calibrated;
    if (s == "paper_variance") return DephasingConvention::paper_variance;
    fail_config("sim.dephasing must be 'calibrated' or 'paper_variance', got '" + s + "'");
}

const char* to_string(NoiseSpec::Mode m) {
    switch (m) {
        case NoiseSpec::Mode::none: return "none";
        case NoiseSpec::Mode::gaussian: return "gaussian";
        case NoiseSpec::Mode::shots: return "shots";
    }
    return "none";
}

NoiseSpec::Mode noise_mode_from_string(const std::string& s) {
    if (s == "none") return NoiseSpec::Mode::none;
    if (s == "gaussian") return NoiseSpec::Mode::gaussian;
    if (s == "shots") return NoiseSpec::Mode::shots;
    fail_config("noise.mode must be 'none', 'gaussian' or 'shots', got '" + s + "'");
}

std::string toml_string(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '\\' || c == '"') out += '\\';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace

// --- config object ----------------------------------------------------------

bool ExperimentConfig::has_method(const std::string& name) const {
    return std::find(methods.begin(), methods.end(), name) != methods.end();
}

void ExperimentConfig::validate() const {
    // model
    switch (model.kind) {
        case ModelSection::Kind::chip_preset:
            if (model.n_qubits != 2 && model.n_qubits != 4 && model.n_qubits != 6 &&
                model.n_qubits != 16)
                fail_config("model.n_qubits must be 2, 4, 6 or 16 for chip_preset");
            break;
        case ModelSection::Kind::chip_recipe:
            if (model.recipe.rows < 1 || model.recipe.cols < 1)
                fail_config("model rows/cols must be >= 1");
            if (model.recipe.rows * model.recipe.cols < 2)
                fail_config("a recipe chip needs at least two sites");
            break;
        case ModelSection::Kind::chip_file:
        case ModelSection::Kind::general_file:
            if (model.path.empty()) fail_config("model.path is required for file-backed models");
            break;
    }
    // grid
    if (!(grid.t0 > 0.0))
        fail_config("grid.t0 must be > 0 (the derivative is extrapolated to t = 0)");
    if (!(grid.t_max > grid.t0)) fail_config("grid.t_max must exceed grid.t0");
    if (grid.n_points < 2) fail_config("grid.n_points must be >= 2");
    // fit
    if (fit.degrees_to_try.empty()) fail_config("fit.degrees must not be empty");
    int max_degree = 0;
    for (int d : fit.degrees_to_try) {
        if (d < 1) fail_config("fit.degrees entries must be >= 1");
        max_degree = std::max(max_degree, d);
    }
    if (grid.n_points < max_degree + 1)
        fail_config("grid.n_points must be >= max fit degree + 1 (" +
                    std::to_string(max_degree + 1) + ")");
    if (!(fit.outlier_fraction_budget >= 0.0 && fit.outlier_fraction_budget < 0.5))
        fail_config("fit.outlier_budget must lie in [0, 0.5)");
    if (fit.linf_iterations < 0) fail_config("fit.linf_iterations must be >= 0");
    if (fit.min_points_factor < 1) fail_config("fit.min_points_factor must be >= 1");
    // sim
    if (sim.dt < 0) fail_config("sim.dt must be >= 0 (0 = automatic)");
    if (sim.n_trajectories < 1) fail_config("sim.n_trajectories must be >= 1");
    if (sim.threads < 0) fail_config("sim.threads must be >= 0 (0 = hardware)");
    // noise
    if (noise.mode == NoiseSpec::Mode::gaussian && !(noise.sigma > 0))
        fail_config("noise.sigma must be > 0 in gaussian mode");
    if (noise.mode == NoiseSpec::Mode::shots && noise.shots < 1)
        fail_config("noise.shots must be >= 1 in shots mode");
    // methods
    if (methods.empty()) fail_config("methods must not be empty");
    std::set<std::string> seen;
    for (const std::string& m : methods) {
        if (m != "interpolation" && m != "finite_difference" && m != "shadows")
            fail_config("unknown method '" + m +
                        "' (expected interpolation, finite_difference or shadows)");
        if (!seen.insert(m).second) fail_config("duplicate method '" + m + "'");
    }
    // shadows
    const std::string& sb = shadows.backend;
    if (sb != "identity" && sb != "depolarizing" && sb != "oracle" && sb != "trajectory")
        fail_config("shadows.backend must be identity, depolarizing, oracle or trajectory");
    if (!(shadows.epsilon > 0)) fail_config("shadows.epsilon must be > 0");
    if (!(shadows.delta > 0 && shadows.delta < 1)) fail_config("shadows.delta must lie in (0, 1)");
    if (shadows.time_us < 0) fail_config("shadows.time_us must be >= 0");
    if (!(shadows.depolarize_p >= 0 && shadows.depolarize_p <= 1))
        fail_config("shadows.depolarize_p must lie in [0, 1]");
    if (shadows.weight_cap < 1) fail_config("shadows.weight_cap must be >= 1");
    if (shadows.paulis_a.empty() || shadows.paulis_b.empty())
        fail_config("shadows.paulis_a and shadows.paulis_b must not be empty");
    // figure
    if (figure.instances < 1) fail_config("figure.instances must be >= 1");
    if (output_dir.empty()) fail_config("output_dir must not be empty");
}

ExperimentConfig config_from_toml(const std::string& text) {
    ConfigReader r(text);
    ExperimentConfig cfg;

    cfg.master_seed = r.get_u64("", "master_seed", cfg.master_seed);
    cfg.output_dir = r.get_string("", "output_dir", cfg.output_dir);
    cfg.methods = r.get_string_array("", "methods", cfg.methods);
    cfg.backend = backend_from_string(r.get_string("", "backend", to_string(cfg.backend)));

    cfg.model.kind = model_kind_from_string(r.get_string("model", "kind", to_string(cfg.model.kind)));
    cfg.model.n_qubits = static_cast<int>(r.get_int("model", "n_qubits", cfg.model.n_qubits));
    cfg.model.path = r.get_string("model", "path", cfg.model.path);
    cfg.model.zero_quasistatic =
        r.get_bool("model", "zero_quasistatic", cfg.model.zero_quasistatic);
    ChipRecipe& rec = cfg.model.recipe;
    rec.rows = static_cast<int>(r.get_int("model", "rows", rec.rows));
    rec.cols = static_cast<int>(r.get_int("model", "cols", rec.cols));
    rec.coupling_mean_khz = r.get_double("model", "coupling_mean_khz", rec.coupling_mean_khz);
    rec.coupling_std_khz = r.get_double("model", "coupling_std_khz", rec.coupling_std_khz);
    rec.az_mean_khz = r.get_double("model", "az_mean_khz", rec.az_mean_khz);
    rec.az_std_khz = r.get_double("model", "az_std_khz", rec.az_std_khz);
    rec.t1_mean_us = r.get_double("model", "t1_mean_us", rec.t1_mean_us);
    rec.t1_std_us = r.get_double("model", "t1_std_us", rec.t1_std_us);
    rec.t2_mean_us = r.get_double("model", "t2_mean_us", rec.t2_mean_us);
    rec.t2_std_us = r.get_double("model", "t2_std_us", rec.t2_std_us);
    rec.t2star_mean_us = r.get_double("model", "t2star_mean_us", rec.t2star_mean_us);
    rec.t2star_std_us = r.get_double("model", "t2star_std_us", rec.t2star_std_us);

    cfg.grid.t0 = r.get_double("grid", "t0", cfg.grid.t0);
    cfg.grid.t_max = r.get_double("grid", "t_max", cfg.grid.t_max);
    cfg.grid.n_points = static_cast<int>(r.get_int("grid", "n_points", cfg.grid.n_points));
    cfg.grid.spacing =
        spacing_from_string(r.get_string("grid", "spacing", to_string(cfg.grid.spacing)));

    cfg.sim.dt = r.get_double("sim", "dt", cfg.sim.dt);
    cfg.sim.n_trajectories =
        static_cast<int>(r.get_int("sim", "n_trajectories", cfg.sim.n_trajectories));
    cfg.sim.threads = static_cast<int>(r.get_int("sim", "threads", cfg.sim.threads));
    cfg.sim.dephasing =
        dephasing_from_string(r.get_string("sim", "dephasing", to_string(cfg.sim.dephasing)));

    cfg.fit.degrees_to_try = r.get_int_array("fit", "degrees", cfg.fit.degrees_to_try);
    cfg.fit.outlier_fraction_budget =
        r.get_double("fit", "outlier_budget", cfg.fit.outlier_fraction_budget);
    cfg.fit.linf_iterations =
        static_cast<int>(r.get_int("fit", "linf_iterations", cfg.fit.linf_iterations));
    cfg.fit.min_points_factor =
        static_cast<int>(r.get_int("fit", "min_points_factor", cfg.fit.min_points_factor));

    cfg.noise.mode = noise_mode_from_string(r.get_string("noise", "mode", to_string(cfg.noise.mode)));
    cfg.noise.sigma = r.get_double("noise", "sigma", cfg.noise.sigma);
    cfg.noise.shots = r.get_int("noise", "shots", cfg.noise.shots);

    cfg.shadows.backend = r.get_string("shadows", "backend", cfg.shadows.backend);
    cfg.shadows.epsilon = r.get_double("shadows", "epsilon", cfg.shadows.epsilon);
    cfg.shadows.delta = r.get_double("shadows", "delta", cfg.shadows.delta);
    cfg.shadows.time_us = r.get_double("shadows", "time_us", cfg.shadows.time_us);
    cfg.shadows.depolarize_p = r.get_double("shadows", "depolarize_p", cfg.shadows.depolarize_p);
    cfg.shadows.weight_cap =
        static_cast<int>(r.get_int("shadows", "weight_cap", cfg.shadows.weight_cap));
    cfg.shadows.paulis_a = r.get_string_array("shadows", "paulis_a", cfg.shadows.paulis_a);
    cfg.shadows.paulis_b = r.get_string_array("shadows", "paulis_b", cfg.shadows.paulis_b);

    cfg.figure.instances = static_cast<int>(r.get_int("figure", "instances", cfg.figure.instances));
    cfg.figure.allow_large = r.get_bool("figure", "allow_large", cfg.figure.allow_large);

    r.finish();
    return cfg;
}

std::string config_to_toml(const ExperimentConfig& cfg) {
    std::ostringstream os;
    os << "master_seed = " << cfg.master_seed << "\n";
    os << "output_dir = " << toml_string(cfg.output_dir) << "\n";
    os << "methods = [";
    for (std::size_t i = 0; i < cfg.methods.size(); ++i)
        os << (i ? ", " : "") << toml_string(cfg.methods[i]);
    os << "]\n";
    os << "backend = " << toml_string(to_string(cfg.backend)) << "\n";

    os << "\n[model]\n";
    os << "kind = " << toml_string(to_string(cfg.model.kind)) << "\n";
    switch (cfg.model.kind) {
        case ModelSection::Kind::chip_preset:
            os << "n_qubits = " << cfg.model.n_qubits << "\n";
            break;
        case ModelSection::Kind::chip_recipe: {
            const ChipRecipe& rec = cfg.model.recipe;
            os << "rows = " << rec.rows << "\n";
            os << "cols = " << rec.cols << "\n";
            os << "coupling_mean_khz = " << fmt_double(rec.coupling_mean_khz) << "\n";
            os << "coupling_std_khz = " << fmt_double(rec.coupling_std_khz) << "\n";
            os << "az_mean_khz = " << fmt_double(rec.az_mean_khz) << "\n";
            os << "az_std_khz = " << fmt_double(rec.az_std_khz) << "\n";
            os << "t1_mean_us = " << fmt_double(rec.t1_mean_us) << "\n";
            os << "t1_std_us = " << fmt_double(rec.t1_std_us) << "\n";
            os << "t2_mean_us = " << fmt_double(rec.t2_mean_us) << "\n";
            os << "t2_std_us = " << fmt_double(rec.t2_std_us) << "\n";
            os << "t2star_mean_us = " << fmt_double(rec.t2star_mean_us) << "\n";
            os << "t2star_std_us = " << fmt_double(rec.t2star_std_us) << "\n";
            break;
        }
        case ModelSection::Kind::chip_file:
        case ModelSection::Kind::general_file:
            os << "path = " << toml_string(cfg.model.path) << "\n";
            break;
    }
    if (cfg.model.kind != ModelSection::Kind::general_file)
        os << "zero_quasistatic = " << (cfg.model.zero_quasistatic ? "true" : "false") << "\n";

    os << "\n[grid]\n";
    os << "t0 = " << fmt_double(cfg.grid.t0) << "\n";
    os << "t_max = " << fmt_double(cfg.grid.t_max) << "\n";
    os << "n_points = " << cfg.grid.n_points << "\n";
    os << "spacing = " << toml_string(to_string(cfg.grid.spacing)) << "\n";

    os << "\n[sim]\n";
    os << "dt = " << fmt_double(cfg.sim.dt) << "\n";
    os << "n_trajectories = " << cfg.sim.n_trajectories << "\n";
    os << "threads = " << cfg.sim.threads << "\n";
    os << "dephasing = " << toml_string(to_string(cfg.sim.dephasing)) << "\n";

    os << "\n[fit]\n";
    os << "degrees = [";
    for (std::size_t i = 0; i < cfg.fit.degrees_to_try.size(); ++i)
        os << (i ? ", " : "") << cfg.fit.degrees_to_try[i];
    os << "]\n";
    os << "outlier_budget = " << fmt_double(cfg.fit.outlier_fraction_budget) << "\n";
    os << "linf_iterations = " << cfg.fit.linf_iterations << "\n";
    os << "min_points_factor = " << cfg.fit.min_points_factor << "\n";

    os << "\n[noise]\n";
    os << "mode = " << toml_string(to_string(cfg.noise.mode)) << "\n";
    if (cfg.noise.mode == NoiseSpec::Mode::gaussian)
        os << "sigma = " << fmt_double(cfg.noise.sigma) << "\n";
    if (cfg.noise.mode == NoiseSpec::Mode::shots) os << "shots = " << cfg.noise.shots << "\n";

    os << "\n[shadows]\n";
    os << "backend = " << toml_string(cfg.shadows.backend) << "\n";
    os << "epsilon = " << fmt_double(cfg.shadows.epsilon) << "\n";
    os << "delta = " << fmt_double(cfg.shadows.delta) << "\n";
    os << "time_us = " << fmt_double(cfg.shadows.time_us) << "\n";
    if (cfg.shadows.backend == "depolarizing")
        os << "depolarize_p = " << fmt_double(cfg.shadows.depolarize_p) << "\n";
    os << "weight_cap = " << cfg.shadows.weight_cap << "\n";
    os << "paulis_a = [";
    for (std::size_t i = 0; i < cfg.shadows.paulis_a.size(); ++i)
        os << (i ? ", " : "") << toml_string(cfg.shadows.paulis_a[i]);
    os << "]\n";
    os << "paulis_b = [";
    for (std::size_t i = 0; i < cfg.shadows.paulis_b.size(); ++i)
        os << (i ? ", " : "") << toml_string(cfg.shadows.paulis_b[i]);
    os << "]\n";

    os << "\n[figure]\n";
    os << "instances = " << cfg.figure.instances << "\n";
    os << "allow_large = " << (cfg.figure.allow_large ? "true" : "false") << "\n";
    return os.str();
}

ExperimentConfig load_config(const std::string& path) {
    return config_from_toml(read_text_file(path));
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
    write_text_file(path, config_to_toml(cfg));
}

// --- derived pieces ---------------------------------------------------------

int model_n_qubits(const ExperimentConfig& cfg) {
    switch (cfg.model.kind) {
        case ModelSection::Kind::chip_preset: return cfg.model.n_qubits;
        case ModelSection::Kind::chip_recipe:
            return cfg.model.recipe.rows * cfg.model.recipe.cols;
        case ModelSection::Kind::chip_file: return load_chip_file(cfg.model.path).n_qubits;
        case ModelSection::Kind::general_file:
            return load_general_file(cfg.model.path).n_qubits;
    }
    fail_config("unreachable model kind");
}

ChipModel materialize_chip(const ExperimentConfig& cfg) {
    ChipModel chip;
    switch (cfg.model.kind) {
        case ModelSection::Kind::chip_preset:
            chip = chip_preset(cfg.model.n_qubits);
            break;
        case ModelSection::Kind::chip_recipe: {
            Rng rng = Rng::stream(cfg.master_seed, fnv1a64("sample-model"), 0);
            chip = sample_chip(cfg.model.recipe, rng);
            break;
        }
        case ModelSection::Kind::chip_file:
            chip = load_chip_file(cfg.model.path);
            break;
        case ModelSection::Kind::general_file:
            fail_config("model kind 'general_file' has no chip form (trajectory simulation "
                        "needs a chip model; use backend = \"oracle\")");
    }
    if (cfg.model.zero_quasistatic) std::fill(chip.t2star.begin(), chip.t2star.end(), 0.0);
    return chip;
}

GeneralModel materialize_general(const ExperimentConfig& cfg, bool ignore_quasistatic) {
    if (cfg.model.kind == ModelSection::Kind::general_file)
        return load_general_file(cfg.model.path);
    return chip_to_general(materialize_chip(cfg), ignore_quasistatic);
}

namespace {

// Union of per-edge plans with first-wins target deduplication: a site shared
// by several edges keeps the rules contributed by its first edge (any edge's
// versions are valid identities, and duplicates would make recovery ambiguous).
std::vector<IsolationRule> merge_plans(std::vector<std::vector<IsolationRule>> blocks) {
    std::vector<IsolationRule> plan;
    std::set<ParamKey> seen;
    for (auto& block : blocks)
        for (IsolationRule& rule : block)
            if (seen.insert(rule.target).second) plan.push_back(std::move(rule));
    return plan;
}

std::vector<IsolationRule> plan_for_chip(const ChipModel& chip) {
    std::vector<std::vector<IsolationRule>> blocks;
    for (const Edge& e : chip.edges) blocks.push_back(chip_plan(chip.n_qubits, e.i, e.j));
    return merge_plans(std::move(blocks));
}

}  // namespace

std::vector<IsolationRule> experiment_plan(const ExperimentConfig& cfg) {
    if (cfg.model.kind == ModelSection::Kind::general_file) {
        const GeneralModel gm = load_general_file(cfg.model.path);
        std::set<std::pair<int, int>> pairs;
        for (const HamTerm& t : gm.terms)
            if (t.word.weight() == 2) {
                auto it = t.word.factors.begin();
                const int i = it->first;
                const int j = std::next(it)->first;
                pairs.insert(std::minmax(i, j));
            }
        std::vector<std::vector<IsolationRule>> blocks;
        for (const auto& [i, j] : pairs) blocks.push_back(full_plan(gm.n_qubits, i, j));
        return merge_plans(std::move(blocks));
    }
    return plan_for_chip(materialize_chip(cfg));
}

std::vector<double> grid_times(const GridConfig& grid) {
    const double a = grid.t0, b = grid.t_max;
    const int m = grid.n_points;
    std::vector<double> times;
    times.reserve(static_cast<std::size_t>(m));
    if (grid.spacing == GridSpacing::chebyshev) {
        // Chebyshev nodes (endpoints excluded), emitted ascending. They are
        // equidistributed over the arccos partitions the robust fit weighs.
        for (int k = m - 1; k >= 0; --k) {
            const double x = std::cos(PI * (2.0 * k + 1.0) / (2.0 * m));
            times.push_back(0.5 * (a + b) + 0.5 * (b - a) * x);
        }
    } else {
        for (int k = 0; k < m; ++k)
            times.push_back(a + (b - a) * static_cast<double>(k) / (m - 1));
    }
    return times;
}

std::string trace_filename(const PauliString& obs, const ProductState& state) {
    auto sanitize = [](const std::string& s) {
        std::string out;
        for (char c : s) {
            if (c == ' ') continue;
            if (c == '+') out += 'p';
            else if (c == '-') out += 'm';
            else out += c;
        }
        return out;
    };
    return "trace-" + sanitize(obs.str()) + "-" + sanitize(state.str()) + ".csv";
}

namespace {

constexpr const char* TRACE_HEADER =
    "observable,initial_state,time_us,mean,std_error,shots_or_sigma,seed";

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_csv_double(const std::string& token, const std::string& path) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(token, &pos);
        if (pos != token.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        fail_config("malformed number '" + token + "' in trace file '" + path + "'");
    }
}

}  // namespace

void write_trace_csv(const std::string& path, const TimeTrace& trace) {
    if (trace.times.size() != trace.mean.size() || trace.times.size() != trace.std_error.size())
        fail_config("trace columns have mismatched lengths");
    std::ostringstream os;
    os << TRACE_HEADER << "\n";
    for (std::size_t k = 0; k < trace.times.size(); ++k) {
        os << trace.observable << "," << trace.initial_state << "," << fmt_double(trace.times[k])
           << "," << fmt_double(trace.mean[k]) << "," << fmt_double(trace.std_error[k]) << ","
           << fmt_double(trace.shots_or_sigma) << "," << trace.seed << "\n";
    }
    write_text_file(path, os.str());
}

TimeTrace read_trace_csv(const std::string& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    if (!std::getline(in, line) || trim(line) != TRACE_HEADER)
        fail_config("trace file '" + path + "' is missing the expected header");
    TimeTrace tr;
    bool first = true;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const std::vector<std::string> f = split_csv_row(line);
        if (f.size() != 7)
            fail_config("trace file '" + path + "' has a row with " +
                        std::to_string(f.size()) + " fields (expected 7)");
        if (first) {
            tr.observable = f[0];
            tr.initial_state = f[1];
            tr.shots_or_sigma = parse_csv_double(f[5], path);
            try {
                tr.seed = std::stoull(f[6]);
            } catch (const std::exception&) {
                fail_config("malformed seed '" + f[6] + "' in trace file '" + path + "'");
            }
            first = false;
        } else if (f[0] != tr.observable || f[1] != tr.initial_state) {
            fail_config("trace file '" + path + "' mixes observables or states");
        }
        tr.times.push_back(parse_csv_double(f[2], path));
        tr.mean.push_back(parse_csv_double(f[3], path));
        tr.std_error.push_back(parse_csv_double(f[4], path));
    }
    if (tr.times.empty()) fail_config("trace file '" + path + "' has no samples");
    return tr;
}

// --- cmd_simulate -----------------------------------------------------------

namespace {

double oracle_dt(const ExperimentConfig& cfg) {
    return cfg.sim.dt > 0 ? cfg.sim.dt : cfg.grid.t_max / 2000.0;
}

// Pairs grouped by initial state in first-use order, so one trajectory
// ensemble serves every observable measured on that state.
struct StateGroup {
    ProductState state;
    std::vector<PauliString> observables;
};

std::vector<StateGroup> group_by_state(
    const std::vector<std::pair<PauliString, ProductState>>& pairs) {
    std::vector<StateGroup> groups;
    std::map<std::string, std::size_t> index;
    for (const auto& [obs, state] : pairs) {
        auto [it, inserted] = index.try_emplace(state.str(), groups.size());
        if (inserted) groups.push_back(StateGroup{state, {}});
        groups[it->second].observables.push_back(obs);
    }
    return groups;
}

}  // namespace

void cmd_simulate(const ExperimentConfig& cfg) {
    cfg.validate();
    fs::create_directories(cfg.output_dir);
    const std::vector<IsolationRule> plan = experiment_plan(cfg);
    write_text_file((fs::path(cfg.output_dir) / "plan.txt").string(), plan_table(plan));
    const auto pairs = required_pairs(plan);
    if (pairs.empty()) {
        std::cout << "simulate: the model has no two-site couplings; wrote plan.txt only\n";
        return;
    }
    const std::vector<double> times = grid_times(cfg.grid);
    const std::vector<StateGroup> groups = group_by_state(pairs);

    std::vector<std::pair<std::string, TimeTrace>> outputs;  // (filename, trace)
    if (cfg.backend == SimBackend::trajectory) {
        const ChipModel chip = materialize_chip(cfg);
        SimConfig sim = cfg.sim;
        sim.master_seed = cfg.master_seed;
        for (const StateGroup& g : groups) {
            std::vector<TimeTrace> traces =
                simulate_traces(chip, g.state, g.observables, times, sim);
            for (std::size_t k = 0; k < traces.size(); ++k)
                outputs.emplace_back(trace_filename(g.observables[k], g.state),
                                     std::move(traces[k]));
        }
    } else {
        if (cfg.model.kind != ModelSection::Kind::general_file &&
            materialize_chip(cfg).has_quasistatic())
            fail_config("simulate: the oracle backend integrates the Markovian generator and "
                        "cannot represent quasi-static dephasing (finite t2star); set "
                        "model.zero_quasistatic = true or use the trajectory backend");
        const GeneralModel gm = materialize_general(cfg);
        const DenseOracle oracle(gm);
        const double dt = oracle_dt(cfg);
        for (const StateGroup& g : groups) {
            for (const PauliString& obs : g.observables) {
                TimeTrace tr;
                tr.observable = obs.str();
                tr.initial_state = g.state.str();
                tr.times = times;
                tr.mean = oracle.trace_curve(g.state, obs, times, dt);
                tr.std_error.assign(times.size(), 0.0);
                tr.seed = cfg.master_seed;
                outputs.emplace_back(trace_filename(obs, g.state), std::move(tr));
            }
        }
    }
    for (auto& [name, trace] : outputs) {
        apply_measurement_noise(trace, cfg.noise, cfg.master_seed);
        write_trace_csv((fs::path(cfg.output_dir) / name).string(), trace);
    }
    std::cout << "simulate: wrote " << outputs.size() << " trace files and plan.txt to "
              << cfg.output_dir << "\n";
}

// --- cmd_recover ------------------------------------------------------------

namespace {

// Per-sample noise scale for the derivative error budget: the recorded
// Gaussian sigma when one was applied, otherwise the mean standard error.
double sigma_estimate(const TimeTrace& tr) {
    if (tr.shots_or_sigma > 0 && tr.shots_or_sigma < 1) return tr.shots_or_sigma;
    double sum = 0.0;
    for (double s : tr.std_error) sum += s;
    return tr.std_error.empty() ? 0.0 : sum / static_cast<double>(tr.std_error.size());
}

}  // namespace

void cmd_recover(const ExperimentConfig& cfg) {
    cfg.validate();
    const bool want_interp = cfg.has_method("interpolation");
    const bool want_fd = cfg.has_method("finite_difference");
    if (!want_interp && !want_fd)
        fail_config("recover: methods must include interpolation and/or finite_difference");
    fs::create_directories(cfg.output_dir);

    const std::vector<IsolationRule> plan = experiment_plan(cfg);
    const auto pairs = required_pairs(plan);
    const int n = model_n_qubits(cfg);
    // Planted truth of the Markovian generator; quasi-static scatter has no
    // single-derivative parameter and is exempt from the comparison.
    const std::map<ParamKey, double> truth =
        param_truth(materialize_general(cfg, /*ignore_quasistatic=*/true));

    DerivativeTable interp_table, fd_table;
    nlohmann::ordered_json fits = nlohmann::ordered_json::array();
    for (const auto& [obs, state] : pairs) {
        const std::string path = (fs::path(cfg.output_dir) / trace_filename(obs, state)).string();
        if (!fs::exists(path))
            fail_config("recover: missing trace file '" + path + "' (run simulate first)");
        const TimeTrace tr = read_trace_csv(path);
        if (tr.observable != obs.str() || tr.initial_state != state.str())
            fail_config("recover: trace file '" + path + "' holds (" + tr.observable + ", " +
                        tr.initial_state + ") but the plan expects (" + obs.str() + ", " +
                        state.str() + ")");
        if (want_fd) fd_table.set(obs, state, finite_difference_derivative(tr, n));
        if (want_interp) {
            std::vector<Sample> samples(tr.times.size());
            for (std::size_t k = 0; k < tr.times.size(); ++k)
                samples[k] = Sample{tr.times[k], tr.mean[k]};
            const double a = tr.times.front(), b = tr.times.back();
            Rng cv_rng = Rng::stream(cfg.master_seed, fnv1a64("cv-folds"),
                                     fnv1a64(tr.observable + "|" + tr.initial_state));
            const FitSelection sel = robust_fit_auto(samples, cfg.fit, a, b, cv_rng);
            const double deriv = derivative_at_zero(sel.fit);
            interp_table.set(obs, state, deriv);

            const double sigma = sigma_estimate(tr);
            nlohmann::ordered_json entry;
            entry["observable"] = tr.observable;
            entry["initial_state"] = tr.initial_state;
            entry["degree"] = sel.fit.degree;
            entry["coefficients"] = sel.fit.coefficients;
            entry["domain"] = {a, b};
            entry["residual_sup"] = sel.fit.residual_sup;
            entry["derivative_at_zero"] = deriv;
            entry["noise_sigma"] = sigma;
            entry["derivative_error_budget"] =
                derivative_error_budget(a, b, sel.fit.degree, sigma);
            nlohmann::ordered_json scores = nlohmann::ordered_json::array();
            for (const auto& [deg, score] : sel.cv_scores) scores.push_back({deg, score});
            entry["cv_scores"] = scores;
            fits.push_back(std::move(entry));
        }
    }

    RecoveryReport combined;
    double interp_max = 0.0, fd_max = 0.0;
    if (want_interp) {
        RecoveryReport rep = recover(plan, interp_table, truth, "interpolation");
        interp_max = rep.max_abs_error();
        for (ParamEstimate& row : rep.rows) combined.rows.push_back(std::move(row));
    }
    if (want_fd) {
        RecoveryReport rep = recover(plan, fd_table, truth, "finite_difference");
        fd_max = rep.max_abs_error();
        for (ParamEstimate& row : rep.rows) combined.rows.push_back(std::move(row));
    }
    write_text_file((fs::path(cfg.output_dir) / "recovery.csv").string(), combined.to_csv());
    if (want_interp)
        write_text_file((fs::path(cfg.output_dir) / "fits.json").string(), fits.dump(2) + "\n");

    std::cout << "recover: " << combined.rows.size() << " parameter rows -> recovery.csv";
    if (want_interp) std::cout << " (interp max |err| " << fmt_double(interp_max) << ")";
    if (want_fd) std::cout << " (fd max |err| " << fmt_double(fd_max) << ")";
    std::cout << "\n";
}

// --- cmd_shadows ------------------------------------------------------------

void cmd_shadows(const ExperimentConfig& cfg) {
    cfg.validate();
    fs::create_directories(cfg.output_dir);
    const int n = model_n_qubits(cfg);
    std::vector<PauliString> paulis_a, paulis_b;
    for (const std::string& s : cfg.shadows.paulis_a) paulis_a.push_back(parse_pauli(s, n));
    for (const std::string& s : cfg.shadows.paulis_b) paulis_b.push_back(parse_pauli(s, n));

    Rng rng = Rng::stream(cfg.master_seed, fnv1a64("shadow-rounds"), 0);
    ShadowOptions opt;
    opt.weight_cap = cfg.shadows.weight_cap;

    std::vector<OverlapEstimate> estimates;
    const std::string& backend = cfg.shadows.backend;
    if (backend == "identity") {
        IdentityChannel ch(n);
        estimates = estimate_overlaps(ch, paulis_a, paulis_b, cfg.shadows.epsilon,
                                      cfg.shadows.delta, rng, opt);
    } else if (backend == "depolarizing") {
        DepolarizingChannel ch(n, cfg.shadows.depolarize_p);
        estimates = estimate_overlaps(ch, paulis_a, paulis_b, cfg.shadows.epsilon,
                                      cfg.shadows.delta, rng, opt);
    } else if (backend == "oracle") {
        const GeneralModel gm = materialize_general(cfg, /*ignore_quasistatic=*/true);
        const DenseOracle oracle(gm);
        const double dt = cfg.sim.dt > 0
                              ? cfg.sim.dt
                              : (cfg.shadows.time_us > 0 ? cfg.shadows.time_us / 400.0 : 1e-3);
        OracleChannel ch(oracle, cfg.shadows.time_us, dt);
        estimates = estimate_overlaps(ch, paulis_a, paulis_b, cfg.shadows.epsilon,
                                      cfg.shadows.delta, rng, opt);
    } else {  // trajectory (validated)
        const ChipModel chip = materialize_chip(cfg);
        SimConfig sim = cfg.sim;
        sim.master_seed = cfg.master_seed;
        TrajectoryChannel ch(chip, cfg.shadows.time_us, sim);
        estimates = estimate_overlaps(ch, paulis_a, paulis_b, cfg.shadows.epsilon,
                                      cfg.shadows.delta, rng, opt);
    }

    write_text_file((fs::path(cfg.output_dir) / "shadows.csv").string(),
                    overlaps_to_csv(estimates));
    const long long rounds = estimates.empty() ? 0 : estimates.front().samples_used;
    std::cout << "shadows: wrote " << estimates.size() << " overlap estimates (" << rounds
              << " rounds) to shadows.csv\n";
}

// --- cmd_figure -------------------------------------------------------------

namespace {

// Fixed design parameters of the sweeps. The fit degree matches the d = 5
// window recipe that fixes [t0, t_max] = time_scale * [1/25, 2 + 1/25] and
// 36 Chebyshev nodes; the RK4 step count keeps the integrator error orders of
// magnitude below the smallest injected noise (~1e-12 vs sigma >= 1e-9).
constexpr int FIG_DEGREE = 5;
constexpr int FIG_ORACLE_STEPS = 300;
constexpr double FIG3_TIME_SCALE = 0.75;  // window [0.03, 1.53] us
constexpr double FIG4_TIME_SCALE = 2.5;   // window [0.1, 5.1] us
constexpr double FIG4_SIGMA = 1e-7;
constexpr double FIG2_TOTAL_BUDGET = 1e7;  // t0 * shots; sigma(t0) = sqrt(t0/budget)

const std::vector<double>& fig3_sigmas() {
    static const std::vector<double> v = {1e-9, 1e-8, 1e-7, 1e-6, 1e-5};
    return v;
}

const std::vector<double>& fig2_t0s() {
    static const std::vector<double> v = {0.003, 0.01, 0.03, 0.1, 0.3, 1.0};
    return v;
}

struct FigureProbe {
    std::vector<IsolationRule> plan;
    std::vector<ParamKey> targets;  // reported subset of the plan's targets
};

// The single-rule probe for the exchange coupling a_xx of one edge.
FigureProbe axx_probe(int n, int i, int j) {
    FigureProbe p;
    const ParamKey target = pk_two(i, Axis::X, j, Axis::X);
    for (const IsolationRule& r : plan_two_qubit(n, i, j))
        if (r.target == target) p.plan.push_back(r);
    p.targets = {target};
    return p;
}

// Every planted chip Hamiltonian parameter of the merged plan: the exchange
// coupling a_xx per edge and the z field a_z per site. (The a_zz and W rules
// stay in the plan as inputs to the field rules but are not reported.)
FigureProbe chip_parameter_probe(const ChipModel& chip) {
    FigureProbe p;
    p.plan = plan_for_chip(chip);
    for (const IsolationRule& r : p.plan) {
        const ParamKey& k = r.target;
        const bool exchange =
            k.kind == ParamKind::TwoQubitA && k.axis_i == Axis::X && k.axis_j == Axis::X;
        const bool field = k.kind == ParamKind::SingleA && k.axis_i == Axis::Z;
        if (exchange || field) p.targets.push_back(k);
    }
    return p;
}

// One model instance of a sweep: base traces for every pair the probe needs
// (exact oracle curves, or trajectory-ensemble means for registers above the
// dense cap), plus per-noise-draw fit/recover evaluation.
class FigureInstance {
  public:
    static FigureInstance from_oracle(const GeneralModel& gm, FigureProbe probe,
                                      const GridConfig& grid) {
        FigureInstance fi(gm, std::move(probe), grid);
        fi.oracle_ = std::make_unique<DenseOracle>(gm);
        const double dt = grid.t_max / FIG_ORACLE_STEPS;
        for (const auto& [obs, state] : fi.pairs_) {
            TimeTrace tr;
            tr.observable = obs.str();
            tr.initial_state = state.str();
            tr.times = fi.times_;
            tr.mean = fi.oracle_->trace_curve(state, obs, fi.times_, dt);
            tr.std_error.assign(fi.times_.size(), 0.0);
            fi.base_.push_back(std::move(tr));
        }
        return fi;
    }

    static FigureInstance from_trajectories(const ChipModel& chip, const GeneralModel& gm_truth,
                                            FigureProbe probe, const GridConfig& grid,
                                            SimConfig sim) {
        FigureInstance fi(gm_truth, std::move(probe), grid);
        const std::vector<StateGroup> groups = group_by_state(fi.pairs_);
        std::map<std::pair<std::string, std::string>, TimeTrace> by_key;
        for (const StateGroup& g : groups) {
            std::vector<TimeTrace> traces =
                simulate_traces(chip, g.state, g.observables, fi.times_, sim);
            for (std::size_t k = 0; k < traces.size(); ++k)
                by_key[{traces[k].observable, traces[k].initial_state}] = std::move(traces[k]);
        }
        for (const auto& [obs, state] : fi.pairs_)
            fi.base_.push_back(by_key.at({obs.str(), state.str()}));
        return fi;
    }

    // Leading-order forward-difference Taylor bias, propagated through the
    // recovery rules: recover from d0 + (t_first/2) d2 and report the error.
    std::map<ParamKey, double> bias_prediction() const {
        if (!oracle_) fail_numerical("bias prediction needs the dense-oracle path");
        DerivativeTable table;
        for (const auto& [obs, state] : pairs_) {
            const double d0 = oracle_->derivative(state, obs);
            const Eigen::MatrixXcd rho = oracle_->product_density(state);
            const double d2 = oracle_->expectation(oracle_->rhs(oracle_->rhs(rho)), obs);
            table.set(obs, state, d0 + 0.5 * times_.front() * d2);
        }
        const RecoveryReport rep = recover(probe_.plan, table, truth_, "finite_difference");
        std::map<ParamKey, double> out;
        for (const ParamKey& key : probe_.targets) out[key] = rep.find(key)->abs_error();
        return out;
    }

    // Draw Gaussian noise of scale `sigma` on the base traces (seeded by
    // noise_seed), fit, recover, and record per-target absolute errors.
    void evaluate(double sigma, std::uint64_t noise_seed, const FitConfig& fit_cfg,
                  std::map<ParamKey, std::vector<double>>* interp_errs,
                  std::map<ParamKey, std::vector<double>>* fd_errs) const {
        DerivativeTable interp_table, fd_table;
        NoiseSpec spec;
        spec.mode = NoiseSpec::Mode::gaussian;
        spec.sigma = sigma;
        for (std::size_t idx = 0; idx < pairs_.size(); ++idx) {
            TimeTrace tr = base_[idx];
            if (sigma > 0) apply_measurement_noise(tr, spec, noise_seed);
            const auto& [obs, state] = pairs_[idx];
            if (fd_errs) fd_table.set(obs, state, finite_difference_derivative(tr, n_));
            if (interp_errs) {
                std::vector<Sample> samples(tr.times.size());
                for (std::size_t k = 0; k < tr.times.size(); ++k)
                    samples[k] = Sample{tr.times[k], tr.mean[k]};
                const PolynomialFit fit = robust_fit(samples, FIG_DEGREE, fit_cfg,
                                                     tr.times.front(), tr.times.back());
                interp_table.set(obs, state, derivative_at_zero(fit));
            }
        }
        if (interp_errs) {
            const RecoveryReport rep = recover(probe_.plan, interp_table, truth_, "interpolation");
            for (const ParamKey& key : probe_.targets)
                (*interp_errs)[key].push_back(rep.find(key)->abs_error());
        }
        if (fd_errs) {
            const RecoveryReport rep = recover(probe_.plan, fd_table, truth_, "finite_difference");
            for (const ParamKey& key : probe_.targets)
                (*fd_errs)[key].push_back(rep.find(key)->abs_error());
        }
    }

    bool has_oracle() const { return oracle_ != nullptr; }

  private:
    FigureInstance(const GeneralModel& gm, FigureProbe probe, const GridConfig& grid)
        : probe_(std::move(probe)),
          n_(gm.n_qubits),
          times_(grid_times(grid)),
          pairs_(required_pairs(probe_.plan)),
          truth_(param_truth(gm)) {}

    FigureProbe probe_;
    int n_ = 0;
    std::vector<double> times_;
    std::vector<std::pair<PauliString, ProductState>> pairs_;
    std::map<ParamKey, double> truth_;
    std::vector<TimeTrace> base_;
    std::unique_ptr<DenseOracle> oracle_;
};

// Recipe used when the configured model is not itself a recipe: the smallest
// grid the sweeps are calibrated for.
ChipRecipe figure_recipe(const ExperimentConfig& cfg) {
    if (cfg.model.kind == ModelSection::Kind::chip_recipe) return cfg.model.recipe;
    ChipRecipe rec;
    rec.rows = 2;
    rec.cols = 2;
    return rec;
}

// Sample the instance's device. T2* scatter is zeroed in every figure path:
// the sweeps score recovery against the Markovian generator.
ChipModel figure_chip_instance(const ChipRecipe& recipe, std::uint64_t master, int instance) {
    Rng rng = Rng::stream(master, fnv1a64("figure-model"), static_cast<std::uint64_t>(instance));
    ChipModel chip = sample_chip(recipe, rng);
    std::fill(chip.t2star.begin(), chip.t2star.end(), 0.0);
    return chip;
}

GridConfig figure_grid(double time_scale) {
    // The window shape depends only on the degree and the time scale; the
    // target-accuracy argument is validated but does not enter the formula.
    const TimeGrid tg = choose_time_grid(1e-6, FIG_DEGREE, time_scale);
    return GridConfig{tg.t0, tg.t_max, tg.m_points, GridSpacing::chebyshev};
}

double nan_value() { return std::numeric_limits<double>::quiet_NaN(); }

// Shared core of fig2/fig3: the exchange coupling of the first edge of a
// sampled device, estimated per (level, instance). `levels` carries one
// (sigma, grid) pair per sweep level; when the abscissa is t0 (fig2) the
// injected sigma is reported in a second column, for fig3 the abscissa *is*
// sigma and the column would be redundant.
struct SweepLevel {
    double x = 0.0;      // reported abscissa (sigma for fig3, t0 for fig2)
    double sigma = 0.0;  // injected Gaussian noise scale
    GridConfig grid;
};

FigureTable run_edge_sweep(const ExperimentConfig& cfg, const std::vector<SweepLevel>& levels,
                           const std::string& x_name, bool report_sigma) {
    const ChipRecipe recipe = figure_recipe(cfg);
    const int n = recipe.rows * recipe.cols;
    const bool large = n > DenseOracle::MAX_QUBITS;
    if (large && !cfg.figure.allow_large)
        fail_config("figure: " + std::to_string(n) +
                    " qubits exceeds the dense-oracle cap (6); set figure.allow_large = true "
                    "to run the (slow) trajectory-ensemble path");
    const int instances = cfg.figure.instances;

    std::vector<std::vector<double>> interp(levels.size()), fd(levels.size()),
        bias(levels.size());
    for (int inst = 0; inst < instances; ++inst) {
        const ChipModel chip = figure_chip_instance(recipe, cfg.master_seed, inst);
        const Edge edge = chip.edges.front();
        const FigureProbe probe = axx_probe(chip.n_qubits, edge.i, edge.j);
        const ParamKey target = probe.targets.front();
        const GeneralModel gm = chip_to_general(chip);

        // Levels sharing a grid reuse one set of base traces (and one bias
        // prediction) per instance.
        std::map<std::string, std::pair<FigureInstance, double>> cache;
        for (std::size_t lv = 0; lv < levels.size(); ++lv) {
            const GridConfig& grid = levels[lv].grid;
            const std::string grid_key = fmt_double(grid.t0) + "/" + fmt_double(grid.t_max);
            auto it = cache.find(grid_key);
            if (it == cache.end()) {
                FigureInstance fi =
                    large ? [&] {
                        SimConfig sim = cfg.sim;
                        sim.master_seed = derive_seed(cfg.master_seed, "figure-traj",
                                                     static_cast<std::uint64_t>(inst));
                        return FigureInstance::from_trajectories(chip, gm, probe, grid, sim);
                    }()
                          : FigureInstance::from_oracle(gm, probe, grid);
                const double b = fi.has_oracle() ? fi.bias_prediction().at(target) : nan_value();
                it = cache.emplace(grid_key, std::make_pair(std::move(fi), b)).first;
            }
            const FigureInstance& fi = it->second.first;
            const std::uint64_t noise_seed =
                derive_seed(cfg.master_seed, "figure-noise",
                            static_cast<std::uint64_t>(inst) * 64 + lv);
            std::map<ParamKey, std::vector<double>> ie, fe;
            fi.evaluate(levels[lv].sigma, noise_seed, cfg.fit, &ie, &fe);
            interp[lv].push_back(ie.at(target).front());
            fd[lv].push_back(fe.at(target).front());
            bias[lv].push_back(it->second.second);
        }
    }

    FigureTable table;
    table.columns = {x_name,      "interp_median", "interp_q25", "interp_q75",
                     "fd_median", "fd_q25",        "fd_q75",     "fd_bias_median"};
    if (report_sigma) table.columns.insert(table.columns.begin() + 1, "sigma");
    for (std::size_t lv = 0; lv < levels.size(); ++lv) {
        const double bias_med =
            std::isnan(bias[lv].front()) ? nan_value() : quantile(bias[lv], 0.5);
        std::vector<double> row = {levels[lv].x};
        if (report_sigma) row.push_back(levels[lv].sigma);
        for (double v : {quantile(interp[lv], 0.5), quantile(interp[lv], 0.25),
                         quantile(interp[lv], 0.75), quantile(fd[lv], 0.5),
                         quantile(fd[lv], 0.25), quantile(fd[lv], 0.75), bias_med})
            row.push_back(v);
        table.rows.push_back(std::move(row));
    }
    return table;
}

FigureTable run_fig3(const ExperimentConfig& cfg) {
    std::vector<SweepLevel> levels;
    const GridConfig grid = figure_grid(FIG3_TIME_SCALE);
    for (double sigma : fig3_sigmas()) levels.push_back(SweepLevel{sigma, sigma, grid});
    return run_edge_sweep(cfg, levels, "sigma", /*report_sigma=*/false);
}

FigureTable run_fig2(const ExperimentConfig& cfg) {
    std::vector<SweepLevel> levels;
    for (double t0 : fig2_t0s()) {
        // time_scale ts maps to t0 = ts/d^2, so ts = t0 d^2; the noise follows
        // the fixed total sampling budget t0 * shots = FIG2_TOTAL_BUDGET.
        const double sigma = std::sqrt(t0 / FIG2_TOTAL_BUDGET);
        levels.push_back(SweepLevel{t0, sigma, figure_grid(t0 * FIG_DEGREE * FIG_DEGREE)});
    }
    return run_edge_sweep(cfg, levels, "t0_us", /*report_sigma=*/true);
}

FigureTable run_fig4(const ExperimentConfig& cfg) {
    ChipModel chip = chip_preset(4);
    std::fill(chip.t2star.begin(), chip.t2star.end(), 0.0);
    const FigureProbe probe = chip_parameter_probe(chip);
    const GeneralModel gm = chip_to_general(chip);
    const GridConfig grid = figure_grid(FIG4_TIME_SCALE);
    const FigureInstance fi = FigureInstance::from_oracle(gm, probe, grid);
    const std::map<ParamKey, double> bias = fi.bias_prediction();

    std::map<ParamKey, std::vector<double>> interp_errs, fd_errs;
    for (int inst = 0; inst < cfg.figure.instances; ++inst) {
        const std::uint64_t noise_seed =
            derive_seed(cfg.master_seed, "figure-param-noise", static_cast<std::uint64_t>(inst));
        fi.evaluate(FIG4_SIGMA, noise_seed, cfg.fit, &interp_errs, &fd_errs);
    }

    FigureTable table;
    table.columns = {"interp_median", "interp_q25", "interp_q75", "fd_median",
                     "fd_q25",        "fd_q75",     "fd_bias",    "improvement"};
    for (const ParamKey& key : probe.targets) {
        const double im = quantile(interp_errs.at(key), 0.5);
        const double fm = quantile(fd_errs.at(key), 0.5);
        table.row_labels.push_back(key.str());
        table.rows.push_back({im, quantile(interp_errs.at(key), 0.25),
                              quantile(interp_errs.at(key), 0.75), fm,
                              quantile(fd_errs.at(key), 0.25), quantile(fd_errs.at(key), 0.75),
                              bias.at(key), im > 0 ? fm / im : nan_value()});
    }
    return table;
}

}  // namespace

std::string FigureTable::to_csv() const {
    std::ostringstream os;
    if (!row_labels.empty()) os << "parameter,";
    for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
    os << "\n";
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (!row_labels.empty()) os << csv_quote(row_labels[r]) << ",";
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            os << (c ? "," : "") << fmt_double(rows[r][c]);
        os << "\n";
    }
    return os.str();
}

FigureTable run_figure(const ExperimentConfig& cfg, const std::string& which) {
    cfg.validate();
    if (which == "fig2") return run_fig2(cfg);
    if (which == "fig3") return run_fig3(cfg);
    if (which == "fig4") return run_fig4(cfg);
    fail_config("figure: unknown sweep '" + which + "' (expected fig2, fig3 or fig4)");
}

void cmd_figure(const ExperimentConfig& cfg, const std::string& which) {
    const FigureTable table = run_figure(cfg, which);
    fs::create_directories(cfg.output_dir);
    const std::string path = (fs::path(cfg.output_dir) / (which + ".csv")).string();
    write_text_file(path, table.to_csv());
    std::cout << "figure: wrote " << table.rows.size() << " rows to " << path << "\n";
}

}  // namespace lindlearn
