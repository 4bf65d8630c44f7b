// SPDX-License-Identifier: Apache-2.0
//
// Experiment runner: JSON experiment specs, the two named sweeps, and CSV
// output with a JSON sidecar.

#ifndef QMIMO_EXPERIMENT_HPP
#define QMIMO_EXPERIMENT_HPP

#include "core.hpp"
#include "detequiv.hpp"
#include "montecarlo.hpp"
#include "receiver.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace qmimo {

class ConfigError : public Error {
public:
    using Error::Error;
};

enum class Scenario { Fig1Sweep, Fig2Sweep, Custom };
enum class SweepVariable { PuDb, M };
enum class Method { MonteCarlo, DetEquiv };

inline std::string_view to_string(Scenario s) {
    switch (s) {
    case Scenario::Fig1Sweep: return "fig1";
    case Scenario::Fig2Sweep: return "fig2";
    case Scenario::Custom: return "custom";
    }
    return "unknown";
}

inline std::string_view to_string(SweepVariable v) { return v == SweepVariable::PuDb ? "pu_db" : "M"; }
inline std::string_view to_string(Method m) { return m == Method::MonteCarlo ? "monte_carlo" : "detequiv"; }

struct ExperimentSpec {
    Scenario scenario = Scenario::Custom;
    SweepVariable sweep_variable = SweepVariable::PuDb;
    std::vector<double> sweep_values;
    std::vector<ReceiverKind> receivers = {ReceiverKind::ProposedMmse};
    std::vector<Method> methods = {Method::MonteCarlo, Method::DetEquiv};
    long trials = 1000;
    std::uint64_t seed = 1;
    std::string output = "results.csv";
    int workers = 1;
    SystemConfig system;  // base system for Custom; ignored by the named sweeps

    void validate() const {
        if (sweep_values.empty()) throw ConfigError("config key 'sweep.values': must be non-empty");
        for (std::size_t i = 1; i < sweep_values.size(); ++i)
            if (!(sweep_values[i] > sweep_values[i - 1]))
                throw ConfigError("config key 'sweep.values': must be strictly increasing");
        if (sweep_variable == SweepVariable::M)
            for (double v : sweep_values)
                if (v < 1.0 || v != std::floor(v))
                    throw ConfigError("config key 'sweep.values': M values must be positive integers");
        if (receivers.empty()) throw ConfigError("config key 'receivers': must be non-empty");
        if (methods.empty()) throw ConfigError("config key 'methods': must be non-empty");
        if (trials < 1) throw ConfigError("config key 'trials': must be >= 1");
        if (workers < 1) throw ConfigError("config key 'workers': must be >= 1");
        if (output.empty()) throw ConfigError("config key 'output': must be non-empty");
        if (scenario == Scenario::Custom && sweep_variable == SweepVariable::PuDb &&
            system.power_mode == PowerMode::ScaledByM)
            throw ConfigError("config key 'sweep.variable': pu_db sweeps need system.power_mode 'fixed'");
    }
};

// Fixed values of the named sweeps.
inline constexpr int kFigUsers = 8;
inline constexpr double kFig2FixedPuDb = 10.0;
inline constexpr double kFig2EuDb = 30.0;

inline std::vector<double> default_sweep(Scenario s) {
    if (s == Scenario::Fig1Sweep) return {0, 5, 10, 15, 20, 25, 30};
    return {32, 64, 128, 256};
}

inline ExperimentSpec fig1_spec() {
    ExperimentSpec s;
    s.scenario = Scenario::Fig1Sweep;
    s.sweep_variable = SweepVariable::PuDb;
    s.sweep_values = default_sweep(Scenario::Fig1Sweep);
    s.receivers = {ReceiverKind::ProposedMmse, ReceiverKind::AwgnOnlyMmse};
    return s;
}

inline ExperimentSpec fig2_spec() {
    ExperimentSpec s;
    s.scenario = Scenario::Fig2Sweep;
    s.sweep_variable = SweepVariable::M;
    s.sweep_values = default_sweep(Scenario::Fig2Sweep);
    s.receivers = {ReceiverKind::ProposedMmse};
    return s;
}

// ---------------------------------------------------------------------------
// JSON config parsing. Unknown keys are errors.

namespace detail {

using nlohmann::json;

inline void check_keys(const json& obj, const std::string& where, std::set<std::string> allowed) {
    if (!obj.is_object())
        throw ConfigError("config key '" + where + "': expected an object");
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key))
            throw ConfigError("config key '" + (where.empty() ? key : where + "." + key) +
                              "': unknown key");
}

template <class T>
T get_as(const json& obj, const std::string& key, const std::string& path) {
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config key '" + path + "': " + e.what());
    }
}

inline AdcResolution parse_resolution(const json& v, const std::string& path) {
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf" || s == "INF" || s == "infinite") return AdcResolution::ideal();
        throw ConfigError("config key '" + path + "': expected a bit count or \"inf\"");
    }
    if (!v.is_number_integer()) throw ConfigError("config key '" + path + "': expected an integer");
    try {
        return AdcResolution::bits(v.get<int>());
    } catch (const InvalidArgument& e) {
        throw ConfigError("config key '" + path + "': " + e.what());
    }
}

inline AdcPolicy parse_adc(const json& j) {
    const std::string policy = get_as<std::string>(j, "policy", "system.adc.policy");
    if (policy == "uniform") {
        check_keys(j, "system.adc", {"policy", "bits"});
        return UniformBits{parse_resolution(j.at("bits"), "system.adc.bits")};
    }
    if (policy == "random") {
        check_keys(j, "system.adc", {"policy", "min", "max"});
        return RandomBits{get_as<int>(j, "min", "system.adc.min"), get_as<int>(j, "max", "system.adc.max")};
    }
    if (policy == "explicit") {
        check_keys(j, "system.adc", {"policy", "bits"});
        const auto& arr = j.at("bits");
        if (!arr.is_array()) throw ConfigError("config key 'system.adc.bits': expected an array");
        ExplicitBits e;
        for (std::size_t i = 0; i < arr.size(); ++i)
            e.bits.push_back(parse_resolution(arr[i], "system.adc.bits[" + std::to_string(i) + "]"));
        return e;
    }
    throw ConfigError("config key 'system.adc.policy': expected uniform, random or explicit");
}

inline DropMode parse_drop(const json& j) {
    const std::string mode = get_as<std::string>(j, "mode", "system.drop.mode");
    if (mode == "fixed") {
        check_keys(j, "system.drop", {"mode", "seed"});
        return FixedDrop{get_as<std::uint64_t>(j, "seed", "system.drop.seed")};
    }
    if (mode == "average") {
        check_keys(j, "system.drop", {"mode", "count"});
        return AverageOverDrops{get_as<int>(j, "count", "system.drop.count")};
    }
    throw ConfigError("config key 'system.drop.mode': expected fixed or average");
}

inline SystemConfig parse_system(const json& j) {
    check_keys(j, "system", {"M", "K", "pu_db", "power_mode", "Eu_db", "adc", "cell", "drop"});
    SystemConfig s;
    if (j.contains("M")) s.M = get_as<Eigen::Index>(j, "M", "system.M");
    if (j.contains("K")) s.K = get_as<Eigen::Index>(j, "K", "system.K");
    if (j.contains("pu_db")) s.pu = db_to_linear(get_as<double>(j, "pu_db", "system.pu_db"));
    if (j.contains("Eu_db")) s.Eu = db_to_linear(get_as<double>(j, "Eu_db", "system.Eu_db"));
    if (j.contains("power_mode")) {
        const auto pm = get_as<std::string>(j, "power_mode", "system.power_mode");
        if (pm == "fixed") s.power_mode = PowerMode::Fixed;
        else if (pm == "scaled_by_m") s.power_mode = PowerMode::ScaledByM;
        else throw ConfigError("config key 'system.power_mode': expected fixed or scaled_by_m");
    }
    if (j.contains("adc")) s.adc = parse_adc(j.at("adc"));
    if (j.contains("drop")) s.drop = parse_drop(j.at("drop"));
    if (j.contains("cell")) {
        const auto& c = j.at("cell");
        check_keys(c, "system.cell", {"radius_m", "min_dist_m", "pathloss_exp", "shadow_std_db"});
        if (c.contains("radius_m")) s.cell.radius_m = get_as<double>(c, "radius_m", "system.cell.radius_m");
        if (c.contains("min_dist_m")) s.cell.min_dist_m = get_as<double>(c, "min_dist_m", "system.cell.min_dist_m");
        if (c.contains("pathloss_exp")) s.cell.pathloss_exp = get_as<double>(c, "pathloss_exp", "system.cell.pathloss_exp");
        if (c.contains("shadow_std_db")) s.cell.shadow_std_db = get_as<double>(c, "shadow_std_db", "system.cell.shadow_std_db");
    }
    return s;
}

inline std::pair<int, int> line_col(const std::string& text, std::size_t byte) {
    int line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

} // namespace detail

// Parses a JSON experiment spec. `source` names the input in diagnostics.
inline ExperimentSpec parse_experiment_spec(const std::string& text, const std::string& source = "<config>") {
    using nlohmann::json;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = detail::line_col(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
    }
    detail::check_keys(j, "", {"scenario", "sweep", "receivers", "methods", "trials", "seed", "output",
                               "workers", "system"});

    const std::string scenario = detail::get_as<std::string>(j, "scenario", "scenario");
    ExperimentSpec spec;
    if (scenario == "fig1") spec = fig1_spec();
    else if (scenario == "fig2") spec = fig2_spec();
    else if (scenario == "custom") spec.scenario = Scenario::Custom;
    else throw ConfigError("config key 'scenario': expected fig1, fig2 or custom");

    if (j.contains("system")) {
        if (spec.scenario != Scenario::Custom)
            throw ConfigError("config key 'system': only valid for scenario custom");
        spec.system = detail::parse_system(j.at("system"));
    }
    if (j.contains("sweep")) {
        const auto& sw = j.at("sweep");
        detail::check_keys(sw, "sweep", {"variable", "values"});
        if (sw.contains("variable")) {
            const auto var = detail::get_as<std::string>(sw, "variable", "sweep.variable");
            if (var == "pu_db") spec.sweep_variable = SweepVariable::PuDb;
            else if (var == "M") spec.sweep_variable = SweepVariable::M;
            else throw ConfigError("config key 'sweep.variable': expected pu_db or M");
            if (spec.scenario != Scenario::Custom &&
                spec.sweep_variable != (spec.scenario == Scenario::Fig1Sweep ? SweepVariable::PuDb : SweepVariable::M))
                throw ConfigError("config key 'sweep.variable': fixed by the named scenario");
        }
        if (sw.contains("values")) spec.sweep_values = detail::get_as<std::vector<double>>(sw, "values", "sweep.values");
    } else if (spec.scenario == Scenario::Custom) {
        throw ConfigError("config key 'sweep': required for scenario custom");
    }
    if (j.contains("receivers")) {
        spec.receivers.clear();
        for (const auto& name : detail::get_as<std::vector<std::string>>(j, "receivers", "receivers")) {
            try {
                spec.receivers.push_back(parse_receiver_kind(name));
            } catch (const InvalidArgument& e) {
                throw ConfigError(std::string("config key 'receivers': ") + e.what());
            }
        }
    }
    if (j.contains("methods")) {
        spec.methods.clear();
        for (const auto& name : detail::get_as<std::vector<std::string>>(j, "methods", "methods")) {
            if (name == "monte_carlo") spec.methods.push_back(Method::MonteCarlo);
            else if (name == "detequiv") spec.methods.push_back(Method::DetEquiv);
            else throw ConfigError("config key 'methods': unknown method '" + name + "'");
        }
    }
    if (j.contains("trials")) spec.trials = detail::get_as<long>(j, "trials", "trials");
    if (j.contains("seed")) spec.seed = detail::get_as<std::uint64_t>(j, "seed", "seed");
    if (j.contains("output")) spec.output = detail::get_as<std::string>(j, "output", "output");
    if (j.contains("workers")) spec.workers = detail::get_as<int>(j, "workers", "workers");
    spec.validate();
    return spec;
}

inline ExperimentSpec load_experiment_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_experiment_spec(ss.str(), path.string());
}

inline nlohmann::json to_json(const SystemConfig& s) {
    nlohmann::json j;
    j["M"] = s.M;
    j["K"] = s.K;
    j["power_mode"] = s.power_mode == PowerMode::Fixed ? "fixed" : "scaled_by_m";
    j["pu_db"] = linear_to_db(s.pu);
    j["Eu_db"] = linear_to_db(s.Eu);
    j["bits_spec"] = bits_spec(s.adc);
    j["cell"] = {{"radius_m", s.cell.radius_m},
                 {"min_dist_m", s.cell.min_dist_m},
                 {"pathloss_exp", s.cell.pathloss_exp},
                 {"shadow_std_db", s.cell.shadow_std_db}};
    if (const auto* fd = std::get_if<FixedDrop>(&s.drop)) j["drop"] = {{"mode", "fixed"}, {"seed", fd->seed}};
    else j["drop"] = {{"mode", "average"}, {"count", std::get<AverageOverDrops>(s.drop).count}};
    return j;
}

inline nlohmann::json to_json(const ExperimentSpec& spec) {
    nlohmann::json j;
    j["scenario"] = to_string(spec.scenario);
    j["sweep"] = {{"variable", to_string(spec.sweep_variable)}, {"values", spec.sweep_values}};
    j["receivers"] = nlohmann::json::array();
    for (auto r : spec.receivers) j["receivers"].push_back(to_string(r));
    j["methods"] = nlohmann::json::array();
    for (auto m : spec.methods) j["methods"].push_back(to_string(m));
    j["trials"] = spec.trials;
    j["seed"] = spec.seed;
    j["output"] = spec.output;
    j["workers"] = spec.workers;
    if (spec.scenario == Scenario::Custom) j["system"] = to_json(spec.system);
    return j;
}

// ---------------------------------------------------------------------------
// Scenario expansion and execution.

struct RunPoint {
    std::string scenario;  // CSV label
    SystemConfig system;
};

inline std::vector<RunPoint> expand_points(const ExperimentSpec& spec) {
    std::vector<RunPoint> out;
    switch (spec.scenario) {
    case Scenario::Fig1Sweep:
        for (Eigen::Index m : {60, 120}) {
            for (double pu_db : spec.sweep_values) {
                SystemConfig s;
                s.M = m;
                s.K = kFigUsers;
                s.pu = db_to_linear(pu_db);
                s.adc = RandomBits{1, 3};
                s.drop = FixedDrop{spec.seed};
                out.push_back({"fig1", s});
            }
        }
        break;
    case Scenario::Fig2Sweep: {
        const AdcResolution bits[] = {AdcResolution::bits(1), AdcResolution::bits(2), AdcResolution::ideal()};
        for (PowerMode pm : {PowerMode::Fixed, PowerMode::ScaledByM}) {
            for (auto b : bits) {
                for (double m : spec.sweep_values) {
                    SystemConfig s;
                    s.M = static_cast<Eigen::Index>(m);
                    s.K = kFigUsers;
                    s.power_mode = pm;
                    s.pu = db_to_linear(kFig2FixedPuDb);
                    s.Eu = db_to_linear(kFig2EuDb);
                    s.adc = UniformBits{b};
                    s.drop = FixedDrop{spec.seed};
                    out.push_back({pm == PowerMode::Fixed ? "fig2-fixed" : "fig2-scaled", s});
                }
            }
        }
        break;
    }
    case Scenario::Custom:
        for (double v : spec.sweep_values) {
            SystemConfig s = spec.system;
            if (spec.sweep_variable == SweepVariable::PuDb) s.pu = db_to_linear(v);
            else s.M = static_cast<Eigen::Index>(v);
            out.push_back({"custom", s});
        }
        break;
    }
    return out;
}

struct ResultRow {
    std::string scenario;
    std::string receiver;
    std::string method;
    Eigen::Index M = 0;
    Eigen::Index K = 0;
    double pu_db = 0.0;
    std::string bits_spec;
    std::string drop_seed;
    std::optional<long> trials;  // empty for detequiv rows
    std::string target;          // 0-based user index or SUM
    double value = 0.0;          // bits/s/Hz
    std::optional<double> stderr_value;
};

inline constexpr const char* kCsvHeader =
    "scenario,receiver,method,M,K,pu_db,bits_spec,drop_seed,trials,target,value,stderr";

inline std::string format_number(double v, int precision = 10) {
    std::ostringstream os;
    os << std::setprecision(precision) << v;
    return os.str();
}

inline std::string to_csv_line(const ResultRow& r) {
    std::ostringstream os;
    os << r.scenario << ',' << r.receiver << ',' << r.method << ',' << r.M << ',' << r.K << ','
       << format_number(r.pu_db, 8) << ',' << r.bits_spec << ',' << r.drop_seed << ','
       << (r.trials ? std::to_string(*r.trials) : std::string()) << ',' << r.target << ','
       << format_number(r.value) << ',' << (r.stderr_value ? format_number(*r.stderr_value) : std::string());
    return os.str();
}

// Runs every (point x receiver x method). The deterministic equivalent exists
// only for the proposed receiver, so detequiv rows are emitted for it alone.
inline std::vector<ResultRow> run_experiment_rows(const ExperimentSpec& spec) {
    spec.validate();
    std::vector<ResultRow> rows;
    for (const auto& pt : expand_points(spec)) {
        pt.system.validate();
        ResultRow base;
        base.scenario = pt.scenario;
        base.M = pt.system.M;
        base.K = pt.system.K;
        base.pu_db = pt.system.pu_db();
        base.bits_spec = bits_spec(pt.system.adc);
        base.drop_seed = drop_label(pt.system, spec.seed);

        for (ReceiverKind rk : spec.receivers) {
            base.receiver = std::string(to_string(rk));
            for (Method method : spec.methods) {
                if (method == Method::DetEquiv && rk != ReceiverKind::ProposedMmse) continue;
                ResultRow row = base;
                row.method = std::string(to_string(method));
                if (method == Method::MonteCarlo) {
                    const McEstimate mc = run_monte_carlo(pt.system, rk, spec.trials, spec.seed, spec.workers);
                    row.trials = mc.trials;
                    for (Eigen::Index k = 0; k < pt.system.K; ++k) {
                        row.target = std::to_string(k);
                        row.value = mc.user_rates[k];
                        row.stderr_value = mc.stderr_users[k];
                        rows.push_back(row);
                    }
                    row.target = "SUM";
                    row.value = mc.sum_se;
                    row.stderr_value = mc.stderr_sum;
                    rows.push_back(row);
                } else {
                    const DetEqReport de = evaluate_detequiv(pt.system, spec.seed);
                    for (Eigen::Index k = 0; k < pt.system.K; ++k) {
                        row.target = std::to_string(k);
                        row.value = de.rates_asym[k];
                        rows.push_back(row);
                    }
                    row.target = "SUM";
                    row.value = de.sum_se_asym;
                    rows.push_back(row);
                }
            }
        }
    }
    return rows;
}

// Writes `content` to `path` through a temporary file in the same directory
// and a rename, so readers never observe a partial file.
inline void write_file_atomically(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write output file " + path.string());
        out << content;
        out.flush();
        if (!out) throw Error("failed writing output file " + path.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error("cannot move output into place at " + path.string());
    }
}

inline std::string rows_to_csv(const std::vector<ResultRow>& rows) {
    std::string out = kCsvHeader;
    out += '\n';
    for (const auto& r : rows) {
        out += to_csv_line(r);
        out += '\n';
    }
    return out;
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
    return csv.string() + ".meta.json";
}

// Runs the experiment, writes the CSV and its sidecar, and prints the SUM rows.
inline std::vector<ResultRow> run_experiment(const ExperimentSpec& spec, std::ostream& log) {
    const std::filesystem::path out = spec.output;
    if (out.has_parent_path() && !std::filesystem::is_directory(out.parent_path()))
        throw Error("output directory does not exist: " + out.parent_path().string());

    auto rows = run_experiment_rows(spec);
    write_file_atomically(out, rows_to_csv(rows));
    write_file_atomically(sidecar_path(out), to_json(spec).dump(2) + "\n");

    log << std::left << std::setw(12) << "scenario" << std::setw(10) << "receiver" << std::setw(12) << "method"
        << std::setw(6) << "M" << std::setw(10) << "pu_db" << std::setw(8) << "bits" << std::setw(12) << "sum_se"
        << "stderr\n";
    for (const auto& r : rows) {
        if (r.target != "SUM") continue;
        log << std::left << std::setw(12) << r.scenario << std::setw(10) << r.receiver << std::setw(12) << r.method
            << std::setw(6) << r.M << std::setw(10) << format_number(r.pu_db, 4) << std::setw(8) << r.bits_spec
            << std::setw(12) << format_number(r.value, 6)
            << (r.stderr_value ? format_number(*r.stderr_value, 3) : std::string("-")) << '\n';
    }
    log << "wrote " << rows.size() << " rows to " << out.string() << '\n';
    return rows;
}

} // namespace qmimo

#endif
