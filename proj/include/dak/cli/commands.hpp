#pragma once

// Command-line front end. run_cli() is the whole program minus process
// plumbing, so it can be driven in-process by tests.
//
// Exit codes: 0 ok, 1 rejection (test --reject-exit), 2 input error,
// 3 numeric or degenerate calibration error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dak/calibration.hpp"
#include "dak/core/error.hpp"
#include "dak/core/parallel.hpp"
#include "dak/core/rng.hpp"
#include "dak/io.hpp"
#include "dak/monitor.hpp"
#include "dak/scan.hpp"
#include "dak/simgen.hpp"
#include "dak/theory.hpp"
#include "dak/version.hpp"

namespace dak::cli {

enum ExitCode : int { kOk = 0, kReject = 1, kInputError = 2, kNumericError = 3 };

struct Common {
    std::string input = "-";
    std::string output;
    std::string format = "json";
    double alpha = 0.05;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> bandwidth;
    std::size_t draws = kDefaultMcDraws;
};

namespace detail {

struct SeedRecord {
    std::uint64_t value = 0;
    bool generated = false;
};

inline SeedRecord resolve_seed(const std::optional<std::uint64_t>& s) {
    if (s) return {*s, false};
    std::random_device rd;
    const std::uint64_t v = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    return {v, true};
}

inline SampleMatrix read_input(const std::string& path, std::istream& in) {
    if (path.empty() || path == "-") return io::read_matrix(in);
    std::ifstream f(path, std::ios::binary);
    if (!f) throw input_error("cannot open input file '" + path + "'");
    return io::read_matrix(f);
}

/// Writes text to the output path, or to `out` when no path is given.
inline void emit(const Common& c, std::ostream& out, const std::string& text) {
    if (c.output.empty() || c.output == "-") {
        out << text;
        out.flush();
        return;
    }
    std::ofstream f(c.output, std::ios::binary);
    if (!f) throw input_error("cannot open output file '" + c.output + "'");
    f << text;
}

inline nlohmann::json provenance(const SeedRecord* seed) {
    nlohmann::json j{{"version", kVersion}};
    if (seed) {
        j["seed"] = seed->value;
        j["seed_generated"] = seed->generated;
        j["generator"] = kGeneratorId;
    }
    return j;
}

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline void add_format(CLI::App* sub, Common& c) {
    sub->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
}

inline HacConfig hac_of(const Common& c) { return HacConfig{c.bandwidth}; }

inline std::string num(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace detail

inline int cmd_scan(const Common& c, std::istream& in, std::ostream& out) {
    const auto z = detail::read_input(c.input, in);
    const auto p = scan(z);
    const auto est = locate(p);
    std::string text;
    if (c.format == "csv") {
        text = "t,w\n";
        for (std::size_t s = 0; s < p.split_set.size(); ++s)
            text += std::to_string(p.split_set[s]) + "," + detail::num(p.w_values[s]) + "\n";
    } else {
        auto j = detail::provenance(nullptr);
        j["command"] = "scan";
        j["N"] = p.n_obs;
        j["d"] = p.n_dims;
        j["split_set"] = p.split_set;
        j["w_values"] = p.w_values;
        j["tau_hat"] = est.tau_hat;
        j["max_value"] = est.max_value;
        text = detail::dump(j);
    }
    detail::emit(c, out, text);
    return kOk;
}

inline int cmd_test(const Common& c, bool reject_exit, std::istream& in, std::ostream& out, std::ostream& err) {
    const auto z = detail::read_input(c.input, in);
    const auto seed = detail::resolve_seed(c.seed);
    const auto p = scan(z);
    const auto m = calibrate(p, c.alpha, detail::hac_of(c), c.draws, seed.value);
    for (const auto& w : m.warnings) err << "warning: " << w << "\n";
    const auto t = run_test(p, m);
    std::string text;
    if (c.format == "csv") {
        text = "s_d,c_alpha,reject,tau_hat,sigma2_long,bandwidth,alpha,draws,seed,k_min_eigenvalue\n";
        text += detail::num(t.s_d) + "," + detail::num(t.threshold) + "," + (t.reject ? "1" : "0") + "," +
                std::to_string(t.tau_hat.tau_hat) + "," + detail::num(m.sigma2_long) + "," +
                std::to_string(m.bandwidth) + "," + detail::num(c.alpha) + "," + std::to_string(c.draws) + "," +
                std::to_string(seed.value) + "," + detail::num(m.k_min_eigenvalue) + "\n";
    } else {
        auto j = detail::provenance(&seed);
        j["command"] = "test";
        j["N"] = p.n_obs;
        j["d"] = p.n_dims;
        j["s_d"] = t.s_d;
        j["c_alpha"] = t.threshold;
        j["reject"] = t.reject;
        j["tau_hat"] = t.tau_hat.tau_hat;
        j["max_value"] = t.tau_hat.max_value;
        j["sigma2_long"] = m.sigma2_long;
        j["sigma_long"] = m.sigma_long;
        j["bandwidth"] = m.bandwidth;
        j["alpha"] = c.alpha;
        j["mc_draws"] = c.draws;
        j["k_min_eigenvalue"] = m.k_min_eigenvalue;
        j["warnings"] = m.warnings;
        text = detail::dump(j);
    }
    detail::emit(c, out, text);
    return (reject_exit && t.reject) ? kReject : kOk;
}

struct CalibrateFlags {
    bool permutation_sigma = false;
    std::size_t n_perm = 200;
};

inline MonitorConfig calibrate_from_block(const Common& c, const CalibrateFlags& f, const SampleMatrix& block,
                                          std::uint64_t seed, MonitorMode mode) {
    CalibrateOptions opt;
    opt.mc_draws = c.draws;
    opt.permutation_sigma = f.permutation_sigma;
    opt.n_perm = f.n_perm;
    opt.mode = mode;
    return calibrate_monitor(block, c.alpha, detail::hac_of(c), seed, opt);
}

inline int cmd_calibrate(const Common& c, const CalibrateFlags& f, std::istream& in, std::ostream& out,
                         std::ostream& err) {
    const auto block = detail::read_input(c.input, in);
    const auto seed = detail::resolve_seed(c.seed);
    const auto cfg = calibrate_from_block(c, f, block, seed.value, MonitorMode::first_alarm);
    for (const auto& w : cfg.calibration.warnings) err << "warning: " << w << "\n";
    auto j = detail::provenance(&seed);
    j["command"] = "calibrate";
    j["model"] = cfg.calibration;
    detail::emit(c, out, detail::dump(j));
    return kOk;
}

inline int cmd_quantile(const Common& c, std::size_t n, std::ostream& out) {
    if (n < 4) throw input_error("quantile needs N >= 4");
    const auto seed = detail::resolve_seed(c.seed);
    const CovarianceTemplate tpl(n);
    const double q = mc_threshold(tpl, c.alpha, c.draws, seed.value);
    std::string text;
    if (c.format == "csv") {
        text = "N,alpha,draws,seed,c_alpha,k_min_eigenvalue\n" + std::to_string(n) + "," + detail::num(c.alpha) + "," +
               std::to_string(c.draws) + "," + std::to_string(seed.value) + "," + detail::num(q) + "," +
               detail::num(tpl.min_eigenvalue()) + "\n";
    } else {
        auto j = detail::provenance(&seed);
        j["command"] = "quantile";
        j["N"] = n;
        j["alpha"] = c.alpha;
        j["mc_draws"] = c.draws;
        j["c_alpha"] = q;
        j["k_min_eigenvalue"] = tpl.min_eigenvalue();
        j["eigen_fallback"] = tpl.used_eigen_fallback();
        text = detail::dump(j);
    }
    detail::emit(c, out, text);
    return kOk;
}

struct MonitorFlags {
    std::string calibration;
    std::string calib_input;
    std::string mode = "first-alarm";
};

inline int cmd_monitor(const Common& c, const CalibrateFlags& cf, const MonitorFlags& mf, std::istream& in,
                       std::ostream& out, std::ostream& err) {
    const MonitorMode mode = parse_monitor_mode(mf.mode);
    MonitorConfig cfg;
    nlohmann::json seed_info;
    if (!mf.calibration.empty()) {
        std::ifstream f(mf.calibration);
        if (!f) throw input_error("cannot open calibration file '" + mf.calibration + "'");
        nlohmann::json j;
        try {
            f >> j;
            const auto& model = j.contains("model") ? j.at("model") : j;
            cfg = make_monitor_config(model.get<CalibrationModel>(), mode);
        } catch (const nlohmann::json::exception& e) {
            throw input_error("calibration file '" + mf.calibration + "': " + e.what());
        }
        seed_info = cfg.calibration.seed;
    } else if (!mf.calib_input.empty()) {
        std::ifstream f(mf.calib_input, std::ios::binary);
        if (!f) throw input_error("cannot open calibration block '" + mf.calib_input + "'");
        const auto block = io::read_matrix(f);
        const auto seed = detail::resolve_seed(c.seed);
        cfg = calibrate_from_block(c, cf, block, seed.value, mode);
        seed_info = seed.value;
    } else {
        throw input_error("monitor needs --calibration FILE or --calib-input FILE");
    }
    for (const auto& w : cfg.calibration.warnings) err << "warning: " << w << "\n";

    std::unique_ptr<std::ifstream> file;
    std::istream* src = &in;
    if (!c.input.empty() && c.input != "-") {
        file = std::make_unique<std::ifstream>(c.input);
        if (!*file) throw input_error("cannot open input file '" + c.input + "'");
        src = file.get();
    }
    const bool csv = c.format == "csv";
    if (csv) out << "time,statistic,threshold,window_argmax,alarm\n";
    MonitorState state(cfg.window);
    io::RowReader reader(*src);
    while (!state.halted()) {
        auto row = reader.next();
        if (!row) break;
        const auto alarm = step(state, cfg, *row);
        if (csv) {
            if (state.full()) {
                const auto& p = state.series().back();
                out << p.time << ',' << detail::num(p.value) << ',' << detail::num(cfg.threshold()) << ','
                    << p.window_argmax << ',' << (alarm ? 1 : 0) << '\n';
            }
        } else if (alarm) {
            out << nlohmann::json{{"time", alarm->time},
                                  {"statistic", alarm->statistic},
                                  {"threshold", alarm->threshold},
                                  {"tau_hat", alarm->tau_hat}}
                       .dump()
                << '\n';
            out.flush();
        }
    }
    if (!csv) {
        nlohmann::json s{{"type", "summary"},
                         {"version", kVersion},
                         {"mode", to_string(mode)},
                         {"window", cfg.window},
                         {"threshold", cfg.threshold()},
                         {"sigma_long", cfg.sigma()},
                         {"sigma_method", cfg.calibration.sigma_method},
                         {"bandwidth", cfg.calibration.bandwidth},
                         {"alpha", cfg.alpha},
                         {"mc_draws", cfg.calibration.mc_draws},
                         {"seed", seed_info},
                         {"observations", state.time()},
                         {"alarms", state.alarms().size()}};
        if (state.alarms().empty()) {
            s["nu_hat"] = nullptr;
            s["tau_on"] = nullptr;
        } else {
            s["nu_hat"] = state.alarms().front().time;
            s["tau_on"] = localize_alarm(state, cfg);
        }
        if (mode == MonitorMode::continuous) {
            nlohmann::json bands = nlohmann::json::array();
            for (const auto& b : excursion_bands(state.series(), cfg.threshold())) {
                bands.push_back({{"start", b.start}, {"end", b.end}, {"peak_time", b.peak_time}, {"peak_value", b.peak_value}});
            }
            s["bands"] = bands;
        }
        out << s.dump() << '\n';
    }
    out.flush();
    return kOk;
}

struct SimulateFlags {
    std::string scenario;
    std::vector<std::size_t> dims{1000};
    std::size_t n = 40;
    std::size_t tau = 15;
    std::size_t reps = 100;
    std::vector<std::string> params;
    std::string emit_data;
    bool online = false;
    std::size_t window = 10;
    std::size_t nu = 50;
    std::size_t horizon = 2000;
    bool skip_null = false;
    bool skip_alternative = false;
};

inline std::map<std::string, double> parse_params(const std::vector<std::string>& kv) {
    std::map<std::string, double> out;
    for (const auto& s : kv) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw input_error("--param expects key=value, got '" + s + "'");
        const auto row = io::parse_csv_row(std::string_view(s).substr(eq + 1), 0);
        if (row.size() != 1) throw input_error("--param value must be a single number: '" + s + "'");
        out[s.substr(0, eq)] = row[0];
    }
    return out;
}

inline int cmd_simulate(const Common& c, const SimulateFlags& f, std::ostream& out) {
    const auto seed = detail::resolve_seed(c.seed);
    ScenarioSpec base;
    base.name = parse_scenario(f.scenario);
    base.n = f.n;
    base.tau = f.tau;
    base.params = parse_params(f.params);
    if (f.dims.empty()) throw input_error("--d needs at least one dimension");
    if (!f.emit_data.empty() && f.dims.size() != 1) throw input_error("--emit-data needs a single --d value");

    nlohmann::json reports = nlohmann::json::array();
    std::string csv = f.online ? online_csv_header() + "\n" : localization_csv_header() + "\n";
    for (std::size_t i = 0; i < f.dims.size(); ++i) {
        ScenarioSpec spec = base;
        spec.d = f.dims[i];
        const std::uint64_t s = derive_seed(seed.value, {spec.d});
        try {
            validate(spec);
        } catch (const std::domain_error& e) {
            throw input_error(e.what());
        }
        if (f.online) {
            OnlineOptions opt;
            opt.mc_draws = c.draws;
            opt.hac = detail::hac_of(c);
            opt.run_null = !f.skip_null;
            opt.run_alternative = !f.skip_alternative;
            const auto r = run_online(spec, f.window, c.alpha, f.nu, f.horizon, f.reps, s, opt);
            reports.push_back(to_json_value(r));
            csv += to_csv_row(r) + "\n";
        } else {
            const auto r = run_localization(spec, f.reps, s);
            reports.push_back(to_json_value(r));
            csv += to_csv_row(r) + "\n";
            if (!f.emit_data.empty()) {
                std::ofstream data(f.emit_data, std::ios::binary);
                if (!data) throw input_error("cannot open --emit-data file '" + f.emit_data + "'");
                const auto z = generate(spec, r.rep_seeds.front());
                const bool binary = f.emit_data.size() >= 4 && f.emit_data.substr(f.emit_data.size() - 4) == ".bin";
                if (binary) io::write_binary(data, z);
                else io::write_csv(data, z);
            }
        }
    }
    if (c.format == "csv") {
        detail::emit(c, out, csv);
    } else {
        auto j = detail::provenance(&seed);
        j["command"] = "simulate";
        j["mode"] = f.online ? "online" : "localization";
        j["seed_derivation"] = "per-d seed = derive_seed(seed, {d}); per-rep seed = derive_seed(per-d seed, {rep})";
        j["reports"] = reports;
        detail::emit(c, out, detail::dump(j));
    }
    return kOk;
}

/// Parses args (without the program name) and runs the selected command.
inline int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dimension-averaged angular-kernel change-point scan"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.fallthrough();
    unsigned threads = 0;
    app.add_option("--threads", threads, "Worker threads (default: DAK_THREADS or hardware)");

    Common c;
    CalibrateFlags cf;
    MonitorFlags mf;
    SimulateFlags sf;
    bool reject_exit = false;
    std::size_t quantile_n = 0;

    auto add_input = [&](CLI::App* sub) {
        sub->add_option("--input,-i", c.input, "Input file (CSV or DAK1 binary); '-' reads stdin");
    };
    auto add_output = [&](CLI::App* sub) { sub->add_option("--output,-o", c.output, "Output file (default stdout)"); };
    auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", c.seed, "Random seed (generated and recorded if omitted)"); };
    auto add_alpha = [&](CLI::App* sub) {
        sub->add_option("--alpha", c.alpha, "Level")->check(CLI::Range(0.0, 1.0));
    };
    auto add_calibration = [&](CLI::App* sub) {
        add_alpha(sub);
        add_seed(sub);
        sub->add_option("--bandwidth", c.bandwidth, "HAC bandwidth L (default floor(d^(1/3)))")->check(CLI::PositiveNumber);
        sub->add_option("--draws", c.draws, "Monte-Carlo draws for the threshold")->check(CLI::Range(1000, 1 << 30));
    };

    auto* scan_cmd = app.add_subcommand("scan", "Scan profile and change-point estimate");
    add_input(scan_cmd);
    add_output(scan_cmd);
    detail::add_format(scan_cmd, c);

    auto* test_cmd = app.add_subcommand("test", "Studentized max test");
    add_input(test_cmd);
    add_output(test_cmd);
    add_calibration(test_cmd);
    detail::add_format(test_cmd, c);
    test_cmd->add_flag("--reject-exit", reject_exit, "Exit with code 1 when the test rejects");

    auto* cal_cmd = app.add_subcommand("calibrate", "Calibrate a monitor from a pre-change block");
    add_input(cal_cmd);
    add_output(cal_cmd);
    add_calibration(cal_cmd);
    cal_cmd->add_flag("--permutation-sigma", cf.permutation_sigma, "Use the permutation-whitened scale estimate");
    cal_cmd->add_option("--n-perm", cf.n_perm, "Permutations for --permutation-sigma")->check(CLI::PositiveNumber);

    auto* q_cmd = app.add_subcommand("quantile", "Monte-Carlo threshold c_alpha for N");
    q_cmd->add_option("--n,-N", quantile_n, "Number of observations N")->required();
    add_output(q_cmd);
    add_alpha(q_cmd);
    add_seed(q_cmd);
    q_cmd->add_option("--draws", c.draws, "Monte-Carlo draws")->check(CLI::Range(1000, 1 << 30));
    detail::add_format(q_cmd, c);

    auto* mon_cmd = app.add_subcommand("monitor", "Sliding-window online monitoring of a CSV stream");
    add_input(mon_cmd);
    add_calibration(mon_cmd);
    detail::add_format(mon_cmd, c);
    mon_cmd->add_option("--calibration", mf.calibration, "Calibration JSON from the calibrate command");
    mon_cmd->add_option("--calib-input", mf.calib_input, "Pre-change block to calibrate from (N0 rows)");
    mon_cmd->add_option("--mode", mf.mode, "first-alarm or continuous")->check(CLI::IsMember({"first-alarm", "continuous"}));
    mon_cmd->add_flag("--permutation-sigma", cf.permutation_sigma, "Use the permutation-whitened scale estimate");
    mon_cmd->add_option("--n-perm", cf.n_perm, "Permutations for --permutation-sigma")->check(CLI::PositiveNumber);

    auto* sim_cmd = app.add_subcommand("simulate", "Replicated localization or online experiments");
    add_output(sim_cmd);
    add_calibration(sim_cmd);
    detail::add_format(sim_cmd, c);
    sim_cmd->add_option("--scenario", sf.scenario, "Scenario name")->required();
    sim_cmd->add_option("--d", sf.dims, "Dimensions (comma-separated)")->delimiter(',');
    sim_cmd->add_option("--N", sf.n, "Observations per sample");
    sim_cmd->add_option("--tau", sf.tau, "Change point for localization");
    sim_cmd->add_option("--reps", sf.reps, "Replications")->check(CLI::PositiveNumber);
    sim_cmd->add_option("--param", sf.params, "Scenario parameter override key=value");
    sim_cmd->add_option("--emit-data", sf.emit_data, "Write the first replication's sample (.bin for binary)");
    sim_cmd->add_flag("--online", sf.online, "Run the online monitoring experiment");
    sim_cmd->add_option("--window", sf.window, "Online window N0");
    sim_cmd->add_option("--nu", sf.nu, "Online change point");
    sim_cmd->add_option("--horizon", sf.horizon, "Online horizon");
    sim_cmd->add_flag("--skip-null", sf.skip_null, "Online: skip the null (ARL) streams");
    sim_cmd->add_flag("--skip-alt", sf.skip_alternative, "Online: skip the post-change streams");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kInputError;
    }
    if (threads > 0) set_thread_count(threads);

    try {
        if (scan_cmd->parsed()) return cmd_scan(c, in, out);
        if (test_cmd->parsed()) return cmd_test(c, reject_exit, in, out, err);
        if (cal_cmd->parsed()) return cmd_calibrate(c, cf, in, out, err);
        if (q_cmd->parsed()) return cmd_quantile(c, quantile_n, out);
        if (mon_cmd->parsed()) return cmd_monitor(c, cf, mf, in, out, err);
        if (sim_cmd->parsed()) return cmd_simulate(c, sf, out);
    } catch (const input_error& e) {
        err << "error: " << e.what() << "\n";
        return kInputError;
    } catch (const degenerate_calibration& e) {
        err << "error: " << e.what() << "\n";
        return kNumericError;
    } catch (const data_integrity_error& e) {
        err << "error: " << e.what() << "\n";
        return kNumericError;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kInputError;
    } catch (const std::domain_error& e) {
        err << "error: " << e.what() << "\n";
        return kInputError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kNumericError;
    }
    return kInputError;
}

}  // namespace dak::cli
