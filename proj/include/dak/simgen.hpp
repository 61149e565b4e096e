#pragma once

// Seeded scenario generators and the replication drivers for offline
// localization and online monitoring experiments.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dak/calibration.hpp"
#include "dak/core/error.hpp"
#include "dak/core/parallel.hpp"
#include "dak/core/rng.hpp"
#include "dak/core/sample_matrix.hpp"
#include "dak/monitor.hpp"
#include "dak/scan.hpp"
#include "dak/version.hpp"

namespace dak {

enum class Scenario {
    cauchy_location,
    cauchy_scale,
    dirichlet,
    gaussian_sparse_mean,
    cauchy_gaussian_mix,
    gaussian_location,
    gaussian_scale,
    gaussian_spiked_cov,
    gaussian_same_marginals,
    laplace_location,
    bernoulli_gaussian,
    gaussian_mixture,
};

struct ScenarioInfo {
    Scenario id;
    const char* name;
    std::map<std::string, double> defaults;
};

inline const std::vector<ScenarioInfo>& scenario_table() {
    static const std::vector<ScenarioInfo> table{
        {Scenario::cauchy_location, "cauchy_location", {{"shift", 1.0}}},
        {Scenario::cauchy_scale, "cauchy_scale", {{"location", 1.0}, {"lambda", 2.0}}},
        {Scenario::dirichlet, "dirichlet", {{"alpha_pre", 1.0}, {"alpha_post", 0.1}}},
        {Scenario::gaussian_sparse_mean, "gaussian_sparse_mean", {{"fraction", 0.05}, {"shift", 1.0}}},
        {Scenario::cauchy_gaussian_mix, "cauchy_gaussian_mix", {{"shift", 1.0}}},
        {Scenario::gaussian_location, "gaussian_location", {{"shift", 1.0}}},
        {Scenario::gaussian_scale, "gaussian_scale", {{"sd_post", 2.0}}},
        {Scenario::gaussian_spiked_cov, "gaussian_spiked_cov", {{"spike", 5.0}}},
        {Scenario::gaussian_same_marginals, "gaussian_same_marginals", {{"rho", 0.3}}},
        {Scenario::laplace_location, "laplace_location", {{"shift", 1.0}}},
        {Scenario::bernoulli_gaussian, "bernoulli_gaussian", {{"p_pre", 0.1}, {"p_post", 0.9}}},
        {Scenario::gaussian_mixture, "gaussian_mixture", {{"epsilon", 0.1}, {"component_mean", 10.0}}},
    };
    return table;
}

inline const ScenarioInfo& scenario_info(Scenario s) {
    for (const auto& info : scenario_table())
        if (info.id == s) return info;
    throw std::invalid_argument("unknown scenario id");
}

inline Scenario parse_scenario(const std::string& name) {
    for (const auto& info : scenario_table())
        if (name == info.name) return info.id;
    throw input_error("unknown scenario '" + name + "'");
}

inline const char* to_string(Scenario s) { return scenario_info(s).name; }

struct ScenarioSpec {
    Scenario name = Scenario::cauchy_location;
    std::size_t d = 1000;
    std::size_t n = 40;
    std::optional<std::size_t> tau = 15;  // empty: no change
    std::map<std::string, double> params;  // overrides of the scenario defaults

    double param(const std::string& key) const {
        if (auto it = params.find(key); it != params.end()) return it->second;
        const auto& def = scenario_info(name).defaults;
        if (auto it = def.find(key); it != def.end()) return it->second;
        throw std::invalid_argument("scenario " + std::string(to_string(name)) + " has no parameter '" + key + "'");
    }

    /// Number of shifted coordinates in gaussian_sparse_mean.
    std::size_t sparse_count() const { return static_cast<std::size_t>(std::floor(param("fraction") * static_cast<double>(d) + 1e-9)); }
    /// Number of Cauchy coordinates in cauchy_gaussian_mix (the last floor(d/3)).
    std::size_t cauchy_count() const { return d / 3; }
};

inline void validate(const ScenarioSpec& spec) {
    if (spec.d < 1) throw std::domain_error("scenario needs d >= 1");
    if (spec.n < 1) throw std::domain_error("scenario needs N >= 1");
    if (spec.tau && (*spec.tau < 1 || *spec.tau >= spec.n)) throw std::domain_error("tau must lie in [1, N-1]");
    const auto& def = scenario_info(spec.name).defaults;
    for (const auto& [key, value] : spec.params) {
        if (!def.count(key)) {
            throw std::domain_error("scenario " + std::string(to_string(spec.name)) + " has no parameter '" + key + "'");
        }
        if (!std::isfinite(value)) throw std::domain_error("parameter '" + key + "' is not finite");
    }
    auto positive = [&](const char* key) {
        if (!(spec.param(key) > 0.0)) throw std::domain_error(std::string(key) + " must be > 0");
    };
    auto unit = [&](const char* key) {
        const double v = spec.param(key);
        if (!(v >= 0.0 && v <= 1.0)) throw std::domain_error(std::string(key) + " must lie in [0, 1]");
    };
    switch (spec.name) {
        case Scenario::cauchy_scale: positive("lambda"); break;
        case Scenario::dirichlet:
            positive("alpha_pre");
            positive("alpha_post");
            break;
        case Scenario::gaussian_sparse_mean:
            unit("fraction");
            if (spec.sparse_count() > spec.d) throw std::domain_error("s_d exceeds d");
            break;
        case Scenario::gaussian_scale: positive("sd_post"); break;
        case Scenario::gaussian_spiked_cov:
            if (!(spec.param("spike") >= 0.0)) throw std::domain_error("spike must be >= 0");
            break;
        case Scenario::gaussian_same_marginals: unit("rho"); break;
        case Scenario::bernoulli_gaussian:
            unit("p_pre");
            unit("p_post");
            break;
        case Scenario::gaussian_mixture: unit("epsilon"); break;
        default: break;
    }
}

/// Fills one observation from F (post = false) or G (post = true).
inline void sample_row(const ScenarioSpec& spec, bool post, Rng& rng, std::span<double> out) {
    const std::size_t d = out.size();
    switch (spec.name) {
        case Scenario::cauchy_location: {
            const double loc = post ? spec.param("shift") : 0.0;
            for (auto& v : out) v = rng.cauchy(loc, 1.0);
            break;
        }
        case Scenario::cauchy_scale: {
            const double scale = post ? spec.param("lambda") : 1.0;
            const double loc = spec.param("location");
            for (auto& v : out) v = rng.cauchy(loc, scale);
            break;
        }
        case Scenario::dirichlet: {
            const double a = post ? spec.param("alpha_post") : spec.param("alpha_pre");
            double sum = 0.0;
            for (auto& v : out) sum += (v = rng.gamma(a));
            if (sum > 0.0) {
                for (auto& v : out) v /= sum;
            } else {
                // every gamma underflowed; fall back to a uniformly chosen vertex
                std::fill(out.begin(), out.end(), 0.0);
                out[rng.below(d)] = 1.0;
            }
            break;
        }
        case Scenario::gaussian_sparse_mean: {
            const std::size_t s = post ? spec.sparse_count() : 0;
            const double shift = spec.param("shift");
            for (std::size_t k = 0; k < d; ++k) out[k] = rng.normal() + (k < s ? shift : 0.0);
            break;
        }
        case Scenario::cauchy_gaussian_mix: {
            const std::size_t d1 = d - spec.cauchy_count();
            const double loc = post ? spec.param("shift") : 0.0;
            for (std::size_t k = 0; k < d; ++k) out[k] = k < d1 ? loc + rng.normal() : rng.cauchy(loc, 1.0);
            break;
        }
        case Scenario::gaussian_location: {
            const double loc = post ? spec.param("shift") : 0.0;
            for (auto& v : out) v = loc + rng.normal();
            break;
        }
        case Scenario::gaussian_scale: {
            const double sd = post ? spec.param("sd_post") : 1.0;
            for (auto& v : out) v = sd * rng.normal();
            break;
        }
        case Scenario::gaussian_spiked_cov: {
            for (auto& v : out) v = rng.normal();
            if (post) {
                // Z + sqrt(b) g v with v = 1/sqrt(d): covariance I + b v v^T
                const double g = rng.normal();
                const double add = std::sqrt(spec.param("spike")) * g / std::sqrt(static_cast<double>(d));
                for (auto& v : out) v += add;
            }
            break;
        }
        case Scenario::gaussian_same_marginals: {
            if (!post) {
                for (auto& v : out) v = rng.normal();
            } else {
                const double rho = spec.param("rho");
                const double common = std::sqrt(rho) * rng.normal();
                const double own = std::sqrt(1.0 - rho);
                for (auto& v : out) v = own * rng.normal() + common;
            }
            break;
        }
        case Scenario::laplace_location: {
            const double loc = post ? spec.param("shift") : 0.0;
            for (auto& v : out) v = rng.laplace(loc, 1.0);
            break;
        }
        case Scenario::bernoulli_gaussian: {
            const double p = post ? spec.param("p_post") : spec.param("p_pre");
            for (auto& v : out) {
                const bool b = rng.bernoulli(p);
                const double x = rng.normal();
                v = b ? x : 0.0;
            }
            break;
        }
        case Scenario::gaussian_mixture: {
            const double eps = post ? spec.param("epsilon") : 0.0;
            const double mean = spec.param("component_mean");
            for (auto& v : out) {
                const bool far = post && rng.bernoulli(eps);
                v = rng.normal() + (far ? mean : 0.0);
            }
            break;
        }
    }
}

/// Rows 1..tau from F, the rest from G (all from F without a change).
inline SampleMatrix generate(const ScenarioSpec& spec, std::uint64_t seed) {
    validate(spec);
    Rng rng(seed);
    SampleMatrix z(spec.n, spec.d);
    std::vector<double> row(spec.d);
    for (std::size_t i = 0; i < spec.n; ++i) {
        const bool post = spec.tau && i >= *spec.tau;
        sample_row(spec, post, rng, row);
        for (std::size_t k = 0; k < spec.d; ++k) z.set(i, k, row[k]);
    }
    return z;
}

inline nlohmann::json to_json_value(const ScenarioSpec& spec) {
    nlohmann::json params = nlohmann::json::object();
    for (const auto& [key, value] : scenario_info(spec.name).defaults) params[key] = spec.param(key);
    return {{"name", to_string(spec.name)},
            {"d", spec.d},
            {"N", spec.n},
            {"tau", spec.tau ? nlohmann::json(*spec.tau) : nlohmann::json(nullptr)},
            {"params", params}};
}

// ---------------------------------------------------------------------------
// Offline localization

struct ExperimentReport {
    ScenarioSpec scenario;
    std::size_t replications = 0;
    std::uint64_t seed = 0;
    std::array<std::size_t, 4> hit_counts{};  // |err| = 0, 1, 2, >= 3
    double mean_abs_error = 0.0;
    std::vector<std::uint64_t> rep_seeds;
    std::vector<std::size_t> estimates;

    double hit_rate(std::size_t bucket) const {
        return static_cast<double>(hit_counts.at(bucket)) / static_cast<double>(replications);
    }
};

/// Estimates outside {2..N-2} are recorded as N + 1.
inline std::size_t sanitize_estimate(std::size_t tau_hat, std::size_t n) {
    return (tau_hat >= 2 && tau_hat + 2 <= n) ? tau_hat : n + 1;
}

inline ExperimentReport run_localization(const ScenarioSpec& spec, std::size_t reps, std::uint64_t seed) {
    validate(spec);
    if (reps < 1) throw std::domain_error("run_localization: reps must be >= 1");
    if (!spec.tau) throw std::domain_error("run_localization needs a change point");
    if (spec.n < 4) throw std::domain_error("run_localization needs N >= 4");
    ExperimentReport rep;
    rep.scenario = spec;
    rep.replications = reps;
    rep.seed = seed;
    rep.rep_seeds.resize(reps);
    rep.estimates.resize(reps);
    for (std::size_t r = 0; r < reps; ++r) rep.rep_seeds[r] = derive_seed(seed, {r});
    parallel_for(reps, [&](std::size_t r) {
        const auto z = generate(spec, rep.rep_seeds[r]);
        rep.estimates[r] = sanitize_estimate(locate(scan(z)).tau_hat, spec.n);
    });
    double total = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
        const std::size_t est = rep.estimates[r];
        const std::size_t err = est > *spec.tau ? est - *spec.tau : *spec.tau - est;
        rep.hit_counts[std::min<std::size_t>(err, 3)]++;
        total += static_cast<double>(err);
    }
    rep.mean_abs_error = total / static_cast<double>(reps);
    return rep;
}

inline nlohmann::json to_json_value(const ExperimentReport& r) {
    return {{"version", kVersion},
            {"generator", kGeneratorId},
            {"scenario", to_json_value(r.scenario)},
            {"replications", r.replications},
            {"seed", r.seed},
            {"hit_counts", r.hit_counts},
            {"hit_rates", {r.hit_rate(0), r.hit_rate(1), r.hit_rate(2), r.hit_rate(3)}},
            {"mean_abs_error", r.mean_abs_error},
            {"rep_seeds", r.rep_seeds},
            {"estimates", r.estimates}};
}

inline std::string localization_csv_header() {
    return "scenario,d,N,tau,replications,seed,hit0,hit1,hit2,hit3plus,mean_abs_error";
}

inline std::string to_csv_row(const ExperimentReport& r) {
    std::ostringstream os;
    os.precision(17);
    os << to_string(r.scenario.name) << ',' << r.scenario.d << ',' << r.scenario.n << ',' << *r.scenario.tau << ','
       << r.replications << ',' << r.seed << ',' << r.hit_rate(0) << ',' << r.hit_rate(1) << ',' << r.hit_rate(2) << ','
       << r.hit_rate(3) << ',' << r.mean_abs_error;
    return os.str();
}

// ---------------------------------------------------------------------------
// Online monitoring

struct OnlineOptions {
    std::size_t mc_draws = kDefaultMcDraws;
    HacConfig hac;
    bool run_null = true;
    bool run_alternative = true;
};

struct OnlineReport {
    ScenarioSpec scenario;
    std::size_t window = 0;
    double alpha = 0.0;
    std::size_t nu = 0;
    std::size_t horizon = 0;
    std::size_t replications = 0;
    std::uint64_t seed = 0;
    std::size_t mc_draws = 0;
    std::size_t bandwidth = 0;
    double threshold = 0.0;
    bool null_run = false;
    bool alternative_run = false;

    // null streams
    double arl = 0.0;
    double arl_se = 0.0;
    std::size_t arl_censored = 0;
    double q_hat = 0.0;
    double q_hat_se = 0.0;
    double arl_lower = 0.0;  // 1/(4q) - 1/2
    double arl_upper = 0.0;  // N0/q
    std::vector<std::size_t> null_first_alarm;  // horizon when censored

    // change at nu
    double false_alarm = 0.0;
    double cedd = 0.0;
    double non_detection = 0.0;
    double localized_within_one = 0.0;  // |tau_on - nu| <= 1 among detections after nu
    std::vector<std::size_t> alt_alarm;  // 0 when no alarm by the horizon
    std::vector<std::size_t> alt_tau_on;
};

namespace detail {

inline constexpr std::uint64_t kNullPhase = 0;
inline constexpr std::uint64_t kAltPhase = 1;
inline constexpr std::uint64_t kCalibrationBlock = 0;
inline constexpr std::uint64_t kStream = 1;

inline SampleMatrix pre_change_block(const ScenarioSpec& spec, std::size_t rows, std::uint64_t seed) {
    ScenarioSpec s = spec;
    s.n = rows;
    s.tau.reset();
    return generate(s, seed);
}

}  // namespace detail

/// Replication r: a fresh N0-row block from F calibrates sigma; the stream is
/// F up to nu (or throughout for the null) and G afterwards. The threshold
/// depends only on (N0, alpha, draws, seed) and is simulated once.
inline OnlineReport run_online(const ScenarioSpec& spec, std::size_t window, double alpha, std::size_t nu,
                               std::size_t horizon, std::size_t reps, std::uint64_t seed,
                               const OnlineOptions& opt = {}) {
    ScenarioSpec stream_spec = spec;
    stream_spec.tau.reset();
    validate(stream_spec);
    if (window < 4) throw std::domain_error("run_online: window must be >= 4");
    if (reps < 1) throw std::domain_error("run_online: reps must be >= 1");
    if (horizon <= nu + window) throw std::domain_error("run_online: horizon must exceed nu + N0");

    OnlineReport out;
    out.scenario = spec;
    out.window = window;
    out.alpha = alpha;
    out.nu = nu;
    out.horizon = horizon;
    out.replications = reps;
    out.seed = seed;
    out.mc_draws = opt.mc_draws;
    out.bandwidth = opt.hac.bandwidth(spec.d);
    const CovarianceTemplate tpl(window);
    out.threshold = window_threshold(tpl, alpha, opt.mc_draws, seed);

    auto monitor_for = [&](std::uint64_t phase, std::size_t r, MonitorMode mode) {
        const auto block = detail::pre_change_block(spec, window, derive_seed(seed, {phase, r, detail::kCalibrationBlock}));
        CalibrateOptions co;
        co.mc_draws = opt.mc_draws;
        co.mode = mode;
        return calibrate_monitor(block, alpha, opt.hac, seed, co, out.threshold);
    };

    out.null_run = opt.run_null;
    out.alternative_run = opt.run_alternative;
    if (opt.run_null) {
        out.null_first_alarm.assign(reps, 0);
        std::vector<std::size_t> exceed(reps, 0);
        parallel_for(reps, [&](std::size_t r) {
            const auto cfg = monitor_for(detail::kNullPhase, r, MonitorMode::continuous);
            MonitorState state(window);
            Rng rng(derive_seed(seed, {detail::kNullPhase, r, detail::kStream}));
            std::vector<double> row(spec.d);
            std::size_t first = 0;
            for (std::size_t s = 1; s <= horizon; ++s) {
                sample_row(spec, false, rng, row);
                if (step(state, cfg, row) && first == 0) first = s;
            }
            out.null_first_alarm[r] = first == 0 ? horizon : first;
            exceed[r] = state.alarms().size();
        });
        const double windows = static_cast<double>(horizon - window + 1);
        double sum = 0.0, sum2 = 0.0, qs = 0.0, qs2 = 0.0;
        for (std::size_t r = 0; r < reps; ++r) {
            const double v = static_cast<double>(out.null_first_alarm[r]);
            sum += v;
            sum2 += v * v;
            const double q = static_cast<double>(exceed[r]) / windows;
            qs += q;
            qs2 += q * q;
            if (exceed[r] == 0) ++out.arl_censored;
        }
        const double R = static_cast<double>(reps);
        out.arl = sum / R;
        out.q_hat = qs / R;
        if (reps > 1) {
            out.arl_se = std::sqrt(std::max(0.0, (sum2 - R * out.arl * out.arl) / (R - 1.0)) / R);
            out.q_hat_se = std::sqrt(std::max(0.0, (qs2 - R * out.q_hat * out.q_hat) / (R - 1.0)) / R);
        }
        if (out.q_hat > 0.0) {
            out.arl_lower = 1.0 / (4.0 * out.q_hat) - 0.5;
            out.arl_upper = static_cast<double>(window) / out.q_hat;
        } else {
            out.arl_lower = 0.0;
            out.arl_upper = std::numeric_limits<double>::infinity();
        }
    }

    if (opt.run_alternative) {
        out.alt_alarm.assign(reps, 0);
        out.alt_tau_on.assign(reps, 0);
        parallel_for(reps, [&](std::size_t r) {
            const auto cfg = monitor_for(detail::kAltPhase, r, MonitorMode::first_alarm);
            MonitorState state(window);
            Rng rng(derive_seed(seed, {detail::kAltPhase, r, detail::kStream}));
            std::vector<double> row(spec.d);
            for (std::size_t s = 1; s <= horizon; ++s) {
                sample_row(spec, s > nu, rng, row);
                if (step(state, cfg, row)) {
                    out.alt_alarm[r] = s;
                    out.alt_tau_on[r] = localize_alarm(state, cfg);
                    break;
                }
            }
        });
        std::size_t fa = 0, nd = 0, detected = 0, close = 0;
        double delay = 0.0;
        for (std::size_t r = 0; r < reps; ++r) {
            const std::size_t a = out.alt_alarm[r];
            if (a == 0) {
                ++nd;
            } else if (a <= nu) {
                ++fa;
            } else {
                ++detected;
                delay += static_cast<double>(a - nu);
                const std::size_t t = out.alt_tau_on[r];
                if ((t > nu ? t - nu : nu - t) <= 1) ++close;
            }
        }
        const double R = static_cast<double>(reps);
        out.false_alarm = static_cast<double>(fa) / R;
        out.non_detection = static_cast<double>(nd) / R;
        out.cedd = detected ? delay / static_cast<double>(detected) : std::numeric_limits<double>::quiet_NaN();
        out.localized_within_one = detected ? static_cast<double>(close) / static_cast<double>(detected) : 0.0;
    }
    return out;
}

inline nlohmann::json to_json_value(const OnlineReport& r) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    nlohmann::json j{{"version", kVersion},
                     {"generator", kGeneratorId},
                     {"scenario", to_json_value(r.scenario)},
                     {"window", r.window},
                     {"alpha", r.alpha},
                     {"nu", r.nu},
                     {"horizon", r.horizon},
                     {"replications", r.replications},
                     {"seed", r.seed},
                     {"mc_draws", r.mc_draws},
                     {"bandwidth", r.bandwidth},
                     {"threshold", r.threshold}};
    if (r.null_run) {
        j["arl"] = r.arl;
        j["arl_se"] = r.arl_se;
        j["arl_censored"] = r.arl_censored;
        j["q_hat"] = r.q_hat;
        j["q_hat_se"] = r.q_hat_se;
        j["arl_lower"] = r.arl_lower;
        j["arl_upper"] = num(r.arl_upper);
    }
    if (r.alternative_run) {
        j["false_alarm"] = r.false_alarm;
        j["cedd"] = num(r.cedd);
        j["non_detection"] = r.non_detection;
        j["localized_within_one"] = r.localized_within_one;
    }
    return j;
}

inline std::string online_csv_header() {
    return "scenario,d,N0,alpha,nu,horizon,replications,seed,threshold,arl,arl_se,arl_censored,q_hat,fa,cedd,nd";
}

inline std::string to_csv_row(const OnlineReport& r) {
    std::ostringstream os;
    os.precision(17);
    os << to_string(r.scenario.name) << ',' << r.scenario.d << ',' << r.window << ',' << r.alpha << ',' << r.nu << ','
       << r.horizon << ',' << r.replications << ',' << r.seed << ',' << r.threshold << ',';
    if (r.null_run) os << r.arl << ',' << r.arl_se << ',' << r.arl_censored << ',' << r.q_hat << ',';
    else os << ",,,,";
    if (r.alternative_run) {
        os << r.false_alarm << ',';
        if (std::isfinite(r.cedd)) os << r.cedd;
        os << ',' << r.non_detection;
    } else {
        os << ",,";
    }
    return os.str();
}

}  // namespace dak
