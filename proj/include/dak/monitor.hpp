#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dak/calibration.hpp"
#include "dak/core/error.hpp"
#include "dak/core/rng.hpp"
#include "dak/core/sample_matrix.hpp"
#include "dak/scan.hpp"
#include "dak/theory.hpp"

namespace dak {

enum class MonitorMode { first_alarm, continuous };

inline const char* to_string(MonitorMode m) { return m == MonitorMode::first_alarm ? "first-alarm" : "continuous"; }

inline MonitorMode parse_monitor_mode(const std::string& s) {
    if (s == "first-alarm") return MonitorMode::first_alarm;
    if (s == "continuous") return MonitorMode::continuous;
    throw input_error("unknown monitor mode '" + s + "' (expected first-alarm or continuous)");
}

/// Frozen detector: window length, calibration and threshold.
struct MonitorConfig {
    std::size_t window = 0;
    double alpha = 0.0;
    CalibrationModel calibration;
    MonitorMode mode = MonitorMode::first_alarm;

    double threshold() const { return *calibration.c_alpha; }
    double sigma() const { return calibration.sigma_long; }
};

struct CalibrateOptions {
    std::size_t mc_draws = kDefaultMcDraws;
    bool permutation_sigma = false;
    std::size_t n_perm = 200;
    MonitorMode mode = MonitorMode::first_alarm;
};

/// Substream id for permutation draws under the calibration seed.
inline constexpr std::uint64_t kPermutationStream = 0x7065726d75746532ULL;

/// c_{alpha,N0} for a window; depends only on (N0, alpha, draws, seed) and
/// equals mc_threshold with the same seed.
inline double window_threshold(const CovarianceTemplate& tpl, double alpha, std::size_t draws, std::uint64_t seed) {
    return mc_threshold(tpl, alpha, draws, seed);
}

/// Builds a config from an already calibrated model (e.g. loaded from JSON).
inline MonitorConfig make_monitor_config(const CalibrationModel& model, MonitorMode mode = MonitorMode::first_alarm) {
    if (model.n_obs < 4) throw input_error("calibration window must be >= 4");
    if (!model.c_alpha) throw input_error("calibration model has no threshold");
    if (model.degenerate || !(model.sigma_long > 0.0)) {
        throw degenerate_calibration("calibration block gives a zero long-run variance");
    }
    MonitorConfig cfg;
    cfg.window = model.n_obs;
    cfg.alpha = model.alpha;
    cfg.calibration = model;
    cfg.mode = mode;
    return cfg;
}

/// sigma from a pre-change block of N0 rows, plus the threshold. A
/// precomputed threshold may be passed to skip the Monte-Carlo step.
inline MonitorConfig calibrate_monitor(const SampleMatrix& block, double alpha, const HacConfig& hac, std::uint64_t seed,
                                       const CalibrateOptions& opt = {},
                                       std::optional<double> precomputed_threshold = std::nullopt) {
    if (block.n_obs() < 4) throw input_error("calibration block needs N0 >= 4 rows");
    const CovarianceTemplate tpl(block.n_obs());
    CalibrationModel m = sigma_long_plugin(scan(block), hac);
    if (opt.permutation_sigma) {
        m.sigma_method = "permutation";
        m.sigma_long = permutation_whitened_sigma(block, tpl, opt.n_perm, derive_seed(seed, {kPermutationStream}));
        m.sigma2_long = m.sigma_long * m.sigma_long;
        m.degenerate = !(m.sigma_long > 0.0);
    }
    if (m.degenerate) throw degenerate_calibration("calibration block gives a zero long-run variance");
    m.alpha = alpha;
    m.mc_draws = opt.mc_draws;
    m.seed = seed;
    m.k_min_eigenvalue = tpl.min_eigenvalue();
    m.c_alpha = precomputed_threshold ? *precomputed_threshold : window_threshold(tpl, alpha, opt.mc_draws, seed);
    return make_monitor_config(m, opt.mode);
}

struct AlarmEvent {
    std::size_t time = 0;       // stream index s (1-based)
    double statistic = 0.0;     // M_d(s)
    double threshold = 0.0;
    std::size_t window_argmax = 0;  // k in T0
    std::size_t tau_hat = 0;        // (s - N0) + k
};

struct StatPoint {
    std::size_t time = 0;
    double value = 0.0;
    std::size_t window_argmax = 0;
};

/// Window statistic M = max_k sqrt(d) W(k) / sigma and its smallest argmax.
inline StatPoint window_statistic(const SampleMatrix& window, double sigma) {
    const auto w = average_rows(xi_matrix(window));
    const std::size_t s = first_argmax(w);
    return {0, std::sqrt(static_cast<double>(window.n_dims())) * w[s] / sigma, s + 2};
}

/// Sliding-window state for one stream.
class MonitorState {
public:
    explicit MonitorState(std::size_t window) : window_(window) {
        if (window < 4) throw input_error("monitor window must be >= 4");
    }

    std::size_t time() const noexcept { return time_; }
    std::size_t window() const noexcept { return window_; }
    std::size_t dims() const noexcept { return dims_; }
    bool full() const noexcept { return time_ >= window_; }
    bool halted() const noexcept { return halted_; }
    const std::vector<AlarmEvent>& alarms() const noexcept { return alarms_; }
    const std::vector<StatPoint>& series() const noexcept { return series_; }
    std::optional<double> last_stat() const {
        if (series_.empty()) return std::nullopt;
        return series_.back().value;
    }

    /// Rows of the current window, oldest first.
    SampleMatrix window_matrix() const {
        const std::size_t rows = std::min(time_, window_);
        SampleMatrix m(rows, dims_);
        for (std::size_t i = 0; i < rows; ++i) {
            const std::size_t slot = (time_ - rows + i) % window_;
            for (std::size_t k = 0; k < dims_; ++k) m.set(i, k, ring_[slot * dims_ + k]);
        }
        return m;
    }

    /// Appends an observation. Throws input_error on a dimension change or
    /// non-finite entry, state_error once halted.
    void push(std::span<const double> obs) {
        if (halted_) throw state_error("monitor halted after the first alarm");
        if (time_ == 0) {
            if (obs.empty()) throw input_error("observation has no coordinates");
            dims_ = obs.size();
            ring_.assign(window_ * dims_, 0.0);
        } else if (obs.size() != dims_) {
            throw input_error("observation " + std::to_string(time_ + 1) + " has " + std::to_string(obs.size()) +
                              " coordinates, expected " + std::to_string(dims_));
        }
        for (double v : obs)
            if (!std::isfinite(v)) throw input_error("non-finite value in observation " + std::to_string(time_ + 1));
        std::copy(obs.begin(), obs.end(), ring_.begin() + static_cast<std::ptrdiff_t>((time_ % window_) * dims_));
        ++time_;
    }

    void record(const StatPoint& p) { series_.push_back(p); }
    void record_alarm(const AlarmEvent& a) { alarms_.push_back(a); }
    void halt() noexcept { halted_ = true; }

private:
    std::size_t window_;
    std::size_t dims_ = 0;
    std::size_t time_ = 0;
    std::vector<double> ring_;
    std::vector<StatPoint> series_;
    std::vector<AlarmEvent> alarms_;
    bool halted_ = false;
};

/// Pushes one observation; once the window is full, computes M_d(s) and
/// returns an alarm when it exceeds the threshold.
inline std::optional<AlarmEvent> step(MonitorState& state, const MonitorConfig& config, std::span<const double> obs) {
    if (state.window() != config.window) throw input_error("monitor state and config disagree on the window length");
    if (config.calibration.n_dims != 0 && obs.size() != config.calibration.n_dims) {
        throw input_error("observation has " + std::to_string(obs.size()) + " coordinates, calibration used " +
                          std::to_string(config.calibration.n_dims));
    }
    state.push(obs);
    if (!state.full()) return std::nullopt;
    StatPoint p = window_statistic(state.window_matrix(), config.sigma());
    p.time = state.time();
    state.record(p);
    if (!(p.value > config.threshold())) return std::nullopt;
    AlarmEvent a{p.time, p.value, config.threshold(), p.window_argmax, p.time - config.window + p.window_argmax};
    state.record_alarm(a);
    if (config.mode == MonitorMode::first_alarm) state.halt();
    return a;
}

/// tau_on = (nu_hat - N0) + smallest within-window argmax, at the first alarm.
inline std::size_t localize_alarm(const MonitorState& state, const MonitorConfig& config) {
    if (state.alarms().empty()) throw state_error("localize_alarm: no alarm has been raised");
    const auto& a = state.alarms().front();
    return a.time - config.window + a.window_argmax;
}

struct ExcursionBand {
    std::size_t start = 0;
    std::size_t end = 0;
    std::size_t peak_time = 0;
    double peak_value = 0.0;
};

/// Maximal runs of consecutive suprathreshold points, each with its first peak.
inline std::vector<ExcursionBand> excursion_bands(std::span<const StatPoint> series, double threshold) {
    std::vector<ExcursionBand> bands;
    bool open = false;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& p = series[i];
        const bool above = p.value > threshold;
        const bool contiguous = open && i > 0 && p.time == series[i - 1].time + 1;
        if (above && contiguous) {
            auto& b = bands.back();
            b.end = p.time;
            if (p.value > b.peak_value) {
                b.peak_value = p.value;
                b.peak_time = p.time;
            }
        } else if (above) {
            bands.push_back({p.time, p.time, p.time, p.value});
            open = true;
        } else {
            open = false;
        }
    }
    return bands;
}

}  // namespace dak
