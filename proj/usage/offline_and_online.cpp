// Offline test on a simulated Cauchy scale change, then online monitoring of
// a stream whose distribution changes at s = 50.

#include <iostream>

#include "dak/calibration.hpp"
#include "dak/monitor.hpp"
#include "dak/scan.hpp"
#include "dak/simgen.hpp"

int main() {
    using namespace dak;

    ScenarioSpec spec;
    spec.name = Scenario::cauchy_scale;
    spec.d = 1000;
    spec.n = 40;
    spec.tau = 15;
    const SampleMatrix z = generate(spec, 2024);

    const ScanProfile profile = scan(z);
    const CalibrationModel model = calibrate(profile, 0.05, HacConfig{}, 50000, 7);
    const TestOutcome t = run_test(profile, model);
    std::cout << "offline: S_d=" << t.s_d << " c_alpha=" << t.threshold << " reject=" << t.reject
              << " tau_hat=" << t.tau_hat.tau_hat << "\n";

    ScenarioSpec online = spec;
    online.name = Scenario::cauchy_gaussian_mix;
    online.tau.reset();
    const SampleMatrix block = generate(ScenarioSpec{online.name, online.d, 10, std::nullopt, {}}, 11);
    const MonitorConfig cfg = calibrate_monitor(block, 0.002, HacConfig{}, 12, CalibrateOptions{50000});

    online.n = 80;
    online.tau = 49;  // rows 50.. are post-change
    const SampleMatrix stream = generate(online, 13);
    MonitorState state(cfg.window);
    std::vector<double> row(stream.n_dims());
    for (std::size_t s = 0; s < stream.n_obs() && !state.halted(); ++s) {
        for (std::size_t k = 0; k < row.size(); ++k) row[k] = stream(s, k);
        if (const auto alarm = step(state, cfg, row)) {
            std::cout << "online: alarm at s=" << alarm->time << " M=" << alarm->statistic
                      << " tau_on=" << alarm->tau_hat << "\n";
        }
    }
    if (state.alarms().empty()) std::cout << "online: no alarm\n";
    return 0;
}
