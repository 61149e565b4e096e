#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dak/cli/commands.hpp"
#include "support/oracles.hpp"

using namespace dak;
using nlohmann::json;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args, const std::string& input = "") {
    std::istringstream in(input);
    std::ostringstream out, err;
    Run r;
    r.code = cli::run_cli(args, in, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string to_csv(const SampleMatrix& z) {
    std::ostringstream os;
    io::write_csv(os, z);
    return os.str();
}

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "dak_cli_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("version and usage errors") {
    const auto v = run({"--version"});
    CHECK(v.code == 0);
    CHECK(v.out.find(kVersion) != std::string::npos);
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"test", "--alpha", "1.5"}, "1\n2\n3\n4\n").code == 2);
}

TEST_CASE("scan reports the profile and estimate") {
    const auto z = oracle::normal_sample(12, 40, 81);
    const auto r = run({"scan"}, to_csv(z));
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    const auto p = scan(z);
    CHECK(j["tau_hat"] == locate(p).tau_hat);
    CHECK(j["w_values"].get<std::vector<double>>() == p.w_values);
    CHECK(j["version"] == kVersion);

    const auto c = run({"scan", "--format", "csv"}, to_csv(z));
    CHECK(c.out.rfind("t,w\n2,", 0) == 0);
}

TEST_CASE("malformed input exits 2 without partial output") {
    const auto bad = run({"scan"}, "1,2\n3,x\n5,6\n7,8\n");
    CHECK(bad.code == 2);
    CHECK(bad.out.empty());
    CHECK(bad.err.find("line 2") != std::string::npos);
    CHECK(run({"scan"}, "1,2\n3\n5,6\n7,8\n").code == 2);
    CHECK(run({"scan"}, "1\n2\n3\n").code == 2);
    CHECK(run({"scan"}, "1\ninf\n3\n4\n").code == 2);
    CHECK(run({"scan"}, "").code == 2);
    CHECK(run({"scan", "--input", "/nonexistent/file.csv"}).code == 2);
}

TEST_CASE("test command, seeds and exit codes") {
    const auto z = oracle::normal_sample(16, 200, 82);
    const auto r = run({"test", "--seed", "5", "--draws", "5000"}, to_csv(z));
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j["seed"] == 5);
    CHECK(j["seed_generated"] == false);
    CHECK(j["mc_draws"] == 5000);
    CHECK(j["bandwidth"] == 5);
    const auto p = scan(z);
    const auto t = run_test(p, calibrate(p, 0.05, {}, 5000, 5));
    CHECK(j["s_d"].get<double>() == t.s_d);
    CHECK(j["c_alpha"].get<double>() == t.threshold);

    const auto g = run({"test", "--draws", "2000"}, to_csv(z));
    CHECK(json::parse(g.out)["seed_generated"] == true);

    SampleMatrix shifted(30, 300);
    Rng rng(83);
    for (std::size_t i = 0; i < 30; ++i)
        for (std::size_t k = 0; k < 300; ++k) shifted.set(i, k, rng.normal() + (i >= 12 ? 2.0 : 0.0));
    CHECK(run({"test", "--seed", "1", "--draws", "5000", "--reject-exit"}, to_csv(shifted)).code == 1);
    CHECK(run({"test", "--seed", "1", "--draws", "5000"}, to_csv(shifted)).code == 0);

    const auto flat = run({"test", "--seed", "1", "--draws", "5000"}, to_csv(SampleMatrix(10, 20)));
    CHECK(flat.code == 3);
    CHECK(flat.out.empty());
    CHECK(run({"test", "--seed", "1"}, "1\n2\n3\n4\n5\n").code == 3);  // d = 1: no HAC bandwidth
}

TEST_CASE("quantile command") {
    const auto r = run({"quantile", "--n", "4", "--seed", "9", "--draws", "200000"});
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j["c_alpha"].get<double>() == mc_threshold(covariance_template(4), 0.05, 200000, 9));
    CHECK(j["N"] == 4);
    CHECK(run({"quantile", "--n", "3"}).code == 2);
}

TEST_CASE("calibrate then monitor") {
    const auto block = oracle::normal_sample(10, 200, 84);
    const auto cal_path = scratch("cal.json");
    const auto r = run({"calibrate", "--seed", "3", "--draws", "20000", "--alpha", "0.01", "--output", cal_path.string()},
                       to_csv(block));
    REQUIRE(r.code == 0);
    CHECK(r.out.empty());
    const auto model = json::parse(slurp(cal_path))["model"].get<CalibrationModel>();
    CHECK(model.n_obs == 10);
    CHECK(*model.c_alpha == window_threshold(covariance_template(10), 0.01, 20000, 3));

    SampleMatrix stream(60, 200);
    Rng rng(85);
    for (std::size_t i = 0; i < 60; ++i)
        for (std::size_t k = 0; k < 200; ++k) stream.set(i, k, rng.normal() + (i >= 30 ? 2.0 : 0.0));
    const auto m = run({"monitor", "--calibration", cal_path.string()}, to_csv(stream));
    REQUIRE(m.code == 0);
    std::vector<json> lines;
    std::istringstream ls(m.out);
    for (std::string line; std::getline(ls, line);) lines.push_back(json::parse(line));
    REQUIRE(lines.size() == 2);
    const auto& alarm = lines[0];
    const auto& summary = lines[1];
    CHECK(summary["type"] == "summary");
    CHECK(summary["nu_hat"] == alarm["time"]);
    CHECK(summary["tau_on"] == alarm["tau_hat"]);
    CHECK(alarm["time"].get<std::size_t>() > 30);

    // the library gives the same first alarm
    const auto cfg = make_monitor_config(model);
    MonitorState state(10);
    std::vector<double> row(200);
    for (std::size_t i = 0; i < 60 && !state.halted(); ++i) {
        for (std::size_t k = 0; k < 200; ++k) row[k] = stream(i, k);
        step(state, cfg, row);
    }
    REQUIRE(state.alarms().size() == 1);
    CHECK(alarm["time"] == state.alarms()[0].time);
    CHECK(alarm["statistic"].get<double>() == state.alarms()[0].statistic);

    const auto cont = run({"monitor", "--calibration", cal_path.string(), "--mode", "continuous"}, to_csv(stream));
    const auto last = cont.out.substr(cont.out.rfind('\n', cont.out.size() - 2) + 1);
    CHECK(json::parse(last)["bands"].size() >= 1);

    const auto csv = run({"monitor", "--calibration", cal_path.string(), "--format", "csv"}, to_csv(stream));
    CHECK(std::count(csv.out.begin(), csv.out.end(), '\n') == static_cast<std::ptrdiff_t>(1 + (state.alarms()[0].time - 9)));

    const auto block_path = scratch("block.csv");
    std::ofstream(block_path) << to_csv(block);
    const auto direct = run({"monitor", "--calib-input", block_path.string(), "--seed", "3", "--draws", "20000",
                             "--alpha", "0.01"},
                            to_csv(stream));
    CHECK(direct.out.substr(0, direct.out.find('\n')) == m.out.substr(0, m.out.find('\n')));

    CHECK(run({"monitor"}, to_csv(stream)).code == 2);
    CHECK(run({"monitor", "--calibration", cal_path.string()}, "1,2\n").code == 2);
}

TEST_CASE("simulate reports and emitted data round trip") {
    const auto csv_path = scratch("rep0.csv");
    const auto bin_path = scratch("rep0.bin");
    const std::vector<std::string> base{"simulate", "--scenario", "cauchy_scale", "--d", "150", "--N", "20",
                                        "--tau", "7", "--reps", "6", "--seed", "11"};
    auto with = [&](std::vector<std::string> extra) {
        auto a = base;
        a.insert(a.end(), extra.begin(), extra.end());
        return a;
    };
    const auto r = run(with({"--emit-data", csv_path.string()}));
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    const auto est0 = j["reports"][0]["estimates"][0].get<std::size_t>();
    CHECK(j["seed"] == 11);
    CHECK(j["reports"][0]["scenario"]["d"] == 150);

    const auto sc = run({"scan", "--input", csv_path.string()});
    CHECK(json::parse(sc.out)["tau_hat"] == est0);
    REQUIRE(run(with({"--emit-data", bin_path.string()})).code == 0);
    const auto sb = run({"scan", "--input", bin_path.string()});
    CHECK(json::parse(sb.out)["tau_hat"] == est0);
    CHECK(json::parse(sb.out)["w_values"] == json::parse(sc.out)["w_values"]);

    const auto a1 = run(with({"--threads", "1"}));
    const auto a3 = run(with({"--threads", "3"}));
    CHECK(a1.out == a3.out);
    CHECK(a1.out == r.out);

    CHECK(run(with({"--param", "lambda=-1"})).code == 2);
    CHECK(run(with({"--param", "nope=1"})).code == 2);
    CHECK(run(with({"--param", "lambda"})).code == 2);
    CHECK(run({"simulate", "--scenario", "nope"}).code == 2);
    CHECK(run({"simulate", "--scenario", "cauchy_scale", "--d", "10,20", "--emit-data", csv_path.string()}).code == 2);

    const auto multi = run({"simulate", "--scenario", "dirichlet", "--d", "20,40", "--N", "12", "--tau", "5", "--reps",
                            "3", "--seed", "2", "--format", "csv"});
    REQUIRE(multi.code == 0);
    CHECK(std::count(multi.out.begin(), multi.out.end(), '\n') == 3);
}

TEST_CASE("online simulate") {
    const auto r = run({"simulate", "--scenario", "gaussian_location", "--online", "--d", "40", "--window", "8",
                        "--nu", "20", "--horizon", "60", "--reps", "4", "--seed", "12", "--draws", "5000", "--alpha",
                        "0.01"});
    REQUIRE(r.code == 0);
    const auto rep = json::parse(r.out)["reports"][0];
    CHECK(rep["window"] == 8);
    CHECK(rep["mc_draws"] == 5000);
    CHECK(rep["bandwidth"] == 3);
    CHECK(json::parse(r.out)["mode"] == "online");
}
