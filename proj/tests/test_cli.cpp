#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "revdiff/cli.hpp"
#include "revdiff/config.hpp"
#include "revdiff/data.hpp"
#include "revdiff/errors.hpp"
#include "revdiff/io.hpp"

using namespace revdiff;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("revdiff_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

fs::path write_config(const fs::path& dir, const std::string& text) {
    const auto p = dir / "config.json";
    std::ofstream(p) << text;
    return p;
}

int run(std::vector<std::string> args, std::string* out_text = nullptr) {
    args.insert(args.begin(), "revdiff");
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    if (out_text) *out_text = out.str() + err.str();
    return code;
}

}  // namespace

TEST_CASE("config parsing") {
    const auto cfg = parse_config(nlohmann::json::parse(
        R"({"seed": 5, "data": {"source": "points", "points": [[0], [1]]}, "pde": {"M": 200}})"));
    CHECK(cfg.seed == 5);
    CHECK(cfg.pde.intervals == 200);
    CHECK(cfg.data.points.size() == 2);
    CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"data": {"colour": 1}})")), ConfigError);
    CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"schedule": {"steps": "many"}})")), ConfigError);
    CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"sampler": {"kind": "rk4"}})")), ConfigError);
    // canonical form round-trips and pins the hash
    const auto again = parse_config(nlohmann::json::parse(to_json(cfg).dump()));
    CHECK(config_hash(again) == config_hash(cfg));
    auto other = cfg;
    other.seed = 6;
    CHECK(config_hash(other) != config_hash(cfg));
}

TEST_CASE("data sources") {
    std::istringstream in("# comment\nx,y\n0,1\n\n2,3\n");
    const auto s = read_samples_csv(in);
    CHECK(s.size() == 2);
    CHECK(s.point(1)[1] == 3.0);
    std::istringstream ragged("0,1\n2\n");
    CHECK_THROWS_AS(read_samples_csv(ragged), ConfigError);
    std::istringstream junk("0,1\n2,abc\n");
    CHECK_THROWS_AS(read_samples_csv(junk), ConfigError);

    const auto ring = make_ring(10, 1.0);
    CHECK(ring.size() == 10);
    CHECK(ring.point(0)[0] == 1.0);
    for (std::size_t i = 0; i < 10; ++i)
        CHECK(std::hypot(ring.point(i)[0], ring.point(i)[1]) == doctest::Approx(1.0));
    const auto grid = make_grid(3, 2, 1.0);
    CHECK(grid.size() == 9);
    CHECK(grid.weighted_mean()[0] == doctest::Approx(0.0));
    const auto blobs = make_blobs(3, 5, 2, 0.1, 1);
    CHECK(blobs.size() == 15);
    CHECK(make_blobs(3, 5, 2, 0.1, 1).coords()[7] == blobs.coords()[7]);
}

TEST_CASE("number formatting and hashing") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(hex64(255) == "00000000000000ff");
}

TEST_CASE("binary trajectory round trip") {
    const KernelScore field(SampleSet(2, {0.0, 0.0, 1.0, 1.0}));
    const auto sched = make_schedule(ScheduleKind::Geometric, 2.0, 5, 1e-3);
    const auto b = run_reverse(field, sched, InitialLaw::standard_normal(2), 7, 3);
    std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
    write_trajectory_binary(buf, b, 0xabcdef);
    const auto r = read_trajectory_binary(buf);
    CHECK(r.config_hash == 0xabcdef);
    CHECK(r.n_traj == 7);
    CHECK(r.dim == 2);
    CHECK(r.steps.size() == 6);
    CHECK(r.t[0] == 2.0);
    CHECK(r.states == b.states);
    std::istringstream bad("RDLB2\0\0\0");
    CHECK_THROWS_AS(read_trajectory_binary(bad), ConfigError);
}

TEST_CASE("cli: help, list and bad input") {
    std::string text;
    CHECK(run({"--help"}, &text) == kExitOk);
    CHECK(text.find("reverse") != std::string::npos);
    CHECK(run({"verify", "--list"}, &text) == kExitOk);
    CHECK(text.find("step.dual-form") != std::string::npos);
    CHECK(text.find("PASS") == std::string::npos);
    CHECK(run({"frobnicate"}) == kExitConfigError);
    CHECK(run({"reverse", "--sampler", "rk4"}) == kExitConfigError);
    const auto dir = scratch("bad");
    CHECK(run({"reverse", "--config", write_config(dir, R"({"bogus": {}})").string(), "--out", dir.string()}) ==
          kExitConfigError);
    CHECK(run({"reverse", "--config", write_config(dir, R"({"sampler": {"n_traj": 0}})").string(), "--out",
               dir.string()}) == kExitConfigError);
}

TEST_CASE("cli: verify passes and the negative control fails") {
    CHECK(run({"verify"}) == kExitOk);
    std::string text;
    CHECK(run({"verify", "--break-sinh"}, &text) == kExitVerifyFailed);
    CHECK(text.find("FAIL step.dual-form") != std::string::npos);
}

TEST_CASE("cli: forward trajectories") {
    const auto dir = scratch("forward");
    const auto cfg = write_config(dir, R"({"data": {"source": "points", "points": [[-1], [1]]},
        "schedule": {"steps": 3}, "sampler": {"n_traj": 10}})");
    REQUIRE(run({"forward", "--config", cfg.string(), "--out", (dir / "a").string()}) == kExitOk);
    REQUIRE(run({"forward", "--config", cfg.string(), "--out", (dir / "b").string(), "--workers", "3"}) == kExitOk);
    const auto text = slurp(dir / "a" / "forward_trajectories.csv");
    std::size_t rows = 0;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#' && line[0] != 't') ++rows;
    CHECK(rows == 40);
    CHECK(text.rfind("# config_hash=", 0) == 0);
    CHECK(slurp(dir / "a" / "forward_trajectories.csv") == slurp(dir / "b" / "forward_trajectories.csv"));
    CHECK(slurp(dir / "a" / "manifest.json") == slurp(dir / "b" / "manifest.json"));
    const auto manifest = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
    CHECK(manifest["command"] == "forward");
    CHECK(manifest["outputs"][0]["fnv1a"] == hex64(fnv1a64(text)));
}

TEST_CASE("cli: forward pde writes one density per saved time") {
    const auto dir = scratch("fpde");
    const auto cfg = write_config(dir, R"({"data": {"source": "points", "points": [[-1], [1]]},
        "pde": {"M": 200, "save_times": [0.5, 1.0, 2.0]}})");
    REQUIRE(run({"forward", "--kind", "pde", "--config", cfg.string(), "--out", dir.string()}) == kExitOk);
    // the initial and final states are always kept
    for (int k = 0; k < 5; ++k) {
        const auto f = dir / ("pde_forward_00" + std::to_string(k) + ".csv");
        REQUIRE(fs::exists(f));
        CHECK(slurp(f).rfind("# config_hash=", 0) == 0);
    }
    CHECK_FALSE(fs::exists(dir / "pde_forward_005.csv"));
    CHECK(fs::exists(dir / "pde_report.json"));
}

TEST_CASE("cli: reverse with one atom collapses") {
    const auto dir = scratch("one");
    const auto cfg = write_config(dir, R"({"data": {"source": "points", "points": [[0.5, -0.5]]},
        "sampler": {"n_traj": 200}})");
    REQUIRE(run({"reverse", "--config", cfg.string(), "--out", dir.string(), "--format", "bin"}) == kExitOk);
    const auto rep = nlohmann::json::parse(slurp(dir / "memorization_report.json"));
    CHECK(rep["frac_within_eps"] == 1.0);
    std::ifstream bin(dir / "reverse_trajectories.bin", std::ios::binary);
    const auto traj = read_trajectory_binary(bin);
    CHECK(hex64(traj.config_hash) == rep["config_hash"]);
}

TEST_CASE("cli: exact and EM samplers agree on atom frequencies") {
    const auto dir = scratch("em");
    const auto cfg = write_config(dir, R"({"data": {"source": "ring", "n": 4},
        "schedule": {"steps": 500}, "sampler": {"n_traj": 4000}})");
    REQUIRE(run({"reverse", "--config", cfg.string(), "--out", (dir / "x").string(), "--format", "json"}) ==
            kExitOk);
    REQUIRE(run({"reverse", "--config", cfg.string(), "--out", (dir / "e").string(), "--format", "json",
                 "--sampler", "em"}) == kExitOk);
    const auto a = nlohmann::json::parse(slurp(dir / "x" / "memorization_report.json"));
    const auto b = nlohmann::json::parse(slurp(dir / "e" / "memorization_report.json"));
    double tv = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
        tv += std::abs(a["empirical_weights"][i].get<double>() - b["empirical_weights"][i].get<double>());
    CHECK(0.5 * tv < 0.05);
    CHECK(b["sampler"] == "em");
}

TEST_CASE("cli: remaining subcommands") {
    const auto dir = scratch("misc");
    const auto cfg = write_config(dir, R"({"data": {"source": "points", "points": [[-1], [1]]},
        "pde": {"M": 200, "mode": "reverse-stable"}, "loss": {"n_mc": 500},
        "analysis": {"bandwidth": 0.5, "n_mc": 20000, "y_bins": 2, "x_start_count": 5}})");
    CHECK(run({"pde", "--config", cfg.string(), "--out", (dir / "p").string()}) == kExitOk);
    CHECK(fs::exists(dir / "p" / "pde_reverse_stable_001.csv"));
    const auto prep = nlohmann::json::parse(slurp(dir / "p" / "pde_report.json"));
    CHECK(prep["round_trip_l1"].get<double>() < 2e-2);
    CHECK(run({"loss", "--config", cfg.string(), "--out", (dir / "l").string()}) == kExitOk);
    const auto lrep = nlohmann::json::parse(slurp(dir / "l" / "loss_report.json"));
    CHECK(std::abs(lrep["decomposition_gap"].get<double>()) < 1e-10);
    CHECK(run({"weights", "--config", cfg.string(), "--out", (dir / "w").string()}) == kExitOk);
    CHECK(fs::exists(dir / "w" / "terminal_weights.csv"));
    CHECK(run({"timereversal", "--config", cfg.string(), "--out", (dir / "t").string()}) == kExitOk);
    CHECK(fs::exists(dir / "t" / "timereversal.csv"));
    // too few paths per y-bin is a statistical failure
    const auto starved = write_config(dir, R"({"data": {"source": "points", "points": [[0]]},
        "analysis": {"n_mc": 100}})");
    CHECK(run({"timereversal", "--config", starved.string(), "--out", (dir / "s").string()}) ==
          kExitNumericalError);
}
