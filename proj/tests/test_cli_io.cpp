#include "cli.hpp"
#include "fixtures.hpp"
#include "tdcr/cli_io.hpp"
#include "tdcr/errors.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

using namespace tdcr;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() / ("tdcr_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream(path) << text;
}

struct CliRun {
    int code = -1;
    std::string out, err;
    std::map<std::string, std::string> values;
};

CliRun run(std::vector<std::string> args) {
    args.insert(args.begin(), "tdcr");
    std::ostringstream out, err;
    CliRun r;
    r.code = run_cli(args, out, err);
    r.out = out.str();
    r.err = err.str();
    std::istringstream lines(r.out);
    for (std::string line; std::getline(lines, line);) {
        const auto eq = line.find('=');
        if (eq != std::string::npos && line.find(' ') == std::string::npos) r.values[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return r;
}

int run_binary(const std::string& args) {
    const std::string cmd = std::string(TDCR_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kMinimal = R"({
  "n": 1,
  "link_lengths_m": [0.02],
  "joint_limit_rad": 0.4,
  "tendons": [
    {"waypoints_rel_m": [[0.005, 0, -0.004], [0.005, 0, 0.004], [0.005, 0, 0.016]], "terminal_anchored": true}
  ]
})";

std::string with_way_point_counts(int n, int first, int second) {
    std::ostringstream s;
    s << R"({"n": )" << n << R"(, "link_lengths_m": [)";
    for (int j = 0; j < n; ++j) s << (j ? ", " : "") << 0.017;
    s << R"(], "joint_limit_rad": 0.3, "tendons": [)";
    for (int i = 0; i < 2; ++i) {
        const int count = i == 0 ? first : second;
        s << (i ? ", " : "") << R"({"terminal_anchored": true, "waypoints_rel_m": [)";
        for (int k = 0; k < count; ++k) s << (k ? ", " : "") << "[0.005, 0, " << 0.001 * k << "]";
        s << "]}";
    }
    s << "]}";
    return s.str();
}

std::vector<std::string> rows_of(const std::string& path) {
    std::ifstream in(path);
    std::vector<std::string> rows;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line[0] != '#') rows.push_back(line);
    }
    return rows;
}

}  // namespace

TEST_CASE("minimal robot file") {
    const RobotDescription d = parse_robot(kMinimal);
    CHECK(d.geometry.joint_count() == 1);
    CHECK(d.geometry.tendons()[0].relative_waypoints.size() == 3);
    CHECK(d.geometry.tendons()[0].terminal_anchored);
    CHECK_FALSE(d.mu.has_value());
    CHECK(d.unknown_keys.empty());
}

TEST_CASE("way point count mismatch names the tendon") {
    const int n = 3;
    try {
        parse_robot(with_way_point_counts(n, 2 * n + 1, 2 * n));
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        CHECK(std::string(e.what()).find("tendon 1") != std::string::npos);
    }
    CHECK_NOTHROW(parse_robot(with_way_point_counts(n, 2 * n + 1, 2 * n + 1)));
}

TEST_CASE("prototype-sized robot file") {
    TempDir dir;
    write_robot(dir / "proto.json", testing::three_tendon_robot(10, 0.005, 0.017, 0.5, 20.0), 0.1);
    const RobotDescription d = load_robot(dir / "proto.json");
    CHECK(d.geometry.joint_count() == 10);
    CHECK(d.geometry.total_length() == Approx(0.170).epsilon(1e-12));
    CHECK(d.mu.value() == 0.1);
}

TEST_CASE("robot file errors are distinct") {
    try {
        parse_robot("{\n  \"n\": 1,\n  \"link_lengths_m\": [0.02,, ]\n}");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 3, column") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_robot(R"({"n": 1})"), ParseError);
    CHECK_THROWS_AS(parse_robot(R"({"n": "one", "link_lengths_m": [], "joint_limit_rad": 0.3, "tendons": []})"),
                    ParseError);
    CHECK_THROWS_AS(parse_robot(R"({"n": 2, "link_lengths_m": [0.02], "joint_limit_rad": 0.3, "tendons": []})"),
                    DimensionError);

    std::string bad = kMinimal;
    bad.replace(bad.find("[0.02]"), 6, "[-0.02]");
    CHECK_THROWS_AS(parse_robot(bad), InvariantError);
    bad = kMinimal;
    bad.replace(bad.find("0.4"), 3, "2.0");
    CHECK_THROWS_AS(parse_robot(bad), InvariantError);
    bad = kMinimal;
    bad.insert(1, "\"mu\": -0.1,");
    CHECK_THROWS_AS(parse_robot(bad), InvariantError);
    bad = kMinimal;
    bad.insert(1, "\"format_version\": 7,");
    CHECK_THROWS_AS(parse_robot(bad), ParseError);
}

TEST_CASE("unknown keys are reported, not fatal") {
    std::string text = kMinimal;
    text.insert(1, "\"colour\": \"red\", \"mass_kg\": 0.1,");
    text.insert(text.find("\"terminal_anchored\""), "\"stiffness\": 3, ");
    const RobotDescription d = parse_robot(text);
    CHECK(d.unknown_keys == std::vector<std::string>{"colour", "mass_kg", "tendons[0].stiffness"});

    TempDir dir;
    write_text(dir / "robot.json", text);
    const CliRun r = run({"solve", dir / "robot.json"});
    CHECK(r.code == 0);
    CHECK(r.err.find("warning") != std::string::npos);
    CHECK(r.err.find("mass_kg") != std::string::npos);
}

TEST_CASE("robot round trip is bit exact") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-0.01, 0.01), len(0.005, 0.03);
    TempDir dir;
    for (int trial = 0; trial < 5; ++trial) {
        const int n = 1 + trial * 2;
        std::vector<double> links;
        for (int j = 0; j < n; ++j) links.push_back(len(rng));
        std::vector<TendonRouting> tendons(2);
        for (auto& t : tendons) {
            for (int k = 0; k < 2 * n + 1; ++k) t.relative_waypoints.emplace_back(u(rng), u(rng), len(rng));
            t.terminal_anchored = trial % 2 == 0;
        }
        const RobotGeometry geom(links, 0.1 + 0.2 * len(rng) / 0.03, tendons);
        const double mu = len(rng), stretch = len(rng) * 1e-2;
        write_robot(dir / "r.json", geom, mu, stretch);
        const RobotDescription back = load_robot(dir / "r.json");
        CHECK(back.geometry.link_lengths() == geom.link_lengths());
        CHECK(back.geometry.joint_limit() == geom.joint_limit());
        CHECK(back.mu.value() == mu);
        CHECK(back.stretch_compliance.value() == stretch);
        REQUIRE(back.geometry.tendon_count() == 2);
        for (int t = 0; t < 2; ++t) {
            CHECK(back.geometry.tendons()[t].terminal_anchored == geom.tendons()[t].terminal_anchored);
            for (int k = 0; k < 2 * n + 1; ++k)
                CHECK(back.geometry.tendons()[t].relative_waypoints[k] == geom.tendons()[t].relative_waypoints[k]);
        }
        CHECK(robot_to_json(back.geometry, back.mu, back.stretch_compliance) == robot_to_json(geom, mu, stretch));
    }
}

TEST_CASE("csv formats round trip") {
    TempDir dir;
    const auto geom = testing::three_tendon_robot(10, 0.005, 0.017, 0.5, 20.0);
    std::mt19937 rng(3);
    const JointState q = testing::random_state(rng, 10, 0.5);

    const ShapeRecord shape = shape_record(geom, q, true);
    write_shape_csv(dir / "shape.csv", shape);
    const ShapeRecord back = read_shape_csv(dir / "shape.csv");
    CHECK(back.frames == shape.frames);
    CHECK(back.tendon_waypoints == shape.tendon_waypoints);
    CHECK(rows_of(dir / "shape.csv").front() == "frame_index,x_m,y_m,z_m,tendon");

    write_shape_csv(dir / "plain.csv", shape_record(geom, q, false));
    CHECK(read_shape_csv(dir / "plain.csv").frames == shape.frames);
    CHECK(read_shape_csv(dir / "plain.csv").tendon_waypoints.empty());

    const GroundTruthShape truth = shape_from_state(geom, q);
    write_ground_truth_csv(dir / "truth.csv", truth);
    const GroundTruthShape truth_back = read_ground_truth_csv(dir / "truth.csv");
    CHECK(truth_back.s == truth.s);
    CHECK(truth_back.points == truth.points);

    const GaitSequence gait = rolling_gait(geom, HelixSpec{}, 5);
    write_gait_csv(dir / "gait.csv", gait);
    const auto rows = read_gait_csv(dir / "gait.csv");
    REQUIRE(rows.size() == 5);
    for (int k = 0; k < 5; ++k) CHECK(rows[k] == gait.steps[k].displacements);

    const double awkward = 0.1 + 0.2;  // needs all 17 digits
    CHECK(std::stod(format_real(awkward)) == awkward);
}

TEST_CASE("csv readers reject malformed files") {
    TempDir dir;
    write_text(dir / "noheader.csv", "0,0,0,0\n1,0,0,0.01\n");
    CHECK_THROWS_AS(read_shape_csv(dir / "noheader.csv"), ParseError);
    write_text(dir / "gap.csv", "frame_index,x_m,y_m,z_m\n0,0,0,0\n2,0,0,0.01\n");
    CHECK_THROWS_AS(read_shape_csv(dir / "gap.csv"), ParseError);
    write_text(dir / "short.csv", "s_m,x_m,y_m,z_m\n0,0,0\n");
    CHECK_THROWS_AS(read_ground_truth_csv(dir / "short.csv"), ParseError);
    write_text(dir / "decreasing.csv", "s_m,x_m,y_m,z_m\n0,0,0,0\n0.02,0,0,0.02\n0.01,0,0,0.01\n");
    CHECK_THROWS_AS(read_ground_truth_csv(dir / "decreasing.csv"), ParseError);
    write_text(dir / "version.csv", "# format_version=2\ns_m,x_m,y_m,z_m\n0,0,0,0\n");
    CHECK_THROWS_AS(read_ground_truth_csv(dir / "version.csv"), ParseError);
    write_text(dir / "ok.csv", "# exported by a sensor\r\ns_m,x_m,y_m,z_m\r\n0,0,0,0\r\n0.1,0,0.003,0.1\r\n");
    CHECK(read_ground_truth_csv(dir / "ok.csv").points.back() == Vec3(0, 0.003, 0.1));
}

TEST_CASE("tip error examples") {
    const std::vector<Vec3> estimate{Vec3(0, 0, 0), Vec3(0, 0, 0.05), Vec3(0, 0, 0.1)};
    GroundTruthShape same{{0.0, 0.05, 0.1}, estimate};
    CHECK(tip_error(estimate, same, 0.1).error_m == 0.0);
    CHECK(tip_error(estimate, same, 0.1).error_fraction == 0.0);

    GroundTruthShape shifted{{0.0, 0.1}, {Vec3(0, 0, 0), Vec3(0, 0.003, 0.1)}};
    const TipError e = tip_error(estimate, shifted, 0.1);
    CHECK(e.error_m == Approx(0.003).epsilon(1e-12));
    CHECK(e.error_fraction == Approx(0.03).epsilon(1e-12));

    GroundTruthShape far{{0.0, 0.170}, {Vec3(0, 0, 0), Vec3(0.00812, 0, 0.1)}};
    const TipError p = tip_error(estimate, far, 0.170);
    CHECK(p.error_m == Approx(0.00812).epsilon(1e-12));
    CHECK(p.error_fraction == Approx(0.0478).epsilon(0.0001 / 0.0478));

    CHECK_THROWS_AS(tip_error({}, same, 0.1), DomainError);
    CHECK_THROWS_AS(tip_error(estimate, GroundTruthShape{}, 0.1), DomainError);
}

TEST_CASE("command files and datasets") {
    TempDir dir;
    const auto cmd = ActuationCommand::from_displacements({0.0, 0.004, -0.001});
    write_command(dir / "a.cmd.json", cmd);
    const ActuationCommand back = load_command(dir / "a.cmd.json");
    CHECK(back.displacements == cmd.displacements);
    CHECK(back.actuated == std::vector<int>{1, 2});
    CHECK_THROWS_AS(parse_command(R"({"displacements": [0.1]})"), ParseError);

    const auto geom = testing::parallel_robot(3);
    write_ground_truth_csv(dir / "a.truth.csv", shape_from_state(geom, JointState::zero(3)));
    write_command(dir / "b.cmd.json", cmd);
    write_ground_truth_csv(dir / "b.truth.csv", shape_from_state(geom, JointState::zero(3)));
    std::vector<std::string> names;
    CHECK(load_dataset(dir.path, &names).size() == 2);
    CHECK(names == std::vector<std::string>{"a", "b"});

    write_command(dir / "c.cmd.json", cmd);
    try {
        load_dataset(dir.path);
        FAIL("expected DomainError");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("c.truth.csv") != std::string::npos);
    }
}

TEST_CASE("solve subcommand") {
    TempDir dir;
    const auto geom = testing::three_tendon_robot(6, 0.005, 0.017, 0.5, 20.0);
    write_robot(dir / "robot.json", geom, 0.1);

    SUBCASE("zero pulls give a straight shape") {
        const CliRun r = run({"solve", dir / "robot.json", "--out", dir / "shape.csv"});
        CHECK(r.code == 0);
        CHECK(r.values.at("converged") == "true");
        const ShapeRecord shape = read_shape_csv(dir / "shape.csv");
        REQUIRE(shape.frames.size() == 7);
        for (int i = 0; i <= 6; ++i) CHECK((shape.frames[i] - Vec3(0, 0, 0.017 * i)).norm() < 1e-12);
    }

    SUBCASE("baseline flag equals forcing mu to zero") {
        const std::vector<std::string> pull{"--pull", "0=0.004"};
        auto with = [&](std::vector<std::string> extra) {
            std::vector<std::string> a{"solve", dir / "robot.json", "--pull", "0=0.004"};
            a.insert(a.end(), extra.begin(), extra.end());
            return run(a);
        };
        const CliRun b = with({"--baseline"});
        const CliRun z = with({"--mu", "0"});
        const CliRun sub = run({"baseline", dir / "robot.json", "--pull", "0=0.004"});
        CHECK(b.code == 0);
        CHECK(b.out == z.out);
        CHECK(sub.out == z.out);
        CHECK(with({}).values.at("mu") == format_real(0.1));
    }

    SUBCASE("two pulls report one relative tension matching the library") {
        const CliRun r = run({"solve", dir / "robot.json", "--pull", "0=0.004", "--pull", "2=0.002", "--waypoints",
                              "--out", dir / "shape.csv"});
        CHECK(r.code == 0);
        SolverConfig cfg;
        cfg.mu = 0.1;
        const SolveResult lib = solve_statics(geom, ActuationCommand::from_displacements({0.004, 0.0, 0.002}), cfg);
        REQUIRE(lib.relative_tensions.size() == 1);
        CHECK(r.values.at("relative_tensions") == format_real(lib.relative_tensions[0]));
        CHECK(r.values.at("cost") == format_real(lib.cost));
        const ShapeRecord shape = read_shape_csv(dir / "shape.csv");
        CHECK(shape.frames == frame_origins(forward_kinematics(geom, lib.q_star)));
        CHECK(shape.tendon_waypoints.size() == 3);
    }

    SUBCASE("initial guess flag") {
        const CliRun r = run({"solve", dir / "robot.json", "--pull", "0=0.004", "--q0", "0.01,0.01,0,0,0,0,0,0,0,0,0,0"});
        CHECK(r.code == 0);
        CHECK(run({"solve", dir / "robot.json", "--q0", "0.01,0.01"}).code == exit_domain);
        CHECK(run({"solve", dir / "robot.json", "--q0", "0.01,abc"}).code == exit_parse);
    }
}

TEST_CASE("exit codes") {
    TempDir dir;
    write_robot(dir / "robot.json", testing::parallel_robot(), std::nullopt);
    write_text(dir / "syntax.json", "{\"n\": 1,\n \"link_lengths_m\": [0.02\n");
    write_text(dir / "dimension.json", with_way_point_counts(2, 5, 4));
    std::string invariant = kMinimal;
    invariant.replace(invariant.find("[0.02]"), 6, "[0.0]");
    write_text(dir / "invariant.json", invariant);

    CHECK(run({"solve", dir / "syntax.json"}).code == exit_parse);
    CHECK(run({"solve", dir / "robot.json", "--pull", "zero"}).code == exit_parse);
    CHECK(run({"solve", dir / "robot.json", "--no-such-flag"}).code == exit_parse);
    CHECK(run({"solve", dir / "robot.json", "--pull", "4=0.001"}).code == exit_domain);
    CHECK(run({"solve", dir / "missing.json"}).code == exit_domain);
    CHECK(run({"solve", dir / "robot.json", "--mu", "-1"}).code == exit_domain);
    // far beyond what the joint limits allow
    const CliRun unreachable = run({"solve", dir / "robot.json", "--pull", "0=0.05"});
    CHECK(unreachable.code == exit_not_converged);
    CHECK(unreachable.values.at("converged") == "false");
    CHECK(run({"solve", dir / "dimension.json"}).code == exit_dimension);
    CHECK(run({"solve", dir / "invariant.json"}).code == exit_invariant);
    CHECK(run({"--help"}).code == exit_ok);

    // same mapping from the installed binary
    CHECK(run_binary("solve " + (dir / "robot.json")) == exit_ok);
    CHECK(run_binary("solve " + (dir / "syntax.json")) == exit_parse);
    CHECK(run_binary("solve " + (dir / "missing.json")) == exit_domain);
    CHECK(run_binary("solve " + (dir / "robot.json") + " --pull 0=0.05") == exit_not_converged);
    CHECK(run_binary("solve " + (dir / "dimension.json")) == exit_dimension);
    CHECK(run_binary("solve " + (dir / "invariant.json")) == exit_invariant);
}

TEST_CASE("gait subcommand") {
    TempDir dir;
    write_robot(dir / "robot.json", testing::three_tendon_robot(10, 0.005, 0.017, 0.5, 20.0), std::nullopt);
    const CliRun r = run({"gait", dir / "robot.json", "--steps", "4", "--out", dir / "gait.csv", "--shapes-dir",
                          dir / "shapes", "--tube-id", "0.021"});
    CHECK(r.code == 0);
    CHECK(r.values.at("tube_clearance") == "pass");
    const auto rows = read_gait_csv(dir / "gait.csv");
    REQUIRE(rows.size() == 4);
    for (int k = 0; k < 4; ++k) CHECK(fs::exists(dir.path / "shapes" / ("step_00" + std::to_string(k) + ".csv")));

    // Cycle closure and nearly constant row sums on the symmetric parallel routing.
    write_robot(dir / "parallel.json", testing::three_tendon_robot(10, 0.005, 0.017, 0.5, 0.0), std::nullopt);
    CHECK(run({"gait", dir / "parallel.json", "--steps", "24", "--out", dir / "p.csv"}).code == 0);
    const auto p = read_gait_csv(dir / "p.csv");
    HelixSpec spec;
    spec.pitch_angle = std::atan(0.5);  // the CLI default
    const GaitSequence lib = rolling_gait(testing::three_tendon_robot(10, 0.005, 0.017, 0.5, 0.0), spec, 24);
    double lo = 1e9, hi = -1e9, amplitude = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        CHECK(p[k] == lib.steps[k].displacements);
        const double sum = p[k][0] + p[k][1] + p[k][2];
        lo = std::min(lo, sum);
        hi = std::max(hi, sum);
        for (double d : p[k]) amplitude = std::max(amplitude, std::abs(d));
    }
    CHECK(hi - lo <= 0.05 * amplitude);

    const CliRun tight = run({"gait", dir / "robot.json", "--tube-id", "0.016", "--robot-od", "0.02", "--out", dir / "t.csv"});
    CHECK(tight.values.at("tube_clearance") == "fail");
    write_robot(dir / "one.json", testing::parallel_robot(), std::nullopt);
    CHECK(run({"gait", dir / "one.json", "--out", dir / "x.csv"}).code == exit_domain);
}

TEST_CASE("calibrate subcommand") {
    TempDir dir;
    const auto geom = testing::helical_robot(6, 0.005, 0.017, 0.4, 1.0);
    write_robot(dir / "robot.json", geom, std::nullopt);
    const fs::path data = dir.path / "data";
    fs::create_directories(data);
    SolverConfig truth_cfg;
    truth_cfg.mu = 0.1;
    for (double d : {0.003, 0.006}) {
        const auto cmd = ActuationCommand::from_displacements({d});
        const SolveResult res = solve_statics(geom, cmd, truth_cfg);
        REQUIRE(res.converged);
        const std::string name = "pose_" + std::to_string(static_cast<int>(d * 1000));
        write_command(data / (name + ".cmd.json"), cmd);
        write_ground_truth_csv(data / (name + ".truth.csv"), shape_from_state(geom, res.q_star));
    }
    const CliRun r = run({"calibrate", dir / "robot.json", data.string(), "--mu-range", "0:0.2:0.05",
                          "--stretch-range", "0:0:1", "--out", dir / "calib.json"});
    REQUIRE(r.code == 0);
    CHECK(r.values.at("mu") == format_real(0.1));
    CHECK(r.out.find("sample=pose_3 ") != std::string::npos);
    CHECK(r.out.find("tip_error_before_m=") != std::string::npos);
    CHECK(read_text_file(dir / "calib.json").find("\"mu\"") != std::string::npos);

    // A single straight sample cannot tell friction values apart: lowest grid mu wins.
    const fs::path straight = dir.path / "straight";
    fs::create_directories(straight);
    write_command(straight / "s.cmd.json", ActuationCommand::from_displacements({0.0}));
    write_ground_truth_csv(straight / "s.truth.csv", shape_from_state(geom, JointState::zero(6)));
    const CliRun s = run({"calibrate", dir / "robot.json", straight.string(), "--mu-range", "0.05:0.2:0.05",
                          "--stretch-range", "0:0:1", "--out", ""});
    CHECK(s.code == 0);
    CHECK(s.values.at("mu") == format_real(0.05));

    fs::create_directories(dir.path / "empty");
    CHECK(run({"calibrate", dir / "robot.json", dir / "empty", "--out", ""}).code == exit_domain);
    write_command(straight / "orphan.cmd.json", ActuationCommand::from_displacements({0.0}));
    const CliRun missing = run({"calibrate", dir / "robot.json", straight.string(), "--out", ""});
    CHECK(missing.code == exit_domain);
    CHECK(missing.err.find("orphan.truth.csv") != std::string::npos);
}

TEST_CASE("sweep subcommand") {
    TempDir dir;
    write_robot(dir / "robot.json", testing::parallel_robot(), std::nullopt);
    const CliRun r = run({"sweep", dir / "robot.json", "--to", "0.012", "--count", "4", "--out", dir / "sweep.csv"});
    CHECK(r.code == 0);
    CHECK(r.values.at("failures") == "0");
    const auto rows = rows_of(dir / "sweep.csv");
    REQUIRE(rows.size() == 5);
    CHECK(rows[0] == "step,displacement_m,converged,cost,tip_x_m,tip_y_m,tip_z_m");
    CHECK(run({"sweep", dir / "robot.json", "--to", "0.05", "--count", "2"}).code == exit_not_converged);
}
