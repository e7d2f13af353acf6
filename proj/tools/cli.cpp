#include "cli.hpp"

#include "tdcr/cli_io.hpp"
#include "tdcr/errors.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <ostream>

namespace tdcr {

namespace {

struct RobotOptions {
    std::string robot;
    std::optional<double> mu;
    std::optional<double> stretch;
};

struct SolveOptions : RobotOptions {
    std::vector<std::string> pulls;
    std::string q0;
    std::string out;
    bool waypoints = false;
    bool baseline = false;
};

struct GaitOptions {
    std::string robot;
    double radius = 0.02;
    double pitch_angle = std::atan(0.5);
    std::string handedness = "right";
    double phase = 0.0;
    int steps = 12;
    std::string out = "gait.csv";
    std::string shapes_dir;
    std::optional<double> tube_id;
    double robot_od = 0.015;
};

struct CalibrateOptions : RobotOptions {
    std::string dataset;
    std::string mu_range = "0:0.3:0.01";
    std::string stretch_range = "0:0.001:0.00005";
    std::string out = "calibration.json";
};

struct SweepOptions : RobotOptions {
    int tendon = 0;
    double from = 0.0;
    double to = 0.0;
    int count = 5;
    bool baseline = false;
    std::string out;
};

double parse_number(std::string_view text, const std::string& what) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (text.empty() || ec != std::errc() || ptr != end) throw ParseError(what + ": '" + std::string(text) + "' is not a number");
    return v;
}

std::vector<double> parse_list(const std::string& text, char sep, const std::string& what) {
    std::vector<double> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(sep, start);
        out.push_back(parse_number(std::string_view(text).substr(start, pos == std::string::npos ? std::string::npos : pos - start), what));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

GridRange parse_range(const std::string& text, const std::string& what) {
    const auto v = parse_list(text, ':', what);
    if (v.size() != 3) throw ParseError(what + " must be lo:hi:step");
    return {v[0], v[1], v[2]};
}

std::string join(std::span<const double> values) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) s += (i ? "," : "") + format_real(values[i]);
    return s;
}

RobotDescription load(const std::string& path, std::ostream& err) {
    RobotDescription desc = load_robot(path);
    if (!desc.unknown_keys.empty()) {
        err << "warning: " << path << ": ignoring unknown keys:";
        for (const auto& k : desc.unknown_keys) err << ' ' << k;
        err << '\n';
    }
    return desc;
}

SolverConfig base_config(const RobotOptions& o, const RobotDescription& desc) {
    SolverConfig cfg;
    cfg.mu = o.mu.value_or(desc.mu.value_or(0.0));
    cfg.stretch_compliance = o.stretch.value_or(desc.stretch_compliance.value_or(0.0));
    return cfg;
}

// "--pull 2=0.004" sets tendon 2 to 4 mm; unlisted tendons are held at zero.
ActuationCommand parse_pulls(const std::vector<std::string>& pulls, int tendon_count) {
    std::vector<double> d(tendon_count, 0.0);
    std::vector<bool> seen(tendon_count, false);
    for (const auto& p : pulls) {
        const auto eq = p.find('=');
        if (eq == std::string::npos) throw ParseError("--pull expects tendon=meters, got '" + p + "'");
        int index = 0;
        const auto* end = p.data() + eq;
        auto [ptr, ec] = std::from_chars(p.data(), end, index);
        if (eq == 0 || ec != std::errc() || ptr != end) throw ParseError("--pull: bad tendon index in '" + p + "'");
        if (index < 0 || index >= tendon_count)
            throw DomainError("--pull: tendon " + std::to_string(index) + " out of range (robot has " +
                              std::to_string(tendon_count) + ")");
        if (seen[index]) throw ParseError("--pull: tendon " + std::to_string(index) + " given twice");
        seen[index] = true;
        d[index] = parse_number(std::string_view(p).substr(eq + 1), "--pull");
    }
    return ActuationCommand::from_displacements(std::move(d));
}

void print_result(std::ostream& out, const RobotGeometry& geom, const SolveResult& r, const SolverConfig& cfg) {
    const Eigen::VectorXd& q = r.q_star.values();
    const double max_res = r.displacement_residuals.size() ? r.displacement_residuals.cwiseAbs().maxCoeff() : 0.0;
    const Vec3 tip = forward_kinematics(geom, r.q_star).back().translation;
    out << "converged=" << (r.converged ? "true" : "false") << '\n'
        << "message=" << r.message << '\n'
        << "iterations=" << r.iterations << '\n'
        << "cost=" << format_real(r.cost) << '\n'
        << "kkt_residual=" << format_real(r.kkt_residual) << '\n'
        << "mu=" << format_real(cfg.mu) << '\n'
        << "stretch_compliance_m=" << format_real(cfg.stretch_compliance) << '\n'
        << "relative_tensions=" << join(r.relative_tensions) << '\n'
        << "displacement_residuals_m="
        << join(std::span<const double>(r.displacement_residuals.data(), r.displacement_residuals.size())) << '\n'
        << "max_displacement_residual_m=" << format_real(max_res) << '\n'
        << "q_rad=" << join(std::span<const double>(q.data(), q.size())) << '\n'
        << "tip_m=" << format_real(tip.x()) << ',' << format_real(tip.y()) << ',' << format_real(tip.z()) << '\n';
}

int run_solve(const SolveOptions& o, std::ostream& out, std::ostream& err) {
    const RobotDescription desc = load(o.robot, err);
    const RobotGeometry& geom = desc.geometry;
    const ActuationCommand cmd = parse_pulls(o.pulls, geom.tendon_count());
    SolverConfig cfg = base_config(o, desc);
    if (!o.q0.empty()) {
        const auto v = parse_list(o.q0, ',', "--q0");
        if (static_cast<int>(v.size()) != geom.dof())
            throw DomainError("--q0 has " + std::to_string(v.size()) + " angles, robot needs " + std::to_string(geom.dof()));
        cfg.q0 = JointState(Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()));
    }
    if (o.baseline) cfg.mu = 0.0;
    const SolveResult r = o.baseline ? solve_baseline_frictionless(geom, cmd, cfg) : solve_statics(geom, cmd, cfg);
    print_result(out, geom, r, cfg);
    if (!o.out.empty()) write_shape_csv(o.out, shape_record(geom, r.q_star, o.waypoints));
    if (!r.converged) err << "error: solve did not converge: " << r.message << '\n';
    return r.converged ? exit_ok : exit_not_converged;
}

int run_gait(const GaitOptions& o, std::ostream& out, std::ostream& err) {
    const RobotDescription desc = load(o.robot, err);
    const RobotGeometry& geom = desc.geometry;
    HelixSpec spec;
    spec.radius = o.radius;
    spec.pitch_angle = o.pitch_angle;
    spec.phase = o.phase;
    spec.handedness = o.handedness == "left" ? Handedness::left : Handedness::right;

    const GaitSequence gait = rolling_gait(geom, spec, o.steps);
    write_gait_csv(o.out, gait);
    if (!o.shapes_dir.empty()) std::filesystem::create_directories(o.shapes_dir);

    double worst_rms = 0.0;
    bool clear = true;
    for (int k = 0; k < o.steps; ++k) {
        HelixSpec step = spec;
        step.phase = spec.phase + 2.0 * std::numbers::pi * k / o.steps;
        worst_rms = std::max(worst_rms, helix_fit_rms(geom, gait.target_states[k], step));
        if (!o.shapes_dir.empty()) {
            char name[32];
            std::snprintf(name, sizeof name, "step_%03d.csv", k);
            write_shape_csv(std::filesystem::path(o.shapes_dir) / name, shape_record(geom, gait.target_states[k], false));
        }
        if (o.tube_id) {
            const ClearanceReport c = tube_clearance(geom, gait.target_states[k], step, *o.tube_id, o.robot_od);
            out << "clearance_step=" << k << " max_axis_distance_m=" << format_real(c.max_axis_distance)
                << " allowed_m=" << format_real(c.allowed) << " result=" << (c.pass ? "pass" : "fail") << '\n';
            clear = clear && c.pass;
        }
    }
    out << "steps=" << gait.steps.size() << '\n'
        << "period_steps=" << gait.period_steps << '\n'
        << "frequency_hint_hz=" << format_real(gait.frequency_hint) << '\n'
        << "max_fit_rms_m=" << format_real(worst_rms) << '\n'
        << "gait_csv=" << o.out << '\n';
    if (o.tube_id) out << "tube_clearance=" << (clear ? "pass" : "fail") << '\n';
    return exit_ok;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    // sample standard deviation, 0 for a single sample
    const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    return {mean, sd};
}

int run_calibrate(const CalibrateOptions& o, std::ostream& out, std::ostream& err) {
    const RobotDescription desc = load(o.robot, err);
    const RobotGeometry& geom = desc.geometry;
    const GridRange mu_range = parse_range(o.mu_range, "--mu-range");
    const GridRange stretch_range = parse_range(o.stretch_range, "--stretch-range");
    std::vector<std::string> names;
    const auto dataset = load_dataset(o.dataset, &names);
    if (dataset.empty()) throw DomainError("dataset " + o.dataset + " has no *.cmd.json samples");

    const SolverConfig before_cfg = base_config(o, desc);
    const auto before = dataset_tip_errors(geom, dataset, before_cfg);
    const CalibrationResult res = calibrate(geom, dataset, mu_range, stretch_range, SolverConfig{});

    const double length = geom.total_length();
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        out << "sample=" << names[i] << " before_m=" << format_real(before[i]) << " after_m="
            << format_real(res.tip_errors[i]) << " after_fraction=" << format_real(res.tip_errors[i] / length) << '\n';
    }
    const auto [mb, sb] = mean_std(before);
    const auto [ma, sa] = mean_std(res.tip_errors);
    out << "samples=" << dataset.size() << '\n'
        << "before_mu=" << format_real(before_cfg.mu) << '\n'
        << "before_stretch_compliance_m=" << format_real(before_cfg.stretch_compliance) << '\n'
        << "tip_error_before_m=" << format_real(mb) << " +- " << format_real(sb) << '\n'
        << "tip_error_after_m=" << format_real(ma) << " +- " << format_real(sa) << '\n'
        << "tip_error_after_fraction=" << format_real(ma / length) << " +- " << format_real(sa / length) << '\n'
        << "mu=" << format_real(res.mu) << '\n'
        << "stretch_compliance_m=" << format_real(res.stretch_compliance) << '\n'
        << "evaluated_points=" << res.evaluated_points << '\n';

    if (!o.out.empty()) {
        nlohmann::json doc;
        doc["format_version"] = kFormatVersion;
        doc["mu"] = res.mu;
        doc["stretch_compliance_m"] = res.stretch_compliance;
        doc["mean_tip_error_m"] = res.mean_tip_error;
        doc["samples"] = dataset.size();
        std::ofstream f(o.out);
        if (!f) throw DomainError("cannot write " + o.out);
        f << doc.dump(2) << '\n';
        out << "calibration_file=" << o.out << '\n';
    }
    return exit_ok;
}

// Displacement sweep on one tendon with warm starts; a failed step is retried
// once from the default initial guess.
int run_sweep(const SweepOptions& o, std::ostream& out, std::ostream& err) {
    const RobotDescription desc = load(o.robot, err);
    const RobotGeometry& geom = desc.geometry;
    if (o.tendon < 0 || o.tendon >= geom.tendon_count())
        throw DomainError("--tendon " + std::to_string(o.tendon) + " out of range");
    if (o.count < 1) throw DomainError("--count must be at least 1");
    SolverConfig cfg = base_config(o, desc);
    if (o.baseline) cfg.mu = 0.0;

    std::ofstream csv;
    if (!o.out.empty()) {
        csv.open(o.out);
        if (!csv) throw DomainError("cannot write " + o.out);
        csv << "# format_version=" << kFormatVersion << "\n"
            << "step,displacement_m,converged,cost,tip_x_m,tip_y_m,tip_z_m\n";
    }

    int failures = 0;
    std::optional<SolveResult> previous;
    for (int k = 0; k < o.count; ++k) {
        const double d = o.count == 1 ? o.from : o.from + (o.to - o.from) * k / (o.count - 1);
        std::vector<double> disp(geom.tendon_count(), 0.0);
        disp[o.tendon] = d;
        const auto cmd = ActuationCommand::from_displacements(disp);
        SolverConfig step_cfg = cfg;
        if (previous && previous->converged) step_cfg.q0 = previous->q_star;
        SolveResult r = solve_statics(geom, cmd, step_cfg);
        if (!r.converged && step_cfg.q0) {
            step_cfg.q0.reset();
            r = solve_statics(geom, cmd, step_cfg);
        }
        const Vec3 tip = forward_kinematics(geom, r.q_star).back().translation;
        out << "step=" << k << " displacement_m=" << format_real(d) << " converged=" << (r.converged ? "true" : "false")
            << " cost=" << format_real(r.cost) << " tip_m=" << format_real(tip.x()) << ',' << format_real(tip.y()) << ','
            << format_real(tip.z()) << '\n';
        if (csv.is_open()) {
            csv << k << ',' << format_real(d) << ',' << (r.converged ? 1 : 0) << ',' << format_real(r.cost) << ','
                << format_real(tip.x()) << ',' << format_real(tip.y()) << ',' << format_real(tip.z()) << '\n';
        }
        if (!r.converged) ++failures;
        previous = std::move(r);
    }
    out << "failures=" << failures << '\n';
    return failures ? exit_not_converged : exit_ok;
}

void add_robot_options(CLI::App* cmd, RobotOptions& o) {
    cmd->add_option("robot", o.robot, "Robot description (JSON)")->required();
    cmd->add_option("--mu", o.mu, "Friction coefficient (overrides the robot file)");
    cmd->add_option("--stretch", o.stretch, "Tendon stretch compliance in m per unit tension");
}

void add_solve_options(CLI::App* cmd, SolveOptions& o) {
    add_robot_options(cmd, o);
    cmd->add_option("--pull", o.pulls, "Tendon displacement as tendon=meters (repeatable)");
    cmd->add_option("--q0", o.q0, "Initial joint angles, comma-separated (alpha1,beta1,...)");
    cmd->add_option("--out", o.out, "Shape CSV output");
    cmd->add_flag("--waypoints", o.waypoints, "Include tendon way points in the shape CSV");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Tendon-driven continuum robot kinematics"};
    app.require_subcommand(1);

    SolveOptions solve;
    auto* solve_cmd = app.add_subcommand("solve", "Solve the statics for commanded tendon displacements");
    add_solve_options(solve_cmd, solve);
    solve_cmd->add_flag("--baseline", solve.baseline, "Ignore friction (same as --mu 0)");

    SolveOptions baseline;
    auto* baseline_cmd = app.add_subcommand("baseline", "Frictionless solve");
    add_solve_options(baseline_cmd, baseline);
    baseline.baseline = true;

    GaitOptions gait;
    auto* gait_cmd = app.add_subcommand("gait", "Helical rolling gait commands");
    gait_cmd->add_option("robot", gait.robot, "Robot description (JSON)")->required();
    gait_cmd->add_option("--radius", gait.radius, "Helix radius in m")->capture_default_str();
    gait_cmd->add_option("--pitch-angle", gait.pitch_angle, "Angle between helix tangent and axis in rad")
        ->capture_default_str();
    gait_cmd->add_option("--handedness", gait.handedness)->check(CLI::IsMember({"left", "right"}))->capture_default_str();
    gait_cmd->add_option("--phase", gait.phase, "Initial bending-plane roll in rad")->capture_default_str();
    gait_cmd->add_option("--steps", gait.steps, "Steps per cycle")->capture_default_str();
    gait_cmd->add_option("--out", gait.out, "Gait CSV output")->capture_default_str();
    gait_cmd->add_option("--shapes-dir", gait.shapes_dir, "Directory for one shape CSV per step");
    gait_cmd->add_option("--tube-id", gait.tube_id, "Tube inner diameter in m (enables the clearance check)");
    gait_cmd->add_option("--robot-od", gait.robot_od, "Robot outer diameter in m")->capture_default_str();

    CalibrateOptions calib;
    auto* calib_cmd = app.add_subcommand("calibrate", "Fit friction and stretch to a dataset");
    add_robot_options(calib_cmd, calib);
    calib_cmd->add_option("dataset", calib.dataset, "Directory of NAME.cmd.json / NAME.truth.csv pairs")->required();
    calib_cmd->add_option("--mu-range", calib.mu_range, "lo:hi:step")->capture_default_str();
    calib_cmd->add_option("--stretch-range", calib.stretch_range, "lo:hi:step in m per unit tension")
        ->capture_default_str();
    calib_cmd->add_option("--out", calib.out, "Calibration JSON output")->capture_default_str();

    SweepOptions sweep;
    auto* sweep_cmd = app.add_subcommand("sweep", "Displacement sweep on one tendon with warm starts");
    add_robot_options(sweep_cmd, sweep);
    sweep_cmd->add_option("--tendon", sweep.tendon)->capture_default_str();
    sweep_cmd->add_option("--from", sweep.from, "First displacement in m")->capture_default_str();
    sweep_cmd->add_option("--to", sweep.to, "Last displacement in m")->required();
    sweep_cmd->add_option("--count", sweep.count)->capture_default_str();
    sweep_cmd->add_flag("--baseline", sweep.baseline, "Ignore friction");
    sweep_cmd->add_option("--out", sweep.out, "Sweep CSV output");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_parse;
    }

    try {
        if (*solve_cmd) return run_solve(solve, out, err);
        if (*baseline_cmd) return run_solve(baseline, out, err);
        if (*gait_cmd) return run_gait(gait, out, err);
        if (*calib_cmd) return run_calibrate(calib, out, err);
        if (*sweep_cmd) return run_sweep(sweep, out, err);
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return exit_parse;
    } catch (const DimensionError& e) {
        err << "error: " << e.what() << '\n';
        return exit_dimension;
    } catch (const InvariantError& e) {
        err << "error: " << e.what() << '\n';
        return exit_invariant;
    } catch (const NumericalError& e) {
        err << "error: " << e.what() << '\n';
        return exit_not_converged;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_domain;
    }
    return exit_parse;
}

}  // namespace tdcr
