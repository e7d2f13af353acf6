#include "tdcr/cli_io.hpp"

#include "tdcr/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace tdcr {

using nlohmann::json;

namespace {

const std::set<std::string> kRobotKeys{"format_version", "n", "link_lengths_m", "joint_limit_rad", "tendons",
                                       "mu", "stretch_compliance_m"};
const std::set<std::string> kTendonKeys{"waypoints_rel_m", "terminal_anchored"};

std::string line_column(const std::string& text, std::size_t byte) {
    byte = std::min(byte, text.size());
    int line = 1, column = 1;
    for (std::size_t i = 0; i + 1 < byte; ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(what + ": syntax error at " + line_column(text, e.byte));
    }
}

const json& require(const json& obj, const std::string& key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(where + ": missing key '" + key + "'");
    return *it;
}

double real_of(const json& v, const std::string& where) {
    if (!v.is_number()) throw ParseError(where + " must be a number");
    return v.get<double>();
}

void check_version(const json& obj, const std::string& what) {
    auto it = obj.find("format_version");
    if (it == obj.end()) return;
    if (!it->is_number_integer() || it->get<long long>() != kFormatVersion)
        throw ParseError(what + ": unsupported format_version (expected " + std::to_string(kFormatVersion) + ")");
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DomainError("cannot write " + path.string());
    return out;
}

double parse_real(std::string_view field, const std::string& where) {
    double v = 0.0;
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (ec != std::errc() || ptr != end) throw ParseError(where + ": '" + std::string(field) + "' is not a number");
    return v;
}

long long parse_integer(std::string_view field, const std::string& where) {
    long long v = 0;
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (ec != std::errc() || ptr != end) throw ParseError(where + ": '" + std::string(field) + "' is not an integer");
    return v;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<int> line_numbers;
};

// Reads a CSV with '#' comment lines and a mandatory header row.
CsvTable read_csv(const std::filesystem::path& path) {
    CsvTable table;
    const std::string text = read_text_file(path);
    const std::string name = path.string();
    std::string_view all(text);
    std::size_t pos = 0;
    int line_no = 0;
    bool have_header = false;
    while (pos < all.size()) {
        auto nl = all.find('\n', pos);
        if (nl == std::string_view::npos) nl = all.size();
        std::string_view line = all.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (line.front() == '#') {
            const std::string_view tag = "# format_version=";
            if (line.starts_with(tag)) {
                const auto v = parse_integer(line.substr(tag.size()), name + " line " + std::to_string(line_no));
                if (v != kFormatVersion) throw ParseError(name + ": unsupported format_version " + std::to_string(v));
            }
            continue;
        }
        if (!have_header) {
            for (auto f : split(line)) table.header.emplace_back(f);
            have_header = true;
            continue;
        }
        const auto fields = split(line);
        if (fields.size() != table.header.size())
            throw ParseError(name + " line " + std::to_string(line_no) + ": expected " +
                             std::to_string(table.header.size()) + " fields");
        table.rows.emplace_back(fields.begin(), fields.end());
        table.line_numbers.push_back(line_no);
    }
    if (!have_header) throw ParseError(name + ": missing header row");
    return table;
}

std::string where(const std::filesystem::path& path, const CsvTable& t, std::size_t row) {
    return path.string() + " line " + std::to_string(t.line_numbers[row]);
}

}  // namespace

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DomainError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RobotDescription parse_robot(const std::string& text) {
    const json doc = parse_json(text, "robot description");
    if (!doc.is_object()) throw ParseError("robot description must be a JSON object");
    check_version(doc, "robot description");

    std::vector<std::string> unknown;
    for (const auto& [key, value] : doc.items()) {
        if (!kRobotKeys.contains(key)) unknown.push_back(key);
    }

    const json& n_value = require(doc, "n", "robot description");
    if (!n_value.is_number_integer()) throw ParseError("'n' must be an integer");
    const long long n = n_value.get<long long>();
    if (n < 1) throw InvariantError("'n' must be at least 1");

    const json& links_value = require(doc, "link_lengths_m", "robot description");
    if (!links_value.is_array()) throw ParseError("'link_lengths_m' must be an array");
    if (static_cast<long long>(links_value.size()) != n)
        throw DimensionError("'link_lengths_m' has " + std::to_string(links_value.size()) + " entries, expected n = " +
                             std::to_string(n));
    std::vector<double> links;
    for (const auto& v : links_value) links.push_back(real_of(v, "link length"));

    const double limit = real_of(require(doc, "joint_limit_rad", "robot description"), "'joint_limit_rad'");

    const json& tendons_value = require(doc, "tendons", "robot description");
    if (!tendons_value.is_array()) throw ParseError("'tendons' must be an array");
    std::vector<TendonRouting> tendons;
    for (std::size_t i = 0; i < tendons_value.size(); ++i) {
        const std::string name = "tendon " + std::to_string(i);
        const json& t = tendons_value[i];
        if (!t.is_object()) throw ParseError(name + " must be an object");
        for (const auto& [key, value] : t.items()) {
            if (!kTendonKeys.contains(key)) unknown.push_back("tendons[" + std::to_string(i) + "]." + key);
        }
        const json& wps = require(t, "waypoints_rel_m", name);
        if (!wps.is_array()) throw ParseError(name + ": 'waypoints_rel_m' must be an array");
        if (static_cast<long long>(wps.size()) != 2 * n + 1)
            throw DimensionError(name + " has " + std::to_string(wps.size()) + " way points, expected 2n+1 = " +
                                 std::to_string(2 * n + 1));
        TendonRouting routing;
        for (const auto& p : wps) {
            if (!p.is_array()) throw ParseError(name + ": way points must be [x, y, z] arrays");
            if (p.size() != 3) throw DimensionError(name + " has a way point with " + std::to_string(p.size()) +
                                                    " coordinates, expected 3");
            routing.relative_waypoints.emplace_back(real_of(p[0], name + " way point"), real_of(p[1], name + " way point"),
                                                    real_of(p[2], name + " way point"));
        }
        const json& anchored = require(t, "terminal_anchored", name);
        if (!anchored.is_boolean()) throw ParseError(name + ": 'terminal_anchored' must be a boolean");
        routing.terminal_anchored = anchored.get<bool>();
        tendons.push_back(std::move(routing));
    }

    std::optional<double> mu, stretch;
    if (auto it = doc.find("mu"); it != doc.end()) {
        mu = real_of(*it, "'mu'");
        if (!(*mu >= 0.0) || !std::isfinite(*mu)) throw InvariantError("'mu' must be finite and non-negative");
    }
    if (auto it = doc.find("stretch_compliance_m"); it != doc.end()) {
        stretch = real_of(*it, "'stretch_compliance_m'");
        if (!(*stretch >= 0.0) || !std::isfinite(*stretch))
            throw InvariantError("'stretch_compliance_m' must be finite and non-negative");
    }

    return RobotDescription{RobotGeometry(std::move(links), limit, std::move(tendons)), mu, stretch, std::move(unknown)};
}

RobotDescription load_robot(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    try {
        return parse_robot(text);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::string robot_to_json(const RobotGeometry& geom, std::optional<double> mu, std::optional<double> stretch) {
    json doc;
    doc["format_version"] = kFormatVersion;
    doc["n"] = geom.joint_count();
    doc["link_lengths_m"] = geom.link_lengths();
    doc["joint_limit_rad"] = geom.joint_limit();
    json tendons = json::array();
    for (const auto& t : geom.tendons()) {
        json wps = json::array();
        for (const auto& p : t.relative_waypoints) wps.push_back({p.x(), p.y(), p.z()});
        tendons.push_back({{"waypoints_rel_m", wps}, {"terminal_anchored", t.terminal_anchored}});
    }
    doc["tendons"] = tendons;
    if (mu) doc["mu"] = *mu;
    if (stretch) doc["stretch_compliance_m"] = *stretch;
    return doc.dump(2) + "\n";
}

void write_robot(const std::filesystem::path& path, const RobotGeometry& geom, std::optional<double> mu,
                 std::optional<double> stretch) {
    auto out = open_out(path);
    out << robot_to_json(geom, mu, stretch);
}

ShapeRecord shape_record(const RobotGeometry& geom, const JointState& q, bool with_waypoints) {
    const auto frames = forward_kinematics(geom, q);
    ShapeRecord shape;
    shape.frames = frame_origins(frames);
    if (with_waypoints) {
        for (int t = 0; t < geom.tendon_count(); ++t) shape.tendon_waypoints.push_back(tendon_waypoints_world(geom, frames, t));
    }
    return shape;
}

void write_shape_csv(const std::filesystem::path& path, const ShapeRecord& shape) {
    auto out = open_out(path);
    const bool tendons = !shape.tendon_waypoints.empty();
    out << "# format_version=" << kFormatVersion << "\n";
    out << "frame_index,x_m,y_m,z_m" << (tendons ? ",tendon" : "") << "\n";
    auto row = [&](std::size_t i, const Vec3& p, int tendon) {
        out << i << ',' << format_real(p.x()) << ',' << format_real(p.y()) << ',' << format_real(p.z());
        if (tendons) out << ',' << tendon;
        out << '\n';
    };
    for (std::size_t i = 0; i < shape.frames.size(); ++i) row(i, shape.frames[i], -1);
    for (std::size_t t = 0; t < shape.tendon_waypoints.size(); ++t) {
        for (std::size_t i = 0; i < shape.tendon_waypoints[t].size(); ++i)
            row(i, shape.tendon_waypoints[t][i], static_cast<int>(t));
    }
}

ShapeRecord read_shape_csv(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    const std::vector<std::string> plain{"frame_index", "x_m", "y_m", "z_m"};
    std::vector<std::string> with_tendon = plain;
    with_tendon.push_back("tendon");
    const bool tendons = t.header == with_tendon;
    if (!tendons && t.header != plain) throw ParseError(path.string() + ": unexpected shape header");

    ShapeRecord shape;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& f = t.rows[r];
        const std::string w = where(path, t, r);
        const long long index = parse_integer(f[0], w);
        const Vec3 p(parse_real(f[1], w), parse_real(f[2], w), parse_real(f[3], w));
        const long long tendon = tendons ? parse_integer(f[4], w) : -1;
        std::vector<Vec3>* target = &shape.frames;
        if (tendon >= 0) {
            if (tendon > static_cast<long long>(shape.tendon_waypoints.size()))
                throw ParseError(w + ": tendon indices must appear in order");
            if (tendon == static_cast<long long>(shape.tendon_waypoints.size())) shape.tendon_waypoints.emplace_back();
            target = &shape.tendon_waypoints[tendon];
        } else if (tendon != -1 || !shape.tendon_waypoints.empty()) {
            throw ParseError(w + ": frame rows must precede way point rows");
        }
        if (index != static_cast<long long>(target->size()))
            throw ParseError(w + ": frame_index must increase by one from 0");
        target->push_back(p);
    }
    return shape;
}

void write_ground_truth_csv(const std::filesystem::path& path, const GroundTruthShape& shape) {
    shape.validate();
    auto out = open_out(path);
    out << "# format_version=" << kFormatVersion << "\n";
    out << "s_m,x_m,y_m,z_m\n";
    for (std::size_t i = 0; i < shape.s.size(); ++i) {
        const Vec3& p = shape.points[i];
        out << format_real(shape.s[i]) << ',' << format_real(p.x()) << ',' << format_real(p.y()) << ','
            << format_real(p.z()) << '\n';
    }
}

GroundTruthShape read_ground_truth_csv(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    if (t.header != std::vector<std::string>{"s_m", "x_m", "y_m", "z_m"})
        throw ParseError(path.string() + ": unexpected ground truth header");
    GroundTruthShape shape;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& f = t.rows[r];
        const std::string w = where(path, t, r);
        shape.s.push_back(parse_real(f[0], w));
        shape.points.emplace_back(parse_real(f[1], w), parse_real(f[2], w), parse_real(f[3], w));
    }
    try {
        shape.validate();
    } catch (const DomainError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return shape;
}

void write_gait_csv(const std::filesystem::path& path, const GaitSequence& gait) {
    auto out = open_out(path);
    out << "# format_version=" << kFormatVersion << "\n";
    out << "step";
    const std::size_t m = gait.steps.empty() ? 0 : gait.steps.front().displacements.size();
    for (std::size_t t = 0; t < m; ++t) out << ",tendon_" << t << "_m";
    out << '\n';
    for (std::size_t k = 0; k < gait.steps.size(); ++k) {
        out << k;
        for (double d : gait.steps[k].displacements) out << ',' << format_real(d);
        out << '\n';
    }
}

std::vector<std::vector<double>> read_gait_csv(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    if (t.header.size() < 2 || t.header.front() != "step") throw ParseError(path.string() + ": unexpected gait header");
    for (std::size_t c = 1; c < t.header.size(); ++c) {
        if (t.header[c] != "tendon_" + std::to_string(c - 1) + "_m")
            throw ParseError(path.string() + ": unexpected gait column '" + t.header[c] + "'");
    }
    std::vector<std::vector<double>> rows;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string w = where(path, t, r);
        if (parse_integer(t.rows[r][0], w) != static_cast<long long>(r)) throw ParseError(w + ": step out of order");
        std::vector<double> row;
        for (std::size_t c = 1; c < t.rows[r].size(); ++c) row.push_back(parse_real(t.rows[r][c], w));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string command_to_json(const ActuationCommand& cmd) {
    json doc;
    doc["format_version"] = kFormatVersion;
    doc["displacements_m"] = cmd.displacements;
    return doc.dump(2) + "\n";
}

ActuationCommand parse_command(const std::string& text) {
    const json doc = parse_json(text, "command");
    if (!doc.is_object()) throw ParseError("command must be a JSON object");
    check_version(doc, "command");
    const json& d = require(doc, "displacements_m", "command");
    if (!d.is_array()) throw ParseError("'displacements_m' must be an array");
    std::vector<double> displacements;
    for (const auto& v : d) displacements.push_back(real_of(v, "displacement"));
    return ActuationCommand::from_displacements(std::move(displacements));
}

void write_command(const std::filesystem::path& path, const ActuationCommand& cmd) {
    auto out = open_out(path);
    out << command_to_json(cmd);
}

ActuationCommand load_command(const std::filesystem::path& path) {
    try {
        return parse_command(read_text_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::vector<CalibrationSample> load_dataset(const std::filesystem::path& dir, std::vector<std::string>* names) {
    if (!std::filesystem::is_directory(dir)) throw DomainError("dataset directory " + dir.string() + " not found");
    const std::string suffix = ".cmd.json";
    std::vector<std::filesystem::path> commands;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && name.size() > suffix.size() && name.ends_with(suffix))
            commands.push_back(entry.path());
    }
    std::sort(commands.begin(), commands.end());

    std::vector<CalibrationSample> samples;
    for (const auto& cmd_path : commands) {
        const std::string name = cmd_path.filename().string();
        const std::string stem = name.substr(0, name.size() - suffix.size());
        const auto truth_path = dir / (stem + ".truth.csv");
        if (!std::filesystem::exists(truth_path))
            throw DomainError("missing truth file " + truth_path.string() + " for " + cmd_path.string());
        samples.push_back({load_command(cmd_path), read_ground_truth_csv(truth_path)});
        if (names) names->push_back(stem);
    }
    return samples;
}

}  // namespace tdcr
