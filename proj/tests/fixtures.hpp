#pragma once

#include "tdcr/chain_geometry.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace tdcr::testing {

inline std::vector<double> uniform_links(int n, double length) { return std::vector<double>(n, length); }

// Prototype-scale robot: n links of 17 mm, one parallel tendon at +x.
inline RobotGeometry parallel_robot(int n = 10, double offset = 0.005, double link = 0.017,
                                    double limit = 0.3) {
    const auto links = uniform_links(n, link);
    return RobotGeometry(links, limit, {parallel_routing(links, offset, 0.0)});
}

inline RobotGeometry opposed_robot(int n = 10, double offset = 0.005, double link = 0.017,
                                   double limit = 0.3) {
    const auto links = uniform_links(n, link);
    return RobotGeometry(links, limit,
                         {parallel_routing(links, offset, 0.0), parallel_routing(links, offset, std::numbers::pi)});
}

// One tendon winding once around the backbone over the robot length.
inline RobotGeometry helical_robot(int n = 10, double offset = 0.005, double link = 0.017,
                                   double limit = 0.4, double turns = 1.0) {
    const auto links = uniform_links(n, link);
    const double rate = 2.0 * std::numbers::pi * turns / (n * link);
    return RobotGeometry(links, limit, {helical_routing(links, offset, 0.0, rate)});
}

// Three tendons 120 degrees apart sharing one winding rate.
inline RobotGeometry three_tendon_robot(int n = 10, double offset = 0.005, double link = 0.017,
                                        double limit = 0.5, double rate = 0.0) {
    const auto links = uniform_links(n, link);
    std::vector<TendonRouting> tendons;
    for (int i = 0; i < 3; ++i)
        tendons.push_back(helical_routing(links, offset, 2.0 * std::numbers::pi * i / 3.0, rate));
    return RobotGeometry(links, limit, tendons);
}

inline JointState random_state(std::mt19937& rng, int joints, double limit) {
    std::uniform_real_distribution<double> u(-limit, limit);
    Eigen::VectorXd q(2 * joints);
    for (auto& v : q) v = u(rng);
    return JointState(q);
}

}  // namespace tdcr::testing
