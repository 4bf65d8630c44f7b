// SPDX-License-Identifier: Apache-2.0
//
// User geometry, large-scale fading and Rayleigh small-scale fading.
// The composite channel is G = H * D^{1/2} with D = diag(beta).

#ifndef QMIMO_CHANNEL_HPP
#define QMIMO_CHANNEL_HPP

#include "core.hpp"
#include "random.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace qmimo {

struct CellConfig {
    double radius_m = 1000.0;
    double min_dist_m = 100.0;
    double pathloss_exp = 3.8;
    double shadow_std_db = 8.0;

    void validate() const {
        detail::require(min_dist_m > 0.0 && min_dist_m < radius_m,
                        "CellConfig: need 0 < min_dist_m < radius_m");
        detail::require(pathloss_exp > 0.0, "CellConfig: pathloss_exp must be positive");
        detail::require(shadow_std_db >= 0.0, "CellConfig: shadow_std_db must be nonnegative");
    }
};

struct LargeScaleProfile {
    RVector betas;      // beta_k, linear power gain
    RVector distances;  // r_k in meters (informational, may be empty)

    Eigen::Index users() const { return betas.size(); }
    double trace() const { return betas.sum(); }
};

struct ChannelRealization {
    CMatrix H;  // M x K small-scale
    CMatrix G;  // M x K composite

    Eigen::Index antennas() const { return G.rows(); }
    Eigen::Index users() const { return G.cols(); }
};

// beta = s * (r / r_min)^{-v}, s = 10^{shadow_db / 10}.
inline double large_scale_gain(const CellConfig& cell, double distance_m, double shadow_db = 0.0) {
    detail::require(distance_m > 0.0, "large_scale_gain: distance must be positive");
    return std::pow(10.0, shadow_db / 10.0) *
           std::pow(distance_m / cell.min_dist_m, -cell.pathloss_exp);
}

// Regular hexagon with circumradius `radius`, vertices at multiples of 60 degrees.
inline bool inside_hexagon(double x, double y, double radius) {
    const double apothem = radius * std::sqrt(3.0) / 2.0;
    for (int j = 0; j < 3; ++j) {
        const double ang = std::numbers::pi / 6.0 + j * std::numbers::pi / 3.0;
        if (std::abs(x * std::cos(ang) + y * std::sin(ang)) > apothem) return false;
    }
    return true;
}

inline LargeScaleProfile generate_large_scale(const CellConfig& cell, Eigen::Index users,
                                              RandomStream& rng) {
    detail::require(users >= 1, "generate_large_scale: need at least one user");
    cell.validate();

    LargeScaleProfile out;
    out.betas.resize(users);
    out.distances.resize(users);
    for (Eigen::Index k = 0; k < users; ++k) {
        double x, y, r;
        // Uniform over the bounding circle, rejected outside the hexagon or inside r_min.
        do {
            r = cell.radius_m * std::sqrt(rng.uniform());
            const double phi = 2.0 * std::numbers::pi * rng.uniform();
            x = r * std::cos(phi);
            y = r * std::sin(phi);
        } while (r < cell.min_dist_m || !inside_hexagon(x, y, cell.radius_m));
        const double shadow_db = cell.shadow_std_db * rng.normal();
        out.distances[k] = r;
        out.betas[k] = large_scale_gain(cell, r, shadow_db);
    }
    return out;
}

inline ChannelRealization draw_channel(const LargeScaleProfile& profile, Eigen::Index antennas,
                                       RandomStream& rng) {
    detail::require(antennas >= 1, "draw_channel: need at least one antenna");
    const Eigen::Index users = profile.users();
    ChannelRealization ch;
    ch.H.resize(antennas, users);
    // Column-major fill order is part of the determinism contract.
    for (Eigen::Index k = 0; k < users; ++k)
        for (Eigen::Index m = 0; m < antennas; ++m) ch.H(m, k) = rng.complex_normal();
    ch.G = ch.H * profile.betas.cwiseSqrt().asDiagonal();
    return ch;
}

} // namespace qmimo

#endif
