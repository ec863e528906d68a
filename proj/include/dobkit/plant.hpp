#pragma once

#include <functional>

#include "dobkit/dynamics.hpp"

namespace dobkit {

/// Discrete-time plant abstraction shared by all observers: the augmented
/// state carries the disturbance block first, x = [d; s]. `step` is the
/// Euler map used both for prediction and (by default) for the plant truth.
struct PlantModel {
    int dist_dim = 1;   // p
    int state_dim = 2;  // n - p
    double dt = 0.01;
    Mat H;              // m x n observation matrix (linear measurement)
    std::function<Vec(const Vec& x, const Vec& u)> step;

    int n() const { return dist_dim + state_dim; }
    int m() const { return static_cast<int>(H.rows()); }
};

/// 1-DOF manipulator, x = [d, thetadot, theta], angle-only measurement.
PlantModel make_one_dof_plant(const OneDofParams& p, double dt);

/// Two-link leg, x = [d(2), theta(2), thetadot(2)], angle + velocity measurement.
PlantModel make_exo_plant(const TwoLinkParams& p, double dt);

}  // namespace dobkit
