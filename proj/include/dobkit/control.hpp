#pragma once

#include "dobkit/dynamics.hpp"

namespace dobkit {

/// Diagonal PD gains.
struct PdGains {
    Vec kp;
    Vec kd;

    void validate() const;
    double kp_min() const { return kp.minCoeff(); }
    double kd_min() const { return kd.minCoeff(); }
};

/// Desired trajectory sample at one step.
struct DesiredTraj {
    Vec theta_d;
    Vec thetadot_d;
    Vec thetaddot_d;
};

/// Inputs of the ultimate-bound calculation.
struct BoundInputs {
    double l_e_bar = 1.0;  // lumped-error bound (N*m)
    double eps = 0.01;     // Lyapunov coupling constant
    double alpha1 = 1.0;   // quadratic-form coefficients
    double alpha2 = 1.0;
};

/// Augmented PD controller for the two-link leg: feedforward from the
/// estimated configuration, PD feedback, disturbance compensation.
/// x_hat = [d(2), theta(2), thetadot(2)].
Vec2 augmented_pd(const Vec& x_hat, const DesiredTraj& des, const PdGains& gains,
                  const TwoLinkParams& p);

/// Augmented PD controller for the 1-DOF manipulator,
/// x_hat = [d, thetadot, theta]. The gravity feedforward uses m*g*sin(theta)
/// so it cancels the plant term exactly.
double one_dof_pd(const Vec& x_hat, const DesiredTraj& des, double kp, double kd,
                  const OneDofParams& p);

/// Convergence radius kappa = (l_e_bar^2 / 2) (1/lmin(Kd) + eps/lmin(Kp)).
double ultimate_bound(const PdGains& gains, const BoundInputs& b);

}  // namespace dobkit
