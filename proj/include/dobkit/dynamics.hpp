#pragma once

#include <Eigen/Dense>
#include <functional>

#include "dobkit/errors.hpp"

namespace dobkit {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Mapped inertial parameters of the two-link exoskeleton leg.
/// X1, Y1 (kg*m) and J1 (kg*m^2) belong to the hip link, X2, Y2, J2 to the
/// knee link; l1 is the thigh length (m), g the gravity constant (m/s^2).
struct TwoLinkParams {
    double X1 = 3.746;
    double Y1 = 0.01;
    double J1 = 1.671;
    double X2 = 0.592;
    double Y2 = 0.01;
    double J2 = 0.549;
    double l1 = 0.40;  // not part of the identified set; see README
    double g = 9.81;

    // Condition-number cap defining the admissible set for M(theta).
    double cond_cap = 1e8;

    void validate() const;
};

/// Coulomb-viscous-Stribeck friction parameters for one joint.
struct StribeckParams {
    double tau_c = 0.0;       // Coulomb torque (N*m)
    double tau_s = 0.0;       // static torque (N*m)
    double thetadot_s = 1.0;  // Stribeck rate (rad/s)
    double eta_v = 0.0;       // viscous coefficient (N*m*s/rad)

    void validate() const;
};

/// 1-DOF manipulator parameters.
struct OneDofParams {
    double inertia = 0.1;
    double mass = 0.1;
    double stiffness = 0.1;
    double damping = 1.0;
    double length = 0.2;
    double g = 9.81;

    void validate() const;
};

struct TwoLinkTerms {
    Mat2 M;
    Mat2 C;
    Vec2 G;
};

/// Mass, Coriolis, and gravity terms of the two-link leg.
TwoLinkTerms two_link_terms(const Vec2& theta, const Vec2& thetadot, const TwoLinkParams& p);

/// Friction torque with sgn(0) = 0. The exponential uses |thetadot| so the
/// Stribeck term decays for either rotation direction.
double stribeck_friction(double thetadot, const StribeckParams& p);

/// thetaddot = M^-1 (tau + d - C*thetadot - G). Throws SingularMass if the
/// mass matrix condition number exceeds the configured cap.
Vec2 forward_dynamics(const Vec2& theta, const Vec2& thetadot, const Vec2& tau, const Vec2& d,
                      const TwoLinkParams& p);

/// Inverse dynamics: d = M*thetaddot + C*thetadot + G - tau.
Vec2 raw_dob(const Vec2& theta, const Vec2& thetadot, const Vec2& thetaddot, const Vec2& tau,
             const TwoLinkParams& p);

/// One Euler step of the 1-DOF augmented model, x = [d, thetadot, theta].
Vec one_dof_transition(const Vec& x, double u, double dt, const OneDofParams& p);

/// One Euler step of the two-link augmented model, x = [d(2), theta(2), thetadot(2)].
/// The disturbance block is held (nominal model ddot = 0).
Vec exo_transition(const Vec& x, const Vec2& tau, double dt, const TwoLinkParams& p);

/// RK4 step of the two-link truth dynamics (optional plant integrator; the
/// estimation path always uses the Euler map above).
Vec exo_transition_rk4(const Vec& x, const Vec2& tau, double dt, const TwoLinkParams& p);

/// Central-difference Jacobian with per-component step h*max(1, |x_i|).
/// Throws NonFinite if any probe evaluation is non-finite.
Mat numerical_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h = 1e-6);

}  // namespace dobkit
