#include "dobkit/control.hpp"

#include <cmath>

namespace dobkit {

void PdGains::validate() const {
    if (kp.size() == 0 || kp.size() != kd.size())
        throw ConfigError("PdGains: kp/kd size mismatch");
    if (kp.minCoeff() <= 0.0 || kd.minCoeff() <= 0.0)
        throw ConfigError("PdGains: gains must be positive");
}

Vec2 augmented_pd(const Vec& x_hat, const DesiredTraj& des, const PdGains& gains,
                  const TwoLinkParams& p) {
    const Vec2 d_hat = x_hat.segment<2>(0);
    const Vec2 theta_hat = x_hat.segment<2>(2);
    const Vec2 thetadot_hat = x_hat.segment<2>(4);

    const TwoLinkTerms t = two_link_terms(theta_hat, thetadot_hat, p);
    const Vec2 tau_ff = t.M * Vec2(des.thetaddot_d) + t.C * Vec2(des.thetadot_d) + t.G;
    const Vec2 tau_fb = -gains.kd.cwiseProduct(thetadot_hat - des.thetadot_d) -
                        gains.kp.cwiseProduct(theta_hat - des.theta_d);
    return tau_ff + tau_fb - d_hat;
}

double one_dof_pd(const Vec& x_hat, const DesiredTraj& des, double kp, double kd,
                  const OneDofParams& p) {
    const double d_hat = x_hat(0);
    const double thetadot_hat = x_hat(1);
    const double theta_hat = x_hat(2);

    const double u_ff = p.inertia * des.thetaddot_d(0) + p.damping * des.thetadot_d(0) +
                        p.stiffness * des.theta_d(0) + p.mass * p.g * std::sin(theta_hat);
    const double u_fb =
        -kp * (theta_hat - des.theta_d(0)) - kd * (thetadot_hat - des.thetadot_d(0));
    return u_ff + u_fb - d_hat;
}

double ultimate_bound(const PdGains& gains, const BoundInputs& b) {
    gains.validate();
    return 0.5 * b.l_e_bar * b.l_e_bar * (1.0 / gains.kd_min() + b.eps / gains.kp_min());
}

}  // namespace dobkit
