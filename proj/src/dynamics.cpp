#include "dobkit/dynamics.hpp"

#include <cmath>

namespace dobkit {

namespace {

double sgn(double v) { return (v > 0.0) - (v < 0.0); }

void require(bool ok, const char* msg) {
    if (!ok) throw ConfigError(msg);
}

}  // namespace

void TwoLinkParams::validate() const {
    require(J1 > 0.0 && J2 > 0.0, "TwoLinkParams: J1, J2 must be positive");
    require(l1 > 0.0, "TwoLinkParams: l1 must be positive");
    require(g > 0.0, "TwoLinkParams: g must be positive");
    require(std::isfinite(X1) && std::isfinite(Y1) && std::isfinite(X2) && std::isfinite(Y2),
            "TwoLinkParams: non-finite parameter");
}

void StribeckParams::validate() const {
    require(tau_c >= 0.0 && tau_s >= 0.0, "StribeckParams: torques must be nonnegative");
    require(thetadot_s > 0.0, "StribeckParams: thetadot_s must be positive");
    require(eta_v >= 0.0, "StribeckParams: eta_v must be nonnegative");
}

void OneDofParams::validate() const {
    require(inertia > 0.0, "OneDofParams: inertia must be positive");
    require(std::isfinite(mass) && std::isfinite(stiffness) && std::isfinite(damping) &&
                std::isfinite(length) && std::isfinite(g),
            "OneDofParams: non-finite parameter");
}

TwoLinkTerms two_link_terms(const Vec2& theta, const Vec2& thetadot, const TwoLinkParams& p) {
    const double s1 = std::sin(theta(0));
    const double c1 = std::cos(theta(0));
    const double s2 = std::sin(theta(1));
    const double c2 = std::cos(theta(1));
    const double s12 = std::sin(theta(0) + theta(1));
    const double c12 = std::cos(theta(0) + theta(1));

    const double a = p.X2 * c2 - p.Y2 * s2;
    const double b = p.X2 * s2 + p.Y2 * c2;

    TwoLinkTerms t;
    t.M << p.J1 + 2.0 * p.l1 * a, p.J2 + p.l1 * a,
           p.J2 + p.l1 * a,       p.J2;
    // Christoffel factorization: C*thetadot is the Coriolis torque and
    // Mdot - 2C is skew-symmetric.
    t.C << -p.l1 * b * thetadot(1), -p.l1 * b * (thetadot(0) + thetadot(1)),
            p.l1 * b * thetadot(0),  0.0;
    t.G << p.g * (p.X1 * s1 + p.Y1 * c1 + p.X2 * s12 + p.Y2 * c12),
           p.g * (p.X2 * s12 + p.Y2 * c12);
    return t;
}

double stribeck_friction(double thetadot, const StribeckParams& p) {
    const double decay = std::exp(-std::abs(thetadot) / p.thetadot_s);
    return (p.tau_c + (p.tau_s - p.tau_c) * decay) * sgn(thetadot) + p.eta_v * thetadot;
}

namespace {

Mat2 checked_mass_inverse(const Mat2& M, double cond_cap) {
    Eigen::SelfAdjointEigenSolver<Mat2> es(M);
    const double lmin = es.eigenvalues()(0);
    const double lmax = es.eigenvalues()(1);
    if (!(lmin > 0.0) || lmax / lmin > cond_cap)
        throw SingularMass("mass matrix outside admissible set (cond > cap or not PD)");
    return M.inverse();
}

}  // namespace

Vec2 forward_dynamics(const Vec2& theta, const Vec2& thetadot, const Vec2& tau, const Vec2& d,
                      const TwoLinkParams& p) {
    const TwoLinkTerms t = two_link_terms(theta, thetadot, p);
    const Mat2 Minv = checked_mass_inverse(t.M, p.cond_cap);
    return Minv * (tau + d - t.C * thetadot - t.G);
}

Vec2 raw_dob(const Vec2& theta, const Vec2& thetadot, const Vec2& thetaddot, const Vec2& tau,
             const TwoLinkParams& p) {
    const TwoLinkTerms t = two_link_terms(theta, thetadot, p);
    return t.M * thetaddot + t.C * thetadot + t.G - tau;
}

Vec one_dof_transition(const Vec& x, double u, double dt, const OneDofParams& p) {
    const double d = x(0);
    const double thetadot = x(1);
    const double theta = x(2);

    Vec out(3);
    out(0) = d;
    out(1) = dt / p.inertia *
             (u + d + (p.inertia - p.damping * dt) / dt * thetadot - p.stiffness * theta -
              p.mass * p.g * std::sin(theta));
    out(2) = thetadot * dt + theta;
    return out;
}

namespace {

// Continuous-time vector field of the augmented two-link model.
Vec exo_field(const Vec& x, const Vec2& tau, const TwoLinkParams& p) {
    const Vec2 d = x.segment<2>(0);
    const Vec2 theta = x.segment<2>(2);
    const Vec2 thetadot = x.segment<2>(4);

    Vec f(6);
    f.segment<2>(0).setZero();
    f.segment<2>(2) = thetadot;
    f.segment<2>(4) = forward_dynamics(theta, thetadot, tau, d, p);
    return f;
}

}  // namespace

Vec exo_transition(const Vec& x, const Vec2& tau, double dt, const TwoLinkParams& p) {
    return x + exo_field(x, tau, p) * dt;
}

Vec exo_transition_rk4(const Vec& x, const Vec2& tau, double dt, const TwoLinkParams& p) {
    const Vec k1 = exo_field(x, tau, p);
    const Vec k2 = exo_field(x + 0.5 * dt * k1, tau, p);
    const Vec k3 = exo_field(x + 0.5 * dt * k2, tau, p);
    const Vec k4 = exo_field(x + dt * k3, tau, p);
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Mat numerical_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h) {
    const Eigen::Index n = x.size();
    Mat F;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double hj = h * std::max(1.0, std::abs(x(j)));
        Vec xp = x, xm = x;
        xp(j) += hj;
        xm(j) -= hj;
        const Vec fp = f(xp);
        const Vec fm = f(xm);
        if (!fp.allFinite() || !fm.allFinite())
            throw NonFinite("numerical_jacobian: non-finite probe evaluation");
        if (F.size() == 0) F.resize(fp.size(), n);
        F.col(j) = (fp - fm) / (2.0 * hj);
    }
    return F;
}

}  // namespace dobkit
