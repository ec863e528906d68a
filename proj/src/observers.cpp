#include "dobkit/observers.hpp"

#include <cmath>

namespace dobkit {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw ConfigError(msg);
}

Mat symmetrized(const Mat& P) { return 0.5 * (P + P.transpose()); }

Mat lower_cholesky(const Mat& A, const char* what) {
    Eigen::LLT<Mat> llt(A);
    if (llt.info() != Eigen::Success) throw NotPD(what);
    return llt.matrixL();
}

struct EkfCore {
    AugmentedState state;
    Vec innovation;
    Mat S;
};

// Shared predict + update used by EKF-DOB and by each IMM bank member, so a
// single-model IMM reproduces the EKF bitwise.
EkfCore ekf_core(const Vec& x, const Mat& P, long k, const PlantModel& model, const Vec& u,
                 const Vec& y, const Mat& Q, const Mat& R) {
    const Mat F = numerical_jacobian([&](const Vec& xi) { return model.step(xi, u); }, x);
    const Vec x_pred = model.step(x, u);
    const Mat P_pred = symmetrized(F * P * F.transpose() + Q);

    const Mat& H = model.H;
    const Mat S = H * P_pred * H.transpose() + R;
    Eigen::LDLT<Mat> ldlt(S);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() < 1e-300)
        throw InnovationSingular("innovation covariance numerically singular");
    const Mat K = ldlt.solve(H * P_pred.transpose()).transpose();

    EkfCore out;
    out.innovation = y - H * x_pred;
    out.S = S;
    out.state.x = x_pred + K * out.innovation;
    out.state.P = symmetrized((Mat::Identity(model.n(), model.n()) - K * H) * P_pred);
    out.state.k = k + 1;
    return out;
}

}  // namespace

Mat NoiseConfig::assembled_Q() const {
    const Eigen::Index p = Qd.rows();
    const Eigen::Index s = Qs.rows();
    Mat Q = Mat::Zero(p + s, p + s);
    Q.topLeftCorner(p, p) = eta * Qd;
    Q.bottomRightCorner(s, s) = Qs;
    return Q;
}

void NoiseConfig::validate(const PlantModel& model) const {
    require(Qd.rows() == model.dist_dim && Qd.cols() == model.dist_dim, "NoiseConfig: Qd size");
    require(Qs.rows() == model.state_dim && Qs.cols() == model.state_dim, "NoiseConfig: Qs size");
    require(R.rows() == model.m() && R.cols() == model.m(), "NoiseConfig: R size");
    require(eta >= 1.0, "NoiseConfig: eta must be >= 1");
    require(Qd.isApprox(Qd.transpose()) && Qs.isApprox(Qs.transpose()) &&
                R.isApprox(R.transpose()),
            "NoiseConfig: covariances must be symmetric");
    Eigen::LLT<Mat> llt(R);
    require(llt.info() == Eigen::Success, "NoiseConfig: R must be positive definite");
}

void ImmConfig::validate(const PlantModel& model) const {
    require(!bank.empty(), "ImmConfig: empty bank");
    const auto p = static_cast<Eigen::Index>(bank.size());
    require(markov.rows() == p && markov.cols() == p, "ImmConfig: markov size");
    require(mu0.size() == p, "ImmConfig: mu0 size");
    for (Eigen::Index i = 0; i < p; ++i) {
        require(markov.row(i).minCoeff() >= 0.0, "ImmConfig: negative transition probability");
        require(std::abs(markov.row(i).sum() - 1.0) < 1e-9, "ImmConfig: row must sum to 1");
    }
    require(mu0.minCoeff() >= 0.0 && std::abs(mu0.sum() - 1.0) < 1e-9,
            "ImmConfig: mu0 must lie on the simplex");
    for (const auto& nc : bank) nc.validate(model);
}

Vec MkcConfig::sigma_p() const {
    Vec out(sigma_d.size() + sigma_s.size());
    out << sigma_d, sigma_s;
    return out;
}

void MkcConfig::validate(const PlantModel& model) const {
    require(sigma_d.size() == model.dist_dim, "MkcConfig: sigma_d size");
    require(sigma_s.size() == model.state_dim, "MkcConfig: sigma_s size");
    require(sigma_r.size() == model.m(), "MkcConfig: sigma_r size");
    require(sigma_d.minCoeff() > 0.0 && sigma_s.minCoeff() > 0.0 && sigma_r.minCoeff() > 0.0,
            "MkcConfig: bandwidths must be positive (or infinite)");
    require(eps_fp > 0.0, "MkcConfig: eps_fp must be positive");
    require(max_iter >= 1, "MkcConfig: max_iter must be >= 1");
}

MkcConfig MkcConfig::defaults(const PlantModel& model, double sigma_d_value) {
    MkcConfig mk;
    mk.sigma_d = Vec::Constant(model.dist_dim, sigma_d_value);
    mk.sigma_s = Vec::Constant(model.state_dim, kInfiniteBandwidth);
    mk.sigma_r = Vec::Constant(model.m(), kInfiniteBandwidth);
    return mk;
}

AugmentedState ekf_dob_step(const AugmentedState& s, const PlantModel& model, const Vec& u,
                            const Vec& y, const NoiseConfig& nc) {
    return ekf_core(s.x, s.P, s.k, model, u, y, nc.assembled_Q(), nc.R).state;
}

ImmStepResult immekf_dob_step(const std::vector<AugmentedState>& bank_states, const Vec& mu,
                              const PlantModel& model, const Vec& u, const Vec& y,
                              const ImmConfig& cfg) {
    const auto p = static_cast<Eigen::Index>(cfg.bank.size());
    require(static_cast<Eigen::Index>(bank_states.size()) == p && mu.size() == p,
            "immekf_dob_step: bank/mu size mismatch");
    const Mat& tp = cfg.markov;
    const int n = model.n();

    // Step 2: mixing.
    Vec cbar = Vec::Zero(p);
    for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index i = 0; i < p; ++i) cbar(j) += tp(i, j) * mu(i);

    std::vector<Vec> x_init(p);
    std::vector<Mat> P_init(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        Mat mix_w(p, 1);
        Vec xj = Vec::Zero(n);
        for (Eigen::Index i = 0; i < p; ++i) {
            mix_w(i) = tp(i, j) * mu(i) / cbar(j);
            xj += mix_w(i) * bank_states[i].x;
        }
        Mat Pj = Mat::Zero(n, n);
        for (Eigen::Index i = 0; i < p; ++i) {
            const Vec dx = bank_states[i].x - xj;
            Pj += mix_w(i) * (bank_states[i].P + dx * dx.transpose());
        }
        x_init[j] = xj;
        P_init[j] = symmetrized(Pj);
    }

    // Step 3: per-model filtering; Step 4: model probability update (log domain).
    ImmStepResult out;
    out.bank.resize(p);
    Vec loglik(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const EkfCore core = ekf_core(x_init[j], P_init[j], bank_states[j].k, model, u, y,
                                      cfg.bank[j].assembled_Q(), cfg.bank[j].R);
        out.bank[j] = core.state;
        Eigen::LLT<Mat> llt(core.S);
        if (llt.info() != Eigen::Success) {
            loglik(j) = -std::numeric_limits<double>::infinity();
            continue;
        }
        const Vec w = llt.matrixL().solve(core.innovation);
        double logdet = 0.0;
        for (Eigen::Index i = 0; i < core.S.rows(); ++i)
            logdet += std::log(llt.matrixL()(i, i));
        loglik(j) = -0.5 * model.m() * std::log(2.0 * M_PI) - logdet - 0.5 * w.squaredNorm();
    }

    const double shift = loglik.maxCoeff();
    if (!std::isfinite(shift)) {
        out.mu = mu;  // all likelihoods underflowed: keep previous probabilities
        out.degenerate = true;
    } else {
        Vec lam = (loglik.array() - shift).exp();
        Vec mu_new = lam.cwiseProduct(cbar);
        out.mu = mu_new / mu_new.sum();
    }

    // Step 5: fused output with cross-model spread.
    Vec x_fused = Vec::Zero(n);
    for (Eigen::Index j = 0; j < p; ++j) x_fused += out.mu(j) * out.bank[j].x;
    Mat P_fused = Mat::Zero(n, n);
    for (Eigen::Index j = 0; j < p; ++j) {
        const Vec dx = out.bank[j].x - x_fused;
        P_fused += out.mu(j) * (out.bank[j].P + dx * dx.transpose());
    }
    out.fused.x = x_fused;
    out.fused.P = symmetrized(P_fused);
    out.fused.k = bank_states[0].k + 1;
    return out;
}

WhitenedResiduals whiten_residuals(const Vec& x_pred, const Mat& P_pred, const Mat& R,
                                   const Vec& x_iter, const Vec& y, const Mat& H) {
    WhitenedResiduals w;
    w.B_p = lower_cholesky(P_pred, "whiten_residuals: P_pred not positive definite");
    w.B_r = lower_cholesky(R, "whiten_residuals: R not positive definite");
    w.e_p = w.B_p.triangularView<Eigen::Lower>().solve(x_pred - x_iter);
    w.e_r = w.B_r.triangularView<Eigen::Lower>().solve(y - H * x_iter);
    return w;
}

Mat mkc_weight_matrix(const Vec& e, const Vec& sigma) {
    require(e.size() == sigma.size(), "mkc_weight_matrix: size mismatch");
    Vec diag(e.size());
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        diag(i) = std::isfinite(sigma(i))
                      ? std::exp(-e(i) * e(i) / (2.0 * sigma(i) * sigma(i)))
                      : 1.0;
    }
    return diag.asDiagonal();
}

MkcStepResult mkcekf_dob_step(const AugmentedState& s, const PlantModel& model, const Vec& u,
                              const Vec& y, const NoiseConfig& nc, const MkcConfig& mk) {
    const Mat& H = model.H;
    const int n = model.n();

    // Prediction, identical to the EKF.
    const Mat F = numerical_jacobian([&](const Vec& xi) { return model.step(xi, u); }, s.x);
    const Vec x_pred = model.step(s.x, u);
    const Mat P_pred = symmetrized(F * s.P * F.transpose() + nc.assembled_Q());

    const Mat B_p = lower_cholesky(P_pred, "mkcekf_dob_step: predicted covariance not PD");
    const Vec sigma_p = mk.sigma_p();
    const Vec innovation = y - H * x_pred;

    // Fixed-point loop on the kernel-inflated prior.
    Vec x_iter = x_pred;
    Mat K;
    int t = 0;
    bool all_unit_weights = true;
    double rel_change = std::numeric_limits<double>::infinity();
    while (t < mk.max_iter) {
        ++t;
        const Vec e_p = B_p.triangularView<Eigen::Lower>().solve(x_pred - x_iter);
        const Mat Mp = mkc_weight_matrix(e_p, sigma_p);
        Vec inv_w(n);
        for (int i = 0; i < n; ++i) inv_w(i) = 1.0 / Mp(i, i);
        // Unit weights leave the prior untouched; evaluating B_p B_p^T would
        // only reintroduce factorization round-off, so take P_pred directly.
        const bool unit_weights = (inv_w.array() == 1.0).all();
        all_unit_weights = all_unit_weights && unit_weights;
        const Mat P_tilde =
            unit_weights ? P_pred : Mat(B_p * inv_w.asDiagonal() * B_p.transpose());

        const Mat S = H * P_tilde * H.transpose() + nc.R;
        Eigen::LDLT<Mat> ldlt(S);
        if (ldlt.info() != Eigen::Success)
            throw InnovationSingular("mkcekf_dob_step: inflated innovation covariance singular");
        K = ldlt.solve(H * P_tilde.transpose()).transpose();

        const Vec x_next = x_pred + K * innovation;
        rel_change = (x_next - x_iter).norm() / std::max(x_next.norm(), 1e-300);
        x_iter = x_next;
        if (rel_change <= mk.eps_fp) break;
    }

    MkcStepResult out;
    out.iters = t;
    out.diverged = (t >= mk.max_iter && rel_change > 100.0 * mk.eps_fp);
    out.state.x = x_iter;
    if (all_unit_weights) {
        // Every channel stayed quadratic, so K is the exact Kalman gain and the
        // Joseph form reduces algebraically to (I-KH)P. Evaluating it the same
        // way as the plain EKF keeps the two filters bit-identical, which is
        // what the least-squares equivalence promises.
        out.state.P = symmetrized((Mat::Identity(n, n) - K * H) * P_pred);
    } else {
        const Mat IKH = Mat::Identity(n, n) - K * H;
        out.state.P = symmetrized(IKH * P_pred * IKH.transpose() + K * nc.R * K.transpose());
    }
    out.state.k = s.k + 1;
    return out;
}

std::pair<NdobState, Vec2> ndob_step(const NdobState& nd, const Vec2& theta, const Vec2& thetadot,
                                     const Vec2& tau, const TwoLinkParams& p, double dt) {
    const TwoLinkTerms t = two_link_terms(theta, thetadot, p);
    Eigen::SelfAdjointEigenSolver<Mat2> es(t.M);
    if (!(es.eigenvalues()(0) > 0.0) || es.eigenvalues()(1) / es.eigenvalues()(0) > p.cond_cap)
        throw SingularMass("ndob_step: mass matrix outside admissible set");

    Mat2 shape;
    shape << 1.0, 0.0, 1.0, 1.0;
    const Mat2 L = nd.c * shape * t.M.inverse();
    const Vec2 pvec = nd.c * Vec2(thetadot(0), thetadot(0) + thetadot(1));

    NdobState next = nd;
    next.z = (Mat2::Identity() - L * dt) * nd.z +
             L * dt * (t.C * thetadot + t.G - tau - pvec);
    const Vec2 d_hat = next.z + pvec;
    return {next, d_hat};
}

}  // namespace dobkit
