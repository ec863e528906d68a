#pragma once

#include <limits>
#include <utility>
#include <vector>

#include "dobkit/plant.hpp"

namespace dobkit {

/// Joint estimate of x = [d; s] with covariance.
struct AugmentedState {
    Vec x;
    Mat P;
    long k = 0;
};

/// Process/measurement covariances of one filter hypothesis. The assembled
/// process covariance is Q = diag(eta * Qd, Qs).
struct NoiseConfig {
    Mat Qd;          // p x p disturbance process covariance
    Mat Qs;          // (n-p) x (n-p) state process covariance
    Mat R;           // m x m measurement covariance
    double eta = 1;  // scalar multiplier on Qd, >= 1

    Mat assembled_Q() const;
    void validate(const PlantModel& model) const;
};

/// Filter bank plus Markov chain over hypotheses.
struct ImmConfig {
    std::vector<NoiseConfig> bank;
    Mat markov;  // row-stochastic transition matrix
    Vec mu0;     // initial model probabilities

    void validate(const PlantModel& model) const;
};

inline constexpr double kInfiniteBandwidth = std::numeric_limits<double>::infinity();

/// Kernel bandwidths per residual channel; infinity marks a quadratic
/// channel (kernel weight exactly 1).
struct MkcConfig {
    Vec sigma_d;                                 // p disturbance bandwidths
    Vec sigma_s;                                 // (n-p), default infinite
    Vec sigma_r;                                 // m, default infinite
    double eps_fp = 1e-6;
    int max_iter = 20;

    /// Bandwidth vector over the process channels, [sigma_d; sigma_s].
    Vec sigma_p() const;
    void validate(const PlantModel& model) const;
    static MkcConfig defaults(const PlantModel& model, double sigma_d_value);
};

/// Auxiliary state of the nonlinear disturbance observer.
struct NdobState {
    Vec2 z = Vec2::Zero();
    double c = 50.0;  // observer gain
};

/// One EKF-DOB predict + update cycle.
AugmentedState ekf_dob_step(const AugmentedState& s, const PlantModel& model, const Vec& u,
                            const Vec& y, const NoiseConfig& nc);

struct ImmStepResult {
    std::vector<AugmentedState> bank;
    Vec mu;
    AugmentedState fused;
    bool degenerate = false;  // all likelihoods underflowed; previous mu kept
};

/// One IMM cycle: mixing, per-model EKF filtering, probability update, fusion.
ImmStepResult immekf_dob_step(const std::vector<AugmentedState>& bank_states, const Vec& mu,
                              const PlantModel& model, const Vec& u, const Vec& y,
                              const ImmConfig& cfg);

struct WhitenedResiduals {
    Vec e_p;
    Vec e_r;
    Mat B_p;  // lower Cholesky factor of P_pred
    Mat B_r;  // lower Cholesky factor of R
};

/// Whiten process/measurement residuals by the Cholesky factors of
/// P_pred and R. Throws NotPD if either factorization fails.
WhitenedResiduals whiten_residuals(const Vec& x_pred, const Mat& P_pred, const Mat& R,
                                   const Vec& x_iter, const Vec& y, const Mat& H);

/// Diagonal Gaussian-kernel weight matrix, entries exp(-e_i^2 / (2 sigma_i^2));
/// infinite-bandwidth channels get exactly 1.
Mat mkc_weight_matrix(const Vec& e, const Vec& sigma);

struct MkcStepResult {
    AugmentedState state;
    int iters = 0;
    bool diverged = false;  // max_iter hit with relative change > 100*eps
};

/// One MKCEKF-DOB cycle: EKF prediction, then fixed-point iteration on the
/// kernel-inflated prior, Joseph-form covariance update.
MkcStepResult mkcekf_dob_step(const AugmentedState& s, const PlantModel& model, const Vec& u,
                              const Vec& y, const NoiseConfig& nc, const MkcConfig& mk);

/// One discrete NDOB step for the two-link leg; returns the new auxiliary
/// state and the disturbance estimate.
std::pair<NdobState, Vec2> ndob_step(const NdobState& nd, const Vec2& theta, const Vec2& thetadot,
                                     const Vec2& tau, const TwoLinkParams& p, double dt);

}  // namespace dobkit
