#pragma once

#include <vector>

#include "dobkit/errors.hpp"

namespace dobkit {

/// One direct-form-II-transposed biquad, coefficients normalized by a0.
struct Biquad {
    double b0, b1, b2;
    double a1, a2;
};

/// Low-pass Butterworth of even order as cascaded second-order sections,
/// designed by bilinear transform. `cutoff` is normalized to Nyquist,
/// 0 < cutoff < 1.
std::vector<Biquad> butterworth_lowpass(int order, double cutoff);

/// Single forward pass through the cascade, zero initial state.
std::vector<double> sos_filter(const std::vector<Biquad>& sos, const std::vector<double>& x);

/// Zero-phase forward-backward filtering with odd-reflection padding of
/// 3*order samples at each end. Throws TooShort if the series is not longer
/// than 3*order.
std::vector<double> filtfilt(int order, double cutoff, const std::vector<double>& x);

/// SNR cap (dB) reported when the residual power underflows.
inline constexpr double kSnrCapDb = 300.0;

/// Command-torque smoothness metric: the zero-phase low-passed series is the
/// signal, the remainder the noise; returns 10*log10(sum s^2 / sum n^2),
/// capped at kSnrCapDb.
double snr_metric(const std::vector<double>& series, double cutoff = 0.2, int order = 12);

}  // namespace dobkit
