#include "dobkit/butterworth.hpp"

#include <algorithm>
#include <cmath>

namespace dobkit {

std::vector<Biquad> butterworth_lowpass(int order, double cutoff) {
    if (order < 2 || order % 2 != 0) throw ConfigError("butterworth_lowpass: order must be even >= 2");
    if (!(cutoff > 0.0 && cutoff < 1.0)) throw ConfigError("butterworth_lowpass: cutoff in (0,1)");

    const double warped = std::tan(M_PI * cutoff / 2.0);  // bilinear pre-warp
    std::vector<Biquad> sos;
    sos.reserve(order / 2);
    for (int i = 0; i < order / 2; ++i) {
        // Analog prototype pair: s^2 + 2 sin(phi) s + 1, scaled to the cutoff.
        const double q = 2.0 * std::sin(M_PI * (2.0 * i + 1.0) / (2.0 * order));
        const double w2 = warped * warped;
        const double a0 = 1.0 + q * warped + w2;
        Biquad bq;
        bq.b0 = w2 / a0;
        bq.b1 = 2.0 * w2 / a0;
        bq.b2 = w2 / a0;
        bq.a1 = 2.0 * (w2 - 1.0) / a0;
        bq.a2 = (1.0 - q * warped + w2) / a0;
        sos.push_back(bq);
    }
    return sos;
}

std::vector<double> sos_filter(const std::vector<Biquad>& sos, const std::vector<double>& x) {
    std::vector<double> y = x;
    for (const Biquad& s : sos) {
        double z1 = 0.0, z2 = 0.0;
        for (double& v : y) {
            const double in = v;
            const double out = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * out + z2;
            z2 = s.b2 * in - s.a2 * out;
            v = out;
        }
    }
    return y;
}

namespace {

// Forward pass with each section initialized at its DC steady state for the
// first sample, so step-like inputs produce no startup transient (every
// section has unit DC gain, so the same reference sample works for all).
std::vector<double> sos_filter_steady(const std::vector<Biquad>& sos, std::vector<double> y) {
    const double x0 = y.empty() ? 0.0 : y.front();
    for (const Biquad& s : sos) {
        double z1 = x0 * (1.0 - s.b0);
        double z2 = x0 * (s.b2 - s.a2);
        for (double& v : y) {
            const double in = v;
            const double out = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * out + z2;
            z2 = s.b2 * in - s.a2 * out;
            v = out;
        }
    }
    return y;
}

}  // namespace

std::vector<double> filtfilt(int order, double cutoff, const std::vector<double>& x) {
    const std::size_t pad = static_cast<std::size_t>(3 * order);
    if (x.size() <= pad) throw TooShort("filtfilt: series length must exceed 3*order");

    const auto sos = butterworth_lowpass(order, cutoff);

    // Odd reflection about the endpoints.
    std::vector<double> ext;
    ext.reserve(x.size() + 2 * pad);
    for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x.front() - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 2; i <= pad + 1; ++i) ext.push_back(2.0 * x.back() - x[x.size() - i]);

    std::vector<double> y = sos_filter_steady(sos, ext);
    std::reverse(y.begin(), y.end());
    y = sos_filter_steady(sos, std::move(y));
    std::reverse(y.begin(), y.end());

    return {y.begin() + static_cast<std::ptrdiff_t>(pad),
            y.begin() + static_cast<std::ptrdiff_t>(pad + x.size())};
}

double snr_metric(const std::vector<double>& series, double cutoff, int order) {
    const std::vector<double> smooth = filtfilt(order, cutoff, series);
    double sig = 0.0, noise = 0.0;
    for (std::size_t i = 0; i < series.size(); ++i) {
        sig += smooth[i] * smooth[i];
        const double r = series[i] - smooth[i];
        noise += r * r;
    }
    if (noise <= 0.0 || sig <= 0.0) return kSnrCapDb;
    return std::min(10.0 * std::log10(sig / noise), kSnrCapDb);
}

}  // namespace dobkit
