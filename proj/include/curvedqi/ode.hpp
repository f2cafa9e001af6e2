#pragma once
// Embedded Dormand–Prince 5(4) for Eigen dense states (vectors or matrices).

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cqi {

struct OdeOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double h_init = 0.0;        // 0 -> automatic
    double h_max = 0.0;         // 0 -> unbounded
    long max_steps = 20'000'000;
};

class IntegrationError : public std::runtime_error {
public:
    IntegrationError(const std::string& what, double t)
        : std::runtime_error(what + " at t=" + std::to_string(t)), t_(t) {}
    double time() const { return t_; }

private:
    double t_;
};

struct OdeStats {
    long accepted = 0;
    long rejected = 0;
    double last_h = 0.0;
};

namespace detail {
template <class M>
double err_norm(const M& e, const M& y0, const M& y1, double atol, double rtol)
{
    auto sc = atol + rtol * y0.array().abs().max(y1.array().abs());
    return std::sqrt((e.array() / sc).square().mean());
}
}  // namespace detail

// Integrates y' = f(t, y) from t0 to t1 (t1 >= t0). f is called as f(t, y, dy).
template <class M, class F>
M dopri5(F&& f, double t0, double t1, M y, const OdeOptions& opt = {}, OdeStats* stats = nullptr)
{
    if (t1 < t0) throw std::invalid_argument("dopri5: t1 < t0");
    if (t1 == t0) return y;

    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                     a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                     a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                     b6 = 11.0 / 84;
    // b - b_hat
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                     e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    M k1(y), k2(y), k3(y), k4(y), k5(y), k6(y), k7(y), ytmp(y), ynew(y), err(y);
    double t = t0;
    f(t, y, k1);

    double h = opt.h_init;
    if (h <= 0) {
        // Hairer's initial step heuristic.
        M zero = M::Zero(y.rows(), y.cols());
        double d0 = detail::err_norm(y, y, zero, opt.atol, opt.rtol);
        double d1 = detail::err_norm(k1, y, zero, opt.atol, opt.rtol);
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min(h0, t1 - t0);
        ytmp = y + h0 * k1;
        f(t + h0, ytmp, k2);
        double d2 = detail::err_norm(M(k2 - k1), y, zero, opt.atol, opt.rtol) / h0;
        double mx = std::max(d1, d2);
        double h1 = mx <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / mx, 0.2);
        h = std::min(100 * h0, h1);
    }
    if (opt.h_max > 0) h = std::min(h, opt.h_max);

    long steps = 0;
    double fac_old = 1e-4;
    bool last_rejected = false;
    while (t < t1) {
        if (++steps > opt.max_steps) throw IntegrationError("dopri5: step budget exhausted", t);
        if (t + h > t1) h = t1 - t;
        if (h < 1e-14 * std::max(1.0, std::abs(t)))
            throw IntegrationError("dopri5: step size underflow", t);

        ytmp = y + h * a21 * k1;
        f(t + c2 * h, ytmp, k2);
        ytmp = y + h * (a31 * k1 + a32 * k2);
        f(t + c3 * h, ytmp, k3);
        ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
        f(t + c4 * h, ytmp, k4);
        ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        f(t + c5 * h, ytmp, k5);
        ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        f(t + h, ytmp, k6);
        ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        f(t + h, ynew, k7);
        err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        double en = detail::err_norm(err, y, ynew, opt.atol, opt.rtol);
        if (!std::isfinite(en)) {
            h *= 0.1;
            last_rejected = true;
            if (stats) ++stats->rejected;
            continue;
        }
        if (en <= 1.0) {
            // PI controller (Gustafsson), beta = 0.04.
            double fac = 0.9 * std::pow(en, -0.17) * std::pow(fac_old, 0.04);
            fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 10.0);
            fac_old = std::max(en, 1e-4);
            t += h;
            y = ynew;
            k1 = k7;
            if (stats) {
                ++stats->accepted;
                stats->last_h = h;
            }
            h *= fac;
            if (opt.h_max > 0) h = std::min(h, opt.h_max);
            last_rejected = false;
        } else {
            h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
            last_rejected = true;
            if (stats) ++stats->rejected;
        }
    }
    return y;
}

}  // namespace cqi
