#include "curvedqi/switching.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cqi {

SwitchingFunction::SwitchingFunction(SwitchingKind k, double t0, double t1, double d)
    : kind(k), T0(t0), T(t1), delta(d)
{
    if (!(delta > 0)) throw std::invalid_argument("switching: delta must be positive");
    if (!(T0 < T)) throw std::invalid_argument("switching: T0 must precede T");
    if (kind == SwitchingKind::smooth_compact && 2 * M_PI * delta > T - T0)
        throw std::invalid_argument("switching: ramps of width pi*delta overlap");
}

double smooth_step(double x)
{
    if (x <= 0) return 0.0;
    if (x >= M_PI) return 1.0;
    // cot x = cos/sin stays finite away from the endpoints; tanh saturates cleanly.
    return 0.5 * (1 - std::tanh(std::cos(x) / std::sin(x)));
}

double SwitchingFunction::operator()(double t) const
{
    switch (kind) {
    case SwitchingKind::constant:
        return 1.0;
    case SwitchingKind::linear_ramp:
        if (t <= T0 || t >= T) return 0.0;
        if (t < 0.5 * (T + T0)) return std::min((t - T0) / delta, 1.0);
        return std::min((T - t) / delta, 1.0);
    case SwitchingKind::tanh_ramp:
        return std::tanh((t - T0) / delta) - std::tanh((t - T) / delta) + std::tanh((T0 - T) / delta);
    case SwitchingKind::smooth_compact:
        if (t <= T0 || t >= T) return 0.0;
        if (t < T0 + M_PI * delta) return smooth_step((t - T0) / delta);
        if (t >= T - M_PI * delta) return smooth_step((T - t) / delta);
        return 1.0;
    }
    return 0.0;
}

}  // namespace cqi
