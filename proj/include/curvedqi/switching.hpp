#pragma once
// Compactly supported (or constant) coupling windows chi(t) in [0, 1].

namespace cqi {

enum class SwitchingKind { constant, linear_ramp, tanh_ramp, smooth_compact };

struct SwitchingFunction {
    SwitchingKind kind = SwitchingKind::constant;
    double T0 = 0.0;
    double T = 1.0;
    double delta = 0.1;  // ramp timescale

    SwitchingFunction() = default;
    SwitchingFunction(SwitchingKind kind, double T0, double T, double delta);

    double operator()(double t) const;
    bool compact() const { return kind == SwitchingKind::linear_ramp || kind == SwitchingKind::smooth_compact; }
};

// S(x) = [1 - tanh(cot x)]/2 on [0, pi], with the endpoint limits 0 and 1.
double smooth_step(double x);

}  // namespace cqi
