#pragma once
// Comoving UDW detector on a flat 3-torus FLRW background: GR vs LQC scale factors,
// mode amplitudes I_n, excitation probabilities and the late-time echo estimator E.
// Planck units (l_p = 1).

#include <array>
#include <complex>
#include <string>
#include <vector>

#include "curvedqi/switching.hpp"

namespace cqi {

enum class Dynamics { GR, LQC };

struct CosmologyBackground {
    Dynamics kind = Dynamics::GR;
    double pi_phi = 1000.0;
    double l = 0.0;  // LQC quantization length; unused for GR
    double L_torus = 1.0;

    static CosmologyBackground gr(double pi_phi, double L_torus = 1.0);
    static CosmologyBackground lqc(double pi_phi, double l, double L_torus = 1.0);
    void validate() const;
};

// 2F1(1/6, 1/2; 3/2; z) for real z <= 1/2.
double hyp2f1_echo(double z);

double scale_factor(const CosmologyBackground& bg, double t);
double conformal_time(const CosmologyBackground& bg, double t);
// Late-time offset eta_LQC - eta_GR -> beta (same pi_phi, L); zero for GR.
double conformal_offset(const CosmologyBackground& bg);

struct EchoConfig {
    double Omega = 0.1;
    double lambda = 1.0;
    std::array<double, 3> x0{0.0, 0.0, 0.0};
    double T0 = 0.01;
    double Tm = 5.0;  // split time for the late-time GR continuation
    double T = 100.0;
    int n_max = 15;
    double Ttilde = 10.0;   // running-average resolution
    double T_late = 50.0;   // estimator window [T_late, T_late + DeltaT]
    double DeltaT = 0.0;    // 0 -> T - T_late
    double rel_tol = 1e-6;
    int workers = 1;

    double window_length() const { return DeltaT > 0 ? DeltaT : T - T_late; }
    void validate() const;
    // Documented (non-fatal) regime checks: Omega l^3 << 1, Ttilde >> l^3.
    std::vector<std::string> regime_warnings(const CosmologyBackground& bg) const;
};

struct ModeShell {
    int norm2 = 0;  // |n|^2
    int multiplicity = 0;
    std::array<int, 3> representative{0, 0, 0};
};

std::vector<ModeShell> mode_shells(int n_max);

double mode_frequency(const CosmologyBackground& bg, int norm2);

// I_n(T0, T) for the detector at cfg.x0; n != 0.
std::complex<double> mode_amplitude_In(const EchoConfig& cfg, const CosmologyBackground& bg,
                                       const SwitchingFunction& sw, const std::array<int, 3>& n);

struct ProbabilityResult {
    double value = 0.0;
    double tail_ratio = 0.0;  // share of the outermost band n_max - 1 < |n| <= n_max
    bool flagged = false;     // tail_ratio above 5%
    int shells = 0;
};

// P_e(T0, T) = lambda^2 sum_n |I_n|^2 over 0 < |n| <= n_max.
ProbabilityResult excitation_probability(const EchoConfig& cfg, const CosmologyBackground& bg,
                                         const SwitchingFunction& sw);

// P_e(first) - P_e(second), both integrated directly over [T0, T].
double delta_probability(const EchoConfig& cfg, const CosmologyBackground& first,
                         const CosmologyBackground& second, const SwitchingFunction& sw);

// Same difference with the LQC amplitude continued past Tm by the GR integrand and the
// conformal offset: I_LQC(T0,T) ~ I_LQC(T0,Tm) + e^{i omega beta} I_GR(Tm,T).
double delta_probability_split(const EchoConfig& cfg, const CosmologyBackground& lqc,
                               const CosmologyBackground& gr, const SwitchingFunction& sw);

struct EchoEstimate {
    double E = 0.0;
    double step = 0.0;  // T' grid spacing
    std::vector<double> times;     // T over [T_late, T_late + DeltaT]
    std::vector<double> mean_gr;   // <P_GR>_Ttilde(T)
    std::vector<double> mean_lqc;  // <P_LQC>_Ttilde(T)
    std::vector<double> ratio;     // <Delta P>/<P_GR>
    double tail_ratio = 0.0;
    bool flagged = false;
};

// E = (1/DeltaT) int_{T_late}^{T_late+DeltaT} <P_LQC - P_GR>_Ttilde / <P_GR>_Ttilde dT.
EchoEstimate estimator_E(const EchoConfig& cfg, const CosmologyBackground& lqc, const CosmologyBackground& gr,
                         const SwitchingFunction& sw);

}  // namespace cqi
