#pragma once
// Harmonic-oscillator detectors coupled to a Dirichlet cavity field, entanglement
// farming, and a toy vibration-sensing scan built on top of it.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "curvedqi/gaussian.hpp"
#include "curvedqi/switching.hpp"

namespace cqi {

// L(t) = L_cav + amplitude * sin(2 pi f t + phase); only the mode frequencies follow L(t).
struct CavityVibration {
    double amplitude = 0.0;
    double frequency = 0.0;
    double phase = 0.0;
};

struct CavitySpec {
    double length = 1.0;
    int n_modes = 40;
    CavityVibration vibration;

    CavitySpec() = default;
    CavitySpec(double length, int n_modes, CavityVibration vib = {});

    double omega(int n, double t = 0.0) const;  // n = 1..N
    double mode_function(int n, double x) const;
    bool vibrating() const { return vibration.amplitude != 0.0; }
};

struct DetectorSpec {
    double gap = 1.0;
    double lambda0 = 0.0;
    std::function<double(double)> position;  // x_d(t)
    std::function<double(double)> dtau_dt;   // proper-time rate
    std::function<double(double)> window;    // chi(t) >= 0

    static DetectorSpec stationary(double gap, double x, double lambda0,
                                   std::function<double(double)> window);
    double coupling(double t) const { return lambda0 * window(t); }
};

// Detectors occupy the leading modes of the layout, followed by the N cavity modes.
// `time_origin` shifts detector clocks: detector functions see t - time_origin, the
// cavity sees absolute t.
QuadraticGenerator build_generator(const CavitySpec& cavity, const std::vector<DetectorSpec>& detectors,
                                   double time_origin = 0.0);

CovarianceState simulate(const CavitySpec& cavity, const std::vector<DetectorSpec>& detectors,
                         const CovarianceState& initial, double t0, double t1,
                         const PropagatorOptions& opt = {});

struct FarmingProtocol {
    DetectorSpec a;
    DetectorSpec b;
    double cycle_duration = 1.0;
    std::optional<CovarianceState> injected;  // 2-mode detector state; vacuum if unset
    int max_cycles = 200;
    double convergence_tol = 1e-6;
    // Converged once the last settle_cycles + 1 values span < convergence_tol; 1 is the
    // plain successive-difference rule.
    int settle_cycles = 1;
    bool keep_snapshots = true;
};

struct FarmingReport {
    std::vector<double> negativities;
    std::vector<CovarianceState> cavity_snapshots;  // cavity state after each cycle
    bool converged = false;
    int converged_at = 0;  // 1-based cycle index, 0 if never
    double fixed_point_negativity = 0.0;
    CovarianceState final_cavity;
};

FarmingReport farm(const CavitySpec& cavity, const FarmingProtocol& protocol,
                   const CovarianceState& initial_cavity, const PropagatorOptions& opt = {});

// Working-point search over (gap, cycle duration, coupling): pair of stationary
// detectors at fixed positions with smooth compact windows filling each cycle.
struct WorkingPointGrid {
    std::vector<double> gaps;
    std::vector<double> cycle_durations;
    std::vector<double> couplings;
    double x_a = 0.3;  // positions as fractions of L_cav
    double x_b = 0.7;
    double ramp_fraction = 0.1;  // window ramp delta as a fraction of the cycle
    int max_cycles = 200;
    double convergence_tol = 1e-6;
    // Cauchy window for the scan: a single small step also happens on quasi-periodic
    // sequences that never settle.
    int settle_cycles = 10;
};

struct WorkingPoint {
    double gap = 0.0;
    double cycle_duration = 0.0;
    double coupling = 0.0;
    double fixed_point_negativity = 0.0;
    bool converged = false;
    int converged_at = 0;
};

FarmingProtocol make_pair_protocol(const CavitySpec& cavity, const WorkingPointGrid& grid, double gap,
                                   double cycle_duration, double coupling);
std::vector<WorkingPoint> scan_working_points(const CavitySpec& cavity, const WorkingPointGrid& grid,
                                              const PropagatorOptions& opt = {});
WorkingPoint best_working_point(const std::vector<WorkingPoint>& points);

struct SeismoPoint {
    double amplitude = 0.0;
    double frequency = 0.0;
    double delta_negativity = 0.0;
    double perturbed_negativity = 0.0;
    bool ok = true;
    std::string error;
};

// Farming with L(t) = L_cav + dL sin(2 pi f t + phase) vs the static cavity, both from
// the vacuum; reports the change in the last-cycle negativity.
SeismoPoint seismograph_point(const CavitySpec& cavity, const FarmingProtocol& protocol,
                              double amplitude, double frequency, double phase = 0.0,
                              const PropagatorOptions& opt = {});
// Same, against a precomputed static-cavity negativity.
SeismoPoint seismograph_response(const CavitySpec& cavity, const FarmingProtocol& protocol,
                                 double baseline_negativity, double amplitude, double frequency,
                                 double phase = 0.0, const PropagatorOptions& opt = {});

// Grid over (amplitude, frequency); the static baseline is computed once.
std::vector<SeismoPoint> seismograph_scan(const CavitySpec& cavity, const FarmingProtocol& protocol,
                                          const std::vector<double>& amplitudes,
                                          const std::vector<double>& frequencies,
                                          const PropagatorOptions& opt = {});

}  // namespace cqi
