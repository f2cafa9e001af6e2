#pragma once
// Entanglement harvesting by two Gaussian-switched UDW detectors in the Minkowski
// vacuum (static, parallel and anti-parallel uniform acceleration), plus the
// closed-form harvesting regions of the de Sitter / thermal / inertial cases.

#include <array>
#include <complex>
#include <string>
#include <utility>
#include <vector>

namespace cqi {

enum class HarvestCase { ComovingDeSitter, ThermalMinkowski, MinkowskiVacuum, ParallelAccel, AntiParallelAccel };

const char* to_string(HarvestCase c);
HarvestCase harvest_case_from_string(const std::string& s);

struct HarvestConfiguration {
    HarvestCase kind = HarvestCase::MinkowskiVacuum;
    double kappa = 1.0;  // proper acceleration (expansion rate for de Sitter)
    double L = 1.0;      // separation at closest approach
    double Omega = 1.0;
    double sigma = 1.0;  // Gaussian switching width
    double lambda = 1.0;
    double rel_tol = 1e-8;

    double theta() const { return kappa * sigma * sigma * Omega; }  // kappa sigma^2 Omega
    void validate() const;
    bool numeric() const;  // Minkowski-vacuum Wightman available
};

struct Event {
    double t = 0;
    std::array<double, 3> x{0, 0, 0};
};

// D+(x, x') = -1 / (4 pi^2 [(t - t' - i eps)^2 - |x - x'|^2]).
std::complex<double> wightman_minkowski(const Event& x, const Event& xp, double eps);

// Events of detectors (a, b) at proper time tau. Static pairs sit at x = +-L/2.
std::pair<Event, Event> trajectory(HarvestCase c, double kappa, double L, double tau);

struct HarvestValue {
    double A = 0;
    std::complex<double> X{0, 0};
    double error = 0;  // quadrature error estimate on |X|
    bool flagged = false;
    std::string note;
};

double compute_A(const HarvestConfiguration& cfg);
std::complex<double> compute_X(const HarvestConfiguration& cfg);
HarvestValue harvest(const HarvestConfiguration& cfg);

// Leading-order negativity estimate max(0, |X| - A).
double negativity_estimate(double A, std::complex<double> X);

// Closed-form harvesting condition at (L kappa, kappa sigma^2 Omega).
bool region_boundary(HarvestCase c, double Lk, double theta);
double critical_distance(double kappa, double sigma, double Omega);

struct RegionGrid {
    std::vector<double> Lk;
    std::vector<double> theta;
    static RegionGrid uniform(double Lk_max, int nL, double theta_max, int nT);  // cell centres
};

struct RegionCell {
    double Lk = 0, theta = 0;
    bool entangled = false;
    int closed_form = -1;  // -1 if the case has no closed form, else 0/1
    bool numeric = false;
    double A = 0;
    std::complex<double> X{0, 0};
    double negativity = 0;
    bool flagged = false;
    std::string error;
};

struct RegionMapOptions {
    bool numeric = true;  // use compute_A / compute_X wherever the Wightman function is available
    int workers = 1;
};

// Rows in theta-major order. kappa, sigma, lambda, rel_tol come from `defaults`.
std::vector<RegionCell> region_map(HarvestCase c, const RegionGrid& grid, const HarvestConfiguration& defaults,
                                   const RegionMapOptions& opt = {});

}  // namespace cqi
