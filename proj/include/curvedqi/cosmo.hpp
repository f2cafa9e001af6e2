#pragma once
// Bogoliubov coefficients for the 1+1 tanh expansion model, entanglement spectra,
// and the Rindler/Unruh chain.

#include <Eigen/Dense>
#include <complex>
#include <utility>
#include <vector>

namespace cqi {

using cplx = std::complex<double>;

enum class Statistics { boson, fermion };

// Boson: conformal factor C(eta) = 1 + eps tanh(rho eta).
// Fermion: vierbein factor a(eta) = 1 + eps tanh(rho eta), i.e. C = a^2.
struct ExpansionModel {
    double epsilon;
    double rho;
    double mass;
    Statistics stats;

    ExpansionModel(double epsilon, double rho, double mass, Statistics stats);

    double a(double eta) const;        // 1 + eps tanh(rho eta)
    double C(double eta) const;        // conformal factor for the chosen statistics
    double mass_term(double eta) const;  // m^2 C(eta)
    double C_past() const;
    double C_future() const;
};

struct BogoliubovPair {
    double k = 0;
    cplx alpha{1, 0};
    cplx beta{0, 0};
    Statistics stats = Statistics::boson;

    // |a|^2 - |b|^2 - 1 (boson) or |a|^2 + |b|^2 - 1 (fermion).
    double normalization_defect() const;
};

struct ModeSolveOptions {
    double rtol = 1e-11;
    double atol = 1e-30;  // beta can be ~1e-15 at large k; scale errors by |beta| itself
    double lambda = 20.0;  // integrate over rho*eta in [-lambda, lambda]
};

std::pair<double, double> asymptotic_frequencies(double k, const ExpansionModel& model);

BogoliubovPair solve_mode_boson(double k, const ExpansionModel& model, const ModeSolveOptions& opt = {});
BogoliubovPair solve_mode_fermion(double k, const ExpansionModel& model, const ModeSolveOptions& opt = {});

double particle_spectrum(const BogoliubovPair& pair);

// Entropy of the two-mode squeezed reduction with tanh r = |beta/alpha| (natural log).
double bosonic_entropy(const BogoliubovPair& pair);
double bosonic_entropy_from_occupation(double nbar);

cplx fermionic_theta(const BogoliubovPair& pair, const ExpansionModel& model);
double fermionic_entropy(cplx theta);

// V = -beta^* alpha^{-1} (elementwise conjugate, matrix inverse), symmetrized.
// The in-vacuum is C exp(V/2 a^dag a^dag)|0_out>.
Eigen::MatrixXcd in_vacuum_exponent(const Eigen::MatrixXcd& alpha, const Eigen::MatrixXcd& beta);

double unruh_squeezing(double omega, double accel);
double unruh_mean_number(double omega, double accel);
double unruh_temperature(double accel);
std::vector<double> rindler_number_distribution(double r, int n_max);

double conformal_coupling(int D);

// Constant-eta slice in 1+1 conformally flat coordinates.
struct SliceGrid {
    double x0 = 0.0;
    double dx = 0.0;
    int n = 0;
    bool periodic = true;  // periodic: equal weights; else composite trapezoid
};

struct SliceMode {
    std::vector<cplx> value;
    std::vector<cplx> d_eta;
};

// (u, v) = -i ∫ dx (u ∂_eta v^* - v^* ∂_eta u).
cplx kg_inner_product(const SliceMode& u, const SliceMode& v, const SliceGrid& grid);

}  // namespace cqi
