#pragma once
// Gaussian phase-space engine.
//
// Quadrature ordering: (q_d1..q_dM, q_1..q_N, p_d1..p_dM, p_1..p_N), hbar = 1,
// sigma_ij = <x_i x_j + x_j x_i> - 2<x_i><x_j>, so the vacuum is the identity.
// The symplectic form is called `J` in code to keep it apart from detector gaps.

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <vector>

#include "curvedqi/ode.hpp"

namespace cqi {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using cplx = std::complex<double>;

class PhaseSpaceLayout {
public:
    PhaseSpaceLayout() = default;
    PhaseSpaceLayout(int n_detectors, int n_field_modes);
    static PhaseSpaceLayout modes(int n) { return {0, n}; }

    int detectors() const { return m_; }
    int field_modes() const { return n_; }
    int n() const { return m_ + n_; }
    int dim() const { return 2 * (m_ + n_); }
    int q(int mode) const { return mode; }
    int p(int mode) const { return n() + mode; }
    int detector(int j) const { return j; }
    int field(int k) const { return m_ + k; }

    bool operator==(const PhaseSpaceLayout&) const = default;

private:
    int m_ = 0;
    int n_ = 0;
};

Mat symplectic_form(const PhaseSpaceLayout& layout);
Mat symplectic_form(int n_modes);

class CovarianceState {
public:
    CovarianceState() = default;
    // Symmetrizes; throws std::invalid_argument if the uncertainty relation fails.
    CovarianceState(PhaseSpaceLayout layout, Mat sigma, bool check = true);

    const PhaseSpaceLayout& layout() const { return layout_; }
    const Mat& sigma() const { return sigma_; }
    int n() const { return layout_.n(); }

private:
    PhaseSpaceLayout layout_;
    Mat sigma_;
};

// Smallest eigenvalue of sigma + iJ (Hermitian).
double uncertainty_margin(const Mat& sigma);

// F = [[A, X], [X^H, B]] with A = (w+g+g^H)/2, B = (w-g-g^H)/2, X = i(w-g+g^H)/2.
CMat assemble_F(const CMat& w, const CMat& g);

// Real symmetric F + F^T for the Heisenberg equation dx/dt = J F^sym x.
Mat symmetric_generator(const CMat& w, const CMat& g);

struct QuadraticGenerator {
    PhaseSpaceLayout layout;
    std::function<CMat(double)> w;
    std::function<CMat(double)> g;
    // Optional fast path: writes F^sym(t) into the (pre-sized) argument.
    std::function<void(double, Mat&)> fsym;

    void fill_fsym(double t, Mat& out) const;
    void check_hermitian(double t, double tol = 1e-12) const;
};

struct SymplecticPropagator {
    PhaseSpaceLayout layout;
    Mat S;
    double t0 = 0.0;
    double t1 = 0.0;
};

struct PropagatorOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double h_max = 0.0;
    bool sparse = false;  // exploit sparsity of J F^sym for large cavities
};

SymplecticPropagator evolve_propagator(const QuadraticGenerator& gen, double t0, double t1,
                                       const PropagatorOptions& opt = {});
// Propagators S(t_k, t0) for increasing sample times.
std::vector<SymplecticPropagator> evolve_propagator(const QuadraticGenerator& gen, double t0,
                                                    const std::vector<double>& times,
                                                    const PropagatorOptions& opt = {});

// Composition: later ∘ earlier.
SymplecticPropagator compose(const SymplecticPropagator& later, const SymplecticPropagator& earlier);

double symplectic_defect(const Mat& S);

CovarianceState evolve_covariance(const CovarianceState& state, const SymplecticPropagator& prop);
CovarianceState evolve_covariance(const CovarianceState& state, const Mat& S);

CovarianceState vacuum_state(const PhaseSpaceLayout& layout);
CovarianceState thermal_state(const PhaseSpaceLayout& layout, const std::vector<double>& nbar);
CovarianceState thermal_state(const PhaseSpaceLayout& layout, double nbar);
CovarianceState two_mode_squeezed_state(double r);

// Direct sum (first block's modes precede the second's in each quadrature half).
CovarianceState direct_sum(const CovarianceState& a, const CovarianceState& b,
                           const PhaseSpaceLayout& joint);

// Gaussian partial trace: keeps the listed modes, in the given order. Detector modes
// listed first stay detectors in the reduced layout; otherwise all become field modes.
CovarianceState partial_state(const CovarianceState& state, const std::vector<int>& modes);

std::vector<double> symplectic_eigenvalues(const Mat& sigma);
std::vector<double> symplectic_eigenvalues(const CovarianceState& state);
double purity(const CovarianceState& state);
double purity(const Mat& sigma);
double mean_excitation(const CovarianceState& state, int mode);
double log_negativity_two_mode(const CovarianceState& state);
double log_negativity_two_mode(const Mat& sigma4);
// -ln of the smallest partially transposed symplectic eigenvalue, without the max(0, .)
// clip: continuous across the separable/entangled boundary.
double partial_transpose_log_eigenvalue(const Mat& sigma4);

}  // namespace cqi
