#include "curvedqi/cosmo.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "curvedqi/ode.hpp"

namespace cqi {

ExpansionModel::ExpansionModel(double eps, double rho_, double m, Statistics s)
    : epsilon(eps), rho(rho_), mass(m), stats(s)
{
    if (!(epsilon > 0) || !(epsilon < 1))
        throw std::invalid_argument("ExpansionModel: epsilon must lie in (0,1)");
    if (!(rho > 0)) throw std::invalid_argument("ExpansionModel: rho must be positive");
    if (!(mass >= 0)) throw std::invalid_argument("ExpansionModel: mass must be non-negative");
}

double ExpansionModel::a(double eta) const { return 1 + epsilon * std::tanh(rho * eta); }

double ExpansionModel::C(double eta) const
{
    double f = a(eta);
    return stats == Statistics::boson ? f : f * f;
}

double ExpansionModel::mass_term(double eta) const { return mass * mass * C(eta); }

double ExpansionModel::C_past() const
{
    double f = 1 - epsilon;
    return stats == Statistics::boson ? f : f * f;
}

double ExpansionModel::C_future() const
{
    double f = 1 + epsilon;
    return stats == Statistics::boson ? f : f * f;
}

double BogoliubovPair::normalization_defect() const
{
    double a2 = std::norm(alpha), b2 = std::norm(beta);
    return stats == Statistics::boson ? a2 - b2 - 1 : a2 + b2 - 1;
}

std::pair<double, double> asymptotic_frequencies(double k, const ExpansionModel& model)
{
    if (k == 0) throw std::invalid_argument("asymptotic_frequencies: zero mode excluded");
    const double m2 = model.mass * model.mass;
    return {std::sqrt(k * k + m2 * model.C_past()), std::sqrt(k * k + m2 * model.C_future())};
}

namespace {

// State (Re a, Im a, Re b, Im b, Phi) for the adiabatic amplitudes
//   a' = c(eta) e^{2i Phi} b,  b' = s c(eta) e^{-2i Phi} a,  Phi' = omega(eta),
// with s = +1 (boson) or -1 (fermion).
BogoliubovPair solve_adiabatic(double k, const ExpansionModel& model, const ModeSolveOptions& opt,
                               auto&& omega, auto&& coupling, double sgn)
{
    if (k == 0) throw std::invalid_argument("solve_mode: zero mode excluded");
    const double e0 = -opt.lambda / model.rho, e1 = opt.lambda / model.rho;
    auto [w_in, w_out] = asymptotic_frequencies(k, model);

    auto rhs = [&](double eta, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
        const cplx al(y[0], y[1]), be(y[2], y[3]);
        const cplx ph = std::polar(1.0, 2 * y[4]);
        const double c = coupling(eta);
        const cplx da = c * ph * be, db = sgn * c * std::conj(ph) * al;
        dy[0] = da.real();
        dy[1] = da.imag();
        dy[2] = db.real();
        dy[3] = db.imag();
        dy[4] = omega(eta);
    };

    Eigen::VectorXd y(5);
    y << 1, 0, 0, 0, w_in * e0;
    BogoliubovPair out;
    out.k = k;
    out.stats = model.stats;
    if (model.mass == 0) return out;  // conformal: no mixing at all

    OdeOptions oo;
    oo.rtol = opt.rtol;
    oo.atol = opt.atol;
    oo.h_max = 1.0 / w_out;  // keep the phase resolved in the quiet asymptotic tails
    y = dopri5(rhs, e0, e1, y, oo);

    // Re-express against plane waves e^{-i w_out eta} at eta_+.
    const double shift = y[4] - w_out * e1;
    out.alpha = cplx(y[0], y[1]) * std::polar(1.0, -shift);
    out.beta = cplx(y[2], y[3]) * std::polar(1.0, shift);
    if (std::abs(out.normalization_defect()) > 1e-8)
        throw std::runtime_error("solve_mode: normalization violated (defect " +
                                 std::to_string(out.normalization_defect()) + ")");
    return out;
}

}  // namespace

BogoliubovPair solve_mode_boson(double k, const ExpansionModel& model, const ModeSolveOptions& opt)
{
    if (model.stats != Statistics::boson) throw std::invalid_argument("solve_mode_boson: fermion model");
    const double m2 = model.mass * model.mass, eps = model.epsilon, rho = model.rho;
    auto omega = [&](double eta) { return std::sqrt(k * k + m2 * model.C(eta)); };
    // omega'/(2 omega) with C' = eps rho sech^2(rho eta).
    auto coupling = [&](double eta) {
        const double w2 = k * k + m2 * model.C(eta);
        const double ch = std::cosh(rho * eta);
        return m2 * eps * rho / (ch * ch) / (4 * w2);
    };
    return solve_adiabatic(k, model, opt, omega, coupling, +1.0);
}

BogoliubovPair solve_mode_fermion(double k, const ExpansionModel& model, const ModeSolveOptions& opt)
{
    if (model.stats != Statistics::fermion) throw std::invalid_argument("solve_mode_fermion: boson model");
    // Dirac system i u' = [[M, k], [k, -M]] u with M = m a(eta); instantaneous eigenvectors
    // rotate by theta = atan2(k, M)/2, theta' = -k M' / (2 omega^2).
    const double m = model.mass, eps = model.epsilon, rho = model.rho;
    auto omega = [&](double eta) {
        const double M = m * model.a(eta);
        return std::sqrt(k * k + M * M);
    };
    auto coupling = [&](double eta) {
        const double M = m * model.a(eta);
        const double ch = std::cosh(rho * eta);
        const double Mp = m * eps * rho / (ch * ch);
        return -0.5 * k * Mp / (k * k + M * M);
    };
    return solve_adiabatic(k, model, opt, omega, coupling, -1.0);
}

double particle_spectrum(const BogoliubovPair& pair) { return std::norm(pair.beta); }

double bosonic_entropy_from_occupation(double x)
{
    if (x <= 0) return 0.0;
    return (1 + x) * std::log1p(x) - x * std::log(x);
}

double bosonic_entropy(const BogoliubovPair& pair)
{
    if (pair.stats != Statistics::boson) throw std::invalid_argument("bosonic_entropy: fermion pair");
    return bosonic_entropy_from_occupation(std::norm(pair.beta));
}

cplx fermionic_theta(const BogoliubovPair& pair, const ExpansionModel& model)
{
    if (pair.k == 0) throw std::invalid_argument("fermionic_theta: zero mode");
    const double mu_out = model.mass * (1 + model.epsilon);
    const double w_out = asymptotic_frequencies(pair.k, model).second;
    // (mu/|k|)(1 - w/mu) written without dividing by mu.
    return std::conj(pair.beta) / std::conj(pair.alpha) * ((mu_out - w_out) / std::abs(pair.k));
}

double fermionic_entropy(cplx theta)
{
    const double x = std::norm(theta);
    if (x == 0) return 0.0;
    return std::log1p(x) - x / (1 + x) * std::log(x);
}

Eigen::MatrixXcd in_vacuum_exponent(const Eigen::MatrixXcd& alpha, const Eigen::MatrixXcd& beta)
{
    if (alpha.rows() != alpha.cols() || beta.rows() != alpha.rows() || beta.cols() != alpha.cols())
        throw std::invalid_argument("in_vacuum_exponent: alpha and beta must be square and equal size");
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(alpha);
    if (!lu.isInvertible()) throw std::invalid_argument("in_vacuum_exponent: alpha is singular");
    Eigen::MatrixXcd V = -beta.conjugate() * lu.inverse();
    return 0.5 * (V + V.transpose());
}

double unruh_squeezing(double omega, double accel)
{
    if (!(omega > 0) || !(accel > 0)) throw std::invalid_argument("unruh: omega and a must be positive");
    return std::atanh(std::exp(-M_PI * omega / accel));
}

double unruh_mean_number(double omega, double accel)
{
    if (!(omega > 0) || !(accel > 0)) throw std::invalid_argument("unruh: omega and a must be positive");
    return 1.0 / std::expm1(2 * M_PI * omega / accel);
}

double unruh_temperature(double accel)
{
    if (!(accel > 0)) throw std::invalid_argument("unruh: a must be positive");
    return accel / (2 * M_PI);
}

std::vector<double> rindler_number_distribution(double r, int n_max)
{
    if (n_max < 0) throw std::invalid_argument("rindler_number_distribution: n_max < 0");
    const double t2 = std::tanh(r) * std::tanh(r), c2 = std::cosh(r) * std::cosh(r);
    std::vector<double> p(n_max + 1);
    double x = 1.0 / c2;
    for (int n = 0; n <= n_max; ++n, x *= t2) p[n] = x;
    return p;
}

double conformal_coupling(int D)
{
    if (D < 2) throw std::invalid_argument("conformal_coupling: D must be >= 2");
    return double(D - 2) / double(4 * (D - 1));
}

cplx kg_inner_product(const SliceMode& u, const SliceMode& v, const SliceGrid& grid)
{
    const size_t n = static_cast<size_t>(grid.n);
    if (grid.n < 2 || !(grid.dx > 0) || u.value.size() != n || u.d_eta.size() != n ||
        v.value.size() != n || v.d_eta.size() != n)
        throw std::invalid_argument("kg_inner_product: grid mismatch");
    cplx acc = 0;
    for (size_t j = 0; j < n; ++j) {
        double wt = grid.dx;
        if (!grid.periodic && (j == 0 || j + 1 == n)) wt *= 0.5;
        acc += wt * (u.value[j] * std::conj(v.d_eta[j]) - std::conj(v.value[j]) * u.d_eta[j]);
    }
    return cplx(0, -1) * acc;
}

}  // namespace cqi
