#include "curvedqi/gaussian.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cqi {

PhaseSpaceLayout::PhaseSpaceLayout(int n_detectors, int n_field_modes)
    : m_(n_detectors), n_(n_field_modes)
{
    if (m_ < 0 || n_ < 0 || m_ + n_ < 1)
        throw std::invalid_argument("PhaseSpaceLayout: need at least one mode");
}

Mat symplectic_form(int n)
{
    if (n < 1) throw std::invalid_argument("symplectic_form: n must be >= 1");
    Mat J = Mat::Zero(2 * n, 2 * n);
    J.topRightCorner(n, n).setIdentity();
    J.bottomLeftCorner(n, n) = -Mat::Identity(n, n);
    return J;
}

Mat symplectic_form(const PhaseSpaceLayout& layout) { return symplectic_form(layout.n()); }

double uncertainty_margin(const Mat& sigma)
{
    const int n = static_cast<int>(sigma.rows()) / 2;
    CMat h = sigma.cast<cplx>() + cplx(0, 1) * symplectic_form(n).cast<cplx>();
    Eigen::SelfAdjointEigenSolver<CMat> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

CovarianceState::CovarianceState(PhaseSpaceLayout layout, Mat sigma, bool check)
    : layout_(layout), sigma_(std::move(sigma))
{
    if (sigma_.rows() != layout_.dim() || sigma_.cols() != layout_.dim())
        throw std::invalid_argument("CovarianceState: matrix size does not match layout");
    sigma_ = 0.5 * (sigma_ + sigma_.transpose()).eval();
    if (check && uncertainty_margin(sigma_) < -1e-9)
        throw std::invalid_argument("CovarianceState: uncertainty relation violated");
}

CMat assemble_F(const CMat& w, const CMat& g)
{
    if (w.rows() != w.cols() || g.rows() != w.rows() || g.cols() != w.cols())
        throw std::invalid_argument("assemble_F: w and g must be square and of equal size");
    const Eigen::Index n = w.rows();
    const cplx I(0, 1);
    CMat gh = g.adjoint();
    CMat F(2 * n, 2 * n);
    F.topLeftCorner(n, n) = 0.5 * (w + g + gh);
    F.bottomRightCorner(n, n) = 0.5 * (w - g - gh);
    CMat X = 0.5 * I * (w - g + gh);
    F.topRightCorner(n, n) = X;
    F.bottomLeftCorner(n, n) = X.adjoint();
    return F;
}

Mat symmetric_generator(const CMat& w, const CMat& g)
{
    CMat F = assemble_F(w, g);
    return (F + F.transpose()).real();
}

void QuadraticGenerator::fill_fsym(double t, Mat& out) const
{
    if (fsym) {
        out.resize(layout.dim(), layout.dim());
        fsym(t, out);
        return;
    }
    CMat wt = w(t), gt = g(t);
    if (wt.rows() != layout.n() || gt.rows() != layout.n())
        throw std::invalid_argument("QuadraticGenerator: coefficient size does not match layout");
    out = symmetric_generator(wt, gt);
}

void QuadraticGenerator::check_hermitian(double t, double tol) const
{
    if (!w) return;
    CMat wt = w(t);
    if ((wt - wt.adjoint()).cwiseAbs().maxCoeff() > tol)
        throw std::invalid_argument("QuadraticGenerator: w(t) is not Hermitian");
}

namespace {

// Multiplies J * M without forming J: rows of the q half take +p rows, p half takes -q rows.
void apply_J(const Mat& M, Mat& out)
{
    const Eigen::Index n = M.rows() / 2;
    out.resize(M.rows(), M.cols());
    out.topRows(n) = M.bottomRows(n);
    out.bottomRows(n) = -M.topRows(n);
}

}  // namespace

SymplecticPropagator evolve_propagator(const QuadraticGenerator& gen, double t0, double t1,
                                       const PropagatorOptions& opt)
{
    return evolve_propagator(gen, t0, std::vector<double>{t1}, opt).back();
}

std::vector<SymplecticPropagator> evolve_propagator(const QuadraticGenerator& gen, double t0,
                                                    const std::vector<double>& times,
                                                    const PropagatorOptions& opt)
{
    if (opt.rel_tol < 1e-13 || opt.rel_tol > 1e-4)
        throw std::invalid_argument("evolve_propagator: rel_tol outside [1e-13, 1e-4]");
    const int d = gen.layout.dim();
    Mat fs(d, d), tmp(d, d);
    Eigen::SparseMatrix<double> sp(d, d);

    auto rhs = [&](double t, const Mat& S, Mat& dS) {
        gen.fill_fsym(t, fs);
        if (opt.sparse) {
            apply_J(fs, tmp);
            sp = tmp.sparseView(0.0, 0.0);
            dS.noalias() = sp * S;
        } else {
            tmp.noalias() = fs * S;
            apply_J(tmp, dS);
        }
    };

    OdeOptions oo;
    oo.rtol = opt.rel_tol;
    oo.atol = opt.abs_tol;
    oo.h_max = opt.h_max;

    std::vector<SymplecticPropagator> out;
    out.reserve(times.size());
    Mat S = Mat::Identity(d, d);
    double t = t0;
    for (double tk : times) {
        if (tk < t) throw std::invalid_argument("evolve_propagator: sample times must increase");
        OdeStats st;
        S = dopri5(rhs, t, tk, S, oo, &st);
        if (st.last_h > 0) oo.h_init = st.last_h;
        t = tk;
        out.push_back({gen.layout, S, t0, tk});
    }
    return out;
}

SymplecticPropagator compose(const SymplecticPropagator& later, const SymplecticPropagator& earlier)
{
    if (!(later.layout == earlier.layout))
        throw std::invalid_argument("compose: layout mismatch");
    return {later.layout, later.S * earlier.S, earlier.t0, later.t1};
}

double symplectic_defect(const Mat& S)
{
    Mat J = symplectic_form(static_cast<int>(S.rows()) / 2);
    return (S * J * S.transpose() - J).cwiseAbs().maxCoeff();
}

CovarianceState evolve_covariance(const CovarianceState& state, const Mat& S)
{
    if (S.rows() != state.layout().dim())
        throw std::invalid_argument("evolve_covariance: layout mismatch");
    return CovarianceState(state.layout(), S * state.sigma() * S.transpose(), false);
}

CovarianceState evolve_covariance(const CovarianceState& state, const SymplecticPropagator& prop)
{
    if (!(prop.layout == state.layout()))
        throw std::invalid_argument("evolve_covariance: layout mismatch");
    return evolve_covariance(state, prop.S);
}

CovarianceState vacuum_state(const PhaseSpaceLayout& layout)
{
    return CovarianceState(layout, Mat::Identity(layout.dim(), layout.dim()), false);
}

CovarianceState thermal_state(const PhaseSpaceLayout& layout, const std::vector<double>& nbar)
{
    if (static_cast<int>(nbar.size()) != layout.n())
        throw std::invalid_argument("thermal_state: one occupation per mode required");
    Mat s = Mat::Zero(layout.dim(), layout.dim());
    for (int k = 0; k < layout.n(); ++k) {
        if (!(nbar[k] >= 0)) throw std::invalid_argument("thermal_state: negative occupation");
        s(layout.q(k), layout.q(k)) = s(layout.p(k), layout.p(k)) = 2 * nbar[k] + 1;
    }
    return CovarianceState(layout, s, false);
}

CovarianceState thermal_state(const PhaseSpaceLayout& layout, double nbar)
{
    return thermal_state(layout, std::vector<double>(layout.n(), nbar));
}

CovarianceState two_mode_squeezed_state(double r)
{
    const double c = std::cosh(2 * r), s = std::sinh(2 * r);
    Mat m = Mat::Identity(4, 4) * c;
    m(0, 1) = m(1, 0) = s;   // q1 q2
    m(2, 3) = m(3, 2) = -s;  // p1 p2
    return CovarianceState(PhaseSpaceLayout::modes(2), m, false);
}

CovarianceState direct_sum(const CovarianceState& a, const CovarianceState& b,
                           const PhaseSpaceLayout& joint)
{
    const int na = a.n(), nb = b.n(), n = na + nb;
    if (joint.n() != n) throw std::invalid_argument("direct_sum: joint layout mismatch");
    Mat s = Mat::Zero(2 * n, 2 * n);
    auto place = [&](const Mat& m, int nm, int off) {
        for (int i = 0; i < 2 * nm; ++i)
            for (int j = 0; j < 2 * nm; ++j) {
                int ii = (i < nm ? off + i : n + off + i - nm);
                int jj = (j < nm ? off + j : n + off + j - nm);
                s(ii, jj) = m(i, j);
            }
    };
    place(a.sigma(), na, 0);
    place(b.sigma(), nb, na);
    return CovarianceState(joint, s, false);
}

CovarianceState partial_state(const CovarianceState& state, const std::vector<int>& modes)
{
    if (modes.empty()) throw std::invalid_argument("partial_state: empty mode subset");
    const PhaseSpaceLayout& L = state.layout();
    const int k = static_cast<int>(modes.size());
    std::vector<int> idx(2 * k);
    int ndet = 0;
    bool leading = true;
    for (int i = 0; i < k; ++i) {
        if (modes[i] < 0 || modes[i] >= L.n())
            throw std::invalid_argument("partial_state: mode index out of range");
        idx[i] = L.q(modes[i]);
        idx[k + i] = L.p(modes[i]);
        if (modes[i] < L.detectors() && leading)
            ++ndet;
        else
            leading = false;
    }
    for (int i = ndet; i < k; ++i)
        if (modes[i] < L.detectors()) ndet = 0;  // detectors interleaved: flatten
    Mat s(2 * k, 2 * k);
    for (int i = 0; i < 2 * k; ++i)
        for (int j = 0; j < 2 * k; ++j) s(i, j) = state.sigma()(idx[i], idx[j]);
    return CovarianceState(PhaseSpaceLayout(ndet, k - ndet), s, false);
}

std::vector<double> symplectic_eigenvalues(const Mat& sigma)
{
    const int n = static_cast<int>(sigma.rows()) / 2;
    Eigen::LLT<Mat> llt(sigma);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("symplectic_eigenvalues: covariance not positive definite");
    Mat Lm = llt.matrixL();
    // i L^T J L is Hermitian with spectrum {±nu_k}.
    Mat K = Lm.transpose() * symplectic_form(n) * Lm;
    CMat H = cplx(0, 1) * K.cast<cplx>();
    Eigen::SelfAdjointEigenSolver<CMat> es(H, Eigen::EigenvaluesOnly);
    std::vector<double> nu(n);
    for (int i = 0; i < n; ++i) nu[i] = es.eigenvalues()(n + i);
    std::sort(nu.begin(), nu.end());
    return nu;
}

std::vector<double> symplectic_eigenvalues(const CovarianceState& state)
{
    return symplectic_eigenvalues(state.sigma());
}

double purity(const Mat& sigma)
{
    Eigen::LLT<Mat> llt(sigma);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("purity: covariance not positive definite");
    // 1/sqrt(det) via the Cholesky diagonal, avoiding overflow for large states.
    double logdet = 0;
    for (Eigen::Index i = 0; i < sigma.rows(); ++i) logdet += 2 * std::log(llt.matrixL()(i, i));
    return std::exp(-0.5 * logdet);
}

double purity(const CovarianceState& state) { return purity(state.sigma()); }

double mean_excitation(const CovarianceState& state, int mode)
{
    const auto& L = state.layout();
    if (mode < 0 || mode >= L.n()) throw std::invalid_argument("mean_excitation: bad mode");
    return (state.sigma()(L.q(mode), L.q(mode)) + state.sigma()(L.p(mode), L.p(mode)) - 2) / 4;
}

double partial_transpose_log_eigenvalue(const Mat& s)
{
    if (s.rows() != 4 || s.cols() != 4)
        throw std::invalid_argument("log_negativity_two_mode: need exactly two modes");
    if (uncertainty_margin(s) < -1e-9)
        throw std::invalid_argument("log_negativity_two_mode: uncertainty relation violated");
    // Partial transposition of mode 2 flips p2 (index 3).
    Mat t = s;
    t.row(3) *= -1;
    t.col(3) *= -1;
    return -std::log(symplectic_eigenvalues(t).front());
}

double log_negativity_two_mode(const Mat& s)
{
    const double en = partial_transpose_log_eigenvalue(s);
    return en > 1e-13 ? en : 0.0;  // round-off floor for product states
}

double log_negativity_two_mode(const CovarianceState& state)
{
    if (state.n() != 2) throw std::invalid_argument("log_negativity_two_mode: need exactly two modes");
    return log_negativity_two_mode(state.sigma());
}

}  // namespace cqi
