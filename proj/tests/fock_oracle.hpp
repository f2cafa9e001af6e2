#pragma once
// Brute-force number-basis reference for small Gaussian problems.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>
#include <complex>
#include <vector>

namespace fock {

using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using cplx = std::complex<double>;

inline CMat annihilation(int N)
{
    CMat a = CMat::Zero(N, N);
    for (int n = 1; n < N; ++n) a(n - 1, n) = std::sqrt(double(n));
    return a;
}

inline CMat kron(const CMat& A, const CMat& B)
{
    CMat K(A.rows() * B.rows(), A.cols() * B.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j)
            K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    return K;
}

// Quadrature operators (q1..qn, p1..pn) for n modes, each truncated at N levels.
inline std::vector<CMat> quadratures(int n, int N)
{
    CMat a = annihilation(N), id = CMat::Identity(N, N);
    std::vector<CMat> x(2 * n);
    for (int k = 0; k < n; ++k) {
        CMat ak = CMat::Identity(1, 1);
        for (int j = 0; j < n; ++j) ak = kron(ak, j == k ? a : id);
        x[k] = (ak + ak.adjoint()) / std::sqrt(2.0);
        x[n + k] = cplx(0, -1) * (ak - ak.adjoint()) / std::sqrt(2.0);
    }
    return x;
}

inline Eigen::MatrixXd covariance(const CMat& rho, const std::vector<CMat>& x)
{
    const int d = static_cast<int>(x.size());
    Eigen::MatrixXd s(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) s(i, j) = (rho * (x[i] * x[j] + x[j] * x[i])).trace().real();
    return s;
}

// Pure-state shortcut: <psi|x_i x_j + x_j x_i|psi> = 2 Re <x_i psi|x_j psi>.
inline Eigen::MatrixXd covariance_pure(const CVec& psi, const std::vector<CMat>& x)
{
    const int d = static_cast<int>(x.size());
    std::vector<CVec> y(d);
    for (int i = 0; i < d; ++i) y[i] = x[i] * psi;
    Eigen::MatrixXd s(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) s(i, j) = 2 * y[i].dot(y[j]).real();
    return s;
}

// exp(-i H t) psi through the eigenbasis of the (Hermitian) truncated Hamiltonian.
inline CVec evolve(const CMat& H, const CVec& psi, double t)
{
    Eigen::SelfAdjointEigenSolver<CMat> es(H);
    CVec c = es.eigenvectors().adjoint() * psi;
    for (int k = 0; k < c.size(); ++k) c(k) *= std::polar(1.0, -es.eigenvalues()(k) * t);
    return es.eigenvectors() * c;
}

inline CMat hamiltonian(const CMat& F, const std::vector<CMat>& x)
{
    CMat H = CMat::Zero(x[0].rows(), x[0].cols());
    for (size_t i = 0; i < x.size(); ++i)
        for (size_t j = 0; j < x.size(); ++j)
            if (F(i, j) != cplx(0)) H += F(i, j) * x[i] * x[j];
    return H;
}

// Two-mode squeezed vacuum sum_n tanh^n r / cosh r |n,n>.
inline CVec tms(double r, int N)
{
    CVec psi = CVec::Zero(N * N);
    for (int n = 0; n < N; ++n) psi(n * N + n) = std::pow(std::tanh(r), n) / std::cosh(r);
    return psi;
}

inline CMat partial_trace_second(const CMat& rho, int N)
{
    CMat r = CMat::Zero(N, N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            for (int k = 0; k < N; ++k) r(i, j) += rho(i * N + k, j * N + k);
    return r;
}

inline double log_negativity(const CMat& rho, int N)
{
    CMat pt(N * N, N * N);
    for (int i = 0; i < N; ++i)
        for (int k = 0; k < N; ++k)
            for (int j = 0; j < N; ++j)
                for (int l = 0; l < N; ++l) pt(i * N + k, j * N + l) = rho(i * N + l, j * N + k);
    Eigen::SelfAdjointEigenSolver<CMat> es(pt, Eigen::EigenvaluesOnly);
    return std::log(es.eigenvalues().cwiseAbs().sum());
}

}  // namespace fock
