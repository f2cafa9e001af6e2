#pragma once
// Adaptive 21-point Gauss-Kronrod for complex (optionally batched) integrands.

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <functional>
#include <stdexcept>
#include <string>

namespace cqi::quad {

struct Rule21 {
    std::array<double, 21> x;   // nodes on [-1, 1]
    std::array<double, 21> wk;  // Kronrod weights
    std::array<double, 21> wg;  // embedded 10-point Gauss weights (0 off the Gauss nodes)
};

const Rule21& gk21();

struct Result {
    std::complex<double> value{0, 0};
    double error = 0;
    double l1 = 0;  // integral of |f|, the scale the relative tolerance refers to
    int intervals = 0;
};

class NonConvergence : public std::runtime_error {
public:
    NonConvergence(double a, double b)
        : std::runtime_error("quadrature did not converge on [" + std::to_string(a) + ", " + std::to_string(b) + "]"),
          lo(a), hi(b) {}
    double lo, hi;
};

using ComplexFn = std::function<std::complex<double>(double)>;

// Bisects until |K21 - G10| <= max(rel_tol * integral|f|, abs_tol) on every piece.
Result integrate(const ComplexFn& f, double a, double b, double rel_tol = 1e-10, double abs_tol = 0.0,
                 int max_depth = 40);

// Batched form: eval(t[21], out) fills out(m, 21) with m integrands at the 21 nodes.
// Every integrand must meet its own tolerance before a piece is accepted, so the
// subdivision is shared and the result depends only on the batch composition.
using BatchFn = std::function<void(const std::array<double, 21>&, Eigen::ArrayXXcd&)>;

struct BatchResult {
    Eigen::ArrayXcd value;
    Eigen::ArrayXd error;
    Eigen::ArrayXd l1;
    int intervals = 0;
};

BatchResult integrate_batch(const BatchFn& eval, int m, double a, double b, double rel_tol,
                            double abs_tol = 0.0, int max_depth = 40);

}  // namespace cqi::quad
