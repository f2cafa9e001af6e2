#include "curvedqi/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <vector>

namespace cqi::quad {

const Rule21& gk21()
{
    static const Rule21 rule = [] {
        using boost::math::quadrature::gauss;
        using boost::math::quadrature::gauss_kronrod;
        const auto& xk = gauss_kronrod<double, 21>::abscissa();  // 11 non-negative nodes, xk[0] = 0
        const auto& wk = gauss_kronrod<double, 21>::weights();
        const auto& xg = gauss<double, 10>::abscissa();  // 5 positive nodes = xk[1], xk[3], ...
        const auto& wg = gauss<double, 10>::weights();
        Rule21 r{};
        r.x[10] = 0.0;
        r.wk[10] = wk[0];
        r.wg[10] = 0.0;
        for (int i = 1; i <= 10; ++i) {
            r.x[10 - i] = -xk[i];
            r.x[10 + i] = xk[i];
            r.wk[10 - i] = r.wk[10 + i] = wk[i];
            double g = 0.0;
            if (i % 2 == 1) {
                const int j = (i - 1) / 2;
                if (std::abs(xg[j] - xk[i]) > 1e-14) throw std::logic_error("gk21: node mismatch");
                g = wg[j];
            }
            r.wg[10 - i] = r.wg[10 + i] = g;
        }
        return r;
    }();
    return rule;
}

BatchResult integrate_batch(const BatchFn& eval, int m, double a, double b, double rel_tol, double abs_tol,
                            int max_depth)
{
    const Rule21& r = gk21();
    BatchResult out;
    out.value = Eigen::ArrayXcd::Zero(m);
    out.error = Eigen::ArrayXd::Zero(m);
    out.l1 = Eigen::ArrayXd::Zero(m);
    if (a == b || m == 0) return out;

    struct Piece {
        double lo, hi;
        int depth;
    };
    std::vector<Piece> stack{{a, b, 0}};
    std::array<double, 21> t;
    Eigen::ArrayXXcd f(m, 21);
    while (!stack.empty()) {
        const Piece p = stack.back();
        stack.pop_back();
        const double c = 0.5 * (p.lo + p.hi), h = 0.5 * (p.hi - p.lo);
        for (int i = 0; i < 21; ++i) t[i] = c + h * r.x[i];
        eval(t, f);
        bool ok = true;
        Eigen::ArrayXcd K(m), G(m);
        Eigen::ArrayXd L(m);
        for (int j = 0; j < m; ++j) {
            std::complex<double> k{0, 0}, g{0, 0};
            double l = 0;
            for (int i = 0; i < 21; ++i) {
                k += r.wk[i] * f(j, i);
                g += r.wg[i] * f(j, i);
                l += r.wk[i] * std::abs(f(j, i));
            }
            K(j) = h * k;
            G(j) = h * g;
            L(j) = std::abs(h) * l;
            const double err = std::abs(K(j) - G(j));
            if (!(err <= std::max(rel_tol * L(j), abs_tol))) ok = false;
        }
        if (ok) {
            out.value += K;
            out.error += (K - G).abs();
            out.l1 += L;
            ++out.intervals;
            continue;
        }
        if (p.depth >= max_depth) throw NonConvergence(p.lo, p.hi);
        // Push the right half first so pieces are summed left to right.
        stack.push_back({c, p.hi, p.depth + 1});
        stack.push_back({p.lo, c, p.depth + 1});
    }
    return out;
}

Result integrate(const ComplexFn& fn, double a, double b, double rel_tol, double abs_tol, int max_depth)
{
    auto eval = [&](const std::array<double, 21>& t, Eigen::ArrayXXcd& f) {
        for (int i = 0; i < 21; ++i) f(0, i) = fn(t[i]);
    };
    const BatchResult br = integrate_batch(eval, 1, a, b, rel_tol, abs_tol, max_depth);
    return {br.value(0), br.error(0), br.l1(0), br.intervals};
}

}  // namespace cqi::quad
