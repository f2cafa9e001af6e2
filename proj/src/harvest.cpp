#include "curvedqi/harvest.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "curvedqi/parallel.hpp"
#include "curvedqi/quadrature.hpp"

namespace cqi {

namespace {

using cplx = std::complex<double>;
constexpr cplx I1{0.0, 1.0};
const double kPi2 = M_PI * M_PI;

}  // namespace

const char* to_string(HarvestCase c)
{
    switch (c) {
    case HarvestCase::ComovingDeSitter: return "desitter";
    case HarvestCase::ThermalMinkowski: return "thermal";
    case HarvestCase::MinkowskiVacuum: return "minkowski";
    case HarvestCase::ParallelAccel: return "parallel";
    case HarvestCase::AntiParallelAccel: return "antiparallel";
    }
    return "?";
}

HarvestCase harvest_case_from_string(const std::string& s)
{
    for (auto c : {HarvestCase::ComovingDeSitter, HarvestCase::ThermalMinkowski, HarvestCase::MinkowskiVacuum,
                   HarvestCase::ParallelAccel, HarvestCase::AntiParallelAccel})
        if (s == to_string(c)) return c;
    throw std::invalid_argument("unknown harvesting case '" + s + "'");
}

void HarvestConfiguration::validate() const
{
    std::string bad;
    if (!(kappa > 0)) bad += " kappa";
    if (!(L > 0)) bad += " L";
    if (!(Omega > 0)) bad += " Omega";
    if (!(sigma > 0)) bad += " sigma";
    if (!std::isfinite(lambda)) bad += " lambda";
    if (!(rel_tol > 0 && rel_tol < 1)) bad += " rel_tol";
    if (!bad.empty()) throw std::invalid_argument("harvest config: invalid" + bad);
}

bool HarvestConfiguration::numeric() const
{
    return kind == HarvestCase::MinkowskiVacuum || kind == HarvestCase::ParallelAccel ||
           kind == HarvestCase::AntiParallelAccel;
}

cplx wightman_minkowski(const Event& x, const Event& xp, double eps)
{
    if (!(eps > 0)) throw std::invalid_argument("wightman_minkowski: eps must be positive");
    const cplx dt = x.t - xp.t - I1 * eps;
    double r2 = 0;
    for (int i = 0; i < 3; ++i) r2 += (x.x[i] - xp.x[i]) * (x.x[i] - xp.x[i]);
    return -1.0 / (4 * kPi2 * (dt * dt - r2));
}

std::pair<Event, Event> trajectory(HarvestCase c, double kappa, double L, double tau)
{
    Event a, b;
    switch (c) {
    case HarvestCase::MinkowskiVacuum:
        a.t = b.t = tau;
        a.x[0] = L / 2;
        b.x[0] = -L / 2;
        break;
    case HarvestCase::ParallelAccel:
    case HarvestCase::AntiParallelAccel: {
        if (!(kappa > 0)) throw std::invalid_argument("trajectory: kappa must be positive");
        const double t = std::sinh(kappa * tau) / kappa;
        // cosh - 1 = 2 sinh^2(x/2) keeps small-tau accuracy.
        const double sh = std::sinh(kappa * tau / 2);
        const double rise = 2 * sh * sh / kappa;
        a.t = b.t = t;
        a.x[0] = rise + L / 2;
        b.x[0] = (c == HarvestCase::ParallelAccel ? rise : -rise) - L / 2;
        break;
    }
    default:
        throw std::invalid_argument(std::string("trajectory: no worldlines for case ") + to_string(c));
    }
    return {a, b};
}

namespace {

// ---------------------------------------------------------------------------
// A: single detector, relative time u. A = lambda^2 sqrt(pi) sigma int du g(u) W(u - i0),
// g = exp(-u^2/4 sigma^2 - i Omega u). The u-line is moved down to Im u = -c
// (c = 2 sigma^2 Omega removes the oscillation); the double poles of the accelerated
// W at u = -2 pi i n / kappa crossed on the way contribute -2 pi i Res.

double wightman_rate_A(const HarvestConfiguration& cfg, double& err)
{
    const double s = cfg.sigma, Om = cfg.Omega;
    const bool accel = cfg.kind != HarvestCase::MinkowskiVacuum;
    const double k = cfg.kappa;
    const double period = accel ? 2 * M_PI / k : INFINITY;

    double c = 2 * s * s * Om;
    if (accel) {
        // Keep the line a safe distance from the pole lattice.
        const double n = std::round(c / period);
        if (n >= 1 && std::abs(c - n * period) < 0.2 * period) c = (n + (c > n * period ? 0.2 : -0.2)) * period;
    }
    auto g = [&](cplx u) { return std::exp(-u * u / (4 * s * s) - I1 * Om * u); };
    auto W = [&](cplx u) -> cplx {
        if (!accel) return -1.0 / (4 * kPi2 * u * u);
        const cplx sh = std::sinh(k * u / 2.0);
        return -k * k / (16 * kPi2 * sh * sh);
    };
    auto f = [&](double v) {
        const cplx u(v, -c);
        return g(u) * W(u);
    };
    // The integrand is a Gaussian of width 2 sigma in v times a bounded factor.
    const double V = 16 * s;
    const auto r = quad::integrate(f, -V, V, cfg.rel_tol * 1e-2, 0.0, 50);
    cplx total = r.value;
    err = r.error;
    if (accel) {
        for (int n = 1; n * period < c; ++n) {
            const cplx un(0.0, -n * period);
            const cplx dg = g(un) * (-un / (2 * s * s) - I1 * Om);
            total += -2.0 * M_PI * I1 * (-dg / (4 * kPi2));
        }
    }
    return std::sqrt(M_PI) * s * total.real();
}

// ---------------------------------------------------------------------------
// X in centre/relative times tau = s + u/2 (detector a), tau' = s - u/2 (detector b):
// X = -lambda^2 int du e^{-u^2/4 sigma^2} int ds w(s) D_F(s, u), w = e^{-s^2/sigma^2 + 2 i Omega s},
// D_F = 1 / (4 pi^2 (-Delta s^2 + i0)).

struct Geometry {
    HarvestCase kind;
    double k, L, s, Om;

    // Delta s^2 and its s-derivative.
    void ds2(cplx S, double u, cplx& d2, cplx& dd) const
    {
        if (kind == HarvestCase::ParallelAccel) {
            const double sh = std::sinh(k * u / 2);
            d2 = 4 / (k * k) * sh * sh - 4 * L / k * std::sinh(k * S) * sh - L * L;
            dd = -4 * L * std::cosh(k * S) * sh;
        } else {
            // Delta t = 2 cosh(kS) sinh(ku/2) / k, Delta x = L + 4 (sinh^2(kS/2) cosh(ku/2) + sinh^2(ku/4)) / k:
            // free of the O(1/k^2) cancellations of the expanded form.
            const double sh = std::sinh(k * u / 2), ch = std::cosh(k * u / 2), q4 = std::sinh(k * u / 4);
            const cplx hs = std::sinh(k * S / 2.0);
            const cplx dt = 2.0 * std::cosh(k * S) * sh / k;
            const cplx dx = L + 4.0 * (hs * hs * ch + q4 * q4) / k;
            d2 = dt * dt - dx * dx;
            dd = 4.0 * std::sinh(k * S) * (dt * sh - dx * ch);
        }
    }

    cplx w(cplx S) const { return std::exp(-S * S / (s * s) + 2.0 * I1 * Om * S); }

    struct Pole {
        cplx p;
        bool real;
    };

    // Poles of 1/Delta s^2 in the strip 0 <= Im s <= hmax.
    std::vector<Pole> poles(double u, double hmax) const
    {
        std::vector<cplx> base;
        std::vector<bool> real;
        if (kind == HarvestCase::ParallelAccel) {
            const double sh = std::sinh(k * u / 2);
            if (sh == 0) return {};
            const double R = (4 / (k * k) * sh * sh - L * L) / (4 * L / k * sh);
            const double a = std::asinh(R) / k;
            base = {cplx(a, 0), cplx(-a, M_PI / k)};
            real = {true, false};
        } else {
            // Z = (1 - kL/2) e^{+-ku/2} sits near 1 for small k; work with Z - 1 directly.
            const double half = k * L / 2;
            for (int sg : {+1, -1}) {
                const double x = sg * k * u / 2;
                const double Z = (1 - half) * std::exp(x), dZ = std::expm1(x) - half * std::exp(x);
                if (dZ > 0) {
                    const double a = std::log1p(dZ + std::sqrt(dZ * (dZ + 2))) / k;
                    base.insert(base.end(), {cplx(a, 0), cplx(-a, 0)});
                    real.insert(real.end(), {true, true});
                } else if (Z >= -1) {
                    const double b = 2 * std::asin(std::min(1.0, std::sqrt(-dZ / 2))) / k;
                    base.insert(base.end(), {cplx(0, b), cplx(0, 2 * M_PI / k - b)});
                    real.insert(real.end(), {false, false});
                } else {
                    const double a = std::acosh(-Z) / k;
                    base.insert(base.end(), {cplx(a, M_PI / k), cplx(-a, M_PI / k)});
                    real.insert(real.end(), {false, false});
                }
            }
        }
        std::vector<Pole> out;
        for (size_t i = 0; i < base.size(); ++i)
            for (int n = 0;; ++n) {
                const cplx p = base[i] + cplx(0, 2 * M_PI * n / k);
                if (p.imag() > hmax + 1e-14) break;
                out.push_back({p, real[i] && n == 0});
            }
        return out;
    }
};

constexpr int kLine = 601;  // trapezoid nodes on the shifted s-line, [-9 sigma, 9 sigma]

// Inner s-integral at fixed real u. With skip_real_parallel the Feynman-side real
// pole of the parallel case is left out (it is integrated over u separately).
cplx inner_integral(const Geometry& G, double u, bool skip_real_parallel)
{
    const double s = G.s, y = s * s * G.Om;
    const auto ps = G.poles(u, y + 2 * s);
    double h = y, best = -1;
    for (double cand : {y, y - 0.5 * s, y + 0.5 * s, y - s, y + s}) {
        double d = INFINITY;
        for (const auto& p : ps) d = std::min(d, std::abs(p.p.imag() - cand) + std::max(0.0, std::abs(p.p.real()) - 6 * s));
        if (d > best) {
            best = d;
            h = cand;
        }
    }
    const double a = -9 * s, step = 18 * s / (kLine - 1);
    cplx J{0, 0};
    for (int i = 0; i < kLine; ++i) {
        const cplx S(a + i * step, h);
        cplx d2, dd;
        G.ds2(S, u, d2, dd);
        const cplx term = G.w(S) / (4 * kPi2 * (-d2));
        J += (i == 0 || i == kLine - 1) ? 0.5 * term : term;
    }
    J *= step;
    cplx res{0, 0};
    for (const auto& p : ps) {
        cplx d2, dd;
        G.ds2(p.p, u, d2, dd);
        bool inside;
        if (p.real) {
            inside = dd.real() > 0;  // pole sits at +i0 / dd
            if (inside && skip_real_parallel && G.kind == HarvestCase::ParallelAccel) continue;
        } else {
            inside = p.p.imag() > 0 && p.p.imag() < h;
        }
        if (inside) res += 2.0 * M_PI * I1 * G.w(p.p) / (4 * kPi2 * (-dd));
    }
    return J + res;
}

// Parallel case, u < 0: residue of the real Feynman pole as an analytic function of u.
cplx parallel_residue(const Geometry& G, cplx u)
{
    const double k = G.k, L = G.L, s = G.s;
    const cplx sh = std::sinh(k * u / 2.0);
    const cplx R = (4 / (k * k) * sh * sh - L * L) / (4 * L / k * sh);
    const cplx s0 = std::asinh(R) / k;
    const cplx d = -4 * L * sh * std::cosh(k * s0);
    return std::exp(-u * u / (4 * s * s)) * 2.0 * M_PI * I1 * G.w(s0) / (4 * kPi2 * (-d));
}

// Parallel residue term, int_{-U}^{0-} du. On the real axis it oscillates with
// cancellations up to ~e^{sigma^2 Omega^2}, so it is integrated along straight segments
// -U -> u* -> 0- through a saddle u* of the integrand. Candidate paths (saddles from a
// narrow and a wide search box, and the real axis itself) are all integrated and the
// one with the smallest integral of |f| -- the best-conditioned -- is kept.
cplx parallel_residue_integral(const Geometry& G, double U, double rel_tol, double& err)
{
    const double s = G.s;
    auto dlog = [&](cplx u) {
        const double e = 1e-6 * s;
        return (parallel_residue(G, u + e) - parallel_residue(G, u - e)) / (2 * e * parallel_residue(G, u));
    };
    auto search = [&](double xmin, double ymax, int nx, int ny) {
        cplx best_u(-s, 0);
        double best = INFINITY;
        for (int i = 0; i < nx; ++i)
            for (int j = 0; j < ny; ++j) {
                const cplx u(xmin + (-0.02 * s - xmin) * i / (nx - 1.0), -ymax + 2 * ymax * j / (ny - 1.0));
                const double v = std::abs(dlog(u));
                if (std::isfinite(v) && v < best) {
                    best = v;
                    best_u = u;
                }
            }
        for (int it = 0; it < 30; ++it) {
            const double e = 1e-4 * s;
            const cplx g0 = dlog(best_u);
            const cplx dg = (dlog(best_u + e) - dlog(best_u - e)) / (2 * e);
            const cplx next = best_u - g0 / dg;
            if (!(std::isfinite(next.real()) && std::isfinite(next.imag())) || next.real() >= 0) break;
            const double v = std::abs(dlog(next));
            if (!(v < std::abs(g0))) break;
            best_u = next;
            if (v < 1e-10 / s) break;
        }
        // Only a genuine stationary point gives a well-conditioned path; if the residue
        // underflowed over the search box there is none.
        return std::abs(dlog(best_u)) < 1e-6 / s ? std::optional<cplx>(best_u) : std::nullopt;
    };
    // sinh(kappa u / 2) vanishes again at Im u = 2 pi / kappa.
    const double ywide = std::min(10 * s, 0.9 * 2 * M_PI / G.k);
    std::vector<std::vector<cplx>> paths;
    for (const auto& saddle : {search(-8 * s, 3 * s, 40, 31), search(-10 * s, ywide, 60, 61)})
        if (saddle) paths.push_back({cplx(-U, 0), *saddle, cplx(-1e-12 * s, 0)});
    // Real axis, split where the pole crosses s = 0 (a spike of width ~ kappa sigma L for small kappa).
    const double uL = 2 / G.k * std::asinh(G.k * G.L / 2);
    const double wL = 8 * s * G.k * G.L;  // |s0| < 8 sigma within uL +- wL
    if (uL < U && wL < uL / 4)
        paths.push_back({cplx(-U, 0), cplx(-uL - wL, 0), cplx(-uL, 0), cplx(-uL + wL, 0), cplx(-1e-12 * s, 0)});
    else if (uL < U)
        paths.push_back({cplx(-U, 0), cplx(-uL, 0), cplx(-1e-12 * s, 0)});
    else
        paths.push_back({cplx(-U, 0), cplx(-1e-12 * s, 0)});

    // The residue is built on asinh(R(u)); a path crossing its cut (Re R = 0, |Im R| > 1)
    // integrates a different branch and is discarded.
    auto R_of = [&](cplx u) {
        const cplx sh = std::sinh(G.k * u / 2.0);
        return (4 / (G.k * G.k) * sh * sh - G.L * G.L) / (4 * G.L / G.k * sh);
    };
    auto crosses_cut = [&](const std::vector<cplx>& pts) {
        for (size_t seg = 0; seg + 1 < pts.size(); ++seg) {
            cplx prev = R_of(pts[seg]);
            for (int i = 1; i <= 4000; ++i) {
                const cplx r = R_of(pts[seg] + (pts[seg + 1] - pts[seg]) * (i / 4000.0));
                if (std::signbit(r.real()) != std::signbit(prev.real()) && std::abs(r.imag() + prev.imag()) > 2)
                    return true;
                prev = r;
            }
        }
        return false;
    };

    cplx best_val{0, 0};
    double best_l1 = INFINITY;
    err = INFINITY;
    for (const auto& pts : paths) {
        if (pts.size() > 2 && pts[1].imag() != 0 && crosses_cut(pts)) continue;
        cplx total{0, 0};
        double e = 0, l1 = 0;
        try {
            for (size_t seg = 0; seg + 1 < pts.size(); ++seg) {
                const cplx z0 = pts[seg], dz = pts[seg + 1] - pts[seg];
                auto f = [&](double x) { return parallel_residue(G, z0 + x * dz) * dz; };
                const auto r = quad::integrate(f, 0.0, 1.0, rel_tol, 0.0, 50);
                total += r.value;
                e += r.error;
                l1 += r.l1;
            }
        } catch (const quad::NonConvergence&) {
            continue;
        }
        if (std::isfinite(l1) && l1 < best_l1) {
            best_l1 = l1;
            best_val = total;
            err = e;
        }
    }
    if (!std::isfinite(best_l1)) throw std::runtime_error("parallel residue: no convergent integration path");
    return best_val;
}

// int_a^b f(u) du with optional inverse-square-root endpoint singularities removed by
// u = a + (b - a) x^2 (and mirrored at b).
quad::Result integrate_segment(const std::function<cplx(double)>& f, double a, double b, bool sing_a, bool sing_b,
                               double rel_tol)
{
    if (sing_a && sing_b) {
        const double m = 0.5 * (a + b);
        auto r1 = integrate_segment(f, a, m, true, false, rel_tol);
        auto r2 = integrate_segment(f, m, b, false, true, rel_tol);
        return {r1.value + r2.value, r1.error + r2.error, r1.l1 + r2.l1, r1.intervals + r2.intervals};
    }
    const double w = b - a;
    if (sing_a) return quad::integrate([&](double x) { return f(a + w * x * x) * (2 * w * x); }, 0.0, 1.0, rel_tol, 0.0, 50);
    if (sing_b) return quad::integrate([&](double x) { return f(b - w * x * x) * (2 * w * x); }, 0.0, 1.0, rel_tol, 0.0, 50);
    return quad::integrate(f, a, b, rel_tol, 0.0, 50);
}

cplx accelerated_X(const HarvestConfiguration& cfg, double& err)
{
    const Geometry G{cfg.kind, cfg.kappa, cfg.L, cfg.sigma, cfg.Omega};
    const double s = cfg.sigma, U = 14 * s;
    const bool parallel = cfg.kind == HarvestCase::ParallelAccel;

    struct Break {
        double u;
        bool singular;
    };
    std::vector<Break> br{{-U, false}, {0.0, false}, {U, false}};
    const double half = cfg.kappa * cfg.L / 2;
    if (parallel) {
        // The real pole passes the window centre at |u| = uL; sharp for small kappa.
        const double uL = 2 / cfg.kappa * std::asinh(half);
        if (uL < U) br.insert(br.end(), {{-uL, false}, {uL, false}});
        const double wL = 8 * s * cfg.kappa * cfg.L;
        if (uL + wL < U && wL < uL / 4)
            br.insert(br.end(), {{-uL - wL, false}, {-uL + wL, false}, {uL - wL, false}, {uL + wL, false}});
    } else if (half < 1) {
        const double u0 = -2 / cfg.kappa * std::log1p(-half);
        if (u0 < U) br.insert(br.end(), {{-u0, true}, {u0, true}});
        // Real poles leave the window centre within ~8 sigma kappa L of u0.
        const double w0 = 8 * s * cfg.kappa * cfg.L;
        if (u0 + w0 < U && w0 < u0 / 4)
            br.insert(br.end(), {{-u0 - w0, false}, {-u0 + w0, false}, {u0 - w0, false}, {u0 + w0, false}});
    }
    std::sort(br.begin(), br.end(), [](const Break& x, const Break& y) { return x.u < y.u; });

    auto f = [&](double u) { return std::exp(-u * u / (4 * s * s)) * inner_integral(G, u, parallel); };
    const double tol = cfg.rel_tol;
    cplx total{0, 0};
    err = 0;
    for (size_t i = 0; i + 1 < br.size(); ++i) {
        const auto r = integrate_segment(f, br[i].u, br[i + 1].u, br[i].singular, br[i + 1].singular, tol);
        total += r.value;
        err += r.error;
    }
    if (parallel) {
        double e2 = 0;
        total += parallel_residue_integral(G, U, tol, e2);
        err += e2;
    }
    return -total;
}

// Static pair: the s-integral is exact; the u-line is moved to Im u = -sigma, picking
// up the pole at u = -L - i0.
cplx static_X(const HarvestConfiguration& cfg, double& err)
{
    const double s = cfg.sigma, L = cfg.L, c = s;
    auto f = [&](double v) {
        const cplx u(v, -c);
        return std::exp(-u * u / (4 * s * s)) / (4 * kPi2 * (L * L - u * u));
    };
    const auto r = quad::integrate(f, -16 * s, 16 * s, cfg.rel_tol * 1e-2, 0.0, 50);
    const cplx line = r.value - I1 * std::exp(-L * L / (4 * s * s)) / (4 * M_PI * L);
    const double pref = std::sqrt(M_PI) * s * std::exp(-s * s * cfg.Omega * cfg.Omega);
    err = pref * r.error;
    return -pref * line;
}

void require_numeric(const HarvestConfiguration& cfg)
{
    cfg.validate();
    if (!cfg.numeric())
        throw std::invalid_argument(std::string("no numeric Wightman function for case ") + to_string(cfg.kind));
}

}  // namespace

double compute_A(const HarvestConfiguration& cfg)
{
    require_numeric(cfg);
    double err = 0;
    return std::max(0.0, cfg.lambda * cfg.lambda * wightman_rate_A(cfg, err));
}

cplx compute_X(const HarvestConfiguration& cfg)
{
    require_numeric(cfg);
    double err = 0;
    const cplx X = cfg.kind == HarvestCase::MinkowskiVacuum ? static_X(cfg, err) : accelerated_X(cfg, err);
    return cfg.lambda * cfg.lambda * X;
}

HarvestValue harvest(const HarvestConfiguration& cfg)
{
    require_numeric(cfg);
    HarvestValue v;
    double ea = 0, ex = 0;
    v.A = std::max(0.0, cfg.lambda * cfg.lambda * wightman_rate_A(cfg, ea));
    const cplx X = cfg.kind == HarvestCase::MinkowskiVacuum ? static_X(cfg, ex) : accelerated_X(cfg, ex);
    v.X = cfg.lambda * cfg.lambda * X;
    v.error = cfg.lambda * cfg.lambda * ex;
    // Error estimates are conservative (|K21 - G10|); flag only clear failures.
    if (!(std::isfinite(v.X.real()) && std::isfinite(v.X.imag()) && std::isfinite(v.A))) {
        v.flagged = true;
        v.note = "non-finite result";
    } else if (v.error > 1e3 * cfg.rel_tol * std::max(std::abs(v.X), 1e-300)) {
        v.flagged = true;
        v.note = "quadrature error estimate above tolerance";
    }
    return v;
}

double negativity_estimate(double A, cplx X) { return std::max(0.0, std::abs(X) - A); }

bool region_boundary(HarvestCase c, double Lk, double theta)
{
    if (!(Lk > 0 && theta > 0)) throw std::invalid_argument("region_boundary: point must lie in the positive quadrant");
    switch (c) {
    case HarvestCase::ComovingDeSitter:
    case HarvestCase::ParallelAccel:
        return Lk / 2 < std::sin(theta);
    case HarvestCase::ThermalMinkowski: {
        const double st = std::sin(theta);
        return Lk / 2 * std::tanh(Lk / 2) < st * st;
    }
    case HarvestCase::MinkowskiVacuum:
        return Lk / 2 < theta;
    case HarvestCase::AntiParallelAccel:
        break;
    }
    throw std::invalid_argument("region_boundary: no closed-form condition for the anti-parallel case");
}

double critical_distance(double kappa, double sigma, double Omega)
{
    if (!(kappa > 0 && sigma > 0 && Omega > 0)) throw std::invalid_argument("critical_distance: inputs must be positive");
    const double th = kappa * sigma * sigma * Omega;
    const double h = std::sin(th / 2);
    return 4 / kappa * h * h;  // (2/kappa)(1 - cos theta)
}

RegionGrid RegionGrid::uniform(double Lk_max, int nL, double theta_max, int nT)
{
    if (!(Lk_max > 0 && theta_max > 0 && nL > 0 && nT > 0)) throw std::invalid_argument("RegionGrid: bad bounds");
    RegionGrid g;
    for (int i = 0; i < nL; ++i) g.Lk.push_back(Lk_max * (i + 0.5) / nL);
    for (int j = 0; j < nT; ++j) g.theta.push_back(theta_max * (j + 0.5) / nT);
    return g;
}

std::vector<RegionCell> region_map(HarvestCase c, const RegionGrid& grid, const HarvestConfiguration& defaults,
                                   const RegionMapOptions& opt)
{
    defaults.validate();
    if (grid.Lk.empty() || grid.theta.empty()) throw std::invalid_argument("region_map: empty grid");
    const int nL = int(grid.Lk.size()), nT = int(grid.theta.size());
    std::vector<RegionCell> cells(size_t(nL) * nT);
    const double k = defaults.kappa, s = defaults.sigma;
    parallel_for(nL * nT, opt.workers, [&](int idx) {
        RegionCell& cell = cells[idx];
        cell.theta = grid.theta[idx / nL];
        cell.Lk = grid.Lk[idx % nL];
        if (c != HarvestCase::AntiParallelAccel) cell.closed_form = region_boundary(c, cell.Lk, cell.theta) ? 1 : 0;
        HarvestConfiguration cfg = defaults;
        cfg.kind = c;
        cfg.L = cell.Lk / k;
        cfg.Omega = cell.theta / (k * s * s);
        cell.numeric = cfg.numeric() && (opt.numeric || c == HarvestCase::AntiParallelAccel);
        if (!cell.numeric) {
            cell.entangled = cell.closed_form == 1;
            return;
        }
        try {
            const HarvestValue v = harvest(cfg);
            cell.A = v.A;
            cell.X = v.X;
            cell.negativity = negativity_estimate(v.A, v.X);
            cell.entangled = std::abs(v.X) > v.A;
            cell.flagged = v.flagged;
            cell.error = v.note;
        } catch (const std::exception& e) {
            cell.flagged = true;
            cell.error = e.what();
        }
    });
    return cells;
}

}  // namespace cqi
