#include "curvedqi/echo.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "curvedqi/parallel.hpp"
#include "curvedqi/quadrature.hpp"

namespace cqi {

namespace {

using cplx = std::complex<double>;

constexpr double kA = 1.0 / 6.0, kB = 0.5, kC = 1.5;

double gauss_series(double a, double b, double c, double z)
{
    double term = 1.0, sum = 1.0;
    for (int k = 0; k < 2000; ++k) {
        term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z;
        sum += term;
        if (std::abs(term) <= 1e-17 * std::abs(sum)) return sum;
    }
    throw std::runtime_error("hyp2f1: series did not converge");
}

}  // namespace

CosmologyBackground CosmologyBackground::gr(double pi_phi, double L_torus)
{
    CosmologyBackground bg{Dynamics::GR, pi_phi, 0.0, L_torus};
    bg.validate();
    return bg;
}

CosmologyBackground CosmologyBackground::lqc(double pi_phi, double l, double L_torus)
{
    CosmologyBackground bg{Dynamics::LQC, pi_phi, l, L_torus};
    bg.validate();
    return bg;
}

void CosmologyBackground::validate() const
{
    if (!(pi_phi > 0)) throw std::invalid_argument("background: pi_phi must be positive");
    if (!(L_torus > 0)) throw std::invalid_argument("background: L_torus must be positive");
    if (kind == Dynamics::LQC && !(l > 0)) throw std::invalid_argument("background: LQC needs l > 0");
}

double hyp2f1_echo(double z)
{
    if (z > 0.5) throw std::domain_error("hyp2f1_echo: z must be <= 1/2");
    if (std::abs(z) <= 0.5) return gauss_series(kA, kB, kC, z);
    if (z >= -2.0) {
        // Pfaff: (1-z)^{-b} 2F1(c-a, b; c; z/(z-1)), argument in (1/3, 2/3].
        return std::pow(1.0 - z, -kB) * gauss_series(kC - kA, kB, kC, z / (z - 1.0));
    }
    // 1/z connection; the second series terminates (b - c + 1 = 0).
    static const double c1 = std::tgamma(kC) * std::tgamma(kB - kA) / (std::tgamma(kB) * std::tgamma(kC - kA));
    static const double c2 = std::tgamma(kC) * std::tgamma(kA - kB) / (std::tgamma(kA) * std::tgamma(kC - kB));
    const double w = 1.0 / z;
    return c1 * std::pow(-z, -kA) * gauss_series(kA, kA - kC + 1.0, kA - kB + 1.0, w) + c2 * std::pow(-z, -kB);
}

double scale_factor(const CosmologyBackground& bg, double t)
{
    const double p13 = std::cbrt(bg.pi_phi);
    if (bg.kind == Dynamics::GR) {
        if (!(t > 0)) throw std::domain_error("scale_factor: GR requires t > 0");
        return p13 * std::cbrt(t) / bg.L_torus;
    }
    const double x = t / (bg.l * bg.l * bg.l);
    return bg.l / bg.L_torus * p13 * std::pow(1.0 + x * x, 1.0 / 6.0);
}

double conformal_time(const CosmologyBackground& bg, double t)
{
    const double p13 = std::cbrt(bg.pi_phi);
    if (bg.kind == Dynamics::GR) {
        if (!(t > 0)) throw std::domain_error("conformal_time: GR requires t > 0");
        const double t13 = std::cbrt(t);
        return 1.5 * bg.L_torus * t13 * t13 / p13;
    }
    const double x = t / (bg.l * bg.l * bg.l);
    return bg.L_torus / (bg.l * p13) * t * hyp2f1_echo(-x * x);
}

double conformal_offset(const CosmologyBackground& bg)
{
    if (bg.kind == Dynamics::GR) return 0.0;
    return bg.l * bg.l * bg.L_torus * std::sqrt(M_PI) * std::tgamma(-1.0 / 3.0) /
           (2.0 * std::cbrt(bg.pi_phi) * std::tgamma(1.0 / 6.0));
}

void EchoConfig::validate() const
{
    std::vector<std::string> bad;
    if (!(Omega >= 0)) bad.push_back("Omega");
    if (!std::isfinite(lambda)) bad.push_back("lambda");
    if (!(T0 < Tm && Tm < T_late && T_late < T)) bad.push_back("T0 < Tm < T_late < T");
    if (n_max < 1) bad.push_back("n_max");
    if (!(Ttilde > 0) || T_late - Ttilde < T0) bad.push_back("Ttilde");
    if (DeltaT < 0 || T_late + window_length() > T * (1 + 1e-12)) bad.push_back("DeltaT");
    if (!(rel_tol > 0 && rel_tol < 1)) bad.push_back("rel_tol");
    if (bad.empty()) return;
    std::string msg = "echo config: invalid";
    for (const auto& b : bad) msg += " " + b;
    throw std::invalid_argument(msg);
}

std::vector<std::string> EchoConfig::regime_warnings(const CosmologyBackground& bg) const
{
    std::vector<std::string> w;
    if (bg.kind != Dynamics::LQC) return w;
    const double l3 = bg.l * bg.l * bg.l;
    if (Omega * l3 > 0.1) w.push_back("gap not subplanckian: Omega l^3 = " + std::to_string(Omega * l3));
    if (Ttilde < 10 * l3) w.push_back("resolution not >> l^3: Ttilde / l^3 = " + std::to_string(Ttilde / l3));
    if (Tm < 10 * l3) w.push_back("split time Tm < 10 l^3");
    return w;
}

std::vector<ModeShell> mode_shells(int n_max)
{
    if (n_max < 1) throw std::invalid_argument("mode_shells: n_max must be >= 1");
    const int top = n_max * n_max;
    std::vector<ModeShell> by_norm(top + 1);
    for (int i = -n_max; i <= n_max; ++i)
        for (int j = -n_max; j <= n_max; ++j)
            for (int k = -n_max; k <= n_max; ++k) {
                const int s = i * i + j * j + k * k;
                if (s == 0 || s > top) continue;
                auto& sh = by_norm[s];
                if (sh.multiplicity++ == 0) sh.representative = {i, j, k};
                sh.norm2 = s;
            }
    std::vector<ModeShell> out;
    for (const auto& s : by_norm)
        if (s.multiplicity > 0) out.push_back(s);
    return out;
}

double mode_frequency(const CosmologyBackground& bg, int norm2)
{
    return 2 * M_PI * std::sqrt(double(norm2)) / bg.L_torus;
}

namespace {

// Breakpoints of chi (kinks and the edges of steep ramps) inside (lo, hi).
std::vector<double> switching_breaks(const SwitchingFunction& sw, double lo, double hi)
{
    std::vector<double> b{sw.T0, sw.T};
    const double d = sw.delta;
    switch (sw.kind) {
    case SwitchingKind::constant:
        b.clear();
        break;
    case SwitchingKind::linear_ramp:
        b.insert(b.end(), {sw.T0 + d, sw.T - d, 0.5 * (sw.T0 + sw.T)});
        break;
    case SwitchingKind::tanh_ramp:
        for (double k : {1.0, 4.0, 12.0}) b.insert(b.end(), {sw.T0 + k * d, sw.T - k * d});
        break;
    case SwitchingKind::smooth_compact:
        b.insert(b.end(), {sw.T0 + M_PI * d, sw.T - M_PI * d});
        break;
    }
    std::vector<double> in;
    for (double x : b)
        if (x > lo && x < hi) in.push_back(x);
    std::sort(in.begin(), in.end());
    return in;
}

struct ModeBlock {
    std::vector<double> omega;
    std::vector<double> norm;  // 1/sqrt(2 omega L^3)
};

void integrand(const CosmologyBackground& bg, const SwitchingFunction& sw, double Omega, const ModeBlock& mb,
               double t, Eigen::Ref<Eigen::ArrayXcd> out)
{
    const double chi = sw(t);
    if (chi == 0.0) {
        out.setZero();
        return;
    }
    const double amp = chi / scale_factor(bg, t);
    const double eta = conformal_time(bg, t);
    for (size_t j = 0; j < mb.omega.size(); ++j)
        out(j) = std::polar(amp * mb.norm[j], Omega * t + mb.omega[j] * eta);
}

// Integrals over consecutive panels [breaks[k], breaks[k+1]]; rows are modes.
Eigen::MatrixXcd block_panels(const CosmologyBackground& bg, const SwitchingFunction& sw, double Omega,
                              const ModeBlock& mb, const std::vector<double>& breaks, double rel_tol)
{
    const int m = int(mb.omega.size());
    const double w_max = *std::max_element(mb.omega.begin(), mb.omega.end());
    Eigen::MatrixXcd out(m, breaks.size() - 1);
    auto eval = [&](const std::array<double, 21>& t, Eigen::ArrayXXcd& f) {
        for (int i = 0; i < 21; ++i) integrand(bg, sw, Omega, mb, t[i], f.col(i));
    };
    for (size_t k = 0; k + 1 < breaks.size(); ++k) {
        const double lo = breaks[k], hi = breaks[k + 1];
        std::vector<double> cuts{lo};
        for (double x : switching_breaks(sw, lo, hi)) cuts.push_back(x);
        cuts.push_back(hi);
        Eigen::ArrayXcd sum = Eigen::ArrayXcd::Zero(m);
        for (size_t c = 0; c + 1 < cuts.size(); ++c) {
            // Initial pieces span about one period of the fastest phase.
            double a = cuts[c];
            while (a < cuts[c + 1]) {
                const double rate = Omega + w_max / scale_factor(bg, a);
                double b = std::min(cuts[c + 1], a + 2 * M_PI / rate);
                if (cuts[c + 1] - b < 1e-9 * (cuts[c + 1] - cuts[c])) b = cuts[c + 1];
                sum += quad::integrate_batch(eval, m, a, b, rel_tol).value;
                a = b;
            }
        }
        out.col(k) = sum.matrix();
    }
    return out;
}

constexpr int kBlock = 16;  // fixed block size: subdivision never depends on worker count

struct ShellSet {
    std::vector<ModeShell> shells;
    std::vector<ModeBlock> blocks;
};

ShellSet make_shells(const CosmologyBackground& bg, int n_max)
{
    ShellSet s;
    s.shells = mode_shells(n_max);
    const double L3 = std::pow(bg.L_torus, 3);
    for (size_t i = 0; i < s.shells.size(); ++i) {
        if (i % kBlock == 0) s.blocks.emplace_back();
        const double w = mode_frequency(bg, s.shells[i].norm2);
        s.blocks.back().omega.push_back(w);
        s.blocks.back().norm.push_back(1.0 / std::sqrt(2 * w * L3));
    }
    return s;
}

Eigen::MatrixXcd all_panels(const CosmologyBackground& bg, const SwitchingFunction& sw, double Omega,
                            const ShellSet& ss, const std::vector<double>& breaks, double rel_tol, int workers)
{
    Eigen::MatrixXcd out(ss.shells.size(), breaks.size() - 1);
    std::vector<Eigen::MatrixXcd> parts(ss.blocks.size());
    parallel_for(int(ss.blocks.size()), workers,
                 [&](int b) { parts[b] = block_panels(bg, sw, Omega, ss.blocks[b], breaks, rel_tol); });
    for (size_t b = 0; b < parts.size(); ++b) out.middleRows(b * kBlock, parts[b].rows()) = parts[b];
    return out;
}

void check_mode_sum_backgrounds(const CosmologyBackground& a, const CosmologyBackground& b)
{
    if (a.L_torus != b.L_torus) throw std::invalid_argument("backgrounds must share L_torus");
}

}  // namespace

cplx mode_amplitude_In(const EchoConfig& cfg, const CosmologyBackground& bg, const SwitchingFunction& sw,
                       const std::array<int, 3>& n)
{
    bg.validate();
    const int s = n[0] * n[0] + n[1] * n[1] + n[2] * n[2];
    if (s == 0) throw std::invalid_argument("mode_amplitude_In: zero mode excluded");
    if (!(cfg.T0 < cfg.T)) throw std::invalid_argument("mode_amplitude_In: T0 < T required");
    ModeBlock mb;
    mb.omega.push_back(mode_frequency(bg, s));
    mb.norm.push_back(1.0 / std::sqrt(2 * mb.omega[0] * std::pow(bg.L_torus, 3)));
    const cplx I = block_panels(bg, sw, cfg.Omega, mb, {cfg.T0, cfg.T}, cfg.rel_tol)(0, 0);
    const double dot = n[0] * cfg.x0[0] + n[1] * cfg.x0[1] + n[2] * cfg.x0[2];
    return std::polar(1.0, -2 * M_PI * dot / bg.L_torus) * I;
}

ProbabilityResult excitation_probability(const EchoConfig& cfg, const CosmologyBackground& bg,
                                         const SwitchingFunction& sw)
{
    bg.validate();
    if (cfg.n_max < 1) throw std::invalid_argument("excitation_probability: n_max must be >= 1");
    if (!(cfg.T0 < cfg.T)) throw std::invalid_argument("excitation_probability: T0 < T required");
    const ShellSet ss = make_shells(bg, cfg.n_max);
    const Eigen::MatrixXcd I = all_panels(bg, sw, cfg.Omega, ss, {cfg.T0, cfg.T}, cfg.rel_tol, cfg.workers);
    const int edge = (cfg.n_max - 1) * (cfg.n_max - 1);
    double total = 0, tail = 0;
    for (size_t i = 0; i < ss.shells.size(); ++i) {
        const double c = ss.shells[i].multiplicity * std::norm(I(i, 0));
        total += c;
        if (ss.shells[i].norm2 > edge) tail += c;
    }
    ProbabilityResult r;
    r.value = cfg.lambda * cfg.lambda * total;
    r.tail_ratio = total > 0 ? tail / total : 0.0;
    r.flagged = r.tail_ratio > 0.05;
    r.shells = int(ss.shells.size());
    return r;
}

double delta_probability(const EchoConfig& cfg, const CosmologyBackground& first,
                         const CosmologyBackground& second, const SwitchingFunction& sw)
{
    check_mode_sum_backgrounds(first, second);
    return excitation_probability(cfg, first, sw).value - excitation_probability(cfg, second, sw).value;
}

double delta_probability_split(const EchoConfig& cfg, const CosmologyBackground& lqc,
                               const CosmologyBackground& gr, const SwitchingFunction& sw)
{
    check_mode_sum_backgrounds(lqc, gr);
    if (lqc.kind != Dynamics::LQC || gr.kind != Dynamics::GR)
        throw std::invalid_argument("delta_probability_split: expects (LQC, GR)");
    if (!(cfg.T0 < cfg.Tm && cfg.Tm < cfg.T)) throw std::invalid_argument("delta_probability_split: T0 < Tm < T");
    const ShellSet ss = make_shells(gr, cfg.n_max);
    const std::vector<double> br{cfg.T0, cfg.Tm, cfg.T};
    const Eigen::MatrixXcd Il = all_panels(lqc, sw, cfg.Omega, ss, {cfg.T0, cfg.Tm}, cfg.rel_tol, cfg.workers);
    const Eigen::MatrixXcd Ig = all_panels(gr, sw, cfg.Omega, ss, br, cfg.rel_tol, cfg.workers);
    const double beta = conformal_offset(lqc);
    double d = 0;
    for (size_t i = 0; i < ss.shells.size(); ++i) {
        const double w = mode_frequency(gr, ss.shells[i].norm2);
        const cplx late = Ig(i, 1);
        d += ss.shells[i].multiplicity *
             (std::norm(Il(i, 0) + std::polar(1.0, w * beta) * late) - std::norm(Ig(i, 0) + late));
    }
    return cfg.lambda * cfg.lambda * d;
}

namespace {

// Running P(T') and dP/dT' on the grid for one background.
void probability_on_grid(const EchoConfig& cfg, const CosmologyBackground& bg, const SwitchingFunction& sw,
                         const ShellSet& ss, const std::vector<double>& breaks, std::vector<double>& P,
                         std::vector<double>& dP, double& tail_ratio)
{
    const Eigen::MatrixXcd panels = all_panels(bg, sw, cfg.Omega, ss, breaks, cfg.rel_tol, cfg.workers);
    const int K = int(breaks.size()) - 1;  // grid points are breaks[1..K]
    const double lam2 = cfg.lambda * cfg.lambda;
    const int edge = (cfg.n_max - 1) * (cfg.n_max - 1);
    P.assign(K, 0.0);
    dP.assign(K, 0.0);
    double tail = 0, total = 0;
    for (size_t b = 0; b < ss.blocks.size(); ++b) {
        const ModeBlock& mb = ss.blocks[b];
        const int m = int(mb.omega.size());
        Eigen::ArrayXcd I = Eigen::ArrayXcd::Zero(m), f(m);
        for (int k = 0; k < K; ++k) {
            I += panels.block(b * kBlock, k, m, 1).array();
            integrand(bg, sw, cfg.Omega, mb, breaks[k + 1], f);
            for (int j = 0; j < m; ++j) {
                const double mult = ss.shells[b * kBlock + j].multiplicity;
                P[k] += lam2 * mult * std::norm(I(j));
                dP[k] += lam2 * mult * 2 * std::real(std::conj(I(j)) * f(j));
                if (k == K - 1) {
                    total += mult * std::norm(I(j));
                    if (ss.shells[b * kBlock + j].norm2 > edge) tail += mult * std::norm(I(j));
                }
            }
        }
    }
    tail_ratio = std::max(tail_ratio, total > 0 ? tail / total : 0.0);
}

// Composite Simpson on a uniform grid; 3/8 rule on the last three intervals when odd.
double simpson(const std::vector<double>& y, double h)
{
    const int n = int(y.size()) - 1;
    if (n < 1) return 0.0;
    if (n == 1) return 0.5 * h * (y[0] + y[1]);
    auto simp = [&](int a, int b) {
        double s = y[a] + y[b];
        for (int i = a + 1; i < b; ++i) s += (i - a) % 2 ? 4 * y[i] : 2 * y[i];
        return s * h / 3;
    };
    if (n % 2 == 0) return simp(0, n);
    const double tail = 3 * h / 8 * (y[n - 3] + 3 * y[n - 2] + 3 * y[n - 1] + y[n]);
    return (n > 3 ? simp(0, n - 3) : 0.0) + tail;
}

}  // namespace

EchoEstimate estimator_E(const EchoConfig& cfg, const CosmologyBackground& lqc, const CosmologyBackground& gr,
                         const SwitchingFunction& sw)
{
    cfg.validate();
    lqc.validate();
    gr.validate();
    check_mode_sum_backgrounds(lqc, gr);
    const ShellSet ss = make_shells(gr, cfg.n_max);
    const double start = cfg.T_late - cfg.Ttilde;
    const double window = cfg.window_length();

    // Grid step: a quarter radian of the fastest phase at the start, with Ttilde/h
    // and window/h both integers.
    const double w_max = mode_frequency(gr, cfg.n_max * cfg.n_max);
    const double rate = cfg.Omega + w_max / std::min(scale_factor(gr, start), scale_factor(lqc, start));
    const int m0 = std::max(8, int(std::ceil(cfg.Ttilde * rate / 0.25)));
    int m = 0;
    for (int c = m0; c <= 64 * m0; ++c) {
        const double r = window * c / cfg.Ttilde;
        if (std::abs(r - std::round(r)) < 1e-9 * std::max(1.0, r)) {
            m = c;
            break;
        }
    }
    if (m == 0) throw std::invalid_argument("estimator_E: DeltaT must be commensurate with Ttilde");
    const double h = cfg.Ttilde / m;
    const int n_out = int(std::lround(window / h));
    const int K = m + n_out;  // grid intervals from start to T_late + DeltaT

    std::vector<double> breaks{cfg.T0};
    for (int k = 0; k <= K; ++k) breaks.push_back(start + k * h);

    EchoEstimate est;
    est.step = h;
    std::vector<double> Pg, dPg, Pl, dPl;
    probability_on_grid(cfg, gr, sw, ss, breaks, Pg, dPg, est.tail_ratio);
    probability_on_grid(cfg, lqc, sw, ss, breaks, Pl, dPl, est.tail_ratio);
    est.flagged = est.tail_ratio > 0.05;

    // Cumulative integrals by the end-corrected trapezoid rule (fourth order).
    auto cumulative = [&](const std::vector<double>& y, const std::vector<double>& dy) {
        std::vector<double> c(y.size(), 0.0);
        for (size_t k = 1; k < y.size(); ++k)
            c[k] = c[k - 1] + 0.5 * h * (y[k - 1] + y[k]) + h * h / 12 * (dy[k - 1] - dy[k]);
        return c;
    };
    const auto Cg = cumulative(Pg, dPg), Cl = cumulative(Pl, dPl);
    for (int k = m; k <= K; ++k) {
        est.times.push_back(start + k * h);
        const double mg = (Cg[k] - Cg[k - m]) / cfg.Ttilde;
        const double ml = (Cl[k] - Cl[k - m]) / cfg.Ttilde;
        est.mean_gr.push_back(mg);
        est.mean_lqc.push_back(ml);
        est.ratio.push_back(mg != 0 ? (ml - mg) / mg : 0.0);
    }
    est.E = simpson(est.ratio, h) / window;
    return est;
}

}  // namespace cqi
