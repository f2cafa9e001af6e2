#include "curvedqi/detector.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cqi {

CavitySpec::CavitySpec(double len, int n, CavityVibration vib) : length(len), n_modes(n), vibration(vib)
{
    if (!(length > 0)) throw std::invalid_argument("CavitySpec: length must be positive");
    if (n_modes < 1) throw std::invalid_argument("CavitySpec: n_modes must be >= 1");
    if (std::abs(vibration.amplitude) > 0.05 * length)
        throw std::invalid_argument("CavitySpec: vibration amplitude exceeds 5% of the length");
    if (vibration.frequency < 0) throw std::invalid_argument("CavitySpec: negative vibration frequency");
}

double CavitySpec::omega(int n, double t) const
{
    double len = length;
    if (vibrating())
        len += vibration.amplitude * std::sin(2 * M_PI * vibration.frequency * t + vibration.phase);
    return n * M_PI / len;
}

double CavitySpec::mode_function(int n, double x) const { return std::sin(n * M_PI * x / length); }

DetectorSpec DetectorSpec::stationary(double gap, double x, double lambda0, std::function<double(double)> window)
{
    if (!(gap > 0)) throw std::invalid_argument("DetectorSpec: gap must be positive");
    DetectorSpec d;
    d.gap = gap;
    d.lambda0 = lambda0;
    d.position = [x](double) { return x; };
    d.dtau_dt = [](double) { return 1.0; };
    d.window = std::move(window);
    return d;
}

namespace {

struct DetectorSample {
    double rate;     // dtau/dt
    double lambda;   // lambda0 chi
    double x;
};

DetectorSample sample(const DetectorSpec& d, const CavitySpec& cav, double t_local, int j)
{
    DetectorSample s{d.dtau_dt ? d.dtau_dt(t_local) : 1.0, d.lambda0 * (d.window ? d.window(t_local) : 1.0),
                     d.position(t_local)};
    if (!(s.x >= 0 && s.x <= cav.length))
        throw std::domain_error("detector " + std::to_string(j) + " outside cavity at t=" +
                                std::to_string(t_local));
    if (!(s.rate > 0 && s.rate <= 1))
        throw std::domain_error("detector " + std::to_string(j) + ": dtau/dt outside (0, 1]");
    return s;
}

}  // namespace

QuadraticGenerator build_generator(const CavitySpec& cavity, const std::vector<DetectorSpec>& detectors,
                                   double time_origin)
{
    const int M = static_cast<int>(detectors.size()), N = cavity.n_modes;
    for (int j = 0; j < M; ++j)
        if (!detectors[j].position) throw std::invalid_argument("build_generator: detector without position");
    QuadraticGenerator gen;
    gen.layout = PhaseSpaceLayout(M, N);

    // H = sum rate Omega a_d^+ a_d + sum w_n a_n^+ a_n + sum rate lambda v_n(x) (a_d + a_d^+)(a_n + a_n^+)
    gen.w = [=](double t) {
        CMat w = CMat::Zero(M + N, M + N);
        for (int n = 0; n < N; ++n) w(M + n, M + n) = cavity.omega(n + 1, t);
        for (int j = 0; j < M; ++j) {
            auto s = sample(detectors[j], cavity, t - time_origin, j);
            w(j, j) = s.rate * detectors[j].gap;
            for (int n = 0; n < N; ++n) {
                const double c = s.rate * s.lambda * cavity.mode_function(n + 1, s.x);
                w(j, M + n) = w(M + n, j) = c;
            }
        }
        return w;
    };
    gen.g = [=](double t) {
        CMat g = CMat::Zero(M + N, M + N);
        for (int j = 0; j < M; ++j) {
            auto s = sample(detectors[j], cavity, t - time_origin, j);
            for (int n = 0; n < N; ++n) {
                const double c = 0.5 * s.rate * s.lambda * cavity.mode_function(n + 1, s.x);
                g(j, M + n) = g(M + n, j) = c;
            }
        }
        return g;
    };
    // In quadratures: H = 1/2 x^T F^sym x with diagonal frequencies and 2 rate lambda v q_d q_n.
    gen.fsym = [=](double t, Mat& f) {
        const int n = M + N;
        f.setZero();
        for (int k = 0; k < N; ++k) f(M + k, M + k) = f(n + M + k, n + M + k) = cavity.omega(k + 1, t);
        for (int j = 0; j < M; ++j) {
            auto s = sample(detectors[j], cavity, t - time_origin, j);
            f(j, j) = f(n + j, n + j) = s.rate * detectors[j].gap;
            if (s.lambda == 0) continue;
            for (int k = 0; k < N; ++k)
                f(j, M + k) = f(M + k, j) = 2 * s.rate * s.lambda * cavity.mode_function(k + 1, s.x);
        }
    };
    return gen;
}

CovarianceState simulate(const CavitySpec& cavity, const std::vector<DetectorSpec>& detectors,
                         const CovarianceState& initial, double t0, double t1, const PropagatorOptions& opt)
{
    auto gen = build_generator(cavity, detectors);
    if (!(initial.layout() == gen.layout))
        throw std::invalid_argument("simulate: initial state layout must be detectors + cavity modes");
    if (t1 == t0) return initial;
    Mat f(gen.layout.dim(), gen.layout.dim());
    gen.fill_fsym(t0, f);  // surfaces position errors before integrating
    gen.fill_fsym(t1, f);
    return evolve_covariance(initial, evolve_propagator(gen, t0, t1, opt));
}

namespace {

bool commensurate(const CavitySpec& cav, double Tc)
{
    if (!cav.vibrating()) return true;
    const double x = cav.vibration.frequency * Tc;
    return std::abs(x - std::round(x)) <= 1e-12 * std::max(1.0, x);
}

PropagatorOptions farm_options(const CavitySpec& cav, PropagatorOptions opt)
{
    if (cav.n_modes >= 16) opt.sparse = true;
    return opt;
}

}  // namespace

FarmingReport farm(const CavitySpec& cavity, const FarmingProtocol& protocol,
                   const CovarianceState& initial_cavity, const PropagatorOptions& opt)
{
    if (!(protocol.cycle_duration > 0)) throw std::invalid_argument("farm: cycle duration must be positive");
    if (protocol.max_cycles < 1) throw std::invalid_argument("farm: max_cycles must be >= 1");
    if (protocol.settle_cycles < 1) throw std::invalid_argument("farm: settle_cycles must be >= 1");
    const int N = cavity.n_modes;
    if (initial_cavity.n() != N) throw std::invalid_argument("farm: cavity state has the wrong mode count");
    const PhaseSpaceLayout joint(2, N);
    const CovarianceState det0 = protocol.injected ? *protocol.injected : vacuum_state(PhaseSpaceLayout(2, 0));
    if (det0.n() != 2) throw std::invalid_argument("farm: injected detector state must have two modes");

    const std::vector<DetectorSpec> pair{protocol.a, protocol.b};
    const double Tc = protocol.cycle_duration;
    const PropagatorOptions popt = farm_options(cavity, opt);
    const bool reuse = commensurate(cavity, Tc);
    Mat S;
    if (reuse) S = evolve_propagator(build_generator(cavity, pair, 0.0), 0.0, Tc, popt).S;

    std::vector<int> cav_modes(N);
    for (int k = 0; k < N; ++k) cav_modes[k] = 2 + k;

    FarmingReport rep;
    CovarianceState cav = CovarianceState(PhaseSpaceLayout(0, N), initial_cavity.sigma(), false);
    std::vector<double> raws;
    for (int c = 0; c < protocol.max_cycles; ++c) {
        if (!reuse) {
            const double t0 = c * Tc;
            S = evolve_propagator(build_generator(cavity, pair, t0), t0, t0 + Tc, popt).S;
        }
        const CovarianceState before = direct_sum(det0, cav, joint);
        const CovarianceState after = evolve_covariance(before, S);
        const Mat pair_sigma = partial_state(after, {0, 1}).sigma();
        const double en = log_negativity_two_mode(pair_sigma);
        // The unclipped value keeps two separable cycles from looking converged.
        const double raw = partial_transpose_log_eigenvalue(pair_sigma);
        cav = partial_state(after, cav_modes);
        rep.negativities.push_back(en);
        if (protocol.keep_snapshots) rep.cavity_snapshots.push_back(cav);
        raws.push_back(raw);
        const int w = protocol.settle_cycles;
        if (c >= w) {
            const auto [lo, hi] = std::minmax_element(raws.end() - (w + 1), raws.end());
            if (*hi - *lo >= protocol.convergence_tol) continue;
            rep.converged = true;
            rep.converged_at = c + 1;
            break;
        }
    }
    rep.fixed_point_negativity = rep.negativities.back();
    rep.final_cavity = cav;
    return rep;
}

FarmingProtocol make_pair_protocol(const CavitySpec& cavity, const WorkingPointGrid& grid, double gap,
                                   double cycle_duration, double coupling)
{
    if (!(grid.x_a > 0 && grid.x_a < 1 && grid.x_b > 0 && grid.x_b < 1))
        throw std::invalid_argument("working point: detector positions must be fractions in (0, 1)");
    SwitchingFunction win(SwitchingKind::smooth_compact, 0.0, cycle_duration, grid.ramp_fraction * cycle_duration);
    FarmingProtocol p;
    p.a = DetectorSpec::stationary(gap, grid.x_a * cavity.length, coupling, win);
    p.b = DetectorSpec::stationary(gap, grid.x_b * cavity.length, coupling, win);
    p.cycle_duration = cycle_duration;
    p.max_cycles = grid.max_cycles;
    p.convergence_tol = grid.convergence_tol;
    p.settle_cycles = grid.settle_cycles;
    p.keep_snapshots = false;
    return p;
}

std::vector<WorkingPoint> scan_working_points(const CavitySpec& cavity, const WorkingPointGrid& grid,
                                              const PropagatorOptions& opt)
{
    std::vector<WorkingPoint> out;
    const CovarianceState vac = vacuum_state(PhaseSpaceLayout(0, cavity.n_modes));
    for (double gap : grid.gaps)
        for (double tc : grid.cycle_durations)
            for (double lam : grid.couplings) {
                auto rep = farm(cavity, make_pair_protocol(cavity, grid, gap, tc, lam), vac, opt);
                out.push_back({gap, tc, lam, rep.fixed_point_negativity, rep.converged, rep.converged_at});
            }
    return out;
}

WorkingPoint best_working_point(const std::vector<WorkingPoint>& points)
{
    const WorkingPoint* best = nullptr;
    for (const auto& p : points)
        if (p.converged && (!best || p.fixed_point_negativity > best->fixed_point_negativity)) best = &p;
    if (!best) throw std::runtime_error("best_working_point: no converged working point");
    return *best;
}

SeismoPoint seismograph_response(const CavitySpec& cavity, const FarmingProtocol& protocol,
                                 double baseline_negativity, double amplitude, double frequency,
                                 double phase, const PropagatorOptions& opt)
{
    SeismoPoint pt;
    pt.amplitude = amplitude;
    pt.frequency = frequency;
    if (amplitude == 0.0) {
        pt.perturbed_negativity = baseline_negativity;
        return pt;
    }
    try {
        CavitySpec shaken(cavity.length, cavity.n_modes, {amplitude, frequency, phase});
        FarmingProtocol p = protocol;
        p.keep_snapshots = false;
        auto rep = farm(shaken, p, vacuum_state(PhaseSpaceLayout(0, cavity.n_modes)), opt);
        pt.perturbed_negativity = rep.negativities.back();
        pt.delta_negativity = pt.perturbed_negativity - baseline_negativity;
    } catch (const std::exception& e) {
        pt.ok = false;
        pt.error = e.what();
    }
    return pt;
}

SeismoPoint seismograph_point(const CavitySpec& cavity, const FarmingProtocol& protocol, double amplitude,
                              double frequency, double phase, const PropagatorOptions& opt)
{
    FarmingProtocol p = protocol;
    p.keep_snapshots = false;
    const double base =
        farm(cavity, p, vacuum_state(PhaseSpaceLayout(0, cavity.n_modes)), opt).negativities.back();
    return seismograph_response(cavity, protocol, base, amplitude, frequency, phase, opt);
}

std::vector<SeismoPoint> seismograph_scan(const CavitySpec& cavity, const FarmingProtocol& protocol,
                                          const std::vector<double>& amplitudes,
                                          const std::vector<double>& frequencies,
                                          const PropagatorOptions& opt)
{
    FarmingProtocol p = protocol;
    p.keep_snapshots = false;
    const double base =
        farm(cavity, p, vacuum_state(PhaseSpaceLayout(0, cavity.n_modes)), opt).negativities.back();
    std::vector<SeismoPoint> out;
    for (double a : amplitudes)
        for (double f : frequencies) out.push_back(seismograph_response(cavity, protocol, base, a, f, 0.0, opt));
    return out;
}

}  // namespace cqi
