#include "dd/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "dd/decoherence.hpp"
#include "dd/errors.hpp"
#include "dd/quadrature.hpp"
#include "dd/rng.hpp"

namespace dd {

namespace {
const double kPi = 3.14159265358979323846264338327950288;

double resolve_dt(const PulseSequence& seq, double T, double dt, double omega_max) {
    double cap = seq.min_gap() / 20.0;
    if (dt == 0) {
        double resolved = cap;
        if (omega_max > 0) resolved = std::min(resolved, 0.2 / (omega_max * T));
        return resolved;
    }
    if (!(dt > 0)) throw validation_error("mc grid: dt must be > 0 (or 0 for auto)");
    if (dt > cap * (1.0 + 1e-12))
        throw validation_error("mc grid: dt must not exceed min_gap/20");
    return dt;
}
}  // namespace

std::vector<double> mc_time_grid(const PulseSequence& seq, double T, double dt,
                                 double omega_max) {
    if (!(T > 0)) throw validation_error("mc_time_grid: T must be > 0");
    double step = resolve_dt(seq, T, dt, omega_max);
    auto n_steps = static_cast<std::size_t>(std::ceil(1.0 / step));
    std::vector<double> grid;
    grid.reserve(n_steps + seq.times().size() + 2);
    for (std::size_t i = 0; i <= n_steps; ++i)
        grid.push_back(T * static_cast<double>(i) / static_cast<double>(n_steps));
    for (double s : seq.times()) grid.push_back(s * T);
    std::sort(grid.begin(), grid.end());
    // drop near-duplicates (a pulse landing on a uniform grid point)
    std::vector<double> out;
    out.reserve(grid.size());
    const double merge_tol = 1e-9 * step * T;
    for (double t : grid)
        if (out.empty() || t - out.back() > merge_tol) out.push_back(t);
    out.back() = T;
    return out;
}

TimeSeries sample_noise(const NoiseModel& noise, const McConfig& cfg,
                        const std::vector<double>& t_grid, std::uint64_t realization) {
    if (cfg.n_spectral_modes < 1)
        throw validation_error("sample_noise: n_spectral_modes must be >= 1");
    if (!(cfg.omega_max > 0))
        throw validation_error("sample_noise: omega_max must be resolved and > 0");
    const int K = cfg.n_spectral_modes;
    const double dw = cfg.omega_max / K;
    GaussianStream gauss(substream_seed(cfg.seed, realization));
    std::vector<double> a(static_cast<std::size_t>(K)), b(static_cast<std::size_t>(K)),
        w(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        w[static_cast<std::size_t>(k)] = (k + 0.5) * dw;
        double sd = std::sqrt(noise.spectrum(w[static_cast<std::size_t>(k)]) * dw / kPi);
        a[static_cast<std::size_t>(k)] = sd * gauss.next();
        b[static_cast<std::size_t>(k)] = sd * gauss.next();
    }
    TimeSeries out;
    out.t = t_grid;
    out.value.resize(t_grid.size());
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        double acc = 0;
        for (int k = 0; k < K; ++k)
            acc += a[static_cast<std::size_t>(k)] * std::cos(w[static_cast<std::size_t>(k)] * t_grid[i]) +
                   b[static_cast<std::size_t>(k)] * std::sin(w[static_cast<std::size_t>(k)] * t_grid[i]);
        out.value[i] = acc;
    }
    return out;
}

namespace {

// Signed trapezoid weights for integral beta(t) F(t/T) dt on the merged grid:
// phase = sum_i weight_i * beta_i.  Shared by accumulate_phase and the
// per-mode fast path in run_mc (which is the same sum reordered).
std::vector<double> trapezoid_weights(const std::vector<double>& t,
                                      const PulseSequence& seq, double T) {
    const auto& s = seq.times();
    std::vector<double> edges;
    edges.push_back(0);
    for (double v : s) edges.push_back(v * T);
    edges.push_back(T);

    std::vector<double> wgt(t.size(), 0.0);
    const double tol = 1e-9 * T / static_cast<double>(t.size());
    std::size_t ia = 0;
    for (std::size_t seg = 0; seg + 1 < edges.size(); ++seg) {
        double sign = (seg % 2 == 0) ? 1.0 : -1.0;
        // locate the right edge; the grid must contain it
        std::size_t ib = ia;
        while (ib + 1 < t.size() && t[ib] < edges[seg + 1] - tol) ++ib;
        if (std::fabs(t[ib] - edges[seg + 1]) > tol)
            throw validation_error("accumulate_phase: grid is missing a pulse time");
        for (std::size_t i = ia; i < ib; ++i) {
            double h = 0.5 * (t[i + 1] - t[i]) * sign;
            wgt[i] += h;
            wgt[i + 1] += h;
        }
        ia = ib;
    }
    return wgt;
}

}  // namespace

double accumulate_phase(const TimeSeries& beta, const PulseSequence& seq, double T) {
    if (!(T > 0)) throw validation_error("accumulate_phase: T must be > 0");
    if (beta.t.size() != beta.value.size() || beta.t.size() < 2)
        throw validation_error("accumulate_phase: malformed time series");
    std::vector<double> wgt = trapezoid_weights(beta.t, seq, T);
    double acc = 0;
    for (std::size_t i = 0; i < wgt.size(); ++i) acc += wgt[i] * beta.value[i];
    return acc;
}

McReport run_mc(const NoiseModel& noise, const PulseSequence& seq, double T,
                const McConfig& cfg) {
    if (!(T > 0)) throw validation_error("run_mc: T must be > 0");
    if (cfg.n_realizations < 100)
        throw validation_error("run_mc: n_realizations must be >= 100");
    if (cfg.n_spectral_modes < 16)
        throw validation_error("run_mc: n_spectral_modes must be >= 16");
    if (cfg.omega_max < 0) throw validation_error("run_mc: omega_max must be >= 0");

    McReport rep;
    rep.cfg = cfg;
    rep.T = T;

    // Resolve the frequency window: explicit, hard cutoff, or grow until the
    // missing spectral mass is below 1e-4 of the total.
    double total_mass = total_spectral_mass(noise);
    double omega_eff = cfg.omega_max;
    if (omega_eff == 0) {
        if (noise.hard_cutoff()) {
            omega_eff = *noise.hard_cutoff();
        } else {
            omega_eff = 8.0 * noise.omega_char();
            for (int i = 0; i < 60 && spectral_mass(noise, omega_eff) < (1.0 - 1e-4) * total_mass;
                 ++i)
                omega_eff *= 2.0;
        }
    }
    rep.omega_max_effective = omega_eff;
    rep.coverage = spectral_mass(noise, omega_eff) / total_mass;
    rep.coverage_warning = (1.0 - rep.coverage) >= 1e-4;

    const int K = cfg.n_spectral_modes;
    const double dw = omega_eff / K;
    rep.resolution_warning = dw > std::min(noise.omega_char(), kPi / T) / 8.0;

    double dt_eff = resolve_dt(seq, T, cfg.dt, omega_eff);
    rep.dt_effective = dt_eff;
    std::vector<double> grid = mc_time_grid(seq, T, dt_eff, 0);
    std::vector<double> wgt = trapezoid_weights(grid, seq, T);

    // Per-mode phase weights: phase_r = sum_k a_k P_k + b_k Q_k, an exact
    // reordering of trapezoid(beta_r) since beta is linear in (a_k, b_k).
    std::vector<double> P(static_cast<std::size_t>(K)), Q(static_cast<std::size_t>(K)),
        sd(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        double w_k = (k + 0.5) * dw;
        sd[static_cast<std::size_t>(k)] = std::sqrt(noise.spectrum(w_k) * dw / kPi);
        double pc = 0, qc = 0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            pc += wgt[i] * std::cos(w_k * grid[i]);
            qc += wgt[i] * std::sin(w_k * grid[i]);
        }
        P[static_cast<std::size_t>(k)] = pc;
        Q[static_cast<std::size_t>(k)] = qc;
    }

    const int R = cfg.n_realizations;
    std::vector<double> phases(static_cast<std::size_t>(R));
    for (int r = 0; r < R; ++r) {
        GaussianStream gauss(substream_seed(cfg.seed, static_cast<std::uint64_t>(r)));
        double acc = 0;
        for (int k = 0; k < K; ++k) {
            double a = sd[static_cast<std::size_t>(k)] * gauss.next();
            double b = sd[static_cast<std::size_t>(k)] * gauss.next();
            acc += a * P[static_cast<std::size_t>(k)] + b * Q[static_cast<std::size_t>(k)];
        }
        phases[static_cast<std::size_t>(r)] = acc;
    }

    // Index-order Kahan reductions keep the report bit-identical run to run.
    KahanSum sum_cos;
    for (double ph : phases) sum_cos.add(std::cos(ph));
    rep.w_hat = sum_cos.value() / R;
    KahanSum sum_var;
    for (double ph : phases) {
        double d = std::cos(ph) - rep.w_hat;
        sum_var.add(d * d);
    }
    rep.w_se = std::sqrt(sum_var.value() / (static_cast<double>(R) - 1.0) / R);

    KahanSum pm;
    for (double ph : phases) pm.add(ph);
    double phase_mean = pm.value() / R;
    KahanSum m2s, m3s;
    for (double ph : phases) {
        double d = ph - phase_mean;
        m2s.add(d * d);
        m3s.add(d * d * d);
    }
    double m2 = m2s.value() / R;
    double m3 = m3s.value() / R;
    rep.phase_skew = (m2 > 0) ? m3 / std::pow(m2, 1.5) : 0.0;

    ChiResult chi = chi_spectral(modulation_of(seq), noise, T);
    rep.chi_analytic = chi.value;
    rep.chi_analytic_err = chi.error;

    if (rep.w_hat > 0) {
        rep.chi_mc = -std::log(rep.w_hat);
        rep.chi_mc_valid = true;
        double se_chi = rep.w_se / rep.w_hat;
        rep.z = (rep.chi_mc - rep.chi_analytic) / se_chi;
    } else {
        rep.chi_mc = std::numeric_limits<double>::quiet_NaN();
        rep.chi_mc_valid = false;
        rep.z = std::numeric_limits<double>::quiet_NaN();
    }
    return rep;
}

std::string serialize(const McReport& report) {
    nlohmann::json j;
    j["w_hat"] = report.w_hat;
    j["w_se"] = report.w_se;
    j["chi_analytic"] = report.chi_analytic;
    j["chi_analytic_err"] = report.chi_analytic_err;
    if (report.chi_mc_valid) {
        j["chi_mc"] = report.chi_mc;
        j["z"] = report.z;
    } else {
        j["chi_mc"] = nullptr;
        j["z"] = nullptr;
    }
    j["chi_mc_valid"] = report.chi_mc_valid;
    j["phase_skew"] = report.phase_skew;
    j["coverage"] = report.coverage;
    j["coverage_warning"] = report.coverage_warning;
    j["resolution_warning"] = report.resolution_warning;
    j["T"] = report.T;
    j["dt_effective"] = report.dt_effective;
    j["omega_max_effective"] = report.omega_max_effective;
    j["config"] = {{"n_realizations", report.cfg.n_realizations},
                   {"n_spectral_modes", report.cfg.n_spectral_modes},
                   {"omega_max", report.cfg.omega_max},
                   {"dt", report.cfg.dt},
                   {"seed", report.cfg.seed}};
    return j.dump();
}

}  // namespace dd
