#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dd/noise.hpp"
#include "dd/sequences.hpp"

namespace dd {

/// Monte-Carlo discretization: spectral synthesis on a uniform frequency grid
/// (midpoint sampling, domega = omega_max/n_spectral_modes) and trapezoidal
/// time integration.
struct McConfig {
    int n_realizations = 10000;
    int n_spectral_modes = 4096;
    double omega_max = 0;      // 0 = auto: hard cutoff if any, else 1e-4 mass coverage
    double dt = 0;             // time step in units of T; 0 = auto
    std::uint64_t seed = 1;
};

struct McReport {
    double w_hat = 0;           // mean of cos(phase)
    double w_se = 0;            // standard error of w_hat
    double chi_analytic = 0;    // spectral-overlap prediction
    double chi_analytic_err = 0;
    double chi_mc = 0;          // -ln(w_hat) when w_hat > 0
    bool chi_mc_valid = false;
    double z = 0;               // (chi_mc - chi_analytic) / se(chi_mc)
    double phase_skew = 0;      // sample skewness of phases (Gaussianity check)
    double coverage = 1;        // spectral mass fraction below omega_max
    bool coverage_warning = false;    // mass beyond omega_max >= 1e-4
    bool resolution_warning = false;  // domega coarse vs spectral width
    // Echo of the resolved configuration.
    McConfig cfg;
    double T = 0;
    double dt_effective = 0;    // in units of T
    double omega_max_effective = 0;
};

/// beta samples on an explicit time grid.
struct TimeSeries {
    std::vector<double> t;
    std::vector<double> value;
};

/// Time grid on [0, T]: uniform step dt*T with every pulse time inserted
/// exactly.  dt = 0 resolves to min(min_gap/20, 0.2/(omega_max*T)).
std::vector<double> mc_time_grid(const PulseSequence& seq, double T, double dt,
                                 double omega_max);

/// One realization of the stationary Gaussian process with spectrum S:
/// beta(t) = sum_k [a_k cos(w_k t) + b_k sin(w_k t)], Var a_k = Var b_k =
/// S(w_k) domega / pi.  Realizations are independent counter-seeded streams.
TimeSeries sample_noise(const NoiseModel& noise, const McConfig& cfg,
                        const std::vector<double>& t_grid, std::uint64_t realization);

/// Trapezoidal integral of beta(t) F(t/T) dt with exact sign handling at the
/// pulse times (each constant-sign segment integrated separately); the grid
/// must contain every pulse time.
double accumulate_phase(const TimeSeries& beta, const PulseSequence& seq, double T);

/// Full Monte-Carlo cross-validation against exp(-chi_spectral).  Identical
/// seed and config give a bit-identical report regardless of thread count.
McReport run_mc(const NoiseModel& noise, const PulseSequence& seq, double T,
                const McConfig& cfg);

std::string serialize(const McReport& report);

}  // namespace dd
