#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dd {

enum class NoiseFamily { SoftPowerLaw, ExponentialCorrelation, GaussianCorrelation };

/// High-frequency behaviour of S: either S ~ alpha/omega^P or effectively a
/// hard cutoff (S identically zero, or decaying faster than any power).
struct SpectrumTail {
    bool hard_cutoff = false;
    double alpha = 0;
    double P = 0;
};

/// Stationary Gaussian dephasing noise as a spectrum/correlation pair under
/// the convention C(t) = (1/2pi) * integral S(w) e^{-iwt} dw, i.e.
/// C(t) = (1/pi) * integral_0^inf S(w) cos(wt) dw.  Immutable value type;
/// the hard-cutoff correlation interpolant is memoized write-once and is safe
/// for concurrent readers.
class NoiseModel {
public:
    double spectrum(double omega) const;   // S(w) >= 0, even in w
    double correlation(double t) const;    // C(t), real, even in t

    NoiseFamily family() const;
    std::optional<double> hard_cutoff() const;

    /// Characteristic correlation time / spectral width (grid scales only).
    double t_char() const;
    double omega_char() const;

    // Family parameters; querying one that the family lacks throws.
    double alpha() const;
    int K() const;
    double omega_c_soft() const;
    double tc() const;
    double sigma_t() const;

private:
    struct Impl;
    std::shared_ptr<const Impl> impl_;
    explicit NoiseModel(std::shared_ptr<const Impl> impl);

    friend NoiseModel make_soft_power_law(double, int, double);
    friend NoiseModel make_exponential_correlation(double);
    friend NoiseModel make_gaussian_correlation(double);
    friend NoiseModel with_hard_cutoff(const NoiseModel&, double);
};

/// S(w) = alpha / (omega_c_soft^{2K} + w^{2K}); correlation from the exact
/// K-pole residue sum.
NoiseModel make_soft_power_law(double alpha, int K, double omega_c_soft);

/// C(t) = e^{-|t|/tc}; S(w) = 2 tc / (1 + (w tc)^2).
NoiseModel make_exponential_correlation(double tc);

/// C(t) = e^{-(t/sigma_t)^2}; S(w) = sigma_t sqrt(pi) e^{-(w sigma_t)^2/4}.
NoiseModel make_gaussian_correlation(double sigma_t);

/// Same model with S forced to zero for w > omega_c; correlation recomputed
/// by numerical inversion (cached Chebyshev interpolant, tolerance 1e-8).
NoiseModel with_hard_cutoff(const NoiseModel& model, double omega_c);

/// Coefficients of C(t) = sum_k C_k |t|^k near t = 0.
struct CorrelationExpansion {
    std::vector<double> coeffs;          // C_0 .. C_{k_max}
    std::optional<int> leading_odd;      // index of first nonzero odd term
};

CorrelationExpansion correlation_expansion(const NoiseModel& model, int k_max);

SpectrumTail spectrum_tail_descriptor(const NoiseModel& model);

/// Numerical Fourier inversion of the spectrum (oracle/cross-check path and
/// the hard-cutoff correlation evaluator): (1/pi) integral_0^wmax S cos(wt).
double correlation_via_spectrum(const NoiseModel& model, double t, double rel_tol = 1e-9);

/// integral_0^W S(w) dw and integral_0^inf S(w) dw, cutoff-aware and
/// semi-analytic (used for Monte-Carlo spectral coverage checks).
double spectral_mass(const NoiseModel& model, double W);
double total_spectral_mass(const NoiseModel& model);

std::string serialize(const NoiseModel& model);
NoiseModel parse_noise(const std::string& text);

}  // namespace dd
