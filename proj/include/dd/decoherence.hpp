#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "dd/noise.hpp"
#include "dd/sequences.hpp"

namespace dd {

/// Filter value f~(u) = integral_0^1 F(s) e^{ius} ds at u = omega*T.
struct FilterEvaluation {
    double u = 0;
    std::complex<double> value;
    double abs2 = 0;
};

/// m-th modulation moment lambda_m = integral_0^1 F(s) s^m ds.  ExactPi uses
/// the alternating closed form; Sampled integrates each segment exactly.
std::complex<double> lambda_m(const Modulation& mod, int m);

/// Exact segment-sum filter; switches to a 6-term Taylor series for |u| < 1e-6
/// where the segment sum cancels catastrophically.
FilterEvaluation filter(const Modulation& mod, double u);

/// Precomputed-moment filter evaluator for quadrature hot paths: for
/// |u| <= radius() evaluates the moment power series (no cancellation, and the
/// series may start at any moment order, which implements exact projection of
/// the leading moments); beyond the radius delegates to the segment sum.
class FilterEvaluator {
public:
    explicit FilterEvaluator(const Modulation& mod);
    std::complex<double> value(double u) const;
    double abs2(double u) const;
    /// Series with moments below m_start dropped; requires |u| <= radius().
    std::complex<double> tail_series(double u, int m_start) const;
    double radius() const { return 2.0; }
    const Modulation& modulation() const { return mod_; }

private:
    Modulation mod_;
    std::vector<std::complex<double>> lam_over_fact_;  // lambda_m / m!
};

/// Decoherence functions phi_k: chi(T) = sum_k C_k phi_k T^{k+2} at short T.
/// Closed form for pi-pulse sequences (alternating quadruple sum).
double phi_k_closed(const PulseSequence& seq, int k);

/// Brute-force oracle: Re of the double integral of (s1-s2)^k F*(s1)F(s2) over
/// s2 < s1, by per-cell Gauss-Legendre over segment-pair cells (exact for the
/// piecewise-polynomial integrand); `panels` subdivides each segment for the
/// internal convergence check.
double phi_k_bruteforce(const Modulation& mod, int k, int panels = 1);

/// Even-order bilinear identity phi_{2m} = (2m)!/2 * sum_r (-1)^r
/// Re[conj(lambda_r) lambda_{2m-r}] / (r!(2m-r)!).
double phi_even_bilinear(const Modulation& mod, int m);

/// Leading odd decoherence function via the spectral residual form
/// (-1)^M (2M-1)! (1/pi) integral_0^inf |f~(u)|^2 / u^{2M} du, valid when the
/// first M moments vanish (checked to 1e-10; throws otherwise).
double phi_odd_spectral(const PulseSequence& seq, int M, double tol = 1e-9);

struct ChiResult {
    double value = 0;
    double error = 0;  // quadrature estimate or series truncation estimate
};

/// Spectral overlap chi(T) = T^2 (1/2pi) integral_0^inf S(w) |f~(wT)|^2 dw
/// (the frequency form of (1/2) iint C(t1-t2) F* F, so it matches the phi_k
/// normalization term by term), with oscillation-aware panels, analytic
/// power-law tail closure (tail bound added to the error, not the value), and
/// exact truncation at a hard cutoff.
ChiResult chi_spectral(const Modulation& mod, const NoiseModel& noise, double T);

/// Short-time series sum_{k<=k_max} C_k phi_k T^{k+2}; last nonzero term is
/// the truncation estimate.  Throws numerical_error when the last ratio of
/// consecutive nonzero terms is >= 0.5 ("series unreliable at this T").
ChiResult chi_series(const PulseSequence& seq, const CorrelationExpansion& expansion, double T,
                     int k_max);

struct SlopeFit {
    double slope = 0;
    double std_error = 0;
    int points = 0;
};

/// Least-squares slope of log chi vs log T over T_grid for family(n); rejects
/// (throws numerical_error) when chi is not strictly increasing on the grid.
SlopeFit decoupling_order(const NoiseModel& noise,
                          const std::function<PulseSequence(int)>& family, int n,
                          const std::vector<double>& T_grid);

struct DecoherenceReport {
    std::vector<std::complex<double>> lambda;  // lambda_0 .. lambda_{m_max}
    std::vector<double> phi;                   // phi_0 .. phi_{k_max}
    double chi = 0;
    double chi_err = 0;
    std::string method;  // "spectral" | "series"
};

/// Full report; internally cross-checks reported even phi against the bilinear
/// identity to 1e-10 and chi >= -error.
DecoherenceReport make_report(const PulseSequence& seq, const NoiseModel& noise, double T,
                              int m_max, int k_max, const std::string& method);

std::string serialize(const DecoherenceReport& report);

}  // namespace dd
