#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace dd {

/// Instantaneous pi-pulse sequence in relative time: 0 < s_1 < ... < s_N < 1.
/// N = 0 is free evolution.  The total duration T is an evaluation parameter
/// of the decoherence functionals, never part of the sequence itself.
class PulseSequence {
public:
    PulseSequence() = default;                       // free evolution
    explicit PulseSequence(std::vector<double> times);

    const std::vector<double>& times() const { return times_; }
    int n_pulses() const { return static_cast<int>(times_.size()); }

    /// Smallest spacing between consecutive switching points, with the
    /// interval endpoints 0 and 1 included.
    double min_gap() const;

    bool operator==(const PulseSequence&) const = default;

private:
    std::vector<double> times_;
};

PulseSequence make_udd(int n);   // s_j = sin^2(pi j / (2n+2))
PulseSequence make_cpmg(int n);  // s_j = (2j-1)/(2n)
PulseSequence make_pdd(int n);   // s_j = j/(n+1)

/// Optional hardware-realism guard: rejects sequences whose smallest gap
/// (endpoints included) is below gap_min.  Off by default everywhere.
void enforce_min_gap(const PulseSequence& seq, double gap_min);

/// Piecewise-constant modulation F(s) on (0,1], identically zero outside.
/// ExactPi is the alternating (-1)^j step function of a pi-pulse sequence and
/// keeps closed-form evaluation paths available; Sampled holds arbitrary
/// bounded complex segment values (uniform grid or explicit breakpoints).
class Modulation {
public:
    enum class Kind { ExactPi, Sampled };

    static Modulation exact_pi(const PulseSequence& seq);
    /// Uniform grid: value v[i] on (i/n, (i+1)/n].
    static Modulation sampled(std::vector<std::complex<double>> values);
    /// Explicit breakpoints 0 = b_0 < ... < b_n = 1, value v[i] on (b_i, b_{i+1}].
    static Modulation piecewise(std::vector<double> breaks,
                                std::vector<std::complex<double>> values);

    Kind kind() const { return kind_; }
    int n_segments() const { return static_cast<int>(values_.size()); }
    const std::vector<double>& breaks() const { return breaks_; }
    const std::vector<std::complex<double>>& values() const { return values_; }
    /// Pulse times; only meaningful for ExactPi.
    const std::vector<double>& pulse_times() const { return pulse_times_; }

    std::complex<double> value_at(double s) const;

    double l1_norm() const;     // integral of |F| over (0,1]
    /// Jump bound a_f with |f~(u)| <= a_f/|u| (sum of segment-edge magnitudes);
    /// equals 2(N+1) for an ExactPi sequence of N pulses.
    double jump_bound() const;

private:
    Kind kind_ = Kind::ExactPi;
    std::vector<double> breaks_{0.0, 1.0};
    std::vector<std::complex<double>> values_{{1.0, 0.0}};
    std::vector<double> pulse_times_;
};

Modulation modulation_of(const PulseSequence& seq);

struct MultiQubitPulse {
    double s = 0;   // relative time in (0,1)
    int qubit = 1;  // 1-based target index
};

/// X-pulse program on L qubits tracking the coherence between basis levels p
/// and q (bit l-1 of a code is qubit l's bit).  The modulation exposed is the
/// uncorrected frame; the final frame-correction pulse some conventions append
/// is a bookkeeping identity and is not represented.
struct MultiQubitPulseProgram {
    int n_qubits = 1;
    std::vector<MultiQubitPulse> pulses;  // strictly increasing s
    std::uint32_t p = 1;
    std::uint32_t q = 0;
};

void validate(const MultiQubitPulseProgram& prog);

/// Piecewise-constant integer-valued modulation: on each segment the value is
/// popcount(p^mask) - popcount(q^mask) with mask the XOR of all pulses so far.
/// Values lie in {-L, ..., +L}.
Modulation multiqubit_modulation(const MultiQubitPulseProgram& prog);

std::string serialize(const PulseSequence& seq);
PulseSequence parse_sequence(const std::string& text);
std::string serialize(const MultiQubitPulseProgram& prog);
MultiQubitPulseProgram parse_multiqubit_program(const std::string& text);

}  // namespace dd
