#include "dd/sequences.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "dd/errors.hpp"

namespace dd {

namespace {

const double kPi = 3.14159265358979323846264338327950288;

void validate_times(const std::vector<double>& times) {
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double s = times[i];
        if (!std::isfinite(s))
            throw validation_error("times[" + std::to_string(i) + "]: not finite");
        if (!(s > 0.0 && s < 1.0))
            throw validation_error("times[" + std::to_string(i) + "]: time out of (0,1)");
        if (i > 0 && !(s > times[i - 1]))
            throw validation_error("times[" + std::to_string(i) + "]: non-increasing");
    }
}

}  // namespace

PulseSequence::PulseSequence(std::vector<double> times) : times_(std::move(times)) {
    validate_times(times_);
}

double PulseSequence::min_gap() const {
    double prev = 0.0, gap = 1.0;
    for (double s : times_) {
        gap = std::min(gap, s - prev);
        prev = s;
    }
    return std::min(gap, 1.0 - prev);
}

PulseSequence make_udd(int n) {
    if (n < 1) throw validation_error("make_udd: n must be >= 1 (default-construct for free evolution)");
    std::vector<double> t(static_cast<std::size_t>(n));
    for (int j = 1; j <= n; ++j) {
        double x = std::sin(kPi * j / (2.0 * n + 2.0));
        t[static_cast<std::size_t>(j - 1)] = x * x;
    }
    // the exact sequence is time-symmetric; enforce it to kill rounding drift
    for (int j = 0; j < n / 2; ++j) {
        double avg = 0.5 * (t[static_cast<std::size_t>(j)] +
                            (1.0 - t[static_cast<std::size_t>(n - 1 - j)]));
        t[static_cast<std::size_t>(j)] = avg;
        t[static_cast<std::size_t>(n - 1 - j)] = 1.0 - avg;
    }
    if (n % 2 == 1) t[static_cast<std::size_t>(n / 2)] = 0.5;
    return PulseSequence(std::move(t));
}

PulseSequence make_cpmg(int n) {
    if (n < 1) throw validation_error("make_cpmg: n must be >= 1 (default-construct for free evolution)");
    std::vector<double> t(static_cast<std::size_t>(n));
    for (int j = 1; j <= n; ++j) t[static_cast<std::size_t>(j - 1)] = (2.0 * j - 1.0) / (2.0 * n);
    return PulseSequence(std::move(t));
}

PulseSequence make_pdd(int n) {
    if (n < 1) throw validation_error("make_pdd: n must be >= 1 (default-construct for free evolution)");
    std::vector<double> t(static_cast<std::size_t>(n));
    for (int j = 1; j <= n; ++j) t[static_cast<std::size_t>(j - 1)] = static_cast<double>(j) / (n + 1.0);
    return PulseSequence(std::move(t));
}

void enforce_min_gap(const PulseSequence& seq, double gap_min) {
    if (!(gap_min >= 0)) throw validation_error("enforce_min_gap: gap_min must be >= 0");
    const std::vector<double>& t = seq.times();
    double prev = 0.0;
    for (std::size_t i = 0; i <= t.size(); ++i) {
        const double next = (i < t.size()) ? t[i] : 1.0;
        if (next - prev < gap_min)
            throw validation_error("minimum gap violated before times[" + std::to_string(i) +
                                   "]: gap " + std::to_string(next - prev) + " < " +
                                   std::to_string(gap_min));
        prev = next;
    }
}

Modulation Modulation::exact_pi(const PulseSequence& seq) {
    Modulation m;
    m.kind_ = Kind::ExactPi;
    m.pulse_times_ = seq.times();
    m.breaks_.clear();
    m.values_.clear();
    m.breaks_.reserve(m.pulse_times_.size() + 2);
    m.breaks_.push_back(0.0);
    for (double s : m.pulse_times_) m.breaks_.push_back(s);
    m.breaks_.push_back(1.0);
    double sign = 1.0;
    for (std::size_t j = 0; j <= m.pulse_times_.size(); ++j) {
        m.values_.emplace_back(sign, 0.0);
        sign = -sign;
    }
    return m;
}

Modulation Modulation::sampled(std::vector<std::complex<double>> values) {
    if (values.empty()) throw validation_error("sampled modulation: empty grid");
    const int n = static_cast<int>(values.size());
    std::vector<double> breaks(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) breaks[static_cast<std::size_t>(i)] = static_cast<double>(i) / n;
    breaks.back() = 1.0;
    return piecewise(std::move(breaks), std::move(values));
}

Modulation Modulation::piecewise(std::vector<double> breaks,
                                 std::vector<std::complex<double>> values) {
    if (breaks.size() != values.size() + 1)
        throw validation_error("piecewise modulation: breaks must have one more entry than values");
    if (values.empty()) throw validation_error("piecewise modulation: empty");
    if (breaks.front() != 0.0 || breaks.back() != 1.0)
        throw validation_error("piecewise modulation: breaks must start at 0 and end at 1");
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
        if (!(breaks[i + 1] > breaks[i]))
            throw validation_error("piecewise modulation: breaks not strictly increasing at index " +
                                   std::to_string(i + 1));
    for (const auto& v : values)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            throw validation_error("piecewise modulation: non-finite value");
    Modulation m;
    m.kind_ = Kind::Sampled;
    m.breaks_ = std::move(breaks);
    m.values_ = std::move(values);
    return m;
}

std::complex<double> Modulation::value_at(double s) const {
    if (!(s > 0.0) || s > 1.0) return {0.0, 0.0};
    // s in (b_i, b_{i+1}]  <=>  i is the segment left of the first break >= s.
    auto it = std::lower_bound(breaks_.begin(), breaks_.end(), s);
    std::size_t idx = static_cast<std::size_t>(it - breaks_.begin());
    if (idx == 0) return values_.front();  // s <= b_0 handled above; defensive
    return values_[idx - 1];
}

double Modulation::l1_norm() const {
    double sum = 0;
    for (std::size_t j = 0; j < values_.size(); ++j)
        sum += std::abs(values_[j]) * (breaks_[j + 1] - breaks_[j]);
    return sum;
}

double Modulation::jump_bound() const {
    double sum = 0;
    for (const auto& v : values_) sum += 2.0 * std::abs(v);
    return sum;
}

Modulation modulation_of(const PulseSequence& seq) { return Modulation::exact_pi(seq); }

void validate(const MultiQubitPulseProgram& prog) {
    if (prog.n_qubits < 1 || prog.n_qubits > 30)
        throw validation_error("multiqubit program: n_qubits out of [1,30]");
    const std::uint32_t limit = (prog.n_qubits >= 32) ? 0xffffffffu : ((1u << prog.n_qubits) - 1u);
    if (prog.p > limit || prog.q > limit)
        throw validation_error("multiqubit program: level code exceeds 2^L - 1");
    if (prog.p == prog.q)
        throw validation_error("multiqubit program: p == q (no coherence to track)");
    double prev = 0.0;
    for (std::size_t i = 0; i < prog.pulses.size(); ++i) {
        const MultiQubitPulse& pl = prog.pulses[i];
        if (!std::isfinite(pl.s) || !(pl.s > 0.0 && pl.s < 1.0))
            throw validation_error("pulses[" + std::to_string(i) + "]: time out of (0,1)");
        if (!(pl.s > prev) && i > 0)
            throw validation_error("pulses[" + std::to_string(i) + "]: non-increasing");
        if (pl.qubit < 1 || pl.qubit > prog.n_qubits)
            throw validation_error("pulses[" + std::to_string(i) + "]: qubit index out of [1,L]");
        prev = pl.s;
    }
}

Modulation multiqubit_modulation(const MultiQubitPulseProgram& prog) {
    validate(prog);
    std::vector<double> breaks;
    std::vector<std::complex<double>> values;
    breaks.reserve(prog.pulses.size() + 2);
    values.reserve(prog.pulses.size() + 1);
    breaks.push_back(0.0);
    std::uint32_t mask = 0;
    auto weight_diff = [&](std::uint32_t m) {
        return static_cast<double>(std::popcount(prog.p ^ m)) -
               static_cast<double>(std::popcount(prog.q ^ m));
    };
    values.emplace_back(weight_diff(mask), 0.0);
    for (const MultiQubitPulse& pl : prog.pulses) {
        breaks.push_back(pl.s);
        mask ^= (1u << (pl.qubit - 1));
        values.emplace_back(weight_diff(mask), 0.0);
    }
    breaks.push_back(1.0);
    return Modulation::piecewise(std::move(breaks), std::move(values));
}

std::string serialize(const PulseSequence& seq) {
    nlohmann::json j;
    j["times"] = seq.times();
    return j.dump();
}

namespace {

nlohmann::json parse_object(const std::string& text, const char* what) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw validation_error(std::string(what) + ": invalid JSON: " + e.what());
    }
    if (!j.is_object()) throw validation_error(std::string(what) + ": expected a JSON object");
    return j;
}

void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                         const char* what) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) ok = true;
        if (!ok) throw validation_error(std::string(what) + ": unknown field \"" + it.key() + "\"");
    }
}

}  // namespace

PulseSequence parse_sequence(const std::string& text) {
    nlohmann::json j = parse_object(text, "sequence");
    reject_unknown_keys(j, {"times"}, "sequence");
    if (!j.contains("times") || !j["times"].is_array())
        throw validation_error("sequence: missing \"times\" array");
    std::vector<double> times;
    times.reserve(j["times"].size());
    for (std::size_t i = 0; i < j["times"].size(); ++i) {
        const auto& v = j["times"][i];
        if (!v.is_number())
            throw validation_error("times[" + std::to_string(i) + "]: not a number");
        times.push_back(v.get<double>());
    }
    return PulseSequence(std::move(times));
}

std::string serialize(const MultiQubitPulseProgram& prog) {
    nlohmann::json j;
    j["n_qubits"] = prog.n_qubits;
    j["p"] = prog.p;
    j["q"] = prog.q;
    nlohmann::json pulses = nlohmann::json::array();
    for (const MultiQubitPulse& pl : prog.pulses) pulses.push_back({{"s", pl.s}, {"l", pl.qubit}});
    j["pulses"] = pulses;
    return j.dump();
}

MultiQubitPulseProgram parse_multiqubit_program(const std::string& text) {
    nlohmann::json j = parse_object(text, "multiqubit program");
    reject_unknown_keys(j, {"n_qubits", "pulses", "p", "q"}, "multiqubit program");
    for (const char* k : {"n_qubits", "p", "q"})
        if (!j.contains(k) || !j[k].is_number_integer())
            throw validation_error(std::string("multiqubit program: missing integer \"") + k + "\"");
    if (!j.contains("pulses") || !j["pulses"].is_array())
        throw validation_error("multiqubit program: missing \"pulses\" array");
    MultiQubitPulseProgram prog;
    prog.n_qubits = j["n_qubits"].get<int>();
    const auto p = j["p"].get<long long>();
    const auto q = j["q"].get<long long>();
    if (p < 0 || q < 0) throw validation_error("multiqubit program: level codes must be >= 0");
    prog.p = static_cast<std::uint32_t>(p);
    prog.q = static_cast<std::uint32_t>(q);
    for (std::size_t i = 0; i < j["pulses"].size(); ++i) {
        const auto& e = j["pulses"][i];
        if (!e.is_object() || !e.contains("s") || !e.contains("l") || !e["s"].is_number() ||
            !e["l"].is_number_integer())
            throw validation_error("pulses[" + std::to_string(i) + "]: expected {\"s\": number, \"l\": int}");
        reject_unknown_keys(e, {"s", "l"}, "multiqubit pulse");
        prog.pulses.push_back({e["s"].get<double>(), e["l"].get<int>()});
    }
    validate(prog);
    return prog;
}

}  // namespace dd
