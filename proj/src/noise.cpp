#include "dd/noise.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <mutex>

#include <json.hpp>

#include "dd/errors.hpp"
#include "dd/quadrature.hpp"

namespace dd {

namespace {

const double kPi = 3.14159265358979323846264338327950288;

double factorial(int n) {
    double f = 1;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

// Truncated Chebyshev series on [a,b] with Clenshaw evaluation; coef[0] is the
// halved constant term.
struct ChebyshevSeries {
    double a = 0, b = 1;
    std::vector<double> coef;

    double eval(double x) const {
        const double u = (2.0 * x - a - b) / (b - a);
        double b1 = 0, b2 = 0;
        for (std::size_t k = coef.size(); k-- > 1;) {
            double bk = coef[k] + 2.0 * u * b1 - b2;
            b2 = b1;
            b1 = bk;
        }
        return coef[0] + u * b1 - b2;
    }
};

ChebyshevSeries fit_chebyshev(const std::function<double(double)>& f, double a, double b,
                              double tol) {
    ChebyshevSeries out;
    out.a = a;
    out.b = b;
    for (int n = 64; n <= 2048; n *= 2) {
        std::vector<double> fv(static_cast<std::size_t>(n) + 1);
        for (int j = 0; j <= n; ++j) {
            double x = a + (b - a) * 0.5 * (std::cos(kPi * j / n) + 1.0);
            fv[static_cast<std::size_t>(j)] = f(x);
        }
        std::vector<double> coef(static_cast<std::size_t>(n) + 1);
        for (int k = 0; k <= n; ++k) {
            double s = 0.5 * (fv[0] + (k % 2 == 0 ? fv[static_cast<std::size_t>(n)]
                                                  : -fv[static_cast<std::size_t>(n)]));
            for (int j = 1; j < n; ++j)
                s += fv[static_cast<std::size_t>(j)] * std::cos(kPi * j * k / n);
            coef[static_cast<std::size_t>(k)] = 2.0 * s / n;
        }
        coef[0] *= 0.5;
        double maxc = 0;
        for (double c : coef) maxc = std::max(maxc, std::fabs(c));
        double tail = 0;
        for (int k = n - 3; k <= n; ++k)
            tail = std::max(tail, std::fabs(coef[static_cast<std::size_t>(k)]));
        if (tail <= tol * std::max(maxc, 1e-300) || n == 2048) {
            std::size_t keep = coef.size();
            while (keep > 4 && std::fabs(coef[keep - 1]) < 0.1 * tol * maxc) --keep;
            coef.resize(keep);
            out.coef = std::move(coef);
            return out;
        }
    }
    return out;  // unreachable
}

}  // namespace

struct NoiseModel::Impl {
    NoiseFamily family = NoiseFamily::ExponentialCorrelation;
    double alpha = 0;
    int K = 0;
    double omega_c_soft = 0;
    double tc = 0;
    double sigma = 0;
    std::optional<double> cutoff;

    // Lazily built correlation interpolant for hard-cutoff models (write-once,
    // safe for concurrent readers).
    mutable std::mutex memo_mutex;
    mutable std::shared_ptr<const ChebyshevSeries> corr_memo;

    Impl() = default;
    Impl(const Impl& o)
        : family(o.family), alpha(o.alpha), K(o.K), omega_c_soft(o.omega_c_soft), tc(o.tc),
          sigma(o.sigma), cutoff(o.cutoff) {}

    double spectrum_raw(double w) const {
        w = std::fabs(w);
        switch (family) {
            case NoiseFamily::SoftPowerLaw:
                return alpha / (std::pow(omega_c_soft, 2 * K) + std::pow(w, 2 * K));
            case NoiseFamily::ExponentialCorrelation:
                return 2.0 * tc / (1.0 + (w * tc) * (w * tc));
            case NoiseFamily::GaussianCorrelation: {
                double x = 0.5 * w * sigma;
                return sigma * std::sqrt(kPi) * std::exp(-x * x);
            }
        }
        return 0;
    }

    // Closed-form correlation of the family without any hard cutoff.
    double correlation_closed(double t) const {
        t = std::fabs(t);
        switch (family) {
            case NoiseFamily::SoftPowerLaw: {
                // Exact residue sum over the K decaying poles.
                std::complex<double> acc(0, 0);
                for (int n = 0; n < K; ++n) {
                    double theta = kPi * (2.0 * n + 1.0) / (2.0 * K);
                    std::complex<double> z = std::polar(1.0, theta);
                    acc += std::exp(std::complex<double>(0, 1) * z * (omega_c_soft * t)) *
                           std::polar(1.0, -theta * (2.0 * K - 1.0));
                }
                std::complex<double> pref = std::complex<double>(0, 1) * (alpha / (2.0 * K)) *
                                            std::pow(omega_c_soft, 1.0 - 2.0 * K);
                return (pref * acc).real();
            }
            case NoiseFamily::ExponentialCorrelation:
                return std::exp(-t / tc);
            case NoiseFamily::GaussianCorrelation:
                return std::exp(-(t / sigma) * (t / sigma));
        }
        return 0;
    }

    double t_char() const {
        switch (family) {
            case NoiseFamily::SoftPowerLaw: return 1.0 / omega_c_soft;
            case NoiseFamily::ExponentialCorrelation: return tc;
            case NoiseFamily::GaussianCorrelation: return sigma;
        }
        return 1;
    }

    double omega_char() const {
        switch (family) {
            case NoiseFamily::SoftPowerLaw: return omega_c_soft;
            case NoiseFamily::ExponentialCorrelation: return 1.0 / tc;
            case NoiseFamily::GaussianCorrelation: return 2.0 / sigma;
        }
        return 1;
    }
};

NoiseModel::NoiseModel(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

double NoiseModel::spectrum(double omega) const {
    omega = std::fabs(omega);
    if (impl_->cutoff && omega > *impl_->cutoff) return 0.0;
    return impl_->spectrum_raw(omega);
}

NoiseFamily NoiseModel::family() const { return impl_->family; }
std::optional<double> NoiseModel::hard_cutoff() const { return impl_->cutoff; }
double NoiseModel::t_char() const { return impl_->t_char(); }
double NoiseModel::omega_char() const { return impl_->omega_char(); }

namespace {

[[noreturn]] void wrong_family(const char* param) {
    throw validation_error(std::string("noise model parameter \"") + param +
                           "\" not defined for this family");
}

}  // namespace

double NoiseModel::alpha() const {
    if (impl_->family != NoiseFamily::SoftPowerLaw) wrong_family("alpha");
    return impl_->alpha;
}
int NoiseModel::K() const {
    if (impl_->family != NoiseFamily::SoftPowerLaw) wrong_family("K");
    return impl_->K;
}
double NoiseModel::omega_c_soft() const {
    if (impl_->family != NoiseFamily::SoftPowerLaw) wrong_family("omega_c_soft");
    return impl_->omega_c_soft;
}
double NoiseModel::tc() const {
    if (impl_->family != NoiseFamily::ExponentialCorrelation) wrong_family("tc");
    return impl_->tc;
}
double NoiseModel::sigma_t() const {
    if (impl_->family != NoiseFamily::GaussianCorrelation) wrong_family("sigma_t");
    return impl_->sigma;
}

NoiseModel make_soft_power_law(double alpha, int K, double omega_c_soft) {
    if (!(alpha > 0)) throw validation_error("make_soft_power_law: alpha must be > 0");
    if (K < 1) throw validation_error("make_soft_power_law: K must be >= 1");
    if (K > 16) throw validation_error("make_soft_power_law: K > 16 unsupported");
    if (!(omega_c_soft > 0))
        throw validation_error("make_soft_power_law: omega_c_soft must be > 0");
    auto impl = std::make_shared<NoiseModel::Impl>();
    impl->family = NoiseFamily::SoftPowerLaw;
    impl->alpha = alpha;
    impl->K = K;
    impl->omega_c_soft = omega_c_soft;
    return NoiseModel(std::move(impl));
}

NoiseModel make_exponential_correlation(double tc) {
    if (!(tc > 0)) throw validation_error("make_exponential_correlation: tc must be > 0");
    auto impl = std::make_shared<NoiseModel::Impl>();
    impl->family = NoiseFamily::ExponentialCorrelation;
    impl->tc = tc;
    return NoiseModel(std::move(impl));
}

NoiseModel make_gaussian_correlation(double sigma_t) {
    if (!(sigma_t > 0)) throw validation_error("make_gaussian_correlation: sigma_t must be > 0");
    auto impl = std::make_shared<NoiseModel::Impl>();
    impl->family = NoiseFamily::GaussianCorrelation;
    impl->sigma = sigma_t;
    return NoiseModel(std::move(impl));
}

NoiseModel with_hard_cutoff(const NoiseModel& model, double omega_c) {
    if (!(omega_c > 0)) throw validation_error("with_hard_cutoff: omega_c must be > 0");
    auto impl = std::make_shared<NoiseModel::Impl>(*model.impl_);
    if (impl->cutoff)
        impl->cutoff = std::min(*impl->cutoff, omega_c);
    else
        impl->cutoff = omega_c;
    return NoiseModel(std::move(impl));
}

namespace {

// Tail integral_x^inf of the raw soft power-law spectrum; alternating series
// in (Omega/x)^{2K}, accurate for x >= ~3 Omega.
double soft_tail_mass(double alpha, int K, double Omega, double x) {
    double sum = 0;
    for (int n = 0; n < 12; ++n) {
        double p = 2.0 * K * (n + 1.0) - 1.0;
        double term = std::pow(Omega, 2.0 * K * n) * std::pow(x, -p) / p;
        sum += (n % 2 == 0) ? term : -term;
    }
    return alpha * sum;
}

// Mass of the raw family (no cutoff): integral_0^inf S = pi C(0).
double total_mass_raw(const NoiseModel& m) {
    switch (m.family()) {
        case NoiseFamily::SoftPowerLaw:
            return m.alpha() * std::pow(m.omega_c_soft(), 1.0 - 2.0 * m.K()) * kPi /
                   (2.0 * m.K() * std::sin(kPi / (2.0 * m.K())));
        case NoiseFamily::ExponentialCorrelation: return kPi;
        case NoiseFamily::GaussianCorrelation: return kPi;
    }
    return 0;
}

double partial_mass_raw(const NoiseModel& m, double W) {
    if (W <= 0) return 0;
    switch (m.family()) {
        case NoiseFamily::ExponentialCorrelation: return 2.0 * std::atan(W * m.tc());
        case NoiseFamily::GaussianCorrelation: return kPi * std::erf(0.5 * W * m.sigma_t());
        case NoiseFamily::SoftPowerLaw: {
            const double Om = m.omega_c_soft();
            const double split = 10.0 * Om;
            if (W >= split) return total_mass_raw(m) - soft_tail_mass(m.alpha(), m.K(), Om, W);
            auto f = [&](double w) {
                return m.alpha() / (std::pow(Om, 2 * m.K()) + std::pow(w, 2 * m.K()));
            };
            QuadResult r = integrate_adaptive(f, uniform_breaks(0.0, W, 16), 1e-12,
                                              1e-12 * total_mass_raw(m), 2000);
            return r.value;
        }
    }
    return 0;
}

}  // namespace

double total_spectral_mass(const NoiseModel& model) {
    if (model.hard_cutoff()) return partial_mass_raw(model, *model.hard_cutoff());
    return total_mass_raw(model);
}

double spectral_mass(const NoiseModel& model, double W) {
    if (model.hard_cutoff()) W = std::min(W, *model.hard_cutoff());
    return partial_mass_raw(model, W);
}

double correlation_via_spectrum(const NoiseModel& model, double t, double rel_tol) {
    t = std::fabs(t);
    const double w0 = model.omega_char();
    const double scale = std::max(total_mass_raw(model) / kPi, 1e-300);
    const double abs_tol = 0.25 * rel_tol * scale;

    // Integration endpoint: hard cutoff when present, otherwise extend until
    // both the mass tail and the oscillation-aware (first half-period) tail
    // bound S(w)*pi/t are below the absolute budget.
    double wend;
    if (model.hard_cutoff()) {
        wend = *model.hard_cutoff();
    } else {
        wend = 8.0 * w0;
        for (int i = 0; i < 60; ++i) {
            double mass_tail = total_mass_raw(model) - partial_mass_raw(model, wend);
            double osc_tail = (t > 0) ? model.spectrum(wend) * kPi / t : mass_tail;
            if (std::min(mass_tail, osc_tail) / kPi <= abs_tol) break;
            wend *= 1.5;
        }
    }

    // Initial panels: linear through the spectral peak, then geometric.
    std::vector<double> breaks;
    double step = w0 / 8.0;
    for (double w = 0; w < std::min(wend, 8.0 * w0); w += step) breaks.push_back(w);
    for (double w = 8.0 * w0; w < wend; w *= 1.5) breaks.push_back(w);
    breaks.push_back(wend);
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    auto f = [&](double w) { return model.spectrum(w) * std::cos(w * t) / kPi; };
    QuadResult r = integrate_adaptive(f, breaks, rel_tol, abs_tol, 60000);
    if (!r.converged)
        throw numerical_error("correlation_via_spectrum: quadrature did not converge (error " +
                              std::to_string(r.error) + ")");
    return r.value;
}

double NoiseModel::correlation(double t) const {
    t = std::fabs(t);
    if (!impl_->cutoff) return impl_->correlation_closed(t);

    const double t_max = 12.0 * impl_->t_char();
    if (t > t_max) return correlation_via_spectrum(*this, t, 1e-9);

    std::shared_ptr<const ChebyshevSeries> memo;
    {
        std::lock_guard<std::mutex> lock(impl_->memo_mutex);
        memo = impl_->corr_memo;
    }
    if (!memo) {
        auto f = [this](double tt) { return correlation_via_spectrum(*this, tt, 1e-10); };
        auto built = std::make_shared<const ChebyshevSeries>(fit_chebyshev(f, 0.0, t_max, 1e-8));
        std::lock_guard<std::mutex> lock(impl_->memo_mutex);
        if (!impl_->corr_memo) impl_->corr_memo = built;  // write-once
        memo = impl_->corr_memo;
    }
    return memo->eval(t);
}

CorrelationExpansion correlation_expansion(const NoiseModel& model, int k_max) {
    if (k_max < 0) throw validation_error("correlation_expansion: k_max must be >= 0");
    CorrelationExpansion out;
    out.coeffs.assign(static_cast<std::size_t>(k_max) + 1, 0.0);

    if (model.hard_cutoff()) {
        // Truncated spectrum is entire: only even terms survive,
        // C_{k} = (-1)^{k/2} / (pi k!) * integral_0^wc S w^k dw.
        const double wc = *model.hard_cutoff();
        for (int k = 0; k <= k_max; k += 2) {
            auto f = [&](double w) { return model.spectrum(w) * std::pow(w, k); };
            QuadResult r =
                integrate_adaptive(f, uniform_breaks(0.0, wc, 64), 1e-12, 1e-300, 4000);
            double sign = (k / 2) % 2 == 0 ? 1.0 : -1.0;
            out.coeffs[static_cast<std::size_t>(k)] = sign * r.value / (kPi * factorial(k));
        }
        out.leading_odd = std::nullopt;
        return out;
    }

    switch (model.family()) {
        case NoiseFamily::ExponentialCorrelation: {
            const double tc = model.tc();
            for (int k = 0; k <= k_max; ++k) {
                double sign = (k % 2 == 0) ? 1.0 : -1.0;
                out.coeffs[static_cast<std::size_t>(k)] =
                    sign / (factorial(k) * std::pow(tc, k));
            }
            out.leading_odd = 1;
            return out;
        }
        case NoiseFamily::GaussianCorrelation: {
            const double sg = model.sigma_t();
            for (int k = 0; k <= k_max; k += 2) {
                int mm = k / 2;
                double sign = (mm % 2 == 0) ? 1.0 : -1.0;
                out.coeffs[static_cast<std::size_t>(k)] =
                    sign / (factorial(mm) * std::pow(sg, k));
            }
            out.leading_odd = std::nullopt;
            return out;
        }
        case NoiseFamily::SoftPowerLaw: {
            const double a = model.alpha();
            const int K = model.K();
            const double Om = model.omega_c_soft();
            for (int m = 0; m <= k_max; ++m) {
                double& C = out.coeffs[static_cast<std::size_t>(m)];
                if (m % 2 == 0) {
                    double sign = ((m / 2 + 1) % 2 == 0) ? 1.0 : -1.0;
                    double s = std::sin(kPi * (m - 2.0 * K + 1.0) / (2.0 * K));
                    C = (a / (2.0 * K)) * std::pow(Om, m + 1.0 - 2.0 * K) * sign /
                        (factorial(m) * s);
                } else if ((m + 1) % (2 * K) == 0) {
                    int jp1 = (m + 1) / (2 * K);  // j+1
                    int parity = (K * jp1 + (jp1 - 1)) % 2;
                    double sign = (parity == 0) ? 1.0 : -1.0;
                    C = (a / 2.0) * std::pow(Om, m + 1.0 - 2.0 * K) * sign / factorial(m);
                } else {
                    C = 0.0;
                }
            }
            out.leading_odd = 2 * K - 1;
            return out;
        }
    }
    throw numerical_error("correlation_expansion: expansion unavailable for this model");
}

SpectrumTail spectrum_tail_descriptor(const NoiseModel& model) {
    SpectrumTail tail;
    if (model.hard_cutoff()) {
        tail.hard_cutoff = true;
        return tail;
    }
    switch (model.family()) {
        case NoiseFamily::SoftPowerLaw:
            tail.alpha = model.alpha();
            tail.P = 2.0 * model.K();
            return tail;
        case NoiseFamily::ExponentialCorrelation:
            tail.alpha = 2.0 / model.tc();
            tail.P = 2.0;
            return tail;
        case NoiseFamily::GaussianCorrelation:
            tail.hard_cutoff = true;  // faster-than-any-power decay
            return tail;
    }
    return tail;
}

std::string serialize(const NoiseModel& model) {
    nlohmann::json j;
    switch (model.family()) {
        case NoiseFamily::SoftPowerLaw:
            j["family"] = "soft_power_law";
            j["alpha"] = model.alpha();
            j["K"] = model.K();
            j["omega_c_soft"] = model.omega_c_soft();
            break;
        case NoiseFamily::ExponentialCorrelation:
            j["family"] = "exp_corr";
            j["tc"] = model.tc();
            break;
        case NoiseFamily::GaussianCorrelation:
            j["family"] = "gauss_corr";
            j["sigma_t"] = model.sigma_t();
            break;
    }
    if (model.hard_cutoff())
        j["hard_cutoff"] = *model.hard_cutoff();
    else
        j["hard_cutoff"] = nullptr;
    return j.dump();
}

NoiseModel parse_noise(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw validation_error(std::string("noise spec: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw validation_error("noise spec: expected a JSON object");
    if (!j.contains("family") || !j["family"].is_string())
        throw validation_error("noise spec: missing \"family\" string");
    const std::string family = j["family"].get<std::string>();

    auto need_number = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_number())
            throw validation_error(std::string("noise spec: missing number \"") + key + "\"");
        return j[key].get<double>();
    };
    auto check_keys = [&](std::initializer_list<const char*> allowed) {
        for (auto it = j.begin(); it != j.end(); ++it) {
            bool ok = false;
            for (const char* k : allowed)
                if (it.key() == k) ok = true;
            if (!ok)
                throw validation_error("noise spec: unknown field \"" + it.key() + "\"");
        }
    };

    NoiseModel base = [&] {
        if (family == "soft_power_law") {
            check_keys({"family", "alpha", "K", "omega_c_soft", "hard_cutoff"});
            if (!j.contains("K") || !j["K"].is_number_integer())
                throw validation_error("noise spec: missing integer \"K\"");
            return make_soft_power_law(need_number("alpha"), j["K"].get<int>(),
                                       need_number("omega_c_soft"));
        }
        if (family == "exp_corr") {
            check_keys({"family", "tc", "hard_cutoff"});
            return make_exponential_correlation(need_number("tc"));
        }
        if (family == "gauss_corr") {
            check_keys({"family", "sigma_t", "hard_cutoff"});
            return make_gaussian_correlation(need_number("sigma_t"));
        }
        throw validation_error("noise spec: unknown family \"" + family + "\"");
    }();

    if (j.contains("hard_cutoff") && !j["hard_cutoff"].is_null()) {
        if (!j["hard_cutoff"].is_number())
            throw validation_error("noise spec: \"hard_cutoff\" must be a number or null");
        return with_hard_cutoff(base, j["hard_cutoff"].get<double>());
    }
    return base;
}

}  // namespace dd
