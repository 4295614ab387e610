#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <thread>
#include <vector>

#include "dd/errors.hpp"
#include "dd/noise.hpp"
#include "dd/rng.hpp"

using namespace dd;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("exponential-correlation family") {
    NoiseModel m = make_exponential_correlation(1.0);
    CHECK(m.correlation(0.0) == 1.0);
    CHECK(m.correlation(0.7) == doctest::Approx(std::exp(-0.7)).epsilon(1e-15));
    CHECK(m.spectrum(0.0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(m.spectrum(3.0) == doctest::Approx(2.0 / 10.0).epsilon(1e-15));
    CHECK(m.tc() == 1.0);
    CHECK(m.t_char() == 1.0);
    CHECK_FALSE(m.hard_cutoff().has_value());

    NoiseModel m2 = make_exponential_correlation(0.5);
    CHECK(m2.spectrum(0.0) == doctest::Approx(1.0).epsilon(1e-15));

    CorrelationExpansion e = correlation_expansion(m, 4);
    REQUIRE(e.coeffs.size() == 5);
    CHECK(e.coeffs[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(e.coeffs[1] == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(e.coeffs[2] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(e.leading_odd == 1);

    SpectrumTail tail = spectrum_tail_descriptor(m);
    CHECK_FALSE(tail.hard_cutoff);
    CHECK(tail.alpha == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(tail.P == 2.0);

    CHECK_THROWS_AS(m.alpha(), validation_error);  // not a soft power-law parameter
    CHECK_THROWS_AS(make_exponential_correlation(0.0), validation_error);
}

TEST_CASE("gaussian-correlation family") {
    double sg = 1.7;
    NoiseModel m = make_gaussian_correlation(sg);
    CHECK(m.correlation(0.0) == 1.0);
    CHECK(m.correlation(2.0) == doctest::Approx(std::exp(-(2.0 / sg) * (2.0 / sg))).epsilon(1e-15));
    CHECK(m.spectrum(1.0) ==
          doctest::Approx(sg * std::sqrt(kPi) * std::exp(-sg * sg / 4.0)).epsilon(1e-15));

    CorrelationExpansion e = correlation_expansion(m, 6);
    CHECK(e.coeffs[1] == 0.0);
    CHECK(e.coeffs[3] == 0.0);
    CHECK(e.coeffs[5] == 0.0);
    CHECK(e.coeffs[2] == doctest::Approx(-1.0 / (sg * sg)).epsilon(1e-15));
    CHECK_FALSE(e.leading_odd.has_value());

    CHECK(spectrum_tail_descriptor(m).hard_cutoff);
    CHECK_THROWS_AS(make_gaussian_correlation(-1.0), validation_error);
}

TEST_CASE("soft power-law family") {
    // K = 1 collapses to a single pole: C(t) = (alpha/2 Omega) e^{-Omega |t|}
    double a = 3.7, Om = 2.2;
    NoiseModel k1 = make_soft_power_law(a, 1, Om);
    for (double t : {0.0, 0.3, 1.1, 4.0})
        CHECK(k1.correlation(t) ==
              doctest::Approx(a / (2.0 * Om) * std::exp(-Om * t)).epsilon(1e-14));

    NoiseModel k2 = make_soft_power_law(1e5, 2, 1.0);
    CHECK(k2.spectrum(40.0) == doctest::Approx(1e5 / (1.0 + 2560000.0)).epsilon(1e-15));
    CHECK(k2.spectrum(0.0) == doctest::Approx(1e5).epsilon(1e-15));
    CHECK(make_soft_power_law(a, 3, Om).spectrum(0.0) ==
          doctest::Approx(a / std::pow(Om, 6.0)).epsilon(1e-14));

    CorrelationExpansion e2 = correlation_expansion(make_soft_power_law(a, 2, 1.3), 4);
    CHECK(e2.coeffs[1] == 0.0);
    CHECK(e2.coeffs[3] == doctest::Approx(a / 12.0).epsilon(1e-14));
    CHECK(e2.leading_odd == 3);

    SpectrumTail tail = spectrum_tail_descriptor(k2);
    CHECK_FALSE(tail.hard_cutoff);
    CHECK(tail.alpha == doctest::Approx(1e5).epsilon(1e-15));
    CHECK(tail.P == 4.0);

    CHECK_THROWS_AS(make_soft_power_law(0.0, 2, 1.0), validation_error);
    CHECK_THROWS_AS(make_soft_power_law(1.0, 0, 1.0), validation_error);
    CHECK_THROWS_AS(make_soft_power_law(1.0, 2, -1.0), validation_error);
    CHECK_THROWS_AS(k1.tc(), validation_error);
}

TEST_CASE("leading-odd-term rule for K = 1, 2, 3") {
    double a = 2.9, Om = 1.4;
    for (int K = 1; K <= 3; ++K) {
        NoiseModel m = make_soft_power_law(a, K, Om);
        CorrelationExpansion e = correlation_expansion(m, 2 * K);
        for (int k = 1; k < 2 * K - 1; k += 2) CHECK(e.coeffs[static_cast<std::size_t>(k)] == 0.0);
        CHECK(std::fabs(e.coeffs[static_cast<std::size_t>(2 * K - 1)]) > 0.0);
        CHECK(e.leading_odd == 2 * K - 1);
        // stated closed form of the leading odd coefficient
        double expect = (K % 2 == 0 ? 1.0 : -1.0) * a / (2.0 * std::tgamma(2.0 * K));
        CHECK(e.coeffs[static_cast<std::size_t>(2 * K - 1)] ==
              doctest::Approx(expect).epsilon(1e-13));
    }
}

TEST_CASE("evenness") {
    NoiseModel m = make_soft_power_law(2.0, 2, 1.1);
    for (double x : {0.2, 1.0, 7.7}) {
        CHECK(m.spectrum(x) == m.spectrum(-x));
        CHECK(m.correlation(x) == m.correlation(-x));
    }
}

TEST_CASE("hard cutoff modifies the spectrum only above omega_c") {
    NoiseModel base = make_soft_power_law(1e5, 2, 1.0);
    NoiseModel cut = with_hard_cutoff(base, 40.0);
    CHECK(cut.spectrum(40.0 + 1e-9) == 0.0);
    CHECK(cut.spectrum(200.0) == 0.0);
    CHECK(cut.spectrum(20.0) == base.spectrum(20.0));
    CHECK(cut.hard_cutoff() == 40.0);
    CHECK(spectrum_tail_descriptor(cut).hard_cutoff);

    // correlation is recomputed by inversion of the truncated spectrum
    for (double t : {0.0, 0.05, 0.31, 1.4})
        CHECK(cut.correlation(t) ==
              doctest::Approx(correlation_via_spectrum(cut, t, 1e-10)).epsilon(2e-7));

    // truncated-spectrum expansion: even coefficients, C_0 = mass/pi
    CorrelationExpansion e = correlation_expansion(cut, 4);
    CHECK_FALSE(e.leading_odd.has_value());
    CHECK(e.coeffs[1] == 0.0);
    CHECK(e.coeffs[3] == 0.0);
    CHECK(e.coeffs[0] == doctest::Approx(spectral_mass(cut, 40.0) / kPi).epsilon(1e-9));
    CHECK(e.coeffs[0] == doctest::Approx(cut.correlation(0.0)).epsilon(1e-7));
}

TEST_CASE("Fourier-pair consistency on random times") {
    SplitMix64 rng(0xb001);
    std::vector<NoiseModel> models = {
        make_exponential_correlation(0.8),
        make_gaussian_correlation(1.3),
        make_soft_power_law(4.0, 1, 1.9),
        make_soft_power_law(1e5, 2, 1.0),
    };
    for (const NoiseModel& m : models) {
        double c0 = m.correlation(0.0);
        for (int i = 0; i < 20; ++i) {
            double t = 5.0 * m.t_char() * rng.uniform01();
            double direct = m.correlation(t);
            double inverted = correlation_via_spectrum(m, t, 1e-9);
            double tol = std::max(1e-6 * std::fabs(direct), 1e-9 * c0);
            CHECK(std::fabs(direct - inverted) <= tol);
        }
    }
}

TEST_CASE("expansion truncation vanishes faster than t^k_max") {
    const int k_max = 4;
    for (const NoiseModel& m : {make_exponential_correlation(1.0), make_gaussian_correlation(1.0),
                                make_soft_power_law(3.0, 2, 1.0)}) {
        CorrelationExpansion e = correlation_expansion(m, k_max);
        double prev = 0.0;
        for (int j = 2; j <= 6; ++j) {
            double t = m.t_char() * std::pow(2.0, -j);
            double series = 0.0;
            for (int k = k_max; k >= 0; --k)
                series = series * t + e.coeffs[static_cast<std::size_t>(k)];
            double r = std::fabs(m.correlation(t) - series) / std::pow(t, k_max);
            if (j > 2 && prev > 1e-7 * std::fabs(e.coeffs[0])) CHECK(r < 0.7 * prev);
            prev = r;
        }
    }
}

TEST_CASE("spectral mass") {
    NoiseModel m = make_exponential_correlation(1.0);
    CHECK(total_spectral_mass(m) == doctest::Approx(kPi).epsilon(1e-9));  // pi * C(0)
    CHECK(spectral_mass(m, 1e6) == doctest::Approx(total_spectral_mass(m)).epsilon(1e-5));
    CHECK(spectral_mass(m, 1.0) < spectral_mass(m, 5.0));

    NoiseModel g = make_gaussian_correlation(2.1);
    CHECK(total_spectral_mass(g) == doctest::Approx(kPi).epsilon(1e-9));

    NoiseModel cut = with_hard_cutoff(m, 3.0);
    CHECK(total_spectral_mass(cut) == doctest::Approx(spectral_mass(m, 3.0)).epsilon(1e-12));
    CHECK(spectral_mass(cut, 10.0) == doctest::Approx(total_spectral_mass(cut)).epsilon(1e-12));
}

TEST_CASE("noise JSON round trips") {
    for (const NoiseModel& m : {make_exponential_correlation(0.8), make_gaussian_correlation(1.3),
                                make_soft_power_law(1e5, 2, 1.0),
                                with_hard_cutoff(make_soft_power_law(1e5, 2, 1.0), 40.0)}) {
        NoiseModel back = parse_noise(serialize(m));
        CHECK(back.family() == m.family());
        CHECK(back.hard_cutoff() == m.hard_cutoff());
        for (double w : {0.1, 1.0, 17.0}) CHECK(back.spectrum(w) == m.spectrum(w));
        for (double t : {0.0, 0.4, 2.0})
            CHECK(back.correlation(t) == doctest::Approx(m.correlation(t)).epsilon(1e-9));
    }

    CHECK_THROWS_WITH_AS(parse_noise(R"({"family":"exp_corr","tc":1.0,"bogus":2})"),
                         doctest::Contains("unknown field"), validation_error);
    CHECK_THROWS_WITH_AS(parse_noise(R"({"family":"lorentz","tc":1.0})"),
                         doctest::Contains("unknown family"), validation_error);
    CHECK_THROWS_AS(parse_noise(R"({"family":"exp_corr"})"), validation_error);
    CHECK_THROWS_AS(parse_noise("[]"), validation_error);
    CHECK_NOTHROW(parse_noise(R"({"family":"gauss_corr","sigma_t":1.0,"hard_cutoff":null})"));
}

TEST_CASE("hard-cutoff correlation memo is safe for concurrent readers") {
    NoiseModel cut = with_hard_cutoff(make_gaussian_correlation(1.0), 3.0);
    const std::vector<double> ts = {0.0, 0.2, 0.5, 0.9, 1.7, 2.5};
    std::vector<std::vector<double>> got(4);
    std::vector<std::thread> pool;
    for (auto& slot : got)
        pool.emplace_back([&cut, &ts, &slot] {
            for (double t : ts) slot.push_back(cut.correlation(t));
        });
    for (auto& th : pool) th.join();
    for (int i = 1; i < 4; ++i) CHECK(got[static_cast<std::size_t>(i)] == got[0]);
    for (std::size_t i = 0; i < ts.size(); ++i)
        CHECK(got[0][i] == doctest::Approx(correlation_via_spectrum(cut, ts[i], 1e-10)).epsilon(2e-7));
}
