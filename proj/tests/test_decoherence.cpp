#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <nlohmann/json.hpp>
#include <vector>

#include "dd/decoherence.hpp"
#include "dd/errors.hpp"
#include "dd/noise.hpp"
#include "dd/rng.hpp"
#include "dd/sequences.hpp"

using namespace dd;
using cplx = std::complex<double>;

namespace {

constexpr double kPi = 3.14159265358979323846;

PulseSequence random_sequence(SplitMix64& rng, int n_max, double min_sep = 1e-3) {
    for (;;) {
        int n = 1 + static_cast<int>(rng.next() % n_max);
        std::vector<double> t(n);
        for (double& x : t) x = rng.uniform01();
        std::sort(t.begin(), t.end());
        bool ok = t.front() > min_sep && t.back() < 1.0 - min_sep;
        for (int i = 0; i + 1 < n; ++i)
            if (t[i + 1] - t[i] < min_sep) ok = false;
        if (ok) return PulseSequence(t);
    }
}

}  // namespace

TEST_CASE("moment closed forms") {
    Modulation free_mod = modulation_of(PulseSequence{});
    Modulation hahn = modulation_of(PulseSequence({0.5}));
    CHECK(lambda_m(free_mod, 0) == cplx(1.0, 0.0));
    CHECK(std::abs(lambda_m(hahn, 0)) < 1e-16);
    CHECK(lambda_m(hahn, 1).real() == doctest::Approx(-0.25).epsilon(1e-15));
    for (int n = 1; n <= 12; ++n) {
        Modulation udd = modulation_of(make_udd(n));
        for (int m = 0; m < n; ++m) CHECK(std::abs(lambda_m(udd, m)) < 1e-12);
    }
    CHECK_THROWS_AS(lambda_m(free_mod, -1), validation_error);
}

TEST_CASE("filter evaluations") {
    Modulation free_mod = modulation_of(PulseSequence{});
    Modulation hahn = modulation_of(PulseSequence({0.5}));

    // u = 0 returns lambda_0 exactly
    CHECK(filter(free_mod, 0.0).value == lambda_m(free_mod, 0));
    CHECK(std::abs(filter(hahn, 0.0).value - lambda_m(hahn, 0)) < 1e-16);

    for (double u : {0.3, 2.0, 17.5}) {
        cplx expect = (std::exp(cplx(0, u)) - 1.0) / cplx(0, u);
        FilterEvaluation f = filter(free_mod, u);
        CHECK(std::abs(f.value - expect) < 1e-14);
        CHECK(f.abs2 == doctest::Approx(std::norm(f.value)).epsilon(1e-15));
        CHECK(f.u == u);
    }

    // Hahn at u = 2 pi: segment sum gives 2i/pi
    FilterEvaluation h = filter(hahn, 2.0 * kPi);
    CHECK(std::abs(h.value - cplx(0.0, 2.0 / kPi)) < 1e-14);

    // continuity across the tiny-u series switch: the segment sum just above
    // the threshold cancels to ~1e-16/u, so the step must stay below ~1e-9
    for (const Modulation& mod : {free_mod, hahn, modulation_of(make_udd(4))}) {
        cplx below = filter(mod, 0.999e-6).value;
        cplx above = filter(mod, 1.001e-6).value;
        CHECK(std::abs(below - above) < 1e-8);
        // the series branch itself is exact to machine precision
        FilterEvaluator fe(mod);
        CHECK(std::abs(below - fe.tail_series(0.999e-6, 0)) < 1e-14);
    }
}

TEST_CASE("filter bounds on a log grid") {
    std::vector<Modulation> mods = {modulation_of(PulseSequence{}),
                                    modulation_of(PulseSequence({0.5})),
                                    modulation_of(make_udd(5)), modulation_of(make_cpmg(8))};
    for (const Modulation& mod : mods) {
        double a = mod.jump_bound();
        for (int i = 0; i <= 70; ++i) {
            double u = 1e-3 * std::pow(10.0, 7.0 * i / 70.0);
            double mag = std::abs(filter(mod, u).value);
            CHECK(mag <= mod.l1_norm() * (1.0 + 1e-12));  // = 1 for exact-pi
            CHECK(mag <= a / u * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("moment-series evaluator agrees with the segment sum") {
    for (const Modulation& mod :
         {modulation_of(make_udd(3)), modulation_of(make_cpmg(6)),
          modulation_of(PulseSequence({0.11, 0.43, 0.77}))}) {
        FilterEvaluator fe(mod);
        for (double u : {1e-8, 0.02, 0.7, 1.5, 1.999999, 2.000001, 5.0}) {
            CHECK(std::abs(fe.value(u) - filter(mod, u).value) < 1e-13);
            CHECK(fe.abs2(u) == doctest::Approx(std::norm(fe.value(u))).epsilon(1e-15));
        }
    }
    // tail_series with m_start = M reproduces the filter for sequences whose
    // first M moments vanish, without catastrophic cancellation at small u
    FilterEvaluator fe(modulation_of(make_udd(3)));
    for (double u : {1e-6, 1e-3, 0.5, 1.9}) {
        cplx full = fe.tail_series(u, 0);
        cplx dropped = fe.tail_series(u, 3);
        CHECK(std::abs(full - dropped) <= 1e-12 * std::max(1.0, std::abs(full)));
    }
}

TEST_CASE("phi_k known values") {
    PulseSequence free_seq{};
    PulseSequence hahn({0.5});
    CHECK(phi_k_closed(free_seq, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(phi_k_closed(free_seq, 1) == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
    CHECK(phi_k_closed(free_seq, 2) == doctest::Approx(1.0 / 12.0).epsilon(1e-15));
    CHECK(std::fabs(phi_k_closed(hahn, 0)) < 1e-16);
    CHECK(phi_k_closed(hahn, 1) == doctest::Approx(-1.0 / 12.0).epsilon(1e-14));
    CHECK(phi_k_closed(make_cpmg(2), 1) == doctest::Approx(-1.0 / 48.0).epsilon(1e-13));
    CHECK_THROWS_AS(phi_k_closed(hahn, -1), validation_error);
}

TEST_CASE("brute-force quadrature is an oracle for the closed form") {
    CHECK(phi_k_bruteforce(modulation_of(PulseSequence{}), 2) ==
          doctest::Approx(1.0 / 12.0).epsilon(1e-12));

    SplitMix64 rng(0xc001);
    for (int trial = 0; trial < 30; ++trial) {
        PulseSequence seq = random_sequence(rng, 8);
        Modulation mod = modulation_of(seq);
        int k = static_cast<int>(rng.next() % 8);
        double closed = phi_k_closed(seq, k);
        CHECK(std::fabs(closed - phi_k_bruteforce(mod, k)) < 1e-9);
        CHECK(std::fabs(closed - phi_k_bruteforce(mod, k, 2)) < 1e-9);
    }
}

TEST_CASE("brute force handles non-pi modulations") {
    // constant F = +2 (two-qubit |11> vs |00| coherence): phi_0 = 4 * 1/2
    MultiQubitPulseProgram prog;
    prog.n_qubits = 2;
    prog.p = 0b11;
    prog.q = 0b00;
    Modulation mod = multiqubit_modulation(prog);
    CHECK(phi_k_bruteforce(mod, 0) == doctest::Approx(2.0).epsilon(1e-12));
    // and a genuinely complex sampled modulation stays finite and consistent
    Modulation samp = Modulation::sampled({{0.5, 0.5}, {-1.0, 0.25}, {0.0, -0.75}, {1.0, 0.0}});
    double v1 = phi_k_bruteforce(samp, 1);
    double v2 = phi_k_bruteforce(samp, 1, 3);
    CHECK(std::fabs(v1 - v2) < 1e-11);
}

TEST_CASE("even orders reduce to the moment bilinear") {
    SplitMix64 rng(0xc002);
    for (int trial = 0; trial < 20; ++trial) {
        PulseSequence seq = random_sequence(rng, 8);
        Modulation mod = modulation_of(seq);
        for (int m = 0; m <= 3; ++m)
            CHECK(std::fabs(phi_k_closed(seq, 2 * m) - phi_even_bilinear(mod, m)) < 1e-12);
    }
}

TEST_CASE("order conditions kill the even orders and only them") {
    for (int n = 1; n <= 8; ++n) {
        PulseSequence udd = make_udd(n);
        Modulation mod = modulation_of(udd);
        for (int m = 0; m < n; ++m) {
            CHECK(std::abs(lambda_m(mod, m)) < 1e-12);
            CHECK(std::fabs(phi_k_closed(udd, 2 * m)) < 1e-10);
        }
    }
    // conversely phi_0 = |lambda_0|^2 / 2 exactly when lambda_0 is far from 0
    SplitMix64 rng(0xc003);
    int found = 0;
    while (found < 10) {
        PulseSequence seq = random_sequence(rng, 6);
        double l0 = lambda_m(modulation_of(seq), 0).real();
        if (std::fabs(l0) <= 0.1) continue;
        ++found;
        double phi0 = phi_k_closed(seq, 0);
        CHECK(phi0 > 0.0);
        CHECK(phi0 == doctest::Approx(0.5 * l0 * l0).epsilon(1e-13));
    }
}

TEST_CASE("leading odd order via the spectral residual") {
    CHECK(phi_odd_spectral(PulseSequence({0.5}), 1) ==
          doctest::Approx(-1.0 / 12.0).epsilon(1e-8));
    CHECK(phi_odd_spectral(make_udd(3), 3) ==
          doctest::Approx(phi_k_closed(make_udd(3), 5)).epsilon(1e-7));
    for (int n = 1; n <= 6; ++n) {
        for (int M = 1; M <= n; ++M) {
            double spec = phi_odd_spectral(make_udd(n), M);
            double closed = phi_k_closed(make_udd(n), 2 * M - 1);
            CHECK(std::fabs(spec - closed) <= 1e-7 * std::fabs(closed));
            CHECK(((M % 2 == 0) ? spec : -spec) > 0.0);  // (-1)^M phi_{2M-1} > 0
        }
    }
    // free evolution has lambda_0 = 1: the M = 1 integral diverges at u = 0
    CHECK_THROWS_WITH_AS(phi_odd_spectral(PulseSequence{}, 1),
                         doctest::Contains("constraints not satisfied"), numerical_error);
    CHECK_THROWS_AS(phi_odd_spectral(make_udd(2), 3), numerical_error);
}

TEST_CASE("spectral overlap: flat-spectrum limit and positivity") {
    // near-flat spectrum: soft K=1 with Omega >> cutoff, S ~ alpha/Omega^2
    double S0 = 2.0, Om = 1e3;
    NoiseModel flat = with_hard_cutoff(make_soft_power_law(S0 * Om * Om, 1, Om), 1.0);
    double T = 1e-3;
    ChiResult c = chi_spectral(modulation_of(PulseSequence{}), flat, T);
    CHECK(c.value == doctest::Approx(S0 * 1.0 * T * T / (2.0 * kPi)).epsilon(1e-3));

    // chi scales linearly with alpha, so a tiny spectrum gives a tiny chi
    NoiseModel tiny = make_soft_power_law(1e-290, 1, 1.0);
    CHECK(std::fabs(chi_spectral(modulation_of(make_cpmg(2)), tiny, 1.0).value) < 1e-280);

    NoiseModel soft = make_soft_power_law(1e5, 2, 1.0);
    NoiseModel cut = with_hard_cutoff(soft, 40.0);
    for (int n : {0, 1, 3, 6}) {
        PulseSequence seq = n == 0 ? PulseSequence{} : make_udd(n);
        Modulation mod = modulation_of(seq);
        for (double T2 : {0.05, 0.5, 2.0}) {
            ChiResult a = chi_spectral(mod, soft, T2);
            ChiResult b = chi_spectral(mod, cut, T2);
            CHECK(a.value >= -a.error);
            CHECK(b.value >= -b.error);
            CHECK(b.value <= a.value * (1.0 + 1e-9));  // removing spectrum cannot raise chi
        }
    }
}

TEST_CASE("short-time series") {
    CorrelationExpansion c0only;
    c0only.coeffs = {0.37};
    ChiResult free_chi = chi_series(PulseSequence{}, c0only, 0.2, 0);
    CHECK(free_chi.value == doctest::Approx(0.37 * 0.5 * 0.04).epsilon(1e-15));
    ChiResult hahn_chi = chi_series(PulseSequence({0.5}), c0only, 0.2, 0);
    CHECK(std::fabs(hahn_chi.value) < 1e-18);

    NoiseModel exp_noise = make_exponential_correlation(1.0);
    CorrelationExpansion e = correlation_expansion(exp_noise, 8);
    ChiResult series = chi_series(PulseSequence({0.5}), e, 0.1, 8);
    ChiResult spectral = chi_spectral(modulation_of(PulseSequence({0.5})), exp_noise, 0.1);
    double tol = std::max(0.01 * spectral.value, 3.0 * (series.error + spectral.error));
    CHECK(std::fabs(series.value - spectral.value) <= tol);

    CHECK_THROWS_WITH_AS(chi_series(PulseSequence({0.5}), e, 5.0, 8),
                         doctest::Contains("series unreliable"), numerical_error);
}

TEST_CASE("decoupling order fits") {
    NoiseModel exp_noise = make_exponential_correlation(1.0);
    std::vector<double> grid;
    for (int i = 0; i < 5; ++i) grid.push_back(1e-3 * std::pow(10.0, i / 4.0));
    SlopeFit f = decoupling_order(exp_noise, [](int n) { return make_udd(n); }, 4, grid);
    CHECK(f.slope == doctest::Approx(3.0).epsilon(0.04));
    CHECK(f.points == 5);
    CHECK(f.std_error < 0.05);

    // hard-cutoff-like noise: slope tracks 2N+2
    NoiseModel g = make_gaussian_correlation(1.0);
    for (int n = 1; n <= 3; ++n) {
        std::vector<double> tg;
        for (int i = 0; i < 7; ++i) tg.push_back(0.01 * std::pow(10.0, i / 6.0));
        SlopeFit gf = decoupling_order(g, [](int k) { return make_udd(k); }, n, tg);
        CHECK(gf.slope == doctest::Approx(2.0 * n + 2.0).epsilon(0.02));
    }

    // a repeated T gives equal chi values: the strict-monotonicity gate fires
    CHECK_THROWS_AS(
        decoupling_order(exp_noise, [](int n) { return make_udd(n); }, 4,
                         std::vector<double>{0.01, 0.01, 0.02}),
        numerical_error);
}

TEST_CASE("report assembly and JSON") {
    PulseSequence seq = make_udd(3);
    NoiseModel noise = make_exponential_correlation(1.0);
    DecoherenceReport rep = make_report(seq, noise, 0.3, 4, 6, "spectral");
    REQUIRE(rep.lambda.size() == 5);
    REQUIRE(rep.phi.size() == 7);
    CHECK(rep.method == "spectral");
    CHECK(rep.chi == chi_spectral(modulation_of(seq), noise, 0.3).value);
    CHECK(rep.phi[1] == phi_k_closed(seq, 1));

    DecoherenceReport srep = make_report(seq, noise, 0.01, 2, 6, "series");
    CorrelationExpansion e = correlation_expansion(noise, 6);
    CHECK(srep.chi == chi_series(seq, e, 0.01, 6).value);

    auto j = nlohmann::json::parse(serialize(rep));
    REQUIRE(j.contains("lambda"));
    REQUIRE(j.contains("phi"));
    REQUIRE(j.contains("chi"));
    REQUIRE(j.contains("chi_err"));
    CHECK(j["method"] == "spectral");
    CHECK(j["lambda"].size() == 5);
    CHECK(j["phi"].size() == 7);
    CHECK(j["chi"].get<double>() == rep.chi);  // full-precision round trip

    CHECK_THROWS_AS(make_report(seq, noise, 0.3, 4, 6, "exact"), validation_error);
}
