#include "dd/decoherence.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include <json.hpp>

#include "dd/errors.hpp"
#include "dd/quadrature.hpp"

namespace dd {

namespace {

const double kPi = 3.14159265358979323846264338327950288;
using cplx = std::complex<double>;

double factorial(int n) {
    double f = 1;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

// Gauss-Legendre nodes/weights on [-1,1] by Newton iteration on P_n.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(static_cast<std::size_t>(n), 0.0);
    w.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double pp = 0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1, p1 = 0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            double dz = p0 / pp;
            z -= dz;
            if (std::fabs(dz) < 1e-15) break;
        }
        x[static_cast<std::size_t>(i)] = -z;
        x[static_cast<std::size_t>(n - 1 - i)] = z;
        w[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[static_cast<std::size_t>(n - 1 - i)] = w[static_cast<std::size_t>(i)];
    }
}

}  // namespace

std::complex<double> lambda_m(const Modulation& mod, int m) {
    if (m < 0) throw validation_error("lambda_m: m must be >= 0");
    const auto& b = mod.breaks();
    const auto& v = mod.values();
    // sum_j v_j (b_{j+1}^{m+1} - b_j^{m+1}) / (m+1), exact per segment.
    cplx acc(0, 0);
    double prev_pow = 0.0;  // b_0 = 0
    for (std::size_t j = 0; j < v.size(); ++j) {
        double next_pow = std::pow(b[j + 1], m + 1);
        acc += v[j] * (next_pow - prev_pow);
        prev_pow = next_pow;
    }
    return acc / (m + 1.0);
}

FilterEvaluation filter(const Modulation& mod, double u) {
    FilterEvaluation out;
    out.u = u;
    if (std::fabs(u) < 1e-6) {
        // 6-term Taylor: the segment sum cancels catastrophically here.
        cplx z(0, u), zp(1, 0), acc(0, 0);
        for (int m = 0; m <= 5; ++m) {
            acc += zp * lambda_m(mod, m) / factorial(m);
            zp *= z;
        }
        out.value = acc;
    } else {
        const auto& b = mod.breaks();
        const auto& v = mod.values();
        cplx acc(0, 0);
        cplx prev_e(1, 0);  // e^{iu*0}
        for (std::size_t j = 0; j < v.size(); ++j) {
            cplx next_e = std::polar(1.0, u * b[j + 1]);
            acc += v[j] * (next_e - prev_e);
            prev_e = next_e;
        }
        out.value = acc / cplx(0, u);
    }
    out.abs2 = std::norm(out.value);
    return out;
}

FilterEvaluator::FilterEvaluator(const Modulation& mod) : mod_(mod) {
    // 48 scaled moments cover |u| <= 2 to far below double precision.
    lam_over_fact_.resize(48);
    for (int m = 0; m < 48; ++m)
        lam_over_fact_[static_cast<std::size_t>(m)] = lambda_m(mod, m) / factorial(m);
}

std::complex<double> FilterEvaluator::tail_series(double u, int m_start) const {
    const cplx z(0, u);
    cplx acc(0, 0);
    for (std::size_t m = lam_over_fact_.size(); m-- > static_cast<std::size_t>(m_start);)
        acc = acc * z + lam_over_fact_[m];
    // acc now holds sum_{m>=m_start} c_m z^{m-m_start}
    cplx zp(1, 0);
    for (int i = 0; i < m_start; ++i) zp *= z;
    return acc * zp;
}

std::complex<double> FilterEvaluator::value(double u) const {
    if (std::fabs(u) <= radius()) return tail_series(u, 0);
    return filter(mod_, u).value;
}

double FilterEvaluator::abs2(double u) const { return std::norm(value(u)); }

double phi_k_closed(const PulseSequence& seq, int k) {
    if (k < 0) throw validation_error("phi_k_closed: k must be >= 0");
    const std::vector<double>& s = seq.times();
    const int N = static_cast<int>(s.size());
    const double p = k + 2.0;
    double pairs = 0;
    for (int j = 1; j < N; ++j)
        for (int i = 0; i < j; ++i) {
            // 1-based indices are i+1, j+1; sign (-1)^{(i+1)+(j+1)} = (-1)^{i+j}
            double term = std::pow(s[static_cast<std::size_t>(j)] - s[static_cast<std::size_t>(i)], p);
            pairs += ((i + j) % 2 == 0) ? term : -term;
        }
    double endA = (N % 2 == 0) ? -1.0 : 1.0;  // (-1)^{N+1}
    double sumB = 0;                          // 2 sum_j (-1)^j s_j^{k+2}, j 1-based
    double sumC = 0;                          // 2 sum_i (-1)^{N+1+i} (1-s_i)^{k+2}
    for (int j = 1; j <= N; ++j) {
        double sj = s[static_cast<std::size_t>(j - 1)];
        double tb = std::pow(sj, p);
        sumB += (j % 2 == 0) ? tb : -tb;
        double tcv = std::pow(1.0 - sj, p);
        sumC += ((N + 1 + j) % 2 == 0) ? tcv : -tcv;
    }
    return -(4.0 * pairs + endA + 2.0 * sumB + 2.0 * sumC) / ((k + 1.0) * (k + 2.0));
}

namespace {

// One brute-force pass with each modulation segment split into `panels` equal
// subcells; rectangles by tensor Gauss-Legendre, diagonal triangles by the
// Duffy transform (polynomial integrand, so the rule order is exact).
double phi_k_cells(const Modulation& mod, int k, int panels) {
    const auto& b = mod.breaks();
    const auto& v = mod.values();
    const int n_gl = std::min(k / 2 + 3, 40);
    std::vector<double> gx, gw;
    gauss_legendre(n_gl, gx, gw);

    struct Cell {
        double lo, hi;
        cplx val;
    };
    std::vector<Cell> cells;
    for (std::size_t j = 0; j < v.size(); ++j)
        for (int pnl = 0; pnl < panels; ++pnl) {
            double lo = b[j] + (b[j + 1] - b[j]) * pnl / panels;
            double hi = b[j] + (b[j + 1] - b[j]) * (pnl + 1) / panels;
            cells.push_back({lo, hi, v[j]});
        }

    KahanSum total;
    for (std::size_t c1 = 0; c1 < cells.size(); ++c1) {
        // s1 in cell c1 (outer), s2 in cell c2 < c1: full rectangles.
        for (std::size_t c2 = 0; c2 < c1; ++c2) {
            double wgt = (std::conj(cells[c1].val) * cells[c2].val).real();
            if (wgt == 0.0) continue;
            double h1 = 0.5 * (cells[c1].hi - cells[c1].lo);
            double m1 = 0.5 * (cells[c1].hi + cells[c1].lo);
            double h2 = 0.5 * (cells[c2].hi - cells[c2].lo);
            double m2 = 0.5 * (cells[c2].hi + cells[c2].lo);
            double acc = 0;
            for (int a = 0; a < n_gl; ++a) {
                double s1 = m1 + h1 * gx[static_cast<std::size_t>(a)];
                double inner = 0;
                for (int bb = 0; bb < n_gl; ++bb) {
                    double s2 = m2 + h2 * gx[static_cast<std::size_t>(bb)];
                    inner += gw[static_cast<std::size_t>(bb)] * std::pow(s1 - s2, k);
                }
                acc += gw[static_cast<std::size_t>(a)] * inner;
            }
            total.add(wgt * acc * h1 * h2);
        }
        // Diagonal triangle s2 < s1 within the cell: Duffy map s1 = lo + h x,
        // s2 = lo + h x t, Jacobian h^2 x, integrand (h x (1-t))^k.
        double wgt = std::norm(cells[c1].val);
        if (wgt == 0.0) continue;
        double h = cells[c1].hi - cells[c1].lo;
        double acc = 0;
        for (int a = 0; a < n_gl; ++a) {
            double x = 0.5 * (1.0 + gx[static_cast<std::size_t>(a)]);
            double inner = 0;
            for (int bb = 0; bb < n_gl; ++bb) {
                double tt = 0.5 * (1.0 + gx[static_cast<std::size_t>(bb)]);
                inner += gw[static_cast<std::size_t>(bb)] * std::pow(x * (1.0 - tt), k);
            }
            acc += gw[static_cast<std::size_t>(a)] * x * inner;
        }
        // two factors 1/2 from mapping both [-1,1] weights onto [0,1]
        total.add(wgt * std::pow(h, k + 2.0) * acc * 0.25);
    }
    return total.value();
}

}  // namespace

double phi_k_bruteforce(const Modulation& mod, int k, int panels) {
    if (k < 0) throw validation_error("phi_k_bruteforce: k must be >= 0");
    if (panels < 1) throw validation_error("phi_k_bruteforce: panels must be >= 1");
    double coarse = phi_k_cells(mod, k, panels);
    double fine = phi_k_cells(mod, k, 2 * panels);
    double err = std::fabs(fine - coarse);
    if (err > std::max(1e-10, 1e-10 * std::fabs(fine)))
        throw numerical_error("phi_k_bruteforce: quadrature did not converge (achieved " +
                              std::to_string(err) + ")");
    return fine;
}

double phi_even_bilinear(const Modulation& mod, int m) {
    if (m < 0) throw validation_error("phi_even_bilinear: m must be >= 0");
    std::vector<cplx> lam(static_cast<std::size_t>(2 * m) + 1);
    for (int r = 0; r <= 2 * m; ++r) lam[static_cast<std::size_t>(r)] = lambda_m(mod, r);
    double acc = 0;
    for (int r = 0; r <= 2 * m; ++r) {
        double term = (std::conj(lam[static_cast<std::size_t>(r)]) *
                       lam[static_cast<std::size_t>(2 * m - r)])
                          .real() /
                      (factorial(r) * factorial(2 * m - r));
        acc += (r % 2 == 0) ? term : -term;
    }
    return 0.5 * factorial(2 * m) * acc;
}

double phi_odd_spectral(const PulseSequence& seq, int M, double tol) {
    if (M < 1) throw validation_error("phi_odd_spectral: M must be >= 1");
    if (!(tol > 0)) throw validation_error("phi_odd_spectral: tol must be > 0");
    Modulation mod = modulation_of(seq);
    for (int m = 0; m < M; ++m)
        if (std::abs(lambda_m(mod, m)) >= 1e-10)
            throw numerical_error(
                "phi_odd_spectral: constraints not satisfied; spectral form divergent "
                "(|lambda_" + std::to_string(m) + "| >= 1e-10)");

    FilterEvaluator fe(mod);
    // Below the series radius, drop the first M moments: exact projection that
    // regularizes u -> 0 (residual constrained moments would otherwise blow up
    // as u^{-2M}).
    auto g = [&](double u) {
        if (u <= 0) {
            double c = std::abs(fe.tail_series(1e-30, M)) / std::pow(1e-30, M);
            return c * c;  // not reached by GK nodes; defensive
        }
        double f2 = (u <= fe.radius()) ? std::norm(fe.tail_series(u, M)) : std::norm(fe.value(u));
        return f2 / std::pow(u, 2.0 * M);
    };

    const int N = seq.n_pulses();
    const double a = mod.jump_bound();  // 2(N+1)
    const double rel = 0.3 * tol;

    // Main region, then extend so the analytic tail bound is negligible.
    double u1 = std::max(4.0 * kPi * (N + 1), 64.0);
    std::vector<double> breaks{0.0, 1.0, 2.0};
    for (double u = 2.0 + kPi; u < u1; u += kPi) breaks.push_back(u);
    breaks.push_back(u1);
    QuadResult main = integrate_adaptive(g, breaks, rel, 0.0, 40000);
    double J = main.value;
    double Jerr = main.error;

    auto tail_bound = [&](double u) {
        return a * a / ((2.0 * M + 1.0) * std::pow(u, 2.0 * M + 1.0));
    };
    double u_hi = u1;
    while (tail_bound(u_hi) > rel * std::fabs(J) && u_hi < 1e7) u_hi *= 1.5;
    if (u_hi > u1) {
        // pi-wide panels: wider ones alias the filter oscillation and the
        // panel error estimate can miss it entirely.
        std::vector<double> ext{u1};
        double u = u1;
        while (u < u_hi) {
            u = std::min(u + kPi, u_hi);
            ext.push_back(u);
        }
        QuadResult tail = integrate_adaptive(g, ext, rel, rel * std::fabs(J), 40000);
        J += tail.value;
        Jerr += tail.error;
    }
    Jerr += tail_bound(u_hi);
    if (Jerr > 3.0 * std::max(rel, 1e-12) * std::fabs(J) + 1e-300)
        throw numerical_error("phi_odd_spectral: quadrature did not converge (error " +
                              std::to_string(Jerr) + " on " + std::to_string(J) + ")");

    double sign = (M % 2 == 0) ? 1.0 : -1.0;
    return sign * factorial(2 * M - 1) * J / kPi;
}

ChiResult chi_spectral(const Modulation& mod, const NoiseModel& noise, double T) {
    if (!(T > 0)) throw validation_error("chi_spectral: T must be > 0");
    if (!std::isfinite(noise.spectrum(0.0))) {
        if (std::abs(lambda_m(mod, 0)) > 1e-12)
            throw numerical_error(
                "chi_spectral: spectrum divergent at omega -> 0 and lambda_0 != 0; "
                "overlap integral diverges");
    }

    FilterEvaluator fe(mod);
    auto integrand = [&](double u) { return noise.spectrum(u / T) * fe.abs2(u); };

    const double a = mod.jump_bound();
    const double wchar_u = noise.omega_char() * T;  // spectral width in u
    const double rel = 1e-8;

    auto make_breaks = [&](double lo, double hi) {
        std::vector<double> br;
        br.push_back(lo);
        // resolve the spectral peak if it sits inside (lo, hi)
        for (double w : {0.25 * wchar_u, 0.5 * wchar_u, wchar_u, 2.0 * wchar_u, 4.0 * wchar_u})
            if (w > lo && w < hi) br.push_back(w);
        double start = std::max(lo, 4.0 * wchar_u);
        for (double u = start; u < hi; u += kPi) br.push_back(u);
        br.push_back(hi);
        std::sort(br.begin(), br.end());
        br.erase(std::unique(br.begin(), br.end()), br.end());
        return br;
    };

    // chi = (1/2) * double time integral of C(t1-t2) F* F; in frequency form
    // T^2 * integral_0^inf (dw/2pi) S(w) |f~(wT)|^2, matching the triangle
    // normalization of the phi_k (free evolution, exponential correlation:
    // chi(T) = T - 1 + e^{-T} reproduces the series term by term).
    ChiResult out;
    if (noise.hard_cutoff()) {
        const double uc = *noise.hard_cutoff() * T;
        QuadResult r = integrate_adaptive(integrand, make_breaks(0.0, uc), rel, 0.0, 60000);
        if (!r.converged && r.error > 1e-6 * std::fabs(r.value) + 1e-300)
            throw numerical_error("chi_spectral: quadrature did not converge");
        out.value = T * r.value / (2.0 * kPi);
        out.error = T * r.error / (2.0 * kPi);
        return out;
    }

    SpectrumTail tail = spectrum_tail_descriptor(noise);
    // Integrate to u1, then close with the analytic envelope |f|^2 <= a^2/u^2.
    double u1 = std::max({8.0 * wchar_u, 16.0 * kPi, 4.0 * kPi * (mod.n_segments() + 1)});
    auto tail_bound = [&](double u) {
        if (!tail.hard_cutoff) {
            // S <= alpha/w^P beyond the soft knee: integral_u^inf alpha (T/u')^P a^2/u'^2
            return tail.alpha * std::pow(T, tail.P) * a * a /
                   ((tail.P + 1.0) * std::pow(u, tail.P + 1.0));
        }
        // monotone fast-decaying spectrum: integral_u^inf S(u'/T) a^2/u'^2 du'
        // <= S(u/T) a^2 / u
        return noise.spectrum(u / T) * a * a / u;
    };

    QuadResult r = integrate_adaptive(integrand, make_breaks(0.0, u1), rel, 0.0, 60000);
    double J = r.value, Jerr = r.error;
    double u_hi = u1;
    while (tail_bound(u_hi) > 0.5 * rel * std::max(J, 1e-300) && u_hi < 1e9) u_hi *= 1.5;
    if (u_hi > u1) {
        // pi-wide panels, same aliasing concern as the main region
        std::vector<double> ext{u1};
        double u = u1;
        while (u < u_hi) {
            u = std::min(u + kPi, u_hi);
            ext.push_back(u);
        }
        QuadResult t2 = integrate_adaptive(integrand, ext, rel, rel * std::fabs(J), 60000);
        J += t2.value;
        Jerr += t2.error;
    }
    Jerr += tail_bound(u_hi);  // bound goes into the error, not the value

    out.value = T * J / (2.0 * kPi);
    out.error = T * Jerr / (2.0 * kPi);
    if (out.value < -out.error)
        throw numerical_error("chi_spectral: negative overlap beyond error bound (bug)");
    return out;
}

ChiResult chi_series(const PulseSequence& seq, const CorrelationExpansion& expansion, double T,
                     int k_max) {
    if (!(T > 0)) throw validation_error("chi_series: T must be > 0");
    if (k_max < 0) throw validation_error("chi_series: k_max must be >= 0");
    if (static_cast<std::size_t>(k_max) >= expansion.coeffs.size())
        throw validation_error("chi_series: k_max exceeds expansion order");
    KahanSum sum;
    double last_nonzero = 0, prev_nonzero = 0;
    int nonzero_count = 0;
    for (int k = 0; k <= k_max; ++k) {
        double term = expansion.coeffs[static_cast<std::size_t>(k)] * phi_k_closed(seq, k) *
                      std::pow(T, k + 2.0);
        sum.add(term);
        if (term != 0.0) {
            prev_nonzero = last_nonzero;
            last_nonzero = term;
            ++nonzero_count;
        }
    }
    if (nonzero_count >= 2) {
        double ratio = std::fabs(last_nonzero) / std::fabs(prev_nonzero);
        if (!(ratio < 0.5))
            throw numerical_error("chi_series: series unreliable at this T (last-term ratio " +
                                  std::to_string(ratio) + " >= 0.5)");
    }
    ChiResult out;
    out.value = sum.value();
    out.error = std::fabs(last_nonzero);
    return out;
}

SlopeFit decoupling_order(const NoiseModel& noise,
                          const std::function<PulseSequence(int)>& family, int n,
                          const std::vector<double>& T_grid) {
    if (T_grid.size() < 3)
        throw validation_error("decoupling_order: need at least 3 grid points");
    PulseSequence seq = family(n);
    Modulation mod = modulation_of(seq);
    std::vector<double> x, y;
    double prev = -1;
    for (double T : T_grid) {
        ChiResult c = chi_spectral(mod, noise, T);
        if (!(c.value > 0))
            throw numerical_error("decoupling_order: non-positive chi on grid");
        if (prev >= 0 && !(c.value > prev))
            throw numerical_error("decoupling_order: non-monotone chi on grid; fit rejected");
        prev = c.value;
        x.push_back(std::log(T));
        y.push_back(std::log(c.value));
    }
    const std::size_t n_pts = x.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n_pts; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n_pts);
    my /= static_cast<double>(n_pts);
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n_pts; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    SlopeFit fit;
    fit.slope = sxy / sxx;
    fit.points = static_cast<int>(n_pts);
    double ss_res = 0;
    for (std::size_t i = 0; i < n_pts; ++i) {
        double r = y[i] - my - fit.slope * (x[i] - mx);
        ss_res += r * r;
    }
    fit.std_error = (n_pts > 2) ? std::sqrt(ss_res / (static_cast<double>(n_pts) - 2.0) / sxx) : 0.0;
    return fit;
}

DecoherenceReport make_report(const PulseSequence& seq, const NoiseModel& noise, double T,
                              int m_max, int k_max, const std::string& method) {
    if (m_max < 0 || k_max < 0)
        throw validation_error("make_report: m_max and k_max must be >= 0");
    DecoherenceReport rep;
    rep.method = method;
    Modulation mod = modulation_of(seq);
    for (int m = 0; m <= m_max; ++m) rep.lambda.push_back(lambda_m(mod, m));
    for (int k = 0; k <= k_max; ++k) rep.phi.push_back(phi_k_closed(seq, k));

    // Internal consistency: even phi must match the moment bilinear identity.
    for (int m = 0; 2 * m <= k_max && m <= 3; ++m) {
        double bil = phi_even_bilinear(mod, m);
        if (std::fabs(bil - rep.phi[static_cast<std::size_t>(2 * m)]) > 1e-10)
            throw numerical_error("make_report: even-order identity violated (internal bug)");
    }

    if (method == "spectral") {
        ChiResult c = chi_spectral(mod, noise, T);
        rep.chi = c.value;
        rep.chi_err = c.error;
    } else if (method == "series") {
        CorrelationExpansion exp = correlation_expansion(noise, k_max);
        ChiResult c = chi_series(seq, exp, T, k_max);
        rep.chi = c.value;
        rep.chi_err = c.error;
    } else {
        throw validation_error("make_report: method must be \"spectral\" or \"series\"");
    }
    if (rep.chi < -rep.chi_err)
        throw numerical_error("make_report: negative chi beyond error estimate");
    return rep;
}

std::string serialize(const DecoherenceReport& report) {
    nlohmann::json j;
    std::vector<double> lam;
    lam.reserve(report.lambda.size());
    for (const auto& l : report.lambda) lam.push_back(l.real());
    j["lambda"] = lam;
    j["phi"] = report.phi;
    j["chi"] = report.chi;
    j["chi_err"] = report.chi_err;
    j["method"] = report.method;
    return j.dump();
}

}  // namespace dd
