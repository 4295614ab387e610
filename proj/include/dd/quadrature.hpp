#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <queue>
#include <vector>

namespace dd {

/// Compensated (Kahan) accumulator; reduction order still matters for bit
/// reproducibility, so callers must feed values in a fixed order.
struct KahanSum {
    double sum = 0, c = 0;
    void add(double x) {
        double y = x - c;
        double t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

struct QuadResult {
    double value = 0;
    double error = 0;   // estimated absolute error
    int panels = 0;
    bool converged = true;
};

namespace detail {

// Gauss-Kronrod 15(7) nodes and weights on [-1,1] (QUADPACK dqk15 constants).
inline constexpr double kGk15Nodes[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kGk15WeightsK[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kGk15WeightsG[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

}  // namespace detail

/// One Gauss-Kronrod 15(7) panel on [a,b]; error from the Gauss/Kronrod gap
/// with QUADPACK's scaled-difference sharpening.
template <class F>
QuadResult gk15_panel(F&& f, double a, double b) {
    const double h = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    const double fc = f(mid);
    double kron = detail::kGk15WeightsK[7] * fc;
    double gauss = detail::kGk15WeightsG[3] * fc;
    double resabs = detail::kGk15WeightsK[7] * std::fabs(fc);
    for (int i = 0; i < 7; ++i) {
        const double dx = h * detail::kGk15Nodes[i];
        const double f1 = f(mid - dx);
        const double f2 = f(mid + dx);
        kron += detail::kGk15WeightsK[i] * (f1 + f2);
        resabs += detail::kGk15WeightsK[i] * (std::fabs(f1) + std::fabs(f2));
        if (i % 2 == 1) gauss += detail::kGk15WeightsG[i / 2] * (f1 + f2);
    }
    QuadResult r;
    r.value = kron * h;
    r.panels = 1;
    double err = std::fabs((kron - gauss) * h);
    resabs *= std::fabs(h);
    if (resabs > 0 && err > 0) {
        double scaled = std::pow(200.0 * err / resabs, 1.5);
        err = (scaled < 1.0) ? resabs * scaled : err;
    }
    r.error = err;
    return r;
}

/// Adaptive bisection over an initial partition given by `breaks` (sorted,
/// at least {a, b}).  Stops when the summed error estimate meets
/// abs_tol + rel_tol*|integral| or when max_panels is exhausted (converged
/// flag cleared, value and achieved error still returned).
template <class F>
QuadResult integrate_adaptive(F&& f, const std::vector<double>& breaks, double rel_tol,
                              double abs_tol, int max_panels = 4000) {
    struct Panel {
        double a, b, value, error;
        bool operator<(const Panel& o) const { return error < o.error; }
    };
    std::priority_queue<Panel> heap;
    double total = 0, toterr = 0;
    int panels = 0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        if (!(breaks[i + 1] > breaks[i])) continue;
        QuadResult r = gk15_panel(f, breaks[i], breaks[i + 1]);
        heap.push({breaks[i], breaks[i + 1], r.value, r.error});
        total += r.value;
        toterr += r.error;
        ++panels;
    }
    auto tol = [&] { return abs_tol + rel_tol * std::fabs(total); };
    while (toterr > tol() && panels < max_panels && !heap.empty()) {
        Panel p = heap.top();
        heap.pop();
        const double m = 0.5 * (p.a + p.b);
        if (m <= p.a || m >= p.b) continue;  // interval at roundoff floor
        QuadResult l = gk15_panel(f, p.a, m);
        QuadResult r = gk15_panel(f, m, p.b);
        total += (l.value + r.value) - p.value;
        toterr += (l.error + r.error) - p.error;
        heap.push({p.a, m, l.value, l.error});
        heap.push({m, p.b, r.value, r.error});
        ++panels;
    }
    // Re-sum from the heap in position order for a cleaner value.
    std::vector<Panel> all;
    all.reserve(heap.size());
    while (!heap.empty()) {
        all.push_back(heap.top());
        heap.pop();
    }
    std::sort(all.begin(), all.end(), [](const Panel& x, const Panel& y) { return x.a < y.a; });
    KahanSum vs, es;
    for (const Panel& p : all) {
        vs.add(p.value);
        es.add(p.error);
    }
    QuadResult out;
    out.value = vs.value();
    out.error = es.value();
    out.panels = panels;
    out.converged = out.error <= abs_tol + rel_tol * std::fabs(out.value);
    return out;
}

template <class F>
QuadResult integrate_adaptive(F&& f, double a, double b, double rel_tol, double abs_tol,
                              int max_panels = 4000) {
    return integrate_adaptive(std::forward<F>(f), std::vector<double>{a, b}, rel_tol, abs_tol,
                              max_panels);
}

/// Uniform breakpoints helper: n panels on [a,b].
inline std::vector<double> uniform_breaks(double a, double b, int n) {
    std::vector<double> v(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) v[static_cast<std::size_t>(i)] = a + (b - a) * i / n;
    v.front() = a;
    v.back() = b;
    return v;
}

}  // namespace dd
