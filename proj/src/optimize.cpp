#include "dd/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <json.hpp>

#include "dd/decoherence.hpp"
#include "dd/errors.hpp"
#include "dd/rng.hpp"

namespace dd {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd grad_phi_odd_s(const std::vector<double>& s, int M) {
    const int N = static_cast<int>(s.size());
    const int k = 2 * M - 1;
    VectorXd g(N);
    for (int p = 1; p <= N; ++p) {
        double sp = s[static_cast<std::size_t>(p - 1)];
        double acc = 0;
        for (int j = p + 1; j <= N; ++j) {
            double d = std::pow(s[static_cast<std::size_t>(j - 1)] - sp, k + 1);
            acc += (j % 2 == 0) ? 2.0 * d : -2.0 * d;
        }
        for (int i = 1; i < p; ++i) {
            double d = std::pow(sp - s[static_cast<std::size_t>(i - 1)], k + 1);
            acc -= (i % 2 == 0) ? 2.0 * d : -2.0 * d;
        }
        acc -= std::pow(sp, k + 1);
        double e = std::pow(1.0 - sp, k + 1);
        acc += ((N + 1) % 2 == 0) ? e : -e;
        double sign_p = (p % 2 == 0) ? 1.0 : -1.0;
        g(p - 1) = sign_p * 2.0 / (k + 1.0) * acc;
    }
    return g;
}

MatrixXd hess_phi_odd_s(const std::vector<double>& s, int M) {
    const int N = static_cast<int>(s.size());
    const int k = 2 * M - 1;
    MatrixXd H(N, N);
    for (int p = 1; p <= N; ++p) {
        double sp = s[static_cast<std::size_t>(p - 1)];
        for (int q = p + 1; q <= N; ++q) {
            double v = 4.0 * std::pow(s[static_cast<std::size_t>(q - 1)] - sp, k);
            if ((p + q) % 2 != 0) v = -v;
            H(p - 1, q - 1) = v;
            H(q - 1, p - 1) = v;
        }
        double diag = 0;
        for (int j = 1; j <= N; ++j) {
            if (j == p) continue;
            double d = std::pow(std::fabs(s[static_cast<std::size_t>(j - 1)] - sp), k);
            diag -= ((p + j) % 2 == 0) ? 4.0 * d : -4.0 * d;
        }
        double sgp = (p % 2 == 0) ? 1.0 : -1.0;
        diag -= 2.0 * sgp * std::pow(sp, k);
        double sge = ((p + N + 1) % 2 == 0) ? 1.0 : -1.0;
        diag -= 2.0 * sge * std::pow(1.0 - sp, k);
        H(p - 1, p - 1) = diag;
    }
    return H;
}

VectorXd grad_lambda_s(const std::vector<double>& s, int m) {
    const int N = static_cast<int>(s.size());
    VectorXd g(N);
    for (int p = 1; p <= N; ++p) {
        double v = 2.0 * std::pow(s[static_cast<std::size_t>(p - 1)], m);
        g(p - 1) = (p % 2 == 0) ? -v : v;  // 2(-1)^{p+1} s_p^m
    }
    return g;
}

VectorXd hess_lambda_diag(const std::vector<double>& s, int m) {
    const int N = static_cast<int>(s.size());
    VectorXd d = VectorXd::Zero(N);
    if (m == 0) return d;
    for (int p = 1; p <= N; ++p) {
        double v = 2.0 * m * std::pow(s[static_cast<std::size_t>(p - 1)], m - 1);
        d(p - 1) = (p % 2 == 0) ? -v : v;
    }
    return d;
}

double lambda_of(const std::vector<double>& s, int m) {
    // alternating closed form with virtual endpoints 0 and 1
    const int N = static_cast<int>(s.size());
    double acc = 0, prev = 0;
    for (int j = 0; j <= N; ++j) {
        double next = (j == N) ? 1.0 : std::pow(s[static_cast<std::size_t>(j)], m + 1);
        double seg = next - prev;
        acc += (j % 2 == 0) ? seg : -seg;
        prev = next;
    }
    return acc / (m + 1.0);
}

double phi_odd_of(const std::vector<double>& s, int M) {
    PulseSequence seq(s);
    return phi_k_closed(seq, 2 * M - 1);
}

bool ordered_interior(const std::vector<double>& s) {
    double prev = 0;
    for (double v : s) {
        if (!(v > prev)) return false;
        prev = v;
    }
    return prev < 1.0;
}

std::vector<double> gaps_of(const std::vector<double>& s) {
    std::vector<double> g;
    double prev = 0;
    for (double v : s) {
        g.push_back(v - prev);
        prev = v;
    }
    g.push_back(1.0 - prev);
    return g;
}

std::vector<double> times_of_gaps(const std::vector<double>& g) {
    double total = 0;
    for (double v : g) total += v;
    std::vector<double> s;
    double acc = 0;
    for (std::size_t i = 0; i + 1 < g.size(); ++i) {
        acc += g[i];
        s.push_back(acc / total);
    }
    return s;
}

struct AlEval {
    double L;
    VectorXd grad_g;   // gradient w.r.t. gaps
    VectorXd c;        // constraint values lambda_0..lambda_{M-1}
    double f;          // objective (-1)^M phi_{2M-1}
};

AlEval eval_al(const std::vector<double>& g, int M, const VectorXd& z, double mu) {
    std::vector<double> s = times_of_gaps(g);
    const int N = static_cast<int>(s.size());
    double G = 0;
    for (double v : g) G += v;
    double fsign = (M % 2 == 0) ? 1.0 : -1.0;

    AlEval out;
    out.f = fsign * phi_odd_of(s, M);
    out.c = VectorXd(M);
    for (int m = 0; m < M; ++m) out.c(m) = lambda_of(s, m);
    out.L = out.f + z.dot(out.c) + 0.5 * mu * out.c.squaredNorm();

    VectorXd w = fsign * grad_phi_odd_s(s, M);
    for (int m = 0; m < M; ++m) w += (z(m) + mu * out.c(m)) * grad_lambda_s(s, m);

    // chain rule through s_k = (sum_{j<k} g_j)/G:
    // (J^T w)_j = (sum_{k>j} w_k - sum_k w_k s_k) / G
    double dot_ws = 0;
    for (int kk = 0; kk < N; ++kk) dot_ws += w(kk) * s[static_cast<std::size_t>(kk)];
    VectorXd gg(N + 1);
    double suffix = 0;
    for (int j = N; j >= 0; --j) {
        gg(j) = (suffix - dot_ws) / G;
        if (j > 0) suffix += w(j - 1);
    }
    out.grad_g = gg;
    return out;
}

// Inner BFGS over gaps (all positive). Returns final gaps.
std::vector<double> bfgs_gaps(std::vector<double> g, int M, const VectorXd& z, double mu,
                              double grad_tol, int max_iter, int& iters_used) {
    const int n = static_cast<int>(g.size());
    MatrixXd Hinv = MatrixXd::Identity(n, n);
    AlEval cur = eval_al(g, M, z, mu);
    for (int it = 0; it < max_iter; ++it) {
        ++iters_used;
        if (cur.grad_g.lpNorm<Eigen::Infinity>() <= grad_tol) break;
        VectorXd d = -(Hinv * cur.grad_g);
        if (d.dot(cur.grad_g) >= 0) {  // not a descent direction; reset
            Hinv = MatrixXd::Identity(n, n);
            d = -cur.grad_g;
        }
        // positivity cap: never step past 80% of the distance to g_i = 0
        double alpha_max = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i)
            if (d(i) < 0) alpha_max = std::min(alpha_max, -0.8 * g[static_cast<std::size_t>(i)] / d(i));
        double alpha = std::min(1.0, alpha_max);
        const double c1 = 1e-4;
        double slope = cur.grad_g.dot(d);
        AlEval next = cur;
        std::vector<double> g_next = g;
        bool accepted = false;
        for (int bt = 0; bt < 40; ++bt) {
            for (int i = 0; i < n; ++i)
                g_next[static_cast<std::size_t>(i)] = g[static_cast<std::size_t>(i)] + alpha * d(i);
            next = eval_al(g_next, M, z, mu);
            if (next.L <= cur.L + c1 * alpha * slope) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break;
        VectorXd step(n), ygrad(n);
        for (int i = 0; i < n; ++i) step(i) = g_next[static_cast<std::size_t>(i)] - g[static_cast<std::size_t>(i)];
        ygrad = next.grad_g - cur.grad_g;
        double sy = step.dot(ygrad);
        if (sy > 1e-12 * step.norm() * ygrad.norm()) {
            VectorXd Hy = Hinv * ygrad;
            double yHy = ygrad.dot(Hy);
            // BFGS inverse update
            Hinv += ((sy + yHy) / (sy * sy)) * (step * step.transpose()) -
                    (Hy * step.transpose() + step * Hy.transpose()) / sy;
        }
        g = g_next;
        cur = next;
    }
    // normalize total duration (objective is scale-invariant in gaps)
    double G = 0;
    for (double v : g) G += v;
    for (double& v : g) v /= G;
    return g;
}

struct KktEval {
    double kkt_res;
    double con_res;
};

KktEval kkt_residuals(const std::vector<double>& s, const VectorXd& y, int M) {
    const int N = static_cast<int>(s.size());
    double fsign = (M % 2 == 0) ? 1.0 : -1.0;
    VectorXd top = fsign * grad_phi_odd_s(s, M);
    for (int m = 0; m < M; ++m) top += y(m) * grad_lambda_s(s, m);
    double con = 0;
    for (int m = 0; m < M; ++m) con = std::max(con, std::fabs(lambda_of(s, m)));
    (void)N;
    return {top.lpNorm<Eigen::Infinity>(), con};
}

// Newton on the full KKT system; returns number of iterations run.
int kkt_polish(std::vector<double>& s, VectorXd& y, int M, int max_iter) {
    const int N = static_cast<int>(s.size());
    double fsign = (M % 2 == 0) ? 1.0 : -1.0;
    for (int it = 0; it < max_iter; ++it) {
        VectorXd F(N + M);
        VectorXd top = fsign * grad_phi_odd_s(s, M);
        for (int m = 0; m < M; ++m) top += y(m) * grad_lambda_s(s, m);
        F.head(N) = top;
        for (int m = 0; m < M; ++m) F(N + m) = lambda_of(s, m);
        double fnorm = F.lpNorm<Eigen::Infinity>();
        if (fnorm < 1e-14) return it;

        MatrixXd H = fsign * hess_phi_odd_s(s, M);
        MatrixXd A(M, N);
        for (int m = 0; m < M; ++m) {
            H += y(m) * MatrixXd(hess_lambda_diag(s, m).asDiagonal());
            A.row(m) = grad_lambda_s(s, m).transpose();
        }
        MatrixXd J = MatrixXd::Zero(N + M, N + M);
        J.topLeftCorner(N, N) = H;
        J.topRightCorner(N, M) = A.transpose();
        J.bottomLeftCorner(M, N) = A;
        VectorXd delta = J.fullPivLu().solve(-F);
        if (!delta.allFinite()) return it;

        double t = 1.0;
        bool moved = false;
        for (int bt = 0; bt < 30; ++bt) {
            std::vector<double> s_try = s;
            for (int i = 0; i < N; ++i) s_try[static_cast<std::size_t>(i)] += t * delta(i);
            if (ordered_interior(s_try)) {
                VectorXd y_try = y + t * delta.tail(M);
                VectorXd F2(N + M);
                VectorXd top2 = fsign * grad_phi_odd_s(s_try, M);
                for (int m = 0; m < M; ++m) top2 += y_try(m) * grad_lambda_s(s_try, m);
                F2.head(N) = top2;
                for (int m = 0; m < M; ++m) F2(N + m) = lambda_of(s_try, m);
                if (F2.lpNorm<Eigen::Infinity>() < fnorm || t < 1e-4) {
                    s = s_try;
                    y = y_try;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if (!moved) return it;
    }
    return max_iter;
}

VectorXd multipliers_least_squares(const std::vector<double>& s, int M) {
    const int N = static_cast<int>(s.size());
    double fsign = (M % 2 == 0) ? 1.0 : -1.0;
    MatrixXd At(N, M);
    for (int m = 0; m < M; ++m) At.col(m) = grad_lambda_s(s, m);
    VectorXd rhs = -(fsign * grad_phi_odd_s(s, M));
    return At.colPivHouseholderQr().solve(rhs);
}

}  // namespace

std::vector<double> grad_phi_odd(const PulseSequence& seq, int M) {
    if (M < 1) throw validation_error("grad_phi_odd: M must be >= 1");
    VectorXd g = grad_phi_odd_s(seq.times(), M);
    return std::vector<double>(g.data(), g.data() + g.size());
}

std::vector<double> grad_lambda(const PulseSequence& seq, int m) {
    if (m < 0) throw validation_error("grad_lambda: m must be >= 0");
    VectorXd g = grad_lambda_s(seq.times(), m);
    return std::vector<double>(g.data(), g.data() + g.size());
}

OddResult solve_odd(const OddProblem& problem) {
    const int N = problem.n;
    const int M = problem.m;
    if (N < 1) throw validation_error("solve_odd: n must be >= 1");
    if (M < 1) throw validation_error("solve_odd: m must be >= 1");
    if (problem.multistarts < 1) throw validation_error("solve_odd: multistarts must be >= 1");
    if (!(problem.eps_c > 0) || !(problem.eps_g > 0))
        throw validation_error("solve_odd: tolerances must be > 0");
    if (N < M)
        throw infeasible_error("solve_odd: n < m leaves no freedom to satisfy the constraints");

    double fsign = (M % 2 == 0) ? 1.0 : -1.0;

    if (N == M) {
        // constraints alone pin the sequence; no optimization freedom left
        PulseSequence udd = make_udd(N);
        std::vector<double> s = udd.times();
        VectorXd y = multipliers_least_squares(s, M);
        KktEval r = kkt_residuals(s, y, M);
        OddResult out;
        out.sequence = udd;
        VectorXd y_rep = fsign * y;  // internal y pairs with the signed objective
        out.multipliers.assign(y_rep.data(), y_rep.data() + y_rep.size());
        out.objective = fsign * phi_odd_of(s, M);
        out.kkt_residual = r.kkt_res;
        out.constraint_residual = r.con_res;
        out.iterations = 0;
        out.converged = r.con_res <= problem.eps_c;
        return out;
    }

    // Multistart list: UDD, CPMG, then jittered UDD gap profiles.
    std::vector<std::vector<double>> starts;
    starts.push_back(make_udd(N).times());
    if (problem.multistarts >= 2) starts.push_back(make_cpmg(N).times());
    for (int j = 2; j < problem.multistarts; ++j) {
        SplitMix64 rng(substream_seed(problem.seed, static_cast<std::uint64_t>(j)));
        std::vector<double> g = gaps_of(make_udd(N).times());
        for (double& v : g) v *= 1.0 + 0.01 * (2.0 * rng.uniform01() - 1.0);
        starts.push_back(times_of_gaps(g));
    }

    OddResult best;
    bool have_best = false;
    for (const auto& s0 : starts) {
        std::vector<double> g = gaps_of(s0);
        VectorXd z = VectorXd::Zero(M);
        double mu = 10.0;
        int iters = 0;
        double prev_con = std::numeric_limits<double>::infinity();
        for (int outer = 0; outer < 60; ++outer) {
            double gtol = std::max(1e-11, problem.eps_g * 1e-3);
            g = bfgs_gaps(g, M, z, mu, gtol, 200, iters);
            AlEval e = eval_al(g, M, z, mu);
            double con = e.c.lpNorm<Eigen::Infinity>();
            z += mu * e.c;
            if (con <= 1e-9 && e.grad_g.lpNorm<Eigen::Infinity>() <= 1e-7) break;
            if (con > 0.25 * prev_con) mu = std::min(mu * 10.0, 1e12);
            prev_con = con;
        }
        std::vector<double> s = times_of_gaps(g);
        VectorXd y = z;
        iters += kkt_polish(s, y, M, 60);

        if (!ordered_interior(s)) continue;
        KktEval r = kkt_residuals(s, y, M);
        OddResult cand;
        cand.sequence = PulseSequence(s);
        VectorXd y_rep = fsign * y;  // internal y pairs with the signed objective
        cand.multipliers.assign(y_rep.data(), y_rep.data() + y_rep.size());
        cand.objective = fsign * phi_odd_of(s, M);
        cand.kkt_residual = r.kkt_res;
        cand.constraint_residual = r.con_res;
        cand.iterations = iters;
        cand.converged = r.kkt_res <= problem.eps_g && r.con_res <= problem.eps_c;
        if (!have_best) {
            best = cand;
            have_best = true;
            continue;
        }
        auto better = [&](const OddResult& a, const OddResult& b) {
            if (a.converged != b.converged) return a.converged;
            if (std::fabs(a.objective - b.objective) > 1e-12) return a.objective < b.objective;
            return a.sequence.times() < b.sequence.times();  // lexicographic tie-break
        };
        if (better(cand, best)) best = cand;
    }
    if (!have_best)
        throw numerical_error("solve_odd: all starts failed to produce an ordered sequence");
    return best;
}

StationarityCheck verify_cpmg_stationarity(int n, double tol) {
    if (n < 1) throw validation_error("verify_cpmg_stationarity: n must be >= 1");
    if (!(tol > 0)) throw validation_error("verify_cpmg_stationarity: tol must be > 0");
    std::vector<double> s = make_cpmg(n).times();
    // M = 1: lambda_0 = 0 holds for CPMG; check grad phi_1 + y0 grad lambda_0 = 0
    VectorXd gf = grad_phi_odd_s(s, 1);
    VectorXd gl = grad_lambda_s(s, 0);
    double y0 = -gf.dot(gl) / gl.squaredNorm();
    double res = (gf + y0 * gl).lpNorm<Eigen::Infinity>();
    StationarityCheck out;
    out.residual = res;
    out.y0 = y0;
    out.pass = res < tol && std::fabs(lambda_of(s, 0)) < tol;
    return out;
}

PulseSequence project_to_constraints(const PulseSequence& seq, int M, double tol, int max_iter) {
    if (M < 1) throw validation_error("project_to_constraints: M must be >= 1");
    if (!(tol > 0)) throw validation_error("project_to_constraints: tol must be > 0");
    const int N = seq.n_pulses();
    if (N < M)
        throw infeasible_error("project_to_constraints: fewer pulses than constraints");
    std::vector<double> s = seq.times();
    const std::vector<double> udd = make_udd(N).times();
    auto cnorm = [M](const std::vector<double>& x) {
        double w = 0;
        for (int m = 0; m < M; ++m) w = std::max(w, std::fabs(lambda_of(x, m)));
        return w;
    };
    for (int it = 0; it < max_iter; ++it) {
        VectorXd c(M);
        for (int m = 0; m < M; ++m) c(m) = lambda_of(s, m);
        double cn = c.lpNorm<Eigen::Infinity>();
        if (cn <= tol) return PulseSequence(s);
        MatrixXd A(M, N);
        for (int m = 0; m < M; ++m) A.row(m) = grad_lambda_s(s, m).transpose();
        // least-norm Gauss-Newton step: delta = -A^T (A A^T)^{-1} c, with a
        // small ridge so nearly coincident times cannot blow the solve up
        MatrixXd AAt = A * A.transpose();
        AAt.diagonal().array() += 1e-13 * AAt.trace() / M + 1e-300;
        VectorXd delta = -A.transpose() * AAt.ldlt().solve(c);
        bool accepted = false;
        if (delta.allFinite()) {
            double t = 1.0;
            for (int bt = 0; bt < 50 && !accepted; ++bt, t *= 0.5) {
                std::vector<double> s_try = s;
                for (int i = 0; i < N; ++i) s_try[static_cast<std::size_t>(i)] += t * delta(i);
                if (!ordered_interior(s_try)) continue;
                if (cnorm(s_try) <= (1.0 - 0.25 * t) * cn) {
                    s = s_try;
                    accepted = true;
                }
            }
        }
        if (!accepted) {
            // stalled: blend toward UDD(N), which satisfies every constraint
            // order below N, and resume; the blend keeps strict ordering
            for (int i = 0; i < N; ++i)
                s[static_cast<std::size_t>(i)] =
                    0.7 * s[static_cast<std::size_t>(i)] + 0.3 * udd[static_cast<std::size_t>(i)];
        }
    }
    throw numerical_error("project_to_constraints: did not reach tolerance");
}

std::string serialize(const OddProblem& problem) {
    nlohmann::json j;
    j["N"] = problem.n;
    j["M"] = problem.m;
    j["eps_c"] = problem.eps_c;
    j["eps_g"] = problem.eps_g;
    j["multistarts"] = problem.multistarts;
    j["seed"] = problem.seed;
    return j.dump();
}

OddProblem parse_odd_problem(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw validation_error(std::string("parse_odd_problem: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw validation_error("parse_odd_problem: expected a JSON object");
    OddProblem p;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        if (key == "N") {
            if (!it->is_number_integer()) throw validation_error("parse_odd_problem: N must be an integer");
            p.n = it->get<int>();
        } else if (key == "M") {
            if (!it->is_number_integer()) throw validation_error("parse_odd_problem: M must be an integer");
            p.m = it->get<int>();
        } else if (key == "eps_c") {
            if (!it->is_number()) throw validation_error("parse_odd_problem: eps_c must be a number");
            p.eps_c = it->get<double>();
        } else if (key == "eps_g") {
            if (!it->is_number()) throw validation_error("parse_odd_problem: eps_g must be a number");
            p.eps_g = it->get<double>();
        } else if (key == "multistarts") {
            if (!it->is_number_integer())
                throw validation_error("parse_odd_problem: multistarts must be an integer");
            p.multistarts = it->get<int>();
        } else if (key == "seed") {
            if (!it->is_number_unsigned() && !it->is_number_integer())
                throw validation_error("parse_odd_problem: seed must be an integer");
            p.seed = it->get<std::uint64_t>();
        } else {
            throw validation_error("parse_odd_problem: unknown key \"" + key + "\"");
        }
    }
    return p;
}

std::string serialize(const OddResult& result) {
    nlohmann::json j;
    j["times"] = result.sequence.times();
    j["multipliers"] = result.multipliers;
    j["objective"] = result.objective;
    j["kkt_residual"] = result.kkt_residual;
    j["constraint_residual"] = result.constraint_residual;
    j["iterations"] = result.iterations;
    j["converged"] = result.converged;
    return j.dump();
}

}  // namespace dd
