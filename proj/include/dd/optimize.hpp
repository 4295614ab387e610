#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dd/sequences.hpp"

namespace dd {

/// Minimize the leading odd decoherence function phi_{2M-1} over N pulse times
/// subject to the M order conditions {lambda_m = 0, m < M}.
struct OddProblem {
    int n = 1;               // pulse count N
    int m = 1;               // constraint order M
    double eps_c = 1e-10;    // constraint feasibility tolerance
    double eps_g = 1e-8;     // KKT gradient residual tolerance
    int multistarts = 4;
    std::uint64_t seed = 0x5eedULL;
};

struct OddResult {
    PulseSequence sequence;
    std::vector<double> multipliers;  // y_0..y_{M-1} in grad(phi + sum y_j lambda_j) = 0
    double objective = 0;             // (-1)^M phi_{2M-1}, positive at a solution
    double kkt_residual = 0;          // max component of the stationarity residual
    double constraint_residual = 0;   // max |lambda_m|
    int iterations = 0;
    bool converged = false;
};

/// Analytic gradient of phi_{2M-1} with respect to the pulse times.
std::vector<double> grad_phi_odd(const PulseSequence& seq, int M);

/// Analytic gradient of lambda_m: component k is 2(-1)^{k+1} s_k^m.
std::vector<double> grad_lambda(const PulseSequence& seq, int m);

/// Augmented-Lagrangian solve (gap parameterization keeps times ordered)
/// followed by a full-KKT Newton polish; multistart from jittered UDD/CPMG.
/// N = M returns UDD(N) directly (constraints determine the sequence);
/// N < M throws infeasible_error.
OddResult solve_odd(const OddProblem& problem);

struct StationarityCheck {
    bool pass = false;
    double residual = 0;
    double y0 = 0;
};

/// Checks that CPMG(N) solves the M = 1 stationarity system with the
/// multiplier y_0 = -(1/(8N^2)) [1 + (-1)^N].
StationarityCheck verify_cpmg_stationarity(int n, double tol);

/// Project a sequence onto {lambda_m = 0, m < M} by damped Gauss-Newton
/// least-norm steps; throws numerical_error if the target tolerance is not
/// reached.  Used to generate random feasible sequences in tests.
PulseSequence project_to_constraints(const PulseSequence& seq, int M, double tol = 1e-12,
                                     int max_iter = 200);

std::string serialize(const OddProblem& problem);
OddProblem parse_odd_problem(const std::string& text);
std::string serialize(const OddResult& result);

}  // namespace dd
