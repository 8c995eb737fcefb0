#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <utility>
#include <vector>

namespace dissipacert::detail {

// Block-diagonal semidefinite program in the form
//
//   maximize  b^T y   subject to   S_k = C_k - sum_i y_i A_{k,i} >= 0,
//
// with dual  minimize sum_k <C_k, X_k>  s.t.  sum_k <A_{k,i}, X_k> = b_i, X_k >= 0.
struct SdpBlock
{
    Eigen::MatrixXd c;
    std::vector<std::pair<int, Eigen::MatrixXd>> a; // (index into y, coefficient)
};

struct Sdp
{
    std::vector<SdpBlock> blocks;
    Eigen::VectorXd b;
};

struct SdpResult
{
    Eigen::VectorXd y;
    std::vector<Eigen::MatrixXd> x;
    double primal_objective = 0.0; // sum <C_k, X_k>, an upper bound on b^T y
    double dual_objective = 0.0;   // b^T y
    double primal_infeasibility = 0.0;
    double dual_infeasibility = 0.0;
    bool converged = false;
    bool timed_out = false;
    int iterations = 0;
    std::vector<double> trace; // b^T y per iteration
};

// Infeasible-start primal-dual path-following method, HKM search direction,
// Mehrotra predictor-corrector.
SdpResult solve_sdp(const Sdp& sdp, int max_iterations, std::chrono::steady_clock::time_point deadline);

} // namespace dissipacert::detail
