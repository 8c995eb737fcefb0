#pragma once

#include "dissipacert/symmat.hpp"
#include "dissipacert/sysmodel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace dissipacert::oracle {

/// Outcome of a randomized falsification sweep.
struct SampleReport
{
    int attempted = 0;
    int accepted = 0;
    double worst_margin = 0.0; ///< most negative lambda_min over accepted samples
    double threshold = 0.0;    ///< samples below -threshold are failures
    std::vector<Eigen::MatrixXd> failures;
    std::uint64_t seed = 0;
};

/// Simulates the noiseless system from x0 and checks
///   x^T P x + s(u, y) - x+^T P x+ >= -eps_psd * max(1, |x|^2 + |u|^2)
/// at every step.
bool trajectory_dissipation_check(const Sys& sys, const SupplyRate& s, const SymMat& p, const Eigen::MatrixXd& inputs,
                                  const Eigen::VectorXd& x0, const Tolerances& tol = {});

struct SystemSample
{
    std::vector<Sys> systems;
    int attempted = 0;
    int accepted = 0;       ///< interior draws that passed membership
    int boundary = 0;       ///< members found by bisection along rejected rays
    bool starved = false;   ///< acceptance below 0.1% of the budget
    std::uint64_t seed = 0;
};

/// Members of the consistency set: the center (least-squares system or
/// the maximizer of the membership form), random interior draws, and
/// boundary members found by bisection along rejected directions.
/// For N0 the set must be a singleton (full rank), else NotApplicable.
SystemSample sample_consistent_systems(const DataRecord& data, const NoiseSpec& spec, int count, std::uint64_t seed,
                                       const Tolerances& tol = {});

/// Worst lambda_min(L(P)) over the systems; failures below -threshold.
SampleReport model_lmi_sweep(const std::vector<Sys>& systems, const SupplyRate& s, const SymMat& p, double threshold);

/// sup over the unit circle of sigma_max(C (zI - A)^{-1} B + D).
/// Throws NotApplicable unless A is Schur stable.
double hinf_norm_grid(const Sys& sys, int grid_size = 10000, int refine_iters = 80);

/// H(z) + H(z)^* >= -eps_psd on the grid. Requires m = p and stable A.
bool positive_real_grid(const Sys& sys, int grid_size = 10000, const Tolerances& tol = {});

/// Samples Z (r x q) with [I; Z]^T N [I; Z] >= 0 and reports the worst
/// lambda_min of [I; Z]^T M [I; Z]. Boundary-biased when N has a bounded
/// set with interior. Throws SamplingStarved if no N-feasible Z is found.
SampleReport s_lemma_sampling(const SymMat& m, const SymMat& n, Eigen::Index q, Eigen::Index r, int samples,
                              std::uint64_t seed, const Tolerances& tol = {});

} // namespace dissipacert::oracle
