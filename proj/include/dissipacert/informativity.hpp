#pragma once

#include "dissipacert/lmi.hpp"
#include "dissipacert/symmat.hpp"
#include "dissipacert/sysmodel.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace dissipacert {

enum class Verdict
{
    Informative,
    NotInformative,
    Inconclusive,
};

const char* to_string(Verdict v);

/// Singular-value summary of Z-.
struct RankReport
{
    Eigen::Index rank = 0;
    Eigen::Index required = 0; ///< n + m
    double sigma_max = 0.0;
    double sigma_min = 0.0;    ///< smallest of the n+m singular values (0 when T < n+m)
    bool full = false;         ///< rank == required under rtol_rank
    /// sigma_min / sigma_max lies within a factor 100 of rtol_rank: the
    /// decision flips under a small change of threshold.
    bool near_threshold = false;
    Eigen::VectorXd singular_values;
};

/// Two systems consistent with the data that admit no common storage:
/// along (x, u) the second one has x+ = x and output y, so every storage
/// yields [x;u]^T L(P) [x;u] = s(u, y) < 0.
struct CounterexamplePair
{
    Sys sys_a;
    Sys sys_b;
    Eigen::VectorXd x, u, y;
    Eigen::VectorXd xi, eta; ///< unit left-kernel direction of Z-
    double supply = 0.0;     ///< s(u, y)
    bool perturbed = false;  ///< the u-perturbation branch was used
};

struct InformativityVerdict
{
    Verdict status = Verdict::Inconclusive;
    std::optional<SymMat> storage;   ///< P
    std::optional<SymMat> q;         ///< Q = P^{-1} (noisy path)
    std::optional<double> multiplier; ///< alpha (noisy path)
    std::vector<lmi::Margin> margins;
    std::optional<CounterexamplePair> evidence;
    RankReport rank;
    std::optional<Sys> identified;           ///< noiseless path, full rank
    std::optional<Eigen::MatrixXd> slater_point; ///< V* (noisy path)
    double slack_upper_bound = 0.0;          ///< solver dual bound when infeasible
    std::string note;
};

// ---- rank necessity ------------------------------------------------------

RankReport rank_report(const DataRecord& data, const Tolerances& tol = {});
/// rank(Z-) == n + m.
bool rank_condition(const DataRecord& data, const Tolerances& tol = {});

/// Builds the two-system counterexample for rank-deficient data.
/// `ref` must be consistent with the data. Throws NotApplicable when the
/// rank condition holds and NumericalError when no admissible u is found.
CounterexamplePair counterexample_construct(const DataRecord& data, const NoiseSpec& spec, const Sys& ref,
                                            const SupplyRate& s, const Tolerances& tol = {});

/// | [x;u]^T L(P) [x;u] - s(u,y) | for the second system of the pair.
double witness_identity_error(const CounterexamplePair& cx, const SupplyRate& s, const SymMat& p);

// ---- noiseless data -----------------------------------------------------

/// [A B; C D] = Z+ Z-^T (Z- Z-^T)^{-1}. Throws NotApplicable without full
/// rank and DataInconsistent when the residual exceeds atol_data.
Sys identify_unique(const DataRecord& data, const Tolerances& tol = {});

/// Minimum-norm least-squares system Z+ Z-^+ (any rank), no residual check.
Sys least_squares_system(const DataRecord& data);

/// X-^T P X- - X+^T P X+ + [U-; Y-]^T S [U-; Y-], the T x T data form of the
/// dissipation inequality.
SymMat data_dissipation_matrix(const DataRecord& data, const SupplyRate& s, const SymMat& p);

InformativityVerdict informativity_noiseless(const DataRecord& data, const SupplyRate& s, const Tolerances& tol = {},
                                             const lmi::Budget& budget = {});

// ---- noisy data ---------------------------------------------------------

/// M^T Phi M with M = [[I, 0], [Z+^T, -Z-^T]]; row blocks (n, p, n, m).
/// Throws AssumptionError unless Phi satisfies A2.
SymMat build_n1(const DataRecord& data, const SymMat& phi, const Tolerances& tol = {});

/// Trailing block negative definite and Schur complement positive definite.
bool slater_check(const SymMat& n1, Eigen::Index split, const Tolerances& tol = {});
/// -N22^{-1} N12^T when slater_check holds.
std::optional<Eigen::MatrixXd> slater_point(const SymMat& n1, Eigen::Index split, const Tolerances& tol = {});

/// diag(Q, 0, -Q, 0) + [[0,0,0,0],[0,Hhat,0,-Ghat^T],[0,0,0,0],[0,-Ghat,0,Fhat]],
/// blocks (n, p, n, m).
SymMat certificate_matrix(const SymMat& q, const SupplyRate& s, const Tolerances& tol = {});

InformativityVerdict informativity_noisy_n1(const DataRecord& data, const SymMat& phi, const SupplyRate& s,
                                            const Tolerances& tol = {}, const lmi::Budget& budget = {});
/// Converts Theta to the equivalent Phi and runs the N1 test.
InformativityVerdict informativity_noisy_n2(const DataRecord& data, const SymMat& theta, const SupplyRate& s,
                                            const Tolerances& tol = {}, const lmi::Budget& budget = {});

/// Dispatches on the noise model.
InformativityVerdict informativity(const DataRecord& data, const NoiseSpec& spec, const SupplyRate& s,
                                   const Tolerances& tol = {}, const lmi::Budget& budget = {});

/// lambda_min(M - alpha N) >= -eps_psd with alpha >= 0.
bool s_lemma_certificate_check(const SymMat& m, const SymMat& n, double alpha, const Tolerances& tol = {});
double s_lemma_margin(const SymMat& m, const SymMat& n, double alpha);

} // namespace dissipacert
