#pragma once

#include "dissipacert/lmi.hpp"
#include "dissipacert/symmat.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <variant>

namespace dissipacert {

/// Linear discrete-time system x+ = A x + B u, y = C x + D u.
struct Sys
{
    Eigen::MatrixXd A, B, C, D;

    Sys() = default;
    Sys(Eigen::MatrixXd a, Eigen::MatrixXd b, Eigen::MatrixXd c, Eigen::MatrixXd d);

    Eigen::Index n() const { return A.rows(); }
    Eigen::Index m() const { return B.cols(); }
    Eigen::Index p() const { return C.rows(); }

    /// [A B; C D], size (n+p) x (n+m).
    Eigen::MatrixXd stacked() const;
    static Sys from_stacked(const Eigen::MatrixXd& w, Eigen::Index n, Eigen::Index m);
    /// (A^T, C^T, B^T, D^T): the dual system with input dimension p.
    Sys transposed() const;

    /// Throws SpecError on inconsistent block sizes.
    void validate() const;
};

/// Quadratic supply rate s(u, y) = [u; y]^T S [u; y], S = [F G; G^T H].
class SupplyRate
{
public:
    /// With `assert_a1`, rejects S unless In(S) = (p, 0, m) (AssumptionError).
    SupplyRate(SymMat s, Eigen::Index m, Eigen::Index p, bool assert_a1 = true, const Tolerances& tol = {});

    static SupplyRate bounded_real(double gamma, Eigen::Index m, Eigen::Index p);
    static SupplyRate positive_real(Eigen::Index m);

    const SymMat& S() const { return s_; }
    Eigen::Index m() const { return m_; }
    Eigen::Index p() const { return p_; }
    Eigen::MatrixXd F() const { return s_.block11(m_); }
    Eigen::MatrixXd G() const { return s_.block12(m_); }
    Eigen::MatrixXd H() const { return s_.block22(m_); }

    double evaluate(const Eigen::VectorXd& u, const Eigen::VectorXd& y) const;

private:
    SymMat s_;
    Eigen::Index m_;
    Eigen::Index p_;
};

/// Blocks of -S^{-1} and the dual supply matrix S_hat (input dim p, output dim m).
struct DualSupplyParts
{
    Eigen::MatrixXd Fhat; ///< m x m
    Eigen::MatrixXd Ghat; ///< m x p
    Eigen::MatrixXd Hhat; ///< p x p
    SymMat Shat;          ///< (p+m) x (p+m)
};

/// Measured trajectory: U (m x T), X (n x T+1), Y (p x T).
class DataRecord
{
public:
    DataRecord(Eigen::MatrixXd u, Eigen::MatrixXd x, Eigen::MatrixXd y);

    Eigen::Index n() const { return x_.rows(); }
    Eigen::Index m() const { return u_.rows(); }
    Eigen::Index p() const { return y_.rows(); }
    Eigen::Index T() const { return u_.cols(); }

    const Eigen::MatrixXd& U() const { return u_; }
    const Eigen::MatrixXd& X() const { return x_; }
    const Eigen::MatrixXd& Y() const { return y_; }
    Eigen::MatrixXd Xminus() const { return x_.leftCols(T()); }
    Eigen::MatrixXd Xplus() const { return x_.rightCols(T()); }
    /// [X-; U-], (n+m) x T.
    Eigen::MatrixXd Zminus() const;
    /// [X+; Y-], (n+p) x T.
    Eigen::MatrixXd Zplus() const;

    /// max(1, largest absolute entry of the record); sets the scale of
    /// residual tolerances.
    double scale() const;

private:
    Eigen::MatrixXd u_, x_, y_;
};

/// Exact data: the residual must vanish.
struct NoiseN0
{
};

/// {V : [I; V^T]^T Phi [I; V^T] >= 0}, Phi of size (n+p)+T, split at n+p.
struct NoiseN1
{
    SymMat phi;
    Eigen::Index rows = 0; ///< n + p
};

/// {V : [I; V]^T Theta [I; V] >= 0}, Theta of size T+(n+p), split at T.
struct NoiseN2
{
    SymMat theta;
    Eigen::Index samples = 0; ///< T
};

using NoiseSpec = std::variant<NoiseN0, NoiseN1, NoiseN2>;

const char* model_tag(const NoiseSpec& spec);

/// Noise set written as {R : [I; R]^T Psi [I; R] >= 0}, R of size r x q.
/// For N1, R = V^T and q = n+p; for N2, R = V and q = T.
struct QuadraticSet
{
    SymMat psi;
    Eigen::Index q = 0;

    Eigen::Index r() const { return psi.dim() - q; }
    SymMat form(const Eigen::MatrixXd& r) const { return quadratic_form(psi, r); }
    /// Maximizer of the form, -Psi22^{-1} Psi12^T; requires Psi22 nonsingular.
    Eigen::MatrixXd center() const;
};

QuadraticSet quadratic_set(const NoiseSpec& spec);

// ---- assumptions --------------------------------------------------------

/// In(S) == (p, 0, m).
bool assumption_a1(const SupplyRate& s, const Tolerances& tol = {});
bool assumption_a1(const SymMat& s, Eigen::Index m, Eigen::Index p, const Tolerances& tol = {});

/// Trailing block negative definite and Schur complement positive definite
/// (bounded noise set with nonempty interior), both judged by inertia with
/// the relative zero threshold. Throws NotApplicable for N0.
bool assumption_a2(const NoiseSpec& spec, const Tolerances& tol = {});
/// The same criterion for an arbitrary partitioned matrix.
bool bounded_with_interior(const SymMat& psi, Eigen::Index q, const Tolerances& tol = {});

// ---- noise model constructors -------------------------------------------

/// Energy bound V V^T <= phi11: Phi = diag(phi11, -I_T).
NoiseN1 energy_bound(const SymMat& phi11, Eigen::Index samples);

/// Sample-covariance bound (1/(T-1)) V (I - J/T) V^T <= bound.
struct CovarianceModel
{
    NoiseN1 spec;
    bool regularized = false;
    double epsilon = 0.0;
    bool satisfies_a2 = false;
};
/// Phi22 = -(1/(T-1))(I - J/T) is only semidefinite; with epsilon > 0 the
/// constructor uses Phi22 - epsilon I instead and reports it.
CovarianceModel covariance_bound(const SymMat& bound, Eigen::Index samples, double epsilon = 0.0,
                                 const Tolerances& tol = {});

// ---- membership ---------------------------------------------------------

/// Residual Z+ - [A B; C D] Z-.
Eigen::MatrixXd residual(const Sys& sys, const DataRecord& data);

/// V in the noise set. N0: |V| <= atol_data * scale entrywise; N1/N2:
/// lambda_min of the quadratic form >= -eps_psd.
bool noise_membership(const Eigen::MatrixXd& v, const NoiseSpec& spec, const Tolerances& tol = {},
                      double scale = 1.0);

/// Smallest eigenvalue of the membership form (N1/N2 only).
double membership_margin(const Eigen::MatrixXd& v, const NoiseSpec& spec);

/// (A,B,C,D) in Sigma^N for the given data.
bool sigma_membership(const Sys& sys, const DataRecord& data, const NoiseSpec& spec, const Tolerances& tol = {});

// ---- duality ------------------------------------------------------------

/// [[0, -I_r], [I_q, 0]] Psi^{-1} [[0, -I_q], [I_r, 0]] for Psi split at q.
/// The result is split at r. Throws SingularBlock when Psi is singular.
SymMat dualize_quadratic_set(const SymMat& psi, Eigen::Index q, const Tolerances& tol = {});

/// S_hat and the blocks of -S^{-1}. Throws SingularSupply when S is singular.
DualSupplyParts dual_supply(const SupplyRate& s, const Tolerances& tol = {});

/// N1 <-> N2 via dualize_quadratic_set. Throws AssumptionError unless A2 holds.
NoiseSpec convert_noise(const NoiseSpec& spec, const Tolerances& tol = {});

// ---- model-based dissipativity -----------------------------------------

/// L(P) = [I 0; A B]^T diag(P, -P) [I 0; A B] + [0 I; C D]^T S [0 I; C D].
SymMat dissipation_lmi_matrix(const Sys& sys, const SupplyRate& s, const SymMat& p);
/// Same with an explicit supply matrix (used for the dual system and S_hat).
SymMat dissipation_lmi_matrix(const Sys& sys, const SymMat& s, const SymMat& p);

struct ModelDissipativity
{
    lmi::Status status = lmi::Status::Inconclusive;
    std::optional<SymMat> storage;
    lmi::Solution solution;
};

/// Solves {P >= 0, L(P) >= 0}. Requires A1.
ModelDissipativity is_dissipative_model(const Sys& sys, const SupplyRate& s, const Tolerances& tol = {},
                                        const lmi::Budget& budget = {});

} // namespace dissipacert
