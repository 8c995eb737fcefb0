#pragma once

#include <Eigen/Dense>

#include <compare>
#include <ostream>

namespace dissipacert {

/// Numerical thresholds shared by every module.
///
/// All comparisons against zero in the library go through one of these
/// fields; nothing else hard-codes a tolerance that affects a verdict.
struct Tolerances
{
    double atol_sym = 1e-8;   ///< max |A - A^T| accepted when building a SymMat
    double rtol_eig = 1e-9;   ///< eigenvalue counted as zero below rtol_eig * max(1, rho(A))
    double eps_psd = 1e-8;    ///< A >= 0 accepted when lambda_min >= -eps_psd
    double eps_strict = 1e-6; ///< A > 0 accepted when lambda_min >= eps_strict
    double rtol_rank = 1e-8;  ///< singular value counted as zero below rtol_rank * sigma_max
    double atol_data = 1e-9;  ///< residual tolerance for exact data, relative to max(1, |data|)

    /// Throws SpecError unless every field is positive and eps_strict > eps_psd.
    void validate() const;
};

/// Eigenvalue sign counts (negative, zero, positive).
struct Inertia
{
    int neg = 0;
    int zero = 0;
    int pos = 0;

    int dim() const { return neg + zero + pos; }
    Inertia operator+(const Inertia& o) const { return {neg + o.neg, zero + o.zero, pos + o.pos}; }
    auto operator<=>(const Inertia&) const = default;
};

std::ostream& operator<<(std::ostream& os, const Inertia& in);

/// Dense real symmetric matrix.
///
/// The constructor symmetrizes its argument as (A + A^T)/2 and rejects it
/// when the asymmetry exceeds `atol_sym`; afterwards the stored entries are
/// exactly symmetric.
class SymMat
{
public:
    SymMat() = default;
    explicit SymMat(const Eigen::MatrixXd& a, double atol_sym = Tolerances{}.atol_sym);

    static SymMat identity(Eigen::Index n);
    static SymMat zero(Eigen::Index n);
    static SymMat diagonal(const Eigen::VectorXd& d);
    /// Builds [[a11, a12], [a12^T, a22]].
    static SymMat from_blocks(const Eigen::MatrixXd& a11, const Eigen::MatrixXd& a12, const Eigen::MatrixXd& a22);

    Eigen::Index dim() const { return m_.rows(); }
    const Eigen::MatrixXd& matrix() const { return m_; }
    double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

    // Blocks of the 2x2 partition with the leading block of size k.
    Eigen::MatrixXd block11(Eigen::Index k) const { return m_.topLeftCorner(k, k); }
    Eigen::MatrixXd block12(Eigen::Index k) const { return m_.topRightCorner(k, dim() - k); }
    Eigen::MatrixXd block22(Eigen::Index k) const { return m_.bottomRightCorner(dim() - k, dim() - k); }

    SymMat operator-() const;
    SymMat operator+(const SymMat& o) const;
    SymMat operator-(const SymMat& o) const;
    SymMat operator*(double s) const;

    /// T^T * this * T for any conformable T.
    SymMat congruence(const Eigen::MatrixXd& t) const;
    SymMat inverse() const;

private:
    Eigen::MatrixXd m_;
};

/// Ascending eigenvalues; throws NumericalError on decomposition failure.
Eigen::VectorXd eigenvalues(const SymMat& a);
double lambda_min(const SymMat& a);
double lambda_max(const SymMat& a);
double spectral_radius(const SymMat& a);

Inertia inertia(const SymMat& a, const Tolerances& tol = {});
bool is_psd(const SymMat& a, const Tolerances& tol = {});
bool is_pd(const SymMat& a, const Tolerances& tol = {});

/// A11 - A12 A22^{-1} A12^T for the partition with leading block of size k.
/// Throws SingularBlock when A22 has a zero eigenvalue under `tol`.
SymMat schur_complement(const SymMat& a, Eigen::Index k, const Tolerances& tol = {});

/// True iff In(A) == In(A22) + In(A / A22).
bool haynsworth_check(const SymMat& a, Eigen::Index k, const Tolerances& tol = {});

/// Quadratic form [I; R]^T Psi [I; R] for R of size (dim - q) x q.
SymMat quadratic_form(const SymMat& psi, const Eigen::MatrixXd& r);

} // namespace dissipacert
