#pragma once

#include "dissipacert/symmat.hpp"

#include <Eigen/Dense>

#include <map>
#include <string>
#include <variant>
#include <vector>

namespace dissipacert::lmi {

enum class VarKind
{
    Symmetric,         ///< size x size symmetric matrix
    NonnegativeScalar, ///< scalar constrained to be >= 0
};

struct Variable
{
    std::string name;
    VarKind kind = VarKind::Symmetric;
    Eigen::Index size = 1;
};

enum class Requirement
{
    Psd, ///< lambda_min >= -eps_psd
    Pd,  ///< lambda_min >= eps_strict
};

using Assignment = std::map<std::string, Eigen::MatrixXd>;

/// Affine symmetric-matrix-valued expression
///   F0 + sum_k coeff_k * L_k^T X_{v_k} L_k + sum_l s_{w_l} G_l
/// where X_v are symmetric variables and s_w scalar variables.
class AffineExpr
{
public:
    explicit AffineExpr(Eigen::Index dim);

    AffineExpr& add_constant(const Eigen::MatrixXd& f0);
    /// coeff * L^T X L; L has as many rows as the variable's size and `dim` columns.
    AffineExpr& add_congruence(const std::string& var, const Eigen::MatrixXd& l, double coeff = 1.0);
    /// s * G for a scalar variable s.
    AffineExpr& add_scaled(const std::string& var, const Eigen::MatrixXd& g);

    Eigen::Index dim() const { return dim_; }
    const Eigen::MatrixXd& constant() const { return constant_; }

    struct Congruence
    {
        std::string var;
        Eigen::MatrixXd l;
        double coeff;
    };
    struct Scaled
    {
        std::string var;
        Eigen::MatrixXd g;
    };
    using Term = std::variant<Congruence, Scaled>;
    const std::vector<Term>& terms() const { return terms_; }

    /// Throws SpecError when a referenced variable is missing from `values`
    /// or has the wrong shape.
    SymMat evaluate(const Assignment& values) const;

private:
    Eigen::Index dim_;
    Eigen::MatrixXd constant_;
    std::vector<Term> terms_;
};

struct Constraint
{
    std::string name;
    AffineExpr expr;
    Requirement requirement = Requirement::Psd;
};

struct Problem
{
    std::vector<Variable> variables;
    std::vector<Constraint> constraints;

    Problem& add_variable(std::string name, VarKind kind, Eigen::Index size = 1);
    Problem& add_constraint(std::string name, AffineExpr expr, Requirement req = Requirement::Psd);

    /// Throws SpecError on unknown variables, duplicate names, non-symmetric
    /// constants, or shape mismatches.
    void validate() const;
    const Variable& variable(const std::string& name) const;
};

enum class Status
{
    Feasible,
    Infeasible,
    Inconclusive,
};

const char* to_string(Status s);

struct Margin
{
    std::string name;
    Requirement requirement = Requirement::Psd;
    double lambda_min = 0.0;
};

struct Solution
{
    Status status = Status::Inconclusive;
    Assignment assignment;
    /// One entry per constraint, then one per nonnegative scalar ("<name> >= 0").
    std::vector<Margin> margins;
    /// Best uniform slack found and the dual upper bound on it (both relative
    /// to the requirement thresholds; see solve_feasibility).
    double slack = 0.0;
    double slack_upper_bound = 0.0;
    double variable_bound = 0.0;
    int iterations = 0;
    std::vector<double> trace;
    std::string note;
};

struct Budget
{
    int max_iterations = 120;
    int max_bound_escalations = 5;
    double initial_bound = 1.0;
    double bound_growth = 100.0;
    double max_seconds = 60.0;
};

/// Decides feasibility by maximizing a uniform slack t subject to
///   G_j(x) - tau_j I >= t I   for every constraint j,
/// with tau_j = eps_strict + eps_psd for Pd constraints and 0 otherwise, and
/// every variable confined to the box |lambda(X)| <= bound.  The box is
/// enlarged when it is active and the answer is not yet Feasible.
///
/// Feasible: the recomputed margins satisfy every requirement.
/// Infeasible: the dual bound shows every point violates some constraint by
/// more than eps_psd and the box is inactive at the optimum.
/// Inconclusive: anything in between, including exhausted budgets.
Solution solve_feasibility(const Problem& prob, const Tolerances& tol = {}, const Budget& budget = {});

/// Margins recomputed from scratch with symmat primitives.
std::vector<Margin> evaluate_margins(const Problem& prob, const Assignment& values);

/// Re-evaluates every constraint at sol.assignment; true iff all
/// requirements hold. Never consults solver state.
bool verify_solution(const Problem& prob, const Solution& sol, const Tolerances& tol = {});

} // namespace dissipacert::lmi
