#include "dissipacert/lmi.hpp"

#include "dissipacert/detail/sdp.hpp"
#include "dissipacert/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace dissipacert::lmi {

namespace {

using Mat = Eigen::MatrixXd;

constexpr double kBoundActiveFraction = 0.99;

double threshold_for(Requirement req, const Tolerances& tol)
{
    return req == Requirement::Pd ? tol.eps_strict + tol.eps_psd : 0.0;
}

// Scalar coordinates of the decision variables: the upper triangle of each
// symmetric variable, one slot per scalar variable, then the slack t.
struct Coordinates
{
    struct Slot
    {
        int var;
        Eigen::Index row;
        Eigen::Index col;
    };
    std::vector<Slot> slots;
    std::map<std::string, int> var_index;
    std::vector<int> first_slot;

    explicit Coordinates(const Problem& prob)
    {
        for (int v = 0; v < static_cast<int>(prob.variables.size()); ++v)
        {
            const auto& var = prob.variables[v];
            var_index[var.name] = v;
            first_slot.push_back(static_cast<int>(slots.size()));
            const Eigen::Index k = var.kind == VarKind::Symmetric ? var.size : 1;
            for (Eigen::Index i = 0; i < k; ++i)
                for (Eigen::Index j = i; j < k; ++j)
                    slots.push_back({v, i, j});
        }
    }

    int slack_index() const { return static_cast<int>(slots.size()); }
    int count() const { return static_cast<int>(slots.size()) + 1; }
};

// Linear part of one constraint, expanded on the coordinates.
std::map<int, Mat> expand_terms(const AffineExpr& expr, const Problem& prob, const Coordinates& coords)
{
    std::map<int, Mat> out;
    const Eigen::Index d = expr.dim();
    auto accumulate = [&](int slot, const Mat& f) {
        auto [it, inserted] = out.try_emplace(slot, Mat::Zero(d, d));
        it->second += f;
    };
    for (const auto& term : expr.terms())
    {
        if (const auto* c = std::get_if<AffineExpr::Congruence>(&term))
        {
            const int v = coords.var_index.at(c->var);
            const Eigen::Index k = prob.variables[v].size;
            int slot = coords.first_slot[v];
            for (Eigen::Index i = 0; i < k; ++i)
                for (Eigen::Index j = i; j < k; ++j, ++slot)
                {
                    const Mat li = c->l.row(i);
                    const Mat lj = c->l.row(j);
                    if (i == j)
                        accumulate(slot, c->coeff * (li.transpose() * li));
                    else
                        accumulate(slot, c->coeff * (li.transpose() * lj + lj.transpose() * li));
                }
        }
        else
        {
            const auto& sc = std::get<AffineExpr::Scaled>(term);
            accumulate(coords.first_slot[coords.var_index.at(sc.var)], sc.g);
        }
    }
    for (auto it = out.begin(); it != out.end();)
        it = it->second.cwiseAbs().maxCoeff() == 0.0 ? out.erase(it) : std::next(it);
    return out;
}

detail::Sdp build_sdp(const Problem& prob, const Coordinates& coords, const Tolerances& tol, double bound)
{
    detail::Sdp sdp;
    const int t = coords.slack_index();
    sdp.b = Eigen::VectorXd::Zero(coords.count());
    sdp.b(t) = 1.0;

    for (const auto& con : prob.constraints)
    {
        const Eigen::Index d = con.expr.dim();
        detail::SdpBlock blk;
        blk.c = con.expr.constant() - threshold_for(con.requirement, tol) * Mat::Identity(d, d);
        for (auto& [slot, f] : expand_terms(con.expr, prob, coords))
            blk.a.emplace_back(slot, -f);
        blk.a.emplace_back(t, Mat::Identity(d, d));
        sdp.blocks.push_back(std::move(blk));
    }

    for (int v = 0; v < static_cast<int>(prob.variables.size()); ++v)
    {
        const auto& var = prob.variables[v];
        const int first = coords.first_slot[v];
        if (var.kind == VarKind::NonnegativeScalar)
        {
            detail::SdpBlock nonneg;
            nonneg.c = Mat::Zero(1, 1);
            nonneg.a.emplace_back(first, -Mat::Ones(1, 1));
            nonneg.a.emplace_back(t, Mat::Ones(1, 1));
            sdp.blocks.push_back(std::move(nonneg));
        }
        const Eigen::Index k = var.kind == VarKind::Symmetric ? var.size : 1;
        for (double sign : {1.0, -1.0})
        {
            detail::SdpBlock box;
            box.c = bound * Mat::Identity(k, k);
            int slot = first;
            for (Eigen::Index i = 0; i < k; ++i)
                for (Eigen::Index j = i; j < k; ++j, ++slot)
                {
                    Mat e = Mat::Zero(k, k);
                    e(i, j) = 1.0;
                    e(j, i) = 1.0;
                    box.a.emplace_back(slot, sign * e);
                }
            sdp.blocks.push_back(std::move(box));
        }
    }
    return sdp;
}

Assignment to_assignment(const Problem& prob, const Coordinates& coords, const Eigen::VectorXd& y)
{
    Assignment out;
    for (const auto& var : prob.variables)
    {
        const Eigen::Index k = var.kind == VarKind::Symmetric ? var.size : 1;
        out[var.name] = Mat::Zero(k, k);
    }
    for (int c = 0; c < coords.slack_index(); ++c)
    {
        const auto& slot = coords.slots[c];
        Mat& m = out[prob.variables[slot.var].name];
        m(slot.row, slot.col) = y(c);
        m(slot.col, slot.row) = y(c);
    }
    return out;
}

bool box_active(const Problem& prob, const Assignment& values, double bound)
{
    for (const auto& var : prob.variables)
    {
        const Mat& v = values.at(var.name);
        const double mag = var.kind == VarKind::Symmetric ? spectral_radius(SymMat(v)) : std::abs(v(0, 0));
        if (mag >= kBoundActiveFraction * bound)
            return true;
    }
    return false;
}

// Upper bound on the optimal slack over the box from any X >= 0, primal
// feasible or not: b^T y = tr(C X) - tr((C - sum y_i A_i) X) + y^T r <= tr(C X) + y^T r
// with r = b - A(X), and every coordinate but the slack lies in [-bound, bound].
double certified_upper_bound(const detail::Sdp& sdp, const std::vector<Mat>& x, int slack, double bound)
{
    if (x.size() != sdp.blocks.size())
        return std::numeric_limits<double>::infinity();
    Eigen::VectorXd r = sdp.b;
    double pobj = 0;
    for (std::size_t k = 0; k < x.size(); ++k)
    {
        // Clip to the PSD cone; the bound holds for any X >= 0.
        const Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (x[k] + x[k].transpose()));
        if (es.info() != Eigen::Success)
            return std::numeric_limits<double>::infinity();
        const Mat xs = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
        pobj += sdp.blocks[k].c.cwiseProduct(xs).sum();
        for (const auto& [i, a] : sdp.blocks[k].a)
            r(i) -= a.cwiseProduct(xs).sum();
    }
    double spill = 0;
    for (Eigen::Index i = 0; i < r.size(); ++i)
        if (i != slack)
            spill += bound * std::abs(r(i));
    if (!(r(slack) < 0.5))
        return std::numeric_limits<double>::infinity();
    return (pobj + spill) / (1.0 - r(slack));
}

bool margins_ok(const std::vector<Margin>& margins, const Tolerances& tol)
{
    return std::all_of(margins.begin(), margins.end(), [&](const Margin& m) {
        return m.requirement == Requirement::Pd ? m.lambda_min >= tol.eps_strict : m.lambda_min >= -tol.eps_psd;
    });
}

} // namespace

const char* to_string(Status s)
{
    switch (s)
    {
    case Status::Feasible:
        return "Feasible";
    case Status::Infeasible:
        return "Infeasible";
    case Status::Inconclusive:
        return "Inconclusive";
    }
    return "?";
}

AffineExpr::AffineExpr(Eigen::Index dim)
    : dim_(dim)
    , constant_(Mat::Zero(dim, dim))
{
    if (dim < 1)
        throw SpecError("AffineExpr: dim must be >= 1");
}

AffineExpr& AffineExpr::add_constant(const Mat& f0)
{
    if (f0.rows() != dim_ || f0.cols() != dim_)
        throw SpecError("AffineExpr: constant has wrong shape");
    constant_ += f0;
    return *this;
}

AffineExpr& AffineExpr::add_congruence(const std::string& var, const Mat& l, double coeff)
{
    if (l.cols() != dim_)
        throw SpecError("AffineExpr: congruence factor must have dim columns");
    terms_.emplace_back(Congruence{var, l, coeff});
    return *this;
}

AffineExpr& AffineExpr::add_scaled(const std::string& var, const Mat& g)
{
    if (g.rows() != dim_ || g.cols() != dim_)
        throw SpecError("AffineExpr: scaled term has wrong shape");
    terms_.emplace_back(Scaled{var, g});
    return *this;
}

SymMat AffineExpr::evaluate(const Assignment& values) const
{
    Mat acc = constant_;
    for (const auto& term : terms_)
    {
        if (const auto* c = std::get_if<Congruence>(&term))
        {
            auto it = values.find(c->var);
            if (it == values.end())
                throw SpecError("assignment is missing variable '" + c->var + "'");
            if (it->second.rows() != c->l.rows() || it->second.cols() != c->l.rows())
                throw SpecError("assignment for '" + c->var + "' has the wrong shape");
            acc += c->coeff * (c->l.transpose() * it->second * c->l);
        }
        else
        {
            const auto& s = std::get<Scaled>(term);
            auto it = values.find(s.var);
            if (it == values.end())
                throw SpecError("assignment is missing variable '" + s.var + "'");
            if (it->second.size() != 1)
                throw SpecError("assignment for '" + s.var + "' must be a scalar");
            acc += it->second(0, 0) * s.g;
        }
    }
    return SymMat(0.5 * (acc + acc.transpose()), std::numeric_limits<double>::infinity());
}

Problem& Problem::add_variable(std::string name, VarKind kind, Eigen::Index size)
{
    variables.push_back({std::move(name), kind, kind == VarKind::Symmetric ? size : 1});
    return *this;
}

Problem& Problem::add_constraint(std::string name, AffineExpr expr, Requirement req)
{
    constraints.push_back({std::move(name), std::move(expr), req});
    return *this;
}

const Variable& Problem::variable(const std::string& name) const
{
    for (const auto& v : variables)
        if (v.name == name)
            return v;
    throw SpecError("unknown variable '" + name + "'");
}

void Problem::validate() const
{
    std::set<std::string> names;
    for (const auto& v : variables)
    {
        if (!names.insert(v.name).second)
            throw SpecError("duplicate variable '" + v.name + "'");
        if (v.size < 1)
            throw SpecError("variable '" + v.name + "' must have size >= 1");
    }
    if (constraints.empty())
        throw SpecError("problem has no constraints");
    for (const auto& c : constraints)
    {
        const Mat& f0 = c.expr.constant();
        if ((f0 - f0.transpose()).cwiseAbs().maxCoeff() > Tolerances{}.atol_sym * std::max(1.0, f0.cwiseAbs().maxCoeff()))
            throw SpecError("constraint '" + c.name + "' has a non-symmetric constant term");
        for (const auto& term : c.expr.terms())
        {
            if (const auto* cg = std::get_if<AffineExpr::Congruence>(&term))
            {
                const Variable& v = variable(cg->var);
                if (v.kind != VarKind::Symmetric || cg->l.rows() != v.size)
                    throw SpecError("constraint '" + c.name + "': congruence term does not match '" + cg->var + "'");
            }
            else
            {
                const auto& sc = std::get<AffineExpr::Scaled>(term);
                const Variable& v = variable(sc.var);
                if (v.kind != VarKind::NonnegativeScalar)
                    throw SpecError("constraint '" + c.name + "': scaled term needs a scalar variable");
                if ((sc.g - sc.g.transpose()).cwiseAbs().maxCoeff() > Tolerances{}.atol_sym * std::max(1.0, sc.g.cwiseAbs().maxCoeff()))
                    throw SpecError("constraint '" + c.name + "': scaled term is not symmetric");
            }
        }
    }
}

std::vector<Margin> evaluate_margins(const Problem& prob, const Assignment& values)
{
    std::vector<Margin> out;
    for (const auto& c : prob.constraints)
        out.push_back({c.name, c.requirement, lambda_min(c.expr.evaluate(values))});
    for (const auto& v : prob.variables)
    {
        if (v.kind != VarKind::NonnegativeScalar)
            continue;
        auto it = values.find(v.name);
        if (it == values.end() || it->second.size() != 1)
            throw SpecError("assignment for scalar '" + v.name + "' is missing or malformed");
        out.push_back({v.name + " >= 0", Requirement::Psd, it->second(0, 0)});
    }
    return out;
}

bool verify_solution(const Problem& prob, const Solution& sol, const Tolerances& tol)
{
    for (const auto& v : prob.variables)
    {
        auto it = sol.assignment.find(v.name);
        if (it == sol.assignment.end())
            throw SpecError("assignment is missing variable '" + v.name + "'");
        const Eigen::Index k = v.kind == VarKind::Symmetric ? v.size : 1;
        if (it->second.rows() != k || it->second.cols() != k)
            throw SpecError("assignment for '" + v.name + "' has the wrong shape");
    }
    return margins_ok(evaluate_margins(prob, sol.assignment), tol);
}

Solution solve_feasibility(const Problem& prob, const Tolerances& tol, const Budget& budget)
{
    prob.validate();
    tol.validate();
    const Coordinates coords(prob);
    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                              std::chrono::duration<double>(budget.max_seconds));

    double max_threshold = 0;
    for (const auto& c : prob.constraints)
        max_threshold = std::max(max_threshold, threshold_for(c.requirement, tol));

    Solution best;
    double bound = budget.initial_bound;
    for (int attempt = 0; attempt <= budget.max_bound_escalations; ++attempt, bound *= budget.bound_growth)
    {
        const detail::Sdp sdp = build_sdp(prob, coords, tol, bound);
        const detail::SdpResult res = detail::solve_sdp(sdp, budget.max_iterations, deadline);

        Solution sol;
        sol.assignment = to_assignment(prob, coords, res.y);
        sol.margins = evaluate_margins(prob, sol.assignment);
        sol.slack = res.y(coords.slack_index());
        sol.slack_upper_bound =
            std::max(certified_upper_bound(sdp, res.x, coords.slack_index(), bound), sol.slack);
        sol.variable_bound = bound;
        sol.iterations = res.iterations;
        sol.trace = res.trace;

        if (margins_ok(sol.margins, tol))
        {
            sol.status = Status::Feasible;
            return sol;
        }

        const bool active = box_active(prob, sol.assignment, bound);
        std::ostringstream note;
        note << "bound " << bound << ": slack " << sol.slack << ", upper bound " << sol.slack_upper_bound
             << (res.converged ? "" : " (not converged)") << (active ? ", box active" : "");
        sol.note = note.str();

        if (!active && sol.slack_upper_bound + max_threshold < -tol.eps_psd)
        {
            sol.status = Status::Infeasible;
            return sol;
        }
        best = std::move(sol);
        best.status = Status::Inconclusive;
        if (res.timed_out || !active)
            break;
    }
    return best;
}

} // namespace dissipacert::lmi
