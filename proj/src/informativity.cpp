#include "dissipacert/informativity.hpp"

#include "dissipacert/errors.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace dissipacert {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
constexpr double kNoCheck = std::numeric_limits<double>::infinity();

void check_supply_dims(const DataRecord& data, const SupplyRate& s)
{
    if (s.m() != data.m() || s.p() != data.p())
        throw SpecError("supply rate dimensions do not match the data");
}

void require_a1(const SupplyRate& s, const Tolerances& tol)
{
    if (!assumption_a1(s, tol))
        throw AssumptionError("supply rate violates the inertia assumption In(S) = (p,0,m)");
}

double max_abs(const Mat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

lmi::Margin margin(std::string name, lmi::Requirement req, double value) { return {std::move(name), req, value}; }

bool margin_ok(const lmi::Margin& m, const Tolerances& tol)
{
    return m.requirement == lmi::Requirement::Pd ? m.lambda_min >= tol.eps_strict : m.lambda_min >= -tol.eps_psd;
}

// Admissible (u, y) with s(u, y) < 0 and eta^T u = 1.
bool perturbed_witness(const SupplyRate& s, const Vec& eta, Vec& u, Vec& y)
{
    const Eigen::Index m = s.m(), p = s.p();
    Eigen::SelfAdjointEigenSolver<Mat> es(s.S().matrix());
    const Vec ev = es.eigenvalues();
    const Mat vecs = es.eigenvectors();
    const double lam0 = ev(0);
    auto accept = [&](const Vec& w) {
        const double sw = w.dot(s.S().matrix() * w);
        const double a = eta.dot(w.head(m));
        if (!(sw < 0.5 * lam0 * w.squaredNorm()) || std::abs(a) < 1e-3 * w.norm())
            return false;
        u = w.head(m) / a;
        y = w.tail(p) / a;
        return true;
    };

    // Best direction inside the negative eigenspace.
    Eigen::Index neg = 0;
    while (neg < ev.size() && ev(neg) < 0)
        ++neg;
    const Mat basis = vecs.leftCols(neg);
    const Vec c = basis.topRows(m).transpose() * eta;
    if (c.norm() > 0 && accept(basis * c / c.norm()))
        return true;

    // Perturb the most negative eigenvector with shrinking radii.
    const Vec w0 = vecs.col(0);
    Vec lift = Vec::Zero(m + p);
    lift.head(m) = eta;
    std::mt19937_64 rng(0x5eedULL);
    std::normal_distribution<double> nd;
    for (int k = 0; k < 1000; ++k)
    {
        Vec d(m + p);
        if (k < 50)
            d = lift;
        else
            for (Eigen::Index i = 0; i < d.size(); ++i)
                d(i) = nd(rng);
        d /= d.norm();
        const double r = 2.0 * std::pow(0.85, k % 50);
        if (accept(w0 + r * d))
            return true;
    }
    return false;
}

Mat selector(Eigen::Index rows, Eigen::Index offset, Eigen::Index dim)
{
    Mat e = Mat::Zero(rows, dim);
    e.block(0, offset, rows, rows).setIdentity();
    return e;
}

} // namespace

const char* to_string(Verdict v)
{
    switch (v)
    {
    case Verdict::Informative:
        return "Informative";
    case Verdict::NotInformative:
        return "NotInformative";
    default:
        return "Inconclusive";
    }
}

// ---- rank ----------------------------------------------------------------

RankReport rank_report(const DataRecord& data, const Tolerances& tol)
{
    RankReport r;
    r.required = data.n() + data.m();
    const Eigen::JacobiSVD<Mat> svd(data.Zminus());
    r.singular_values = svd.singularValues();
    r.sigma_max = r.singular_values.size() ? r.singular_values(0) : 0.0;
    r.sigma_min = data.T() >= r.required ? r.singular_values(r.required - 1) : 0.0;
    for (Eigen::Index i = 0; i < r.singular_values.size(); ++i)
        if (r.sigma_max > 0 && r.singular_values(i) > tol.rtol_rank * r.sigma_max)
            ++r.rank;
    r.full = r.rank == r.required;
    const double ratio = r.sigma_max > 0 ? r.sigma_min / r.sigma_max : 0.0;
    r.near_threshold = ratio >= tol.rtol_rank / 100.0 && ratio < tol.rtol_rank * 100.0;
    return r;
}

bool rank_condition(const DataRecord& data, const Tolerances& tol) { return rank_report(data, tol).full; }

CounterexamplePair counterexample_construct(const DataRecord& data, const NoiseSpec& spec, const Sys& ref,
                                            const SupplyRate& s, const Tolerances& tol)
{
    check_supply_dims(data, s);
    require_a1(s, tol);
    if (ref.n() != data.n() || ref.m() != data.m() || ref.p() != data.p())
        throw SpecError("reference system dimensions do not match the data");
    if (rank_condition(data, tol))
        throw NotApplicable("Z- has full row rank; no rank counterexample exists");
    if (!sigma_membership(ref, data, spec, tol))
        throw SpecError("reference system is not consistent with the data");

    const Eigen::Index n = data.n(), m = data.m();
    const Eigen::JacobiSVD<Mat> svd(data.Zminus(), Eigen::ComputeFullU);
    Vec k = svd.matrixU().col(n + m - 1);
    k /= k.norm();

    CounterexamplePair cx;
    cx.xi = k.head(n);
    cx.eta = k.tail(m);

    if (cx.xi.norm() >= cx.eta.norm())
    {
        Eigen::SelfAdjointEigenSolver<Mat> es(s.S().matrix());
        const Vec w = es.eigenvectors().col(0);
        cx.u = w.head(m);
        cx.y = w.tail(s.p());
        cx.x = ((1.0 - cx.eta.dot(cx.u)) / cx.xi.squaredNorm()) * cx.xi;
    }
    else
    {
        if (!perturbed_witness(s, cx.eta, cx.u, cx.y))
            throw NumericalError("no input with negative supply and nonzero kernel component found in 1000 samples");
        cx.x = Vec::Zero(n);
        cx.perturbed = true;
    }
    cx.supply = s.evaluate(cx.u, cx.y);

    const Vec zeta = cx.x - ref.A * cx.x - ref.B * cx.u;
    const Vec theta = cx.y - ref.C * cx.x - ref.D * cx.u;
    Vec lift(zeta.size() + theta.size());
    lift << zeta, theta;
    cx.sys_a = ref;
    cx.sys_b = Sys::from_stacked(ref.stacked() + lift * k.transpose(), n, m);

    if (!sigma_membership(cx.sys_b, data, spec, tol))
        throw NumericalError("constructed counterexample left the consistency set (kernel direction too inexact)");
    if (!(cx.supply < 0))
        throw NumericalError("witness supply is not negative");
    return cx;
}

double witness_identity_error(const CounterexamplePair& cx, const SupplyRate& s, const SymMat& p)
{
    Vec z(cx.x.size() + cx.u.size());
    z << cx.x, cx.u;
    const SymMat l = dissipation_lmi_matrix(cx.sys_b, s, p);
    return std::abs(z.dot(l.matrix() * z) - s.evaluate(cx.u, cx.y));
}

// ---- noiseless ------------------------------------------------------------

Sys least_squares_system(const DataRecord& data)
{
    const Mat wt = data.Zminus().transpose().completeOrthogonalDecomposition().solve(data.Zplus().transpose());
    return Sys::from_stacked(wt.transpose(), data.n(), data.m());
}

Sys identify_unique(const DataRecord& data, const Tolerances& tol)
{
    if (!rank_condition(data, tol))
        throw NotApplicable("identification needs rank(Z-) = n + m");
    const Sys sys = least_squares_system(data);
    const double res = max_abs(residual(sys, data));
    const double bound = tol.atol_data * data.scale() * std::max(1.0, max_abs(sys.stacked()));
    if (res > bound)
    {
        std::ostringstream msg;
        msg << "data are not explained exactly by a linear system: residual " << res << " exceeds " << bound;
        throw DataInconsistent(msg.str());
    }
    return sys;
}

SymMat data_dissipation_matrix(const DataRecord& data, const SupplyRate& s, const SymMat& p)
{
    check_supply_dims(data, s);
    if (p.dim() != data.n())
        throw SpecError("storage matrix must be n x n");
    Mat uy(data.m() + data.p(), data.T());
    uy << data.U(), data.Y();
    const Mat xm = data.Xminus(), xp = data.Xplus();
    const Mat c = xm.transpose() * p.matrix() * xm - xp.transpose() * p.matrix() * xp +
                  uy.transpose() * s.S().matrix() * uy;
    return SymMat(0.5 * (c + c.transpose()), kNoCheck);
}

InformativityVerdict informativity_noiseless(const DataRecord& data, const SupplyRate& s, const Tolerances& tol,
                                             const lmi::Budget& budget)
{
    check_supply_dims(data, s);
    require_a1(s, tol);
    InformativityVerdict v;
    v.rank = rank_report(data, tol);

    if (v.rank.near_threshold)
    {
        std::ostringstream note;
        note << "rank decision within the numerical band: sigma_min/sigma_max = "
             << (v.rank.sigma_max > 0 ? v.rank.sigma_min / v.rank.sigma_max : 0.0) << ", threshold " << tol.rtol_rank;
        v.status = Verdict::Inconclusive;
        v.note = note.str();
        return v;
    }

    if (!v.rank.full)
    {
        const Sys ref = least_squares_system(data);
        if (!sigma_membership(ref, data, NoiseN0{}, tol))
            throw DataInconsistent("no linear system explains the data exactly");
        v.evidence = counterexample_construct(data, NoiseN0{}, ref, s, tol);
        v.status = Verdict::NotInformative;
        v.margins.push_back(margin("witness supply", lmi::Requirement::Psd, v.evidence->supply));
        std::ostringstream note;
        note << "rank(Z-) = " << v.rank.rank << " < " << v.rank.required;
        v.note = note.str();
        return v;
    }

    const Sys sys = identify_unique(data, tol);
    v.identified = sys;
    const Eigen::Index n = data.n(), m = data.m();

    // cond2 is T x T but has T-(n+m) structural zero eigenvalues; restrict it
    // to the row space of Z-, spanned by the right singular vectors.
    const Eigen::JacobiSVD<Mat> svd(data.Zminus(), Eigen::ComputeThinV);
    const Mat w = svd.matrixV().leftCols(n + m);
    Mat uy(data.m() + data.p(), data.T());
    uy << data.U(), data.Y();
    const Mat uyw = uy * w;
    const Mat supply = uyw.transpose() * s.S().matrix() * uyw;

    lmi::Problem prob;
    prob.add_variable("P", lmi::VarKind::Symmetric, n);
    lmi::AffineExpr storage(n);
    storage.add_congruence("P", Mat::Identity(n, n));
    prob.add_constraint("P >= 0", storage);
    lmi::AffineExpr diss(n + m);
    diss.add_constant(0.5 * (supply + supply.transpose()))
        .add_congruence("P", data.Xminus() * w)
        .add_congruence("P", data.Xplus() * w, -1.0);
    prob.add_constraint("data dissipation", diss);

    const lmi::Solution sol = lmi::solve_feasibility(prob, tol, budget);
    v.slack_upper_bound = sol.slack_upper_bound;
    if (sol.status == lmi::Status::Infeasible)
    {
        v.status = Verdict::NotInformative;
        v.note = "data dissipation LMI infeasible: " + sol.note;
        return v;
    }
    if (sol.status == lmi::Status::Inconclusive)
    {
        v.status = Verdict::Inconclusive;
        v.note = sol.note;
        return v;
    }

    const SymMat p(sol.assignment.at("P"), kNoCheck);
    v.storage = p;
    v.margins.push_back(margin("P >= 0", lmi::Requirement::Psd, lambda_min(p)));
    v.margins.push_back(margin("data dissipation", lmi::Requirement::Psd, lambda_min(data_dissipation_matrix(data, s, p))));
    const double model = lambda_min(dissipation_lmi_matrix(sys, s, p));
    v.margins.push_back(margin("model LMI of identified system", lmi::Requirement::Psd, model));

    bool ok = margin_ok(v.margins[0], tol) && margin_ok(v.margins[1], tol);
    const double model_tol = tol.eps_psd * std::max(1.0, 1.0 / (v.rank.sigma_min * v.rank.sigma_min));
    ok = ok && model >= -model_tol;
    v.status = ok ? Verdict::Informative : Verdict::Inconclusive;
    if (!ok)
        v.note = "certificate failed its independent re-check";
    return v;
}

// ---- noisy --------------------------------------------------------------

SymMat build_n1(const DataRecord& data, const SymMat& phi, const Tolerances& tol)
{
    const Eigen::Index np = data.n() + data.p(), nm = data.n() + data.m(), t = data.T();
    if (phi.dim() != np + t)
        throw SpecError("Phi must have dimension (n+p) + T");
    if (!bounded_with_interior(phi, np, tol))
        throw AssumptionError("Phi violates the boundedness/interior assumption");
    Mat frame = Mat::Zero(np + t, np + nm);
    frame.topLeftCorner(np, np).setIdentity();
    frame.bottomLeftCorner(t, np) = data.Zplus().transpose();
    frame.bottomRightCorner(t, nm) = -data.Zminus().transpose();
    return phi.congruence(frame);
}

bool slater_check(const SymMat& n1, Eigen::Index split, const Tolerances& tol)
{
    if (split < 1 || split >= n1.dim())
        throw SpecError("slater_check: split out of range");
    return bounded_with_interior(n1, split, tol);
}

std::optional<Mat> slater_point(const SymMat& n1, Eigen::Index split, const Tolerances& tol)
{
    if (!slater_check(n1, split, tol))
        return std::nullopt;
    return QuadraticSet{n1, split}.center();
}

SymMat certificate_matrix(const SymMat& q, const SupplyRate& s, const Tolerances& tol)
{
    const Eigen::Index n = q.dim(), m = s.m(), p = s.p();
    const DualSupplyParts d = dual_supply(s, tol);
    Mat c = Mat::Zero(2 * n + p + m, 2 * n + p + m);
    c.block(0, 0, n, n) = q.matrix();
    c.block(n, n, p, p) = d.Hhat;
    c.block(n + p, n + p, n, n) = -q.matrix();
    c.block(2 * n + p, 2 * n + p, m, m) = d.Fhat;
    c.block(n, 2 * n + p, p, m) = -d.Ghat.transpose();
    c.block(2 * n + p, n, m, p) = -d.Ghat;
    return SymMat(0.5 * (c + c.transpose()), kNoCheck);
}

InformativityVerdict informativity_noisy_n1(const DataRecord& data, const SymMat& phi, const SupplyRate& s,
                                            const Tolerances& tol, const lmi::Budget& budget)
{
    check_supply_dims(data, s);
    require_a1(s, tol);
    const Eigen::Index n = data.n(), m = data.m(), p = data.p();
    InformativityVerdict v;
    v.rank = rank_report(data, tol);

    const SymMat n1 = build_n1(data, phi, tol);
    v.slater_point = slater_point(n1, n + p, tol);
    if (!v.slater_point)
    {
        std::string msg = "no strictly feasible noise explanation: the N1 set fails the Slater condition";
        if (!v.rank.full)
            msg += " (rank(Z-) < n + m)";
        throw NotApplicable(msg);
    }

    const Eigen::Index dim = 2 * n + p + m;
    lmi::Problem prob;
    prob.add_variable("Q", lmi::VarKind::Symmetric, n);
    prob.add_variable("alpha", lmi::VarKind::NonnegativeScalar);
    lmi::AffineExpr qpos(n);
    qpos.add_congruence("Q", Mat::Identity(n, n));
    prob.add_constraint("Q > 0", qpos, lmi::Requirement::Pd);
    lmi::AffineExpr main(dim);
    main.add_constant(certificate_matrix(SymMat::zero(n), s, tol).matrix())
        .add_congruence("Q", selector(n, 0, dim))
        .add_congruence("Q", selector(n, n + p, dim), -1.0)
        .add_scaled("alpha", -n1.matrix());
    prob.add_constraint("S-lemma LMI", main);

    const lmi::Solution sol = lmi::solve_feasibility(prob, tol, budget);
    v.slack_upper_bound = sol.slack_upper_bound;
    if (sol.status == lmi::Status::Infeasible)
    {
        v.status = Verdict::NotInformative;
        v.note = "S-lemma LMI infeasible: " + sol.note;
        return v;
    }
    if (sol.status == lmi::Status::Inconclusive)
    {
        v.status = Verdict::Inconclusive;
        v.note = sol.note;
        return v;
    }

    const SymMat q(sol.assignment.at("Q"), kNoCheck);
    const double alpha = sol.assignment.at("alpha")(0, 0);
    v.q = q;
    v.multiplier = alpha;
    v.margins.push_back(margin("Q > 0", lmi::Requirement::Pd, lambda_min(q)));
    v.margins.push_back(margin("S-lemma LMI", lmi::Requirement::Psd, s_lemma_margin(certificate_matrix(q, s, tol), n1, alpha)));
    v.margins.push_back(margin("alpha >= 0", lmi::Requirement::Psd, alpha));
    bool ok = alpha >= 0;
    for (const auto& mg : v.margins)
        ok = ok && margin_ok(mg, tol);
    if (ok)
    {
        const SymMat storage = q.inverse();
        v.storage = storage;
        v.margins.push_back(margin("P > 0", lmi::Requirement::Pd, lambda_min(storage)));
        ok = margin_ok(v.margins.back(), tol);
    }
    v.status = ok ? Verdict::Informative : Verdict::Inconclusive;
    if (!ok)
        v.note = "certificate failed its independent re-check";
    return v;
}

InformativityVerdict informativity_noisy_n2(const DataRecord& data, const SymMat& theta, const SupplyRate& s,
                                            const Tolerances& tol, const lmi::Budget& budget)
{
    if (theta.dim() != data.T() + data.n() + data.p())
        throw SpecError("Theta must have dimension T + (n+p)");
    const NoiseSpec phi = convert_noise(NoiseN2{theta, data.T()}, tol);
    InformativityVerdict v = informativity_noisy_n1(data, std::get<NoiseN1>(phi).phi, s, tol, budget);
    v.note = v.note.empty() ? "N2 model converted to N1" : "N2 model converted to N1; " + v.note;
    return v;
}

InformativityVerdict informativity(const DataRecord& data, const NoiseSpec& spec, const SupplyRate& s,
                                   const Tolerances& tol, const lmi::Budget& budget)
{
    if (std::holds_alternative<NoiseN0>(spec))
        return informativity_noiseless(data, s, tol, budget);
    if (const auto* n1 = std::get_if<NoiseN1>(&spec))
    {
        if (n1->rows != data.n() + data.p())
            throw SpecError("N1 split does not equal n + p");
        return informativity_noisy_n1(data, n1->phi, s, tol, budget);
    }
    const auto& n2 = std::get<NoiseN2>(spec);
    if (n2.samples != data.T())
        throw SpecError("N2 split does not equal T");
    return informativity_noisy_n2(data, n2.theta, s, tol, budget);
}

double s_lemma_margin(const SymMat& m, const SymMat& n, double alpha)
{
    if (m.dim() != n.dim())
        throw SpecError("S-lemma matrices differ in size");
    return lambda_min(SymMat(m.matrix() - alpha * n.matrix(), kNoCheck));
}

bool s_lemma_certificate_check(const SymMat& m, const SymMat& n, double alpha, const Tolerances& tol)
{
    return alpha >= 0 && s_lemma_margin(m, n, alpha) >= -tol.eps_psd;
}

} // namespace dissipacert
