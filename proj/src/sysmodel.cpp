#include "dissipacert/sysmodel.hpp"

#include "dissipacert/errors.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace dissipacert {

namespace {

using Mat = Eigen::MatrixXd;
constexpr double kNoCheck = std::numeric_limits<double>::infinity();

std::string dims(const Mat& m)
{
    std::ostringstream os;
    os << m.rows() << "x" << m.cols();
    return os.str();
}

// [[0, -I_a], [I_b, 0]] with column blocks (b, a).
Mat flip(Eigen::Index a, Eigen::Index b)
{
    Mat j = Mat::Zero(a + b, a + b);
    j.topRightCorner(a, a) = -Mat::Identity(a, a);
    j.bottomLeftCorner(b, b) = Mat::Identity(b, b);
    return j;
}

} // namespace

// ---- Sys -----------------------------------------------------------------

Sys::Sys(Mat a, Mat b, Mat c, Mat d)
    : A(std::move(a))
    , B(std::move(b))
    , C(std::move(c))
    , D(std::move(d))
{
    validate();
}

void Sys::validate() const
{
    const Eigen::Index n = A.rows(), m = B.cols(), p = C.rows();
    if (n < 1 || m < 1 || p < 1)
        throw SpecError("system dimensions must be positive");
    if (A.cols() != n || B.rows() != n || C.cols() != n || D.rows() != p || D.cols() != m)
        throw SpecError("inconsistent system blocks: A " + dims(A) + ", B " + dims(B) + ", C " + dims(C) + ", D " +
                        dims(D));
}

Mat Sys::stacked() const
{
    Mat w(n() + p(), n() + m());
    w << A, B, C, D;
    return w;
}

Sys Sys::from_stacked(const Mat& w, Eigen::Index n, Eigen::Index m)
{
    if (w.rows() <= n || w.cols() != n + m)
        throw SpecError("from_stacked: shape " + dims(w) + " does not fit n, m");
    const Eigen::Index p = w.rows() - n;
    return Sys(w.topLeftCorner(n, n), w.topRightCorner(n, m), w.bottomLeftCorner(p, n), w.bottomRightCorner(p, m));
}

Sys Sys::transposed() const { return Sys(A.transpose(), C.transpose(), B.transpose(), D.transpose()); }

// ---- SupplyRate ----------------------------------------------------------

SupplyRate::SupplyRate(SymMat s, Eigen::Index m, Eigen::Index p, bool assert_a1, const Tolerances& tol)
    : s_(std::move(s))
    , m_(m)
    , p_(p)
{
    if (m < 1 || p < 1 || s_.dim() != m + p)
        throw SpecError("supply rate must be (m+p) x (m+p)");
    if (assert_a1 && !assumption_a1(s_, m, p, tol))
    {
        std::ostringstream msg;
        msg << "supply rate violates the inertia assumption: In(S) = " << inertia(s_, tol) << ", expected (" << p
            << ",0," << m << ")";
        throw AssumptionError(msg.str());
    }
}

SupplyRate SupplyRate::bounded_real(double gamma, Eigen::Index m, Eigen::Index p)
{
    if (!(gamma > 0))
        throw SpecError("bounded-real supply needs gamma > 0");
    Eigen::VectorXd d(m + p);
    d.head(m).setConstant(gamma * gamma);
    d.tail(p).setConstant(-1.0);
    return SupplyRate(SymMat::diagonal(d), m, p);
}

SupplyRate SupplyRate::positive_real(Eigen::Index m)
{
    Mat s = Mat::Zero(2 * m, 2 * m);
    s.topRightCorner(m, m).setIdentity();
    s.bottomLeftCorner(m, m).setIdentity();
    return SupplyRate(SymMat(s), m, m);
}

double SupplyRate::evaluate(const Eigen::VectorXd& u, const Eigen::VectorXd& y) const
{
    if (u.size() != m_ || y.size() != p_)
        throw SpecError("supply evaluation: wrong vector sizes");
    Eigen::VectorXd w(m_ + p_);
    w << u, y;
    return w.dot(s_.matrix() * w);
}

// ---- DataRecord ----------------------------------------------------------

DataRecord::DataRecord(Mat u, Mat x, Mat y)
    : u_(std::move(u))
    , x_(std::move(x))
    , y_(std::move(y))
{
    if (u_.cols() < 1)
        throw SpecError("data record needs T >= 1");
    if (x_.cols() != u_.cols() + 1)
        throw SpecError("X must have exactly T+1 columns");
    if (y_.cols() != u_.cols())
        throw SpecError("Y must have exactly T columns");
    if (u_.rows() < 1 || x_.rows() < 1 || y_.rows() < 1)
        throw SpecError("data record needs at least one input, state and output channel");
    if (!u_.allFinite() || !x_.allFinite() || !y_.allFinite())
        throw SpecError("data record contains non-finite values");
}

Mat DataRecord::Zminus() const
{
    Mat z(n() + m(), T());
    z << Xminus(), u_;
    return z;
}

Mat DataRecord::Zplus() const
{
    Mat z(n() + p(), T());
    z << Xplus(), y_;
    return z;
}

double DataRecord::scale() const
{
    return std::max({1.0, u_.cwiseAbs().maxCoeff(), x_.cwiseAbs().maxCoeff(), y_.cwiseAbs().maxCoeff()});
}

// ---- noise models --------------------------------------------------------

const char* model_tag(const NoiseSpec& spec)
{
    switch (spec.index())
    {
    case 0:
        return "N0";
    case 1:
        return "N1";
    default:
        return "N2";
    }
}

Mat QuadraticSet::center() const
{
    const Mat p22 = psi.block22(q);
    Eigen::FullPivLU<Mat> lu(p22);
    if (!lu.isInvertible())
        throw SingularBlock("quadratic set: trailing block is singular, no center");
    return -lu.solve(psi.block12(q).transpose());
}

QuadraticSet quadratic_set(const NoiseSpec& spec)
{
    if (const auto* n1 = std::get_if<NoiseN1>(&spec))
        return {n1->phi, n1->rows};
    if (const auto* n2 = std::get_if<NoiseN2>(&spec))
        return {n2->theta, n2->samples};
    throw NotApplicable("the N0 model has no quadratic description");
}

bool assumption_a1(const SymMat& s, Eigen::Index m, Eigen::Index p, const Tolerances& tol)
{
    if (s.dim() != m + p)
        return false;
    return inertia(s, tol) == Inertia{static_cast<int>(p), 0, static_cast<int>(m)};
}

bool assumption_a1(const SupplyRate& s, const Tolerances& tol) { return assumption_a1(s.S(), s.m(), s.p(), tol); }

bool bounded_with_interior(const SymMat& psi, Eigen::Index q, const Tolerances& tol)
{
    if (q < 1 || q >= psi.dim())
        throw SpecError("partition index out of range");
    // Strictness of a hypothesis is a sign question, so it goes through the
    // relative zero threshold rather than the certificate margin eps_strict.
    const SymMat p22(psi.block22(q));
    if (inertia(p22, tol).neg != p22.dim())
        return false;
    const SymMat sc = schur_complement(psi, q, tol);
    return inertia(sc, tol).pos == sc.dim();
}

bool assumption_a2(const NoiseSpec& spec, const Tolerances& tol)
{
    if (std::holds_alternative<NoiseN0>(spec))
        throw NotApplicable("assumption A2 concerns the N1 and N2 models only");
    const QuadraticSet qs = quadratic_set(spec);
    return bounded_with_interior(qs.psi, qs.q, tol);
}

NoiseN1 energy_bound(const SymMat& phi11, Eigen::Index samples)
{
    if (samples < 1)
        throw SpecError("energy bound needs T >= 1");
    return {SymMat::from_blocks(phi11.matrix(), Mat::Zero(phi11.dim(), samples),
                                -Mat::Identity(samples, samples)),
            phi11.dim()};
}

CovarianceModel covariance_bound(const SymMat& bound, Eigen::Index samples, double epsilon, const Tolerances& tol)
{
    if (samples < 2)
        throw SpecError("sample covariance needs T >= 2");
    if (epsilon < 0)
        throw SpecError("regularization must be nonnegative");
    const double t = static_cast<double>(samples);
    const Mat centering = Mat::Identity(samples, samples) - Mat::Constant(samples, samples, 1.0 / t);
    const Mat phi22 = -(1.0 / (t - 1.0)) * centering - epsilon * Mat::Identity(samples, samples);
    CovarianceModel out;
    out.spec = {SymMat::from_blocks(bound.matrix(), Mat::Zero(bound.dim(), samples), phi22), bound.dim()};
    out.regularized = epsilon > 0;
    out.epsilon = epsilon;
    out.satisfies_a2 = bounded_with_interior(out.spec.phi, out.spec.rows, tol);
    return out;
}

Mat residual(const Sys& sys, const DataRecord& data)
{
    if (sys.n() != data.n() || sys.m() != data.m() || sys.p() != data.p())
        throw SpecError("system and data dimensions differ");
    return data.Zplus() - sys.stacked() * data.Zminus();
}

namespace {

void check_noise_shape(const Mat& v, const NoiseSpec& spec)
{
    if (const auto* n1 = std::get_if<NoiseN1>(&spec))
    {
        if (v.rows() != n1->rows || v.cols() != n1->phi.dim() - n1->rows)
            throw SpecError("noise matrix " + dims(v) + " does not match the N1 model");
    }
    else if (const auto* n2 = std::get_if<NoiseN2>(&spec))
    {
        if (v.cols() != n2->samples || v.rows() != n2->theta.dim() - n2->samples)
            throw SpecError("noise matrix " + dims(v) + " does not match the N2 model");
    }
}

SymMat membership_form(const Mat& v, const NoiseSpec& spec)
{
    check_noise_shape(v, spec);
    const QuadraticSet qs = quadratic_set(spec);
    return std::holds_alternative<NoiseN1>(spec) ? qs.form(v.transpose()) : qs.form(v);
}

} // namespace

double membership_margin(const Mat& v, const NoiseSpec& spec) { return lambda_min(membership_form(v, spec)); }

bool noise_membership(const Mat& v, const NoiseSpec& spec, const Tolerances& tol, double scale)
{
    if (std::holds_alternative<NoiseN0>(spec))
        return v.size() == 0 || v.cwiseAbs().maxCoeff() <= tol.atol_data * std::max(1.0, scale);
    return membership_margin(v, spec) >= -tol.eps_psd;
}

bool sigma_membership(const Sys& sys, const DataRecord& data, const NoiseSpec& spec, const Tolerances& tol)
{
    const Mat v = residual(sys, data);
    const double scale = data.scale() * std::max(1.0, sys.stacked().cwiseAbs().maxCoeff());
    return noise_membership(v, spec, tol, scale);
}

// ---- duality -------------------------------------------------------------

SymMat dualize_quadratic_set(const SymMat& psi, Eigen::Index q, const Tolerances& tol)
{
    if (q < 1 || q >= psi.dim())
        throw SpecError("dualize: partition index out of range");
    if (inertia(psi, tol).zero != 0)
        throw SingularBlock("dualize: matrix is singular");
    const Eigen::Index r = psi.dim() - q;
    const Mat inv = psi.matrix().fullPivLu().inverse();
    const Mat xi = flip(r, q) * inv * flip(q, r);
    return SymMat(0.5 * (xi + xi.transpose()), kNoCheck);
}

DualSupplyParts dual_supply(const SupplyRate& s, const Tolerances& tol)
{
    if (inertia(s.S(), tol).zero != 0)
        throw SingularSupply("supply matrix S is singular");
    const Eigen::Index m = s.m(), p = s.p();
    const Mat neg_inv = -s.S().matrix().fullPivLu().inverse();
    DualSupplyParts out;
    out.Fhat = neg_inv.topLeftCorner(m, m);
    out.Ghat = neg_inv.topRightCorner(m, p);
    out.Hhat = neg_inv.bottomRightCorner(p, p);
    out.Shat = dualize_quadratic_set(s.S(), m, tol);
    return out;
}

NoiseSpec convert_noise(const NoiseSpec& spec, const Tolerances& tol)
{
    if (std::holds_alternative<NoiseN0>(spec))
        throw NotApplicable("the N0 model has no dual quadratic description");
    if (!assumption_a2(spec, tol))
        throw AssumptionError(std::string("noise model ") + model_tag(spec) +
                              " violates the boundedness/interior assumption; conversion undefined");
    if (const auto* n1 = std::get_if<NoiseN1>(&spec))
        return NoiseN2{dualize_quadratic_set(n1->phi, n1->rows, tol), n1->phi.dim() - n1->rows};
    const auto& n2 = std::get<NoiseN2>(spec);
    return NoiseN1{dualize_quadratic_set(n2.theta, n2.samples, tol), n2.theta.dim() - n2.samples};
}

// ---- model-based dissipativity ------------------------------------------

SymMat dissipation_lmi_matrix(const Sys& sys, const SymMat& s, const SymMat& p)
{
    const Eigen::Index n = sys.n(), m = sys.m(), pp = sys.p();
    if (p.dim() != n)
        throw SpecError("storage matrix must be n x n");
    if (s.dim() != m + pp)
        throw SpecError("supply matrix must be (m+p) x (m+p)");
    Mat e1 = Mat::Zero(n, n + m);
    e1.leftCols(n).setIdentity();
    Mat e2(n, n + m);
    e2 << sys.A, sys.B;
    Mat f = Mat::Zero(m + pp, n + m);
    f.topRightCorner(m, m).setIdentity();
    f.bottomLeftCorner(pp, n) = sys.C;
    f.bottomRightCorner(pp, m) = sys.D;
    const Mat l = e1.transpose() * p.matrix() * e1 - e2.transpose() * p.matrix() * e2 +
                  f.transpose() * s.matrix() * f;
    return SymMat(0.5 * (l + l.transpose()), kNoCheck);
}

SymMat dissipation_lmi_matrix(const Sys& sys, const SupplyRate& s, const SymMat& p)
{
    if (s.m() != sys.m() || s.p() != sys.p())
        throw SpecError("supply rate dimensions do not match the system");
    return dissipation_lmi_matrix(sys, s.S(), p);
}

ModelDissipativity is_dissipative_model(const Sys& sys, const SupplyRate& s, const Tolerances& tol,
                                        const lmi::Budget& budget)
{
    if (s.m() != sys.m() || s.p() != sys.p())
        throw SpecError("supply rate dimensions do not match the system");
    if (!assumption_a1(s, tol))
        throw AssumptionError("supply rate violates the inertia assumption");
    const Eigen::Index n = sys.n(), m = sys.m(), p = sys.p();

    Mat e1 = Mat::Zero(n, n + m);
    e1.leftCols(n).setIdentity();
    Mat e2(n, n + m);
    e2 << sys.A, sys.B;
    Mat f = Mat::Zero(m + p, n + m);
    f.topRightCorner(m, m).setIdentity();
    f.bottomLeftCorner(p, n) = sys.C;
    f.bottomRightCorner(p, m) = sys.D;

    lmi::Problem prob;
    prob.add_variable("P", lmi::VarKind::Symmetric, n);
    lmi::AffineExpr storage(n);
    storage.add_congruence("P", Mat::Identity(n, n));
    prob.add_constraint("P >= 0", storage);
    lmi::AffineExpr diss(n + m);
    const Mat supply = f.transpose() * s.S().matrix() * f;
    diss.add_constant(0.5 * (supply + supply.transpose())).add_congruence("P", e1).add_congruence("P", e2, -1.0);
    prob.add_constraint("L(P) >= 0", diss);

    ModelDissipativity out;
    out.solution = lmi::solve_feasibility(prob, tol, budget);
    out.status = out.solution.status;
    if (out.status == lmi::Status::Feasible)
        out.storage = SymMat(out.solution.assignment.at("P"), kNoCheck);
    return out;
}

} // namespace dissipacert
