#include "dissipacert/symmat.hpp"

#include "dissipacert/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace dissipacert {

void Tolerances::validate() const
{
    if (!(atol_sym > 0 && rtol_eig > 0 && eps_psd > 0 && eps_strict > 0 && rtol_rank > 0 && atol_data > 0))
        throw SpecError("tolerances must be strictly positive");
    if (!(eps_strict > eps_psd))
        throw SpecError("eps_strict must exceed eps_psd");
}

std::ostream& operator<<(std::ostream& os, const Inertia& in)
{
    return os << '(' << in.neg << ',' << in.zero << ',' << in.pos << ')';
}

SymMat::SymMat(const Eigen::MatrixXd& a, double atol_sym)
{
    if (a.rows() != a.cols())
        throw SpecError("SymMat requires a square matrix");
    if (a.rows() < 1)
        throw SpecError("SymMat requires dim >= 1");
    if (!a.allFinite())
        throw SpecError("SymMat entries must be finite");
    const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
    if (asym > atol_sym)
    {
        std::ostringstream msg;
        msg << "matrix is not symmetric: max |A - A^T| = " << asym << " > " << atol_sym;
        throw SpecError(msg.str());
    }
    m_ = 0.5 * (a + a.transpose());
}

SymMat SymMat::identity(Eigen::Index n) { return SymMat(Eigen::MatrixXd::Identity(n, n)); }

SymMat SymMat::zero(Eigen::Index n) { return SymMat(Eigen::MatrixXd::Zero(n, n)); }

SymMat SymMat::diagonal(const Eigen::VectorXd& d) { return SymMat(Eigen::MatrixXd(d.asDiagonal())); }

SymMat SymMat::from_blocks(const Eigen::MatrixXd& a11, const Eigen::MatrixXd& a12, const Eigen::MatrixXd& a22)
{
    if (a11.rows() != a11.cols() || a22.rows() != a22.cols() || a12.rows() != a11.rows() || a12.cols() != a22.rows())
        throw SpecError("from_blocks: inconsistent block sizes");
    const Eigen::Index k = a11.rows();
    const Eigen::Index n = k + a22.rows();
    Eigen::MatrixXd m(n, n);
    m.topLeftCorner(k, k) = a11;
    m.topRightCorner(k, n - k) = a12;
    m.bottomLeftCorner(n - k, k) = a12.transpose();
    m.bottomRightCorner(n - k, n - k) = a22;
    return SymMat(m, std::numeric_limits<double>::infinity());
}

SymMat SymMat::operator-() const
{
    SymMat r;
    r.m_ = -m_;
    return r;
}

SymMat SymMat::operator+(const SymMat& o) const
{
    if (o.dim() != dim())
        throw SpecError("SymMat addition: dimension mismatch");
    SymMat r;
    r.m_ = m_ + o.m_;
    return r;
}

SymMat SymMat::operator-(const SymMat& o) const { return *this + (-o); }

SymMat SymMat::operator*(double s) const
{
    SymMat r;
    r.m_ = s * m_;
    return r;
}

SymMat SymMat::congruence(const Eigen::MatrixXd& t) const
{
    if (t.rows() != dim())
        throw SpecError("congruence: dimension mismatch");
    const Eigen::MatrixXd r = t.transpose() * m_ * t;
    return SymMat(r, std::numeric_limits<double>::infinity());
}

SymMat SymMat::inverse() const
{
    Eigen::FullPivLU<Eigen::MatrixXd> lu(m_);
    if (!lu.isInvertible())
        throw SingularBlock("matrix is singular");
    return SymMat(lu.inverse(), std::numeric_limits<double>::infinity());
}

Eigen::VectorXd eigenvalues(const SymMat& a)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.matrix(), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw NumericalError("symmetric eigen-decomposition failed");
    return es.eigenvalues();
}

double lambda_min(const SymMat& a) { return eigenvalues(a)(0); }

double lambda_max(const SymMat& a)
{
    const Eigen::VectorXd ev = eigenvalues(a);
    return ev(ev.size() - 1);
}

double spectral_radius(const SymMat& a) { return eigenvalues(a).cwiseAbs().maxCoeff(); }

Inertia inertia(const SymMat& a, const Tolerances& tol)
{
    const Eigen::VectorXd ev = eigenvalues(a);
    const double threshold = tol.rtol_eig * std::max(1.0, ev.cwiseAbs().maxCoeff());
    Inertia in;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
    {
        if (std::abs(ev(i)) <= threshold)
            ++in.zero;
        else if (ev(i) < 0)
            ++in.neg;
        else
            ++in.pos;
    }
    return in;
}

bool is_psd(const SymMat& a, const Tolerances& tol) { return lambda_min(a) >= -tol.eps_psd; }

bool is_pd(const SymMat& a, const Tolerances& tol) { return lambda_min(a) >= tol.eps_strict; }

SymMat schur_complement(const SymMat& a, Eigen::Index k, const Tolerances& tol)
{
    if (k < 1 || k >= a.dim())
        throw SpecError("schur_complement: split must satisfy 1 <= k < dim");
    const SymMat a22(a.block22(k));
    if (inertia(a22, tol).zero != 0)
        throw SingularBlock("schur_complement: trailing block is singular");
    const Eigen::MatrixXd a12 = a.block12(k);
    const Eigen::MatrixXd s = a.block11(k) - a12 * a22.matrix().fullPivLu().solve(a12.transpose());
    return SymMat(0.5 * (s + s.transpose()), std::numeric_limits<double>::infinity());
}

bool haynsworth_check(const SymMat& a, Eigen::Index k, const Tolerances& tol)
{
    const SymMat sc = schur_complement(a, k, tol);
    return inertia(a, tol) == inertia(SymMat(a.block22(k)), tol) + inertia(sc, tol);
}

SymMat quadratic_form(const SymMat& psi, const Eigen::MatrixXd& r)
{
    const Eigen::Index q = r.cols();
    if (q + r.rows() != psi.dim())
        throw SpecError("quadratic_form: R has incompatible dimensions");
    Eigen::MatrixXd frame(psi.dim(), q);
    frame.topRows(q).setIdentity();
    frame.bottomRows(r.rows()) = r;
    return psi.congruence(frame);
}

} // namespace dissipacert
