#include "dissipacert/oracle.hpp"

#include "dissipacert/errors.hpp"
#include "dissipacert/informativity.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>

namespace dissipacert::oracle {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;

Mat gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols)
{
    std::normal_distribution<double> nd;
    Mat g(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i)
            g(i, j) = nd(rng);
    return g;
}

double form_margin(const SymMat& psi, const Mat& r) { return lambda_min(quadratic_form(psi, r)); }

// Largest t with the form still psd along center + t*dir, assuming the
// margin decreases monotonically in t and is nonnegative at t = lo.
double bisect_boundary(const SymMat& psi, const Mat& center, const Mat& dir, double lo, double hi)
{
    for (int it = 0; it < 80 && hi - lo > 1e-15 * std::max(1.0, hi); ++it)
    {
        const double mid = 0.5 * (lo + hi);
        (form_margin(psi, center + mid * dir) >= 0 ? lo : hi) = mid;
    }
    return lo;
}

struct SetSample
{
    std::vector<Mat> members;
    int attempted = 0;
    int accepted = 0;
    int boundary = 0;
};

// Accept-reject around `center` with boundary members from rejected rays.
SetSample sample_set(const SymMat& psi, Eigen::Index q, const Mat& center, bool monotone, int count, int budget,
                     std::mt19937_64& rng, double accept_tol)
{
    const Eigen::Index r = psi.dim() - q;
    SetSample out;
    if (form_margin(psi, center) >= -accept_tol)
        out.members.push_back(center);

    double reach = 1.0;
    if (monotone)
    {
        double total = 0.0;
        const int probes = 5;
        for (int k = 0; k < probes; ++k)
        {
            Mat dir = gaussian(rng, r, q);
            dir /= dir.norm();
            double hi = 1.0;
            for (int d = 0; d < 200 && form_margin(psi, center + hi * dir) >= 0; ++d)
                hi *= 2.0;
            total += bisect_boundary(psi, center, dir, 0.0, hi);
        }
        reach = std::max(total / probes, std::numeric_limits<double>::min());
    }

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (static_cast<int>(out.members.size()) < count && out.attempted < budget)
    {
        ++out.attempted;
        Mat dir = gaussian(rng, r, q);
        dir /= dir.norm();
        const double t = monotone ? 1.5 * reach * unit(rng) : std::exp(std::log(1e-3) + unit(rng) * std::log(1e6));
        if (form_margin(psi, center + t * dir) >= -accept_tol)
        {
            out.members.push_back(center + t * dir);
            ++out.accepted;
        }
        else if (monotone)
        {
            const double tb = bisect_boundary(psi, center, dir, 0.0, t);
            out.members.push_back(center + tb * dir);
            ++out.boundary;
        }
    }
    return out;
}

CMat transfer(const Sys& sys, double theta)
{
    const std::complex<double> z = std::polar(1.0, theta);
    const Eigen::Index n = sys.n();
    const CMat res = z * CMat::Identity(n, n) - sys.A.cast<std::complex<double>>();
    return sys.C.cast<std::complex<double>>() * res.partialPivLu().solve(sys.B.cast<std::complex<double>>()) +
           sys.D.cast<std::complex<double>>();
}

double gain(const Sys& sys, double theta)
{
    return Eigen::JacobiSVD<CMat>(transfer(sys, theta)).singularValues()(0);
}

void require_stable(const Sys& sys)
{
    const double rho = sys.A.eigenvalues().cwiseAbs().maxCoeff();
    if (!(rho < 1.0))
        throw NotApplicable("frequency-domain oracle needs a Schur stable A");
}

} // namespace

bool trajectory_dissipation_check(const Sys& sys, const SupplyRate& s, const SymMat& p, const Mat& inputs,
                                  const Vec& x0, const Tolerances& tol)
{
    if (inputs.rows() != sys.m() || x0.size() != sys.n() || p.dim() != sys.n())
        throw SpecError("trajectory check: dimension mismatch");
    Vec x = x0;
    for (Eigen::Index t = 0; t < inputs.cols(); ++t)
    {
        const Vec u = inputs.col(t);
        const Vec y = sys.C * x + sys.D * u;
        const Vec xn = sys.A * x + sys.B * u;
        const double step = x.dot(p.matrix() * x) + s.evaluate(u, y) - xn.dot(p.matrix() * xn);
        if (step < -tol.eps_psd * std::max(1.0, x.squaredNorm() + u.squaredNorm()))
            return false;
        x = xn;
    }
    return true;
}

SystemSample sample_consistent_systems(const DataRecord& data, const NoiseSpec& spec, int count, std::uint64_t seed,
                                       const Tolerances& tol)
{
    SystemSample out;
    out.seed = seed;
    if (count < 1)
        return out;
    const Eigen::Index n = data.n(), m = data.m(), p = data.p();

    if (std::holds_alternative<NoiseN0>(spec))
    {
        if (!rank_condition(data, tol))
            throw NotApplicable("the exact-data consistency set is not a singleton without full rank");
        out.systems.push_back(identify_unique(data, tol));
        out.attempted = out.accepted = 1;
        return out;
    }

    SymMat phi;
    if (const auto* n1 = std::get_if<NoiseN1>(&spec))
        phi = n1->phi;
    else
        phi = std::get<NoiseN1>(convert_noise(spec, tol)).phi;
    const SymMat n1 = build_n1(data, phi, tol);
    const Eigen::Index q = n + p;

    // Membership in W^T-coordinates: [I; W^T]^T N1 [I; W^T] >= 0.
    const bool monotone = slater_check(n1, q, tol);
    const Mat center = monotone ? QuadraticSet{n1, q}.center() : Mat(least_squares_system(data).stacked().transpose());

    std::mt19937_64 rng(seed);
    const int budget = std::max(100, 50 * count);
    const SetSample s = sample_set(n1, q, center, monotone, count, budget, rng, 0.0);
    out.attempted = s.attempted;
    for (const Mat& r : s.members)
    {
        const Sys sys = Sys::from_stacked(r.transpose(), n, m);
        if (sigma_membership(sys, data, spec, tol))
            out.systems.push_back(sys);
    }
    out.accepted = s.accepted;
    out.boundary = s.boundary;
    out.starved = static_cast<int>(out.systems.size()) < count &&
                  (s.accepted + s.boundary) < 0.001 * std::max(1, s.attempted);
    if (out.systems.empty())
        throw SamplingStarved("no consistent system found");
    return out;
}

SampleReport model_lmi_sweep(const std::vector<Sys>& systems, const SupplyRate& s, const SymMat& p, double threshold)
{
    SampleReport rep;
    rep.threshold = threshold;
    rep.worst_margin = std::numeric_limits<double>::infinity();
    for (const Sys& sys : systems)
    {
        ++rep.attempted;
        ++rep.accepted;
        const double lm = lambda_min(dissipation_lmi_matrix(sys, s, p));
        rep.worst_margin = std::min(rep.worst_margin, lm);
        if (lm < -threshold)
            rep.failures.push_back(sys.stacked());
    }
    return rep;
}

double hinf_norm_grid(const Sys& sys, int grid_size, int refine_iters)
{
    require_stable(sys);
    grid_size = std::max(grid_size, 8);
    const double pi = std::numbers::pi;
    const double h = pi / (grid_size - 1);
    std::vector<double> g(grid_size);
    for (int i = 0; i < grid_size; ++i)
        g[i] = gain(sys, i * h);

    double best = *std::max_element(g.begin(), g.end());
    // Refine every local maximum within 10% of the grid peak.
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int i = 0; i < grid_size; ++i)
    {
        const bool left = i == 0 || g[i] >= g[i - 1];
        const bool right = i == grid_size - 1 || g[i] >= g[i + 1];
        if (!left || !right || g[i] < 0.9 * best)
            continue;
        double a = std::max(0.0, (i - 1) * h), b = std::min(pi, (i + 1) * h);
        double c = b - invphi * (b - a), d = a + invphi * (b - a);
        double gc = gain(sys, c), gd = gain(sys, d);
        for (int it = 0; it < refine_iters; ++it)
        {
            if (gc > gd)
            {
                b = d;
                d = c;
                gd = gc;
                c = b - invphi * (b - a);
                gc = gain(sys, c);
            }
            else
            {
                a = c;
                c = d;
                gc = gd;
                d = a + invphi * (b - a);
                gd = gain(sys, d);
            }
        }
        best = std::max({best, gc, gd, gain(sys, a), gain(sys, b)});
    }
    return best;
}

bool positive_real_grid(const Sys& sys, int grid_size, const Tolerances& tol)
{
    if (sys.m() != sys.p())
        throw SpecError("positive-real test needs a square system");
    require_stable(sys);
    grid_size = std::max(grid_size, 8);
    const double h = std::numbers::pi / (grid_size - 1);
    for (int i = 0; i < grid_size; ++i)
    {
        const CMat hz = transfer(sys, i * h);
        const CMat herm = hz + hz.adjoint();
        const double lm = Eigen::SelfAdjointEigenSolver<CMat>(herm).eigenvalues()(0);
        if (lm < -tol.eps_psd)
            return false;
    }
    return true;
}

SampleReport s_lemma_sampling(const SymMat& m, const SymMat& n, Eigen::Index q, Eigen::Index r, int samples,
                              std::uint64_t seed, const Tolerances& tol)
{
    if (m.dim() != n.dim() || q + r != n.dim() || q < 1 || r < 1)
        throw SpecError("s_lemma_sampling: dimension mismatch");
    SampleReport rep;
    rep.seed = seed;
    rep.threshold = 10.0 * tol.eps_psd;
    rep.worst_margin = std::numeric_limits<double>::infinity();

    const bool monotone = bounded_with_interior(n, q, tol);
    const Mat center = monotone ? QuadraticSet{n, q}.center() : Mat(Mat::Zero(r, q));
    std::mt19937_64 rng(seed);
    const SetSample s = sample_set(n, q, center, monotone, samples, std::max(100, 50 * samples), rng, tol.eps_psd);
    rep.attempted = s.attempted;
    for (const Mat& z : s.members)
    {
        ++rep.accepted;
        const double lm = form_margin(m, z);
        rep.worst_margin = std::min(rep.worst_margin, lm);
        if (lm < -rep.threshold)
            rep.failures.push_back(z);
    }
    if (rep.accepted == 0)
        throw SamplingStarved("no Z satisfying the constraint form was found");
    return rep;
}

} // namespace dissipacert::oracle
