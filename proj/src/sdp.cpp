#include "dissipacert/detail/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dissipacert::detail {

namespace {

using Mat = Eigen::MatrixXd;

double trace_product(const Mat& a, const Mat& b)
{
    // tr(a * b)
    return a.cwiseProduct(b.transpose()).sum();
}

// Largest alpha such that x + alpha * dx stays positive definite; x is
// positive definite with Cholesky factor l.
double max_step(const Eigen::LLT<Mat>& l, const Mat& dx)
{
    const Mat linv_dx = l.matrixL().solve(dx);
    const Mat w = l.matrixL().solve(linv_dx.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (w + w.transpose()), Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues()(0);
    if (lmin >= 0)
        return std::numeric_limits<double>::infinity();
    return -1.0 / lmin;
}

} // namespace

SdpResult solve_sdp(const Sdp& sdp, int max_iterations, std::chrono::steady_clock::time_point deadline)
{
    const int m = static_cast<int>(sdp.b.size());
    const std::size_t nb = sdp.blocks.size();

    std::vector<Mat> x(nb), s(nb);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
    double n_total = 0;
    double c_norm = 0;
    for (std::size_t k = 0; k < nb; ++k)
    {
        const auto& blk = sdp.blocks[k];
        const Eigen::Index n = blk.c.rows();
        n_total += static_cast<double>(n);
        const double sn = std::sqrt(static_cast<double>(n));
        double xi = std::max(10.0, sn);
        double eta = std::max({10.0, sn, blk.c.norm()});
        for (const auto& [i, a] : blk.a)
        {
            const double an = a.norm();
            xi = std::max(xi, sn * (1.0 + std::abs(sdp.b(i))) / (1.0 + an));
            eta = std::max(eta, an);
        }
        x[k] = xi * Mat::Identity(n, n);
        s[k] = eta * Mat::Identity(n, n);
        c_norm = std::max(c_norm, blk.c.norm());
    }
    const double b_norm = sdp.b.norm();

    SdpResult res;
    std::vector<Mat> rd(nb), s_inv(nb);

    auto objectives = [&](double& pobj, double& dobj) {
        pobj = 0;
        for (std::size_t k = 0; k < nb; ++k)
            pobj += trace_product(sdp.blocks[k].c, x[k]);
        dobj = sdp.b.dot(y);
    };

    for (int iter = 0; iter < max_iterations; ++iter)
    {
        // Residuals.
        Eigen::VectorXd rp = sdp.b;
        double dinf = 0;
        double mu = 0;
        for (std::size_t k = 0; k < nb; ++k)
        {
            const auto& blk = sdp.blocks[k];
            rd[k] = blk.c - s[k];
            for (const auto& [i, a] : blk.a)
            {
                rp(i) -= trace_product(a, x[k]);
                rd[k] -= y(i) * a;
            }
            dinf = std::max(dinf, rd[k].norm());
            mu += trace_product(x[k], s[k]);
        }
        mu /= n_total;
        double pobj = 0, dobj = 0;
        objectives(pobj, dobj);
        res.primal_infeasibility = rp.norm() / (1.0 + b_norm);
        res.dual_infeasibility = dinf / (1.0 + c_norm);
        res.primal_objective = pobj;
        res.dual_objective = dobj;
        res.iterations = iter;

        const double rel_gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
        if (rel_gap < 1e-11 && res.primal_infeasibility < 1e-10 && res.dual_infeasibility < 1e-10)
        {
            res.converged = true;
            break;
        }
        if (std::chrono::steady_clock::now() > deadline)
        {
            res.timed_out = true;
            break;
        }

        // Schur complement matrix M_ij = sum_k tr(A_ki X_k A_kj S_k^{-1}).
        std::vector<Eigen::LLT<Mat>> s_chol(nb), x_chol(nb);
        bool ok = true;
        for (std::size_t k = 0; k < nb && ok; ++k)
        {
            s_chol[k].compute(s[k]);
            x_chol[k].compute(x[k]);
            ok = s_chol[k].info() == Eigen::Success && x_chol[k].info() == Eigen::Success;
            if (ok)
                s_inv[k] = s_chol[k].solve(Mat::Identity(s[k].rows(), s[k].cols()));
        }
        if (!ok)
            break;

        Mat big_m = Mat::Zero(m, m);
        for (std::size_t k = 0; k < nb; ++k)
        {
            const auto& blk = sdp.blocks[k];
            for (const auto& [j, aj] : blk.a)
            {
                const Mat g = x[k] * aj * s_inv[k];
                for (const auto& [i, ai] : blk.a)
                    big_m(i, j) += trace_product(ai, g);
            }
        }
        big_m = 0.5 * (big_m + big_m.transpose());
        Eigen::LDLT<Mat> m_fact(big_m);
        if (m_fact.info() != Eigen::Success)
            break;

        // Newton system for a given centering target and corrector term.
        auto direction = [&](double sigma_mu, const std::vector<Mat>* corr, Eigen::VectorXd& dy, std::vector<Mat>& ds,
                             std::vector<Mat>& dx) {
            Eigen::VectorXd rhs = sdp.b;
            std::vector<Mat> tk(nb);
            for (std::size_t k = 0; k < nb; ++k)
            {
                tk[k] = -sigma_mu * s_inv[k] + x[k] * rd[k] * s_inv[k];
                if (corr)
                    tk[k] += (*corr)[k] * s_inv[k];
                for (const auto& [i, a] : sdp.blocks[k].a)
                    rhs(i) += trace_product(a, tk[k]);
            }
            dy = m_fact.solve(rhs);
            ds.resize(nb);
            dx.resize(nb);
            for (std::size_t k = 0; k < nb; ++k)
            {
                ds[k] = rd[k];
                for (const auto& [i, a] : sdp.blocks[k].a)
                    ds[k] -= dy(i) * a;
                Mat d = sigma_mu * s_inv[k] - x[k] - x[k] * ds[k] * s_inv[k];
                if (corr)
                    d -= (*corr)[k] * s_inv[k];
                dx[k] = 0.5 * (d + d.transpose());
            }
        };

        auto step_lengths = [&](const std::vector<Mat>& dx, const std::vector<Mat>& ds, double& ap, double& ad) {
            ap = std::numeric_limits<double>::infinity();
            ad = ap;
            for (std::size_t k = 0; k < nb; ++k)
            {
                ap = std::min(ap, max_step(x_chol[k], dx[k]));
                ad = std::min(ad, max_step(s_chol[k], ds[k]));
            }
        };

        // Predictor.
        Eigen::VectorXd dy;
        std::vector<Mat> ds, dx;
        direction(0.0, nullptr, dy, ds, dx);
        double ap = 0, ad = 0;
        step_lengths(dx, ds, ap, ad);
        ap = std::min(1.0, ap);
        ad = std::min(1.0, ad);
        double mu_aff = 0;
        for (std::size_t k = 0; k < nb; ++k)
            mu_aff += trace_product(x[k] + ap * dx[k], s[k] + ad * ds[k]);
        mu_aff /= n_total;
        const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);

        // Corrector.
        std::vector<Mat> corr(nb);
        for (std::size_t k = 0; k < nb; ++k)
            corr[k] = dx[k] * ds[k];
        direction(sigma * mu, &corr, dy, ds, dx);
        step_lengths(dx, ds, ap, ad);
        ap = std::min(1.0, 0.98 * ap);
        ad = std::min(1.0, 0.98 * ad);

        for (std::size_t k = 0; k < nb; ++k)
        {
            x[k] += ap * dx[k];
            s[k] += ad * ds[k];
            x[k] = 0.5 * (x[k] + x[k].transpose());
            s[k] = 0.5 * (s[k] + s[k].transpose());
        }
        y += ad * dy;
        res.trace.push_back(sdp.b.dot(y));
        res.iterations = iter + 1;
    }

    double pobj = 0, dobj = 0;
    objectives(pobj, dobj);
    res.primal_objective = pobj;
    res.dual_objective = dobj;
    res.y = y;
    res.x = x;
    return res;
}

} // namespace dissipacert::detail
