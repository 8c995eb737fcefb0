#include "dissipacert/datagen.hpp"

#include "dissipacert/errors.hpp"
#include "dissipacert/informativity.hpp"

#include <cmath>
#include <random>

namespace dissipacert::datagen {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Independent stream per purpose so changing one source does not shift the others.
std::mt19937_64 stream(std::uint64_t seed, std::uint32_t purpose)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), purpose};
    return std::mt19937_64(seq);
}

Mat gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0)
{
    std::normal_distribution<double> nd(0.0, scale);
    Mat g(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i)
            g(i, j) = nd(rng);
    return g;
}

} // namespace

void ScenarioConfig::validate() const
{
    if (n < 1 || m < 1 || p < 1 || T < 1)
        throw SpecError("scenario dimensions and horizon must be positive");
    if (!(fill > 0.0 && fill < 1.0))
        throw SpecError("fill fraction must lie in (0, 1)");
    if (!(spectral_radius_bound > 0.0 && spectral_radius_bound < 1.0))
        throw SpecError("spectral radius bound must lie in (0, 1)");
    if (system && (system->n() != n || system->m() != m || system->p() != p))
        throw SpecError("explicit system does not match the scenario dimensions");
    if (inputs && (inputs->rows() != m || inputs->cols() != T))
        throw SpecError("explicit input must be m x T");
    if (x0 && x0->size() != n)
        throw SpecError("explicit initial state must have n entries");
    if (noise && std::holds_alternative<NoiseN0>(*noise))
        throw SpecError("noise model must be N1 or N2");
    if (max_retries < 1)
        throw SpecError("max_retries must be positive");
}

DataRecord simulate(const Sys& sys, const Mat& inputs, const Vec& x0, const std::optional<Mat>& noise)
{
    const Eigen::Index n = sys.n(), p = sys.p(), t = inputs.cols();
    if (inputs.rows() != sys.m() || x0.size() != n)
        throw SpecError("simulate: input or initial state has the wrong size");
    if (noise && (noise->rows() != n + p || noise->cols() != t))
        throw SpecError("simulate: noise must be (n+p) x T");
    Mat x(n, t + 1), y(p, t);
    x.col(0) = x0;
    for (Eigen::Index k = 0; k < t; ++k)
    {
        x.col(k + 1) = sys.A * x.col(k) + sys.B * inputs.col(k);
        y.col(k) = sys.C * x.col(k) + sys.D * inputs.col(k);
        if (noise)
        {
            x.col(k + 1) += noise->col(k).head(n);
            y.col(k) += noise->col(k).tail(p);
        }
    }
    return DataRecord(inputs, x, y);
}

Mat noise_scaled_to_model(const NoiseSpec& spec, Eigen::Index rows, Eigen::Index samples, double rho,
                          std::uint64_t seed, const Tolerances& tol)
{
    if (!(rho > 0.0 && rho < 1.0))
        throw SpecError("fill fraction must lie in (0, 1)");
    if (std::holds_alternative<NoiseN0>(spec))
        throw SpecError("N0 admits no noise");
    if (!assumption_a2(spec, tol))
        throw AssumptionError("noise model violates the boundedness/interior assumption");
    const bool transposed = std::holds_alternative<NoiseN1>(spec);
    const QuadraticSet qs = quadratic_set(spec);
    if ((transposed && (qs.q != rows || qs.r() != samples)) || (!transposed && (qs.q != samples || qs.r() != rows)))
        throw SpecError("noise model dimensions do not match (n+p) x T");

    // In R-coordinates (R = V^T for N1, V for N2) the form is
    // Schur + D^T Psi22 D at R = center + D, decreasing along every ray.
    const Mat center = qs.center();
    std::mt19937_64 rng = stream(seed, 0x4015e);
    const Mat raw = gaussian(rng, rows, samples);
    const Mat dir = transposed ? Mat(raw.transpose()) : raw;
    const double top = lambda_min(qs.form(center));
    const double target = (1.0 - rho) * top;
    auto margin = [&](double t) { return lambda_min(qs.form(center + t * dir)); };

    double lo = 0.0, hi = 1.0;
    for (int k = 0; k < 200 && margin(hi) > target; ++k)
        hi *= 2.0;
    for (int k = 0; k < 200 && hi - lo > 1e-14 * hi; ++k)
    {
        const double mid = 0.5 * (lo + hi);
        (margin(mid) > target ? lo : hi) = mid;
    }
    const Mat r = center + lo * dir;
    return transposed ? Mat(r.transpose()) : r;
}

Sys random_stable_sys(Eigen::Index n, Eigen::Index m, Eigen::Index p, double bound, std::uint64_t seed)
{
    if (!(bound > 0.0 && bound < 1.0))
        throw SpecError("spectral radius bound must lie in (0, 1)");
    std::mt19937_64 rng = stream(seed, 0x5e5);
    Mat a = gaussian(rng, n, n);
    const double radius = bound * std::uniform_real_distribution<double>(0.5, 1.0)(rng);
    const double rho = a.eigenvalues().cwiseAbs().maxCoeff();
    a *= rho > 0 ? radius / rho * (1.0 - 1e-12) : 0.0;
    const Mat b = gaussian(rng, n, m), c = gaussian(rng, p, n), d = gaussian(rng, p, m);
    return Sys(a, b, c, d);
}

Scenario generate_scenario(const ScenarioConfig& cfg, const Tolerances& tol)
{
    cfg.validate();
    for (int attempt = 0;; ++attempt)
    {
        const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(attempt);
        const Sys sys = cfg.system ? *cfg.system : random_stable_sys(cfg.n, cfg.m, cfg.p, cfg.spectral_radius_bound, seed);
        std::mt19937_64 urng = stream(seed, 0x1);
        const Mat u = cfg.inputs ? *cfg.inputs : gaussian(urng, cfg.m, cfg.T, cfg.input_scale);
        std::mt19937_64 xrng = stream(seed, 0x2);
        const Vec x0 = cfg.x0 ? *cfg.x0 : Vec(gaussian(xrng, cfg.n, 1, cfg.x0_scale));

        std::optional<Mat> noise;
        NoiseSpec spec = NoiseN0{};
        if (cfg.noise)
        {
            spec = *cfg.noise;
            noise = noise_scaled_to_model(spec, cfg.n + cfg.p, cfg.T, cfg.fill, seed, tol);
        }
        DataRecord data = simulate(sys, u, x0, noise);
        const bool ok = rank_condition(data, tol);
        if (ok || !cfg.require_rank || attempt + 1 >= cfg.max_retries)
            return Scenario{sys, std::move(data), noise ? *noise : Mat(Mat::Zero(cfg.n + cfg.p, cfg.T)), spec, seed,
                            attempt, ok};
    }
}

} // namespace dissipacert::datagen
