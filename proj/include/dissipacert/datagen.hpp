#pragma once

#include "dissipacert/symmat.hpp"
#include "dissipacert/sysmodel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>

namespace dissipacert::datagen {

struct ScenarioConfig
{
    Eigen::Index n = 1, m = 1, p = 1;
    Eigen::Index T = 10;

    std::optional<Sys> system;           ///< explicit system; random stable otherwise
    double spectral_radius_bound = 0.9;  ///< for random systems, in (0, 1)

    std::optional<Eigen::MatrixXd> inputs; ///< explicit m x T input; Gaussian otherwise
    double input_scale = 1.0;
    std::optional<Eigen::VectorXd> x0;     ///< Gaussian when absent
    double x0_scale = 1.0;

    std::optional<NoiseSpec> noise; ///< noise drawn inside this model when set (N1 or N2)
    double fill = 0.5;              ///< rho in (0, 1)

    std::uint64_t seed = 0;
    bool require_rank = true;
    int max_retries = 10;

    /// Throws SpecError on inconsistent fields.
    void validate() const;
};

struct Scenario
{
    Sys system;
    DataRecord data;
    Eigen::MatrixXd noise;   ///< (n+p) x T, zero without a noise model
    NoiseSpec spec;          ///< N0 without a noise model
    std::uint64_t seed_used = 0;
    int retries = 0;
    bool rank_ok = false;
};

/// x(t+1) = A x + B u + w, y = C x + D u + z with [w; z] the optional noise.
DataRecord simulate(const Sys& sys, const Eigen::MatrixXd& inputs, const Eigen::VectorXd& x0,
                    const std::optional<Eigen::MatrixXd>& noise = std::nullopt);

/// Gaussian noise pushed along a ray from the center of the model's set
/// until the membership form has lambda_min = (1 - rho) * lambda_min at the
/// center. Throws AssumptionError unless A2 holds.
Eigen::MatrixXd noise_scaled_to_model(const NoiseSpec& spec, Eigen::Index rows, Eigen::Index samples, double rho,
                                      std::uint64_t seed, const Tolerances& tol = {});

/// A scaled to spectral radius bound * U(0.5, 1); B, C, D standard Gaussian.
Sys random_stable_sys(Eigen::Index n, Eigen::Index m, Eigen::Index p, double bound, std::uint64_t seed);

/// Runs the configuration, retrying with seed + k (k < max_retries) until
/// rank(Z-) = n + m when require_rank is set.
Scenario generate_scenario(const ScenarioConfig& cfg, const Tolerances& tol = {});

} // namespace dissipacert::datagen
