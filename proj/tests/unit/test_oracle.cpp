#include <doctest.h>

#include "dissipacert/datagen.hpp"
#include "dissipacert/errors.hpp"
#include "dissipacert/informativity.hpp"
#include "dissipacert/oracle.hpp"
#include "random_matrices.hpp"

#include <cmath>
#include <numbers>

using namespace dissipacert;
using namespace dissipacert::oracle;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd one(double v) { return MatrixXd::Constant(1, 1, v); }
Sys scalar(double a, double b, double c, double d) { return Sys(one(a), one(b), one(c), one(d)); }

} // namespace

TEST_CASE("H-infinity grid on closed-form first-order systems")
{
    CHECK(hinf_norm_grid(scalar(0.5, 1, 1, 0)) == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(hinf_norm_grid(scalar(0, 1, 1, 0)) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(hinf_norm_grid(scalar(0, 0, 0, -3)) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK_THROWS_AS(hinf_norm_grid(scalar(1.2, 1, 1, 0)), NotApplicable);

    // Reference: the closed-form first-order response scanned 20x finer.
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 30; ++trial)
    {
        const double a = testutil::uniform(rng, -0.95, 0.95), b = testutil::uniform(rng, -2, 2),
                     c = testutil::uniform(rng, -2, 2), d = testutil::uniform(rng, -1, 1);
        double exact = 0;
        const int dense = 200000;
        for (int k = 0; k <= dense; ++k)
        {
            const double w = std::numbers::pi * k / dense;
            exact = std::max(exact, std::abs(c * b / (std::polar(1.0, w) - a) + d));
        }
        CHECK(hinf_norm_grid(scalar(a, b, c, d)) == doctest::Approx(exact).epsilon(1e-6));
    }
}

TEST_CASE("positive-real grid examples")
{
    CHECK(positive_real_grid(scalar(0.5, 1, 1, 1)));
    CHECK(positive_real_grid(scalar(0, 0, 0, 1)));
    CHECK_FALSE(positive_real_grid(scalar(0, 0, 0, -1)));
    CHECK_FALSE(positive_real_grid(scalar(0.5, 1, 1, 0)));
}

TEST_CASE("trajectory check agrees with the LMI")
{
    const Sys sys = scalar(0.5, 1, 1, 1);
    const SupplyRate pr = SupplyRate::positive_real(1);
    const ModelDissipativity md = is_dissipative_model(sys, pr);
    REQUIRE(md.storage);
    std::mt19937_64 rng(9);
    CHECK(trajectory_dissipation_check(sys, pr, *md.storage, testutil::gaussian(rng, 1, 200), VectorXd::Ones(1)));

    // Feasible storages form [0.5, 2]; 0.2 is outside.
    CHECK_FALSE(trajectory_dissipation_check(sys, pr, SymMat::identity(1) * 0.2, testutil::gaussian(rng, 1, 200),
                                             VectorXd::Ones(1)));

    const Sys zero = scalar(0, 0, 0, 0);
    CHECK(trajectory_dissipation_check(zero, pr, SymMat::identity(1) * 3, testutil::gaussian(rng, 1, 50),
                                       VectorXd::Zero(1)));

    // Random systems: with exciting data the stepwise check equals is_psd(L(P)).
    int compared = 0;
    for (int trial = 0; trial < 100; ++trial)
    {
        const int n = testutil::uniform_int(rng, 1, 3);
        const Sys s = datagen::random_stable_sys(n, 1, 1, 0.9, trial);
        const SupplyRate br = SupplyRate::bounded_real(testutil::uniform(rng, 0.5, 5), 1, 1);
        MatrixXd g = testutil::gaussian(rng, n, n);
        const SymMat p(g * g.transpose());
        const double lm = lambda_min(dissipation_lmi_matrix(s, br, p));
        if (std::abs(lm) < 1e-3)
            continue;
        // Restart from random states so [x; u] pairs span all directions.
        bool traj = true;
        for (int k = 0; k < 40 && traj; ++k)
            traj = trajectory_dissipation_check(s, br, p, testutil::gaussian(rng, 1, 5), testutil::gaussian(rng, n, 1));
        CHECK(traj == (lm >= 0));
        ++compared;
    }
    CHECK(compared > 50);
}

TEST_CASE("exact-data consistency set is a singleton")
{
    const Sys sys = datagen::random_stable_sys(2, 1, 1, 0.8, 12);
    std::mt19937_64 rng(1);
    const DataRecord d = datagen::simulate(sys, testutil::gaussian(rng, 1, 10), VectorXd::Ones(2));
    const SystemSample s = sample_consistent_systems(d, NoiseN0{}, 50, 3);
    REQUIRE(s.systems.size() == 1);
    CHECK((s.systems[0].stacked() - sys.stacked()).cwiseAbs().maxCoeff() < 1e-9);

    const DataRecord flat = datagen::simulate(sys, MatrixXd::Zero(1, 4), VectorXd::Zero(2));
    CHECK_THROWS_AS(sample_consistent_systems(flat, NoiseN0{}, 5, 3), NotApplicable);
}

TEST_CASE("noisy consistency samples are members; boundary members are tight")
{
    datagen::ScenarioConfig cfg;
    cfg.n = 2;
    cfg.T = 20;
    cfg.noise = energy_bound(SymMat::identity(3) * 0.01, cfg.T);
    cfg.seed = 42;
    const datagen::Scenario sc = datagen::generate_scenario(cfg);
    REQUIRE(sc.rank_ok);
    const SystemSample s = sample_consistent_systems(sc.data, sc.spec, 400, 7);
    CHECK(s.systems.size() == 400);
    CHECK(s.boundary > 20);
    CHECK_FALSE(s.starved);

    const SymMat n1 = build_n1(sc.data, std::get<NoiseN1>(sc.spec).phi);
    int tight = 0;
    for (const Sys& sys : s.systems)
    {
        CHECK(sigma_membership(sys, sc.data, sc.spec));
        const double lm = membership_margin(residual(sys, sc.data), sc.spec);
        tight += std::abs(lm) <= 1e-6;
        CHECK(lm == doctest::Approx(lambda_min(quadratic_form(n1, sys.stacked().transpose()))).scale(1.0).epsilon(1e-9));
    }
    CHECK(tight >= s.boundary);

    // The same through an N2 description of the same set.
    const SystemSample s2 = sample_consistent_systems(sc.data, convert_noise(sc.spec), 50, 7);
    for (const Sys& sys : s2.systems)
        CHECK(sigma_membership(sys, sc.data, sc.spec));
}

TEST_CASE("s-lemma sampling oracle")
{
    std::mt19937_64 rng(21);
    const SymMat n(testutil::bounded_quadratic(rng, 2, 3));

    const SampleReport same = s_lemma_sampling(n, n, 2, 3, 300, 1);
    CHECK(same.accepted == 300);
    CHECK(same.worst_margin >= -1e-8);
    CHECK(same.failures.empty());

    MatrixXd g = testutil::gaussian(rng, 5, 5);
    const SymMat plus(n.matrix() + g * g.transpose());
    CHECK(s_lemma_sampling(plus, n, 2, 3, 300, 2).failures.empty());

    // Planted violation: subtract a rank-one term that is large at the center.
    const MatrixXd center = QuadraticSet{n, 2}.center();
    MatrixXd frame(5, 2);
    frame << MatrixXd::Identity(2, 2), center;
    const VectorXd v = frame.col(0);
    const SymMat minus(n.matrix() - 100.0 * v * v.transpose());
    const SampleReport bad = s_lemma_sampling(minus, n, 2, 3, 300, 3);
    CHECK_FALSE(bad.failures.empty());
    CHECK(bad.worst_margin < 0);

    // Empty constraint set: -I form.
    CHECK_THROWS_AS(s_lemma_sampling(n, -SymMat::identity(5), 2, 3, 20, 4), SamplingStarved);
}
