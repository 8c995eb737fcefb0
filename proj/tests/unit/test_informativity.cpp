#include <doctest.h>

#include "dissipacert/datagen.hpp"
#include "dissipacert/errors.hpp"
#include "dissipacert/informativity.hpp"
#include "dissipacert/oracle.hpp"
#include "random_matrices.hpp"

using namespace dissipacert;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd one(double v) { return MatrixXd::Constant(1, 1, v); }
Sys scalar(double a, double b, double c, double d) { return Sys(one(a), one(b), one(c), one(d)); }
double max_abs(const MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

DataRecord scalar_record(const Sys& sys, const MatrixXd& u, double x0 = 0.0)
{
    return datagen::simulate(sys, u, VectorXd::Constant(1, x0));
}

MatrixXd row(std::initializer_list<double> v)
{
    MatrixXd r(1, static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v)
        r(0, i++) = x;
    return r;
}

MatrixXd random_psd(std::mt19937_64& rng, Eigen::Index n)
{
    const MatrixXd g = testutil::gaussian(rng, n, testutil::uniform_int(rng, 1, static_cast<int>(n)));
    return testutil::uniform(rng, 0.01, 10.0) * g * g.transpose();
}

// Invariants of a counterexample pair, checked directly.
void check_pair(const CounterexamplePair& cx, const DataRecord& data, const NoiseSpec& spec, const SupplyRate& s)
{
    VectorXd k(cx.xi.size() + cx.eta.size());
    k << cx.xi, cx.eta;
    CHECK(std::abs(k.norm() - 1.0) < 1e-12);
    CHECK(max_abs(k.transpose() * data.Zminus()) <= 1e-9 * data.scale());
    CHECK(std::abs(cx.xi.dot(cx.x) + cx.eta.dot(cx.u) - 1.0) < 1e-9);
    CHECK(s.evaluate(cx.u, cx.y) < 0);
    CHECK(sigma_membership(cx.sys_a, data, spec));
    CHECK(sigma_membership(cx.sys_b, data, spec));

    std::mt19937_64 rng(17);
    for (int i = 0; i < 50; ++i)
    {
        const SymMat p(random_psd(rng, data.n()));
        const double err = witness_identity_error(cx, s, p);
        CHECK(err <= 1e-8 * std::max(1.0, max_abs(p.matrix())));
    }
}

} // namespace

TEST_CASE("rank condition examples")
{
    MatrixXd x(1, 3);
    x << 1, 0, 0;
    const DataRecord d(row({0, 1}), x, row({0, 0}));
    CHECK(rank_condition(d));
    CHECK_FALSE(rank_condition(DataRecord(MatrixXd::Zero(1, 2), MatrixXd::Zero(1, 3), MatrixXd::Zero(1, 2))));
    CHECK_FALSE(rank_condition(DataRecord(row({1}), MatrixXd::Ones(1, 2), row({1}))));

    const RankReport r = rank_report(d);
    CHECK(r.required == 2);
    CHECK(r.rank == 2);
    CHECK_FALSE(r.near_threshold);

    // sigma ratio 1e-8 sits inside the band around rtol_rank.
    MatrixXd xb(1, 3);
    xb << 1, 0, 0;
    const DataRecord band(row({0, 1e-8}), xb, row({0, 0}));
    CHECK(rank_report(band).near_threshold);
}

TEST_CASE("noiseless scalar bounded-real example")
{
    const Sys sys = scalar(0.5, 1, 1, 0);
    const DataRecord d = scalar_record(sys, row({1, -1, 1}));
    CHECK(d.X()(0, 1) == 1.0);
    const double hinf = oracle::hinf_norm_grid(sys);
    CHECK(hinf == doctest::Approx(2.0).epsilon(1e-6));

    const SupplyRate above = SupplyRate::bounded_real(2.5, 1, 1);
    const InformativityVerdict ok = informativity_noiseless(d, above);
    REQUIRE(ok.status == Verdict::Informative);
    REQUIRE(ok.storage);
    CHECK(lambda_min(dissipation_lmi_matrix(sys, above, *ok.storage)) >= -1e-7);
    CHECK(lambda_min(*ok.storage) >= -1e-8);
    REQUIRE(ok.identified);
    CHECK(max_abs(ok.identified->stacked() - sys.stacked()) < 1e-12);

    const InformativityVerdict bad = informativity_noiseless(d, SupplyRate::bounded_real(1.5, 1, 1));
    CHECK(bad.status == Verdict::NotInformative);
    CHECK_FALSE(bad.evidence);
}

TEST_CASE("zero input from rest gives rank evidence")
{
    const Sys sys = scalar(0.5, 1, 1, 0);
    const DataRecord d = scalar_record(sys, row({0, 0, 0, 0}));
    const SupplyRate s = SupplyRate::bounded_real(2.5, 1, 1);
    const InformativityVerdict v = informativity_noiseless(d, s);
    REQUIRE(v.status == Verdict::NotInformative);
    REQUIRE(v.evidence);
    check_pair(*v.evidence, d, NoiseN0{}, s);
}

TEST_CASE("counterexample from all-zero data and the zero system")
{
    const DataRecord d(MatrixXd::Zero(1, 3), MatrixXd::Zero(2, 4), MatrixXd::Zero(1, 3));
    const Sys ref(MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 1), MatrixXd::Zero(1, 2), MatrixXd::Zero(1, 1));
    const SupplyRate s = SupplyRate::positive_real(1);
    const CounterexamplePair cx = counterexample_construct(d, NoiseN0{}, ref, s);
    CHECK(max_abs(cx.sys_b.stacked()) > 0);
    check_pair(cx, d, NoiseN0{}, s);

    // No storage on a grid makes sys_b dissipative.
    for (double a = 0; a <= 5; a += 0.5)
        for (double b = 0; b <= 5; b += 0.5)
        {
            const SymMat p = SymMat::diagonal(Eigen::Vector2d(a, b));
            CHECK(lambda_min(dissipation_lmi_matrix(cx.sys_b, s, p)) < 0);
        }

    CHECK_THROWS_AS(counterexample_construct(scalar_record(scalar(0.5, 1, 1, 0), row({1, -1, 1})), NoiseN0{},
                                             scalar(0.5, 1, 1, 0), s),
                    NotApplicable);
}

TEST_CASE("zero input with exciting states: kernel direction is the input axis")
{
    MatrixXd a(2, 2);
    a << 0.5, 0.3, -0.2, 0.6;
    const Sys sys(a, MatrixXd::Ones(2, 1), MatrixXd::Ones(1, 2), one(0));
    const DataRecord d = datagen::simulate(sys, MatrixXd::Zero(1, 4), Eigen::Vector2d(1, 0.5));
    const Sys ref = least_squares_system(d);
    REQUIRE(sigma_membership(ref, d, NoiseN0{}));

    for (const SupplyRate& s : {SupplyRate::positive_real(1), SupplyRate::bounded_real(2.0, 1, 1)})
    {
        const CounterexamplePair cx = counterexample_construct(d, NoiseN0{}, ref, s);
        CHECK(cx.perturbed);
        CHECK(std::abs(std::abs(cx.eta(0)) - 1.0) < 1e-12);
        CHECK(cx.eta.dot(cx.u) == doctest::Approx(1.0));
        CHECK(cx.x.norm() == 0.0);
        CHECK(cx.u.norm() > 0);
        check_pair(cx, d, NoiseN0{}, s);
    }
}

TEST_CASE("identification recovers the generator")
{
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial)
    {
        const int n = testutil::uniform_int(rng, 1, 4), m = testutil::uniform_int(rng, 1, 2),
                  p = testutil::uniform_int(rng, 1, 2);
        const Sys sys = datagen::random_stable_sys(n, m, p, 0.9, 100 + trial);
        const int t = 2 * (n + m) + 2;
        const DataRecord d = datagen::simulate(sys, testutil::gaussian(rng, m, t), testutil::gaussian(rng, n, 1));
        REQUIRE(rank_condition(d));
        CHECK(max_abs(identify_unique(d).stacked() - sys.stacked()) < 1e-9);
    }

    // Square Z-.
    const Sys sys = scalar(0.3, 2, -1, 0.5);
    const DataRecord sq = scalar_record(sys, row({1, 0.5}), 1.0);
    CHECK(max_abs(identify_unique(sq).stacked() - sys.stacked()) < 1e-12);

    // Noise under an exact-data claim.
    MatrixXd noise = MatrixXd::Zero(2, 6);
    noise(0, 3) = 1e-3;
    const DataRecord noisy = datagen::simulate(sys, row({1, -2, 0.5, 1, 0.3, -1}), VectorXd::Zero(1), noise);
    CHECK_THROWS_AS(identify_unique(noisy), DataInconsistent);
    CHECK_THROWS_AS(informativity_noiseless(noisy, SupplyRate::bounded_real(10, 1, 1)), DataInconsistent);
}

TEST_CASE("noiseless verdict agrees with the model test on the identified system")
{
    std::mt19937_64 rng(23);
    int agreed = 0, total = 0;
    for (int trial = 0; trial < 30; ++trial)
    {
        const int n = testutil::uniform_int(rng, 1, 3);
        const Sys sys = datagen::random_stable_sys(n, 1, 1, 0.8, 500 + trial);
        const double hinf = oracle::hinf_norm_grid(sys, 2000);
        const double gamma = hinf * testutil::uniform(rng, 0.7, 1.3);
        const SupplyRate s = SupplyRate::bounded_real(gamma, 1, 1);
        const DataRecord d = datagen::simulate(sys, testutil::gaussian(rng, 1, 3 * (n + 1)), testutil::gaussian(rng, n, 1));
        const InformativityVerdict v = informativity_noiseless(d, s);
        const ModelDissipativity model = is_dissipative_model(sys, s);
        if (v.status == Verdict::Inconclusive || model.status == lmi::Status::Inconclusive)
            continue;
        ++total;
        agreed += (v.status == Verdict::Informative) == (model.status == lmi::Status::Feasible);
        if (std::abs(gamma / hinf - 1) > 0.02)
            CHECK((v.status == Verdict::Informative) == (gamma > hinf));
    }
    CHECK(total >= 25);
    CHECK(agreed == total);
}

TEST_CASE("build_n1 examples and block structure")
{
    const DataRecord zero(MatrixXd::Zero(1, 2), MatrixXd::Zero(1, 3), MatrixXd::Zero(1, 2));
    Eigen::VectorXd dg(4);
    dg << 1, 1, -1, -1;
    const SymMat n1 = build_n1(zero, SymMat::diagonal(dg));
    MatrixXd expect = MatrixXd::Zero(4, 4);
    expect.topLeftCorner(2, 2).setIdentity();
    CHECK(max_abs(n1.matrix() - expect) == 0.0);

    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 50; ++trial)
    {
        const int n = testutil::uniform_int(rng, 1, 3), m = testutil::uniform_int(rng, 1, 2),
                  p = testutil::uniform_int(rng, 1, 2), t = testutil::uniform_int(rng, 1, 8);
        const DataRecord d(testutil::gaussian(rng, m, t), testutil::gaussian(rng, n, t + 1), testutil::gaussian(rng, p, t));
        const SymMat phi(testutil::bounded_quadratic(rng, n + p, t));
        const SymMat big = build_n1(d, phi);
        const MatrixXd direct = d.Zminus() * phi.block22(n + p) * d.Zminus().transpose();
        CHECK(max_abs(big.block22(n + p) - direct) <= 1e-13 * std::max(1.0, max_abs(direct)));

        const NoiseN1 spec{phi, n + p};
        for (int k = 0; k < 20; ++k)
        {
            const Sys sys(testutil::gaussian(rng, n, n), testutil::gaussian(rng, n, m), testutil::gaussian(rng, p, n),
                          testutil::gaussian(rng, p, m));
            const double residual_form = membership_margin(residual(sys, d), spec);
            const double n1_form = lambda_min(quadratic_form(big, sys.stacked().transpose()));
            CHECK(residual_form == doctest::Approx(n1_form).epsilon(1e-8).scale(1.0));
        }
    }

    CHECK_THROWS_AS(build_n1(zero, SymMat::diagonal(Eigen::Vector4d(1, 1, 0, 0))), AssumptionError);
}

TEST_CASE("slater check")
{
    CHECK(slater_check(SymMat::diagonal(Eigen::Vector4d(1, 1, -1, -1)), 2));
    CHECK_FALSE(slater_check(SymMat::diagonal(Eigen::Vector4d(1, 1, 0, 0)), 2));

    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 50; ++trial)
    {
        const int q = testutil::uniform_int(rng, 1, 4), r = testutil::uniform_int(rng, 1, 4);
        const SymMat n1(testutil::bounded_quadratic(rng, q, r));
        REQUIRE(slater_check(n1, q));
        const auto v = slater_point(n1, q);
        REQUIRE(v);
        // Direct evaluation of the form at the maximizer.
        MatrixXd frame(q + r, q);
        frame << MatrixXd::Identity(q, q), *v;
        CHECK(testutil::sign_counts(frame.transpose() * n1.matrix() * frame, 0).pos == q);
    }
}

TEST_CASE("s-lemma certificate check examples")
{
    const SymMat n = SymMat::diagonal(Eigen::Vector2d(1, -1));
    CHECK(s_lemma_certificate_check(n, n, 1.0));
    CHECK_FALSE(s_lemma_certificate_check(SymMat::zero(2), n, 1.0));
    CHECK_FALSE(s_lemma_certificate_check(n, n, -1.0));
}

TEST_CASE("noisy path on exact passive data with a tiny noise ball")
{
    const Sys sys = scalar(0.5, 1, 1, 1);
    CHECK(oracle::positive_real_grid(sys));
    const DataRecord d = scalar_record(sys, row({1, -1, 0.5, 2, -0.3, 1, 0.2, -1}), 0.4);
    const Eigen::Index np = 2;
    const NoiseN1 spec = energy_bound(SymMat::identity(np) * 1e-6, d.T());
    const SupplyRate pr = SupplyRate::positive_real(1);

    const InformativityVerdict v = informativity_noisy_n1(d, spec.phi, pr);
    REQUIRE(v.status == Verdict::Informative);
    REQUIRE(v.storage);
    REQUIRE(v.q);
    REQUIRE(v.multiplier);
    CHECK(*v.multiplier >= 0);
    CHECK(lambda_min(*v.storage) >= Tolerances{}.eps_strict);
    CHECK(lambda_min(dissipation_lmi_matrix(sys, pr, *v.storage)) >= -1e-7);
    CHECK(s_lemma_certificate_check(certificate_matrix(*v.q, pr), build_n1(d, spec.phi), *v.multiplier));

    // Same data, gain bound far below the true H-infinity norm.
    const double hinf = oracle::hinf_norm_grid(sys);
    const InformativityVerdict bad = informativity_noisy_n1(d, spec.phi, SupplyRate::bounded_real(0.5 * hinf, 1, 1));
    CHECK(bad.status == Verdict::NotInformative);

    // Rank-deficient data: the N1 trailing block is singular.
    const DataRecord flat = scalar_record(sys, row({0, 0, 0, 0}));
    CHECK_THROWS_AS(informativity_noisy_n1(flat, energy_bound(SymMat::identity(np), 4).phi, pr), NotApplicable);
}

TEST_CASE("N2 path matches the N1 path on the equivalent model")
{
    const Sys sys = scalar(0.5, 1, 1, 1);
    const DataRecord d = scalar_record(sys, row({1, -1, 0.5, 2, -0.3, 1}), 0.4);
    const SupplyRate pr = SupplyRate::positive_real(1);
    const NoiseN1 phi = energy_bound(SymMat::identity(2) * 1e-4, d.T());
    const NoiseSpec theta = convert_noise(phi);
    const InformativityVerdict v1 = informativity(d, phi, pr);
    const InformativityVerdict v2 = informativity(d, theta, pr);
    CHECK(v1.status == v2.status);
    CHECK(v1.status == Verdict::Informative);

    const NoiseN2 bad{SymMat::diagonal(VectorXd::Ones(d.T() + 2)), d.T()};
    CHECK_THROWS_AS(informativity(d, bad, pr), AssumptionError);
}

TEST_CASE("noisy certificates hold on sampled consistent systems")
{
    datagen::ScenarioConfig cfg;
    cfg.n = 2;
    cfg.m = cfg.p = 1;
    cfg.T = 30;
    const Sys sys = datagen::random_stable_sys(2, 1, 1, 0.7, 5);
    cfg.system = sys;
    cfg.noise = energy_bound(SymMat::identity(3) * 1e-3, cfg.T);
    cfg.fill = 0.5;
    cfg.seed = 99;
    const datagen::Scenario sc = datagen::generate_scenario(cfg);
    REQUIRE(sc.rank_ok);
    const SupplyRate s = SupplyRate::bounded_real(2.0 * oracle::hinf_norm_grid(sys), 1, 1);

    const InformativityVerdict v = informativity(sc.data, sc.spec, s);
    REQUIRE(v.status == Verdict::Informative);
    const oracle::SystemSample members = oracle::sample_consistent_systems(sc.data, sc.spec, 300, 4);
    CHECK(members.systems.size() >= 250);
    CHECK(members.boundary > 0);
    const oracle::SampleReport rep = oracle::model_lmi_sweep(members.systems, s, *v.storage, 10 * Tolerances{}.eps_psd);
    CHECK(rep.failures.empty());

    // The dual inequality with Q for each member, via the congruence frame.
    const SymMat big = certificate_matrix(*v.q, s);
    const DualSupplyParts dual = dual_supply(s);
    for (const Sys& m : members.systems)
    {
        const SymMat ld = dissipation_lmi_matrix(m.transposed(), dual.Shat, *v.q);
        CHECK(lambda_min(ld) >= -10 * Tolerances{}.eps_psd);
        MatrixXd frame(6, 3);
        frame << MatrixXd::Identity(3, 3), m.stacked().transpose();
        CHECK(lambda_min(big.congruence(frame)) >= -10 * Tolerances{}.eps_psd);
    }
}
