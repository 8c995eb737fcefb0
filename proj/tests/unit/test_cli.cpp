#include <doctest.h>

#include "dissipacert/cli.hpp"
#include "dissipacert/datagen.hpp"
#include "dissipacert/errors.hpp"
#include "dissipacert/io.hpp"
#include "random_matrices.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include <unistd.h>

using namespace dissipacert;
using namespace dissipacert::cli;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir
{
    fs::path path;
    explicit TempDir(const std::string& tag)
    {
        path = fs::temp_directory_path() / ("dissipacert_test_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path operator/(const std::string& s) const { return path / s; }
};

void write(const fs::path& p, const std::string& s) { io::write_file_atomic(p, s); }

struct Files
{
    fs::path data, supply, noise;
};

Files write_problem(const TempDir& dir, const DataRecord& d, const SupplyRate& s, const NoiseSpec& spec)
{
    Files f{dir / "data.csv", dir / "supply.json", dir / "noise.json"};
    write(f.data, io::format_data_csv(d));
    write(f.supply, io::format_supply_json(s));
    write(f.noise, io::format_noise_json({spec, d.n(), d.p(), d.T()}));
    return f;
}

int run_check(const Files& f, const fs::path& out, std::string* msg = nullptr)
{
    CheckOptions o;
    o.data = f.data;
    o.supply = f.supply;
    o.noise = f.noise;
    o.out = out;
    std::ostringstream so, se;
    const int code = cmd_check(o, so, se);
    if (msg)
        *msg = so.str() + se.str();
    return code;
}

int run_verify(const fs::path& cert, const Files& f)
{
    std::ostringstream so, se;
    return cmd_verify(cert, f.data, f.supply, f.noise, {}, so, se);
}

// Visits every number in a JSON document.
void for_each_number(json& j, const std::function<void(json&)>& fn)
{
    if (j.is_number())
        fn(j);
    else if (j.is_array() || j.is_object())
        for (auto& e : j)
            for_each_number(e, fn);
}

datagen::Scenario passive_scenario(Eigen::Index t, std::uint64_t seed)
{
    datagen::ScenarioConfig cfg;
    cfg.T = t;
    cfg.seed = seed;
    cfg.system = Sys(MatrixXd::Constant(1, 1, 0.5), MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1));
    return datagen::generate_scenario(cfg);
}

datagen::Scenario noisy_scenario(std::uint64_t seed)
{
    datagen::ScenarioConfig cfg;
    cfg.n = 2;
    cfg.T = 30;
    cfg.spectral_radius_bound = 0.8;
    cfg.noise = energy_bound(SymMat::identity(3) * 1e-3, cfg.T);
    cfg.seed = seed;
    return datagen::generate_scenario(cfg);
}

} // namespace

TEST_CASE("data CSV round trip is bit exact")
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial)
    {
        const int n = testutil::uniform_int(rng, 1, 4), m = testutil::uniform_int(rng, 1, 3),
                  p = testutil::uniform_int(rng, 1, 3), t = testutil::uniform_int(rng, 1, 12);
        MatrixXd u = testutil::gaussian(rng, m, t) * 1e3, x = testutil::gaussian(rng, n, t + 1) * 1e-7,
                 y = testutil::gaussian(rng, p, t);
        u(0, 0) = 0.1;
        const DataRecord d(u, x, y);
        const DataRecord back = io::parse_data_csv(io::format_data_csv(d));
        CHECK(back.U() == d.U());
        CHECK(back.X() == d.X());
        CHECK(back.Y() == d.Y());
    }
}

TEST_CASE("data CSV accepts reordered rows and rejects malformed files")
{
    const std::string ok = "channel,0,1,2\nx1,1,2,3\ny1, 4 ,5,\nu1,+6,7e-1,\n";
    const DataRecord d = io::parse_data_csv(ok);
    CHECK(d.n() == 1);
    CHECK(d.U()(0, 0) == 6);
    CHECK(d.U()(0, 1) == 0.7);
    CHECK(d.Y()(0, 0) == 4);

    CHECK_THROWS_AS(io::parse_data_csv(""), ParseError);
    CHECK_THROWS_AS(io::parse_data_csv("time,0,1\n"), ParseError);
    CHECK_THROWS_AS(io::parse_data_csv("channel,0,1,2\nx1,1,2,3\ny1,4,5,\nu1,6,abc,\n"), ParseError);
    CHECK_THROWS_AS(io::parse_data_csv("channel,0,1,2\nx1,1,2,3\ny1,4,5,9\nu1,6,7,\n"), ParseError);
    CHECK_THROWS_AS(io::parse_data_csv("channel,0,1,2\nx1,1,2\ny1,4,5,\nu1,6,7,\n"), ParseError);
    CHECK_THROWS_AS(io::parse_data_csv("channel,0,1,2\nx1,1,2,3\nx3,1,2,3\ny1,4,5,\nu1,6,7,\n"), ParseError);
    CHECK_THROWS_AS(io::parse_data_csv("channel,0,1,2\nx1,1,2,3\nu1,6,7,\n"), SpecError);
    CHECK_THROWS_AS(io::parse_data_csv("channel,0,1,2\nx1,1,2,inf\ny1,4,5,\nu1,6,7,\n"), ParseError);
}

TEST_CASE("supply and noise JSON round trips")
{
    const SupplyRate br = SupplyRate::bounded_real(1.7, 2, 1);
    const SupplyRate back = io::parse_supply_json(io::format_supply_json(br));
    CHECK(back.S().matrix() == br.S().matrix());
    CHECK(back.m() == 2);

    // An indefinite S with the wrong inertia is refused.
    CHECK_THROWS_AS(io::parse_supply_json(R"({"m":1,"p":1,"S":[[1,0],[0,1]]})"), AssumptionError);
    CHECK_THROWS_AS(io::parse_supply_json(R"({"m":1,"p":1,"S":[[1,0]]})"), SpecError);
    CHECK_THROWS_AS(io::parse_supply_json(R"({"m":1,"p":1,"S":[[1,0],[0,-1]]}"), ParseError);
    CHECK_THROWS_AS(io::parse_supply_json(R"({"m":1,"p":1,"S":[[1,0.5],[0,-1]]})"), SpecError);

    std::mt19937_64 rng(2);
    const NoiseN1 n1{SymMat(testutil::bounded_quadratic(rng, 3, 4)), 3};
    const io::NoiseFile nf = io::parse_noise_json(io::format_noise_json({n1, 2, 1, 4}));
    CHECK(std::get<NoiseN1>(nf.spec).phi.matrix() == n1.phi.matrix());
    CHECK(std::get<NoiseN1>(nf.spec).rows == 3);
    const io::NoiseFile n0 = io::parse_noise_json(R"({"model":"N0","n":1,"p":1,"T":5})");
    CHECK(std::holds_alternative<NoiseN0>(n0.spec));
    CHECK_THROWS_AS(io::parse_noise_json(R"({"model":"N3","n":1,"p":1,"T":5})"), ParseError);
    CHECK_THROWS_AS(io::parse_noise_json(R"({"model":"N1","n":1,"p":1,"T":5,"Phi":[[1]]})"), SpecError);
    CHECK_THROWS_AS(io::parse_noise_json(R"({"model":"N1","n":1.5,"p":1,"T":5})"), ParseError);
}

TEST_CASE("sha256 and atomic writes")
{
    CHECK(io::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");

    TempDir dir("atomic");
    write(dir / "f.txt", "one");
    write(dir / "f.txt", "two");
    CHECK(io::read_file(dir / "f.txt") == "two");
    int entries = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.path))
        ++entries;
    CHECK(entries == 1);
    CHECK_THROWS_AS(io::read_file(dir / "missing"), ParseError);
    CHECK_THROWS_AS(io::write_file_atomic(dir / "no" / "such" / "dir", "x"), ParseError);
}

TEST_CASE("check on noiseless passive data: exit 0, P present, verify accepts")
{
    TempDir dir("passive");
    const datagen::Scenario sc = passive_scenario(8, 3);
    const Files f = write_problem(dir, sc.data, SupplyRate::positive_real(1), NoiseN0{});
    REQUIRE(run_check(f, dir / "cert.json") == exit_code::informative);
    const CertificateDocument doc = parse_certificate_json(io::read_file(dir / "cert.json"));
    CHECK(doc.verdict == Verdict::Informative);
    REQUIRE(doc.P);
    CHECK(doc.checks.size() == 3);
    CHECK(run_verify(dir / "cert.json", f) == 0);

    std::ostringstream so, se;
    CHECK(cmd_report(dir / "cert.json", so, se) == 0);
    CHECK(so.str().find("Informative") != std::string::npos);
}

TEST_CASE("check on rank-deficient zero data: exit 1 with a verifiable counterexample")
{
    TempDir dir("zero");
    const DataRecord d(MatrixXd::Zero(1, 4), MatrixXd::Zero(1, 5), MatrixXd::Zero(1, 4));
    const Files f = write_problem(dir, d, SupplyRate::bounded_real(1.0, 1, 1), NoiseN0{});
    REQUIRE(run_check(f, dir / "cert.json") == exit_code::not_informative);
    const CertificateDocument doc = parse_certificate_json(io::read_file(dir / "cert.json"));
    REQUIRE(doc.counterexample);
    CHECK(doc.counterexample->supply < 0);
    CHECK(run_verify(dir / "cert.json", f) == 0);

    // Breaking the stationarity of the witness is caught.
    json j = json::parse(io::read_file(dir / "cert.json"));
    j["counterexample"]["x"][0] = j["counterexample"]["x"][0].get<double>() + 1e-3;
    write(dir / "bad.json", j.dump());
    CHECK(run_verify(dir / "bad.json", f) == exit_code::not_informative);
}

TEST_CASE("theta violating the boundedness assumption: exit 2")
{
    TempDir dir("theta");
    const datagen::Scenario sc = passive_scenario(6, 1);
    const NoiseN2 bad{SymMat::identity(6 + 2), 6};
    const Files f = write_problem(dir, sc.data, SupplyRate::positive_real(1), bad);
    std::string msg;
    CHECK(run_check(f, dir / "cert.json", &msg) == exit_code::undecided);
    CHECK(msg.find("assumption") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "cert.json"));
}

TEST_CASE("parse and dimension errors: exit 64")
{
    TempDir dir("parse");
    const datagen::Scenario sc = passive_scenario(6, 1);
    const Files f = write_problem(dir, sc.data, SupplyRate::positive_real(1), NoiseN0{});
    write(f.noise, R"({"model":"N0","n":2,"p":1,"T":6})");
    CHECK(run_check(f, dir / "cert.json") == exit_code::usage);
    write(f.noise, "{not json");
    CHECK(run_check(f, dir / "cert.json") == exit_code::usage);
    CHECK(run_check({dir / "missing.csv", f.supply, f.noise}, dir / "cert.json") == exit_code::usage);
}

TEST_CASE("noisy certificate: verify accepts, replay on other data gives 65")
{
    TempDir dir("noisy");
    const datagen::Scenario sc = noisy_scenario(5);
    const SupplyRate br = SupplyRate::bounded_real(10.0, 1, 1);
    const Files f = write_problem(dir, sc.data, br, sc.spec);
    REQUIRE(run_check(f, dir / "cert.json") == exit_code::informative);
    CHECK(run_verify(dir / "cert.json", f) == 0);

    // The same problem written as N2 also verifies.
    TempDir dir2("noisy_n2");
    const Files f2 = write_problem(dir2, sc.data, br, convert_noise(sc.spec));
    REQUIRE(run_check(f2, dir2 / "cert.json") == exit_code::informative);
    CHECK(run_verify(dir2 / "cert.json", f2) == 0);

    const datagen::Scenario other = noisy_scenario(6);
    TempDir dir3("noisy_other");
    const Files f3 = write_problem(dir3, other.data, br, other.spec);
    CHECK(run_verify(dir / "cert.json", f3) == exit_code::hash_mismatch);

    // Tolerances differing from those recorded are refused.
    std::ostringstream so, se;
    Tolerances loose;
    loose.eps_psd = 1e-6;
    loose.eps_strict = 1e-5;
    CHECK(cmd_verify(dir / "cert.json", f.data, f.supply, f.noise, loose, so, se) == exit_code::not_informative);
}

TEST_CASE("tampering any numeric entry of an Informative certificate is detected")
{
    for (int noisy = 0; noisy < 2; ++noisy)
    {
        TempDir dir(noisy ? "tamper_noisy" : "tamper_exact");
        Files f;
        if (noisy)
        {
            const datagen::Scenario sc = noisy_scenario(11);
            f = write_problem(dir, sc.data, SupplyRate::bounded_real(10.0, 1, 1), sc.spec);
        }
        else
        {
            const datagen::Scenario sc = passive_scenario(8, 4);
            f = write_problem(dir, sc.data, SupplyRate::positive_real(1), NoiseN0{});
        }
        REQUIRE(run_check(f, dir / "cert.json") == exit_code::informative);
        const Problem pr = load_problem(f.data, f.supply, f.noise);
        const json original = json::parse(io::read_file(dir / "cert.json"));

        int count = 0;
        json probe = original;
        for_each_number(probe, [&](json&) { ++count; });
        CHECK(count > 10);
        for (int target = 0; target < count; ++target)
        {
            for (double delta : {1e-3, -1e-3})
            {
                json j = original;
                int k = 0;
                for_each_number(j, [&](json& e) {
                    if (k++ == target)
                        e = e.get<double>() + delta;
                });
                int code = 0;
                try
                {
                    code = verify_certificate(parse_certificate_json(j.dump()), pr).code;
                }
                catch (const Error&)
                {
                    code = exit_code::usage;
                }
                CHECK_MESSAGE(code != 0, "entry ", target, " tampered by ", delta, " passed");
            }
        }
        CHECK(verify_certificate(parse_certificate_json(original.dump()), pr).code == 0);
    }
}

TEST_CASE("generate is deterministic and generate-then-check succeeds")
{
    TempDir dir("generate");
    write(dir / "cfg.json", R"({"n":2,"m":1,"p":1,"T":30,"seed":5,
        "system":{"random_stable":{"spectral_radius":0.8}},
        "noise":{"type":"energy","bound":1e-3,"fill":0.5},
        "supply":{"type":"bounded_real","gamma_factor":2.0}})");
    std::ostringstream so, se;
    REQUIRE(cmd_generate(dir / "cfg.json", dir / "a", so, se) == 0);
    REQUIRE(cmd_generate(dir / "cfg.json", dir / "b", so, se) == 0);
    for (const char* name : {"data.csv", "supply.json", "noise.json", "system.json"})
        CHECK(io::read_file(dir.path / "a" / name) == io::read_file(dir.path / "b" / name));

    const Files f{dir.path / "a" / "data.csv", dir.path / "a" / "supply.json", dir.path / "a" / "noise.json"};
    CHECK(run_check(f, dir / "cert.json") == exit_code::informative);
    CHECK(run_verify(dir / "cert.json", f) == 0);

    write(dir / "bad.json", R"({"n":2,"m":1,"p":1,"T":30,"supply":{"type":"positive_real"},"noise":{"type":"energy","bound":1,"fill":1.5}})");
    CHECK(cmd_generate(dir / "bad.json", dir / "c", so, se) == exit_code::usage);
    write(dir / "bad2.json", R"({"n":2,"m":1,"p":2,"T":30,"supply":{"type":"positive_real"}})");
    CHECK(cmd_generate(dir / "bad2.json", dir / "c", so, se) == exit_code::usage);
}

TEST_CASE("convert-noise twice returns the original model")
{
    TempDir dir("convert");
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 10; ++trial)
    {
        const int n = testutil::uniform_int(rng, 1, 2), p = 1, t = testutil::uniform_int(rng, 2, 5);
        const NoiseN1 n1{SymMat(testutil::bounded_quadratic(rng, n + p, t)), n + p};
        write(dir / "n1.json", io::format_noise_json({n1, n, p, t}));
        std::ostringstream so, se;
        REQUIRE(cmd_convert_noise(dir / "n1.json", dir / "n2.json", {}, so, se) == 0);
        REQUIRE(cmd_convert_noise(dir / "n2.json", dir / "back.json", {}, so, se) == 0);
        const io::NoiseFile n2 = io::parse_noise_json(io::read_file(dir / "n2.json"));
        CHECK(std::holds_alternative<NoiseN2>(n2.spec));
        const io::NoiseFile back = io::parse_noise_json(io::read_file(dir / "back.json"));
        const MatrixXd diff = std::get<NoiseN1>(back.spec).phi.matrix() - n1.phi.matrix();
        CHECK(diff.cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, n1.phi.matrix().cwiseAbs().maxCoeff()));
    }
    write(dir / "n0.json", R"({"model":"N0","n":1,"p":1,"T":3})");
    std::ostringstream so, se;
    CHECK(cmd_convert_noise(dir / "n0.json", {}, {}, so, se) == exit_code::undecided);
}

TEST_CASE("exit codes for library errors")
{
    CHECK(exit_code_for(SpecError("x")) == 64);
    CHECK(exit_code_for(ParseError("x")) == 64);
    CHECK(exit_code_for(AssumptionError("x")) == 2);
    CHECK(exit_code_for(NotApplicable("x")) == 2);
    CHECK(exit_code_for(DataInconsistent("x")) == 3);
    CHECK(exit_code_for(NumericalError("x")) == 3);
    CHECK(exit_code_for(SamplingStarved("x")) == 3);
}
