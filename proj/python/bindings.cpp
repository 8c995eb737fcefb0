#include "dissipacert/cli.hpp"
#include "dissipacert/datagen.hpp"
#include "dissipacert/errors.hpp"
#include "dissipacert/informativity.hpp"
#include "dissipacert/io.hpp"
#include "dissipacert/oracle.hpp"
#include "dissipacert/symmat.hpp"
#include "dissipacert/sysmodel.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace dissipacert;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

SymMat sym(const MatrixXd& m, const Tolerances& tol = {}) { return SymMat(m, tol.atol_sym); }

py::dict counterexample_dict(const CounterexamplePair& cx)
{
    py::dict d;
    d["sys_a"] = cx.sys_a;
    d["sys_b"] = cx.sys_b;
    d["x"] = cx.x;
    d["u"] = cx.u;
    d["y"] = cx.y;
    d["xi"] = cx.xi;
    d["eta"] = cx.eta;
    d["supply"] = cx.supply;
    d["perturbed"] = cx.perturbed;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Data-driven dissipativity certificates for linear discrete-time systems";
    m.attr("__version__") = cli::kToolVersion;

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    auto spec = py::register_exception<SpecError>(m, "SpecError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", spec.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
    py::register_exception<SingularBlock>(m, "SingularBlock", base.ptr());
    py::register_exception<SingularSupply>(m, "SingularSupply", base.ptr());
    py::register_exception<AssumptionError>(m, "AssumptionError", base.ptr());
    py::register_exception<NotApplicable>(m, "NotApplicable", base.ptr());
    py::register_exception<DataInconsistent>(m, "DataInconsistent", base.ptr());
    py::register_exception<SamplingStarved>(m, "SamplingStarved", base.ptr());

    py::class_<Tolerances>(m, "Tolerances")
        .def(py::init<>())
        .def_readwrite("atol_sym", &Tolerances::atol_sym)
        .def_readwrite("rtol_eig", &Tolerances::rtol_eig)
        .def_readwrite("eps_psd", &Tolerances::eps_psd)
        .def_readwrite("eps_strict", &Tolerances::eps_strict)
        .def_readwrite("rtol_rank", &Tolerances::rtol_rank)
        .def_readwrite("atol_data", &Tolerances::atol_data)
        .def("validate", &Tolerances::validate);

    // ---- symmetric-matrix primitives --------------------------------------
    m.def(
        "eigenvalues", [](const MatrixXd& a, const Tolerances& tol) { return eigenvalues(sym(a, tol)); }, py::arg("a"),
        py::arg("tol") = Tolerances{});
    m.def(
        "inertia",
        [](const MatrixXd& a, const Tolerances& tol) {
            const Inertia in = inertia(sym(a, tol), tol);
            return py::make_tuple(in.neg, in.zero, in.pos);
        },
        py::arg("a"), py::arg("tol") = Tolerances{}, "(negative, zero, positive) eigenvalue counts");
    m.def(
        "is_psd", [](const MatrixXd& a, const Tolerances& tol) { return is_psd(sym(a, tol), tol); }, py::arg("a"),
        py::arg("tol") = Tolerances{});
    m.def(
        "is_pd", [](const MatrixXd& a, const Tolerances& tol) { return is_pd(sym(a, tol), tol); }, py::arg("a"),
        py::arg("tol") = Tolerances{});

    // ---- systems, supply rates, data -----------------------------------------
    py::class_<Sys>(m, "Sys")
        .def(py::init<MatrixXd, MatrixXd, MatrixXd, MatrixXd>(), py::arg("A"), py::arg("B"), py::arg("C"), py::arg("D"))
        .def_readwrite("A", &Sys::A)
        .def_readwrite("B", &Sys::B)
        .def_readwrite("C", &Sys::C)
        .def_readwrite("D", &Sys::D)
        .def_property_readonly("n", &Sys::n)
        .def_property_readonly("m", &Sys::m)
        .def_property_readonly("p", &Sys::p)
        .def("stacked", &Sys::stacked)
        .def("transposed", &Sys::transposed)
        .def("__repr__", [](const Sys& s) {
            std::ostringstream o;
            o << "Sys(n=" << s.n() << ", m=" << s.m() << ", p=" << s.p() << ")";
            return o.str();
        });

    py::class_<SupplyRate>(m, "SupplyRate")
        .def(py::init([](const MatrixXd& s, Eigen::Index mm, Eigen::Index p, const Tolerances& tol) {
                 return SupplyRate(sym(s, tol), mm, p, true, tol);
             }),
             py::arg("S"), py::arg("m"), py::arg("p"), py::arg("tol") = Tolerances{})
        .def_static("bounded_real", &SupplyRate::bounded_real, py::arg("gamma"), py::arg("m"), py::arg("p"))
        .def_static("positive_real", &SupplyRate::positive_real, py::arg("m"))
        .def_property_readonly("S", [](const SupplyRate& s) { return s.S().matrix(); })
        .def_property_readonly("m", &SupplyRate::m)
        .def_property_readonly("p", &SupplyRate::p)
        .def("evaluate", &SupplyRate::evaluate, py::arg("u"), py::arg("y"));

    py::class_<DataRecord>(m, "DataRecord")
        .def(py::init<MatrixXd, MatrixXd, MatrixXd>(), py::arg("U"), py::arg("X"), py::arg("Y"))
        .def_property_readonly("U", &DataRecord::U)
        .def_property_readonly("X", &DataRecord::X)
        .def_property_readonly("Y", &DataRecord::Y)
        .def_property_readonly("n", &DataRecord::n)
        .def_property_readonly("m", &DataRecord::m)
        .def_property_readonly("p", &DataRecord::p)
        .def_property_readonly("T", &DataRecord::T)
        .def("Zminus", &DataRecord::Zminus)
        .def("Zplus", &DataRecord::Zplus);

    // ---- noise models -------------------------------------------------------
    py::class_<NoiseN0>(m, "N0").def(py::init<>()).def("__repr__", [](const NoiseN0&) { return "N0()"; });
    py::class_<NoiseN1>(m, "N1")
        .def(py::init([](const MatrixXd& phi, Eigen::Index rows) { return NoiseN1{sym(phi), rows}; }), py::arg("Phi"),
             py::arg("rows"))
        .def_property_readonly("Phi", [](const NoiseN1& n) { return n.phi.matrix(); })
        .def_readonly("rows", &NoiseN1::rows);
    py::class_<NoiseN2>(m, "N2")
        .def(py::init([](const MatrixXd& theta, Eigen::Index samples) { return NoiseN2{sym(theta), samples}; }),
             py::arg("Theta"), py::arg("samples"))
        .def_property_readonly("Theta", [](const NoiseN2& n) { return n.theta.matrix(); })
        .def_readonly("samples", &NoiseN2::samples);

    m.def(
        "energy_bound", [](const MatrixXd& phi11, Eigen::Index t) { return energy_bound(sym(phi11), t); },
        py::arg("phi11"), py::arg("T"), "Noise model V V^T <= phi11 over T samples");
    m.def("convert_noise", &convert_noise, py::arg("noise"), py::arg("tol") = Tolerances{});
    m.def(
        "dualize_quadratic_set",
        [](const MatrixXd& psi, Eigen::Index q, const Tolerances& tol) {
            return dualize_quadratic_set(sym(psi, tol), q, tol).matrix();
        },
        py::arg("psi"), py::arg("q"), py::arg("tol") = Tolerances{});
    m.def(
        "dual_supply", [](const SupplyRate& s, const Tolerances& tol) { return dual_supply(s, tol).Shat.matrix(); },
        py::arg("supply"), py::arg("tol") = Tolerances{});
    m.def("assumption_a1", py::overload_cast<const SupplyRate&, const Tolerances&>(&assumption_a1), py::arg("supply"),
          py::arg("tol") = Tolerances{});
    m.def("assumption_a2", &assumption_a2, py::arg("noise"), py::arg("tol") = Tolerances{});
    m.def("residual", &residual, py::arg("sys"), py::arg("data"));
    m.def("noise_membership", &noise_membership, py::arg("V"), py::arg("noise"), py::arg("tol") = Tolerances{},
          py::arg("scale") = 1.0);
    m.def("sigma_membership", &sigma_membership, py::arg("sys"), py::arg("data"), py::arg("noise"),
          py::arg("tol") = Tolerances{});

    // ---- model-based dissipativity -----------------------------------------------
    m.def(
        "dissipation_lmi_matrix",
        [](const Sys& s, const SupplyRate& r, const MatrixXd& p) { return dissipation_lmi_matrix(s, r, sym(p)).matrix(); },
        py::arg("sys"), py::arg("supply"), py::arg("P"));
    m.def(
        "is_dissipative_model",
        [](const Sys& s, const SupplyRate& r, const Tolerances& tol) -> py::object {
            const ModelDissipativity md = is_dissipative_model(s, r, tol);
            py::dict d;
            d["status"] = lmi::to_string(md.status);
            d["P"] = md.storage ? py::cast(md.storage->matrix()) : py::none();
            return d;
        },
        py::arg("sys"), py::arg("supply"), py::arg("tol") = Tolerances{});
    m.def("hinf_norm", &oracle::hinf_norm_grid, py::arg("sys"), py::arg("grid_size") = 10000,
          py::arg("refine_iters") = 80);
    m.def("is_positive_real", &oracle::positive_real_grid, py::arg("sys"), py::arg("grid_size") = 10000,
          py::arg("tol") = Tolerances{});

    // ---- informativity ------------------------------------------------------
    py::class_<RankReport>(m, "RankReport")
        .def_readonly("rank", &RankReport::rank)
        .def_readonly("required", &RankReport::required)
        .def_readonly("sigma_max", &RankReport::sigma_max)
        .def_readonly("sigma_min", &RankReport::sigma_min)
        .def_readonly("full", &RankReport::full);
    m.def("rank_report", &rank_report, py::arg("data"), py::arg("tol") = Tolerances{});
    m.def("rank_condition", &rank_condition, py::arg("data"), py::arg("tol") = Tolerances{});
    m.def("identify", &identify_unique, py::arg("data"), py::arg("tol") = Tolerances{});
    m.def(
        "build_n1", [](const DataRecord& d, const MatrixXd& phi, const Tolerances& tol) {
            return build_n1(d, sym(phi, tol), tol).matrix();
        },
        py::arg("data"), py::arg("Phi"), py::arg("tol") = Tolerances{});
    m.def(
        "informativity",
        [](const DataRecord& data, const NoiseSpec& noise, const SupplyRate& s, const Tolerances& tol) {
            const InformativityVerdict v = informativity(data, noise, s, tol);
            py::dict d;
            d["status"] = to_string(v.status);
            d["P"] = v.storage ? py::cast(v.storage->matrix()) : py::none();
            d["Q"] = v.q ? py::cast(v.q->matrix()) : py::none();
            d["alpha"] = v.multiplier ? py::cast(*v.multiplier) : py::none();
            py::list margins;
            for (const lmi::Margin& mg : v.margins)
                margins.append(py::make_tuple(mg.name, mg.lambda_min));
            d["margins"] = margins;
            d["rank"] = v.rank.rank;
            d["rank_required"] = v.rank.required;
            d["counterexample"] = v.evidence ? py::object(counterexample_dict(*v.evidence)) : py::none();
            d["note"] = v.note;
            return d;
        },
        py::arg("data"), py::arg("noise"), py::arg("supply"), py::arg("tol") = Tolerances{},
        "Decide whether every system consistent with the data is dissipative with a common storage");

    // ---- data generation -----------------------------------------------------
    m.def(
        "simulate",
        [](const Sys& s, const MatrixXd& u, const VectorXd& x0, std::optional<MatrixXd> noise) {
            return datagen::simulate(s, u, x0, noise);
        },
        py::arg("sys"), py::arg("U"), py::arg("x0"), py::arg("noise") = py::none());
    m.def("random_stable_sys", &datagen::random_stable_sys, py::arg("n"), py::arg("m"), py::arg("p"),
          py::arg("bound") = 0.9, py::arg("seed") = 0);
    m.def(
        "generate_scenario",
        [](Eigen::Index n, Eigen::Index mm, Eigen::Index p, Eigen::Index t, std::uint64_t seed,
           std::optional<Sys> system, std::optional<NoiseSpec> noise, double fill) {
            datagen::ScenarioConfig cfg;
            cfg.n = n;
            cfg.m = mm;
            cfg.p = p;
            cfg.T = t;
            cfg.seed = seed;
            cfg.system = std::move(system);
            if (noise && !std::holds_alternative<NoiseN0>(*noise))
                cfg.noise = std::move(noise);
            cfg.fill = fill;
            const datagen::Scenario sc = datagen::generate_scenario(cfg);
            py::dict d;
            d["system"] = sc.system;
            d["data"] = sc.data;
            d["noise"] = sc.noise;
            d["spec"] = sc.spec;
            d["seed_used"] = sc.seed_used;
            d["rank_ok"] = sc.rank_ok;
            return d;
        },
        py::arg("n"), py::arg("m"), py::arg("p"), py::arg("T"), py::arg("seed") = 0, py::arg("system") = py::none(),
        py::arg("noise") = py::none(), py::arg("fill") = 0.5);

    // ---- files and certificates --------------------------------------------------
    m.def("format_data_csv", &io::format_data_csv, py::arg("data"));
    m.def("parse_data_csv", &io::parse_data_csv, py::arg("text"));
    m.def("sha256_hex", &io::sha256_hex, py::arg("bytes"));
    m.def(
        "check",
        [](const std::filesystem::path& data, const std::filesystem::path& supply, const std::filesystem::path& noise,
           const std::filesystem::path& out, const Tolerances& tol) {
            cli::CheckOptions o;
            o.data = data;
            o.supply = supply;
            o.noise = noise;
            o.out = out;
            o.tol = tol;
            std::ostringstream so, se;
            const int code = cli::cmd_check(o, so, se);
            return py::make_tuple(code, so.str() + se.str());
        },
        py::arg("data"), py::arg("supply"), py::arg("noise"), py::arg("out"), py::arg("tol") = Tolerances{},
        "Run the check command; returns (exit code, messages)");
    m.def(
        "verify",
        [](const std::filesystem::path& cert, const std::filesystem::path& data, const std::filesystem::path& supply,
           const std::filesystem::path& noise, const Tolerances& tol) {
            std::ostringstream so, se;
            const int code = cli::cmd_verify(cert, data, supply, noise, tol, so, se);
            return py::make_tuple(code, so.str() + se.str());
        },
        py::arg("certificate"), py::arg("data"), py::arg("supply"), py::arg("noise"), py::arg("tol") = Tolerances{},
        "Run the verify command; returns (exit code, messages)");
    m.def(
        "generate",
        [](const std::filesystem::path& config, const std::filesystem::path& out_dir) {
            std::ostringstream so, se;
            const int code = cli::cmd_generate(config, out_dir, so, se);
            return py::make_tuple(code, so.str() + se.str());
        },
        py::arg("config"), py::arg("out_dir"));
}
