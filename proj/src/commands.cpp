#include "dissipacert/cli.hpp"

#include "dissipacert/datagen.hpp"
#include "dissipacert/errors.hpp"
#include "dissipacert/oracle.hpp"

#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace dissipacert::cli {

namespace {

int verdict_code(Verdict v)
{
    switch (v)
    {
    case Verdict::Informative:
        return exit_code::informative;
    case Verdict::NotInformative:
        return exit_code::not_informative;
    default:
        return exit_code::undecided;
    }
}

// Runs a command body, turning library exceptions into exit codes.
template <class F>
int guarded(std::ostream& err, F&& body)
{
    try
    {
        return body();
    }
    catch (const Error& e)
    {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    catch (const std::filesystem::filesystem_error& e)
    {
        err << "error: " << e.what() << "\n";
        return exit_code::usage;
    }
}

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

} // namespace

int cmd_check(const CheckOptions& opt, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        opt.tol.validate();
        const Problem pr = load_problem(opt.data, opt.supply, opt.noise, opt.tol);
        const InformativityVerdict v = informativity(pr.data, pr.noise.spec, pr.supply, opt.tol, opt.budget);
        const CertificateDocument doc = make_certificate(pr, v, opt.tol, opt.seed);
        io::write_file_atomic(opt.out, format_certificate_json(doc));
        out << to_string(v.status);
        if (!v.note.empty())
            out << " (" << v.note << ")";
        out << "\ncertificate written to " << opt.out.string() << "\n";
        return verdict_code(v.status);
    });
}

int cmd_verify(const std::filesystem::path& certificate, const std::filesystem::path& data,
               const std::filesystem::path& supply, const std::filesystem::path& noise, const Tolerances& tol,
               std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        tol.validate();
        const CertificateDocument doc = parse_certificate_json(io::read_file(certificate));
        const Problem pr = load_problem(data, supply, noise, tol);
        const VerifyResult res = verify_certificate(doc, pr, tol);
        for (const std::string& f : res.failures)
            err << (res.code == exit_code::undecided ? "note: " : "rejected: ") << f << "\n";
        if (res.code == exit_code::informative)
            out << "verified: " << to_string(doc.verdict) << " certificate holds (" << doc.checks.size()
                << " eigenvalue checks)\n";
        return res.code;
    });
}

int cmd_generate(const std::filesystem::path& config, const std::filesystem::path& out_dir, std::ostream& out,
                 std::ostream& err)
{
    return guarded(err, [&] {
        const io::GenerateConfig cfg = io::parse_generate_config(io::read_file(config));
        const datagen::Scenario sc = datagen::generate_scenario(cfg.scenario);
        if (cfg.scenario.require_rank && !sc.rank_ok)
            throw NumericalError("no rank-sufficient record after " + std::to_string(sc.retries + 1) + " attempts");

        const Eigen::Index m = cfg.scenario.m, p = cfg.scenario.p;
        std::optional<SupplyRate> supply;
        switch (cfg.supply.kind)
        {
        case io::SupplyChoice::Kind::BoundedReal:
            supply = SupplyRate::bounded_real(cfg.supply.gamma, m, p);
            break;
        case io::SupplyChoice::Kind::BoundedRealRelative:
            supply = SupplyRate::bounded_real(cfg.supply.gamma * oracle::hinf_norm_grid(sc.system), m, p);
            break;
        case io::SupplyChoice::Kind::PositiveReal:
            supply = SupplyRate::positive_real(m);
            break;
        case io::SupplyChoice::Kind::Explicit:
            supply = SupplyRate(SymMat(cfg.supply.S), m, p);
            break;
        }

        std::filesystem::create_directories(out_dir);
        io::write_file_atomic(out_dir / "data.csv", io::format_data_csv(sc.data));
        io::write_file_atomic(out_dir / "supply.json", io::format_supply_json(*supply));
        io::write_file_atomic(out_dir / "noise.json",
                              io::format_noise_json({sc.spec, cfg.scenario.n, p, cfg.scenario.T}));
        io::write_file_atomic(out_dir / "system.json", io::format_system_json(sc.system));
        out << "wrote data.csv, supply.json, noise.json, system.json to " << out_dir.string() << " (seed "
            << sc.seed_used << ", " << sc.retries << " retries)\n";
        return 0;
    });
}

int cmd_convert_noise(const std::filesystem::path& input, const std::filesystem::path& output, const Tolerances& tol,
                      std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        tol.validate();
        io::NoiseFile nf = io::parse_noise_json(io::read_file(input), tol);
        if (std::holds_alternative<NoiseN0>(nf.spec))
            throw NotApplicable("the exact-data model N0 has no dual description");
        nf.spec = convert_noise(nf.spec, tol);
        const std::string text = io::format_noise_json(nf);
        if (output.empty())
            out << text;
        else
            io::write_file_atomic(output, text);
        return 0;
    });
}

int cmd_report(const std::filesystem::path& certificate, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const CertificateDocument doc = parse_certificate_json(io::read_file(certificate));
        out << "verdict       " << to_string(doc.verdict) << "\n";
        out << "noise model   " << doc.noise_model << "  (n=" << doc.n << " m=" << doc.m << " p=" << doc.p
            << " T=" << doc.T << ")\n";
        out << "rank of Z-    " << doc.rank << " / " << doc.rank_required;
        if (!doc.singular_values.empty() && doc.singular_values.front() > 0)
            out << "  sigma_min/sigma_max = "
                << fmt(doc.singular_values[std::min<std::size_t>(doc.singular_values.size(),
                                                                  static_cast<std::size_t>(doc.rank_required)) -
                                           1] /
                       doc.singular_values.front());
        out << "\n";
        out << "tool          dissipacert " << doc.tool_version << ", seed " << doc.seed << "\n";
        out << "tolerances    eps_psd=" << fmt(doc.tol.eps_psd) << " eps_strict=" << fmt(doc.tol.eps_strict)
            << " rtol_rank=" << fmt(doc.tol.rtol_rank) << "\n";
        if (!doc.note.empty())
            out << "note          " << doc.note << "\n";

        if (!doc.checks.empty())
        {
            out << "\n  " << std::left << std::setw(32) << "check" << std::right << std::setw(14) << "lambda_min"
                << std::setw(14) << "bound" << std::setw(14) << "lambda_max" << "  status\n";
            for (const CheckRecord& c : doc.checks)
                out << "  " << std::left << std::setw(32) << c.name << std::right << std::setw(14) << fmt(c.lambda_min)
                    << std::setw(14) << fmt(c.bound) << std::setw(14)
                    << (c.spectrum.empty() ? std::string("-") : fmt(c.spectrum.back()))
                    << (c.lambda_min >= c.bound ? "  ok" : "  FAIL") << "\n";
        }
        if (doc.P)
        {
            const Eigen::VectorXd ev = eigenvalues(SymMat(*doc.P, std::numeric_limits<double>::infinity()));
            out << "\nstorage P eigenvalues:";
            for (Eigen::Index i = 0; i < ev.size(); ++i)
                out << " " << fmt(ev(i));
            out << "\n";
        }
        if (doc.alpha)
            out << "multiplier alpha = " << fmt(*doc.alpha) << "\n";
        if (doc.counterexample)
        {
            const CounterexamplePair& cx = *doc.counterexample;
            out << "\ncounterexample: two consistent systems with no common storage\n"
                << "  witness supply s(u, y) = " << fmt(cx.supply) << (cx.perturbed ? "  (perturbed input)" : "")
                << "\n";
        }
        if (doc.slack_upper_bound)
            out << "solver bound on the LMI slack: " << fmt(*doc.slack_upper_bound) << "\n";
        return 0;
    });
}

} // namespace dissipacert::cli
