#include "dissipacert/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <iostream>
#include <string>

namespace cli = dissipacert::cli;

namespace {

// --eps-psd -> DISSIPACERT_EPS_PSD
std::string env_for(std::string flag)
{
    flag.erase(0, flag.find_first_not_of('-'));
    std::replace(flag.begin(), flag.end(), '-', '_');
    std::transform(flag.begin(), flag.end(), flag.begin(), [](unsigned char c) { return std::toupper(c); });
    return "DISSIPACERT_" + flag;
}

template <class T>
CLI::Option* flag(CLI::App* app, const std::string& name, T& target, const std::string& help)
{
    const std::string longest = name.substr(name.rfind(',') == std::string::npos ? 0 : name.rfind(',') + 1);
    return app->add_option(name, target, help)->envname(env_for(longest))->capture_default_str();
}

void tolerance_flags(CLI::App* app, dissipacert::Tolerances& tol)
{
    flag(app, "--eps-psd", tol.eps_psd, "A >= 0 accepted when lambda_min >= -eps_psd");
    flag(app, "--eps-strict", tol.eps_strict, "A > 0 accepted when lambda_min >= eps_strict");
    flag(app, "--rtol-rank", tol.rtol_rank, "singular values below rtol_rank * sigma_max count as zero");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Decide dissipativity of an unknown linear system from noisy data, with auditable certificates"};
    app.set_version_flag("--version", cli::kToolVersion);
    app.require_subcommand(1);

    cli::CheckOptions check;
    auto* c = app.add_subcommand("check", "decide informativity and write a certificate");
    c->add_option("data", check.data, "trajectory CSV")->required();
    c->add_option("supply", check.supply, "supply-rate JSON")->required();
    c->add_option("noise", check.noise, "noise-model JSON")->required();
    flag(c, "-o,--out", check.out, "certificate output path");
    flag(c, "--seed", check.seed, "seed recorded in the certificate");
    flag(c, "--max-iterations", check.budget.max_iterations, "interior-point iteration limit per solve");
    flag(c, "--max-seconds", check.budget.max_seconds, "wall-clock limit per solve");
    tolerance_flags(c, check.tol);

    std::string cert, vdata, vsupply, vnoise;
    dissipacert::Tolerances vtol;
    auto* v = app.add_subcommand("verify", "re-check a certificate with eigenvalue computations only");
    v->add_option("certificate", cert, "certificate JSON")->required();
    v->add_option("data", vdata, "trajectory CSV")->required();
    v->add_option("supply", vsupply, "supply-rate JSON")->required();
    v->add_option("noise", vnoise, "noise-model JSON")->required();
    tolerance_flags(v, vtol);

    std::string config, out_dir;
    auto* g = app.add_subcommand("generate", "simulate a scenario and write its input files");
    g->add_option("config", config, "scenario config JSON")->required();
    g->add_option("out-dir", out_dir, "output directory")->required();

    std::string noise_in, noise_out;
    dissipacert::Tolerances ctol;
    auto* cv = app.add_subcommand("convert-noise", "rewrite an N1 noise model as N2 or back");
    cv->add_option("noise", noise_in, "noise-model JSON")->required();
    flag(cv, "-o,--out", noise_out, "output path (default: standard output)");
    tolerance_flags(cv, ctol);

    std::string report_cert;
    auto* r = app.add_subcommand("report", "summarize a certificate");
    r->add_option("certificate", report_cert, "certificate JSON")->required();

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e)
    {
        return app.exit(e);
    }
    catch (const CLI::CallForAllHelp& e)
    {
        return app.exit(e);
    }
    catch (const CLI::CallForVersion& e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e)
    {
        app.exit(e);
        return cli::exit_code::usage;
    }

    if (c->parsed())
        return cli::cmd_check(check, std::cout, std::cerr);
    if (v->parsed())
        return cli::cmd_verify(cert, vdata, vsupply, vnoise, vtol, std::cout, std::cerr);
    if (g->parsed())
        return cli::cmd_generate(config, out_dir, std::cout, std::cerr);
    if (cv->parsed())
        return cli::cmd_convert_noise(noise_in, noise_out, ctol, std::cout, std::cerr);
    return cli::cmd_report(report_cert, std::cout, std::cerr);
}
