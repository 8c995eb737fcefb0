#include "dissipacert/cli.hpp"

#include "json_util.hpp"

#include "dissipacert/errors.hpp"

#include <cmath>
#include <sstream>

namespace dissipacert::cli {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using io::detail::json;
namespace d = io::detail;

namespace {

constexpr int kFormatVersion = 1;
// Recorded and recomputed eigenvalues must agree to this relative accuracy.
constexpr double kMatchRtol = 1e-9;

std::vector<double> as_vector(const Vec& v) { return {v.data(), v.data() + v.size()}; }

double max_abs(const Mat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

CheckRecord record(std::string name, double bound, const SymMat& m)
{
    const Vec ev = eigenvalues(m);
    return {std::move(name), bound, ev.size() ? ev(0) : 0.0, as_vector(ev)};
}

Verdict parse_verdict(const std::string& s)
{
    if (s == "Informative")
        return Verdict::Informative;
    if (s == "NotInformative")
        return Verdict::NotInformative;
    if (s == "Inconclusive")
        return Verdict::Inconclusive;
    throw ParseError("unknown verdict '" + s + "'");
}

json tolerances_json(const Tolerances& t)
{
    return json{{"atol_sym", t.atol_sym},   {"rtol_eig", t.rtol_eig},   {"eps_psd", t.eps_psd},
                {"eps_strict", t.eps_strict}, {"rtol_rank", t.rtol_rank}, {"atol_data", t.atol_data}};
}

Tolerances parse_tolerances(const json& j)
{
    Tolerances t;
    t.atol_sym = d::get_double(d::field(j, "atol_sym"), "atol_sym");
    t.rtol_eig = d::get_double(d::field(j, "rtol_eig"), "rtol_eig");
    t.eps_psd = d::get_double(d::field(j, "eps_psd"), "eps_psd");
    t.eps_strict = d::get_double(d::field(j, "eps_strict"), "eps_strict");
    t.rtol_rank = d::get_double(d::field(j, "rtol_rank"), "rtol_rank");
    t.atol_data = d::get_double(d::field(j, "atol_data"), "atol_data");
    return t;
}

bool same_tolerances(const Tolerances& a, const Tolerances& b)
{
    return a.atol_sym == b.atol_sym && a.rtol_eig == b.rtol_eig && a.eps_psd == b.eps_psd &&
           a.eps_strict == b.eps_strict && a.rtol_rank == b.rtol_rank && a.atol_data == b.atol_data;
}

SymMat noise_form_n1(const Problem& pr, const Tolerances& tol)
{
    const NoiseSpec& spec = pr.noise.spec;
    if (const auto* n1 = std::get_if<NoiseN1>(&spec))
        return build_n1(pr.data, n1->phi, tol);
    const NoiseSpec phi = convert_noise(spec, tol);
    return build_n1(pr.data, std::get<NoiseN1>(phi).phi, tol);
}

class Audit
{
public:
    void fail(std::string msg) { failures.push_back(std::move(msg)); }
    void require(bool ok, const std::string& msg)
    {
        if (!ok)
            fail(msg);
    }
    bool close(double recorded, double recomputed, double scale)
    {
        return std::abs(recorded - recomputed) <= kMatchRtol * std::max(1.0, scale);
    }

    std::vector<std::string> failures;
};

bool symmetric_within(const Mat& m, double atol)
{
    return m.rows() == m.cols() && (m.size() == 0 || (m - m.transpose()).cwiseAbs().maxCoeff() <= atol);
}

void audit_counterexample(const CounterexamplePair& cx, const Problem& pr, const Tolerances& tol, Audit& a)
{
    const DataRecord& data = pr.data;
    const Eigen::Index n = data.n(), m = data.m(), p = data.p();
    auto dims_ok = [&](const Sys& s) { return s.n() == n && s.m() == m && s.p() == p; };
    if (!dims_ok(cx.sys_a) || !dims_ok(cx.sys_b) || cx.x.size() != n || cx.u.size() != m || cx.y.size() != p ||
        cx.xi.size() != n || cx.eta.size() != m)
    {
        a.fail("counterexample has the wrong dimensions");
        return;
    }
    a.require(sigma_membership(cx.sys_a, data, pr.noise.spec, tol), "first counterexample system is not consistent with the data");
    a.require(sigma_membership(cx.sys_b, data, pr.noise.spec, tol), "second counterexample system is not consistent with the data");

    Vec k(n + m);
    k << cx.xi, cx.eta;
    a.require(std::abs(k.norm() - 1.0) <= 1e-9, "kernel direction is not a unit vector");
    const RankReport rr = rank_report(data, tol);
    const double kernel_tol = tol.rtol_rank * rr.sigma_max + tol.atol_data * data.scale();
    a.require(max_abs(k.transpose() * data.Zminus()) <= kernel_tol, "kernel direction is not in the left kernel of Z-");

    // Along (x, u) the second system is stationary with output y, so every
    // storage function gives [x;u]^T L(P) [x;u] = s(u, y).
    Vec xu(n + m);
    xu << cx.x, cx.u;
    const double scale = std::max(1.0, max_abs(cx.sys_b.stacked()) * max_abs(xu));
    a.require(max_abs(cx.sys_b.A * cx.x + cx.sys_b.B * cx.u - cx.x) <= 1e-8 * scale, "witness state is not stationary");
    a.require(max_abs(cx.sys_b.C * cx.x + cx.sys_b.D * cx.u - cx.y) <= 1e-8 * scale, "witness output does not match");
    const double s = pr.supply.evaluate(cx.u, cx.y);
    a.require(a.close(cx.supply, s, std::abs(s)), "recorded supply value does not match s(u, y)");
    a.require(s < -tol.eps_psd, "witness supply value is not negative");
}

} // namespace

int exit_code_for(const std::exception& e)
{
    if (dynamic_cast<const SpecError*>(&e))
        return exit_code::usage;
    if (dynamic_cast<const AssumptionError*>(&e) || dynamic_cast<const NotApplicable*>(&e))
        return exit_code::undecided;
    return exit_code::failure;
}

FileDigests digest_files(const std::string& data_bytes, const std::string& supply_bytes, const std::string& noise_bytes)
{
    FileDigests out;
    out.data = io::sha256_hex(data_bytes);
    out.supply = io::sha256_hex(supply_bytes);
    out.noise = io::sha256_hex(noise_bytes);
    out.combined = io::sha256_hex(out.data + out.supply + out.noise);
    return out;
}

Problem parse_problem(const std::string& data_bytes, const std::string& supply_bytes, const std::string& noise_bytes,
                      const Tolerances& tol)
{
    DataRecord data = io::parse_data_csv(data_bytes);
    SupplyRate supply = io::parse_supply_json(supply_bytes, tol);
    io::NoiseFile noise = io::parse_noise_json(noise_bytes, tol);
    if (supply.m() != data.m() || supply.p() != data.p())
        throw SpecError("supply rate dimensions (m, p) do not match the data");
    if (noise.n != data.n() || noise.p != data.p() || noise.T != data.T())
        throw SpecError("noise model dimensions (n, p, T) do not match the data");
    return Problem{std::move(data), std::move(supply), std::move(noise),
                   digest_files(data_bytes, supply_bytes, noise_bytes)};
}

Problem load_problem(const std::filesystem::path& data, const std::filesystem::path& supply,
                     const std::filesystem::path& noise, const Tolerances& tol)
{
    return parse_problem(io::read_file(data), io::read_file(supply), io::read_file(noise), tol);
}

std::vector<CheckRecord> certificate_checks(const Problem& pr, const Mat* P, const Mat* Q, const double* alpha,
                                            const Tolerances& tol)
{
    constexpr double kSym = std::numeric_limits<double>::infinity();
    std::vector<CheckRecord> out;
    const bool exact = std::holds_alternative<NoiseN0>(pr.noise.spec);
    if (exact)
    {
        if (!P)
            throw SpecError("noiseless certificate needs P");
        const SymMat p(*P, kSym);
        out.push_back(record("P >= 0", -tol.eps_psd, p));
        out.push_back(record("data dissipation", -tol.eps_psd, data_dissipation_matrix(pr.data, pr.supply, p)));
        const RankReport rr = rank_report(pr.data, tol);
        const Sys sys = identify_unique(pr.data, tol);
        const double model_tol = tol.eps_psd * std::max(1.0, 1.0 / (rr.sigma_min * rr.sigma_min));
        out.push_back(record("model LMI of identified system", -model_tol, dissipation_lmi_matrix(sys, pr.supply, p)));
        return out;
    }
    if (!Q || !alpha)
        throw SpecError("noisy certificate needs Q and alpha");
    const SymMat q(*Q, kSym);
    const SymMat n1 = noise_form_n1(pr, tol);
    out.push_back(record("Q > 0", tol.eps_strict, q));
    out.push_back(record("S-lemma LMI", -tol.eps_psd, certificate_matrix(q, pr.supply, tol) - n1 * *alpha));
    out.push_back(record("alpha >= 0", -tol.eps_psd, SymMat::identity(1) * *alpha));
    out.push_back(record("P > 0", tol.eps_strict, q.inverse()));
    return out;
}

CertificateDocument make_certificate(const Problem& pr, const InformativityVerdict& v, const Tolerances& tol,
                                     std::uint64_t seed)
{
    CertificateDocument doc;
    doc.seed = seed;
    doc.tol = tol;
    doc.digests = pr.digests;
    doc.noise_model = model_tag(pr.noise.spec);
    doc.n = pr.data.n();
    doc.m = pr.data.m();
    doc.p = pr.data.p();
    doc.T = pr.data.T();
    doc.verdict = v.status;
    doc.note = v.note;
    doc.rank = v.rank.rank;
    doc.rank_required = v.rank.required;
    doc.singular_values = as_vector(v.rank.singular_values);
    if (v.status == Verdict::Informative)
    {
        doc.P = v.storage->matrix();
        if (v.q)
        {
            doc.Q = v.q->matrix();
            doc.alpha = v.multiplier;
        }
        doc.checks = certificate_checks(pr, doc.P ? &*doc.P : nullptr, doc.Q ? &*doc.Q : nullptr,
                                        doc.alpha ? &*doc.alpha : nullptr, tol);
    }
    doc.counterexample = v.evidence;
    if (v.status == Verdict::NotInformative && !v.evidence)
        doc.slack_upper_bound = v.slack_upper_bound;
    return doc;
}

std::string format_certificate_json(const CertificateDocument& doc)
{
    json j;
    j["format"] = "dissipacert-certificate";
    j["format_version"] = kFormatVersion;
    j["tool"] = {{"name", "dissipacert"}, {"version", doc.tool_version}};
    j["seed"] = doc.seed;
    j["tolerances"] = tolerances_json(doc.tol);
    j["problem_hash"] = {{"algorithm", "sha256"},
                         {"data", doc.digests.data},
                         {"supply", doc.digests.supply},
                         {"noise", doc.digests.noise},
                         {"combined", doc.digests.combined}};
    j["noise_model"] = doc.noise_model;
    j["dims"] = {{"n", doc.n}, {"m", doc.m}, {"p", doc.p}, {"T", doc.T}};
    j["verdict"] = to_string(doc.verdict);
    j["note"] = doc.note;
    j["rank"] = {{"rank", doc.rank}, {"required", doc.rank_required}, {"singular_values", doc.singular_values}};
    j["P"] = doc.P ? d::to_json(*doc.P) : json(nullptr);
    j["Q"] = doc.Q ? d::to_json(*doc.Q) : json(nullptr);
    j["alpha"] = doc.alpha ? json(*doc.alpha) : json(nullptr);
    json checks = json::array();
    for (const CheckRecord& c : doc.checks)
        checks.push_back({{"name", c.name}, {"bound", c.bound}, {"lambda_min", c.lambda_min}, {"spectrum", c.spectrum}});
    j["checks"] = checks;
    if (doc.counterexample)
    {
        const CounterexamplePair& cx = *doc.counterexample;
        j["counterexample"] = {{"sys_a", d::to_json(cx.sys_a)}, {"sys_b", d::to_json(cx.sys_b)},
                               {"x", d::to_json(cx.x)},         {"u", d::to_json(cx.u)},
                               {"y", d::to_json(cx.y)},         {"xi", d::to_json(cx.xi)},
                               {"eta", d::to_json(cx.eta)},     {"supply", cx.supply},
                               {"perturbed", cx.perturbed}};
    }
    else
        j["counterexample"] = nullptr;
    if (doc.slack_upper_bound)
        j["slack_upper_bound"] = *doc.slack_upper_bound;
    return j.dump(2) + "\n";
}

CertificateDocument parse_certificate_json(const std::string& text)
{
    const json j = d::parse(text, "certificate");
    if (d::get_string(d::field(j, "format"), "format") != "dissipacert-certificate")
        throw ParseError("not a dissipacert certificate");
    if (d::get_index(d::field(j, "format_version"), "format_version") != kFormatVersion)
        throw ParseError("unsupported certificate format version");
    CertificateDocument doc;
    doc.tool_version = d::get_string(d::field(d::field(j, "tool"), "version"), "tool.version");
    doc.seed = d::get_u64(d::field(j, "seed"), "seed");
    doc.tol = parse_tolerances(d::field(j, "tolerances"));
    const json& h = d::field(j, "problem_hash");
    if (d::get_string(d::field(h, "algorithm"), "problem_hash.algorithm") != "sha256")
        throw ParseError("unsupported hash algorithm");
    doc.digests.data = d::get_string(d::field(h, "data"), "problem_hash.data");
    doc.digests.supply = d::get_string(d::field(h, "supply"), "problem_hash.supply");
    doc.digests.noise = d::get_string(d::field(h, "noise"), "problem_hash.noise");
    doc.digests.combined = d::get_string(d::field(h, "combined"), "problem_hash.combined");
    doc.noise_model = d::get_string(d::field(j, "noise_model"), "noise_model");
    const json& dims = d::field(j, "dims");
    doc.n = d::get_index(d::field(dims, "n"), "dims.n");
    doc.m = d::get_index(d::field(dims, "m"), "dims.m");
    doc.p = d::get_index(d::field(dims, "p"), "dims.p");
    doc.T = d::get_index(d::field(dims, "T"), "dims.T");
    doc.verdict = parse_verdict(d::get_string(d::field(j, "verdict"), "verdict"));
    doc.note = d::get_string(d::field(j, "note"), "note");
    const json& r = d::field(j, "rank");
    doc.rank = d::get_index(d::field(r, "rank"), "rank.rank");
    doc.rank_required = d::get_index(d::field(r, "required"), "rank.required");
    doc.singular_values = d::get_doubles(d::field(r, "singular_values"), "rank.singular_values");
    if (!d::field(j, "P").is_null())
        doc.P = d::get_matrix(j["P"], "P");
    if (!d::field(j, "Q").is_null())
        doc.Q = d::get_matrix(j["Q"], "Q");
    if (!d::field(j, "alpha").is_null())
        doc.alpha = d::get_double(j["alpha"], "alpha");
    const json& checks = d::field(j, "checks");
    if (!checks.is_array())
        throw ParseError("checks must be an array");
    for (const json& c : checks)
        doc.checks.push_back({d::get_string(d::field(c, "name"), "check name"),
                              d::get_double(d::field(c, "bound"), "check bound"),
                              d::get_double(d::field(c, "lambda_min"), "check lambda_min"),
                              d::get_doubles(d::field(c, "spectrum"), "check spectrum")});
    if (!d::field(j, "counterexample").is_null())
    {
        const json& c = j["counterexample"];
        CounterexamplePair cx;
        cx.sys_a = d::get_system(d::field(c, "sys_a"), "sys_a");
        cx.sys_b = d::get_system(d::field(c, "sys_b"), "sys_b");
        cx.x = d::get_vector(d::field(c, "x"), "x");
        cx.u = d::get_vector(d::field(c, "u"), "u");
        cx.y = d::get_vector(d::field(c, "y"), "y");
        cx.xi = d::get_vector(d::field(c, "xi"), "xi");
        cx.eta = d::get_vector(d::field(c, "eta"), "eta");
        cx.supply = d::get_double(d::field(c, "supply"), "supply");
        const json& pert = d::field(c, "perturbed");
        if (!pert.is_boolean())
            throw ParseError("perturbed must be a boolean");
        cx.perturbed = pert.get<bool>();
        doc.counterexample = std::move(cx);
    }
    if (j.contains("slack_upper_bound"))
        doc.slack_upper_bound = d::get_double(j["slack_upper_bound"], "slack_upper_bound");
    return doc;
}

VerifyResult verify_certificate(const CertificateDocument& doc, const Problem& pr, const Tolerances& tol)
{
    VerifyResult res;
    const FileDigests& h = pr.digests;
    if (doc.digests.data != h.data || doc.digests.supply != h.supply || doc.digests.noise != h.noise ||
        doc.digests.combined != h.combined)
    {
        res.code = exit_code::hash_mismatch;
        res.failures.push_back("certificate was issued for different input files");
        return res;
    }

    Audit a;
    a.require(same_tolerances(doc.tol, tol), "recorded tolerances differ from the ones in effect");
    a.require(doc.noise_model == model_tag(pr.noise.spec), "recorded noise model differs from the noise file");
    a.require(doc.n == pr.data.n() && doc.m == pr.data.m() && doc.p == pr.data.p() && doc.T == pr.data.T(),
              "recorded dimensions differ from the data");

    const RankReport rr = rank_report(pr.data, tol);
    a.require(doc.rank == rr.rank && doc.rank_required == rr.required, "recorded rank differs from the data");
    const std::vector<double> sv = as_vector(rr.singular_values);
    bool sv_ok = sv.size() == doc.singular_values.size();
    for (std::size_t i = 0; sv_ok && i < sv.size(); ++i)
        sv_ok = a.close(doc.singular_values[i], sv[i], rr.sigma_max);
    a.require(sv_ok, "recorded singular values differ from the data");

    if (doc.verdict == Verdict::Informative)
    {
        const bool exact = std::holds_alternative<NoiseN0>(pr.noise.spec);
        if (!doc.P)
            a.fail("Informative certificate without P");
        else if (doc.P->rows() != pr.data.n() || !symmetric_within(*doc.P, tol.atol_sym))
            a.fail("P is not a symmetric n x n matrix");
        if (exact && (doc.Q || doc.alpha))
            a.fail("noiseless certificate must not carry Q or alpha");
        if (!exact && (!doc.Q || !doc.alpha))
            a.fail("noisy certificate needs Q and alpha");
        if (doc.Q && (doc.Q->rows() != pr.data.n() || !symmetric_within(*doc.Q, tol.atol_sym)))
            a.fail("Q is not a symmetric n x n matrix");
        if (doc.counterexample)
            a.fail("Informative certificate carries a counterexample");
        if (!a.failures.empty())
            return {exit_code::not_informative, a.failures};

        std::vector<CheckRecord> fresh;
        try
        {
            fresh = certificate_checks(pr, &*doc.P, doc.Q ? &*doc.Q : nullptr, doc.alpha ? &*doc.alpha : nullptr, tol);
        }
        catch (const Error& e)
        {
            a.fail(std::string("recomputing the checks failed: ") + e.what());
            return {exit_code::not_informative, a.failures};
        }
        if (doc.Q)
        {
            const Mat pinv = SymMat(*doc.Q, tol.atol_sym).inverse().matrix();
            a.require(max_abs(*doc.P - pinv) <= kMatchRtol * std::max(1.0, max_abs(pinv)), "P is not the inverse of Q");
        }
        if (fresh.size() != doc.checks.size())
            a.fail("recorded checks do not match the certificate type");
        for (std::size_t i = 0; i < std::min(fresh.size(), doc.checks.size()); ++i)
        {
            const CheckRecord &f = fresh[i], &r = doc.checks[i];
            const std::string tag = "check '" + f.name + "': ";
            double scale = 0;
            for (double e : f.spectrum)
                scale = std::max(scale, std::abs(e));
            a.require(r.name == f.name, tag + "recorded under a different name");
            a.require(r.bound == f.bound, tag + "recorded bound differs");
            a.require(a.close(r.lambda_min, f.lambda_min, scale), tag + "recorded lambda_min differs");
            bool spec_ok = r.spectrum.size() == f.spectrum.size();
            for (std::size_t k = 0; spec_ok && k < f.spectrum.size(); ++k)
                spec_ok = a.close(r.spectrum[k], f.spectrum[k], scale);
            a.require(spec_ok, tag + "recorded spectrum differs");
            std::ostringstream msg;
            msg << tag << "lambda_min " << f.lambda_min << " below " << f.bound;
            a.require(f.lambda_min >= f.bound, msg.str());
        }
        res.code = a.failures.empty() ? exit_code::informative : exit_code::not_informative;
        res.failures = std::move(a.failures);
        return res;
    }

    if (doc.verdict == Verdict::NotInformative && doc.counterexample)
    {
        a.require(doc.checks.empty() && !doc.P && !doc.Q && !doc.alpha, "counterexample certificate carries a storage");
        a.require(rr.rank < rr.required, "data have full rank; a rank counterexample is not applicable");
        audit_counterexample(*doc.counterexample, pr, tol, a);
        res.code = a.failures.empty() ? exit_code::informative : exit_code::not_informative;
        res.failures = std::move(a.failures);
        return res;
    }

    if (!a.failures.empty())
        return {exit_code::not_informative, a.failures};
    res.code = exit_code::undecided;
    res.failures.push_back(std::string("a ") + to_string(doc.verdict) +
                           " outcome without a certificate cannot be checked by eigenvalue computations");
    return res;
}

} // namespace dissipacert::cli
