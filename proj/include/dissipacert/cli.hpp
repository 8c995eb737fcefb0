#pragma once

#include "dissipacert/informativity.hpp"
#include "dissipacert/io.hpp"
#include "dissipacert/lmi.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dissipacert::cli {

// Exit codes of the dissipacert tool. Stable; documented in the README.
namespace exit_code {
inline constexpr int informative = 0;     ///< check: Informative; verify: certificate accepted
inline constexpr int not_informative = 1; ///< check: NotInformative; verify: certificate rejected
inline constexpr int undecided = 2;       ///< Inconclusive, NotApplicable, AssumptionError, unverifiable
inline constexpr int failure = 3;         ///< DataInconsistent, numerical failure, sampling starved
inline constexpr int usage = 64;          ///< bad flags, unreadable or malformed files, dimension mismatch
inline constexpr int hash_mismatch = 65;  ///< certificate belongs to different input files
} // namespace exit_code

/// Maps a library exception to its exit code.
int exit_code_for(const std::exception& e);

inline constexpr const char* kToolVersion = "0.1.0";

struct FileDigests
{
    std::string data, supply, noise;
    std::string combined; ///< SHA-256 of the three hex digests concatenated
};

FileDigests digest_files(const std::string& data_bytes, const std::string& supply_bytes,
                         const std::string& noise_bytes);

/// The three input files, parsed and cross-checked for dimensions.
struct Problem
{
    DataRecord data;
    SupplyRate supply;
    io::NoiseFile noise;
    FileDigests digests;
};

Problem load_problem(const std::filesystem::path& data, const std::filesystem::path& supply,
                     const std::filesystem::path& noise, const Tolerances& tol = {});
/// Same from file contents.
Problem parse_problem(const std::string& data_bytes, const std::string& supply_bytes, const std::string& noise_bytes,
                      const Tolerances& tol = {});

/// One eigenvalue check: passes when lambda_min >= bound.
struct CheckRecord
{
    std::string name;
    double bound = 0.0;
    double lambda_min = 0.0;
    std::vector<double> spectrum; ///< ascending
};

struct CertificateDocument
{
    std::string tool_version = kToolVersion;
    std::uint64_t seed = 0;
    Tolerances tol;
    FileDigests digests;
    std::string noise_model;
    Eigen::Index n = 0, m = 0, p = 0, T = 0;

    Verdict verdict = Verdict::Inconclusive;
    std::string note;

    Eigen::Index rank = 0, rank_required = 0;
    std::vector<double> singular_values;

    std::optional<Eigen::MatrixXd> P, Q;
    std::optional<double> alpha;
    std::vector<CheckRecord> checks;
    std::optional<CounterexamplePair> counterexample;
    std::optional<double> slack_upper_bound; ///< only when the solver proved infeasibility
};

/// Recomputes every eigenvalue check of an Informative outcome from the
/// stored matrices; uses no solver. Storage-only for N0; (Q, alpha) for N1/N2.
std::vector<CheckRecord> certificate_checks(const Problem& pr, const Eigen::MatrixXd* P, const Eigen::MatrixXd* Q,
                                            const double* alpha, const Tolerances& tol);

CertificateDocument make_certificate(const Problem& pr, const InformativityVerdict& v, const Tolerances& tol,
                                     std::uint64_t seed = 0);

std::string format_certificate_json(const CertificateDocument& doc);
CertificateDocument parse_certificate_json(const std::string& text);

struct VerifyResult
{
    int code = exit_code::not_informative;
    std::vector<std::string> failures; ///< empty iff code == 0
};

/// Audits a certificate against the problem with eigenvalue computations
/// only. `tol` must equal the tolerances recorded in the document.
VerifyResult verify_certificate(const CertificateDocument& doc, const Problem& pr, const Tolerances& tol = {});

// ---- commands ---------------------------------------------------------------
// Each returns the process exit code and writes diagnostics to `err`.

struct CheckOptions
{
    std::filesystem::path data, supply, noise;
    std::filesystem::path out = "certificate.json";
    Tolerances tol;
    lmi::Budget budget;
    std::uint64_t seed = 0;
};

int cmd_check(const CheckOptions& opt, std::ostream& out, std::ostream& err);

int cmd_verify(const std::filesystem::path& certificate, const std::filesystem::path& data,
               const std::filesystem::path& supply, const std::filesystem::path& noise, const Tolerances& tol,
               std::ostream& out, std::ostream& err);

/// Writes data.csv, supply.json, noise.json and system.json into `out_dir`.
int cmd_generate(const std::filesystem::path& config, const std::filesystem::path& out_dir, std::ostream& out,
                 std::ostream& err);

/// N1 <-> N2. An empty `output` writes to `out`.
int cmd_convert_noise(const std::filesystem::path& input, const std::filesystem::path& output, const Tolerances& tol,
                      std::ostream& out, std::ostream& err);

/// Human-readable summary of a certificate, with a margin table.
int cmd_report(const std::filesystem::path& certificate, std::ostream& out, std::ostream& err);

} // namespace dissipacert::cli
