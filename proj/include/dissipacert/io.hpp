#pragma once

#include "dissipacert/datagen.hpp"
#include "dissipacert/sysmodel.hpp"

#include <filesystem>
#include <string>

// File formats. Numbers are written with 17 significant digits so that
// every double survives a write/read cycle bit for bit. Readers throw
// ParseError on malformed content and SpecError on inconsistent dimensions.
namespace dissipacert::io {

/// Whole file as bytes. Throws ParseError when unreadable.
std::string read_file(const std::filesystem::path& path);

/// Writes to a temporary file in the same directory, then renames it over
/// `path`, so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(const std::string& bytes);

/// %.17g
std::string format_double(double v);

// ---- trajectories (CSV) -------------------------------------------------
//
//   channel,0,1,...,T
//   u1,...            (T values, last cell empty)
//   x1,...            (T+1 values)
//   y1,...            (T values, last cell empty)
//
// Rows may appear in any order; indices of each kind must be 1..k.

std::string format_data_csv(const DataRecord& data);
DataRecord parse_data_csv(const std::string& text);

// ---- supply rate (JSON) -------------------------------------------------
//
//   {"m": 1, "p": 1, "S": [[...], ...]}      S is (m+p) x (m+p), [F G; G^T H]

std::string format_supply_json(const SupplyRate& s);
/// Enforces the inertia assumption on S (AssumptionError).
SupplyRate parse_supply_json(const std::string& text, const Tolerances& tol = {});

// ---- noise models (JSON) ------------------------------------------------
//
//   {"model": "N0", "n": 2, "p": 1, "T": 30}
//   {"model": "N1", "n": 2, "p": 1, "T": 30, "Phi": [[...]]}     (n+p)+T square
//   {"model": "N2", "n": 2, "p": 1, "T": 30, "Theta": [[...]]}   T+(n+p) square

struct NoiseFile
{
    NoiseSpec spec;
    Eigen::Index n = 0, p = 0, T = 0;
};

std::string format_noise_json(const NoiseFile& noise);
NoiseFile parse_noise_json(const std::string& text, const Tolerances& tol = {});

// ---- systems (JSON fragment, also used in configs and certificates) ----

std::string format_system_json(const Sys& sys);

// ---- scenario configs (JSON) --------------------------------------------
//
//   {"n":2, "m":1, "p":1, "T":30, "seed":7,
//    "system": {"A":..,"B":..,"C":..,"D":..} | {"random_stable": {"spectral_radius": 0.9}},
//    "input":  "random" | {"explicit": [[...]]},  "input_scale": 1.0,
//    "x0": [...],
//    "noise":  {"type": "none"}
//            | {"type": "energy", "bound": 1e-3, "fill": 0.5}
//            | {"type": "N1", "Phi": [[...]], "fill": 0.5}
//            | {"type": "N2", "Theta": [[...]], "fill": 0.5},
//    "supply": {"type": "bounded_real", "gamma": 2.0}
//            | {"type": "bounded_real", "gamma_factor": 1.05}   (times the H-infinity norm)
//            | {"type": "positive_real"}
//            | {"type": "explicit", "S": [[...]]}}

struct SupplyChoice
{
    enum class Kind
    {
        BoundedReal,
        BoundedRealRelative,
        PositiveReal,
        Explicit,
    };
    Kind kind = Kind::BoundedReal;
    double gamma = 1.0;        ///< gamma, or the factor for BoundedRealRelative
    Eigen::MatrixXd S;
};

struct GenerateConfig
{
    datagen::ScenarioConfig scenario;
    SupplyChoice supply;
};

GenerateConfig parse_generate_config(const std::string& text);

} // namespace dissipacert::io
