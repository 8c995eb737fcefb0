#include "dissipacert/io.hpp"

#include "json_util.hpp"

#include "dissipacert/errors.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

namespace dissipacert::io {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

namespace detail {

json to_json(const Mat& m)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
    {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

json to_json(const Vec& v)
{
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        out.push_back(v(i));
    return out;
}

json to_json(const Sys& sys)
{
    return json{{"A", to_json(sys.A)}, {"B", to_json(sys.B)}, {"C", to_json(sys.C)}, {"D", to_json(sys.D)}};
}

const json& field(const json& j, const char* key)
{
    if (!j.is_object() || !j.contains(key))
        throw ParseError(std::string("missing field '") + key + "'");
    return j.at(key);
}

double get_double(const json& j, const char* what)
{
    if (!j.is_number())
        throw ParseError(std::string(what) + ": expected a number");
    return j.get<double>();
}

Eigen::Index get_index(const json& j, const char* what)
{
    if (!j.is_number_integer() || j.get<long long>() < 0)
        throw ParseError(std::string(what) + ": expected a nonnegative integer");
    return static_cast<Eigen::Index>(j.get<long long>());
}

std::uint64_t get_u64(const json& j, const char* what)
{
    if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<long long>() < 0))
        throw ParseError(std::string(what) + ": expected a nonnegative integer");
    return j.get<std::uint64_t>();
}

std::string get_string(const json& j, const char* what)
{
    if (!j.is_string())
        throw ParseError(std::string(what) + ": expected a string");
    return j.get<std::string>();
}

Mat get_matrix(const json& j, const char* what, Eigen::Index rows, Eigen::Index cols)
{
    if (!j.is_array())
        throw ParseError(std::string(what) + ": expected an array of rows");
    const auto r = static_cast<Eigen::Index>(j.size());
    Eigen::Index c = r > 0 && j[0].is_array() ? static_cast<Eigen::Index>(j[0].size()) : 0;
    // An empty matrix with a known column count is written as [].
    if (r == 0 && cols >= 0)
        c = cols;
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
    {
        const json& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != c)
            throw ParseError(std::string(what) + ": rows must be arrays of equal length");
        for (Eigen::Index k = 0; k < c; ++k)
            m(i, k) = get_double(row[static_cast<std::size_t>(k)], what);
    }
    if ((rows >= 0 && r != rows) || (cols >= 0 && c != cols))
    {
        std::ostringstream msg;
        msg << what << ": expected " << rows << " x " << cols << ", got " << r << " x " << c;
        throw SpecError(msg.str());
    }
    return m;
}

Vec get_vector(const json& j, const char* what, Eigen::Index size)
{
    const std::vector<double> d = get_doubles(j, what);
    if (size >= 0 && static_cast<Eigen::Index>(d.size()) != size)
        throw SpecError(std::string(what) + ": wrong length");
    return Eigen::Map<const Vec>(d.data(), static_cast<Eigen::Index>(d.size()));
}

std::vector<double> get_doubles(const json& j, const char* what)
{
    if (!j.is_array())
        throw ParseError(std::string(what) + ": expected an array of numbers");
    std::vector<double> out;
    out.reserve(j.size());
    for (const json& e : j)
        out.push_back(get_double(e, what));
    return out;
}

Sys get_system(const json& j, const char* what)
{
    if (!j.is_object())
        throw ParseError(std::string(what) + ": expected an object with A, B, C, D");
    Mat a = get_matrix(field(j, "A"), "A");
    const Eigen::Index n = a.rows();
    Mat b = get_matrix(field(j, "B"), "B", n);
    Mat c = get_matrix(field(j, "C"), "C", -1, n);
    Mat d = get_matrix(field(j, "D"), "D", c.rows(), b.cols());
    Sys sys(std::move(a), std::move(b), std::move(c), std::move(d));
    sys.validate();
    return sys;
}

json parse(const std::string& text, const char* what)
{
    try
    {
        return json::parse(text);
    }
    catch (const json::exception& e)
    {
        throw ParseError(std::string(what) + ": " + e.what());
    }
}

} // namespace detail

using namespace detail;

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ParseError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad())
        throw ParseError("error reading " + path.string());
    return buf.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content)
{
    static std::atomic<unsigned> counter{0};
    std::filesystem::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw ParseError("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out)
        {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw ParseError("error writing " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec)
    {
        std::filesystem::remove(tmp, ec);
        throw ParseError("cannot rename onto " + path.string());
    }
}

std::string sha256_hex(const std::string& bytes)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw NumericalError("SHA-256 computation failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i)
    {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---- CSV ------------------------------------------------------------------

namespace {

std::vector<std::string> split_cells(const std::string& line)
{
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line)
    {
        if (ch == ',')
        {
            cells.push_back(cur);
            cur.clear();
        }
        else if (ch != '\r')
            cur.push_back(ch);
    }
    cells.push_back(cur);
    for (std::string& c : cells)
    {
        const auto b = c.find_first_not_of(" \t");
        const auto e = c.find_last_not_of(" \t");
        c = b == std::string::npos ? std::string() : c.substr(b, e - b + 1);
    }
    return cells;
}

double parse_number(const std::string& cell, int line)
{
    double v = 0;
    const char* first = cell.data();
    const char* last = first + cell.size();
    if (!cell.empty() && *first == '+')
        ++first;
    const auto res = std::from_chars(first, last, v);
    if (cell.empty() || res.ec != std::errc() || res.ptr != last || !std::isfinite(v))
        throw ParseError("line " + std::to_string(line) + ": '" + cell + "' is not a finite number");
    return v;
}

} // namespace

std::string format_data_csv(const DataRecord& data)
{
    const Eigen::Index t = data.T();
    std::string out = "channel";
    for (Eigen::Index k = 0; k <= t; ++k)
        out += "," + std::to_string(k);
    out += "\n";
    auto emit = [&](char kind, const Mat& rows, bool with_final) {
        for (Eigen::Index i = 0; i < rows.rows(); ++i)
        {
            out += kind + std::to_string(i + 1);
            for (Eigen::Index k = 0; k < rows.cols(); ++k)
                out += "," + format_double(rows(i, k));
            if (!with_final)
                out += ",";
            out += "\n";
        }
    };
    emit('u', data.U(), false);
    emit('x', data.X(), true);
    emit('y', data.Y(), false);
    return out;
}

DataRecord parse_data_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    Eigen::Index t = -1;
    std::map<char, std::map<int, std::vector<double>>> rows;
    while (std::getline(in, line))
    {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const std::vector<std::string> cells = split_cells(line);
        if (t < 0)
        {
            if (cells[0] != "channel")
                throw ParseError("header must start with 'channel'");
            t = static_cast<Eigen::Index>(cells.size()) - 2;
            if (t < 1)
                throw ParseError("header must list time indices 0..T with T >= 1");
            for (std::size_t k = 1; k < cells.size(); ++k)
                if (cells[k] != std::to_string(k - 1))
                    throw ParseError("header time indices must read 0,1,...,T");
            continue;
        }
        const std::string& name = cells[0];
        if (name.size() < 2 || (name[0] != 'u' && name[0] != 'x' && name[0] != 'y') ||
            name.find_first_not_of("0123456789", 1) != std::string::npos || name[1] == '0')
            throw ParseError("line " + std::to_string(lineno) + ": bad channel name '" + name + "'");
        if (static_cast<Eigen::Index>(cells.size()) != t + 2)
            throw ParseError("line " + std::to_string(lineno) + ": expected " + std::to_string(t + 2) + " cells");
        const char kind = name[0];
        const int index = std::stoi(name.substr(1));
        const Eigen::Index count = kind == 'x' ? t + 1 : t;
        if (kind != 'x' && !cells.back().empty())
            throw ParseError("line " + std::to_string(lineno) + ": " + name + " has no sample at time T");
        std::vector<double> values;
        for (Eigen::Index k = 0; k < count; ++k)
            values.push_back(parse_number(cells[static_cast<std::size_t>(k + 1)], lineno));
        if (!rows[kind].emplace(index, std::move(values)).second)
            throw ParseError("duplicate channel " + name);
    }
    if (t < 0)
        throw ParseError("empty data file");

    auto assemble = [&](char kind, Eigen::Index cols) {
        const auto& byidx = rows[kind];
        Mat m(static_cast<Eigen::Index>(byidx.size()), cols);
        int expect = 1;
        for (const auto& [idx, vals] : byidx)
        {
            if (idx != expect)
                throw ParseError(std::string("channels ") + kind + "1.." + kind + std::to_string(byidx.size()) +
                                 " must be numbered consecutively");
            for (Eigen::Index k = 0; k < cols; ++k)
                m(idx - 1, k) = vals[static_cast<std::size_t>(k)];
            ++expect;
        }
        if (m.rows() == 0)
            throw SpecError(std::string("data file has no ") + kind + " channels");
        return m;
    };
    Mat u = assemble('u', t), x = assemble('x', t + 1), y = assemble('y', t);
    return DataRecord(std::move(u), std::move(x), std::move(y));
}

// ---- supply ---------------------------------------------------------------

std::string format_supply_json(const SupplyRate& s)
{
    const json j{{"m", s.m()}, {"p", s.p()}, {"S", to_json(s.S().matrix())}};
    return j.dump(2) + "\n";
}

SupplyRate parse_supply_json(const std::string& text, const Tolerances& tol)
{
    const json j = parse(text, "supply file");
    const Eigen::Index m = get_index(field(j, "m"), "m"), p = get_index(field(j, "p"), "p");
    if (m < 1 || p < 1)
        throw SpecError("supply dimensions must be positive");
    const Mat s = get_matrix(field(j, "S"), "S", m + p, m + p);
    return SupplyRate(SymMat(s, tol.atol_sym), m, p, true, tol);
}

// ---- noise ------------------------------------------------------------------

std::string format_noise_json(const NoiseFile& noise)
{
    json j{{"model", model_tag(noise.spec)}, {"n", noise.n}, {"p", noise.p}, {"T", noise.T}};
    if (const auto* n1 = std::get_if<NoiseN1>(&noise.spec))
        j["Phi"] = to_json(n1->phi.matrix());
    else if (const auto* n2 = std::get_if<NoiseN2>(&noise.spec))
        j["Theta"] = to_json(n2->theta.matrix());
    return j.dump(2) + "\n";
}

NoiseFile parse_noise_json(const std::string& text, const Tolerances& tol)
{
    const json j = parse(text, "noise file");
    NoiseFile out;
    out.n = get_index(field(j, "n"), "n");
    out.p = get_index(field(j, "p"), "p");
    out.T = get_index(field(j, "T"), "T");
    if (out.n < 1 || out.p < 1 || out.T < 1)
        throw SpecError("noise file dimensions must be positive");
    const std::string model = get_string(field(j, "model"), "model");
    const Eigen::Index dim = out.n + out.p + out.T;
    if (model == "N0")
        out.spec = NoiseN0{};
    else if (model == "N1")
        out.spec = NoiseN1{SymMat(get_matrix(field(j, "Phi"), "Phi", dim, dim), tol.atol_sym), out.n + out.p};
    else if (model == "N2")
        out.spec = NoiseN2{SymMat(get_matrix(field(j, "Theta"), "Theta", dim, dim), tol.atol_sym), out.T};
    else
        throw ParseError("model must be N0, N1 or N2, got '" + model + "'");
    return out;
}

std::string format_system_json(const Sys& sys)
{
    return to_json(sys).dump(2) + "\n";
}

// ---- generate configs -------------------------------------------------------

GenerateConfig parse_generate_config(const std::string& text)
{
    const json j = parse(text, "config file");
    GenerateConfig cfg;
    datagen::ScenarioConfig& sc = cfg.scenario;
    sc.n = get_index(field(j, "n"), "n");
    sc.m = get_index(field(j, "m"), "m");
    sc.p = get_index(field(j, "p"), "p");
    sc.T = get_index(field(j, "T"), "T");
    if (j.contains("seed"))
        sc.seed = get_u64(j["seed"], "seed");
    if (j.contains("require_rank"))
    {
        if (!j["require_rank"].is_boolean())
            throw ParseError("require_rank must be a boolean");
        sc.require_rank = j["require_rank"].get<bool>();
    }
    if (j.contains("max_retries"))
        sc.max_retries = static_cast<int>(get_index(j["max_retries"], "max_retries"));

    if (j.contains("system"))
    {
        const json& s = j["system"];
        if (s.is_object() && s.contains("random_stable"))
        {
            const json& rs = s["random_stable"];
            if (rs.is_object() && rs.contains("spectral_radius"))
                sc.spectral_radius_bound = get_double(rs["spectral_radius"], "spectral_radius");
        }
        else
            sc.system = get_system(s, "system");
    }

    if (j.contains("input"))
    {
        const json& in = j["input"];
        if (in.is_object() && in.contains("explicit"))
            sc.inputs = get_matrix(in["explicit"], "input", sc.m, sc.T);
        else if (!(in.is_string() && in.get<std::string>() == "random"))
            throw ParseError("input must be \"random\" or {\"explicit\": [[...]]}");
    }
    if (j.contains("input_scale"))
        sc.input_scale = get_double(j["input_scale"], "input_scale");
    if (j.contains("x0"))
        sc.x0 = get_vector(j["x0"], "x0", sc.n);

    if (j.contains("noise"))
    {
        const json& nz = j["noise"];
        const std::string type = get_string(field(nz, "type"), "noise.type");
        const Eigen::Index rows = sc.n + sc.p, dim = rows + sc.T;
        if (type == "energy")
        {
            const double bound = get_double(field(nz, "bound"), "noise.bound");
            if (!(bound > 0))
                throw SpecError("noise.bound must be positive");
            sc.noise = energy_bound(SymMat::identity(rows) * bound, sc.T);
        }
        else if (type == "N1")
            sc.noise = NoiseN1{SymMat(get_matrix(field(nz, "Phi"), "Phi", dim, dim)), rows};
        else if (type == "N2")
            sc.noise = NoiseN2{SymMat(get_matrix(field(nz, "Theta"), "Theta", dim, dim)), sc.T};
        else if (type != "none")
            throw ParseError("noise.type must be none, energy, N1 or N2");
        if (nz.contains("fill"))
            sc.fill = get_double(nz["fill"], "noise.fill");
    }

    const json& sup = field(j, "supply");
    const std::string type = get_string(field(sup, "type"), "supply.type");
    SupplyChoice& choice = cfg.supply;
    if (type == "bounded_real" && sup.contains("gamma"))
    {
        choice.kind = SupplyChoice::Kind::BoundedReal;
        choice.gamma = get_double(sup["gamma"], "supply.gamma");
    }
    else if (type == "bounded_real" && sup.contains("gamma_factor"))
    {
        choice.kind = SupplyChoice::Kind::BoundedRealRelative;
        choice.gamma = get_double(sup["gamma_factor"], "supply.gamma_factor");
    }
    else if (type == "positive_real")
    {
        choice.kind = SupplyChoice::Kind::PositiveReal;
        if (sc.m != sc.p)
            throw SpecError("positive-real supply needs m == p");
    }
    else if (type == "explicit")
    {
        choice.kind = SupplyChoice::Kind::Explicit;
        choice.S = get_matrix(field(sup, "S"), "supply.S", sc.m + sc.p, sc.m + sc.p);
    }
    else
        throw ParseError("supply must be bounded_real (gamma or gamma_factor), positive_real or explicit");
    if ((choice.kind == SupplyChoice::Kind::BoundedReal || choice.kind == SupplyChoice::Kind::BoundedRealRelative) &&
        !(choice.gamma > 0))
        throw SpecError("gamma must be positive");

    sc.validate();
    return cfg;
}

} // namespace dissipacert::io
