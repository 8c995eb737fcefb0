#pragma once

// Private helpers shared by the file-format code. Not installed.

#include "dissipacert/errors.hpp"
#include "dissipacert/sysmodel.hpp"

#include <json.hpp>

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace dissipacert::io::detail {

using json = nlohmann::json;

json to_json(const Eigen::MatrixXd& m);
json to_json(const Eigen::VectorXd& v);
json to_json(const Sys& sys);

const json& field(const json& j, const char* key);
double get_double(const json& j, const char* what);
Eigen::Index get_index(const json& j, const char* what);
std::uint64_t get_u64(const json& j, const char* what);
std::string get_string(const json& j, const char* what);

/// Rectangular array of rows. rows/cols < 0 means "any".
Eigen::MatrixXd get_matrix(const json& j, const char* what, Eigen::Index rows = -1, Eigen::Index cols = -1);
Eigen::VectorXd get_vector(const json& j, const char* what, Eigen::Index size = -1);
std::vector<double> get_doubles(const json& j, const char* what);
Sys get_system(const json& j, const char* what);

json parse(const std::string& text, const char* what);

} // namespace dissipacert::io::detail
