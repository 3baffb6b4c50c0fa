#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

namespace cpi {

/// Numeric CSV, no header, comma separated, rectangular.
Eigen::MatrixXd read_csv_matrix(const std::string& path);
void write_csv_matrix(const std::string& path, const Eigen::MatrixXd& m);

/// Flat "key = value" configuration text; '#' starts a comment. Keys carry
/// section prefixes ("options.alpha"). Vectors are space-separated values.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(const std::string& text);
ConfigMap parse_config_file(const std::string& path);

double config_double(const ConfigMap& cfg, const std::string& key, double fallback);
double config_double_required(const ConfigMap& cfg, const std::string& key);
int config_int(const ConfigMap& cfg, const std::string& key, int fallback);
std::string config_string(const ConfigMap& cfg, const std::string& key,
                          const std::string& fallback);
Eigen::VectorXd config_vector(const ConfigMap& cfg, const std::string& key);
bool config_has(const ConfigMap& cfg, const std::string& key);

/// 17-significant-digit rendering used everywhere a double is serialized,
/// so results round-trip losslessly.
std::string fmt_double(double v);
std::string fmt_vector(const Eigen::VectorXd& v);
Eigen::VectorXd parse_vector(const std::string& text);

/// Line-oriented result files share the config syntax.
void write_kv_file(const std::string& path, const std::vector<std::pair<std::string, std::string>>& kv);

} // namespace cpi
