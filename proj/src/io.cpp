#include "cpi/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cpi {

Eigen::MatrixXd read_csv_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw std::runtime_error(path + ": non-numeric cell '" + cell + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error(path + ": ragged rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error(path + ": empty file");
    Eigen::MatrixXd m(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows.front().size(); ++j)
            m(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
    return m;
}

void write_csv_matrix(const std::string& path, const Eigen::MatrixXd& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << fmt_double(m(i, j));
        }
        out << '\n';
    }
}

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

} // namespace

ConfigMap parse_config_text(const std::string& text) {
    ConfigMap cfg;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error("config line " + std::to_string(lineno) + ": empty key");
        cfg[key] = value;
    }
    return cfg;
}

ConfigMap parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

bool config_has(const ConfigMap& cfg, const std::string& key) { return cfg.count(key) > 0; }

double config_double(const ConfigMap& cfg, const std::string& key, double fallback) {
    const auto it = cfg.find(key);
    if (it == cfg.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw std::runtime_error("config key '" + key + "': bad number '" + it->second + "'");
    }
}

double config_double_required(const ConfigMap& cfg, const std::string& key) {
    if (!config_has(cfg, key)) throw std::runtime_error("config key '" + key + "' is required");
    return config_double(cfg, key, 0.0);
}

int config_int(const ConfigMap& cfg, const std::string& key, int fallback) {
    const auto it = cfg.find(key);
    if (it == cfg.end()) return fallback;
    try {
        return std::stoi(it->second);
    } catch (const std::exception&) {
        throw std::runtime_error("config key '" + key + "': bad integer '" + it->second + "'");
    }
}

std::string config_string(const ConfigMap& cfg, const std::string& key,
                          const std::string& fallback) {
    const auto it = cfg.find(key);
    return it == cfg.end() ? fallback : it->second;
}

Eigen::VectorXd config_vector(const ConfigMap& cfg, const std::string& key) {
    const auto it = cfg.find(key);
    if (it == cfg.end()) throw std::runtime_error("config key '" + key + "' is required");
    try {
        return parse_vector(it->second);
    } catch (const std::exception&) {
        throw std::runtime_error("config key '" + key + "': bad vector '" + it->second + "'");
    }
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_vector(const Eigen::VectorXd& v) {
    std::string out;
    for (int i = 0; i < v.size(); ++i) {
        if (i) out += ' ';
        out += fmt_double(v(i));
    }
    return out;
}

Eigen::VectorXd parse_vector(const std::string& text) {
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string tok;
    while (ss >> tok) vals.push_back(std::stod(tok));
    Eigen::VectorXd v(static_cast<int>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i) v(static_cast<int>(i)) = vals[i];
    return v;
}

void write_kv_file(const std::string& path,
                   const std::vector<std::pair<std::string, std::string>>& kv) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
}

} // namespace cpi
