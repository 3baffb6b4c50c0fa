#include "cpi/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "cpi/models/box.hpp"
#include "cpi/models/dgp8.hpp"
#include "cpi/models/entry_game.hpp"
#include "cpi/parallel.hpp"
#include "cpi/version.hpp"

namespace fs = std::filesystem;

namespace cpi {

Options options_from_config(const ConfigMap& cfg) {
    const std::string profile = config_string(cfg, "options.profile", "baseline");
    Options o;
    if (profile == "stringent")
        o = Options::stringent();
    else if (profile == "baseline")
        o = Options::baseline();
    else
        throw std::runtime_error("config key 'options.profile': unknown profile '" + profile + "'");

    o.alpha = config_double(cfg, "options.alpha", o.alpha);
    const std::string type = config_string(cfg, "options.type", "two-sided");
    if (type == "two-sided")
        o.interval_type = IntervalType::two_sided;
    else if (type == "one-sided")
        o.interval_type = IntervalType::one_sided;
    else
        throw std::runtime_error("config key 'options.type': expected one-sided or two-sided");
    const std::string method = config_string(cfg, "options.method", "calibrated");
    if (method == "calibrated")
        o.method = CiMethod::calibrated;
    else if (method == "andrews-soares")
        o.method = CiMethod::andrews_soares;
    else
        throw std::runtime_error(
            "config key 'options.method': expected calibrated or andrews-soares");

    o.b = config_int(cfg, "options.b", o.b);
    o.rho = config_double(cfg, "options.rho", o.rho);
    o.eam_maxit = config_int(cfg, "options.eam_maxit", o.eam_maxit);
    o.eam_minit = config_int(cfg, "options.eam_minit", o.eam_minit);
    o.mbase = config_int(cfg, "options.mbase", o.mbase);
    o.h_rate = config_double(cfg, "options.h_rate", o.h_rate);
    o.h_rate2 = config_double(cfg, "options.h_rate2", o.h_rate2);
    o.eam_obj_tol = config_double(cfg, "options.eam_obj_tol", o.eam_obj_tol);
    o.eam_tol = config_double(cfg, "options.eam_tol", o.eam_tol);
    const std::string maxviol = config_string(cfg, "options.eam_maxviol_tol", "inf");
    o.eam_maxviol_tol = (maxviol == "inf" || maxviol == "Inf") ? kInf : std::stod(maxviol);
    o.ei_points = config_int(cfg, "options.ei_points", o.ei_points);
    o.f_keep_threshold = config_double(cfg, "options.f_keep_threshold", o.f_keep_threshold);
    if (config_has(cfg, "options.seed")) {
        try {
            o.seed = std::stoull(cfg.at("options.seed"));
        } catch (const std::exception&) {
            throw std::runtime_error("config key 'options.seed': bad integer '" +
                                     cfg.at("options.seed") + "'");
        }
    }
    o.parallel = config_int(cfg, "options.parallel", default_workers());

    const std::string kappa = config_string(cfg, "options.kappa", "default");
    if (kappa != "default")
        throw std::runtime_error("config key 'options.kappa': only 'default' is supported here");
    const std::string gms = config_string(cfg, "options.gms", "default");
    if (gms != "default")
        throw std::runtime_error("config key 'options.gms': only 'default' is supported here");
    return o;
}

namespace {

struct ModelBundle {
    std::shared_ptr<const MomentModel> model;
    ParameterSpace default_space;
    bool has_default_space = false;
    BoundTransform bound_transform;
};

ModelBundle make_model(const ConfigMap& cfg, double f_keep_threshold) {
    const std::string name = config_string(cfg, "model", "");
    if (name.empty()) throw std::runtime_error("config key 'model' is required");
    ModelBundle mb;
    if (name == "box") {
        mb.model = models::box_model(config_double(cfg, "model.halfwidth", 1.0));
    } else if (name == "rotated_box") {
        const double deg = config_double(cfg, "model.angle_deg", 45.0);
        mb.model =
            models::rotated_box_model(deg * M_PI / 180.0, config_double(cfg, "model.halfwidth", 1.0));
    } else if (name == "entry_game") {
        mb.model = models::entry_game_model(f_keep_threshold);
        mb.default_space = models::entry_game_space();
        mb.has_default_space = true;
    } else if (name == "dgp8_linear") {
        mb.model = models::dgp8_linear_model(config_double(cfg, "model.halfwidth", 0.25));
        models::Dgp8Hooks hooks = models::dgp8_space_hooks();
        mb.default_space = hooks.space;
        mb.has_default_space = true;
        mb.bound_transform = hooks.bound_transform;
    } else {
        throw std::runtime_error("config key 'model': unknown model '" + name + "'");
    }
    return mb;
}

} // namespace

Problem build_problem(const ConfigMap& cfg, const MatrixXd& data) {
    const Options opts = options_from_config(cfg);
    ModelBundle mb = make_model(cfg, opts.f_keep_threshold);

    ParameterSpace space;
    if (config_has(cfg, "space.lb") || config_has(cfg, "space.ub")) {
        space.lb = config_vector(cfg, "space.lb");
        space.ub = config_vector(cfg, "space.ub");
        if (mb.has_default_space && space.lb.size() == mb.default_space.dim()) {
            space.poly_a = mb.default_space.poly_a;
            space.poly_b = mb.default_space.poly_b;
        }
    } else if (mb.has_default_space) {
        space = mb.default_space;
    } else {
        throw std::runtime_error("config keys 'space.lb' and 'space.ub' are required");
    }

    const VectorXd p = config_vector(cfg, "p");
    VectorXd theta_0;
    if (config_has(cfg, "theta_0"))
        theta_0 = config_vector(cfg, "theta_0");
    else
        theta_0 = 0.5 * (space.lb + space.ub);   // hyperrectangle midpoint
    if (space.poly_rows() > 0 && !space.contains(theta_0))
        throw std::runtime_error("config: theta_0 violates the polytope rows");

    std::vector<VectorXd> theta_feas;
    if (config_has(cfg, "theta_feas")) {
        const VectorXd flat = config_vector(cfg, "theta_feas");
        const int d = space.dim();
        if (flat.size() % d != 0)
            throw std::runtime_error("config key 'theta_feas': length not a multiple of d");
        for (int i = 0; i + d <= flat.size(); i += d) theta_feas.push_back(flat.segment(i, d));
    }
    return validate_inputs(mb.model, data, theta_0, p, space, opts, mb.bound_transform,
                           std::move(theta_feas));
}

MatrixXd simulate_dataset(const ConfigMap& cfg, const std::string& dgp, std::uint64_t seed) {
    const int n = config_int(cfg, "sim.n", 1000);
    if (dgp == "entry_game") {
        VectorXd theta_true = config_has(cfg, "sim.theta_true")
                                  ? config_vector(cfg, "sim.theta_true")
                                  : models::entry_game_theta_true();
        const double r = config_double(cfg, "sim.r", 0.0);
        const std::string sel = config_string(cfg, "sim.selection", "uniform");
        models::SelectionRule rule = models::SelectionRule::uniform;
        if (sel == "always_01")
            rule = models::SelectionRule::always_01;
        else if (sel == "always_10")
            rule = models::SelectionRule::always_10;
        else if (sel != "uniform")
            throw std::runtime_error("config key 'sim.selection': unknown rule '" + sel + "'");
        return models::simulate_entry_game(theta_true, n, r, rule, seed);
    }
    if (dgp == "box" || dgp == "rotated_box") {
        Eigen::Vector2d mu(0.0, 0.0);
        if (config_has(cfg, "sim.theta_true")) {
            const VectorXd v = config_vector(cfg, "sim.theta_true");
            mu << v(0), v(1);
        }
        return models::simulate_box_data(mu, n, seed);
    }
    if (dgp == "dgp8_linear") {
        Eigen::Vector2d mu(0.5, 0.5);
        if (config_has(cfg, "sim.theta_true")) {
            const VectorXd v = config_vector(cfg, "sim.theta_true");
            mu << v(0), v(1);
        }
        return models::simulate_dgp8_data(mu, n, seed);
    }
    throw std::runtime_error("unknown dgp '" + dgp + "'");
}

namespace {

void append_direction(std::vector<std::pair<std::string, std::string>>& kv,
                      const std::string& prefix, const DirectionResult& dir) {
    kv.emplace_back(prefix + ".theta_star", fmt_vector(dir.theta_hat));
    kv.emplace_back(prefix + ".optbound", fmt_double(dir.optbound));
    kv.emplace_back(prefix + ".c", fmt_double(dir.c_at_opt));
    kv.emplace_back(prefix + ".cv", fmt_double(dir.cv_at_opt));
    kv.emplace_back(prefix + ".ei", fmt_double(dir.ei_at_opt));
    kv.emplace_back(prefix + ".converged", dir.converged ? "1" : "0");
    kv.emplace_back(prefix + ".boundary_warning", dir.boundary_warning ? "1" : "0");
    kv.emplace_back(prefix + ".iterations", std::to_string(dir.iterations));
    kv.emplace_back(prefix + ".lp_count", std::to_string(dir.lp_count));
    kv.emplace_back(prefix + ".surrogate_fits", std::to_string(dir.surrogate_fits));
    kv.emplace_back(prefix + ".wall_seconds", fmt_double(dir.wall_seconds));
}

MatrixXd points_matrix(const RunResult& result) {
    const int d = static_cast<int>(result.dir_up.theta_hat.size());
    std::size_t rows = result.dir_up.evaluated.size();
    if (result.dir_down.has_value()) rows += result.dir_down->evaluated.size();
    MatrixXd m(static_cast<int>(rows), d + 3);
    int r = 0;
    auto emit = [&](const std::vector<EvalPoint>& pts, double dir_sign) {
        for (const EvalPoint& pt : pts) {
            m(r, 0) = dir_sign;
            m.block(r, 1, 1, d) = pt.theta.transpose();
            m(r, d + 1) = pt.c_hat;
            m(r, d + 2) = pt.max_violation;
            ++r;
        }
    };
    emit(result.dir_up.evaluated, 1.0);
    if (result.dir_down.has_value()) emit(result.dir_down->evaluated, -1.0);
    return m;
}

} // namespace

void write_result_files(const std::string& out_path, const RunResult& result,
                        const ConfigMap& cfg) {
    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("cpi.version", kVersion);
    kv.emplace_back("run.seed", std::to_string(result.seed));
    kv.emplace_back("run.converged", result.converged ? "1" : "0");
    kv.emplace_back("run.wall_seconds", fmt_double(result.wall_seconds));
    kv.emplace_back("interval.two_sided", result.two_sided ? "1" : "0");
    kv.emplace_back("interval.lower", fmt_double(result.lower));
    kv.emplace_back("interval.upper", fmt_double(result.upper));
    append_direction(kv, "dir_up", result.dir_up);
    if (result.dir_down.has_value()) append_direction(kv, "dir_down", *result.dir_down);

    // resolved options, then the input config echoed verbatim
    const Options& o = result.opts;
    kv.emplace_back("options.alpha", fmt_double(o.alpha));
    kv.emplace_back("options.type",
                    o.interval_type == IntervalType::two_sided ? "two-sided" : "one-sided");
    kv.emplace_back("options.method",
                    o.method == CiMethod::calibrated ? "calibrated" : "andrews-soares");
    kv.emplace_back("options.b", std::to_string(o.b));
    kv.emplace_back("options.rho", fmt_double(o.rho));
    kv.emplace_back("options.eam_maxit", std::to_string(o.eam_maxit));
    kv.emplace_back("options.eam_minit", std::to_string(o.eam_minit));
    kv.emplace_back("options.mbase", std::to_string(o.mbase));
    kv.emplace_back("options.h_rate", fmt_double(o.h_rate));
    kv.emplace_back("options.h_rate2", fmt_double(o.h_rate2));
    kv.emplace_back("options.eam_obj_tol", fmt_double(o.eam_obj_tol));
    kv.emplace_back("options.eam_tol", fmt_double(o.eam_tol));
    kv.emplace_back("options.eam_maxviol_tol",
                    std::isinf(o.eam_maxviol_tol) ? "inf" : fmt_double(o.eam_maxviol_tol));
    kv.emplace_back("options.ei_points", std::to_string(o.ei_points));
    kv.emplace_back("options.f_keep_threshold", fmt_double(o.f_keep_threshold));
    for (const auto& [k, v] : cfg) kv.emplace_back("config." + k, v);
    write_kv_file(out_path, kv);

    const std::string points_path = out_path + ".points.csv";
    write_csv_matrix(points_path, points_matrix(result));
}

int cmd_run(const std::string& config_path, const std::string& data_path,
            const std::string& out_path) {
    ConfigMap cfg;
    Problem problem;
    MatrixXd data;
    try {
        cfg = parse_config_file(config_path);
        data = read_csv_matrix(data_path);
        problem = build_problem(cfg, data);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    try {
        const RunResult result = run_interval(problem);
        write_result_files(out_path, result, cfg);
        std::cout << "interval [" << fmt_double(result.lower) << ", "
                  << fmt_double(result.upper) << "]" << (result.converged ? "" : "  (not converged)")
                  << '\n';
        return result.converged ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << '\n';
        std::vector<std::pair<std::string, std::string>> kv;
        kv.emplace_back("cpi.version", kVersion);
        kv.emplace_back("run.error", e.what());
        for (const auto& [k, v] : cfg) kv.emplace_back("config." + k, v);
        write_kv_file(out_path, kv);
        return 2;
    }
}

std::uint64_t replication_seed(std::uint64_t master_seed, int replication) {
    RngStream s(master_seed, RngDomain::replication, static_cast<std::uint64_t>(replication));
    return s.next();
}

int cmd_simulate(const std::string& config_path, const std::string& dgp_override, int nmc,
                 int sim_lo, int sim_hi, const std::string& out_dir,
                 std::uint64_t seed_override, bool has_seed_override, bool write_data) {
    ConfigMap cfg;
    try {
        cfg = parse_config_file(config_path);
        if (sim_lo < 1 || sim_lo > sim_hi || sim_hi > nmc)
            throw std::runtime_error("need 1 <= sim_lo <= sim_hi <= nmc");
        fs::create_directories(out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    const std::string dgp =
        dgp_override.empty() ? config_string(cfg, "sim.dgp", config_string(cfg, "model", ""))
                             : dgp_override;
    std::uint64_t master_seed = seed_override;
    if (!has_seed_override) {
        master_seed = 0;
        if (config_has(cfg, "options.seed")) {
            try {
                master_seed = std::stoull(cfg.at("options.seed"));
            } catch (const std::exception& e) {
                std::cerr << "error: config key 'options.seed': bad integer\n";
                return 1;
            }
        }
    }

    int failures = 0;
    for (int rep = sim_lo; rep <= sim_hi; ++rep) {
        char tag[32];
        std::snprintf(tag, sizeof(tag), "rep_%05d", rep);
        const std::string base = out_dir + "/" + tag;
        try {
            const std::uint64_t rep_seed = replication_seed(master_seed, rep);
            const MatrixXd data = simulate_dataset(cfg, dgp, rep_seed);
            if (write_data) write_csv_matrix(base + ".data.csv", data);

            ConfigMap run_cfg = cfg;
            run_cfg["options.seed"] = std::to_string(rep_seed);
            run_cfg["model"] = config_string(cfg, "model", dgp);
            const Problem problem = build_problem(run_cfg, data);
            const RunResult result = run_interval(problem);
            write_result_files(base + ".result", result, run_cfg);
            std::cout << tag << ": [" << fmt_double(result.lower) << ", "
                      << fmt_double(result.upper) << "]"
                      << (result.converged ? "" : "  (not converged)") << '\n';
        } catch (const std::exception& e) {
            ++failures;
            std::cerr << tag << " failed: " << e.what() << '\n';
            std::ofstream out(base + ".failed");
            out << e.what() << '\n';
        }
    }
    return failures == 0 ? 0 : 2;
}

int cmd_analyze(const std::string& results_dir, const std::string& config_path,
                const std::string& out_csv) {
    std::vector<std::string> files;
    try {
        for (const auto& entry : fs::directory_iterator(results_dir)) {
            if (entry.path().extension() == ".result") files.push_back(entry.path().string());
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        std::cerr << "error: no .result files in " << results_dir << '\n';
        return 1;
    }

    ConfigMap ref;
    if (!config_path.empty()) {
        try {
            ref = parse_config_file(config_path);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 1;
        }
    }

    std::vector<double> lowers, uppers, c_upper, c_lower, wall;
    for (const std::string& f : files) {
        try {
            const ConfigMap r = parse_config_file(f);
            if (!config_has(r, "interval.lower") || !config_has(r, "interval.upper")) {
                std::cerr << "warning: skipping " << f << " (no interval)\n";
                continue;
            }
            lowers.push_back(config_double_required(r, "interval.lower"));
            uppers.push_back(config_double_required(r, "interval.upper"));
            c_upper.push_back(config_double(r, "dir_up.c", 0.0));
            c_lower.push_back(config_double(r, "dir_down.c", 0.0));
            wall.push_back(config_double(r, "run.wall_seconds", 0.0));
        } catch (const std::exception& e) {
            std::cerr << "warning: skipping " << f << " (" << e.what() << ")\n";
        }
    }
    if (lowers.empty()) {
        std::cerr << "error: no readable result files\n";
        return 1;
    }

    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    auto coverage = [&](double point) {
        int hit = 0;
        for (std::size_t i = 0; i < lowers.size(); ++i)
            if (lowers[i] <= point && point <= uppers[i]) ++hit;
        return static_cast<double>(hit) / static_cast<double>(lowers.size());
    };

    std::vector<std::pair<std::string, std::string>> rows;
    rows.emplace_back("runs", std::to_string(lowers.size()));
    rows.emplace_back("median_lower", fmt_double(median(lowers)));
    rows.emplace_back("median_upper", fmt_double(median(uppers)));
    for (const char* key : {"analysis.id_lower", "analysis.id_upper", "analysis.true_value"}) {
        if (config_has(ref, key))
            rows.emplace_back(std::string("coverage_") + (key + 9),
                              fmt_double(coverage(config_double_required(ref, key))));
    }
    rows.emplace_back("mean_c_upper", fmt_double(mean(c_upper)));
    rows.emplace_back("mean_c_lower", fmt_double(mean(c_lower)));
    rows.emplace_back("mean_wall_seconds", fmt_double(mean(wall)));

    for (const auto& [k, v] : rows) std::printf("%-20s %s\n", k.c_str(), v.c_str());
    if (!out_csv.empty()) {
        std::ofstream out(out_csv);
        for (std::size_t i = 0; i < rows.size(); ++i) out << (i ? "," : "") << rows[i].first;
        out << '\n';
        for (std::size_t i = 0; i < rows.size(); ++i) out << (i ? "," : "") << rows[i].second;
        out << '\n';
    }
    return 0;
}

} // namespace cpi
