#pragma once

// Command-line entry points. Every command loads a JSON problem file,
// applies flag overrides, runs the requested analysis and writes
// deterministic CSV/JSON artifacts into the output directory.
//
// Exit codes: 0 success, 1 computation failure (diverged solve, infeasible
// certificate under --expect-feasible, failed identity check), 2 usage or
// configuration error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dempc/certificate.hpp"
#include "dempc/csv.hpp"
#include "dempc/dissipativity.hpp"
#include "dempc/dp.hpp"
#include "dempc/lqr.hpp"
#include "dempc/problem.hpp"
#include "dempc/problem_io.hpp"
#include "dempc/sim.hpp"
#include "dempc/steady_state.hpp"

namespace dempc::cli {

struct RunConfig {
    std::string command;
    std::string problem_path;
    std::optional<double> gamma;
    std::optional<double> tol;
    std::optional<int> nx;
    std::optional<int> nu;
    double eps = 1e-6;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    bool expect_feasible = false;
    std::string x0 = "";
    int steps = 500;
    std::string gammas = "";

    std::uint64_t hash(const std::string& file_bytes) const {
        std::ostringstream os;
        os << command << '|' << file_bytes << '|';
        if (gamma) os << "gamma=" << format_double(*gamma) << '|';
        if (tol) os << "tol=" << format_double(*tol) << '|';
        if (nx) os << "nx=" << *nx << '|';
        if (nu) os << "nu=" << *nu << '|';
        os << "eps=" << format_double(eps) << "|seed=" << seed << "|x0=" << x0
           << "|steps=" << steps << "|gammas=" << gammas;
        return fnv1a64(os.str());
    }
};

namespace detail {

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open problem file: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline LinearQuadraticProblem require_lqr(AnyProblem&& p, const RunConfig& cfg) {
    auto* lq = std::get_if<LinearQuadraticProblem>(&p);
    if (!lq)
        throw std::invalid_argument(cfg.command + ": requires a linear_quadratic problem file");
    if (cfg.gamma)
        return LinearQuadraticProblem(lq->A, lq->B, lq->Q, lq->R, *cfg.gamma, lq->state_box,
                                      lq->input_box);
    return std::move(*lq);
}

inline ScalarGridProblem require_grid(AnyProblem&& p, const RunConfig& cfg) {
    auto* gp = std::get_if<ScalarGridProblem>(&p);
    if (!gp) throw std::invalid_argument(cfg.command + ": requires a scalar_grid problem file");
    ScalarGridProblem out = std::move(*gp);
    if (cfg.gamma) out = out.with_gamma(*cfg.gamma);
    if (cfg.nx || cfg.nu)
        out = out.with_resolution(cfg.nx.value_or(out.nx()), cfg.nu.value_or(out.nu()));
    return out;
}

inline std::filesystem::path out_path(const RunConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.out_dir);
    return std::filesystem::path(cfg.out_dir) / name;
}

inline std::vector<double> parse_gamma_list(const std::string& spec) {
    double lo = 0, hi = 0, step = 0;
    if (std::sscanf(spec.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3 || step <= 0.0)
        throw std::invalid_argument("--gammas expects lo:hi:step with step > 0, got \"" + spec +
                                    "\"");
    const int count = static_cast<int>(std::floor((hi - lo) / step + 1.5));
    std::vector<double> out;
    for (int i = 0; i < count; ++i) {
        const double g = lo + i * step;
        if (g > hi + 0.5 * step) break;
        out.push_back(g);
    }
    if (out.empty()) throw std::invalid_argument("--gammas produced an empty list");
    return out;
}

inline std::vector<double> parse_double_list(const std::string& spec) {
    std::vector<double> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t pos = 0;
        out.push_back(std::stod(item, &pos));
        if (pos != item.size()) throw std::invalid_argument("invalid number in list: " + item);
    }
    return out;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file: " + path.string());
    out << j.dump(2) << '\n';
}

inline nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

inline nlohmann::json vector_json(const Eigen::VectorXd& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

}  // namespace detail

inline int cmd_lqr_thresholds(const RunConfig& cfg, std::uint64_t hash) {
    const auto pb = detail::require_lqr(load_problem(cfg.problem_path), cfg);
    const double tol = cfg.tol.value_or(5e-5);
    const ThresholdResult results[] = {
        stabilizing_threshold(pb, tol),
        lyapunov_threshold(pb, tol),
        gaitsgory_c_threshold(pb, tol),
        lambda_zero_threshold(pb, tol),
    };
    CsvWriter csv(detail::out_path(cfg, "thresholds.csv").string(), cfg.command, hash, cfg.seed);
    csv.header({"criterion", "gamma_critical", "bracket_lo", "bracket_hi"});
    for (const auto& r : results)
        csv.write_row({r.criterion, format_double(r.gamma_critical), format_double(r.bracket_lo),
                       format_double(r.bracket_hi)});
    for (const auto& r : results)
        std::cout << r.criterion << ": gamma = " << format_double(r.gamma_critical) << "\n";
    return 0;
}

inline int cmd_lqr_certify(const RunConfig& cfg, std::uint64_t hash) {
    const auto pb = detail::require_lqr(load_problem(cfg.problem_path), cfg);
    const SynthesisResult synth = synthesize_certificate(pb, 1e-9, cfg.seed);
    nlohmann::json cert;
    cert["gamma"] = pb.gamma;
    cert["Lambda"] = detail::matrix_json(synth.storage.Lambda);
    detail::write_json(detail::out_path(cfg, "certificate.json"), cert);

    const SdsdReport rep = verify_certificate(pb, synth.storage, cfg.eps);
    nlohmann::json jr;
    jr["gamma"] = pb.gamma;
    jr["feasible"] = synth.feasible;
    jr["best_margin"] = synth.best_margin;
    jr["margin_i"] = rep.margin_i;
    jr["margin_ii"] = rep.margin_ii;
    jr["margin_i_xstrict"] = rep.margin_i_xstrict;
    jr["margin_ii_xstrict"] = rep.margin_ii_xstrict;
    jr["margin_phat"] = rep.margin_phat;
    jr["epsilon"] = rep.epsilon;
    jr["witness_i"] = detail::vector_json(rep.witness_i);
    jr["witness_ii"] = detail::vector_json(rep.witness_ii);
    detail::write_json(detail::out_path(cfg, "certificate_report.json"), jr);

    std::cout << (synth.feasible ? "feasible" : "infeasible")
              << " certificate at gamma=" << format_double(pb.gamma)
              << " (margin " << format_double(synth.best_margin) << ")\n";
    if (cfg.expect_feasible && !synth.feasible) return 1;
    return 0;
}

inline int cmd_dp_solve(const RunConfig& cfg, std::uint64_t hash) {
    const auto pb = detail::require_grid(load_problem(cfg.problem_path), cfg);
    const ValueIterationResult vi = value_iteration(pb, cfg.tol.value_or(-1.0));
    CsvWriter csv(detail::out_path(cfg, "value_policy.csv").string(), cfg.command, hash, cfg.seed);
    csv.header({"x", "V", "u_star"});
    for (int i = 0; i < pb.nx(); ++i)
        csv.row({vi.value.grid.node(i), vi.value.values[static_cast<std::size_t>(i)],
                 vi.policy.inputs[static_cast<std::size_t>(i)]});
    std::cout << "value iteration: " << vi.value.iterations
              << " iterations, residual " << format_double(vi.value.residual) << "\n";
    return 0;
}

inline int cmd_sdsd_verify(const RunConfig& cfg, std::uint64_t hash) {
    const auto pb = detail::require_grid(load_problem(cfg.problem_path), cfg);
    const ValueIterationResult vi = value_iteration(pb, cfg.tol.value_or(-1.0));
    const SteadyState ss = solve_optimal_steady_state(pb, vi.value);
    const StorageFunction storage = make_gradient_storage(vi.value, ss.x_s);
    const CostNormalization norm = make_normalization(pb, vi.value, ss);
    const GridSdsdReport rep = check_sdsd_on_grid(pb, storage, vi.value, norm, cfg.eps);

    nlohmann::json j;
    j["gamma"] = pb.gamma();
    j["epsilon"] = rep.epsilon;
    j["margin_i"] = rep.margin_i;
    j["margin_ii"] = rep.margin_ii;
    j["eps_max_i"] = rep.eps_max_i;
    j["eps_max_ii"] = rep.eps_max_ii;
    j["witness_i"] = {{"x", rep.witness_i.x}, {"u", rep.witness_i.u}};
    j["witness_ii"] = {{"x", rep.witness_ii.x}, {"u", rep.witness_ii.u}};
    j["steady_state"] = {{"x_s", ss.x_s}, {"u_s", ss.u_s}, {"cost_tilde", ss.cost_tilde}};
    j["storage"] = {{"x_s", storage.x_s}, {"slope", storage.slope}, {"curvature", storage.curvature}};
    detail::write_json(detail::out_path(cfg, "sdsd_report.json"), j);
    (void)hash;

    std::cout << "sdsd margins at gamma=" << format_double(pb.gamma()) << ": i="
              << format_double(rep.margin_i) << " ii=" << format_double(rep.margin_ii) << "\n";
    return 0;
}

inline int cmd_ss_sweep(const RunConfig& cfg, std::uint64_t hash) {
    const auto pb = detail::require_grid(load_problem(cfg.problem_path), cfg);
    if (cfg.gammas.empty()) throw std::invalid_argument("ss-sweep: --gammas lo:hi:step is required");
    const std::vector<double> gammas = detail::parse_gamma_list(cfg.gammas);
    const std::vector<SweepRow> rows = sweep_gamma(pb, gammas, cfg.tol.value_or(-1.0));

    CsvWriter csv(detail::out_path(cfg, "ss_sweep.csv").string(), cfg.command, hash, cfg.seed);
    csv.header({"gamma", "x_s", "u_s", "cost_tilde"});
    for (const auto& r : rows) csv.row({r.gamma, r.x_s, r.u_s, r.cost_tilde});

    CsvWriter curve(detail::out_path(cfg, "ss_curve.csv").string(), cfg.command, hash, cfg.seed);
    curve.header({"gamma", "x_s"});
    for (const auto& r : rows) curve.row({r.gamma, r.x_s});

    std::cout << "swept " << rows.size() << " discount factors\n";
    return 0;
}

inline int cmd_simulate(const RunConfig& cfg, std::uint64_t hash) {
    AnyProblem any = load_problem(cfg.problem_path);
    if (std::holds_alternative<LinearQuadraticProblem>(any)) {
        const auto pb = detail::require_lqr(std::move(any), cfg);
        Eigen::VectorXd x0 = Eigen::VectorXd::Ones(pb.n());
        if (!cfg.x0.empty()) {
            const auto vals = detail::parse_double_list(cfg.x0);
            if (vals.size() != static_cast<std::size_t>(pb.n()))
                throw std::invalid_argument("--x0 must list one value per state");
            for (Eigen::Index i = 0; i < pb.n(); ++i) x0(i) = vals[static_cast<std::size_t>(i)];
        }
        const RiccatiSolution sol = solve_dare(pb);
        const LqrTrajectory traj = simulate(pb, sol.K, x0, cfg.steps);
        CsvWriter csv(detail::out_path(cfg, "trajectory.csv").string(), cfg.command, hash, cfg.seed);
        std::vector<std::string> cols = {"k"};
        for (Eigen::Index i = 0; i < pb.n(); ++i) cols.push_back("x" + std::to_string(i + 1));
        for (Eigen::Index i = 0; i < pb.m(); ++i) cols.push_back("u" + std::to_string(i + 1));
        cols.push_back("distance");
        cols.push_back("V");
        csv.header(cols);
        for (std::size_t k = 0; k < traj.states.size(); ++k) {
            std::vector<double> row = {static_cast<double>(k)};
            for (Eigen::Index i = 0; i < pb.n(); ++i) row.push_back(traj.states[k](i));
            for (Eigen::Index i = 0; i < pb.m(); ++i)
                row.push_back(k < traj.inputs.size() ? traj.inputs[k](i) : 0.0);
            row.push_back(traj.distances[k]);
            row.push_back(traj.states[k].dot(sol.P * traj.states[k]));
            csv.row(row);
        }
        const ConvergenceMetrics m = convergence_metrics(traj.distances, 1e-8);
        std::cout << (m.converged ? "converged" : "not converged")
                  << ", final distance " << format_double(m.final_distance) << "\n";
        return 0;
    }

    const auto pb = detail::require_grid(std::move(any), cfg);
    const double x0 = cfg.x0.empty() ? pb.x_interval().lo + 0.5 * pb.x_interval().length()
                                     : std::stod(cfg.x0);
    const ValueIterationResult vi = value_iteration(pb, cfg.tol.value_or(-1.0));
    const SteadyState ss = solve_optimal_steady_state(pb, vi.value);
    const StorageFunction storage = make_gradient_storage(vi.value, ss.x_s);
    const CostNormalization norm = make_normalization(pb, vi.value, ss);
    const GridTrajectory traj = simulate(pb, vi.policy, x0, cfg.steps, ss.x_s);

    CsvWriter csv(detail::out_path(cfg, "trajectory.csv").string(), cfg.command, hash, cfg.seed);
    csv.header({"k", "x", "u", "distance", "V_hat"});
    for (std::size_t k = 0; k < traj.states.size(); ++k)
        csv.row({static_cast<double>(k), traj.states[k],
                 k < traj.inputs.size() ? traj.inputs[k] : 0.0, traj.distances[k],
                 normalized_value(vi.value, norm, traj.states[k]) + storage(traj.states[k])});
    const double cell = state_grid(pb).step();
    const ConvergenceMetrics m = convergence_metrics(traj.distances, 2.0 * cell);
    std::cout << (m.converged ? "converged" : "not converged") << ", final distance "
              << format_double(m.final_distance) << " (" << format_double(m.final_distance / cell)
              << " cells)\n";
    return 0;
}

inline int cmd_equivalence_check(const RunConfig& cfg, std::uint64_t hash) {
    const auto pb = detail::require_grid(load_problem(cfg.problem_path), cfg);
    const DpTables base = make_dp_tables(pb);
    double tight = 0.0;
    for (double c : base.cost) tight = std::max(tight, std::abs(c));
    tight = 1e-12 * std::max(1.0, tight);

    const ValueIterationResult vi = value_iteration_on_tables(base, tight);
    const SteadyState ss = solve_optimal_steady_state(pb, vi.value);
    const StorageFunction storage = make_gradient_storage(vi.value, ss.x_s);
    const CostNormalization norm = make_normalization(pb, vi.value, ss);

    // modified-cost DP: value shifts by the storage, policy is unchanged
    const ValueIterationResult vhat =
        value_iteration_on_tables(modified_cost_tables(pb, storage), tight);
    const double shift_dev = check_value_shift(storage, vi.value, vhat.value);
    int hat_mismatches = 0;
    for (int i = 0; i < pb.nx(); ++i)
        if (vhat.policy.indices[i] != vi.policy.indices[i]) ++hat_mismatches;

    // undiscounted backups on the rotated cost, terminal value V_bar
    DpTables tilde = base;
    std::vector<double> vbar(vi.value.values);
    for (auto& v : vbar) v -= norm.value_offset;
    for (std::size_t idx = 0; idx < tilde.cost.size(); ++idx) {
        const int k = tilde.succ_cell[idx];
        const double w = tilde.succ_weight[idx];
        tilde.cost[idx] += -norm.cost_offset +
                           (pb.gamma() - 1.0) * ((1.0 - w) * vbar[k] + w * vbar[k + 1]);
    }
    tilde.gamma = 1.0;
    std::vector<double> w_cur = vbar, w_next(vbar.size());
    std::vector<int> tilde_argmin(vbar.size(), 0);
    for (int t = 0; t < 25; ++t) {
        bellman_sweep(tilde, w_cur, w_next, &tilde_argmin);
        w_cur.swap(w_next);
    }
    int tilde_mismatches = 0;
    for (int i = 0; i < pb.nx(); ++i)
        if (tilde_argmin[i] != vi.policy.indices[i]) ++tilde_mismatches;

    const double x0 = pb.x_interval().lo + 0.1 * pb.x_interval().length();
    const TelescopicReport tele = telescopic_check(pb, vi.value, norm, vi.policy, x0, cfg.steps);
    const double tele_tol = 1e-3 * (1.0 + std::abs(tele.value_at_x0));
    const double shift_tol = 10.0 * interpolation_slack(state_grid(pb));

    CsvWriter csv(detail::out_path(cfg, "equivalence.csv").string(), cfg.command, hash, cfg.seed);
    csv.header({"check", "value", "threshold", "pass"});
    struct Row {
        const char* name;
        double value;
        double threshold;
    };
    const Row rows[] = {
        {"value_shift_max_dev", shift_dev, shift_tol},
        {"telescopic_residual", tele.residual, tele_tol},
        {"hat_policy_mismatches", static_cast<double>(hat_mismatches), 0.0},
        {"tilde_policy_mismatches", static_cast<double>(tilde_mismatches), 0.0},
    };
    bool all_pass = true;
    for (const auto& r : rows) {
        const bool pass = r.value <= r.threshold;
        all_pass = all_pass && pass;
        csv.write_row({r.name, format_double(r.value), format_double(r.threshold),
                       pass ? "1" : "0"});
        std::cout << r.name << ": " << format_double(r.value) << " (threshold "
                  << format_double(r.threshold) << ") " << (pass ? "ok" : "FAIL") << "\n";
    }
    return all_pass ? 0 : 1;
}

inline int run(const std::vector<std::string>& args) {
    CLI::App app{"analysis toolkit for discounted economic MPC problems"};
    app.require_subcommand(1);

    RunConfig cfg;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("problem", cfg.problem_path, "problem JSON file")->required();
        cmd->add_option("--gamma", cfg.gamma, "discount factor override");
        cmd->add_option("--tol", cfg.tol, "solver tolerance override");
        cmd->add_option("--nx", cfg.nx, "state grid resolution override");
        cmd->add_option("--nu", cfg.nu, "input grid resolution override");
        cmd->add_option("--eps", cfg.eps, "strictness margin epsilon");
        cmd->add_option("--seed", cfg.seed, "random seed for searches");
        cmd->add_option("--out", cfg.out_dir, "output directory");
    };

    CLI::App* thresholds = app.add_subcommand("lqr-thresholds", "critical discount factors");
    add_common(thresholds);
    CLI::App* certify = app.add_subcommand("lqr-certify", "synthesize and verify a certificate");
    add_common(certify);
    certify->add_flag("--expect-feasible", cfg.expect_feasible,
                      "exit with failure when no certificate is found");
    CLI::App* dp = app.add_subcommand("dp-solve", "value iteration on the grid");
    add_common(dp);
    CLI::App* sdsd = app.add_subcommand("sdsd-verify", "grid dissipativity margins");
    add_common(sdsd);
    CLI::App* sweep = app.add_subcommand("ss-sweep", "steady-state sweep over discount factors");
    add_common(sweep);
    sweep->add_option("--gammas", cfg.gammas, "lo:hi:step discount factor list");
    CLI::App* sim = app.add_subcommand("simulate", "closed-loop rollout");
    add_common(sim);
    sim->add_option("--x0", cfg.x0, "initial state (comma-separated for LQR)");
    sim->add_option("--steps", cfg.steps, "rollout length");
    CLI::App* equiv = app.add_subcommand("equivalence-check", "discounted/undiscounted identities");
    add_common(equiv);
    equiv->add_option("--steps", cfg.steps, "telescopic rollout length");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        const std::string bytes = detail::slurp(cfg.problem_path);
        CLI::App* sub = nullptr;
        for (CLI::App* cand : {thresholds, certify, dp, sdsd, sweep, sim, equiv})
            if (app.got_subcommand(cand)) sub = cand;
        if (!sub) {
            std::cerr << "unknown command\n";
            return 2;
        }
        cfg.command = sub->get_name();
        const std::uint64_t hash = cfg.hash(bytes);
        if (sub == thresholds) return cmd_lqr_thresholds(cfg, hash);
        if (sub == certify) return cmd_lqr_certify(cfg, hash);
        if (sub == dp) return cmd_dp_solve(cfg, hash);
        if (sub == sdsd) return cmd_sdsd_verify(cfg, hash);
        if (sub == sweep) return cmd_ss_sweep(cfg, hash);
        if (sub == sim) return cmd_simulate(cfg, hash);
        return cmd_equivalence_check(cfg, hash);
    } catch (const ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::out_of_range& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace dempc::cli
