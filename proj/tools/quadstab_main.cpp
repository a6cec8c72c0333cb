// quadstab command line: closed-loop simulation, gain synthesis/certification
// and built-in invariant checks, driven by a JSON config.
//
// Exit codes: 0 ok, 1 config error, 2 runtime fault, 3 synthesis failure,
// 4 verification failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "quadstab/quadstab.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitFault = 2;
constexpr int kExitSynthesis = 3;
constexpr int kExitVerify = 4;

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw quadstab::config_error("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

quadstab::RunConfig load_config(const std::string& path, const std::vector<std::string>& sets)
{
    const std::string text = read_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        std::size_t line = 1;
        for (std::size_t i = 0; i < std::min(e.byte, text.size()); ++i)
            if (text[i] == '\n') ++line;
        throw quadstab::config_error(path + ":" + std::to_string(line) + ": " + e.what());
    }
    try {
        quadstab::apply_overrides(j, sets);
        return quadstab::RunConfig::from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw quadstab::config_error(path + ": " + e.what());
    }
}

void print_poles(const std::vector<quadstab::Complex>& poles)
{
    for (const auto& ev : poles) {
        std::printf("    % .9f %+.9fi  (|.| = %.9f)\n", ev.real(), ev.imag(), std::abs(ev));
    }
}

int cmd_simulate(const std::string& config_path, const std::vector<std::string>& sets,
                 const std::string& out_dir)
{
    quadstab::RunConfig cfg;
    quadstab::Scenario sc;
    try {
        cfg = load_config(config_path, sets);
        sc = cfg.make_scenario();
    } catch (const quadstab::error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }

    const auto [traj, metrics] = quadstab::run_scenario(sc);

    namespace fs = std::filesystem;
    std::string csv_path = cfg.trajectory_csv.value_or("trajectory.csv");
    std::string json_path = cfg.metrics_json.value_or("metrics.json");
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        csv_path = (fs::path(out_dir) / fs::path(csv_path).filename()).string();
        json_path = (fs::path(out_dir) / fs::path(json_path).filename()).string();
    }
    {
        std::ofstream csv(csv_path);
        if (!csv) {
            std::cerr << "config error: cannot write '" << csv_path << "'\n";
            return kExitConfig;
        }
        quadstab::write_csv(traj, csv);
    }
    {
        std::ofstream mj(json_path);
        if (!mj) {
            std::cerr << "config error: cannot write '" << json_path << "'\n";
            return kExitConfig;
        }
        mj << quadstab::metrics_to_json(metrics).dump(2) << "\n";
    }

    std::printf("rows: %zu  (dt = %g, horizon = %g)\n", traj.rows.size(), sc.dt, sc.horizon);
    std::printf("final errors: z %.3e  yaw %.3e  x %.3e  y %.3e\n", metrics.z.final_error,
                metrics.yaw.final_error, metrics.x.final_error, metrics.y.final_error);
    std::printf("beta range: [%.6f, %.6f]   max tilt: %.4f rad\n", metrics.beta_min_obs,
                metrics.beta_max_obs, metrics.max_tilt);
    std::printf("wrote %s and %s\n", csv_path.c_str(), json_path.c_str());
    if (traj.faulted) {
        std::printf("FAULT: %s\n", traj.fault_reason.c_str());
        return kExitFault;
    }
    return kExitOk;
}

int cmd_gains(const std::string& config_path, const std::vector<std::string>& sets, int trials,
              std::uint64_t seed)
{
    quadstab::RunConfig cfg;
    try {
        cfg = load_config(config_path, sets);
    } catch (const quadstab::error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }

    using namespace quadstab;
    bool all_pass = true;
    try {
        if (cfg.controller == 'A') {
            const BetaBound beta = cfg.gains_beta();
            std::printf("beta interval: [%g, %g]\n", beta.beta_min, beta.beta_max);
            const PDGains pd = cfg.make_pd();
            std::printf("PD gains: altitude (k11, k21) = (%.6g, %.6g)  yaw (k12, k22) = (%.6g, %.6g)\n",
                        pd.k1(0), pd.k2(0), pd.k1(1), pd.k2(1));
            KVector k;
            if (cfg.h_kind == RunConfig::HKind::synthesis) {
                const AlphaChain chain =
                    synthesize_alpha_chain(beta, cfg.h_alpha1, cfg.h_growth, cfg.h_max_doublings);
                std::printf("alpha chain: %.6g %.6g %.6g %.6g  (alpha2* = %.6g)\n", chain.alpha1,
                            chain.alpha2, chain.alpha3, chain.alpha4,
                            alpha2_star(chain.alpha1, beta.beta_min));
                std::printf("step margins: %.6g %.6g %.6g\n", chain.margin2, chain.margin3,
                            chain.margin4);
                k = k_from_alpha(chain);
            } else {
                k = cfg.make_horizontal_k();
            }
            std::printf("k vector: %.6g %.6g %.6g %.6g\n", k.k1, k.k2, k.k3, k.k4);
            const ChiCertificate cert = certify_chi_closed_loop(k, beta, trials, seed);
            for (int v = 0; v < 2; ++v) {
                std::printf("  vertex beta = %g eigenvalues:\n",
                            v == 0 ? beta.beta_min : beta.beta_max);
                print_poles(cert.vertex_eigs[v]);
            }
            if (cert.margins_valid)
                std::printf("chain margins from k: %.6g %.6g %.6g\n", cert.margin2, cert.margin3,
                            cert.margin4);
            std::printf("trials: %d/%d decayed within %.1f s horizon\n", cert.trials_decayed,
                        cert.trials_requested, cert.horizon);
            if (cert.descent_checked)
                std::printf("worst per-step Lyapunov ascent: %.3e (slack 1e-8)\n",
                            cert.worst_descent_violation);
            if (!cert.passed()) {
                std::printf("CERTIFICATION FAILED: %s\n", cert.first_failure.c_str());
                all_pass = false;
            }
        } else {
            const GammaSet gs = cfg.make_gamma();
            std::printf("gamma: %.9g %.9g %.9g %.9g\n", gs.gamma1, gs.gamma2, gs.gamma3, gs.gamma4);
            const auto poles = poly_roots(gs.monic_low_coeffs());
            std::printf("closed-loop poles (each with multiplicity 4 in the 16-dim loop):\n");
            print_poles(poles);
            const bool hurwitz = polynomial_is_hurwitz(gs.monic_low_coeffs());
            std::printf("Hurwitz: %s\n", hurwitz ? "yes" : "NO");
            if (!hurwitz) all_pass = false;
        }
    } catch (const synthesis_error& e) {
        std::cerr << "synthesis failure: " << e.what() << "\n";
        return kExitSynthesis;
    } catch (const quadstab::error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    std::printf("certificates: %s\n", all_pass ? "PASS" : "FAIL");
    return all_pass ? kExitOk : kExitSynthesis;
}

int cmd_verify(std::uint64_t seed, int trials, const std::string& mutate)
{
    quadstab::VerifyOptions opt;
    opt.seed = seed;
    opt.trials = trials;
    if (mutate == "b4") {
        opt.mutation = quadstab::VerifyOptions::Mutation::perturb_b4;
    } else if (!mutate.empty()) {
        std::cerr << "unknown --mutate target '" << mutate << "'\n";
        return kExitConfig;
    }
    const auto results = quadstab::run_verify_suite(opt);
    bool all_pass = true;
    std::printf("%-28s %-6s %-12s %s\n", "check", "result", "worst", "tolerance");
    for (const auto& r : results) {
        std::printf("%-28s %-6s %-12.3e %.0e\n", r.name.c_str(), r.pass ? "PASS" : "FAIL", r.worst,
                    r.tolerance);
        if (!r.pass) all_pass = false;
    }
    return all_pass ? kExitOk : kExitVerify;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"quadstab: quadcopter point-stabilization control and simulation"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;
    std::string out_dir;
    std::uint64_t seed = 1;
    int trials = 100;
    std::string mutate;

    auto* sim = app.add_subcommand("simulate", "run a closed-loop scenario");
    sim->add_option("config", config_path, "JSON config file")->required();
    sim->add_option("--set", sets, "override a config value, path=value (repeatable)");
    sim->add_option("--out", out_dir, "directory for trajectory/metrics outputs");

    auto* gains = app.add_subcommand("gains", "synthesize and certify gains");
    gains->add_option("config", config_path, "JSON config file")->required();
    gains->add_option("--set", sets, "override a config value, path=value (repeatable)");
    gains->add_option("--trials", trials, "randomized certification trials");
    gains->add_option("--seed", seed, "trial RNG seed");

    auto* verify = app.add_subcommand("verify", "run the built-in invariant suite");
    verify->add_option("--seed", seed, "RNG seed");
    verify->add_option("--trials", trials, "points per check");
    verify->add_option("--mutate", mutate, "test hook: corrupt a closed form (b4)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (sim->parsed()) return cmd_simulate(config_path, sets, out_dir);
        if (gains->parsed()) return cmd_gains(config_path, sets, trials, seed);
        if (verify->parsed()) return cmd_verify(seed, trials, mutate);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFault;
    }
    return kExitConfig;
}
