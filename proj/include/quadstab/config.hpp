#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "quadstab/common.hpp"
#include "quadstab/sim.hpp"

namespace quadstab {

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& path,
                       std::initializer_list<const char*> allowed)
{
    if (!j.is_object()) throw config_error(path + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed)
            if (it.key() == a) ok = true;
        if (!ok) throw config_error(path + ": unknown key '" + it.key() + "'");
    }
}

inline double get_num(const nlohmann::json& j, const std::string& path)
{
    if (!j.is_number()) throw config_error(path + ": expected a number");
    return j.get<double>();
}

inline Complex parse_pole(const nlohmann::json& j, const std::string& path)
{
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
        return {j[0].get<double>(), j[1].get<double>()};
    throw config_error(path + ": pole must be a number or [re, im]");
}

inline std::array<Complex, 2> parse_pole_pair(const nlohmann::json& j, const std::string& path)
{
    if (!j.is_array() || j.size() != 2) throw config_error(path + ": expected two poles");
    return {parse_pole(j[0], path + "[0]"), parse_pole(j[1], path + "[1]")};
}

inline nlohmann::json pole_to_json(const Complex& p)
{
    if (p.imag() == 0.0) return p.real();
    return nlohmann::json::array({p.real(), p.imag()});
}

inline void read_vec3(const nlohmann::json& j, const std::string& path, double& a, double& b,
                      double& c)
{
    if (!j.is_array() || j.size() != 3) throw config_error(path + ": expected 3 numbers");
    a = get_num(j[0], path);
    b = get_num(j[1], path);
    c = get_num(j[2], path);
}

}  // namespace detail

/**
 * Declarative run configuration (JSON, versioned schema, unknown keys are
 * errors). Holds the file-visible fields; make_scenario() resolves gain
 * directives into runtime controller configs.
 */
struct RunConfig {
    int schema = 1;

    bool has_scenario = false;
    QuadParams params;
    QuadState initial;
    Target target;
    double dt = 1e-3;
    double horizon = 20.0;
    bool friction = false;
    bool nonneg_thrust = false;
    std::uint64_t seed = 0;
    bool log_xi = false;
    bool log_zeta = false;

    char controller = 'A';

    // controller A gain directives
    double alpha_sat = 0.5;
    bool pd_given_as_poles = true;
    std::array<Complex, 2> pd_alt_poles{Complex(-2.0, 0.0), Complex(-2.0, 0.0)};
    std::array<Complex, 2> pd_yaw_poles{Complex(-3.0, 0.0), Complex(-3.0, 0.0)};
    PDGains pd_explicit;
    enum class HKind { family, synthesis, explicit_k };
    HKind h_kind = HKind::family;
    GammaSet::Family h_family = GammaSet::Family::newton;
    double h_omega = 1.0;
    double h_alpha1 = 1.0;
    double h_growth = 1.1;
    int h_max_doublings = 60;
    KVector h_k;
    std::optional<std::pair<double, double>> beta_explicit;  ///< for gain reports

    // controller B gain directives
    bool b_gamma_explicit = false;
    GammaSet::Family b_family = GammaSet::Family::newton;
    double b_omega = 1.0;
    std::array<double, 4> b_gamma{};

    std::optional<std::string> trajectory_csv;
    std::optional<std::string> metrics_json;

    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig parse(const std::string& text);
    nlohmann::json to_json() const;

    BetaBound gains_beta() const
    {
        if (beta_explicit) {
            BetaBound b{beta_explicit->first, beta_explicit->second};
            b.validate();
            return b;
        }
        return BetaBound::from_alpha(alpha_sat);
    }

    PDGains make_pd() const
    {
        return pd_given_as_poles ? pd_gains_from_poles(pd_alt_poles, pd_yaw_poles) : pd_explicit;
    }

    KVector make_horizontal_k() const
    {
        switch (h_kind) {
        case HKind::family: {
            const GammaSet gs = gamma_from_family(h_family, h_omega);
            return {-gs.gamma1, -gs.gamma2, -gs.gamma3, -gs.gamma4};
        }
        case HKind::synthesis:
            return k_from_alpha(
                synthesize_alpha_chain(gains_beta(), h_alpha1, h_growth, h_max_doublings));
        case HKind::explicit_k:
            return h_k;
        }
        throw config_error("gains.horizontal: unreachable");
    }

    ControllerAConfig make_controller_a() const
    {
        ControllerAConfig cfg;
        cfg.pd = make_pd();
        cfg.k_x = cfg.k_y = make_horizontal_k();
        cfg.alpha_sat = alpha_sat;
        cfg.validate();
        return cfg;
    }

    GammaSet make_gamma() const
    {
        if (b_gamma_explicit) {
            GammaSet gs;
            gs.family = GammaSet::Family::explicit_values;
            gs.gamma1 = b_gamma[0];
            gs.gamma2 = b_gamma[1];
            gs.gamma3 = b_gamma[2];
            gs.gamma4 = b_gamma[3];
            gs.validate();
            return gs;
        }
        return gamma_from_family(b_family, b_omega);
    }

    ControllerBConfig make_controller_b() const
    {
        ControllerBConfig cfg;
        cfg.gamma = make_gamma();
        cfg.validate();
        return cfg;
    }

    Scenario make_scenario() const
    {
        if (!has_scenario) throw config_error("config: missing 'scenario' section");
        Scenario sc;
        sc.params = params;
        sc.initial = initial;
        sc.target = target;
        sc.dt = dt;
        sc.horizon = horizon;
        sc.friction_enabled = friction;
        sc.nonneg_thrust = nonneg_thrust;
        sc.seed = seed;
        sc.log_xi = log_xi;
        sc.log_zeta = log_zeta;
        if (controller == 'A')
            sc.controller = make_controller_a();
        else
            sc.controller = make_controller_b();
        sc.validate();
        return sc;
    }
};

inline RunConfig RunConfig::from_json(const nlohmann::json& j)
{
    using detail::check_keys;
    using detail::get_num;
    RunConfig c;
    check_keys(j, "config", {"schema", "scenario", "gains", "output"});
    if (!j.contains("schema")) throw config_error("config: missing 'schema'");
    c.schema = j.at("schema").get<int>();
    if (c.schema != 1) throw config_error("config: unsupported schema version");

    if (j.contains("scenario")) {
        c.has_scenario = true;
        const auto& s = j.at("scenario");
        check_keys(s, "scenario",
                   {"params", "initial", "target", "dt", "horizon", "friction", "nonneg_thrust",
                    "seed", "log_xi", "log_zeta"});
        if (s.contains("params")) {
            const auto& p = s.at("params");
            check_keys(p, "scenario.params",
                       {"m", "g", "ell", "J_psi", "J_theta", "J_phi", "C", "a_x", "a_y", "a_z",
                        "a_psi", "a_theta", "a_phi"});
            auto rd = [&](const char* k, double& dst) {
                if (p.contains(k)) dst = get_num(p.at(k), std::string("scenario.params.") + k);
            };
            rd("m", c.params.m);
            rd("g", c.params.g);
            rd("ell", c.params.ell);
            rd("J_psi", c.params.J_psi);
            rd("J_theta", c.params.J_theta);
            rd("J_phi", c.params.J_phi);
            rd("C", c.params.C);
            rd("a_x", c.params.a_x);
            rd("a_y", c.params.a_y);
            rd("a_z", c.params.a_z);
            rd("a_psi", c.params.a_psi);
            rd("a_theta", c.params.a_theta);
            rd("a_phi", c.params.a_phi);
            try {
                c.params.validate();
            } catch (const invalid_input& e) {
                throw config_error(std::string("scenario.params: ") + e.what());
            }
        }
        if (s.contains("initial")) {
            const auto& i = s.at("initial");
            check_keys(i, "scenario.initial", {"pos", "vel", "angles", "rates"});
            if (i.contains("pos"))
                detail::read_vec3(i.at("pos"), "scenario.initial.pos", c.initial.x, c.initial.y,
                                  c.initial.z);
            if (i.contains("vel"))
                detail::read_vec3(i.at("vel"), "scenario.initial.vel", c.initial.vx, c.initial.vy,
                                  c.initial.vz);
            if (i.contains("angles"))
                detail::read_vec3(i.at("angles"), "scenario.initial.angles", c.initial.phi,
                                  c.initial.psi, c.initial.theta);
            if (i.contains("rates"))
                detail::read_vec3(i.at("rates"), "scenario.initial.rates", c.initial.phi_dot,
                                  c.initial.psi_dot, c.initial.theta_dot);
        }
        if (s.contains("target")) {
            const auto& t = s.at("target");
            check_keys(t, "scenario.target", {"z", "phi", "x", "y"});
            if (t.contains("z")) c.target.z_star = get_num(t.at("z"), "scenario.target.z");
            if (t.contains("phi")) c.target.phi_star = get_num(t.at("phi"), "scenario.target.phi");
            if (t.contains("x")) c.target.x_star = get_num(t.at("x"), "scenario.target.x");
            if (t.contains("y")) c.target.y_star = get_num(t.at("y"), "scenario.target.y");
        }
        if (s.contains("dt")) c.dt = get_num(s.at("dt"), "scenario.dt");
        if (!(c.dt > 0.0)) throw config_error("scenario.dt: must be > 0");
        if (s.contains("horizon")) c.horizon = get_num(s.at("horizon"), "scenario.horizon");
        if (!(c.horizon >= c.dt)) throw config_error("scenario.horizon: must be >= dt");
        if (s.contains("friction")) c.friction = s.at("friction").get<bool>();
        if (s.contains("nonneg_thrust")) c.nonneg_thrust = s.at("nonneg_thrust").get<bool>();
        if (s.contains("seed")) c.seed = s.at("seed").get<std::uint64_t>();
        if (s.contains("log_xi")) c.log_xi = s.at("log_xi").get<bool>();
        if (s.contains("log_zeta")) c.log_zeta = s.at("log_zeta").get<bool>();
    }

    if (!j.contains("gains")) throw config_error("config: missing 'gains' section");
    const auto& gj = j.at("gains");
    if (!gj.contains("controller")) throw config_error("gains: missing 'controller' (\"A\" or \"B\")");
    const std::string which = gj.at("controller").get<std::string>();
    if (which == "A") {
        c.controller = 'A';
        check_keys(gj, "gains", {"controller", "alpha_sat", "pd_poles", "pd_gains", "horizontal", "beta"});
        if (gj.contains("alpha_sat"))
            c.alpha_sat = get_num(gj.at("alpha_sat"), "gains.alpha_sat");
        if (!(c.alpha_sat > 0.0 && c.alpha_sat < 1.0))
            throw config_error("gains.alpha_sat: must lie in (0,1)");
        if (gj.contains("pd_poles") && gj.contains("pd_gains"))
            throw config_error("gains: give either pd_poles or pd_gains, not both");
        if (gj.contains("pd_poles")) {
            const auto& pp = gj.at("pd_poles");
            check_keys(pp, "gains.pd_poles", {"altitude", "yaw"});
            if (!pp.contains("altitude") || !pp.contains("yaw"))
                throw config_error("gains.pd_poles: needs 'altitude' and 'yaw'");
            c.pd_given_as_poles = true;
            c.pd_alt_poles = detail::parse_pole_pair(pp.at("altitude"), "gains.pd_poles.altitude");
            c.pd_yaw_poles = detail::parse_pole_pair(pp.at("yaw"), "gains.pd_poles.yaw");
        } else if (gj.contains("pd_gains")) {
            const auto& pg = gj.at("pd_gains");
            check_keys(pg, "gains.pd_gains", {"k11", "k21", "k12", "k22"});
            c.pd_given_as_poles = false;
            c.pd_explicit.k1 = {get_num(pg.at("k11"), "gains.pd_gains.k11"),
                                get_num(pg.at("k12"), "gains.pd_gains.k12")};
            c.pd_explicit.k2 = {get_num(pg.at("k21"), "gains.pd_gains.k21"),
                                get_num(pg.at("k22"), "gains.pd_gains.k22")};
        }
        if (gj.contains("beta")) {
            const auto& b = gj.at("beta");
            check_keys(b, "gains.beta", {"min", "max"});
            c.beta_explicit = {get_num(b.at("min"), "gains.beta.min"),
                               get_num(b.at("max"), "gains.beta.max")};
            if (!(c.beta_explicit->first > 0.0))
                throw config_error("gains.beta.min: must be > 0");
        }
        if (gj.contains("horizontal")) {
            const auto& h = gj.at("horizontal");
            if (h.contains("family")) {
                check_keys(h, "gains.horizontal", {"family", "omega"});
                c.h_kind = HKind::family;
                const std::string fam = h.at("family").get<std::string>();
                if (fam == "newton")
                    c.h_family = GammaSet::Family::newton;
                else if (fam == "butterworth")
                    c.h_family = GammaSet::Family::butterworth;
                else
                    throw config_error("gains.horizontal.family: must be newton or butterworth");
                if (h.contains("omega")) c.h_omega = get_num(h.at("omega"), "gains.horizontal.omega");
                if (!(c.h_omega > 0.0)) throw config_error("gains.horizontal.omega: must be > 0");
            } else if (h.contains("alpha1")) {
                check_keys(h, "gains.horizontal", {"alpha1", "growth", "max_doublings"});
                c.h_kind = HKind::synthesis;
                c.h_alpha1 = get_num(h.at("alpha1"), "gains.horizontal.alpha1");
                if (!(c.h_alpha1 > 0.0)) throw config_error("gains.horizontal.alpha1: must be > 0");
                if (h.contains("growth"))
                    c.h_growth = get_num(h.at("growth"), "gains.horizontal.growth");
                if (!(c.h_growth > 1.0)) throw config_error("gains.horizontal.growth: must be > 1");
                if (h.contains("max_doublings"))
                    c.h_max_doublings = h.at("max_doublings").get<int>();
            } else if (h.contains("k")) {
                check_keys(h, "gains.horizontal", {"k"});
                const auto& ks = h.at("k");
                if (!ks.is_array() || ks.size() != 4)
                    throw config_error("gains.horizontal.k: expected 4 numbers");
                c.h_kind = HKind::explicit_k;
                c.h_k = {get_num(ks[0], "gains.horizontal.k"), get_num(ks[1], "gains.horizontal.k"),
                         get_num(ks[2], "gains.horizontal.k"), get_num(ks[3], "gains.horizontal.k")};
            } else {
                throw config_error("gains.horizontal: needs family, alpha1 or k");
            }
        }
    } else if (which == "B") {
        c.controller = 'B';
        check_keys(gj, "gains", {"controller", "family", "omega", "gamma"});
        if (gj.contains("gamma")) {
            const auto& ga = gj.at("gamma");
            if (!ga.is_array() || ga.size() != 4)
                throw config_error("gains.gamma: expected 4 numbers");
            c.b_gamma_explicit = true;
            for (std::size_t i = 0; i < 4; ++i) c.b_gamma[i] = get_num(ga[i], "gains.gamma");
        } else {
            if (!gj.contains("family"))
                throw config_error("gains: controller B needs 'family' or explicit 'gamma'");
            const std::string fam = gj.at("family").get<std::string>();
            if (fam == "newton")
                c.b_family = GammaSet::Family::newton;
            else if (fam == "butterworth")
                c.b_family = GammaSet::Family::butterworth;
            else
                throw config_error("gains.family: must be newton or butterworth");
            if (gj.contains("omega")) c.b_omega = get_num(gj.at("omega"), "gains.omega");
            if (!(c.b_omega > 0.0)) throw config_error("gains.omega: must be > 0");
        }
    } else {
        throw config_error("gains.controller: must be \"A\" or \"B\"");
    }

    if (j.contains("output")) {
        const auto& o = j.at("output");
        check_keys(o, "output", {"trajectory_csv", "metrics_json"});
        if (o.contains("trajectory_csv"))
            c.trajectory_csv = o.at("trajectory_csv").get<std::string>();
        if (o.contains("metrics_json")) c.metrics_json = o.at("metrics_json").get<std::string>();
    }
    return c;
}

inline RunConfig RunConfig::parse(const std::string& text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        // convert the byte offset into a line number for the diagnostic
        std::size_t line = 1;
        for (std::size_t i = 0; i < std::min(e.byte, text.size()); ++i)
            if (text[i] == '\n') ++line;
        throw config_error("config: JSON parse error at line " + std::to_string(line) + ": " +
                           e.what());
    }
    try {
        return from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("config: ") + e.what());
    }
}

inline nlohmann::json RunConfig::to_json() const
{
    nlohmann::json j;
    j["schema"] = schema;
    if (has_scenario) {
        nlohmann::json s;
        s["params"] = {{"m", params.m},           {"g", params.g},
                       {"ell", params.ell},       {"J_psi", params.J_psi},
                       {"J_theta", params.J_theta}, {"J_phi", params.J_phi},
                       {"C", params.C},           {"a_x", params.a_x},
                       {"a_y", params.a_y},       {"a_z", params.a_z},
                       {"a_psi", params.a_psi},   {"a_theta", params.a_theta},
                       {"a_phi", params.a_phi}};
        s["initial"] = {{"pos", {initial.x, initial.y, initial.z}},
                        {"vel", {initial.vx, initial.vy, initial.vz}},
                        {"angles", {initial.phi, initial.psi, initial.theta}},
                        {"rates", {initial.phi_dot, initial.psi_dot, initial.theta_dot}}};
        s["target"] = {{"z", target.z_star}, {"phi", target.phi_star}, {"x", target.x_star},
                       {"y", target.y_star}};
        s["dt"] = dt;
        s["horizon"] = horizon;
        s["friction"] = friction;
        s["nonneg_thrust"] = nonneg_thrust;
        s["seed"] = seed;
        s["log_xi"] = log_xi;
        s["log_zeta"] = log_zeta;
        j["scenario"] = s;
    }
    nlohmann::json g;
    if (controller == 'A') {
        g["controller"] = "A";
        g["alpha_sat"] = alpha_sat;
        if (pd_given_as_poles) {
            g["pd_poles"]["altitude"] = {detail::pole_to_json(pd_alt_poles[0]),
                                         detail::pole_to_json(pd_alt_poles[1])};
            g["pd_poles"]["yaw"] = {detail::pole_to_json(pd_yaw_poles[0]),
                                    detail::pole_to_json(pd_yaw_poles[1])};
        } else {
            g["pd_gains"] = {{"k11", pd_explicit.k1(0)},
                             {"k12", pd_explicit.k1(1)},
                             {"k21", pd_explicit.k2(0)},
                             {"k22", pd_explicit.k2(1)}};
        }
        if (beta_explicit)
            g["beta"] = {{"min", beta_explicit->first}, {"max", beta_explicit->second}};
        switch (h_kind) {
        case HKind::family:
            g["horizontal"] = {{"family", h_family == GammaSet::Family::newton ? "newton"
                                                                               : "butterworth"},
                               {"omega", h_omega}};
            break;
        case HKind::synthesis:
            g["horizontal"] = {{"alpha1", h_alpha1},
                               {"growth", h_growth},
                               {"max_doublings", h_max_doublings}};
            break;
        case HKind::explicit_k:
            g["horizontal"] = {{"k", {h_k.k1, h_k.k2, h_k.k3, h_k.k4}}};
            break;
        }
    } else {
        g["controller"] = "B";
        if (b_gamma_explicit) {
            g["gamma"] = b_gamma;
        } else {
            g["family"] = b_family == GammaSet::Family::newton ? "newton" : "butterworth";
            g["omega"] = b_omega;
        }
    }
    j["gains"] = g;
    if (trajectory_csv || metrics_json) {
        nlohmann::json o;
        if (trajectory_csv) o["trajectory_csv"] = *trajectory_csv;
        if (metrics_json) o["metrics_json"] = *metrics_json;
        j["output"] = o;
    }
    return j;
}

/// Apply repeatable "dotted.path=value" overrides to a raw JSON document.
inline void apply_overrides(nlohmann::json& j, const std::vector<std::string>& sets)
{
    for (const std::string& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw config_error("--set expects path=value, got '" + s + "'");
        std::string path = s.substr(0, eq);
        const std::string value = s.substr(eq + 1);
        std::string pointer = "/";
        for (char ch : path) pointer += (ch == '.') ? '/' : ch;
        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(value);
        } catch (const nlohmann::json::parse_error&) {
            parsed = value;  // bare strings are passed through
        }
        try {
            j[nlohmann::json::json_pointer(pointer)] = parsed;
        } catch (const nlohmann::json::exception& e) {
            throw config_error("--set " + s + ": " + e.what());
        }
    }
}

}  // namespace quadstab
