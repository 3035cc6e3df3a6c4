#include <fstream>

#include "hmbandit/harness.hpp"
#include "json.hpp"

namespace hmbandit {

namespace {

using nlohmann::json;

const json& field(const json& j, const char* name) {
    auto it = j.find(name);
    if (it == j.end())
        throw ConfigError(std::string("missing field \"") + name + "\"");
    return *it;
}

Vec to_vec(const json& j) {
    if (!j.is_array()) throw ConfigError("expected an array of numbers");
    Vec out;
    out.reserve(j.size());
    for (const auto& x : j) {
        if (!x.is_number()) throw ConfigError("expected an array of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

Mat to_mat(const json& j) {
    if (!j.is_array()) throw ConfigError("expected an array of rows");
    Mat out;
    out.reserve(j.size());
    for (const auto& row : j) out.push_back(to_vec(row));
    return out;
}

std::vector<std::vector<Vec>> to_prob_table(const json& j) {
    if (!j.is_array()) throw ConfigError("theta_probs must be [arm][state][index]");
    std::vector<std::vector<Vec>> out;
    out.reserve(j.size());
    for (const auto& arm : j) out.push_back(to_mat(arm));
    return out;
}

Polytope parse_actions(const json& j) {
    if (j.contains("hypercube")) {
        const json& h = j["hypercube"];
        return Polytope::hypercube(to_vec(field(h, "lower")), to_vec(field(h, "upper")));
    }
    if (j.contains("vertices")) return Polytope::explicit_vertices(to_mat(j["vertices"]));
    throw ConfigError("actions must specify a hypercube or a vertex list");
}

Polytope unit_cube(int dimension) {
    return Polytope::hypercube(Vec(dimension, 0.0), Vec(dimension, 1.0));
}

void parse_setup(const json& j, ExperimentConfig& cfg) {
    if (j.is_string()) {
        cfg.setup_label = j.get<std::string>();
        cfg.recipe = load_preset(cfg.setup_label);
        return;
    }
    if (!j.is_object()) throw ConfigError("setup must be a preset name or an object");
    if (j.contains("preset")) {
        cfg.setup_label = j["preset"].get<std::string>();
        cfg.recipe = load_preset(cfg.setup_label);
        return;
    }
    if (j.contains("random")) {
        const json& r = j["random"];
        Mat transition = to_mat(field(r, "transition"));
        auto probs = to_prob_table(field(r, "theta_probs"));
        const json& jlo = field(r, "grid_lo");
        const json& jhi = field(r, "grid_hi");
        Vec lo, hi;
        if (jlo.is_number() || jhi.is_number()) {
            const int dim = field(r, "dimension").get<int>();
            if (dim < 1) throw ConfigError("dimension must be at least 1");
            lo = jlo.is_number() ? Vec(dim, jlo.get<double>()) : to_vec(jlo);
            hi = jhi.is_number() ? Vec(dim, jhi.get<double>()) : to_vec(jhi);
        } else {
            lo = to_vec(jlo);
            hi = to_vec(jhi);
        }
        Polytope actions = r.contains("actions")
                               ? parse_actions(r["actions"])
                               : unit_cube(static_cast<int>(lo.size()));
        cfg.setup_label = "random";
        cfg.recipe = SetupRecipe{std::move(transition), std::move(probs),
                                 std::move(lo), std::move(hi), std::move(actions)};
        return;
    }
    if (j.contains("explicit")) {
        const json& e = j["explicit"];
        Mat transition = to_mat(field(e, "transition"));
        const json& jt = field(e, "thetas");
        if (!jt.is_array()) throw ConfigError("thetas must be [arm][state][index][coord]");
        std::vector<std::vector<std::vector<Vec>>> thetas;
        for (const auto& arm : jt) {
            std::vector<std::vector<Vec>> per_state;
            for (const auto& state : arm) per_state.push_back(to_mat(state));
            thetas.push_back(std::move(per_state));
        }
        auto probs = to_prob_table(field(e, "theta_probs"));
        if (thetas.empty() || thetas[0].empty() || thetas[0][0].empty() ||
            thetas[0][0][0].empty())
            throw ConfigError("thetas must contain at least one vector");
        Polytope actions =
            e.contains("actions")
                ? parse_actions(e["actions"])
                : unit_cube(static_cast<int>(thetas[0][0][0].size()));
        cfg.setup_label = "explicit";
        cfg.explicit_spec = std::make_shared<const EnvironmentSpec>(
            TransitionMatrix(std::move(transition)),
            ThetaFamily(std::move(thetas), std::move(probs)), std::move(actions));
        return;
    }
    throw ConfigError("setup must contain \"preset\", \"random\" or \"explicit\"");
}

json actions_object(const Polytope& p) {
    json out;
    if (p.is_hypercube()) {
        out["hypercube"] = {{"lower", p.lower()}, {"upper", p.upper()}};
    } else {
        out["vertices"] = p.vertices();
    }
    return out;
}

json config_object(const ExperimentConfig& cfg) {
    json setup;
    if (cfg.setup_label == "1a" || cfg.setup_label == "1b" ||
        cfg.setup_label == "2a" || cfg.setup_label == "2b") {
        setup = {{"preset", cfg.setup_label}};
    } else if (cfg.recipe) {
        setup = {{"random",
                  {{"transition", cfg.recipe->transition},
                   {"theta_probs", cfg.recipe->theta_probs},
                   {"grid_lo", cfg.recipe->grid_lo},
                   {"grid_hi", cfg.recipe->grid_hi},
                   {"actions", actions_object(cfg.recipe->actions)}}}};
    } else if (cfg.explicit_spec) {
        const EnvironmentSpec& spec = *cfg.explicit_spec;
        std::vector<std::vector<std::vector<Vec>>> thetas;
        std::vector<std::vector<Vec>> probs;
        for (ArmId b = 0; b < spec.num_arms(); ++b) {
            std::vector<std::vector<Vec>> per_state;
            std::vector<Vec> per_state_probs;
            for (StateId s = 0; s < spec.num_states(); ++s) {
                per_state.push_back(spec.thetas().vectors(b, s));
                per_state_probs.push_back(spec.thetas().probs(b, s));
            }
            thetas.push_back(std::move(per_state));
            probs.push_back(std::move(per_state_probs));
        }
        setup = {{"explicit",
                  {{"transition", spec.transition().rows()},
                   {"thetas", thetas},
                   {"theta_probs", probs},
                   {"actions", actions_object(spec.actions())}}}};
    }
    std::vector<std::string> agents;
    for (AgentKind kind : cfg.agents) agents.push_back(agent_name(kind));
    return json{{"setup", setup},
                {"horizon", cfg.horizon},
                {"theta_realizations", cfg.theta_realizations},
                {"trajectories", cfg.trajectories},
                {"agents", agents},
                {"seed", cfg.seed},
                {"alpha", cfg.alpha},
                {"perturbation",
                 {{"epsilon", cfg.epsilon},
                  {"alpha_eps", cfg.alpha_eps},
                  {"gamma", cfg.gamma}}},
                {"out_dir", cfg.out_dir},
                {"jobs", cfg.jobs}};
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    try {
        const json j = json::parse(in,
                                   /*cb=*/nullptr, /*allow_exceptions=*/true,
                                   /*ignore_comments=*/true);
        if (!j.is_object()) throw ConfigError("top level must be an object");
        ExperimentConfig cfg;
        cfg.recipe.reset();
        if (j.contains("setup")) {
            parse_setup(j["setup"], cfg);
        } else {
            cfg.setup_label = "1a";
            cfg.recipe = load_preset("1a");
        }
        if (j.contains("horizon")) cfg.horizon = j["horizon"].get<std::int64_t>();
        if (j.contains("theta_realizations"))
            cfg.theta_realizations = j["theta_realizations"].get<int>();
        if (j.contains("trajectories")) cfg.trajectories = j["trajectories"].get<int>();
        if (j.contains("agents")) {
            cfg.agents.clear();
            for (const auto& a : j["agents"]) {
                const auto kind = parse_agent(a.get<std::string>());
                if (!kind)
                    throw ConfigError("unknown agent \"" + a.get<std::string>() + "\"");
                cfg.agents.push_back(*kind);
            }
        }
        if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("alpha")) cfg.alpha = j["alpha"].get<double>();
        if (j.contains("perturbation")) {
            const json& p = j["perturbation"];
            if (p.contains("epsilon")) cfg.epsilon = p["epsilon"].get<double>();
            if (p.contains("alpha_eps")) cfg.alpha_eps = p["alpha_eps"].get<double>();
            if (p.contains("gamma")) cfg.gamma = p["gamma"].get<double>();
        }
        if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
        if (j.contains("jobs")) cfg.jobs = j["jobs"].get<int>();
        return cfg;
    } catch (const json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
}

std::string config_to_json(const ExperimentConfig& cfg) {
    return config_object(cfg).dump(2) + "\n";
}

void write_metadata_file(const std::string& path, const ExperimentConfig& cfg,
                         const std::vector<double>& rho_star,
                         const ModelConstants& constants) {
    json meta{{"version", kVersion},
              {"master_seed", cfg.seed},
              {"config", config_object(cfg)},
              {"rho_star", rho_star},
              {"constants",
               {{"t_m", constants.t_m},
                {"t_s", constants.t_s},
                {"r_max", constants.r_max},
                {"c_theta_max", constants.c_theta_max},
                {"delta", constants.delta ? json(*constants.delta) : json(nullptr)}}}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open " + path + " for writing");
    out << meta.dump(2) << "\n";
    if (!out) throw ConfigError("failed while writing " + path);
}

}  // namespace hmbandit
