#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hmbandit/harness.hpp"
#include "hmbandit/testing/oracles.hpp"

namespace {

using namespace hmbandit;

std::string format_vec(const Vec& v, const char* fmt = "%g") {
    std::string out = "(";
    char buf[40];
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::snprintf(buf, sizeof buf, fmt, v[i]);
        if (i) out += ", ";
        out += buf;
    }
    return out + ")";
}

struct Flags {
    std::string config_path;
    std::string preset;
    std::int64_t horizon = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> agents;
    std::string out_dir;
    int jobs = 0;
    int realizations = 0;
    int trajectories = 0;
    double alpha = 0.0;
    double epsilon = 0.0;
    double alpha_eps = 0.0;
    double gamma = 0.0;
    bool paper_scale = false;
};

// Attach the shared model/run flags to a subcommand. Returns the option
// pointers needed to tell "flag given" from "default".
void add_common_options(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config_path, "JSON config file");
    cmd->add_option("--preset", f.preset, "named setup: 1a, 1b, 2a or 2b");
    cmd->add_option("--horizon", f.horizon, "steps per run");
    cmd->add_option("--seed", f.seed, "master seed");
    cmd->add_option("--agents", f.agents,
                    "agents to run (hucrl, joint, flat_ucrl, oracle_known_state)")
        ->delimiter(',');
    cmd->add_option("--out", f.out_dir, "output directory");
    cmd->add_option("--jobs", f.jobs, "worker threads");
    cmd->add_option("--realizations", f.realizations, "theta realizations");
    cmd->add_option("--trajectories", f.trajectories, "trajectories per realization");
    cmd->add_option("--alpha", f.alpha, "confidence parameter (> 3)");
    cmd->add_option("--epsilon", f.epsilon, "perturbation scale");
    cmd->add_option("--alpha-eps", f.alpha_eps, "perturbation decay exponent");
    cmd->add_option("--gamma", f.gamma, "perturbation scale divisor");
    cmd->add_flag("--paper-scale", f.paper_scale,
                  "full-size profile: horizon 10^6, 100 realizations x 20 trajectories");
}

ExperimentConfig build_config(const CLI::App* cmd, const Flags& f) {
    ExperimentConfig cfg;
    if (!f.config_path.empty()) {
        cfg = load_config(f.config_path);
    } else {
        const std::string name = f.preset.empty() ? "1a" : f.preset;
        cfg.setup_label = name;
        cfg.recipe = load_preset(name);
    }
    if (!f.config_path.empty() && cmd->count("--preset") > 0) {
        cfg.setup_label = f.preset;
        cfg.recipe = load_preset(f.preset);
        cfg.explicit_spec.reset();
    }
    if (f.paper_scale) {
        cfg.horizon = 1000000;
        cfg.theta_realizations = 100;
        cfg.trajectories = 20;
    }
    if (cmd->count("--horizon")) cfg.horizon = f.horizon;
    if (cmd->count("--seed")) cfg.seed = f.seed;
    if (cmd->count("--realizations")) cfg.theta_realizations = f.realizations;
    if (cmd->count("--trajectories")) cfg.trajectories = f.trajectories;
    if (cmd->count("--alpha")) cfg.alpha = f.alpha;
    if (cmd->count("--epsilon")) cfg.epsilon = f.epsilon;
    if (cmd->count("--alpha-eps")) cfg.alpha_eps = f.alpha_eps;
    if (cmd->count("--gamma")) cfg.gamma = f.gamma;
    if (cmd->count("--out")) cfg.out_dir = f.out_dir;
    if (cmd->count("--jobs")) cfg.jobs = f.jobs;
    if (cmd->count("--agents")) {
        cfg.agents.clear();
        for (const auto& name : f.agents) {
            const auto kind = parse_agent(name);
            if (!kind) throw ConfigError("unknown agent \"" + name + "\"");
            cfg.agents.push_back(*kind);
        }
    }
    return cfg;
}

int cmd_run(const CLI::App* cmd, const Flags& f) {
    const ExperimentConfig cfg = build_config(cmd, f);
    run_experiment(cfg);
    const std::size_t n_runs = static_cast<std::size_t>(cfg.theta_realizations) *
                               cfg.trajectories * cfg.agents.size();
    std::printf("wrote %zu runs to %s (aggregate.csv, metadata.json, runs/)\n",
                n_runs, cfg.out_dir.c_str());
    return 0;
}

int cmd_oracle(const CLI::App* cmd, const Flags& f) {
    const ExperimentConfig cfg = build_config(cmd, f);
    cfg.validate();
    std::shared_ptr<const EnvironmentSpec> spec;
    if (cfg.explicit_spec) {
        spec = cfg.explicit_spec;
    } else {
        std::mt19937_64 rng(seed_mix({cfg.seed, 0}));
        spec = realize(*cfg.recipe, rng);
    }
    const Vec mu = stationary_distribution(spec->transition());
    const OptimalPolicy optimal = optimal_policy(*spec);
    const double rho = average_reward(*spec, optimal.policy());
    const ModelConstants constants = compute_constants(*spec);

    std::printf("setup %s, realization 0 of seed %" PRIu64 "\n",
                cfg.setup_label.c_str(), cfg.seed);
    std::printf("mu_S = %s\n", format_vec(mu, "%.4f").c_str());
    std::printf("rho_star = %.10g\n", rho);
    for (std::size_t s = 0; s < optimal.arm.size(); ++s)
        std::printf("pi*(state %zu): arm %d, action %s, value %.10g (%zu tied)\n", s,
                    optimal.arm[s], format_vec(optimal.action[s]).c_str(),
                    optimal.value[s], optimal.ties[s].size());
    std::printf("T_M = %.10g, T_S = %.10g, r_max = %.10g, C_theta_max = %d\n",
                constants.t_m, constants.t_s, constants.r_max, constants.c_theta_max);
    if (constants.delta)
        std::printf("delta = %.10g\n", *constants.delta);
    else
        std::printf("delta = unavailable (instance too large)\n");
    return 0;
}

int cmd_validate(const CLI::App* cmd, const Flags& f) {
    const ExperimentConfig cfg = build_config(cmd, f);
    cfg.validate();
    std::printf("ok: configuration is valid\n");
    return 0;
}

// Quick property sweeps over the core numeric routines; exits nonzero on the
// first violated property.
int cmd_selftest() {
    std::mt19937_64 rng(20260816u);

    // Greedy box-simplex maximizer against exhaustive corner enumeration.
    for (int trial = 0; trial < 2000; ++trial) {
        const int n = 1 + static_cast<int>(uniform01(rng) * 5.0);
        OptimisticBox box;
        box.center = testing::random_distribution(n, rng);
        box.half_width = uniform01(rng) * 0.6;
        box.values.resize(n);
        for (double& v : box.values) v = (uniform01(rng) - 0.5) * 20.0;
        const OptimisticChoice got = optimistic_expectation(box);
        const double want = testing::box_simplex_max(box.center, box.half_width,
                                                     box.values);
        if (std::abs(got.value - want) > 1e-10)
            throw std::runtime_error("selftest failed: optimistic_expectation mismatch");
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            if (std::abs(got.dist[i] - box.center[i]) > box.half_width + 1e-12 ||
                got.dist[i] < -1e-12 || got.dist[i] > 1.0 + 1e-12)
                throw std::runtime_error("selftest failed: optimistic distribution infeasible");
            sum += got.dist[i];
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::runtime_error("selftest failed: optimistic distribution not normalized");
    }
    std::printf("[ok] optimistic maximizer matches corner enumeration (2000 cases)\n");

    // Reward-based state recovery on random integer-grid models.
    for (int trial = 0; trial < 500; ++trial) {
        const int S = 2 + static_cast<int>(uniform01(rng) * 2.0);
        const int B = 1 + static_cast<int>(uniform01(rng) * 3.0);
        const int N = 1 + static_cast<int>(uniform01(rng) * 3.0);
        const auto spec = testing::random_spec(S, B, 3, N, rng);
        const ModelSets sets = spec->known_sets();
        const ArmId arm = static_cast<ArmId>(uniform01(rng) * B);
        const StateId state = static_cast<StateId>(uniform01(rng) * S);
        const auto& family = sets.family(arm, state);
        const int idx = static_cast<int>(uniform01(rng) * family.size());
        const auto& verts = sets.actions.vertices();
        const Vec& center = verts[static_cast<std::size_t>(uniform01(rng) * verts.size())];
        const Vec action =
            sample_perturbed_action(sets.actions, center, 0.05, rng);
        const double reward = dot(action, family[idx]);
        const RecoveryResult rec = recover_state(sets, arm, action, reward);
        if (rec.state != state || rec.theta_index != idx || rec.flagged())
            throw std::runtime_error("selftest failed: state recovery missed");
    }
    std::printf("[ok] state recovery exact on perturbed actions (500 cases)\n");

    // Confidence coverage on the preset 1a chain.
    {
        const SetupRecipe recipe = load_preset("1a");
        std::mt19937_64 sample_rng(7u);
        const auto spec = realize(recipe, sample_rng);
        const ConfidenceParams params(3.1);
        const Vec mu = stationary_distribution(spec->transition());
        const int trials = 400;
        const std::int64_t t_check = 301;
        int state_hits = 0;
        for (int trial = 0; trial < trials; ++trial) {
            CountTables counts = CountTables::for_sets(spec->known_sets());
            counts.advance_empty();
            StateId s = uniform01(rng) < mu[0] ? 0 : 1;
            while (counts.time() < t_check) {
                const StateId next =
                    sample_discrete(spec->transition().row(s), rng);
                const ArmId b = static_cast<ArmId>(uniform01(rng) * 2.0);
                const int idx =
                    sample_discrete(spec->thetas().probs(b, next), rng);
                counts.record_transition(s, next, b, idx);
                s = next;
            }
            const Mat est = counts.transition_estimate();
            bool hit = false;
            for (StateId from = 0; from < 2 && !hit; ++from) {
                const double conf = state_confidence(counts, params, from);
                for (StateId to = 0; to < 2; ++to)
                    if (std::abs(est[from][to] - spec->transition()(from, to)) > conf)
                        hit = true;
            }
            state_hits += hit ? 1 : 0;
        }
        const double freq = static_cast<double>(state_hits) / trials;
        const double bound = std::pow(static_cast<double>(t_check - 1), -3.1 + 1.0) / 8.0;
        const double se = std::sqrt(freq * (1.0 - freq) / trials);
        if (freq > bound + 3.0 * se + 1e-12)
            throw std::runtime_error("selftest failed: confidence coverage too loose");
        std::printf("[ok] transition confidence coverage holds (%d trials)\n", trials);
    }

    // Perturbed actions stay inside the polytope and the ball.
    for (int trial = 0; trial < 1000; ++trial) {
        const int N = 1 + static_cast<int>(uniform01(rng) * 3.0);
        const Polytope cube = Polytope::hypercube(Vec(N, 0.0), Vec(N, 1.0));
        const auto& verts = cube.vertices();
        const Vec& center = verts[static_cast<std::size_t>(uniform01(rng) * verts.size())];
        const double radius = 1e-6 + uniform01(rng) * 0.5;
        const Vec a = sample_perturbed_action(cube, center, radius, rng);
        double dist2 = 0.0;
        for (int d = 0; d < N; ++d) dist2 += (a[d] - center[d]) * (a[d] - center[d]);
        if (!cube.contains(a, 1e-9) || std::sqrt(dist2) > radius + 1e-12)
            throw std::runtime_error("selftest failed: perturbed action escaped");
    }
    std::printf("[ok] perturbed actions contained in polytope and ball (1000 cases)\n");

    std::printf("selftest passed\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"restless hidden Markov bandit simulator"};
    app.require_subcommand(1);

    Flags run_flags, oracle_flags, validate_flags;
    CLI::App* run_cmd = app.add_subcommand("run", "run a Monte Carlo experiment");
    add_common_options(run_cmd, run_flags);
    CLI::App* oracle_cmd = app.add_subcommand(
        "oracle", "print stationary distribution, optimal policy and constants");
    add_common_options(oracle_cmd, oracle_flags);
    CLI::App* validate_cmd =
        app.add_subcommand("validate", "check a configuration against all invariants");
    add_common_options(validate_cmd, validate_flags);
    CLI::App* selftest_cmd =
        app.add_subcommand("selftest", "run the built-in property sweeps");
    (void)selftest_cmd;

    try {
        app.parse(argc, argv);
        if (app.got_subcommand(run_cmd)) return cmd_run(run_cmd, run_flags);
        if (app.got_subcommand(oracle_cmd)) return cmd_oracle(oracle_cmd, oracle_flags);
        if (app.got_subcommand(validate_cmd))
            return cmd_validate(validate_cmd, validate_flags);
        return cmd_selftest();
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
