#include "hmbandit/harness.hpp"

#include "hmbandit/agents_baseline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

namespace hmbandit {

namespace {

SetupRecipe make_recipe(Mat transition, std::vector<std::vector<Vec>> theta_probs,
                        double grid_lo, double grid_hi, int dimension) {
    return SetupRecipe{
        std::move(transition), std::move(theta_probs), Vec(dimension, grid_lo),
        Vec(dimension, grid_hi),
        Polytope::hypercube(Vec(dimension, 0.0), Vec(dimension, 1.0))};
}

}  // namespace

SetupRecipe load_preset(const std::string& name) {
    if (name == "1a")
        return make_recipe({{0.4, 0.6}, {0.75, 0.25}},
                           {{{0.4, 0.6}, {0.7, 0.3}}, {{0.7, 0.3}, {0.5, 0.5}}}, -7.0,
                           10.0, 2);
    if (name == "1b")
        return make_recipe({{0.8, 0.2}, {0.45, 0.55}},
                           {{{0.8, 0.2}, {0.3, 0.7}}, {{0.45, 0.55}, {0.4, 0.6}}},
                           -10.0, 15.0, 2);
    if (name == "2a")
        return make_recipe(
            {{0.4, 0.3, 0.3}, {0.25, 0.5, 0.25}, {0.3, 0.25, 0.45}},
            {{{0.4, 0.6}, {0.7, 0.3}, {0.75, 0.25}},
             {{0.7, 0.3}, {0.5, 0.5}, {0.1, 0.9}},
             {{0.25, 0.75}, {0.2, 0.8}, {0.6, 0.4}},
             {{0.35, 0.65}, {0.45, 0.55}, {0.32, 0.68}}},
            -7.0, 10.0, 5);
    if (name == "2b")
        return make_recipe(
            {{0.25, 0.55, 0.2}, {0.35, 0.25, 0.4}, {0.2, 0.1, 0.7}},
            {{{0.8, 0.2}, {0.3, 0.7}, {0.4, 0.6}},
             {{0.45, 0.55}, {0.14, 0.86}, {0.72, 0.28}},
             {{0.9, 0.1}, {0.76, 0.24}, {0.18, 0.82}},
             {{0.6, 0.4}, {0.5, 0.5}, {0.53, 0.47}}},
            -10.0, 15.0, 5);
    throw ConfigError("unknown preset \"" + name + "\" (expected 1a, 1b, 2a or 2b)");
}

std::shared_ptr<const EnvironmentSpec> realize(const SetupRecipe& recipe,
                                               std::mt19937_64& rng) {
    const int S = recipe.num_states();
    const int B = recipe.num_arms();
    const int N = recipe.dimension();
    std::vector<std::vector<std::vector<Vec>>> vectors(
        B, std::vector<std::vector<Vec>>(S));
    for (ArmId b = 0; b < B; ++b) {
        std::vector<Vec> seen;  // every vector of this arm drawn so far
        for (StateId s = 0; s < S; ++s) {
            const int count = static_cast<int>(recipe.theta_probs[b][s].size());
            for (int i = 0; i < count; ++i) {
                for (int attempt = 0;; ++attempt) {
                    if (attempt >= 10000)
                        throw ConfigError(
                            "integer grid too small to draw separated reward vectors");
                    Vec v(N);
                    for (int d = 0; d < N; ++d) {
                        const auto span = static_cast<std::int64_t>(
                            recipe.grid_hi[d] - recipe.grid_lo[d] + 1.5);
                        auto k = static_cast<std::int64_t>(uniform01(rng) * span);
                        if (k >= span) k = span - 1;
                        v[d] = recipe.grid_lo[d] + static_cast<double>(k);
                    }
                    bool separated = true;
                    for (const Vec& u : seen) {
                        double gap = 0.0;
                        for (int d = 0; d < N; ++d)
                            gap = std::max(gap, std::abs(v[d] - u[d]));
                        if (gap <= 1e-9) {
                            separated = false;
                            break;
                        }
                    }
                    if (separated) {
                        vectors[b][s].push_back(v);
                        seen.push_back(std::move(v));
                        break;
                    }
                }
            }
        }
    }
    return std::make_shared<const EnvironmentSpec>(
        TransitionMatrix(recipe.transition),
        ThetaFamily(std::move(vectors), recipe.theta_probs), recipe.actions);
}

std::string agent_name(AgentKind kind) {
    switch (kind) {
        case AgentKind::hucrl: return "hucrl";
        case AgentKind::joint: return "joint";
        case AgentKind::flat_ucrl: return "flat_ucrl";
        case AgentKind::oracle_known_state: return "oracle_known_state";
    }
    throw ContractError("unknown agent kind");
}

std::optional<AgentKind> parse_agent(const std::string& name) {
    if (name == "hucrl") return AgentKind::hucrl;
    if (name == "joint") return AgentKind::joint;
    if (name == "flat_ucrl") return AgentKind::flat_ucrl;
    if (name == "oracle_known_state") return AgentKind::oracle_known_state;
    return std::nullopt;
}

void ExperimentConfig::validate() const {
    if (!recipe && !explicit_spec)
        throw ConfigError("config must define a setup (preset, random recipe, or explicit model)");
    if (recipe && explicit_spec)
        throw ConfigError("config defines both a recipe and an explicit model; pick one");
    if (horizon < 1) throw ConfigError("horizon must be at least 1");
    if (theta_realizations < 1)
        throw ConfigError("theta_realizations must be at least 1");
    if (trajectories < 1) throw ConfigError("trajectories must be at least 1");
    if (alpha <= 3.0)
        throw ConfigError("confidence parameter alpha must be greater than 3 (got " +
                          std::to_string(alpha) + ")");
    if (epsilon <= 0.0 || alpha_eps <= 0.0 || gamma <= 0.0)
        throw ConfigError("perturbation parameters epsilon, alpha_eps, gamma must be positive");
    if (agents.empty()) throw ConfigError("at least one agent is required");
    if (jobs < 1) throw ConfigError("jobs must be at least 1");
    if (recipe) {
        const int S = recipe->num_states();
        const int B = recipe->num_arms();
        const int N = recipe->dimension();
        if (B < 1 || S < 1 || N < 1)
            throw ConfigError("setup needs at least one arm, one state and one dimension");
        if (static_cast<int>(recipe->grid_hi.size()) != N)
            throw ConfigError("grid bounds must have one entry per coordinate");
        double cells = 1.0;
        for (int d = 0; d < N; ++d) {
            const double lo = recipe->grid_lo[d];
            const double hi = recipe->grid_hi[d];
            if (std::abs(lo - std::round(lo)) > 1e-9 ||
                std::abs(hi - std::round(hi)) > 1e-9)
                throw ConfigError("grid bounds must be integers");
            if (lo > hi) throw ConfigError("grid lower bound exceeds upper bound");
            cells = std::min(1e18, cells * (hi - lo + 1.0));
        }
        if (recipe->actions.dimension() != N)
            throw ConfigError("action set dimension does not match the grid");
        for (ArmId b = 0; b < B; ++b) {
            if (static_cast<int>(recipe->theta_probs[b].size()) != S)
                throw ConfigError("theta_probs must have one distribution per (arm, state)");
            double arm_total = 0.0;
            for (StateId s = 0; s < S; ++s) {
                const Vec& p = recipe->theta_probs[b][s];
                if (p.empty()) throw ConfigError("every family needs at least one vector");
                double sum = 0.0;
                for (double x : p) {
                    if (x < 0.0 || x > 1.0)
                        throw ConfigError("family probabilities must lie in [0,1]");
                    sum += x;
                }
                if (std::abs(sum - 1.0) > 1e-9)
                    throw ConfigError("family probabilities must sum to 1");
                arm_total += static_cast<double>(p.size());
            }
            if (arm_total > cells)
                throw ConfigError("integer grid too small to hold the requested distinct vectors");
        }
        TransitionMatrix check(recipe->transition);  // full chain validation
    }
}

std::vector<std::int64_t> default_checkpoints(std::int64_t horizon) {
    std::vector<std::int64_t> out;
    for (std::int64_t c = 1; c < horizon; c *= 2) out.push_back(c);
    out.push_back(horizon);
    return out;
}

namespace {

std::uint64_t agent_tag(AgentKind kind) {
    switch (kind) {
        case AgentKind::hucrl: return 1;
        case AgentKind::joint: return 2;
        case AgentKind::flat_ucrl: return 3;
        case AgentKind::oracle_known_state: return 4;
    }
    throw ContractError("unknown agent kind");
}

}  // namespace

std::uint64_t child_seed(std::uint64_t master, std::uint64_t realization,
                         std::uint64_t trajectory, AgentKind agent) {
    return seed_mix({master, realization, trajectory, agent_tag(agent)});
}

std::unique_ptr<Learner> make_learner(AgentKind kind,
                                      std::shared_ptr<const ModelSets> sets,
                                      ConfidenceParams params,
                                      PerturbationSchedule schedule) {
    switch (kind) {
        case AgentKind::hucrl:
            return std::make_unique<HucrlAgent>(std::move(sets), params, schedule);
        case AgentKind::joint:
            return std::make_unique<JointConfAgent>(std::move(sets), params, schedule);
        case AgentKind::flat_ucrl:
            return std::make_unique<FlatUcrlAgent>(std::move(sets), params, schedule);
        case AgentKind::oracle_known_state:
            throw ContractError("oracle_known_state reads the true state; it is not a learner");
    }
    throw ContractError("unknown agent kind");
}

RunResult run_trajectory(std::shared_ptr<const EnvironmentSpec> spec,
                         std::shared_ptr<const ModelSets> sets,
                         const OptimalPolicy& optimal, double rho_star,
                         AgentKind kind, ConfidenceParams params,
                         PerturbationSchedule schedule, std::int64_t horizon,
                         const std::vector<std::int64_t>& checkpoints,
                         std::uint64_t env_seed, std::uint64_t agent_seed,
                         std::optional<StateId> initial_state) {
    if (checkpoints.empty()) throw ContractError("at least one checkpoint is required");
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
        if (checkpoints[i] < 1 || checkpoints[i] > horizon)
            throw ContractError("checkpoints must lie in [1, horizon]");
        if (i > 0 && checkpoints[i] <= checkpoints[i - 1])
            throw ContractError("checkpoints must be strictly increasing");
    }
    Environment env(spec, env_seed, initial_state);
    RunResult out;
    out.agent = kind;
    out.rho_star = rho_star;
    out.checkpoints = checkpoints;
    const std::size_t nc = checkpoints.size();
    out.regret.reserve(nc);
    out.reward.reserve(nc);
    out.rounds.reserve(nc);
    out.recovery_failures.reserve(nc);

    double cum_reward = 0.0;
    std::size_t next_cp = 0;
    if (kind == AgentKind::oracle_known_state) {
        StateId prev = env.current_state();
        for (std::int64_t t = 1; t <= horizon; ++t) {
            const ArmId arm = optimal.arm[prev];
            const StepResult res = env.step(arm, optimal.action[prev]);
            cum_reward += res.reward;
            prev = res.state;
            if (next_cp < nc && t == checkpoints[next_cp]) {
                out.regret.push_back(static_cast<double>(t) * rho_star - cum_reward);
                out.reward.push_back(cum_reward);
                out.rounds.push_back(0);
                out.recovery_failures.push_back(0);
                ++next_cp;
            }
        }
        return out;
    }

    std::mt19937_64 agent_rng(agent_seed);
    auto learner = make_learner(kind, std::move(sets), params, schedule);
    for (std::int64_t t = 1; t <= horizon; ++t) {
        const auto [arm, action] = learner->act(agent_rng);
        const StepResult res = env.step(arm, action);
        const RecoveryResult rec = learner->observe(res.reward, arm, action);
        if (rec.state != res.state) ++out.truth_mismatches;
        cum_reward += res.reward;
        if (next_cp < nc && t == checkpoints[next_cp]) {
            out.regret.push_back(static_cast<double>(t) * rho_star - cum_reward);
            out.reward.push_back(cum_reward);
            out.rounds.push_back(learner->round_index());
            out.recovery_failures.push_back(learner->diagnostic_count());
            ++next_cp;
        }
    }
    return out;
}

std::vector<RunResult> run_batch(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto checkpoints = default_checkpoints(cfg.horizon);

    struct Realization {
        std::shared_ptr<const EnvironmentSpec> spec;
        std::shared_ptr<const ModelSets> sets;
        OptimalPolicy optimal;
        double rho;
    };
    std::vector<Realization> shared;
    shared.reserve(cfg.theta_realizations);
    for (int r = 0; r < cfg.theta_realizations; ++r) {
        std::shared_ptr<const EnvironmentSpec> spec;
        if (cfg.explicit_spec) {
            spec = cfg.explicit_spec;
        } else {
            std::mt19937_64 rng(seed_mix({cfg.seed, static_cast<std::uint64_t>(r)}));
            spec = realize(*cfg.recipe, rng);
        }
        auto sets = std::make_shared<const ModelSets>(spec->known_sets());
        OptimalPolicy optimal = optimal_policy(*spec);
        const double rho = average_reward(*spec, optimal.policy());
        shared.push_back({std::move(spec), std::move(sets), std::move(optimal), rho});
    }

    struct Task {
        int r, j, k;
    };
    std::vector<Task> tasks;
    tasks.reserve(static_cast<std::size_t>(cfg.theta_realizations) *
                  cfg.trajectories * cfg.agents.size());
    for (int r = 0; r < cfg.theta_realizations; ++r)
        for (int j = 0; j < cfg.trajectories; ++j)
            for (int k = 0; k < static_cast<int>(cfg.agents.size()); ++k)
                tasks.push_back({r, j, k});

    std::vector<RunResult> results(tasks.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    std::string error;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size() || failed.load()) return;
            const auto& task = tasks[i];
            const Realization& re = shared[task.r];
            const AgentKind kind = cfg.agents[task.k];
            const std::uint64_t child =
                child_seed(cfg.seed, static_cast<std::uint64_t>(task.r),
                           static_cast<std::uint64_t>(task.j), kind);
            try {
                PerturbationSchedule schedule(cfg.epsilon, cfg.alpha_eps, cfg.gamma,
                                              re.sets->theta_l1_max);
                RunResult res = run_trajectory(
                    re.spec, re.sets, re.optimal, re.rho, kind,
                    ConfidenceParams(cfg.alpha), schedule, cfg.horizon, checkpoints,
                    seed_mix({child, 1}), seed_mix({child, 2}));
                res.realization = task.r;
                res.trajectory = task.j;
                res.child = child;
                results[i] = std::move(res);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> guard(error_mutex);
                if (error.empty())
                    error = "run failed (child seed " + std::to_string(child) +
                            "): " + e.what();
                failed.store(true);
                return;
            }
        }
    };

    const int jobs = std::max(
        1, std::min<int>(cfg.jobs, static_cast<int>(tasks.size())));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(jobs);
        for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failed.load()) throw std::runtime_error(error);
    return results;
}

std::vector<AggregateRow> aggregate(const std::vector<RunResult>& results,
                                    const std::vector<AgentKind>& agent_order) {
    std::vector<AggregateRow> rows;
    if (results.empty()) return rows;
    for (AgentKind kind : agent_order) {
        std::vector<const RunResult*> runs;
        for (const auto& r : results)
            if (r.agent == kind) runs.push_back(&r);
        if (runs.empty()) continue;
        const auto& checkpoints = runs.front()->checkpoints;
        for (std::size_t ci = 0; ci < checkpoints.size(); ++ci) {
            double mean = 0.0;
            for (const auto* r : runs) mean += r->regret[ci];
            const int n = static_cast<int>(runs.size());
            mean /= n;
            double var = 0.0;
            for (const auto* r : runs) {
                const double d = r->regret[ci] - mean;
                var += d * d;
            }
            const double se = n > 1 ? std::sqrt(var / (n - 1)) / std::sqrt(n) : 0.0;
            rows.push_back({checkpoints[ci], kind, mean, se, n});
        }
    }
    return rows;
}

namespace {

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_text_file(const std::filesystem::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
    out << body;
    out.close();
    if (!out) throw ConfigError("failed while writing " + path.string());
}

}  // namespace

void run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    namespace fs = std::filesystem;
    const fs::path out_dir(cfg.out_dir);
    std::error_code ec;
    fs::create_directories(out_dir / "runs", ec);
    if (ec)
        throw ConfigError("cannot create output directory " +
                          (out_dir / "runs").string() + ": " + ec.message());

    const std::vector<RunResult> results = run_batch(cfg);

    for (const auto& run : results) {
        char name[96];
        std::snprintf(name, sizeof name, "%s_r%04d_j%02d.csv",
                      agent_name(run.agent).c_str(), run.realization, run.trajectory);
        std::string body = "t,regret,reward,rounds,recovery_failures\n";
        for (std::size_t i = 0; i < run.checkpoints.size(); ++i) {
            body += std::to_string(run.checkpoints[i]);
            body += ',';
            body += format_double(run.regret[i]);
            body += ',';
            body += format_double(run.reward[i]);
            body += ',';
            body += std::to_string(run.rounds[i]);
            body += ',';
            body += std::to_string(run.recovery_failures[i]);
            body += '\n';
        }
        write_text_file(out_dir / "runs" / name, body);
    }

    std::string agg = "t,agent,mean_regret,stderr,n_runs\n";
    for (const auto& row : aggregate(results, cfg.agents)) {
        agg += std::to_string(row.t);
        agg += ',';
        agg += agent_name(row.agent);
        agg += ',';
        agg += format_double(row.mean_regret);
        agg += ',';
        agg += format_double(row.stderr_regret);
        agg += ',';
        agg += std::to_string(row.n_runs);
        agg += '\n';
    }
    write_text_file(out_dir / "aggregate.csv", agg);

    std::vector<double> rho_star(cfg.theta_realizations, 0.0);
    for (const auto& run : results) rho_star[run.realization] = run.rho_star;
    std::shared_ptr<const EnvironmentSpec> first_spec;
    if (cfg.explicit_spec) {
        first_spec = cfg.explicit_spec;
    } else {
        std::mt19937_64 rng(seed_mix({cfg.seed, 0}));
        first_spec = realize(*cfg.recipe, rng);
    }
    write_metadata_file((out_dir / "metadata.json").string(), cfg, rho_star,
                        compute_constants(*first_spec));
}

}  // namespace hmbandit
