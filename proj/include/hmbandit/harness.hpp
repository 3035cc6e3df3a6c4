#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hmbandit/agent_hucrl.hpp"
#include "hmbandit/common.hpp"
#include "hmbandit/env.hpp"
#include "hmbandit/geometry.hpp"
#include "hmbandit/inference.hpp"
#include "hmbandit/learner.hpp"
#include "hmbandit/oracle.hpp"

namespace hmbandit {

inline constexpr const char* kVersion = "1.0.0";

// Everything that defines an experiment family except the reward vectors
// themselves: those are drawn fresh per realization, uniformly from the
// integer grid [grid_lo, grid_hi] per coordinate.
struct SetupRecipe {
    Mat transition;
    std::vector<std::vector<Vec>> theta_probs;  // [arm][state] draw distribution
    Vec grid_lo, grid_hi;                       // inclusive integer bounds per coordinate
    Polytope actions;

    int num_states() const { return static_cast<int>(transition.size()); }
    int num_arms() const { return static_cast<int>(theta_probs.size()); }
    int dimension() const { return static_cast<int>(grid_lo.size()); }
};

// The four named experiment presets ("1a", "1b", "2a", "2b").
SetupRecipe load_preset(const std::string& name);

// Draw one realization of the reward-vector families. Vectors are uniform on
// the integer grid; any draw that lands within L_inf 1e-9 of an existing
// vector of the same arm is redrawn, so families stay pairwise separated.
std::shared_ptr<const EnvironmentSpec> realize(const SetupRecipe& recipe,
                                               std::mt19937_64& rng);

enum class AgentKind { hucrl, joint, flat_ucrl, oracle_known_state };

std::string agent_name(AgentKind kind);
std::optional<AgentKind> parse_agent(const std::string& name);

struct ExperimentConfig {
    // Exactly one of recipe / explicit_spec is set. With explicit_spec the
    // model is fixed and "realizations" differ only through their seeds.
    std::string setup_label = "1a";
    std::optional<SetupRecipe> recipe;
    std::shared_ptr<const EnvironmentSpec> explicit_spec;

    std::int64_t horizon = 100000;
    int theta_realizations = 20;
    int trajectories = 5;
    std::vector<AgentKind> agents = {AgentKind::hucrl, AgentKind::joint,
                                     AgentKind::flat_ucrl};
    std::uint64_t seed = 1;
    double alpha = 3.1;
    double epsilon = 0.5;
    double alpha_eps = 1.5;
    double gamma = 1.0;
    std::string out_dir = "results";
    int jobs = 1;

    void validate() const;  // throws ConfigError naming the violated constraint
};

// Parse a JSON config file; throws ConfigError with path and field context.
ExperimentConfig load_config(const std::string& path);

// JSON echo of a config (used in metadata and by `validate`).
std::string config_to_json(const ExperimentConfig& cfg);

// Geometric checkpoint grid: powers of two up to the horizon, plus the
// horizon itself.
std::vector<std::int64_t> default_checkpoints(std::int64_t horizon);

// Deterministic per-run seed: a keyed hash of (master seed, realization,
// trajectory, agent tag). Distinct runs get distinct streams.
std::uint64_t child_seed(std::uint64_t master, std::uint64_t realization,
                         std::uint64_t trajectory, AgentKind agent);

// Build a learning agent. oracle_known_state is not a learner (it reads the
// true state) and is rejected here; run_trajectory handles it directly.
std::unique_ptr<Learner> make_learner(AgentKind kind,
                                      std::shared_ptr<const ModelSets> sets,
                                      ConfidenceParams params,
                                      PerturbationSchedule schedule);

struct RunResult {
    int realization = 0;
    int trajectory = 0;
    AgentKind agent = AgentKind::hucrl;
    std::uint64_t child = 0;  // the seed this run was derived from
    std::vector<std::int64_t> checkpoints;
    Vec regret;                                   // cumulative, per checkpoint
    Vec reward;                                   // cumulative, per checkpoint
    std::vector<std::int64_t> rounds;             // policy recomputations, per checkpoint
    std::vector<std::int64_t> recovery_failures;  // flagged recoveries, per checkpoint
    std::int64_t truth_mismatches = 0;  // recovered state differed from the true one
    double rho_star = 0.0;
};

// One agent against one fresh environment for `horizon` steps. The
// environment starts from the stationary distribution unless `initial_state`
// pins it. `optimal` and `rho_star` must belong to `spec`.
RunResult run_trajectory(std::shared_ptr<const EnvironmentSpec> spec,
                         std::shared_ptr<const ModelSets> sets,
                         const OptimalPolicy& optimal, double rho_star,
                         AgentKind kind, ConfidenceParams params,
                         PerturbationSchedule schedule, std::int64_t horizon,
                         const std::vector<std::int64_t>& checkpoints,
                         std::uint64_t env_seed, std::uint64_t agent_seed,
                         std::optional<StateId> initial_state = std::nullopt);

// All (realization, trajectory, agent) runs of a config, in memory, ordered
// by (realization, trajectory, agent list position). cfg.jobs > 1 runs them
// on a thread pool; results are identical to the serial order.
std::vector<RunResult> run_batch(const ExperimentConfig& cfg);

// run_batch plus persistence: per-run CSVs under <out_dir>/runs/, an
// aggregate CSV of mean regret with standard errors, and metadata.json.
void run_experiment(const ExperimentConfig& cfg);

struct AggregateRow {
    std::int64_t t;
    AgentKind agent;
    double mean_regret;
    double stderr_regret;
    int n_runs;
};

// Mean and standard error of cumulative regret per (agent, checkpoint),
// agents in config order.
std::vector<AggregateRow> aggregate(const std::vector<RunResult>& results,
                                    const std::vector<AgentKind>& agent_order);

// metadata.json: config echo, per-realization optimal average rewards, model
// constants of the first realization, code version, master seed.
void write_metadata_file(const std::string& path, const ExperimentConfig& cfg,
                         const std::vector<double>& rho_star,
                         const ModelConstants& constants);

}  // namespace hmbandit
