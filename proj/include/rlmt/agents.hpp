#pragma once

// Learner configurations and the return computation shared by both
// learners. Two algorithms are provided: "QNet" (off-policy value learner
// with replay buffer, epsilon-greedy exploration, and a periodically synced
// target network) and "PG" (on-policy Monte-Carlo policy gradient with a
// learned value baseline). The training loops live in train.hpp.

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "rlmt/env.hpp"
#include "rlmt/errors.hpp"
#include "rlmt/net.hpp"

namespace rlmt {

enum class AlgoId { QNet, PG };

inline std::string_view algo_name(AlgoId id) { return id == AlgoId::QNet ? "QNet" : "PG"; }

inline AlgoId parse_algo(std::string_view name) {
    if (name == "QNet") return AlgoId::QNet;
    if (name == "PG") return AlgoId::PG;
    throw ParseError("unknown algorithm: '" + std::string(name) + "'");
}

// Deliberate training-process faults, all off by default. The agent-level
// mutation operators switch these on.
struct TrainingFaults {
    bool reverse_rewards = false;      // returns computed from the reversed reward list
    bool drop_terminal_flags = false;  // stored transitions never marked terminal
    bool freeze_state_update = false;  // agent keeps acting from the episode's first state
    bool operator==(const TrainingFaults&) const = default;
};

struct AlgoSpec {
    AlgoId algo_id = AlgoId::QNet;
    double gamma = 0.99;
    double learning_rate = 1e-3;
    std::vector<int> hidden_layers{32, 32};
    Activation activation = Activation::ReLU;
    Optimizer optimizer = Optimizer::Adam;
    Loss loss = Loss::Huber;
    long long training_budget = 100000;  // environment steps

    // QNet only.
    int replay_capacity = 10000;
    int batch_size = 32;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    long long epsilon_decay_steps = 50000;  // linear decay horizon
    int target_sync_interval = 500;
    int update_interval = 1;   // gradient step every k environment steps
    int warmup_steps = 500;    // steps before learning starts

    // PG only.
    int episodes_per_update = 4;
    bool baseline = true;

    // Both learners periodically play a few greedy probe episodes on the
    // clean environment and finally return the best-probing snapshot.
    int probe_interval = 2000;
    int probe_episodes = 5;

    TrainingFaults faults;

    bool operator==(const AlgoSpec&) const = default;
};

inline void validate_spec(const AlgoSpec& spec) {
    if (!(spec.gamma > 0.0 && spec.gamma <= 1.0))
        throw ConfigError("gamma must be in (0,1]");
    if (!(spec.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (spec.training_budget <= 0) throw ConfigError("training_budget must be > 0");
    if (spec.hidden_layers.empty()) throw ConfigError("hidden_layers must be non-empty");
    for (int wd : spec.hidden_layers)
        if (wd <= 0) throw ConfigError("hidden layer widths must be > 0");
    if (spec.algo_id == AlgoId::QNet) {
        if (spec.replay_capacity < spec.batch_size)
            throw ConfigError("replay_capacity must hold at least one batch");
        if (spec.batch_size <= 0 || spec.target_sync_interval <= 0 ||
            spec.update_interval <= 0)
            throw ConfigError("QNet intervals and batch size must be > 0");
    } else if (spec.episodes_per_update <= 0) {
        throw ConfigError("episodes_per_update must be > 0");
    }
}

inline long long default_budget(EnvId env) {
    return env == EnvId::CartPole ? 100000 : 200000;
}

inline AlgoSpec qnet_defaults(EnvId env) {
    AlgoSpec spec;
    spec.algo_id = AlgoId::QNet;
    spec.activation = Activation::ReLU;
    spec.loss = Loss::Huber;
    spec.training_budget = default_budget(env);
    return spec;
}

inline AlgoSpec pg_defaults(EnvId env) {
    AlgoSpec spec;
    spec.algo_id = AlgoId::PG;
    spec.activation = Activation::Tanh;
    spec.loss = Loss::MSE;  // value-baseline regression
    spec.training_budget = default_budget(env);
    return spec;
}

inline AlgoSpec algo_defaults(AlgoId id, EnvId env) {
    return id == AlgoId::QNet ? qnet_defaults(env) : pg_defaults(env);
}

// Evaluation returns of one population: per_agent[i] holds agent i's
// episode returns, one row per agent, all rows the same length.
struct RewardSample {
    std::vector<std::vector<double>> per_agent;

    int agent_count() const { return static_cast<int>(per_agent.size()); }

    std::vector<double> agent_means() const {
        std::vector<double> out;
        out.reserve(per_agent.size());
        for (const auto& row : per_agent) {
            double s = 0.0;
            for (double v : row) s += v;
            out.push_back(s / static_cast<double>(row.size()));
        }
        return out;
    }

    std::vector<double> pooled() const {
        std::vector<double> out;
        for (const auto& row : per_agent) out.insert(out.end(), row.begin(), row.end());
        return out;
    }
};

inline void validate_reward_sample(const RewardSample& sample) {
    if (sample.per_agent.empty()) throw UsageError("reward sample has no agents");
    const std::size_t n = sample.per_agent.front().size();
    for (const auto& row : sample.per_agent) {
        if (row.empty() || row.size() != n)
            throw UsageError("reward sample must be rectangular and non-empty");
        for (double v : row)
            if (!std::isfinite(v)) throw UsageError("non-finite episode return");
    }
}

// Discounted returns by the backward recursion R_t = r_t + gamma * R_{t+1},
// seeded with `tail` (0 for complete episodes; a bootstrap value when the
// episode was cut off). With `reversed` the reward list is reversed first —
// the faulty reward-order association one of the mutations injects.
inline std::vector<double> compute_returns_with_tail(std::vector<double> rewards,
                                                     double gamma, bool reversed,
                                                     double tail) {
    if (rewards.empty()) throw UsageError("compute_returns: empty reward list");
    for (double r : rewards)
        if (!std::isfinite(r)) throw UsageError("compute_returns: non-finite reward");
    if (reversed) std::reverse(rewards.begin(), rewards.end());
    std::vector<double> out(rewards.size());
    double acc = tail;
    for (std::size_t i = rewards.size(); i-- > 0;) {
        acc = rewards[i] + gamma * acc;
        out[i] = acc;
    }
    return out;
}

inline std::vector<double> compute_returns(const std::vector<double>& rewards,
                                           double gamma, bool reversed) {
    return compute_returns_with_tail(rewards, gamma, reversed, 0.0);
}

}  // namespace rlmt
