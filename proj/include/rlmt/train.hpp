#pragma once

// Training and evaluation. Both learners are deterministic per
// (spec, env, mutation, seed): every random draw comes from a stream
// derived from the training seed and a fixed role label. Environment-level
// mutations intercept observations during training only; evaluation always
// runs greedy on the unmutated environment.
//
// Both learners keep a periodic "probe": every probe_interval training
// steps they play a few greedy episodes on the clean environment — with
// the agent's own training-time behavioral faults still in force — and
// remember the best-scoring weight snapshot, which is what training
// returns. Probe episodes use their own derived seeds and do not feed the
// training data, so they change neither the training trajectory nor the
// bit-identity of probability-0 mutants with healthy runs.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rlmt/agents.hpp"
#include "rlmt/env.hpp"
#include "rlmt/errors.hpp"
#include "rlmt/mutation.hpp"
#include "rlmt/net.hpp"
#include "rlmt/rng.hpp"

namespace rlmt {

struct TrainLog {
    long long env_steps = 0;
    long long episodes = 0;
    long long gradient_steps = 0;
    EnvMutationLog env_mutation;
    double best_probe_mean = -std::numeric_limits<double>::infinity();
};

// An immutable training result: the effective (post-mutation) learner
// configuration, the training provenance, and the network weights.
struct TrainedPolicy {
    AlgoId algo_id = AlgoId::QNet;
    AlgoSpec spec;            // effective spec the run actually trained with
    EnvironmentConfig env;    // training environment
    std::string mutation;     // canonical mutation string, or "healthy"
    std::uint64_t seed = 0;
    Mlp policy;               // QNet: Q-network; PG: action-logit network
    std::optional<Mlp> value; // PG value baseline
    TrainLog log;
};

// What the learner wrote into its training data at one step — exposed to an
// optional observer so tests can assert on the stored (not the true)
// transitions.
struct StoredTransition {
    std::vector<double> s;
    int a = 0;
    double r = 0.0;
    std::vector<double> s_next;
    bool terminal = false;
};

using TrainObserver = std::function<void(const StoredTransition&)>;

inline int greedy_action(const Mlp& net, const std::vector<double>& state) {
    const auto out = forward(net, state);
    int best = 0;
    for (std::size_t i = 1; i < out.size(); ++i)
        if (out[i] > out[best]) best = static_cast<int>(i);
    return best;
}

namespace detail {

// Probes play the agent as it behaves during training: a frozen-observation
// fault keeps acting from each probe episode's first state too. Otherwise
// snapshot selection would judge faulty agents by clean behavior their
// training never produced and rescue them.
inline double greedy_probe_mean(const Mlp& net, const EnvironmentConfig& cfg,
                                std::uint64_t seed, int episodes, long long probe_index,
                                bool frozen_state) {
    double total = 0.0;
    for (int e = 0; e < episodes; ++e) {
        const std::uint64_t ep_seed =
            derive_seed(seed, "probe", static_cast<std::uint64_t>(probe_index) * 1024 +
                                           static_cast<std::uint64_t>(e));
        std::vector<double> first;
        total += run_episode(
                     cfg,
                     [&](const std::vector<double>& s) {
                         if (first.empty()) first = s;
                         return greedy_action(net, frozen_state ? first : s);
                     },
                     ep_seed)
                     .return_undiscounted;
    }
    return total / episodes;
}

// Tracks the best greedy-probe snapshot over the course of training.
struct ProbeTracker {
    const AlgoSpec& spec;
    const EnvironmentConfig& cfg;
    std::uint64_t seed;
    long long last_probe_step = 0;
    long long probe_index = 0;
    double best_mean = -std::numeric_limits<double>::infinity();
    std::vector<double> best_weights;

    ProbeTracker(const AlgoSpec& s, const EnvironmentConfig& c, std::uint64_t sd)
        : spec(s), cfg(c), seed(sd) {}

    bool enabled() const { return spec.probe_interval > 0 && spec.probe_episodes > 0; }

    void maybe_probe(const Mlp& net, long long env_steps, bool force) {
        if (!enabled()) return;
        if (!force && env_steps - last_probe_step < spec.probe_interval) return;
        last_probe_step = env_steps;
        const double m = greedy_probe_mean(net, cfg, seed, spec.probe_episodes, probe_index++,
                                           spec.faults.freeze_state_update);
        // Ties go to the later snapshot: with a capped return, several probes
        // can max out, and the most-trained of them generalizes best.
        if (m >= best_mean) {
            best_mean = m;
            best_weights = get_weights(net);
        }
    }

    void finalize(Mlp& net, TrainLog& log) const {
        if (enabled() && !best_weights.empty()) {
            set_weights(net, best_weights);
            log.best_probe_mean = best_mean;
        }
    }
};

inline int epsilon_greedy(const Mlp& net, const std::vector<double>& state, double eps,
                          Rng& rng, int n_actions) {
    if (rng.next_double() < eps) return static_cast<int>(rng.next_below(n_actions));
    return greedy_action(net, state);
}

inline int sample_softmax(const std::vector<double>& logits, Rng& rng) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    std::vector<double> p(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        total += p[i];
    }
    double u = rng.next_double() * total;
    for (std::size_t i = 0; i < p.size(); ++i) {
        u -= p[i];
        if (u < 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(p.size()) - 1;
}

inline TrainedPolicy train_qnet(const AlgoSpec& spec, const EnvironmentConfig& cfg,
                                const MutationSpec* mutation, std::uint64_t seed,
                                const TrainObserver& observer) {
    const int sdim = state_dim(cfg.env_id);
    const int n_actions = action_count(cfg.env_id);
    std::vector<int> sizes{sdim};
    sizes.insert(sizes.end(), spec.hidden_layers.begin(), spec.hidden_layers.end());
    sizes.push_back(n_actions);

    Rng init_rng(derive_seed(seed, "net_init"));
    Mlp net(sizes, spec.activation, init_rng);
    Mlp target = net;
    AdamState adam(net);

    Rng explore_rng(derive_seed(seed, "explore"));
    Rng learn_rng(derive_seed(seed, "learn"));
    std::optional<MutationChain> chain;
    if (mutation) chain.emplace(*mutation, derive_seed(seed, "mutation"));

    std::vector<StoredTransition> replay;
    replay.reserve(static_cast<std::size_t>(spec.replay_capacity));
    std::size_t replay_next = 0;
    auto store = [&](StoredTransition tr) {
        if (observer) observer(tr);
        if (replay.size() < static_cast<std::size_t>(spec.replay_capacity)) {
            replay.push_back(std::move(tr));
        } else {
            replay[replay_next] = std::move(tr);
            replay_next = (replay_next + 1) % replay.size();
        }
    };

    TrainLog log;
    ProbeTracker probes(spec, cfg, seed);
    Gradients grads(net);
    ForwardCache cache;

    while (log.env_steps < spec.training_budget) {
        std::vector<double> s = reset(cfg, derive_seed(seed, "reset",
                                                       static_cast<std::uint64_t>(log.episodes)));
        const std::vector<double> s_frozen = s;
        for (int t = 0; t < cfg.episode_cap && log.env_steps < spec.training_budget; ++t) {
            const std::vector<double>& s_view = spec.faults.freeze_state_update ? s_frozen : s;
            const double frac =
                std::min(1.0, static_cast<double>(log.env_steps) /
                                  static_cast<double>(spec.epsilon_decay_steps));
            const double eps =
                spec.epsilon_start + frac * (spec.epsilon_end - spec.epsilon_start);
            const int a = epsilon_greedy(net, s_view, eps, explore_rng, n_actions);
            Observation obs = step(cfg, s, a, t);
            const bool episode_done = obs.terminal;
            if (chain) obs = chain->intercept(obs);
            ++log.env_steps;

            store({s_view, a, obs.r_t, obs.s_next,
                   spec.faults.drop_terminal_flags ? false : obs.terminal});
            s = obs.s_next;

            if (log.env_steps % spec.target_sync_interval == 0) target = net;
            if (log.env_steps >= spec.warmup_steps &&
                replay.size() >= static_cast<std::size_t>(spec.batch_size) &&
                log.env_steps % spec.update_interval == 0) {
                for (auto& layer : grads.w) std::fill(layer.begin(), layer.end(), 0.0);
                for (auto& layer : grads.b) std::fill(layer.begin(), layer.end(), 0.0);
                for (int k = 0; k < spec.batch_size; ++k) {
                    const auto& tr = replay[learn_rng.next_below(replay.size())];
                    double target_q = tr.r;
                    if (!tr.terminal) {
                        const auto q_next = forward(target, tr.s_next);
                        double mx = q_next[0];
                        for (double v : q_next) mx = std::max(mx, v);
                        target_q += spec.gamma * mx;
                    }
                    const auto q = forward(net, tr.s, &cache);
                    std::vector<double> d_out(q.size(), 0.0);
                    d_out[static_cast<std::size_t>(tr.a)] =
                        loss_grad(spec.loss, q[static_cast<std::size_t>(tr.a)], target_q);
                    backward(net, cache, std::move(d_out), grads);
                }
                grads.scale(1.0 / spec.batch_size);
                apply_gradients(net, grads, spec.optimizer, spec.learning_rate, adam);
                ++log.gradient_steps;
            }
            if (episode_done) break;
        }
        ++log.episodes;
        probes.maybe_probe(net, log.env_steps, false);
    }
    probes.maybe_probe(net, log.env_steps, true);
    probes.finalize(net, log);

    TrainedPolicy out;
    out.algo_id = AlgoId::QNet;
    out.spec = spec;
    out.env = cfg;
    out.mutation = mutation ? render_mutation(*mutation) : "healthy";
    out.seed = seed;
    out.policy = std::move(net);
    if (chain) log.env_mutation = chain->log();
    out.log = log;
    return out;
}

inline TrainedPolicy train_pg(const AlgoSpec& spec, const EnvironmentConfig& cfg,
                              const MutationSpec* mutation, std::uint64_t seed,
                              const TrainObserver& observer) {
    const int sdim = state_dim(cfg.env_id);
    const int n_actions = action_count(cfg.env_id);
    std::vector<int> policy_sizes{sdim};
    policy_sizes.insert(policy_sizes.end(), spec.hidden_layers.begin(),
                        spec.hidden_layers.end());
    policy_sizes.push_back(n_actions);
    std::vector<int> value_sizes{sdim};
    value_sizes.insert(value_sizes.end(), spec.hidden_layers.begin(),
                       spec.hidden_layers.end());
    value_sizes.push_back(1);

    Rng init_rng(derive_seed(seed, "net_init"));
    Mlp policy(policy_sizes, spec.activation, init_rng);
    Mlp value(value_sizes, spec.activation, init_rng);
    AdamState adam_p(policy), adam_v(value);

    Rng explore_rng(derive_seed(seed, "explore"));
    std::optional<MutationChain> chain;
    if (mutation) chain.emplace(*mutation, derive_seed(seed, "mutation"));

    struct EpisodeData {
        std::vector<std::vector<double>> states;  // the states the agent saw
        std::vector<int> actions;
        std::vector<double> rewards;              // post-interception rewards
        bool stored_terminal = false;             // last transition's stored flag
        std::vector<double> final_next;           // bootstrap state when truncated
    };

    TrainLog log;
    ProbeTracker probes(spec, cfg, seed);
    std::vector<EpisodeData> batch;
    // The frozen-observation fault latches once per rollout segment (the
    // episodes_per_update batch), the on-policy unit of data collection —
    // every episode of the segment then acts from and stores that one state.
    std::vector<double> segment_frozen;

    // The policy objective is sign-flipped under the loss-function mutation;
    // the value baseline always regresses with plain MSE.
    const double objective_sign = spec.loss == Loss::NegatedTD ? -1.0 : 1.0;

    auto update = [&]() {
        if (batch.empty()) return;
        std::vector<double> advantages;
        std::vector<double> returns_all;
        for (auto& ep : batch) {
            double tail = 0.0;
            if (!ep.stored_terminal)
                tail = forward(value, ep.final_next)[0];  // truncated: bootstrap
            const auto returns = compute_returns_with_tail(
                ep.rewards, spec.gamma, spec.faults.reverse_rewards, tail);
            for (std::size_t t = 0; t < returns.size(); ++t) {
                const double baseline = spec.baseline ? forward(value, ep.states[t])[0] : 0.0;
                advantages.push_back(returns[t] - baseline);
                returns_all.push_back(returns[t]);
            }
        }
        double adv_mean = 0.0, adv_sd = 1.0;
        if (advantages.size() > 1) {
            adv_mean = 0.0;
            for (double v : advantages) adv_mean += v;
            adv_mean /= static_cast<double>(advantages.size());
            double var = 0.0;
            for (double v : advantages) var += (v - adv_mean) * (v - adv_mean);
            adv_sd = std::sqrt(var / static_cast<double>(advantages.size())) + 1e-8;
        } else {
            adv_mean = 0.0;
            adv_sd = 1.0;
        }

        Gradients pgrads(policy), vgrads(value);
        ForwardCache cache;
        std::size_t flat = 0;
        for (const auto& ep : batch) {
            for (std::size_t t = 0; t < ep.states.size(); ++t, ++flat) {
                const double adv = (advantages[flat] - adv_mean) / adv_sd;
                const auto logits = forward(policy, ep.states[t], &cache);
                double mx = logits[0];
                for (double v : logits) mx = std::max(mx, v);
                double total = 0.0;
                std::vector<double> probs(logits.size());
                for (std::size_t i = 0; i < logits.size(); ++i) {
                    probs[i] = std::exp(logits[i] - mx);
                    total += probs[i];
                }
                std::vector<double> d_logits(logits.size());
                for (std::size_t i = 0; i < logits.size(); ++i) {
                    const double pi = probs[i] / total;
                    const double indicator = static_cast<int>(i) == ep.actions[t] ? 1.0 : 0.0;
                    d_logits[i] = objective_sign * adv * (pi - indicator);
                }
                backward(policy, cache, std::move(d_logits), pgrads);
                if (spec.baseline) {
                    const auto v = forward(value, ep.states[t], &cache);
                    backward(value, cache,
                             {loss_grad(Loss::MSE, v[0], returns_all[flat])}, vgrads);
                }
            }
        }
        const double inv = 1.0 / static_cast<double>(advantages.size());
        pgrads.scale(inv);
        apply_gradients(policy, pgrads, spec.optimizer, spec.learning_rate, adam_p);
        if (spec.baseline) {
            vgrads.scale(inv);
            apply_gradients(value, vgrads, spec.optimizer, spec.learning_rate, adam_v);
        }
        ++log.gradient_steps;
        batch.clear();
    };

    while (log.env_steps < spec.training_budget) {
        EpisodeData ep;
        std::vector<double> s = reset(cfg, derive_seed(seed, "reset",
                                                       static_cast<std::uint64_t>(log.episodes)));
        if (batch.empty()) segment_frozen = s;
        for (int t = 0; t < cfg.episode_cap; ++t) {
            const std::vector<double>& s_view =
                spec.faults.freeze_state_update ? segment_frozen : s;
            const int a = sample_softmax(forward(policy, s_view), explore_rng);
            Observation obs = step(cfg, s, a, t);
            const bool episode_done = obs.terminal;
            const bool natural_end = obs.terminal && t + 1 < cfg.episode_cap;
            if (chain) obs = chain->intercept(obs);
            ++log.env_steps;

            // Stored flag: true only for natural termination (truncation at
            // the cap bootstraps), and never true when terminal flags are
            // mutated away.
            const bool stored_terminal =
                spec.faults.drop_terminal_flags ? false : natural_end;
            if (observer) observer({s_view, a, obs.r_t, obs.s_next, stored_terminal});
            ep.states.push_back(s_view);
            ep.actions.push_back(a);
            ep.rewards.push_back(obs.r_t);
            ep.stored_terminal = stored_terminal;
            ep.final_next = obs.s_next;
            s = obs.s_next;
            if (episode_done) break;
        }
        ++log.episodes;
        batch.push_back(std::move(ep));
        if (static_cast<int>(batch.size()) >= spec.episodes_per_update) update();
        probes.maybe_probe(policy, log.env_steps, false);
    }
    update();  // flush the last partial batch
    probes.maybe_probe(policy, log.env_steps, true);
    probes.finalize(policy, log);

    TrainedPolicy out;
    out.algo_id = AlgoId::PG;
    out.spec = spec;
    out.env = cfg;
    out.mutation = mutation ? render_mutation(*mutation) : "healthy";
    out.seed = seed;
    out.policy = std::move(policy);
    out.value = std::move(value);
    if (chain) log.env_mutation = chain->log();
    out.log = log;
    return out;
}

}  // namespace detail

// Trains one agent. The mutation (if any) is applied in full: policy- and
// agent-level operators transform the spec before training, environment-
// level operators intercept every training observation. Throws
// CompatibilityError / VacuousMutationError for mutations the algorithm
// cannot host.
inline TrainedPolicy train(const AlgoSpec& base_spec, const EnvironmentConfig& cfg,
                           const MutationSpec* mutation, std::uint64_t seed,
                           const TrainObserver& observer = {}) {
    validate_spec(base_spec);
    validate_config(cfg);
    AlgoSpec spec = base_spec;
    if (mutation) spec = apply_spec_mutations(*mutation, base_spec);
    if (spec.algo_id == AlgoId::QNet)
        return detail::train_qnet(spec, cfg, mutation, seed, observer);
    return detail::train_pg(spec, cfg, mutation, seed, observer);
}

// Greedy evaluation: n_episodes episode returns, deterministic per seed.
inline std::vector<double> evaluate(const TrainedPolicy& policy,
                                    const EnvironmentConfig& cfg, int n_episodes,
                                    std::uint64_t seed) {
    if (n_episodes < 1) throw UsageError("evaluate needs n_episodes >= 1");
    if (policy.policy.input_dim() != state_dim(cfg.env_id))
        throw UsageError("policy input dimension does not match environment");
    validate_config(cfg);
    std::vector<double> returns;
    returns.reserve(static_cast<std::size_t>(n_episodes));
    for (int e = 0; e < n_episodes; ++e) {
        const auto trace = run_episode(
            cfg,
            [&](const std::vector<double>& s) { return greedy_action(policy.policy, s); },
            derive_seed(seed, "episode", static_cast<std::uint64_t>(e)));
        returns.push_back(trace.return_undiscounted);
    }
    return returns;
}

}  // namespace rlmt
