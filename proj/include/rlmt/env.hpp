#pragma once

// Deterministic, parameterized simulation environments with episode
// semantics. Two tasks are provided: the classic cart-pole balancing task
// and a one-dimensional vertical lander ("MiniLander"). Both expose reset
// and step as pure functions of (config, state, action, step_count) so
// replaying an action sequence always yields bit-identical traces.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "rlmt/errors.hpp"
#include "rlmt/rng.hpp"
#include "rlmt/text.hpp"

namespace rlmt {

enum class EnvId { CartPole, MiniLander };

inline std::string_view env_id_name(EnvId id) {
    return id == EnvId::CartPole ? "CartPole" : "MiniLander";
}

inline EnvId parse_env_id(std::string_view name) {
    if (name == "CartPole") return EnvId::CartPole;
    if (name == "MiniLander") return EnvId::MiniLander;
    throw ParseError("unknown environment id: '" + std::string(name) + "'");
}

// Environment configuration: tunable physical parameters plus the episode
// step cap. Parameters omitted from `params` take the task defaults below.
struct EnvironmentConfig {
    EnvId env_id = EnvId::CartPole;
    std::map<std::string, double> params;
    int episode_cap = 500;
};

inline const std::map<std::string, double>& default_params(EnvId id) {
    static const std::map<std::string, double> cartpole{
        {"cart_mass", 1.0}, {"pole_mass", 0.1}};
    static const std::map<std::string, double> lander{
        {"gravity", 9.8}, {"engine_power", 15.0}};
    return id == EnvId::CartPole ? cartpole : lander;
}

inline int default_episode_cap(EnvId id) {
    return id == EnvId::CartPole ? 500 : 300;
}

inline EnvironmentConfig default_config(EnvId id) {
    return EnvironmentConfig{id, {}, default_episode_cap(id)};
}

// Parameter map with defaults filled in for omitted names.
inline std::map<std::string, double> resolved_params(const EnvironmentConfig& cfg) {
    std::map<std::string, double> out = default_params(cfg.env_id);
    for (const auto& [k, v] : cfg.params) out[k] = v;
    return out;
}

// Configs with the same task and the same effective parameter values are the
// same test environment (this is the equality that deduplicates generated
// environment sets).
inline bool operator==(const EnvironmentConfig& a, const EnvironmentConfig& b) {
    return a.env_id == b.env_id && resolved_params(a) == resolved_params(b);
}
inline bool operator!=(const EnvironmentConfig& a, const EnvironmentConfig& b) {
    return !(a == b);
}

inline void validate_config(const EnvironmentConfig& cfg) {
    const auto& known = default_params(cfg.env_id);
    for (const auto& [k, v] : cfg.params) {
        if (!known.count(k))
            throw ConfigError("unknown parameter '" + k + "' for " +
                              std::string(env_id_name(cfg.env_id)));
        if (!std::isfinite(v) || v <= 0.0)
            throw ConfigError("parameter '" + k + "' must be finite and > 0, got " +
                              format_double(v));
    }
    if (cfg.episode_cap <= 0)
        throw ConfigError("episode_cap must be positive, got " +
                          format_int(cfg.episode_cap));
}

// Copy of `cfg` with the given parameter overrides applied.
inline EnvironmentConfig with_params(const EnvironmentConfig& cfg,
                                     const std::map<std::string, double>& overrides) {
    const auto& known = default_params(cfg.env_id);
    EnvironmentConfig out = cfg;
    for (const auto& [k, v] : overrides) {
        if (!known.count(k))
            throw UsageError("unknown parameter '" + k + "' for " +
                             std::string(env_id_name(cfg.env_id)));
        out.params[k] = v;
    }
    return out;
}

inline int state_dim(EnvId id) { return id == EnvId::CartPole ? 4 : 3; }
inline int action_count(EnvId) { return 2; }

// One transition: the state the agent acted from, the action, the reward,
// the state the environment moved to, and whether the episode ended there.
struct Observation {
    std::vector<double> s_t;
    int a_t = 0;
    double r_t = 0.0;
    std::vector<double> s_next;
    bool terminal = false;
};

struct EpisodeTrace {
    std::vector<Observation> observations;
    double return_undiscounted = 0.0;
};

// Initial state. CartPole draws each component uniformly from ±0.05 using
// the given seed; MiniLander starts deterministically at height 10 with
// zero velocity and a full tank.
inline std::vector<double> reset(const EnvironmentConfig& cfg, std::uint64_t seed) {
    validate_config(cfg);
    if (cfg.env_id == EnvId::CartPole) {
        Rng rng(seed);
        std::vector<double> s(4);
        for (auto& x : s) x = rng.uniform(-0.05, 0.05);
        return s;
    }
    return {10.0, 0.0, 1.0};
}

namespace detail {
constexpr double kPi = 3.14159265358979323846;

inline double lander_contact_reward(double velocity) {
    return std::abs(velocity) > 2.0 ? -100.0 : 100.0 - 50.0 * std::abs(velocity);
}
}  // namespace detail

// One transition as a pure function. `step_count` is the number of steps
// already taken this episode; the cap triggers when step_count+1 reaches it.
inline Observation step(const EnvironmentConfig& cfg, const std::vector<double>& state,
                        int action, int step_count) {
    if (action < 0 || action >= action_count(cfg.env_id))
        throw UsageError("action out of range: " + format_int(action));
    const auto p = resolved_params(cfg);
    Observation obs;
    obs.s_t = state;
    obs.a_t = action;

    if (cfg.env_id == EnvId::CartPole) {
        // Canonical cart-pole constants: gravity 9.8, push force 10 N, pole
        // half-length 0.5 m, Euler step 0.02 s, fail at 12 degrees / 2.4 m.
        constexpr double kGravity = 9.8;
        constexpr double kForceMag = 10.0;
        constexpr double kHalfLength = 0.5;
        constexpr double kTau = 0.02;
        constexpr double kThetaLimit = 12.0 * detail::kPi / 180.0;
        constexpr double kXLimit = 2.4;
        const double cart_mass = p.at("cart_mass");
        const double pole_mass = p.at("pole_mass");
        const double total_mass = cart_mass + pole_mass;
        const double polemass_length = pole_mass * kHalfLength;

        const double x = state[0], x_dot = state[1];
        const double theta = state[2], theta_dot = state[3];
        const double force = action == 1 ? kForceMag : -kForceMag;
        const double costh = std::cos(theta), sinth = std::sin(theta);
        const double temp =
            (force + polemass_length * theta_dot * theta_dot * sinth) / total_mass;
        const double theta_acc =
            (kGravity * sinth - costh * temp) /
            (kHalfLength * (4.0 / 3.0 - pole_mass * costh * costh / total_mass));
        const double x_acc = temp - polemass_length * theta_acc * costh / total_mass;

        const double x2 = x + kTau * x_dot;
        const double x_dot2 = x_dot + kTau * x_acc;
        const double theta2 = theta + kTau * theta_dot;
        const double theta_dot2 = theta_dot + kTau * theta_acc;

        auto failed = [&](double xx, double th) {
            return xx < -kXLimit || xx > kXLimit || th < -kThetaLimit || th > kThetaLimit;
        };
        obs.s_next = {x2, x_dot2, theta2, theta_dot2};
        obs.r_t = 1.0;  // one point per survived step
        obs.terminal = failed(x2, theta2) || failed(x, theta) ||
                       step_count + 1 >= cfg.episode_cap;
        return obs;
    }

    // MiniLander: 1-D descent under gravity with an on/off main engine.
    // State (height, velocity, fuel fraction); thrust burns 1% fuel per step.
    // Contact ends the episode: soft touchdown pays 100 - 50|v|, hitting the
    // ground faster than 2 m/s pays -100; every airborne step costs 0.1.
    constexpr double kTau = 0.05;
    constexpr double kFuelPerStep = 0.01;
    constexpr double kStepCost = -0.1;
    const double gravity = p.at("gravity");
    const double engine_power = p.at("engine_power");

    const double h = state[0], v = state[1], fuel = state[2];
    if (h <= 0.0) {  // already on the ground: settle immediately
        obs.s_next = {0.0, v, fuel};
        obs.r_t = detail::lander_contact_reward(v);
        obs.terminal = true;
        return obs;
    }
    const bool thrust = action == 1 && fuel > 0.0;
    const double acc = -gravity + (thrust ? engine_power : 0.0);
    const double h2 = h + kTau * v;
    const double v2 = v + kTau * acc;
    const double fuel2 = thrust ? std::max(0.0, fuel - kFuelPerStep) : fuel;
    if (h2 <= 0.0) {
        obs.s_next = {0.0, v2, fuel2};
        obs.r_t = detail::lander_contact_reward(v2);
        obs.terminal = true;
    } else {
        obs.s_next = {h2, v2, fuel2};
        obs.r_t = kStepCost;
        obs.terminal = step_count + 1 >= cfg.episode_cap;
    }
    return obs;
}

// Runs one full episode under a deterministic action callback.
inline EpisodeTrace run_episode(const EnvironmentConfig& cfg,
                                const std::function<int(const std::vector<double>&)>& act,
                                std::uint64_t seed) {
    EpisodeTrace trace;
    std::vector<double> s = reset(cfg, seed);
    for (int t = 0; t < cfg.episode_cap; ++t) {
        Observation obs = step(cfg, s, act(s), t);
        trace.return_undiscounted += obs.r_t;
        s = obs.s_next;
        const bool done = obs.terminal;
        trace.observations.push_back(std::move(obs));
        if (done) break;
    }
    return trace;
}

// Content hash of the effective configuration (used for artifact names).
inline std::uint64_t config_hash(const EnvironmentConfig& cfg) {
    std::uint64_t h = fnv1a64(env_id_name(cfg.env_id));
    for (const auto& [k, v] : resolved_params(cfg)) {
        h = fnv1a64(k, h);
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        h = fnv1a64_u64(bits, h);
    }
    return fnv1a64_u64(static_cast<std::uint64_t>(cfg.episode_cap), h);
}

// Short human-readable identifier: the bare task name for the default
// configuration, task#hash8 for anything else.
inline std::string config_label(const EnvironmentConfig& cfg) {
    if (resolved_params(cfg) == default_params(cfg.env_id) &&
        cfg.episode_cap == default_episode_cap(cfg.env_id))
        return std::string(env_id_name(cfg.env_id));
    return std::string(env_id_name(cfg.env_id)) + "#" +
           to_hex(config_hash(cfg)).substr(0, 8);
}

}  // namespace rlmt
