#include "rlmt/env.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace rlmt {
namespace {

TEST(EnvConfig, DefaultsAndResolution) {
    const auto cp = default_config(EnvId::CartPole);
    EXPECT_EQ(cp.episode_cap, 500);
    const auto params = resolved_params(cp);
    EXPECT_DOUBLE_EQ(params.at("cart_mass"), 1.0);
    EXPECT_DOUBLE_EQ(params.at("pole_mass"), 0.1);

    const auto ml = default_config(EnvId::MiniLander);
    EXPECT_EQ(ml.episode_cap, 300);
    EXPECT_DOUBLE_EQ(resolved_params(ml).at("gravity"), 9.8);
    EXPECT_DOUBLE_EQ(resolved_params(ml).at("engine_power"), 15.0);

    EXPECT_EQ(state_dim(EnvId::CartPole), 4);
    EXPECT_EQ(state_dim(EnvId::MiniLander), 3);
    EXPECT_EQ(action_count(EnvId::CartPole), 2);
}

TEST(EnvConfig, EqualityOnResolvedParamsIgnoresCap) {
    EnvironmentConfig a = default_config(EnvId::CartPole);
    EnvironmentConfig b = default_config(EnvId::CartPole);
    b.params["cart_mass"] = 1.0;  // explicit default == implicit default
    EXPECT_EQ(a, b);
    b.episode_cap = 100;
    EXPECT_EQ(a, b);  // cap is a harness knob, not part of the dynamics
    b.params["cart_mass"] = 2.0;
    EXPECT_NE(a, b);
    EXPECT_NE(a, default_config(EnvId::MiniLander));
}

TEST(EnvConfig, ValidationErrors) {
    EnvironmentConfig cfg = default_config(EnvId::CartPole);
    cfg.params["bogus"] = 1.0;
    EXPECT_THROW(validate_config(cfg), ConfigError);
    cfg.params.erase("bogus");
    cfg.params["cart_mass"] = -1.0;
    EXPECT_THROW(validate_config(cfg), ConfigError);
    cfg.params["cart_mass"] = 1.0;
    cfg.episode_cap = 0;
    EXPECT_THROW(validate_config(cfg), ConfigError);
}

TEST(EnvConfig, WithParams) {
    const auto cfg = default_config(EnvId::CartPole);
    const auto heavier = with_params(cfg, {{"cart_mass", 3.5}});
    EXPECT_DOUBLE_EQ(resolved_params(heavier).at("cart_mass"), 3.5);
    EXPECT_DOUBLE_EQ(resolved_params(heavier).at("pole_mass"), 0.1);
    EXPECT_THROW(with_params(cfg, {{"gravity", 9.8}}), UsageError);
}

TEST(EnvConfig, HashAndLabel) {
    const auto cfg = default_config(EnvId::CartPole);
    EXPECT_EQ(config_label(cfg), "CartPole");
    const auto variant = with_params(cfg, {{"pole_mass", 0.2}});
    EXPECT_NE(config_hash(cfg), config_hash(variant));
    EXPECT_NE(config_label(variant).find("CartPole#"), std::string::npos);
    EXPECT_EQ(config_hash(cfg), config_hash(default_config(EnvId::CartPole)));
}

TEST(EnvReset, CartPoleBoundsAndDeterminism) {
    const auto cfg = default_config(EnvId::CartPole);
    const auto s = reset(cfg, 123);
    ASSERT_EQ(s.size(), 4u);
    for (double x : s) {
        EXPECT_GE(x, -0.05);
        EXPECT_LT(x, 0.05);
    }
    EXPECT_EQ(reset(cfg, 123), s);
    EXPECT_NE(reset(cfg, 124), s);
}

TEST(EnvReset, MiniLanderFixedStart) {
    const auto s = reset(default_config(EnvId::MiniLander), 99);
    ASSERT_EQ(s.size(), 3u);
    EXPECT_DOUBLE_EQ(s[0], 10.0);
    EXPECT_DOUBLE_EQ(s[1], 0.0);
    EXPECT_DOUBLE_EQ(s[2], 1.0);
}

TEST(EnvReset, InvalidConfigRejected) {
    EnvironmentConfig cfg = default_config(EnvId::CartPole);
    cfg.params["cart_mass"] = 0.0;
    EXPECT_THROW(reset(cfg, 1), ConfigError);
}

// Hand-derived dynamics from the upright rest state, push right:
//   temp      = 10 / 1.1
//   theta_acc = -temp / (0.5 * (4/3 - 0.1/1.1)) = -600/41
//   x_acc     = temp + 0.05 * (600/41) / 1.1    =  400/41
// One Euler step (tau = 0.02) moves only the velocities.
TEST(EnvStep, CartPoleEulerOracle) {
    const auto cfg = default_config(EnvId::CartPole);
    const std::vector<double> s{0.0, 0.0, 0.0, 0.0};
    const Observation obs = step(cfg, s, 1, 0);
    ASSERT_EQ(obs.s_next.size(), 4u);
    EXPECT_NEAR(obs.s_next[0], 0.0, 1e-15);
    EXPECT_NEAR(obs.s_next[1], 8.0 / 41.0, 1e-15);
    EXPECT_NEAR(obs.s_next[2], 0.0, 1e-15);
    EXPECT_NEAR(obs.s_next[3], -12.0 / 41.0, 1e-15);
    EXPECT_DOUBLE_EQ(obs.r_t, 1.0);
    EXPECT_FALSE(obs.terminal);
    EXPECT_EQ(obs.a_t, 1);
    EXPECT_EQ(obs.s_t, s);

    // Push left mirrors the accelerations.
    const Observation left = step(cfg, s, 0, 0);
    EXPECT_NEAR(left.s_next[1], -8.0 / 41.0, 1e-15);
    EXPECT_NEAR(left.s_next[3], 12.0 / 41.0, 1e-15);
}

TEST(EnvStep, PureFunction) {
    const auto cfg = default_config(EnvId::CartPole);
    const std::vector<double> s{0.01, -0.02, 0.03, -0.04};
    const Observation a = step(cfg, s, 1, 7);
    const Observation b = step(cfg, s, 1, 7);
    EXPECT_EQ(a.s_next, b.s_next);
    EXPECT_EQ(a.r_t, b.r_t);
    EXPECT_EQ(a.terminal, b.terminal);
}

TEST(EnvStep, CartPoleTerminalConditions) {
    const auto cfg = default_config(EnvId::CartPole);
    // Input state already out of bounds -> terminal.
    EXPECT_TRUE(step(cfg, {2.5, 0.0, 0.0, 0.0}, 0, 0).terminal);
    EXPECT_TRUE(step(cfg, {0.0, 0.0, 0.3, 0.0}, 0, 0).terminal);
    // Episode cap: step_count + 1 reaches the cap.
    EXPECT_TRUE(step(cfg, {0.0, 0.0, 0.0, 0.0}, 0, cfg.episode_cap - 1).terminal);
    EXPECT_FALSE(step(cfg, {0.0, 0.0, 0.0, 0.0}, 0, cfg.episode_cap - 2).terminal);
    // Bad action values are rejected.
    EXPECT_THROW(step(cfg, {0.0, 0.0, 0.0, 0.0}, 2, 0), UsageError);
    EXPECT_THROW(step(cfg, {0.0, 0.0, 0.0, 0.0}, -1, 0), UsageError);
}

TEST(EnvStep, MiniLanderImmediateContact) {
    const auto cfg = default_config(EnvId::MiniLander);
    const Observation obs = step(cfg, {0.0, -0.5, 0.7}, 0, 3);
    EXPECT_TRUE(obs.terminal);
    EXPECT_DOUBLE_EQ(obs.r_t, 100.0 - 50.0 * 0.5);  // soft touchdown at 0.5 m/s
    EXPECT_DOUBLE_EQ(obs.s_next[0], 0.0);
}

TEST(EnvStep, MiniLanderThrustAndFuel) {
    const auto cfg = default_config(EnvId::MiniLander);
    const Observation obs = step(cfg, {10.0, 0.0, 1.0}, 1, 0);
    EXPECT_DOUBLE_EQ(obs.s_next[0], 10.0);                      // h += tau * old v
    EXPECT_NEAR(obs.s_next[1], 0.05 * (-9.8 + 15.0), 1e-12);    // v += tau * acc
    EXPECT_NEAR(obs.s_next[2], 0.99, 1e-12);                    // 1% fuel per thrust step
    EXPECT_DOUBLE_EQ(obs.r_t, -0.1);
    EXPECT_FALSE(obs.terminal);

    // Empty tank: the engine does nothing and the fuel stays at zero.
    const Observation dry = step(cfg, {10.0, 0.0, 0.0}, 1, 0);
    EXPECT_NEAR(dry.s_next[1], -0.49, 1e-12);
    EXPECT_DOUBLE_EQ(dry.s_next[2], 0.0);
}

TEST(EnvStep, MiniLanderLandingAndCrash) {
    const auto cfg = default_config(EnvId::MiniLander);
    // Gentle contact within this step.
    const Observation land = step(cfg, {0.01, -1.0, 0.5}, 0, 0);
    EXPECT_TRUE(land.terminal);
    EXPECT_DOUBLE_EQ(land.s_next[0], 0.0);
    EXPECT_NEAR(land.s_next[1], -1.49, 1e-12);
    EXPECT_NEAR(land.r_t, 100.0 - 50.0 * 1.49, 1e-9);
    // Fast contact -> crash penalty.
    const Observation crash = step(cfg, {0.1, -3.0, 0.5}, 0, 0);
    EXPECT_TRUE(crash.terminal);
    EXPECT_DOUBLE_EQ(crash.r_t, -100.0);
}

TEST(EnvEpisode, RunEpisodeAccumulatesAndTerminates) {
    const auto cfg = default_config(EnvId::CartPole);
    const auto trace = run_episode(cfg, [](const std::vector<double>&) { return 0; }, 11);
    ASSERT_FALSE(trace.observations.empty());
    EXPECT_TRUE(trace.observations.back().terminal);
    double total = 0.0;
    for (const auto& obs : trace.observations) total += obs.r_t;
    EXPECT_DOUBLE_EQ(trace.return_undiscounted, total);
    // Constantly pushing one way fails quickly.
    EXPECT_LT(trace.observations.size(), 300u);

    const auto again = run_episode(cfg, [](const std::vector<double>&) { return 0; }, 11);
    EXPECT_EQ(again.return_undiscounted, trace.return_undiscounted);
    EXPECT_EQ(again.observations.size(), trace.observations.size());
}

TEST(EnvEpisode, CapBoundsLength) {
    EnvironmentConfig cfg = default_config(EnvId::MiniLander);
    cfg.episode_cap = 5;
    // Full throttle keeps the lander airborne, so the cap triggers.
    const auto trace = run_episode(cfg, [](const std::vector<double>&) { return 1; }, 1);
    EXPECT_EQ(trace.observations.size(), 5u);
    EXPECT_TRUE(trace.observations.back().terminal);
}

}  // namespace
}  // namespace rlmt
