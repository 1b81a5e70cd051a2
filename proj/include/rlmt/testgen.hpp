#pragma once

// Boundary test-environment generation. Starting from the training
// environment E0, a binary search along each parameter axis finds the
// farthest configuration whose healthy-agent reward distribution is still
// statistically indistinguishable from E0 ("the frontier"). A depth loop
// then inserts new frontier points between angularly adjacent ones by
// probing the segment midpoint and, when the midpoint is already
// distinguishable, bisecting radially from E0 toward it.
//
// The search core takes an abstract is-different predicate so it can be
// exercised against scripted oracles; the population-backed predicate
// evaluates the healthy agents and applies a kill criterion.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "rlmt/env.hpp"
#include "rlmt/errors.hpp"
#include "rlmt/stats.hpp"
#include "rlmt/train.hpp"

namespace rlmt {

struct AxisLimits {
    double lower = 0.0;
    double upper = 0.0;
    double precision = 0.0;  // absolute bisection tolerance on this axis
};

struct SearchSpace {
    std::map<std::string, AxisLimits> params;
    int depth = 1;
};

inline void validate_search_space(const SearchSpace& space, const EnvironmentConfig& e0) {
    if (space.depth < 0) throw ConfigError("search depth must be >= 0");
    const auto defaults = resolved_params(e0);
    for (const auto& [name, ax] : space.params) {
        if (!defaults.count(name))
            throw ConfigError("search parameter '" + name + "' unknown for " +
                              std::string(env_id_name(e0.env_id)));
        if (!(ax.lower < ax.upper))
            throw ConfigError("search limits for '" + name + "' must satisfy lower < upper");
        if (!(ax.precision > 0.0))
            throw ConfigError("search precision for '" + name + "' must be > 0");
        const double v = defaults.at(name);
        if (v < ax.lower || v > ax.upper)
            throw ConfigError("initial value of '" + name + "' lies outside its search limits");
    }
}

// Default limits per task; precision defaults to 1% of the range.
inline SearchSpace default_search_space(EnvId env, int depth = 1) {
    SearchSpace space;
    space.depth = depth;
    auto axis = [](double lo, double hi) {
        return AxisLimits{lo, hi, (hi - lo) * 0.01};
    };
    if (env == EnvId::CartPole) {
        space.params["cart_mass"] = axis(0.1, 10.0);
        space.params["pole_mass"] = axis(0.01, 1.0);
    } else {
        space.params["gravity"] = axis(2.0, 25.0);
        space.params["engine_power"] = axis(5.0, 40.0);
    }
    return space;
}

// True when the candidate environment's reward behavior differs from E0's.
using DifferencePredicate = std::function<bool(const EnvironmentConfig&)>;

struct BisectResult {
    EnvironmentConfig config;
    int iterations = 0;  // midpoint probes performed
};

// Binary search along one axis between E0's value and `limit`. Returns the
// farthest not-different configuration within `precision`: the limit itself
// when even the limit is not different, E0 when E0 already sits at the
// limit. Invariant kept throughout: lo not-different, hi different.
inline BisectResult axis_bisect_core(const EnvironmentConfig& e0, const std::string& param,
                                     double limit, double precision,
                                     const DifferencePredicate& different) {
    if (!(precision > 0.0)) throw UsageError("bisection precision must be > 0");
    const double origin = resolved_params(e0).at(param);
    if (origin == limit) return {e0, 0};
    const EnvironmentConfig limit_cfg = with_params(e0, {{param, limit}});
    if (!different(limit_cfg)) return {limit_cfg, 0};
    double lo = origin, hi = limit;
    int iters = 0;
    while (std::abs(hi - lo) > precision) {
        const double mid = 0.5 * (lo + hi);
        ++iters;
        if (different(with_params(e0, {{param, mid}})))
            hi = mid;
        else
            lo = mid;
    }
    return {with_params(e0, {{param, lo}}), iters};
}

struct GeneratedEnv {
    EnvironmentConfig config;
    std::string provenance;    // "initial", "axis:<param>:<side>", "segment:d<depth>:<i>"
    int bisect_iterations = 0;
};

struct TestEnvironmentSet {
    std::vector<GeneratedEnv> envs;  // E0 included exactly once, no duplicates

    std::vector<EnvironmentConfig> configs() const {
        std::vector<EnvironmentConfig> out;
        out.reserve(envs.size());
        for (const auto& e : envs) out.push_back(e.config);
        return out;
    }
};

namespace detail {

// Position of a config relative to E0, normalized per axis by the distance
// to the search limit on that side (so "halfway to the upper limit" is 0.5
// on every axis regardless of raw units).
inline std::pair<double, double> normalized_offset(const EnvironmentConfig& cfg,
                                                   const EnvironmentConfig& e0,
                                                   const SearchSpace& space,
                                                   const std::vector<std::string>& names) {
    const auto pv = resolved_params(cfg);
    const auto dv = resolved_params(e0);
    double coord[2] = {0.0, 0.0};
    for (int i = 0; i < 2; ++i) {
        const auto& ax = space.params.at(names[static_cast<std::size_t>(i)]);
        const double def = dv.at(names[static_cast<std::size_t>(i)]);
        const double delta = pv.at(names[static_cast<std::size_t>(i)]) - def;
        const double scale = delta >= 0.0 ? std::max(ax.upper - def, 1e-300)
                                          : std::max(def - ax.lower, 1e-300);
        coord[i] = delta / scale;
    }
    return {coord[0], coord[1]};
}

// Bisects from E0 toward `target` along the straight segment in parameter
// space; returns the farthest not-different point. Assumes target differs.
inline EnvironmentConfig radial_bisect(const EnvironmentConfig& e0,
                                       const EnvironmentConfig& target,
                                       const SearchSpace& space,
                                       const std::vector<std::string>& names,
                                       const DifferencePredicate& different,
                                       int* iterations) {
    const auto origin = resolved_params(e0);
    const auto end = resolved_params(target);
    auto at = [&](double t) {
        std::map<std::string, double> overrides;
        for (const auto& name : names) {
            const double v = origin.at(name) + t * (end.at(name) - origin.at(name));
            overrides[name] = v;
        }
        return with_params(e0, overrides);
    };
    auto within_precision = [&](double t_lo, double t_hi) {
        for (const auto& name : names) {
            const double span = std::abs((t_hi - t_lo) * (end.at(name) - origin.at(name)));
            if (span > space.params.at(name).precision) return false;
        }
        return true;
    };
    double lo = 0.0, hi = 1.0;
    while (!within_precision(lo, hi)) {
        const double mid = 0.5 * (lo + hi);
        if (iterations) ++*iterations;
        if (different(at(mid)))
            hi = mid;
        else
            lo = mid;
    }
    return at(lo);
}

inline bool params_close(const EnvironmentConfig& a, const EnvironmentConfig& b,
                         const SearchSpace& space) {
    const auto pa = resolved_params(a);
    const auto pb = resolved_params(b);
    for (const auto& [name, ax] : space.params)
        if (std::abs(pa.at(name) - pb.at(name)) > ax.precision) return false;
    return true;
}

}  // namespace detail

// Frontier generation against an abstract difference predicate.
inline TestEnvironmentSet generate_bounds_core(const EnvironmentConfig& e0,
                                               const SearchSpace& space,
                                               const DifferencePredicate& different) {
    validate_config(e0);
    validate_search_space(space, e0);
    if (space.params.size() != 2)
        throw ConfigError("environment generation needs exactly 2 search parameters");
    std::vector<std::string> names;
    for (const auto& [name, ax] : space.params) names.push_back(name);

    std::vector<GeneratedEnv> frontier;
    for (const auto& name : names) {
        const auto& ax = space.params.at(name);
        for (const double limit : {ax.lower, ax.upper}) {
            auto res = axis_bisect_core(e0, name, limit, ax.precision, different);
            const char* side = limit == ax.lower ? "lower" : "upper";
            frontier.push_back({std::move(res.config), "axis:" + name + ":" + side,
                                res.iterations});
        }
    }

    for (int d = 1; d <= space.depth; ++d) {
        // Ring of current non-E0 frontier points, ordered by angle around E0.
        std::vector<const GeneratedEnv*> ring;
        for (const auto& env : frontier)
            if (env.config != e0) ring.push_back(&env);
        std::sort(ring.begin(), ring.end(), [&](const GeneratedEnv* a, const GeneratedEnv* b) {
            const auto ca = detail::normalized_offset(a->config, e0, space, names);
            const auto cb = detail::normalized_offset(b->config, e0, space, names);
            const double aa = std::atan2(ca.second, ca.first);
            const double ab = std::atan2(cb.second, cb.first);
            if (aa != ab) return aa < ab;
            return std::hypot(ca.first, ca.second) < std::hypot(cb.first, cb.second);
        });
        const std::size_t n = ring.size();
        if (n < 2) break;
        const std::size_t pair_count = n == 2 ? 1 : n;
        std::vector<GeneratedEnv> added;
        for (std::size_t j = 0; j < pair_count; ++j) {
            const auto& a = ring[j]->config;
            const auto& b = ring[(j + 1) % n]->config;
            const auto pa = resolved_params(a);
            const auto pb = resolved_params(b);
            std::map<std::string, double> mid_params;
            for (const auto& name : names)
                mid_params[name] = 0.5 * (pa.at(name) + pb.at(name));
            EnvironmentConfig candidate = with_params(e0, mid_params);
            // Skip candidates indistinguishable (within axis precision) from
            // a point we already have.
            bool duplicate = detail::params_close(candidate, e0, space);
            for (const auto& existing : frontier)
                duplicate = duplicate || detail::params_close(candidate, existing.config, space);
            for (const auto& existing : added)
                duplicate = duplicate || detail::params_close(candidate, existing.config, space);
            if (duplicate) continue;
            int iters = 0;
            if (different(candidate))
                candidate = detail::radial_bisect(e0, candidate, space, names, different, &iters);
            added.push_back({std::move(candidate),
                             "segment:d" + format_int(d) + ":" + format_int(static_cast<long long>(j)),
                             iters});
        }
        for (auto& env : added) frontier.push_back(std::move(env));
    }

    TestEnvironmentSet out;
    for (auto& env : frontier) {
        if (env.config == e0) continue;  // degenerate searches collapse into E0
        bool seen = false;
        for (const auto& kept : out.envs) seen = seen || kept.config == env.config;
        if (!seen) out.envs.push_back(std::move(env));
    }
    out.envs.push_back({e0, "initial", 0});
    return out;
}

// Evaluation settings shared by frontier search and kill-matrix building.
struct EvalSpec {
    int episodes = 10;
    std::uint64_t seed_base = 0;  // eval seeds derive from this per agent index
    CriterionParams params;
};

// Evaluates one agent population on environments, caching per config hash.
// Agent i always evaluates with the seed derived for index i, so reward
// samples are paired across populations and environments.
class PopulationEvaluator {
public:
    PopulationEvaluator(const std::vector<TrainedPolicy>* agents, EvalSpec eval)
        : agents_(agents), eval_(eval) {
        if (!agents_ || agents_->empty()) throw UsageError("empty agent population");
    }

    const RewardSample& rewards_on(const EnvironmentConfig& cfg) {
        const std::uint64_t key = config_hash(cfg);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        RewardSample sample;
        for (std::size_t i = 0; i < agents_->size(); ++i)
            sample.per_agent.push_back(evaluate(
                (*agents_)[i], cfg, eval_.episodes,
                derive_seed(eval_.seed_base, "eval", static_cast<std::uint64_t>(i))));
        return cache_.emplace(key, std::move(sample)).first->second;
    }

private:
    const std::vector<TrainedPolicy>* agents_;
    EvalSpec eval_;
    std::map<std::uint64_t, RewardSample> cache_;
};

// Statistical distinguishability of two populations on two environments
// under the R or DtR criterion (the decision the frontier search and the
// kill matrix are built from).
inline bool is_different(const std::vector<TrainedPolicy>& agents_a,
                         const EnvironmentConfig& env_a,
                         const std::vector<TrainedPolicy>& agents_b,
                         const EnvironmentConfig& env_b, Criterion criterion,
                         const EvalSpec& eval) {
    if (criterion == Criterion::AVG)
        throw UsageError("is_different needs a distribution criterion (R or DtR)");
    if (agents_a.empty() || agents_b.empty()) throw UsageError("empty agent population");
    PopulationEvaluator ea(&agents_a, eval), eb(&agents_b, eval);
    const std::uint64_t dtr_seed =
        derive_seed(eval.seed_base, "dtr-diff", config_hash(env_a) ^ (config_hash(env_b) * 3));
    return kill_verdict(criterion, ea.rewards_on(env_a), eb.rewards_on(env_b), eval.params,
                        dtr_seed)
        .killed;
}

// Difference-from-E0 predicate backed by a healthy population (rewards on
// E0 computed once and cached inside the evaluator).
inline DifferencePredicate population_difference_predicate(PopulationEvaluator& evaluator,
                                                           const EnvironmentConfig& e0,
                                                           Criterion criterion,
                                                           const EvalSpec& eval) {
    if (criterion == Criterion::AVG)
        throw UsageError("frontier search needs a distribution criterion (R or DtR)");
    return [&evaluator, e0, criterion, eval](const EnvironmentConfig& candidate) {
        const std::uint64_t dtr_seed =
            derive_seed(eval.seed_base, "dtr-envgen", config_hash(candidate));
        return kill_verdict(criterion, evaluator.rewards_on(e0),
                            evaluator.rewards_on(candidate), eval.params, dtr_seed)
            .killed;
    };
}

// Axis search with a trained population (see axis_bisect_core for the
// search semantics).
inline BisectResult axis_bisect(const std::vector<TrainedPolicy>& agents,
                                const EnvironmentConfig& e0, const std::string& param,
                                double limit, double precision, Criterion criterion,
                                const EvalSpec& eval) {
    PopulationEvaluator evaluator(&agents, eval);
    EvalSpec eval_copy = eval;
    auto predicate = [&](const EnvironmentConfig& candidate) {
        const std::uint64_t dtr_seed =
            derive_seed(eval_copy.seed_base, "dtr-envgen", config_hash(candidate));
        return kill_verdict(criterion, evaluator.rewards_on(e0),
                            evaluator.rewards_on(candidate), eval_copy.params, dtr_seed)
            .killed;
    };
    if (criterion == Criterion::AVG)
        throw UsageError("axis_bisect needs a distribution criterion (R or DtR)");
    return axis_bisect_core(e0, param, limit, precision, predicate);
}

// Full frontier generation with a trained population.
inline TestEnvironmentSet generate_bounds_environments(const std::vector<TrainedPolicy>& agents,
                                                       const EnvironmentConfig& e0,
                                                       const SearchSpace& space,
                                                       Criterion criterion,
                                                       const EvalSpec& eval) {
    if (agents.empty()) throw UsageError("environment generation needs trained agents");
    PopulationEvaluator evaluator(&agents, eval);
    return generate_bounds_core(e0, space,
                                population_difference_predicate(evaluator, e0, criterion, eval));
}

}  // namespace rlmt
