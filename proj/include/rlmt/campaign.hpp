#pragma once

// Campaign orchestration: configuration + profiles, seeded population
// training with content-addressed caching, test-environment generation,
// kill matrices per criterion, the HOM pipeline and report export.
//
// Everything is resumable: completed training runs are skipped by content
// hash, generated environment sets and reward CSVs are reloaded from the
// output directory, and all artifacts are written atomically
// (write-temp-then-rename). Two runs from the same config and seed base
// produce byte-identical reports.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "rlmt/agents.hpp"
#include "rlmt/env.hpp"
#include "rlmt/errors.hpp"
#include "rlmt/hom.hpp"
#include "rlmt/json_io.hpp"
#include "rlmt/mutation.hpp"
#include "rlmt/report.hpp"
#include "rlmt/rng.hpp"
#include "rlmt/stats.hpp"
#include "rlmt/testgen.hpp"
#include "rlmt/text.hpp"
#include "rlmt/train.hpp"

namespace rlmt {

enum class Profile { Smoke, Desk, Full };

inline std::string_view profile_name(Profile p) {
    switch (p) {
        case Profile::Smoke: return "smoke";
        case Profile::Desk: return "desk";
        default: return "full";
    }
}

inline Profile parse_profile(std::string_view s) {
    if (s == "smoke") return Profile::Smoke;
    if (s == "desk") return Profile::Desk;
    if (s == "full") return Profile::Full;
    throw UsageError("unknown profile '" + std::string(s) + "' (expected smoke, desk or full)");
}

// Pipeline stages in dependency order; each stage implies the previous ones
// (served from cache when already complete).
enum class Stage { Train, GenEnvs, Kill, Hom, Report };

inline bool stage_at_least(Stage s, Stage at) {
    return static_cast<int>(s) >= static_cast<int>(at);
}

struct CampaignConfig {
    std::vector<EnvironmentConfig> environments;
    std::vector<AlgoId> algorithms;
    std::vector<std::string> mutations;  // operator grammar, canonicalized on validate
    int agents_per_population = 20;
    int eval_episodes = 10;
    std::vector<Criterion> criteria{Criterion::AVG, Criterion::R, Criterion::DtR};
    int search_depth = 1;
    std::map<std::string, SearchSpace> search_spaces;  // explicit per env family (optional)
    std::uint64_t seed_base = 1;
    std::filesystem::path out_dir = "out";
    AvgParams avg;
    DtrParams dtr;
    // Spec-field overrides applied on top of per-algorithm defaults; key "*"
    // applies to every algorithm, a specific algorithm name wins over "*".
    std::map<std::string, Json> algo_overrides;
    int parallelism = 1;  // not part of the campaign identity
};

inline void validate_campaign_config(CampaignConfig& cfg) {
    if (cfg.environments.empty()) throw ConfigError("campaign needs at least one environment");
    for (auto& env : cfg.environments) validate_config(env);
    if (cfg.algorithms.empty()) throw ConfigError("campaign needs at least one algorithm");
    for (std::size_t i = 0; i < cfg.algorithms.size(); ++i)
        for (std::size_t j = i + 1; j < cfg.algorithms.size(); ++j)
            if (cfg.algorithms[i] == cfg.algorithms[j])
                throw ConfigError("duplicate algorithm in campaign config");
    if (cfg.agents_per_population < 2)
        throw ConfigError("agents_per_population must be >= 2 (statistics need two samples)");
    if (cfg.eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
    if (cfg.criteria.empty()) throw ConfigError("campaign needs at least one criterion");
    for (std::size_t i = 0; i < cfg.criteria.size(); ++i)
        for (std::size_t j = i + 1; j < cfg.criteria.size(); ++j)
            if (cfg.criteria[i] == cfg.criteria[j])
                throw ConfigError("duplicate criterion in campaign config");
    if (cfg.search_depth < 0) throw ConfigError("search_depth must be >= 0");
    if (!(cfg.avg.theta > 0.0)) throw ConfigError("avg.theta must be positive");
    if (!(cfg.avg.fraction > 0.0 && cfg.avg.fraction <= 1.0))
        throw ConfigError("avg.fraction must be in (0, 1]");
    if (cfg.dtr.subset_size < 1 || cfg.dtr.resamples < 1 || cfg.dtr.bins < 1)
        throw ConfigError("dtr parameters must be >= 1");
    for (const auto& [name, space] : cfg.search_spaces) {
        parse_env_id(name);  // unknown family -> ConfigError via ParseError? normalize below
        if (space.params.empty()) throw ConfigError("search space for " + name + " is empty");
    }
    // Canonicalize mutation strings and reject duplicates.
    std::vector<std::string> canonical;
    for (const auto& text : cfg.mutations) {
        const std::string c = render_mutation(parse_mutation_string(text));
        for (const auto& prev : canonical)
            if (prev == c) throw ConfigError("duplicate mutation '" + c + "' in campaign config");
        canonical.push_back(c);
    }
    cfg.mutations = std::move(canonical);
}

// ---------------------------------------------------------------------------
// config (de)serialization

inline Json to_json(const SearchSpace& space) {
    Json params = Json::object();
    for (const auto& [name, ax] : space.params)
        params[name] = Json{{"lower", ax.lower}, {"upper", ax.upper}, {"precision", ax.precision}};
    return Json{{"depth", space.depth}, {"params", std::move(params)}};
}

inline SearchSpace search_space_from_json(const Json& j, int default_depth) {
    SearchSpace space;
    space.depth = default_depth;
    const Json* params = &j;
    if (j.is_object() && j.contains("params")) {
        space.depth = j.value("depth", default_depth);
        params = &j.at("params");
    }
    for (const auto& [name, ax] : params->items()) {
        AxisLimits limits;
        if (ax.is_array()) {
            if (ax.size() < 2 || ax.size() > 3) throw ParseError("axis '" + name + "' needs [lower, upper] or [lower, upper, precision]");
            limits.lower = ax.at(0).get<double>();
            limits.upper = ax.at(1).get<double>();
            limits.precision = ax.size() == 3 ? ax.at(2).get<double>()
                                             : (limits.upper - limits.lower) * 0.01;
        } else {
            limits.lower = ax.at("lower").get<double>();
            limits.upper = ax.at("upper").get<double>();
            limits.precision = ax.contains("precision") ? ax.at("precision").get<double>()
                                                        : (limits.upper - limits.lower) * 0.01;
        }
        space.params[name] = limits;
    }
    return space;
}

// Canonical identity of a campaign (excludes out_dir and parallelism: they
// do not change any computed number).
inline Json campaign_identity_json(const CampaignConfig& cfg) {
    Json envs = Json::array();
    for (const auto& e : cfg.environments) envs.push_back(to_json(e));
    Json algos = Json::array();
    for (AlgoId a : cfg.algorithms) algos.push_back(algo_name(a));
    Json criteria = Json::array();
    for (Criterion c : cfg.criteria) criteria.push_back(criterion_name(c));
    Json spaces = Json::object();
    for (const auto& [name, space] : cfg.search_spaces) spaces[name] = to_json(space);
    Json overrides = Json::object();
    for (const auto& [name, ov] : cfg.algo_overrides) overrides[name] = ov;
    return Json{{"environments", std::move(envs)},
                {"algorithms", std::move(algos)},
                {"mutations", cfg.mutations},
                {"agents_per_population", cfg.agents_per_population},
                {"eval_episodes", cfg.eval_episodes},
                {"criteria", std::move(criteria)},
                {"search_depth", cfg.search_depth},
                {"search_spaces", std::move(spaces)},
                {"seed_base_hex", to_hex(cfg.seed_base)},
                {"avg", Json{{"theta", cfg.avg.theta}, {"fraction", cfg.avg.fraction}}},
                {"dtr", Json{{"subset_size", cfg.dtr.subset_size},
                             {"resamples", cfg.dtr.resamples},
                             {"bins", cfg.dtr.bins}}},
                {"algo_overrides", std::move(overrides)}};
}

inline std::uint64_t campaign_config_hash(const CampaignConfig& cfg) {
    return fnv1a64(campaign_identity_json(cfg).dump());
}

namespace detail {
inline void apply_profile(CampaignConfig& cfg, Profile profile) {
    switch (profile) {
        case Profile::Smoke:
            cfg.agents_per_population = 5;
            cfg.eval_episodes = 5;
            // Short budgets: the smoke profile checks plumbing and
            // determinism, not agent quality.
            cfg.algo_overrides["*"] = Json{{"training_budget", 4000},
                                           {"epsilon_decay_steps", 2500},
                                           {"warmup_steps", 200},
                                           {"target_sync_interval", 250},
                                           {"probe_interval", 1500}};
            break;
        case Profile::Desk: cfg.agents_per_population = 10; break;
        case Profile::Full: cfg.agents_per_population = 20; break;
    }
}
}  // namespace detail

// Builds a config from defaults -> profile -> file fields (file wins).
inline CampaignConfig campaign_config_from_json(const Json& j, Profile profile = Profile::Desk) {
    if (!j.is_object()) throw ParseError("campaign config must be a JSON object");
    CampaignConfig cfg;
    detail::apply_profile(cfg, profile);
    if (j.contains("environments")) {
        cfg.environments.clear();
        for (const auto& item : j.at("environments")) {
            if (item.is_string())
                cfg.environments.push_back(default_config(parse_env_id(item.get<std::string>())));
            else
                cfg.environments.push_back(config_from_json(item));
        }
    }
    if (j.contains("algorithms")) {
        cfg.algorithms.clear();
        for (const auto& item : j.at("algorithms"))
            cfg.algorithms.push_back(parse_algo(item.get<std::string>()));
    }
    if (j.contains("mutations")) cfg.mutations = j.at("mutations").get<std::vector<std::string>>();
    if (j.contains("agents_per_population"))
        cfg.agents_per_population = j.at("agents_per_population").get<int>();
    if (j.contains("eval_episodes")) cfg.eval_episodes = j.at("eval_episodes").get<int>();
    if (j.contains("criteria")) {
        cfg.criteria.clear();
        for (const auto& item : j.at("criteria"))
            cfg.criteria.push_back(parse_criterion(item.get<std::string>()));
    }
    if (j.contains("search_depth")) cfg.search_depth = j.at("search_depth").get<int>();
    if (j.contains("search_spaces")) {
        for (const auto& [name, space] : j.at("search_spaces").items())
            cfg.search_spaces[name] = search_space_from_json(space, cfg.search_depth);
    }
    if (j.contains("seed_base")) cfg.seed_base = j.at("seed_base").get<std::uint64_t>();
    if (j.contains("seed_base_hex"))
        cfg.seed_base = parse_hex_u64(j.at("seed_base_hex").get<std::string>());
    if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("avg")) {
        cfg.avg.theta = j.at("avg").value("theta", cfg.avg.theta);
        cfg.avg.fraction = j.at("avg").value("fraction", cfg.avg.fraction);
    }
    if (j.contains("dtr")) {
        cfg.dtr.subset_size = j.at("dtr").value("subset_size", cfg.dtr.subset_size);
        cfg.dtr.resamples = j.at("dtr").value("resamples", cfg.dtr.resamples);
        cfg.dtr.bins = j.at("dtr").value("bins", cfg.dtr.bins);
    }
    if (j.contains("algo_overrides")) {
        for (const auto& [name, ov] : j.at("algo_overrides").items()) {
            if (!ov.is_object()) throw ParseError("algo_overrides entries must be objects");
            auto it = cfg.algo_overrides.find(name);
            if (it == cfg.algo_overrides.end())
                cfg.algo_overrides[name] = ov;
            else
                it->second.update(ov);
        }
    }
    validate_campaign_config(cfg);
    return cfg;
}

inline CampaignConfig load_campaign_config(const std::filesystem::path& path,
                                           Profile profile = Profile::Desk) {
    return campaign_config_from_json(load_json_file(path), profile);
}

// Built-in smoke campaign: CartPole / QNet / {ILF, RN_1.0}, N = 5.
inline CampaignConfig smoke_campaign_config(std::filesystem::path out_dir,
                                            std::uint64_t seed_base = 1) {
    Json j{{"environments", Json::array({"CartPole"})},
           {"algorithms", Json::array({"QNet"})},
           {"mutations", Json::array({"ILF", "RN_1.0"})}};
    CampaignConfig cfg = campaign_config_from_json(j, Profile::Smoke);
    cfg.out_dir = std::move(out_dir);
    cfg.seed_base = seed_base;
    return cfg;
}

// Per-algorithm base spec: defaults for the environment family with the
// config's overrides merged in ("*" first, then the algorithm's own).
inline AlgoSpec effective_base_spec(const CampaignConfig& cfg, AlgoId algo, EnvId env) {
    Json j = to_json(algo_defaults(algo, env));
    auto star = cfg.algo_overrides.find("*");
    if (star != cfg.algo_overrides.end()) j.update(star->second);
    auto own = cfg.algo_overrides.find(std::string(algo_name(algo)));
    if (own != cfg.algo_overrides.end()) j.update(own->second);
    return spec_from_json(j);
}

// DtR subsets draw 2*subset_size healthy agents without replacement, so the
// effective subset size is clamped to half the population.
inline CriterionParams campaign_criterion_params(const CampaignConfig& cfg) {
    CriterionParams params;
    params.avg = cfg.avg;
    params.dtr = cfg.dtr;
    params.dtr.subset_size =
        std::max(1, std::min(cfg.dtr.subset_size, cfg.agents_per_population / 2));
    return params;
}

// Stable per-agent training seed: hash chain over (base, env family,
// algorithm, mutation string, agent index).
inline std::uint64_t agent_training_seed(const CampaignConfig& cfg, const EnvironmentConfig& env,
                                         AlgoId algo, const std::string& mutation,
                                         std::uint64_t index) {
    std::uint64_t h = derive_seed(cfg.seed_base, "run");
    h = derive_seed(h, env_id_name(env.env_id));
    h = derive_seed(h, algo_name(algo));
    h = derive_seed(h, mutation);
    return derive_seed(h, "agent", index);
}

namespace detail {

// Runs every task (k workers), then rethrows the first failure by task
// index so error reporting is deterministic regardless of scheduling.
inline void run_parallel(const std::vector<std::function<void()>>& tasks, int k) {
    std::vector<std::exception_ptr> errors(tasks.size());
    if (k <= 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            try {
                tasks[i]();
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= tasks.size()) return;
                try {
                    tasks[i]();
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        };
        std::vector<std::thread> threads;
        const int n = std::min<int>(k, static_cast<int>(tasks.size()));
        threads.reserve(static_cast<std::size_t>(n));
        for (int t = 0; t < n; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace detail

class Campaign {
public:
    explicit Campaign(CampaignConfig cfg) : cfg_(std::move(cfg)) {
        validate_campaign_config(cfg_);
    }

    const CampaignConfig& config() const { return cfg_; }

    // Runs the pipeline through `upto` (cached stages are reused), writes
    // artifacts under out_dir and returns the accumulated results. `only`
    // restricts the criterion-dependent stages to a single criterion.
    CampaignResults run(Stage upto, std::optional<Criterion> only = {}) {
        prepare_out();
        CampaignResults results;
        results.config_json = campaign_identity_json(cfg_);
        const CriterionParams params = campaign_criterion_params(cfg_);
        for (const auto& env : cfg_.environments) {
            const std::string env_label = config_label(env);
            for (AlgoId algo : cfg_.algorithms) {
                const std::string algo_label(algo_name(algo));
                const PopRef healthy_ref{env, algo, "healthy"};
                Population& healthy = ensure_population(healthy_ref);
                if (!healthy.ok()) {
                    results.gaps.push_back({env_label, algo_label, "healthy", healthy.gap_reason});
                    continue;
                }
                {
                    const auto pooled = rewards_on(healthy_ref, env).pooled();
                    results.healthy.push_back(
                        {env_label, algo_label, mean(pooled), sample_sd(pooled)});
                }
                for (const auto& mut : cfg_.mutations) {
                    Population& p = ensure_population({env, algo, mut});
                    if (!p.ok()) results.gaps.push_back({env_label, algo_label, mut, p.gap_reason});
                    else if (stage_at_least(upto, Stage::Train)) rewards_on({env, algo, mut}, env);
                }
                if (!stage_at_least(upto, Stage::GenEnvs)) continue;

                const AlgoSpec base_spec = effective_base_spec(cfg_, algo, env.env_id);
                for (Criterion criterion : cfg_.criteria) {
                    if (only && criterion != *only) continue;
                    TestEnvironmentSet env_set;
                    if (criterion == Criterion::AVG) {
                        // AVG compares agent-paired means; frontier search is
                        // distribution-based, so AVG runs on the initial
                        // environment only.
                        env_set.envs.push_back({env, "initial", 0});
                    } else {
                        env_set = ensure_env_set(healthy_ref, criterion, params);
                    }
                    if (!stage_at_least(upto, Stage::Kill)) continue;

                    const auto columns = env_set.configs();
                    std::vector<RewardSample> healthy_per_env;
                    for (const auto& col : columns)
                        healthy_per_env.push_back(rewards_on(healthy_ref, col));
                    std::vector<MatrixRowInput> rows;
                    for (const auto& mut : cfg_.mutations) {
                        MatrixRowInput row{parse_mutation_string(mut), std::nullopt};
                        const PopRef ref{env, algo, mut};
                        if (pops_.at(pop_key(ref)).ok()) {
                            std::vector<RewardSample> per_env;
                            for (const auto& col : columns)
                                per_env.push_back(rewards_on(ref, col));
                            row.rewards_per_env = std::move(per_env);
                        }
                        rows.push_back(std::move(row));
                    }
                    KillMatrix matrix = build_kill_matrix_from_rewards(
                        healthy_per_env, rows, columns, criterion, params, cfg_.seed_base);

                    // Initial-environment column -> Table-III style rows.
                    std::size_t e0_col = columns.size();
                    for (std::size_t c = 0; c < columns.size(); ++c)
                        if (columns[c] == env) e0_col = c;
                    if (e0_col < columns.size())
                        for (std::size_t r = 0; r < matrix.rows.size(); ++r)
                            results.initial.push_back({env_label, algo_label, matrix.row_labels[r],
                                                       criterion, matrix.cells[r][e0_col]});

                    MatrixEntry entry{env_label, algo_label, matrix, env_set, {}};
                    const auto nontrivial = select_nontrivial_foms(matrix);
                    for (const auto& fom : nontrivial)
                        entry.nontrivial.push_back(render_mutation(fom));
                    results.matrices.push_back(std::move(entry));

                    if (!stage_at_least(upto, Stage::Hom) || criterion == Criterion::AVG) continue;
                    auto train_hom = [&](const MutationSpec& hom) {
                        const PopRef ref{env, algo, render_mutation(hom)};
                        Population& pop = ensure_population(ref);
                        if (!pop.ok())
                            throw TrainingError("HOM population unavailable: " + pop.gap_reason);
                        std::vector<RewardSample> per_env;
                        for (const auto& col : columns) per_env.push_back(rewards_on(ref, col));
                        return per_env;
                    };
                    try {
                        HomResult hom = hom_pipeline(nontrivial, base_spec, matrix, healthy_per_env,
                                                     train_hom, params, cfg_.seed_base);
                        results.homs.push_back({env_label, algo_label, criterion, std::move(hom)});
                    } catch (const std::runtime_error& e) {
                        results.gaps.push_back(
                            {env_label, algo_label,
                             std::string("hom:") + std::string(criterion_cli_name(criterion)),
                             e.what()});
                    }
                }
            }
        }
        if (stage_at_least(upto, Stage::Report)) {
            const auto report_dir = cfg_.out_dir / "report";
            export_report(results, ReportFormat::Csv, report_dir);
            export_report(results, ReportFormat::Json, report_dir);
            export_report(results, ReportFormat::Markdown, report_dir);
        }
        return results;
    }

private:
    struct PopRef {
        EnvironmentConfig train_env;
        AlgoId algo = AlgoId::QNet;
        std::string mutation;  // "healthy" or a canonical mutation string
    };

    struct Population {
        std::vector<TrainedPolicy> agents;
        std::vector<std::string> run_ids;
        std::vector<std::uint64_t> seeds;
        std::string gap_reason;  // non-empty -> population unavailable
        std::map<std::uint64_t, RewardSample> rewards;  // by eval-env config hash

        bool ok() const { return gap_reason.empty(); }
    };

    CampaignConfig cfg_;
    std::map<std::string, Population> pops_;

    std::string pop_key(const PopRef& ref) const {
        return config_label(ref.train_env) + "|" + std::string(algo_name(ref.algo)) + "|" +
               ref.mutation;
    }

    std::filesystem::path rewards_dir(const PopRef& ref) const {
        return cfg_.out_dir / "rewards" / config_label(ref.train_env) /
               std::string(algo_name(ref.algo)) / ref.mutation;
    }

    void prepare_out() {
        namespace fs = std::filesystem;
        fs::create_directories(cfg_.out_dir);
        for (const char* sub : {"policies", "rewards", "envs", "runs", "report"})
            fs::create_directories(cfg_.out_dir / sub);
        const auto path = cfg_.out_dir / "campaign.json";
        const Json identity = campaign_identity_json(cfg_);
        Json manifest{{"config", identity}, {"config_hash", to_hex(campaign_config_hash(cfg_))}};
        if (fs::exists(path)) {
            const Json existing = load_json_file(path);
            if (existing.value("config", Json()) != identity)
                throw UsageError("output directory " + cfg_.out_dir.string() +
                                 " belongs to a different campaign configuration; "
                                 "use a fresh --out directory");
            return;
        }
        write_text_file_atomic(path, manifest.dump(2) + "\n");
    }

    Population& ensure_population(const PopRef& ref) {
        const std::string key = pop_key(ref);
        auto it = pops_.find(key);
        if (it != pops_.end()) return it->second;

        Population pop;
        const AlgoSpec base = effective_base_spec(cfg_, ref.algo, ref.train_env.env_id);
        std::optional<MutationSpec> mutation;
        AlgoSpec effective = base;
        if (ref.mutation != "healthy") {
            mutation = parse_mutation_string(ref.mutation);
            try {
                check_compatible(*mutation, base);
                effective = apply_spec_mutations(*mutation, base);
            } catch (const std::runtime_error& e) {
                pop.gap_reason = e.what();
                return pops_.emplace(key, std::move(pop)).first->second;
            }
        }

        const int n = cfg_.agents_per_population;
        pop.agents.resize(static_cast<std::size_t>(n));
        pop.run_ids.resize(static_cast<std::size_t>(n));
        pop.seeds.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            pop.seeds[i] = agent_training_seed(cfg_, ref.train_env, ref.algo, ref.mutation,
                                               static_cast<std::uint64_t>(i));
            pop.run_ids[i] = to_hex(
                run_fingerprint(ref.train_env, effective, ref.mutation, pop.seeds[i]));
        }
        std::vector<std::function<void()>> tasks;
        for (int i = 0; i < n; ++i) {
            tasks.push_back([this, &pop, &ref, &base, &mutation, i] {
                const auto path = cfg_.out_dir / "policies" / (pop.run_ids[i] + ".json");
                if (std::filesystem::exists(path)) {
                    pop.agents[i] = load_policy(path);
                    return;
                }
                const auto t0 = std::chrono::steady_clock::now();
                pop.agents[i] = train(base, ref.train_env, mutation ? &*mutation : nullptr,
                                      pop.seeds[i]);
                save_policy(pop.agents[i], path);
                const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                    std::chrono::steady_clock::now() - t0)
                                    .count();
                write_run_record(pop.run_ids[i], ref, path, ms);
            });
        }
        try {
            detail::run_parallel(tasks, cfg_.parallelism);
        } catch (const std::runtime_error& e) {
            pop.gap_reason = std::string("training failed: ") + e.what();
            pop.agents.clear();
        }
        return pops_.emplace(key, std::move(pop)).first->second;
    }

    // Timing lives only under runs/ so the report tree stays byte-stable.
    void write_run_record(const std::string& run_id, const PopRef& ref,
                          const std::filesystem::path& policy_path, long long ms) {
        Json record{{"run_id", run_id},
                    {"status", "completed"},
                    {"environment", config_label(ref.train_env)},
                    {"algorithm", algo_name(ref.algo)},
                    {"mutation", ref.mutation},
                    {"policy_path", policy_path.string()},
                    {"rewards_dir", rewards_dir(ref).string()},
                    {"training_ms", ms}};
        write_text_file_atomic(cfg_.out_dir / "runs" / (run_id + ".json"),
                               record.dump(2) + "\n");
    }

    const RewardSample& rewards_on(const PopRef& ref, const EnvironmentConfig& eval_env) {
        Population& pop = pops_.at(pop_key(ref));
        if (!pop.ok()) throw UsageError("population unavailable: " + pop.gap_reason);
        const std::uint64_t key = config_hash(eval_env);
        auto it = pop.rewards.find(key);
        if (it != pop.rewards.end()) return it->second;

        const auto path = rewards_dir(ref) / (to_hex(key) + ".csv");
        RewardSample sample;
        if (std::filesystem::exists(path)) {
            sample = parse_reward_csv(read_text_file(path));
            if (sample.per_agent.size() != pop.agents.size())
                throw ParseError("cached rewards at " + path.string() +
                                 " do not match the population size");
        } else {
            for (std::size_t i = 0; i < pop.agents.size(); ++i)
                sample.per_agent.push_back(
                    evaluate(pop.agents[i], eval_env, cfg_.eval_episodes,
                             derive_seed(cfg_.seed_base, "eval", static_cast<std::uint64_t>(i))));
            RewardCsvMeta meta{pop.run_ids, std::string(algo_name(ref.algo)),
                               config_label(eval_env), ref.mutation, pop.seeds};
            write_text_file_atomic(path, render_reward_csv(meta, sample));
        }
        return pop.rewards.emplace(key, std::move(sample)).first->second;
    }

    TestEnvironmentSet ensure_env_set(const PopRef& healthy_ref, Criterion criterion,
                                      const CriterionParams& params) {
        const std::string name = config_label(healthy_ref.train_env) + "_" +
                                 std::string(algo_name(healthy_ref.algo)) + "_" +
                                 std::string(criterion_cli_name(criterion)) + ".json";
        const auto path = cfg_.out_dir / "envs" / name;
        if (std::filesystem::exists(path)) return env_set_from_json(load_json_file(path));

        Population& healthy = pops_.at(pop_key(healthy_ref));
        SearchSpace space;
        auto it = cfg_.search_spaces.find(std::string(env_id_name(healthy_ref.train_env.env_id)));
        if (it != cfg_.search_spaces.end())
            space = it->second;
        else
            space = default_search_space(healthy_ref.train_env.env_id, cfg_.search_depth);
        EvalSpec eval{cfg_.eval_episodes, cfg_.seed_base, params};
        TestEnvironmentSet set = generate_bounds_environments(healthy.agents,
                                                              healthy_ref.train_env, space,
                                                              criterion, eval);
        write_text_file_atomic(path, to_json(set).dump(2) + "\n");
        return set;
    }
};

// Convenience wrapper: full pipeline + report export.
inline CampaignResults run_campaign(const CampaignConfig& cfg) {
    return Campaign(cfg).run(Stage::Report);
}

}  // namespace rlmt
