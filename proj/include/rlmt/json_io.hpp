#pragma once

// JSON (de)serialization for configs, trained policies, verdicts and
// generated environment sets, plus small file helpers.  Weight vectors are
// stored as hex-encoded IEEE-754 bit patterns so a save/load round trip is
// bit-exact.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "rlmt/agents.hpp"
#include "rlmt/env.hpp"
#include "rlmt/errors.hpp"
#include "rlmt/hom.hpp"
#include "rlmt/mutation.hpp"
#include "rlmt/net.hpp"
#include "rlmt/stats.hpp"
#include "rlmt/testgen.hpp"
#include "rlmt/text.hpp"
#include "rlmt/train.hpp"

namespace rlmt {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// file helpers

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Writes via a sibling temp file + rename so readers never see partial data.
inline void write_text_file_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw UsageError("cannot write file: " + tmp.string());
        out << content;
        if (!out.flush()) throw UsageError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline Json parse_json_text(const std::string& text, const std::string& what) {
    Json j = Json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ParseError("invalid JSON in " + what);
    return j;
}

inline Json load_json_file(const std::filesystem::path& path) {
    return parse_json_text(read_text_file(path), path.string());
}

// ---------------------------------------------------------------------------
// bit-exact doubles

inline std::string double_to_hex(double v) { return to_hex(std::bit_cast<std::uint64_t>(v)); }

inline double hex_to_double(const std::string& s) {
    if (s.size() != 16) throw ParseError("expected 16 hex digits, got '" + s + "'");
    std::uint64_t bits = 0;
    for (char c : s) {
        int d;
        if (c >= '0' && c <= '9') d = c - '0';
        else if (c >= 'a' && c <= 'f') d = 10 + (c - 'a');
        else throw ParseError("bad hex digit in '" + s + "'");
        bits = (bits << 4) | static_cast<std::uint64_t>(d);
    }
    return std::bit_cast<double>(bits);
}

// ---------------------------------------------------------------------------
// environment configs

inline Json to_json(const EnvironmentConfig& cfg) {
    Json params = Json::object();
    for (const auto& [name, value] : resolved_params(cfg)) params[name] = value;
    return Json{{"env_id", env_id_name(cfg.env_id)},
                {"params", std::move(params)},
                {"episode_cap", cfg.episode_cap}};
}

inline EnvironmentConfig config_from_json(const Json& j) {
    if (!j.is_object()) throw ParseError("environment config must be a JSON object");
    EnvironmentConfig cfg;
    cfg.env_id = parse_env_id(j.at("env_id").get<std::string>());
    cfg.episode_cap = default_episode_cap(cfg.env_id);
    if (j.contains("params")) {
        for (const auto& [name, value] : j.at("params").items()) {
            if (!value.is_number()) throw ParseError("parameter '" + name + "' must be numeric");
            cfg.params[name] = value.get<double>();
        }
    }
    if (j.contains("episode_cap")) cfg.episode_cap = j.at("episode_cap").get<int>();
    validate_config(cfg);
    return cfg;
}

// ---------------------------------------------------------------------------
// algorithm specs

inline Json to_json(const AlgoSpec& spec) {
    Json j{{"algo", algo_name(spec.algo_id)},
           {"gamma", spec.gamma},
           {"learning_rate", spec.learning_rate},
           {"hidden_layers", spec.hidden_layers},
           {"activation", activation_name(spec.activation)},
           {"optimizer", optimizer_name(spec.optimizer)},
           {"loss", loss_name(spec.loss)},
           {"training_budget", spec.training_budget},
           {"probe_interval", spec.probe_interval},
           {"probe_episodes", spec.probe_episodes}};
    if (spec.algo_id == AlgoId::QNet) {
        j["replay_capacity"] = spec.replay_capacity;
        j["batch_size"] = spec.batch_size;
        j["epsilon_start"] = spec.epsilon_start;
        j["epsilon_end"] = spec.epsilon_end;
        j["epsilon_decay_steps"] = spec.epsilon_decay_steps;
        j["target_sync_interval"] = spec.target_sync_interval;
        j["update_interval"] = spec.update_interval;
        j["warmup_steps"] = spec.warmup_steps;
    } else {
        j["episodes_per_update"] = spec.episodes_per_update;
        j["baseline"] = spec.baseline;
    }
    Json faults = Json::object();
    if (spec.faults.reverse_rewards) faults["reverse_rewards"] = true;
    if (spec.faults.drop_terminal_flags) faults["drop_terminal_flags"] = true;
    if (spec.faults.freeze_state_update) faults["freeze_state_update"] = true;
    if (!faults.empty()) j["faults"] = std::move(faults);
    return j;
}

inline AlgoSpec spec_from_json(const Json& j) {
    if (!j.is_object()) throw ParseError("algorithm spec must be a JSON object");
    AlgoSpec s;
    s.algo_id = parse_algo(j.at("algo").get<std::string>());
    auto opt_num = [&](const char* key, double& out) {
        if (j.contains(key)) out = j.at(key).get<double>();
    };
    auto opt_int = [&]<typename T>(const char* key, T& out) {
        if (j.contains(key)) out = j.at(key).get<T>();
    };
    opt_num("gamma", s.gamma);
    opt_num("learning_rate", s.learning_rate);
    if (j.contains("hidden_layers")) s.hidden_layers = j.at("hidden_layers").get<std::vector<int>>();
    if (j.contains("activation")) s.activation = parse_activation(j.at("activation").get<std::string>());
    if (j.contains("optimizer")) s.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
    if (j.contains("loss")) s.loss = parse_loss(j.at("loss").get<std::string>());
    opt_int("training_budget", s.training_budget);
    opt_int("probe_interval", s.probe_interval);
    opt_int("probe_episodes", s.probe_episodes);
    opt_int("replay_capacity", s.replay_capacity);
    opt_int("batch_size", s.batch_size);
    opt_num("epsilon_start", s.epsilon_start);
    opt_num("epsilon_end", s.epsilon_end);
    opt_int("epsilon_decay_steps", s.epsilon_decay_steps);
    opt_int("target_sync_interval", s.target_sync_interval);
    opt_int("update_interval", s.update_interval);
    opt_int("warmup_steps", s.warmup_steps);
    opt_int("episodes_per_update", s.episodes_per_update);
    if (j.contains("baseline")) s.baseline = j.at("baseline").get<bool>();
    if (j.contains("faults")) {
        const Json& f = j.at("faults");
        if (f.value("reverse_rewards", false)) s.faults.reverse_rewards = true;
        if (f.value("drop_terminal_flags", false)) s.faults.drop_terminal_flags = true;
        if (f.value("freeze_state_update", false)) s.faults.freeze_state_update = true;
    }
    validate_spec(s);
    return s;
}

// ---------------------------------------------------------------------------
// networks / trained policies

inline Json to_json(const Mlp& net) {
    std::vector<std::string> hex;
    const std::vector<double> flat = get_weights(net);
    hex.reserve(flat.size());
    for (double v : flat) hex.push_back(double_to_hex(v));
    return Json{{"layer_sizes", net.layer_sizes},
                {"activation", activation_name(net.activation)},
                {"weights_hex", std::move(hex)}};
}

inline Mlp mlp_from_json(const Json& j) {
    Mlp net(j.at("layer_sizes").get<std::vector<int>>(),
            parse_activation(j.at("activation").get<std::string>()));
    const auto hex = j.at("weights_hex").get<std::vector<std::string>>();
    std::vector<double> flat;
    flat.reserve(hex.size());
    for (const auto& h : hex) flat.push_back(hex_to_double(h));
    set_weights(net, flat);
    return net;
}

constexpr int kPolicyFormatVersion = 1;

// Content hash binding a policy to the exact run that produced it.
inline std::uint64_t run_fingerprint(const EnvironmentConfig& env, const AlgoSpec& spec,
                                     const std::string& mutation, std::uint64_t seed) {
    std::uint64_t h = fnv1a64(to_json(env).dump());
    h = fnv1a64(to_json(spec).dump(), h);
    h = fnv1a64(mutation, h);
    h = fnv1a64_u64(seed, h);
    return h;
}

inline Json to_json(const TrainedPolicy& p) {
    Json j{{"format_version", kPolicyFormatVersion},
           {"algo", algo_name(p.algo_id)},
           {"env", to_json(p.env)},
           {"spec", to_json(p.spec)},
           {"mutation", p.mutation},
           {"seed_hex", to_hex(p.seed)},
           {"fingerprint", to_hex(run_fingerprint(p.env, p.spec, p.mutation, p.seed))},
           {"policy", to_json(p.policy)},
           {"log",
            Json{{"env_steps", p.log.env_steps},
                 {"episodes", p.log.episodes},
                 {"gradient_steps", p.log.gradient_steps},
                 {"env_mutation_applications", p.log.env_mutation.applications},
                 {"env_mutation_noops", p.log.env_mutation.noops}}}};
    j["value"] = p.value ? to_json(*p.value) : Json(nullptr);
    if (std::isfinite(p.log.best_probe_mean)) j["log"]["best_probe_mean"] = p.log.best_probe_mean;
    return j;
}

inline std::uint64_t parse_hex_u64(const std::string& s) {
    return std::bit_cast<std::uint64_t>(hex_to_double(s));
}

inline TrainedPolicy policy_from_json(const Json& j) {
    if (j.value("format_version", -1) != kPolicyFormatVersion)
        throw ParseError("unsupported policy format version");
    TrainedPolicy p;
    p.algo_id = parse_algo(j.at("algo").get<std::string>());
    p.env = config_from_json(j.at("env"));
    p.spec = spec_from_json(j.at("spec"));
    p.mutation = j.at("mutation").get<std::string>();
    p.seed = parse_hex_u64(j.at("seed_hex").get<std::string>());
    p.policy = mlp_from_json(j.at("policy"));
    if (j.contains("value") && !j.at("value").is_null()) p.value = mlp_from_json(j.at("value"));
    const Json& log = j.at("log");
    p.log.env_steps = log.at("env_steps").get<long long>();
    p.log.episodes = log.at("episodes").get<long long>();
    p.log.gradient_steps = log.at("gradient_steps").get<long long>();
    p.log.env_mutation.applications = log.at("env_mutation_applications").get<long long>();
    p.log.env_mutation.noops = log.at("env_mutation_noops").get<long long>();
    p.log.best_probe_mean = log.value("best_probe_mean",
                                      -std::numeric_limits<double>::infinity());
    const std::string want = to_hex(run_fingerprint(p.env, p.spec, p.mutation, p.seed));
    if (j.value("fingerprint", want) != want) throw ParseError("policy fingerprint mismatch");
    return p;
}

inline void save_policy(const TrainedPolicy& p, const std::filesystem::path& path) {
    write_text_file_atomic(path, to_json(p).dump(2) + "\n");
}

inline TrainedPolicy load_policy(const std::filesystem::path& path) {
    return policy_from_json(load_json_file(path));
}

// ---------------------------------------------------------------------------
// kill verdicts

inline Json to_json(const KillVerdict& v) {
    auto num_or_null = [](const std::optional<double>& x) {
        return (x && std::isfinite(*x)) ? Json(*x) : Json(nullptr);
    };
    return Json{{"criterion", criterion_name(v.criterion)},
                {"killed", v.killed},
                {"conclusive", v.conclusive},
                {"p_value", num_or_null(v.p_value)},
                {"effect_size", num_or_null(v.effect_size)},
                {"power", num_or_null(v.power)},
                {"ratio_fraction", num_or_null(v.ratio_fraction)}};
}

inline KillVerdict verdict_from_json(const Json& j) {
    KillVerdict v;
    v.criterion = parse_criterion(j.at("criterion").get<std::string>());
    v.killed = j.at("killed").get<bool>();
    v.conclusive = j.at("conclusive").get<bool>();
    auto opt_num = [&](const char* key) -> std::optional<double> {
        if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
        return j.at(key).get<double>();
    };
    v.p_value = opt_num("p_value");
    v.effect_size = opt_num("effect_size");
    v.power = opt_num("power");
    v.ratio_fraction = opt_num("ratio_fraction");
    return v;
}

// ---------------------------------------------------------------------------
// generated environment sets

inline Json to_json(const TestEnvironmentSet& set) {
    Json arr = Json::array();
    for (const auto& e : set.envs) {
        Json j = to_json(e.config);
        j["provenance"] = e.provenance;
        j["bisect_iterations"] = e.bisect_iterations;
        arr.push_back(std::move(j));
    }
    return arr;
}

inline TestEnvironmentSet env_set_from_json(const Json& j) {
    if (!j.is_array()) throw ParseError("environment set must be a JSON array");
    TestEnvironmentSet set;
    for (const auto& item : j) {
        GeneratedEnv e;
        e.config = config_from_json(item);
        e.provenance = item.value("provenance", std::string("unknown"));
        e.bisect_iterations = item.value("bisect_iterations", 0);
        set.envs.push_back(std::move(e));
    }
    return set;
}

// ---------------------------------------------------------------------------
// reward samples (CSV)

// One row per evaluation episode:
//   run_id,algo,env_id,mutation,agent_seed,episode_index,episode_return
inline constexpr const char* kRewardCsvHeader =
    "run_id,algo,env_id,mutation,agent_seed,episode_index,episode_return";

struct RewardCsvMeta {
    std::vector<std::string> run_ids;  // one per agent (each agent is one training run)
    std::string algo;
    std::string env_id;
    std::string mutation;
    std::vector<std::uint64_t> agent_seeds;  // one per agent
};

inline std::string render_reward_csv(const RewardCsvMeta& meta, const RewardSample& sample) {
    validate_reward_sample(sample);
    if (meta.agent_seeds.size() != sample.per_agent.size() ||
        meta.run_ids.size() != sample.per_agent.size())
        throw UsageError("reward CSV metadata does not match the sample's agent count");
    std::string out(kRewardCsvHeader);
    out += '\n';
    for (std::size_t a = 0; a < sample.per_agent.size(); ++a) {
        for (std::size_t e = 0; e < sample.per_agent[a].size(); ++e) {
            out += meta.run_ids[a];
            out += ',';
            out += meta.algo;
            out += ',';
            out += meta.env_id;
            out += ',';
            out += meta.mutation;
            out += ',';
            out += to_hex(meta.agent_seeds[a]);
            out += ',';
            out += format_int(static_cast<long long>(e));
            out += ',';
            out += format_double(sample.per_agent[a][e]);
            out += '\n';
        }
    }
    return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

// Reads back a reward CSV written by render_reward_csv.  Episodes are grouped
// by the agent_seed column in first-appearance order.
inline RewardSample parse_reward_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty reward CSV");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kRewardCsvHeader) throw ParseError("unexpected reward CSV header: " + line);
    RewardSample sample;
    std::vector<std::string> seen_seeds;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 7) throw ParseError("bad reward CSV row: " + line);
        const std::string& seed = cells[4];
        std::size_t idx = seen_seeds.size();
        for (std::size_t i = 0; i < seen_seeds.size(); ++i)
            if (seen_seeds[i] == seed) { idx = i; break; }
        if (idx == seen_seeds.size()) {
            seen_seeds.push_back(seed);
            sample.per_agent.emplace_back();
        }
        sample.per_agent[idx].push_back(parse_double(cells[6]));
    }
    validate_reward_sample(sample);
    return sample;
}

}  // namespace rlmt
