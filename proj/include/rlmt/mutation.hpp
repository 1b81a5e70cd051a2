#pragma once

// The mutation operator catalog. Operators come in three levels:
//   Environment (RN, M, Ra, R)  — intercept each training observation,
//   Agent       (NDF, NR, MSU, MTS, ILF) — corrupt the training process,
//   Policy      (PAC, POC)      — swap a piece of the learner configuration.
// A MutationSpec is one operator (first order) or two composed operators
// (second order). String form: OPID(_PARAM)?(_PROB)?, joined with '+' for
// compositions, e.g. "M_1.0", "RN_2.0_0.5", "PAC_Sigmoid+NDF".

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rlmt/agents.hpp"
#include "rlmt/env.hpp"
#include "rlmt/errors.hpp"
#include "rlmt/net.hpp"
#include "rlmt/rng.hpp"
#include "rlmt/text.hpp"

namespace rlmt {

enum class OperatorId { RN, M, Ra, R, NDF, NR, MSU, MTS, ILF, PAC, POC };
enum class OperatorLevel { Environment, Agent, Policy };

inline std::string_view op_name(OperatorId id) {
    switch (id) {
        case OperatorId::RN: return "RN";
        case OperatorId::M: return "M";
        case OperatorId::Ra: return "Ra";
        case OperatorId::R: return "R";
        case OperatorId::NDF: return "NDF";
        case OperatorId::NR: return "NR";
        case OperatorId::MSU: return "MSU";
        case OperatorId::MTS: return "MTS";
        case OperatorId::ILF: return "ILF";
        case OperatorId::PAC: return "PAC";
        default: return "POC";
    }
}

inline OperatorLevel level_of(OperatorId id) {
    switch (id) {
        case OperatorId::RN:
        case OperatorId::M:
        case OperatorId::Ra:
        case OperatorId::R:
            return OperatorLevel::Environment;
        case OperatorId::PAC:
        case OperatorId::POC:
            return OperatorLevel::Policy;
        default:
            return OperatorLevel::Agent;
    }
}

inline std::optional<OperatorId> lookup_op(std::string_view name) {
    static constexpr OperatorId all[] = {
        OperatorId::RN,  OperatorId::M,   OperatorId::Ra, OperatorId::R,
        OperatorId::NDF, OperatorId::NR,  OperatorId::MSU, OperatorId::MTS,
        OperatorId::ILF, OperatorId::PAC, OperatorId::POC};
    for (OperatorId id : all)
        if (op_name(id) == name) return id;
    return std::nullopt;
}

// Operator parameter: noise scale for RN, replacement activation for PAC,
// replacement optimizer for POC; absent for everything else.
using OperatorParam = std::variant<std::monostate, double, Activation, Optimizer>;

struct OperatorInstance {
    OperatorId op_id = OperatorId::RN;
    OperatorLevel level = OperatorLevel::Environment;
    double probability = 1.0;  // meaningful for environment level only
    OperatorParam parameter;

    bool operator==(const OperatorInstance&) const = default;
};

inline void validate_operator(const OperatorInstance& inst) {
    if (inst.level != level_of(inst.op_id))
        throw ConfigError("operator level does not match its identifier");
    if (inst.level == OperatorLevel::Environment) {
        if (!(inst.probability >= 0.0 && inst.probability <= 1.0))
            throw ConfigError("operator probability must be in [0,1]");
    } else if (inst.probability != 1.0) {
        throw ConfigError("only environment-level operators take a probability");
    }
    switch (inst.op_id) {
        case OperatorId::RN:
            if (!std::holds_alternative<double>(inst.parameter) ||
                !(std::get<double>(inst.parameter) > 0.0))
                throw ConfigError("RN needs a positive noise scale parameter");
            break;
        case OperatorId::PAC:
            if (!std::holds_alternative<Activation>(inst.parameter))
                throw ConfigError("PAC needs an activation parameter");
            break;
        case OperatorId::POC:
            if (!std::holds_alternative<Optimizer>(inst.parameter))
                throw ConfigError("POC needs an optimizer parameter");
            break;
        default:
            if (!std::holds_alternative<std::monostate>(inst.parameter))
                throw ConfigError(std::string(op_name(inst.op_id)) +
                                  " takes no parameter");
            break;
    }
}

inline OperatorInstance make_operator(OperatorId id, OperatorParam param = {},
                                      double probability = 1.0) {
    if (id == OperatorId::RN && std::holds_alternative<std::monostate>(param))
        param = 1.0;  // default noise scale
    OperatorInstance inst{id, level_of(id), probability, param};
    validate_operator(inst);
    return inst;
}

struct MutationSpec {
    std::vector<OperatorInstance> operators;  // 1 (FOM) or 2 (HOM)

    int order() const { return static_cast<int>(operators.size()); }
    bool operator==(const MutationSpec&) const = default;
};

namespace detail {
// Probabilities and noise scales render with an explicit decimal point so
// "M_1.0" stays "M_1.0" and never collapses to "M_1".
inline std::string num_token(double v) {
    if (v == std::floor(v) && std::abs(v) < 1e15)
        return format_int(static_cast<long long>(v)) + ".0";
    return format_double(v);
}
}  // namespace detail

inline std::string render_operator(const OperatorInstance& inst) {
    std::string out(op_name(inst.op_id));
    switch (inst.op_id) {
        case OperatorId::RN:
            if (std::get<double>(inst.parameter) != 1.0)
                out += "_" + detail::num_token(std::get<double>(inst.parameter));
            break;
        case OperatorId::PAC:
            out += "_" + std::string(activation_name(std::get<Activation>(inst.parameter)));
            break;
        case OperatorId::POC:
            out += "_" + std::string(optimizer_name(std::get<Optimizer>(inst.parameter)));
            break;
        default:
            break;
    }
    if (inst.level == OperatorLevel::Environment)
        out += "_" + detail::num_token(inst.probability);
    return out;
}

inline std::string render_mutation(const MutationSpec& spec) {
    std::string out;
    for (std::size_t i = 0; i < spec.operators.size(); ++i) {
        if (i) out += "+";
        out += render_operator(spec.operators[i]);
    }
    return out;
}

namespace detail {
inline double parse_numeric_token(std::string_view token, std::size_t pos,
                                  std::string_view what) {
    try {
        return parse_double(token);
    } catch (const ParseError&) {
        throw ParseError("malformed " + std::string(what) + " '" + std::string(token) +
                         "' at position " + format_int(static_cast<long long>(pos)));
    }
}
}  // namespace detail

// Parses one operator token such as "M_1.0" or "PAC_Sigmoid". `base` is the
// character offset of this token in the surrounding text, used for error
// positions. For environment-level operators a single trailing number is the
// application probability; RN additionally accepts RN_SIGMA_PROB.
inline OperatorInstance parse_operator(std::string_view text, std::size_t base = 0) {
    std::vector<std::string_view> tokens;
    std::vector<std::size_t> offsets;
    std::size_t start = 0;
    while (true) {
        std::size_t us = text.find('_', start);
        tokens.push_back(text.substr(start, us == std::string_view::npos ? us : us - start));
        offsets.push_back(base + start);
        if (us == std::string_view::npos) break;
        start = us + 1;
    }
    const auto id = lookup_op(tokens[0]);
    if (!id)
        throw ParseError("unknown operator '" + std::string(tokens[0]) +
                         "' at position " + format_int(static_cast<long long>(offsets[0])));
    const std::size_t extra = tokens.size() - 1;
    const OperatorLevel level = level_of(*id);

    if (*id == OperatorId::PAC || *id == OperatorId::POC) {
        if (extra != 1)
            throw ParseError(std::string(op_name(*id)) +
                             " needs exactly one parameter at position " +
                             format_int(static_cast<long long>(offsets[0])));
        try {
            if (*id == OperatorId::PAC)
                return make_operator(*id, parse_activation(tokens[1]));
            return make_operator(*id, parse_optimizer(tokens[1]));
        } catch (const ParseError&) {
            throw ParseError("bad parameter '" + std::string(tokens[1]) +
                             "' at position " +
                             format_int(static_cast<long long>(offsets[1])));
        }
    }
    if (level == OperatorLevel::Agent) {
        if (extra != 0)
            throw ParseError(std::string(op_name(*id)) +
                             " takes no parameter, unexpected token at position " +
                             format_int(static_cast<long long>(offsets[1])));
        return make_operator(*id);
    }

    // Environment level: OPID, OPID_PROB, or (RN only) OPID_SIGMA_PROB.
    double sigma = 1.0;
    double prob = 1.0;
    if (extra == 1) {
        prob = detail::parse_numeric_token(tokens[1], offsets[1], "probability");
    } else if (extra == 2 && *id == OperatorId::RN) {
        sigma = detail::parse_numeric_token(tokens[1], offsets[1], "noise scale");
        prob = detail::parse_numeric_token(tokens[2], offsets[2], "probability");
    } else if (extra != 0) {
        throw ParseError("too many tokens for operator " + std::string(op_name(*id)) +
                         " at position " + format_int(static_cast<long long>(offsets[1])));
    }
    if (!(prob >= 0.0 && prob <= 1.0))
        throw ParseError("probability " + detail::num_token(prob) +
                         " out of [0,1] at position " +
                         format_int(static_cast<long long>(offsets[extra])) +
                         (*id == OperatorId::RN
                              ? " (for a noise scale write RN_SIGMA_PROB)"
                              : ""));
    if (*id == OperatorId::RN) {
        if (!(sigma > 0.0))
            throw ParseError("noise scale must be > 0 at position " +
                             format_int(static_cast<long long>(offsets[1])));
        return make_operator(*id, sigma, prob);
    }
    return make_operator(*id, {}, prob);
}

// Parses a full mutation string: one operator, or two joined by '+'.
inline MutationSpec parse_mutation_string(std::string_view text) {
    if (text.empty()) throw ParseError("empty mutation string");
    MutationSpec spec;
    std::size_t start = 0;
    while (true) {
        std::size_t plus = text.find('+', start);
        std::string_view part =
            text.substr(start, plus == std::string_view::npos ? plus : plus - start);
        if (part.empty())
            throw ParseError("empty operator at position " +
                             format_int(static_cast<long long>(start)));
        spec.operators.push_back(parse_operator(part, start));
        if (plus == std::string_view::npos) break;
        start = plus + 1;
    }
    if (spec.order() > 2)
        throw ParseError("at most two operators may be composed, got " +
                         format_int(spec.order()));
    if (spec.order() == 2 &&
        spec.operators[0].op_id == spec.operators[1].op_id)
        throw ParseError("a composition must not repeat an operator");
    return spec;
}

// Compatibility of one operator with an algorithm, judged against the
// algorithm's unmutated configuration. Throws; returns normally when fine.
inline void check_compatible(const OperatorInstance& inst, const AlgoSpec& base) {
    validate_operator(inst);
    switch (inst.op_id) {
        case OperatorId::NR:
            if (base.algo_id == AlgoId::QNet)
                throw CompatibilityError(
                    "NR reorders episode rewards before return computation; QNet "
                    "never computes episode returns");
            break;
        case OperatorId::PAC:
            if (std::get<Activation>(inst.parameter) == base.activation)
                throw VacuousMutationError(
                    std::string("PAC_") +
                    std::string(activation_name(std::get<Activation>(inst.parameter))) +
                    " is the default activation of " + std::string(algo_name(base.algo_id)));
            break;
        case OperatorId::POC:
            if (std::get<Optimizer>(inst.parameter) == base.optimizer)
                throw VacuousMutationError(
                    std::string("POC_") +
                    std::string(optimizer_name(std::get<Optimizer>(inst.parameter))) +
                    " is the default optimizer of " + std::string(algo_name(base.algo_id)));
            break;
        default:
            break;
    }
}

inline void check_compatible(const MutationSpec& spec, const AlgoSpec& base) {
    if (spec.order() < 1 || spec.order() > 2)
        throw ConfigError("mutation must have order 1 or 2");
    if (spec.order() == 2 && spec.operators[0].op_id == spec.operators[1].op_id)
        throw CompatibilityError("a composition must not repeat an operator");
    for (const auto& inst : spec.operators) check_compatible(inst, base);
}

inline bool is_compatible(const MutationSpec& spec, const AlgoSpec& base) {
    try {
        check_compatible(spec, base);
        return true;
    } catch (const std::runtime_error&) {
        return false;
    }
}

// Agent-level transform: flips the corresponding training fault or field.
inline AlgoSpec apply_agent_mutation(const OperatorInstance& inst, const AlgoSpec& spec) {
    if (inst.level != OperatorLevel::Agent)
        throw UsageError("not an agent-level operator");
    AlgoSpec out = spec;
    switch (inst.op_id) {
        case OperatorId::NDF:
            out.gamma = 1.0;
            break;
        case OperatorId::NR:
            if (spec.algo_id == AlgoId::QNet)
                throw CompatibilityError("NR does not apply to QNet");
            out.faults.reverse_rewards = true;
            break;
        case OperatorId::MSU:
            out.faults.freeze_state_update = true;
            break;
        case OperatorId::MTS:
            out.faults.drop_terminal_flags = true;
            break;
        default:  // ILF
            out.loss = Loss::NegatedTD;
            break;
    }
    return out;
}

// Policy-level transform: swaps activation or optimizer; the learning rate
// is never touched.
inline AlgoSpec apply_policy_mutation(const OperatorInstance& inst, const AlgoSpec& spec) {
    if (inst.level != OperatorLevel::Policy)
        throw UsageError("not a policy-level operator");
    check_compatible(inst, spec);
    AlgoSpec out = spec;
    if (inst.op_id == OperatorId::PAC)
        out.activation = std::get<Activation>(inst.parameter);
    else
        out.optimizer = std::get<Optimizer>(inst.parameter);
    return out;
}

// Applies all agent- and policy-level operators of a mutation to a learner
// configuration (environment-level operators act at rollout time instead).
inline AlgoSpec apply_spec_mutations(const MutationSpec& mutation, const AlgoSpec& spec) {
    check_compatible(mutation, spec);
    AlgoSpec out = spec;
    for (const auto& inst : mutation.operators) {
        if (inst.level == OperatorLevel::Agent)
            out = apply_agent_mutation(inst, out);
        else if (inst.level == OperatorLevel::Policy)
            out = apply_policy_mutation(inst, out);
    }
    return out;
}

struct EnvMutationLog {
    long long applications = 0;  // steps where an operator fired
    long long noops = 0;         // fired but history was too short to act
};

// One environment-level interception. `history` holds the unmutated
// observations of all prior steps of this training run.
inline Observation apply_env_mutation(const OperatorInstance& inst, Observation obs,
                                      const std::vector<Observation>& history, Rng& rng,
                                      EnvMutationLog* log = nullptr) {
    if (inst.level != OperatorLevel::Environment)
        throw UsageError("not an environment-level operator");
    if (rng.next_double() >= inst.probability) return obs;

    const std::size_t n = history.size();
    switch (inst.op_id) {
        case OperatorId::RN:
            obs.r_t += rng.gaussian(0.0, std::get<double>(inst.parameter));
            if (log) ++log->applications;
            return obs;
        case OperatorId::M: {
            // Next state and reward replaced from two different experiences:
            // the tuple's internal correlation is destroyed.
            if (n < 2) {
                if (log) ++log->noops;
                return obs;
            }
            const auto idx = rng.sample_without_replacement(static_cast<int>(n), 2);
            obs.s_next = history[idx[0]].s_next;
            obs.r_t = history[idx[1]].r_t;
            if (log) ++log->applications;
            return obs;
        }
        case OperatorId::Ra: {
            // Reward and next state replaced together from one uniformly
            // chosen experience: internally consistent, unrelated to (s,a).
            if (n == 0) {
                if (log) ++log->noops;
                return obs;
            }
            const std::size_t k = rng.next_below(n);
            obs.r_t = history[k].r_t;
            obs.s_next = history[k].s_next;
            if (log) ++log->applications;
            return obs;
        }
        default: {
            // R: the agent is handed yesterday's reward and no state advance —
            // (s_t, a_t, r_{t-1}, s_t) in place of (s_t, a_t, r_t, s_{t+1}).
            if (n == 0) {
                if (log) ++log->noops;
                return obs;
            }
            obs.r_t = history.back().r_t;
            obs.s_next = obs.s_t;
            if (log) ++log->applications;
            return obs;
        }
    }
}

// Stateful per-run interceptor chain: owns the history pool and a dedicated
// RNG stream, so a probability-0 chain leaves the training run's own random
// stream — and therefore its weights — bit-identical to healthy training.
class MutationChain {
public:
    MutationChain(const MutationSpec& mutation, std::uint64_t seed) : rng_(seed) {
        for (const auto& inst : mutation.operators)
            if (inst.level == OperatorLevel::Environment) ops_.push_back(inst);
    }

    bool empty() const { return ops_.empty(); }

    Observation intercept(const Observation& obs) {
        Observation out = obs;
        for (const auto& inst : ops_)
            out = apply_env_mutation(inst, out, history_, rng_, &log_);
        history_.push_back(obs);
        return out;
    }

    const EnvMutationLog& log() const { return log_; }

private:
    std::vector<OperatorInstance> ops_;
    std::vector<Observation> history_;
    Rng rng_;
    EnvMutationLog log_;
};

// Order-2 composition. Listed order is canonical: environment-level
// interceptors run in that order each step.
inline MutationSpec compose_hom(const OperatorInstance& a, const OperatorInstance& b,
                                const AlgoSpec& base) {
    if (a.op_id == b.op_id)
        throw CompatibilityError("a composition must not repeat an operator");
    check_compatible(a, base);
    check_compatible(b, base);
    return MutationSpec{{a, b}};
}

}  // namespace rlmt
