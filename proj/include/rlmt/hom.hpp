#pragma once

// Kill matrices over generated environment sets, non-trivial FOM selection,
// and the order-2 composition pipeline with its subsumption classification.
//
// For a HOM H with constituents F1, F2 let T_H, T_1, T_2 be the sets of
// test environments killing them and U = T_1 ∪ T_2, I = T_1 ∩ T_2. Then:
//   NotKilled                 T_H = ∅
//   NonSubsuming              |T_H| ≥ |U|
//   StronglySubsumingCoupled  T_H ⊆ I (T_H non-empty)
//   WeaklySubsumingDecoupled  T_H ∩ U = ∅
//   WeaklySubsumingCoupled    everything else
// checked in exactly that order.

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rlmt/env.hpp"
#include "rlmt/errors.hpp"
#include "rlmt/mutation.hpp"
#include "rlmt/stats.hpp"
#include "rlmt/testgen.hpp"

namespace rlmt {

struct KillMatrix {
    Criterion criterion = Criterion::R;
    std::vector<EnvironmentConfig> columns;
    std::vector<MutationSpec> rows;
    std::vector<std::string> row_labels;  // canonical mutation strings
    // cells[row][col]; a missing verdict marks a gap (population unavailable).
    std::vector<std::vector<std::optional<KillVerdict>>> cells;

    bool row_complete(std::size_t row) const {
        for (const auto& cell : cells[row])
            if (!cell) return false;
        return true;
    }

    int kill_count(std::size_t row) const {
        int n = 0;
        for (const auto& cell : cells[row])
            if (cell && cell->killed) ++n;
        return n;
    }

    std::set<std::string> kill_set(std::size_t row) const {
        std::set<std::string> out;
        for (std::size_t c = 0; c < cells[row].size(); ++c)
            if (cells[row][c] && cells[row][c]->killed)
                out.insert(config_label(columns[c]));
        return out;
    }
};

// One kill-matrix row input: the mutation and, when the population trained
// successfully, its reward samples aligned with the environment columns.
struct MatrixRowInput {
    MutationSpec mutation;
    std::optional<std::vector<RewardSample>> rewards_per_env;
};

namespace detail {
inline std::uint64_t dtr_cell_seed(std::uint64_t seed_base, const std::string& row_label,
                                   const EnvironmentConfig& env) {
    return derive_seed(derive_seed(seed_base, "dtr-kill", fnv1a64(row_label)), "env",
                       config_hash(env));
}
}  // namespace detail

// Builds the matrix from precomputed reward samples (the campaign path:
// every population is evaluated once per environment, then reused across
// criteria and rows).
inline KillMatrix build_kill_matrix_from_rewards(
    const std::vector<RewardSample>& healthy_per_env, const std::vector<MatrixRowInput>& rows,
    const std::vector<EnvironmentConfig>& envs, Criterion criterion,
    const CriterionParams& params, std::uint64_t seed_base) {
    if (envs.empty()) throw UsageError("kill matrix needs at least one environment");
    if (healthy_per_env.size() != envs.size())
        throw UsageError("healthy rewards must align with the environment columns");
    KillMatrix matrix;
    matrix.criterion = criterion;
    matrix.columns = envs;
    for (const auto& row : rows) {
        matrix.rows.push_back(row.mutation);
        matrix.row_labels.push_back(render_mutation(row.mutation));
        std::vector<std::optional<KillVerdict>> cells;
        if (row.rewards_per_env) {
            if (row.rewards_per_env->size() != envs.size())
                throw UsageError("row rewards must align with the environment columns");
            for (std::size_t c = 0; c < envs.size(); ++c)
                cells.push_back(kill_verdict(
                    criterion, healthy_per_env[c], (*row.rewards_per_env)[c], params,
                    detail::dtr_cell_seed(seed_base, matrix.row_labels.back(), envs[c])));
        } else {
            cells.assign(envs.size(), std::nullopt);  // gap row
        }
        matrix.cells.push_back(std::move(cells));
    }
    return matrix;
}

// Builds the matrix by evaluating trained populations directly. A missing
// (empty) population yields a gap row rather than an error.
inline KillMatrix build_kill_matrix(
    const std::vector<TrainedPolicy>& healthy,
    const std::vector<std::pair<MutationSpec, std::vector<TrainedPolicy>>>& mutated,
    const TestEnvironmentSet& env_set, Criterion criterion, const EvalSpec& eval) {
    if (healthy.empty()) throw UsageError("kill matrix needs a healthy population");
    const auto envs = env_set.configs();
    PopulationEvaluator healthy_eval(&healthy, eval);
    std::vector<RewardSample> healthy_per_env;
    for (const auto& cfg : envs) healthy_per_env.push_back(healthy_eval.rewards_on(cfg));
    std::vector<MatrixRowInput> rows;
    for (const auto& [mutation, agents] : mutated) {
        MatrixRowInput row{mutation, std::nullopt};
        if (!agents.empty()) {
            PopulationEvaluator pe(&agents, eval);
            std::vector<RewardSample> per_env;
            for (const auto& cfg : envs) per_env.push_back(pe.rewards_on(cfg));
            row.rewards_per_env = std::move(per_env);
        }
        rows.push_back(std::move(row));
    }
    return build_kill_matrix_from_rewards(healthy_per_env, rows, envs, criterion, eval.params,
                                          eval.seed_base);
}

// FOMs killed by at least one but not all environments — the composition
// candidates. Rows with gaps are not eligible.
inline std::vector<MutationSpec> select_nontrivial_foms(const KillMatrix& matrix) {
    std::vector<MutationSpec> out;
    const int n_envs = static_cast<int>(matrix.columns.size());
    for (std::size_t r = 0; r < matrix.rows.size(); ++r) {
        if (!matrix.row_complete(r)) continue;
        const int kills = matrix.kill_count(r);
        if (kills != 0 && kills != n_envs) out.push_back(matrix.rows[r]);
    }
    return out;
}

enum class HomType {
    NotKilled,
    NonSubsuming,
    WeaklySubsumingCoupled,
    WeaklySubsumingDecoupled,
    StronglySubsumingCoupled
};

inline std::string_view hom_type_name(HomType t) {
    switch (t) {
        case HomType::NotKilled: return "NotKilled";
        case HomType::NonSubsuming: return "NonSubsuming";
        case HomType::WeaklySubsumingCoupled: return "WeaklySubsumingCoupled";
        case HomType::WeaklySubsumingDecoupled: return "WeaklySubsumingDecoupled";
        default: return "StronglySubsumingCoupled";
    }
}

inline HomType classify_hom(const std::set<std::string>& t_h, const std::set<std::string>& t_1,
                            const std::set<std::string>& t_2) {
    if (t_h.empty()) return HomType::NotKilled;
    std::set<std::string> u = t_1;
    u.insert(t_2.begin(), t_2.end());
    if (t_h.size() >= u.size()) return HomType::NonSubsuming;
    std::set<std::string> i;
    for (const auto& e : t_1)
        if (t_2.count(e)) i.insert(e);
    bool subset_of_i = true;
    for (const auto& e : t_h) subset_of_i = subset_of_i && i.count(e) > 0;
    if (subset_of_i) return HomType::StronglySubsumingCoupled;
    bool disjoint_from_u = true;
    for (const auto& e : t_h) disjoint_from_u = disjoint_from_u && u.count(e) == 0;
    if (disjoint_from_u) return HomType::WeaklySubsumingDecoupled;
    return HomType::WeaklySubsumingCoupled;
}

struct HomClassification {
    MutationSpec hom;
    std::string label;
    std::set<std::string> t_h, t_1, t_2;
    HomType type = HomType::NotKilled;
};

struct HomSummary {
    int hom_count = 0;    // compositions actually trained and evaluated
    int not_killed = 0;
    int ns = 0;
    int wsc = 0;
    int wsd = 0;
    int ssc = 0;
};

struct HomResult {
    std::vector<HomClassification> classifications;
    HomSummary summary;
    std::vector<std::string> skipped;  // "label: reason" for failed compositions
};

// Trains and classifies every unordered pair of non-trivial FOMs. Training
// is injected as a callback that returns the composed population's reward
// samples aligned with the matrix columns, so the pipeline itself stays
// deterministic and testable against scripted populations. Fewer than two
// candidates yield an empty result.
inline HomResult hom_pipeline(
    const std::vector<MutationSpec>& nontrivial, const AlgoSpec& base_spec,
    const KillMatrix& fom_matrix, const std::vector<RewardSample>& healthy_per_env,
    const std::function<std::vector<RewardSample>(const MutationSpec&)>& train_population,
    const CriterionParams& params, std::uint64_t seed_base) {
    HomResult result;
    if (nontrivial.size() < 2) return result;

    auto row_kill_set = [&](const MutationSpec& fom) {
        const std::string label = render_mutation(fom);
        for (std::size_t r = 0; r < fom_matrix.rows.size(); ++r)
            if (fom_matrix.row_labels[r] == label) return fom_matrix.kill_set(r);
        throw UsageError("FOM '" + label + "' missing from the kill matrix");
    };

    for (std::size_t i = 0; i < nontrivial.size(); ++i) {
        for (std::size_t j = i + 1; j < nontrivial.size(); ++j) {
            MutationSpec hom;
            try {
                hom = compose_hom(nontrivial[i].operators.at(0), nontrivial[j].operators.at(0),
                                  base_spec);
            } catch (const std::runtime_error& e) {
                result.skipped.push_back(render_mutation(nontrivial[i]) + "+" +
                                         render_mutation(nontrivial[j]) + ": " + e.what());
                continue;
            }
            const std::string label = render_mutation(hom);
            const auto rewards = train_population(hom);
            if (rewards.size() != fom_matrix.columns.size())
                throw UsageError("HOM rewards must align with the environment columns");
            HomClassification cls;
            cls.hom = hom;
            cls.label = label;
            for (std::size_t c = 0; c < fom_matrix.columns.size(); ++c) {
                const auto verdict = kill_verdict(
                    fom_matrix.criterion, healthy_per_env[c], rewards[c], params,
                    detail::dtr_cell_seed(seed_base, label, fom_matrix.columns[c]));
                if (verdict.killed) cls.t_h.insert(config_label(fom_matrix.columns[c]));
            }
            cls.t_1 = row_kill_set(nontrivial[i]);
            cls.t_2 = row_kill_set(nontrivial[j]);
            cls.type = classify_hom(cls.t_h, cls.t_1, cls.t_2);
            ++result.summary.hom_count;
            switch (cls.type) {
                case HomType::NotKilled: ++result.summary.not_killed; break;
                case HomType::NonSubsuming: ++result.summary.ns; break;
                case HomType::WeaklySubsumingCoupled: ++result.summary.wsc; break;
                case HomType::WeaklySubsumingDecoupled: ++result.summary.wsd; break;
                default: ++result.summary.ssc; break;
            }
            result.classifications.push_back(std::move(cls));
        }
    }
    return result;
}

}  // namespace rlmt
