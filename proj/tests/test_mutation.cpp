#include "rlmt/mutation.hpp"

#include <gtest/gtest.h>

namespace rlmt {
namespace {

Observation make_obs(std::vector<double> s, int a, double r, std::vector<double> s2,
                     bool terminal = false) {
    Observation obs;
    obs.s_t = std::move(s);
    obs.a_t = a;
    obs.r_t = r;
    obs.s_next = std::move(s2);
    obs.terminal = terminal;
    return obs;
}

TEST(MutationGrammar, CanonicalRoundTrips) {
    for (const char* text :
         {"ILF", "NDF", "NR", "MSU", "MTS", "PAC_Sigmoid", "PAC_Tanh", "POC_SGD", "RN_1.0",
          "RN_0.5_0.3", "M_1.0", "M_0.25", "Ra_1.0", "R_0.75", "PAC_Sigmoid+NDF",
          "RN_2.0_1.0+ILF", "M_1.0+Ra_0.5"}) {
        const MutationSpec spec = parse_mutation_string(text);
        EXPECT_EQ(render_mutation(spec), text) << text;
    }
}

TEST(MutationGrammar, NormalizesEquivalentSpellings) {
    // A bare env-level id means probability 1; sigma 1 is left implicit.
    EXPECT_EQ(render_mutation(parse_mutation_string("M")), "M_1.0");
    EXPECT_EQ(render_mutation(parse_mutation_string("RN")), "RN_1.0");
    EXPECT_EQ(render_mutation(parse_mutation_string("RN_1.0_0.5")), "RN_0.5");
    EXPECT_EQ(render_mutation(parse_mutation_string("R_1")), "R_1.0");
}

TEST(MutationGrammar, ParseExamples) {
    const MutationSpec m = parse_mutation_string("M_1.0");
    ASSERT_EQ(m.operators.size(), 1u);
    EXPECT_EQ(m.operators[0].op_id, OperatorId::M);
    EXPECT_DOUBLE_EQ(m.operators[0].probability, 1.0);

    const MutationSpec nr = parse_mutation_string("NR");
    EXPECT_EQ(nr.operators[0].op_id, OperatorId::NR);
    EXPECT_TRUE(std::holds_alternative<std::monostate>(nr.operators[0].parameter));

    const MutationSpec hom = parse_mutation_string("PAC_Sigmoid+NDF");
    ASSERT_EQ(hom.operators.size(), 2u);
    EXPECT_EQ(hom.operators[0].op_id, OperatorId::PAC);
    EXPECT_EQ(std::get<Activation>(hom.operators[0].parameter), Activation::Sigmoid);
    EXPECT_EQ(hom.operators[1].op_id, OperatorId::NDF);
    EXPECT_EQ(hom.order(), 2);

    const MutationSpec rn = parse_mutation_string("RN_0.5_0.3");
    EXPECT_DOUBLE_EQ(std::get<double>(rn.operators[0].parameter), 0.5);
    EXPECT_DOUBLE_EQ(rn.operators[0].probability, 0.3);
}

TEST(MutationGrammar, ErrorsCarryPosition) {
    try {
        parse_mutation_string("ILF+XX");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("position 4"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse_mutation_string(""), ParseError);
    EXPECT_THROW(parse_mutation_string("NDF_0.5"), ParseError);   // agent-level: no params
    EXPECT_THROW(parse_mutation_string("PAC"), ParseError);       // missing activation
    EXPECT_THROW(parse_mutation_string("PAC_0.5"), ParseError);   // not an activation
    EXPECT_THROW(parse_mutation_string("RN_abc"), ParseError);
    EXPECT_THROW(parse_mutation_string("M_0.5_0.5"), ParseError);  // only RN takes two
    EXPECT_THROW(parse_mutation_string("ILF+"), ParseError);
    EXPECT_THROW(parse_mutation_string("ILF+NDF+MSU"), ParseError);  // order 2 max
    EXPECT_THROW(parse_mutation_string("ILF+ILF"), ParseError);      // repeated operator
    EXPECT_THROW(parse_mutation_string("M_1.5"), ParseError);  // probability out of range
    try {
        parse_mutation_string("RN_1.5");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        // A lone out-of-range number was probably meant as a noise scale.
        EXPECT_NE(std::string(e.what()).find("RN_SIGMA_PROB"), std::string::npos) << e.what();
    }
}

TEST(MutationOps, LevelsAndValidation) {
    EXPECT_EQ(level_of(OperatorId::RN), OperatorLevel::Environment);
    EXPECT_EQ(level_of(OperatorId::NDF), OperatorLevel::Agent);
    EXPECT_EQ(level_of(OperatorId::PAC), OperatorLevel::Policy);
    OperatorInstance bad = make_operator(OperatorId::RN);
    bad.parameter = -1.0;
    EXPECT_THROW(validate_operator(bad), ConfigError);
    OperatorInstance prob = make_operator(OperatorId::NDF);
    prob.probability = 0.5;  // probabilities only exist at the environment level
    EXPECT_THROW(validate_operator(prob), ConfigError);
}

TEST(MutationSpecTransforms, AgentLevel) {
    const AlgoSpec base = pg_defaults(EnvId::CartPole);
    const AlgoSpec ndf = apply_spec_mutations(parse_mutation_string("NDF"), base);
    EXPECT_DOUBLE_EQ(ndf.gamma, 1.0);
    // Everything else stays put.
    AlgoSpec expect = base;
    expect.gamma = 1.0;
    EXPECT_TRUE(ndf == expect);

    const AlgoSpec ilf = apply_spec_mutations(parse_mutation_string("ILF"), base);
    EXPECT_EQ(ilf.loss, Loss::NegatedTD);
    const AlgoSpec nr = apply_spec_mutations(parse_mutation_string("NR"), base);
    EXPECT_TRUE(nr.faults.reverse_rewards);
    const AlgoSpec msu = apply_spec_mutations(parse_mutation_string("MSU"), base);
    EXPECT_TRUE(msu.faults.freeze_state_update);
    const AlgoSpec mts = apply_spec_mutations(parse_mutation_string("MTS"), base);
    EXPECT_TRUE(mts.faults.drop_terminal_flags);
}

TEST(MutationSpecTransforms, Idempotent) {
    const AlgoSpec base = pg_defaults(EnvId::CartPole);
    const auto mutation = parse_mutation_string("NDF");
    const AlgoSpec once = apply_spec_mutations(mutation, base);
    const AlgoSpec twice = apply_spec_mutations(mutation, once);
    EXPECT_TRUE(once == twice);
}

TEST(MutationSpecTransforms, PolicyLevel) {
    const AlgoSpec base = qnet_defaults(EnvId::CartPole);  // ReLU + Adam
    const AlgoSpec pac = apply_spec_mutations(parse_mutation_string("PAC_Sigmoid"), base);
    EXPECT_EQ(pac.activation, Activation::Sigmoid);
    EXPECT_DOUBLE_EQ(pac.learning_rate, base.learning_rate);
    const AlgoSpec poc = apply_spec_mutations(parse_mutation_string("POC_SGD"), base);
    EXPECT_EQ(poc.optimizer, Optimizer::SGD);
    EXPECT_DOUBLE_EQ(poc.learning_rate, base.learning_rate);
}

TEST(MutationCompat, RejectsIncompatibleAndVacuous) {
    const AlgoSpec qnet = qnet_defaults(EnvId::CartPole);
    const AlgoSpec pg = pg_defaults(EnvId::CartPole);
    // Reward reversal needs an episodic return computation.
    EXPECT_THROW(check_compatible(parse_mutation_string("NR"), qnet), CompatibilityError);
    EXPECT_NO_THROW(check_compatible(parse_mutation_string("NR"), pg));
    // Swapping to the configured default changes nothing.
    EXPECT_THROW(check_compatible(parse_mutation_string("PAC_ReLU"), qnet),
                 VacuousMutationError);
    EXPECT_THROW(check_compatible(parse_mutation_string("POC_Adam"), qnet),
                 VacuousMutationError);
    EXPECT_NO_THROW(check_compatible(parse_mutation_string("PAC_ReLU"), pg));  // PG is Tanh
    EXPECT_FALSE(is_compatible(parse_mutation_string("NR"), qnet));
    EXPECT_TRUE(is_compatible(parse_mutation_string("NR"), pg));
    EXPECT_THROW(apply_spec_mutations(parse_mutation_string("NR"), qnet), CompatibilityError);
}

TEST(EnvMutations, RepeatUsesPreviousRewardAndFreezesState) {
    const Observation prev = make_obs({0.0}, 0, 7.0, {1.0});
    const Observation cur = make_obs({1.0}, 1, 9.0, {2.0});
    Rng rng(1);
    const auto inst = make_operator(OperatorId::R);
    const Observation out = apply_env_mutation(inst, cur, {prev}, rng);
    EXPECT_EQ(out.s_t, cur.s_t);
    EXPECT_EQ(out.a_t, cur.a_t);
    EXPECT_DOUBLE_EQ(out.r_t, 7.0);       // previous step's reward
    EXPECT_EQ(out.s_next, cur.s_t);       // no state advance
}

TEST(EnvMutations, RandomReplacesPairFromOneExperience) {
    const Observation prev = make_obs({0.0}, 0, 7.0, {1.5});
    const Observation cur = make_obs({1.0}, 1, 9.0, {2.0});
    Rng rng(1);
    const auto out = apply_env_mutation(make_operator(OperatorId::Ra), cur, {prev}, rng);
    // With a single history entry the (reward, next state) pair must come
    // from that entry together.
    EXPECT_DOUBLE_EQ(out.r_t, 7.0);
    EXPECT_EQ(out.s_next, prev.s_next);
}

TEST(EnvMutations, MangledDrawsTwoDifferentExperiences) {
    std::vector<Observation> history{make_obs({0.0}, 0, 1.0, {10.0}),
                                     make_obs({1.0}, 1, 2.0, {20.0})};
    const Observation cur = make_obs({2.0}, 0, 9.0, {30.0});
    Rng rng(3);
    const auto out = apply_env_mutation(make_operator(OperatorId::M), cur, history, rng);
    // Reward from one entry, next state from the other.
    const bool case_a = out.r_t == 1.0 && out.s_next == std::vector<double>{20.0};
    const bool case_b = out.r_t == 2.0 && out.s_next == std::vector<double>{10.0};
    EXPECT_TRUE(case_a || case_b);
}

TEST(EnvMutations, HistoryTooShortIsNoop) {
    const Observation cur = make_obs({1.0}, 1, 9.0, {2.0});
    Rng rng(5);
    EnvMutationLog log;
    const auto r_out = apply_env_mutation(make_operator(OperatorId::R), cur, {}, rng, &log);
    EXPECT_DOUBLE_EQ(r_out.r_t, 9.0);
    const auto m_out = apply_env_mutation(make_operator(OperatorId::M), cur,
                                          {make_obs({0.0}, 0, 1.0, {1.0})}, rng, &log);
    EXPECT_DOUBLE_EQ(m_out.r_t, 9.0);
    EXPECT_EQ(log.noops, 2);
    EXPECT_EQ(log.applications, 0);
}

TEST(EnvMutations, RewardNoiseIsDeterministicPerSeed) {
    const Observation cur = make_obs({1.0}, 1, 5.0, {2.0});
    const auto inst = make_operator(OperatorId::RN, 2.0);
    Rng a(7), b(7);
    const auto out_a = apply_env_mutation(inst, cur, {}, a);
    const auto out_b = apply_env_mutation(inst, cur, {}, b);
    EXPECT_DOUBLE_EQ(out_a.r_t, out_b.r_t);
    EXPECT_NE(out_a.r_t, 5.0);           // noise actually applied
    EXPECT_EQ(out_a.s_next, cur.s_next); // state untouched
}

TEST(EnvMutations, ZeroProbabilityNeverFires) {
    const auto spec = parse_mutation_string("RN_1.0_0.0");
    MutationChain chain(spec, 99);
    const Observation cur = make_obs({1.0}, 1, 5.0, {2.0});
    for (int i = 0; i < 50; ++i) {
        const auto out = chain.intercept(cur);
        EXPECT_DOUBLE_EQ(out.r_t, 5.0);
        EXPECT_EQ(out.s_next, cur.s_next);
    }
    EXPECT_EQ(chain.log().applications, 0);
}

TEST(EnvMutations, ChainStoresUnmutatedHistory) {
    // With R at probability 1, the second interception must hand back the
    // FIRST step's original reward, not a mutated one.
    MutationChain chain(parse_mutation_string("R_1.0"), 4);
    chain.intercept(make_obs({0.0}, 0, 3.0, {1.0}));
    const auto out = chain.intercept(make_obs({1.0}, 1, 8.0, {2.0}));
    EXPECT_DOUBLE_EQ(out.r_t, 3.0);
    EXPECT_EQ(out.s_next, std::vector<double>{1.0});
}

TEST(Hom, ComposeChecksBothConstituents) {
    const AlgoSpec pg = pg_defaults(EnvId::CartPole);
    const auto a = parse_mutation_string("RN_1.0").operators[0];
    const auto b = parse_mutation_string("NDF").operators[0];
    const MutationSpec hom = compose_hom(a, b, pg);
    EXPECT_EQ(render_mutation(hom), "RN_1.0+NDF");
    EXPECT_THROW(compose_hom(a, a, pg), CompatibilityError);  // same operator twice
    const auto pac_s = parse_mutation_string("PAC_Sigmoid").operators[0];
    const auto pac_r = parse_mutation_string("PAC_ReLU").operators[0];
    EXPECT_THROW(compose_hom(pac_s, pac_r, pg), CompatibilityError);
    const auto nr = parse_mutation_string("NR").operators[0];
    EXPECT_THROW(compose_hom(nr, b, qnet_defaults(EnvId::CartPole)), CompatibilityError);
    // Vacuous constituents poison the composition too.
    EXPECT_THROW(compose_hom(pac_r, b, qnet_defaults(EnvId::CartPole)), VacuousMutationError);
}

}  // namespace
}  // namespace rlmt
