#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include "rlmt/campaign.hpp"

namespace {

using namespace rlmt;
namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("rlmt_campaign_" + name);
    fs::remove_all(dir);
    return dir;
}

std::size_t count_files(const fs::path& dir) {
    if (!fs::exists(dir)) return 0;
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(dir)) n += e.is_regular_file();
    return n;
}

TEST(Profiles, NamesRoundTrip) {
    for (Profile p : {Profile::Smoke, Profile::Desk, Profile::Full})
        EXPECT_EQ(parse_profile(profile_name(p)), p);
    EXPECT_THROW(parse_profile("quick"), UsageError);
}

TEST(Stages, Ordering) {
    EXPECT_TRUE(stage_at_least(Stage::Report, Stage::Train));
    EXPECT_TRUE(stage_at_least(Stage::Kill, Stage::Kill));
    EXPECT_FALSE(stage_at_least(Stage::Train, Stage::GenEnvs));
}

TEST(CampaignConfigJson, ProfileDefaultsAndFileWins) {
    const Json minimal{{"environments", Json::array({"CartPole"})},
                       {"algorithms", Json::array({"QNet"})},
                       {"mutations", Json::array({"ILF"})}};
    const auto smoke = campaign_config_from_json(minimal, Profile::Smoke);
    EXPECT_EQ(smoke.agents_per_population, 5);
    EXPECT_EQ(smoke.eval_episodes, 5);
    ASSERT_TRUE(smoke.algo_overrides.count("*"));
    EXPECT_EQ(smoke.algo_overrides.at("*").at("training_budget").get<int>(), 4000);

    EXPECT_EQ(campaign_config_from_json(minimal, Profile::Desk).agents_per_population, 10);
    EXPECT_EQ(campaign_config_from_json(minimal, Profile::Full).agents_per_population, 20);

    // Explicit file fields override the profile...
    Json j = minimal;
    j["agents_per_population"] = 3;
    j["eval_episodes"] = 2;
    const auto overridden = campaign_config_from_json(j, Profile::Smoke);
    EXPECT_EQ(overridden.agents_per_population, 3);
    EXPECT_EQ(overridden.eval_episodes, 2);

    // ...and per-key algo overrides merge into the profile's block.
    j["algo_overrides"] = Json{{"*", Json{{"training_budget", 123}}}};
    const auto merged = campaign_config_from_json(j, Profile::Smoke);
    EXPECT_EQ(merged.algo_overrides.at("*").at("training_budget").get<int>(), 123);
    EXPECT_EQ(merged.algo_overrides.at("*").at("warmup_steps").get<int>(), 200);
}

TEST(CampaignConfigJson, Validation) {
    auto base = [] {
        return Json{{"environments", Json::array({"CartPole"})},
                    {"algorithms", Json::array({"QNet"})},
                    {"mutations", Json::array({"ILF"})}};
    };
    Json j = base();
    j["mutations"] = Json::array({"ILF", "ILF"});
    EXPECT_THROW(campaign_config_from_json(j), ConfigError);
    // Duplicates after canonicalization count too.
    j["mutations"] = Json::array({"M", "M_1.0"});
    EXPECT_THROW(campaign_config_from_json(j), ConfigError);

    j = base();
    j["algorithms"] = Json::array({"QNet", "QNet"});
    EXPECT_THROW(campaign_config_from_json(j), ConfigError);

    j = base();
    j["criteria"] = Json::array({"avg", "avg"});
    EXPECT_THROW(campaign_config_from_json(j), ConfigError);

    j = base();
    j["agents_per_population"] = 1;
    EXPECT_THROW(campaign_config_from_json(j), ConfigError);

    j = base();
    j["environments"] = Json::array();
    EXPECT_THROW(campaign_config_from_json(j), ConfigError);

    j = base();
    j["search_spaces"] = Json{{"Pendulum", Json{{"cart_mass", Json::array({0.5, 2.0})}}}};
    EXPECT_THROW(campaign_config_from_json(j), ParseError);

    EXPECT_THROW(campaign_config_from_json(Json::array()), ParseError);
}

TEST(CampaignConfigJson, SearchSpaceForms) {
    Json j{{"environments", Json::array({"CartPole"})},
           {"algorithms", Json::array({"QNet"})},
           {"mutations", Json::array({"ILF"})},
           {"search_depth", 2},
           {"search_spaces",
            Json{{"CartPole", Json{{"cart_mass", Json::array({0.5, 2.0})},
                                   {"pole_mass", Json::array({0.05, 0.2, 0.01})}}}}}};
    const auto cfg = campaign_config_from_json(j);
    const auto& space = cfg.search_spaces.at("CartPole");
    EXPECT_EQ(space.depth, 2);  // inherits search_depth
    EXPECT_DOUBLE_EQ(space.params.at("cart_mass").lower, 0.5);
    EXPECT_DOUBLE_EQ(space.params.at("cart_mass").precision, 1.5 * 0.01);
    EXPECT_DOUBLE_EQ(space.params.at("pole_mass").precision, 0.01);

    // Object form with its own depth.
    j["search_spaces"]["CartPole"] =
        Json{{"depth", 0},
             {"params", Json{{"cart_mass", Json{{"lower", 0.5}, {"upper", 2.0}}},
                             {"pole_mass", Json{{"lower", 0.05},
                                                {"upper", 0.2},
                                                {"precision", 0.02}}}}}};
    const auto cfg2 = campaign_config_from_json(j);
    EXPECT_EQ(cfg2.search_spaces.at("CartPole").depth, 0);
    EXPECT_DOUBLE_EQ(cfg2.search_spaces.at("CartPole").params.at("pole_mass").precision, 0.02);

    // Round trip through the identity serialization.
    const auto back = search_space_from_json(to_json(space), 1);
    EXPECT_EQ(back.depth, 2);
    EXPECT_DOUBLE_EQ(back.params.at("cart_mass").upper, 2.0);
}

TEST(CampaignIdentity, ExcludesOutDirAndParallelism) {
    auto cfg = smoke_campaign_config("out_a", 1);
    auto cfg2 = smoke_campaign_config("out_b", 1);
    cfg2.parallelism = 8;
    EXPECT_EQ(campaign_config_hash(cfg), campaign_config_hash(cfg2));

    auto cfg3 = smoke_campaign_config("out_a", 2);
    EXPECT_NE(campaign_config_hash(cfg), campaign_config_hash(cfg3));

    auto cfg4 = smoke_campaign_config("out_a", 1);
    cfg4.mutations.push_back("NDF");
    EXPECT_NE(campaign_config_hash(cfg), campaign_config_hash(cfg4));
}

TEST(SmokeConfig, BuiltInShape) {
    const auto cfg = smoke_campaign_config("somewhere", 7);
    ASSERT_EQ(cfg.environments.size(), 1u);
    EXPECT_EQ(cfg.environments[0], default_config(EnvId::CartPole));
    EXPECT_EQ(cfg.algorithms, std::vector<AlgoId>{AlgoId::QNet});
    EXPECT_EQ(cfg.mutations, (std::vector<std::string>{"ILF", "RN_1.0"}));
    EXPECT_EQ(cfg.agents_per_population, 5);
    EXPECT_EQ(cfg.seed_base, 7u);
    EXPECT_EQ(cfg.out_dir, fs::path("somewhere"));
}

TEST(EffectiveSpec, OverridePrecedence) {
    auto cfg = smoke_campaign_config("x", 1);
    cfg.algo_overrides["*"] = Json{{"training_budget", 1000}, {"gamma", 0.5}};
    cfg.algo_overrides["QNet"] = Json{{"gamma", 0.7}};
    const auto spec = effective_base_spec(cfg, AlgoId::QNet, EnvId::CartPole);
    EXPECT_EQ(spec.training_budget, 1000);      // from "*"
    EXPECT_DOUBLE_EQ(spec.gamma, 0.7);          // algorithm-specific wins
    EXPECT_EQ(spec.algo_id, AlgoId::QNet);
}

TEST(CriterionParamsClamp, DtrSubsetsFitThePopulation) {
    auto cfg = smoke_campaign_config("x", 1);
    cfg.dtr.subset_size = 10;
    cfg.agents_per_population = 4;
    EXPECT_EQ(campaign_criterion_params(cfg).dtr.subset_size, 2);
    cfg.agents_per_population = 2;
    EXPECT_EQ(campaign_criterion_params(cfg).dtr.subset_size, 1);
    cfg.agents_per_population = 30;
    EXPECT_EQ(campaign_criterion_params(cfg).dtr.subset_size, 10);
}

TEST(TrainingSeeds, StableAndRoleSeparated) {
    const auto cfg = smoke_campaign_config("x", 1);
    const auto e0 = default_config(EnvId::CartPole);
    const auto s = agent_training_seed(cfg, e0, AlgoId::QNet, "healthy", 0);
    EXPECT_EQ(s, agent_training_seed(cfg, e0, AlgoId::QNet, "healthy", 0));
    EXPECT_NE(s, agent_training_seed(cfg, e0, AlgoId::QNet, "healthy", 1));
    EXPECT_NE(s, agent_training_seed(cfg, e0, AlgoId::QNet, "ILF", 0));
    EXPECT_NE(s, agent_training_seed(cfg, e0, AlgoId::PG, "healthy", 0));
    EXPECT_NE(s, agent_training_seed(cfg, default_config(EnvId::MiniLander), AlgoId::QNet,
                                     "healthy", 0));
}

TEST(RunParallel, RunsEverythingRethrowsFirstByIndex) {
    for (int k : {1, 3}) {
        std::vector<std::atomic<int>> ran(5);
        std::vector<std::function<void()>> tasks;
        for (int i = 0; i < 5; ++i)
            tasks.push_back([&ran, i] {
                ran[static_cast<std::size_t>(i)] = 1;
                if (i == 1) throw TrainingError("first failure");
                if (i == 3) throw TrainingError("second failure");
            });
        try {
            detail::run_parallel(tasks, k);
            FAIL() << "expected an exception (k=" << k << ")";
        } catch (const TrainingError& e) {
            EXPECT_STREQ(e.what(), "first failure");
        }
        // Later tasks still executed despite the earlier failure.
        for (const auto& flag : ran) EXPECT_EQ(flag.load(), 1);
    }
}

// --- report rendering on scripted results --------------------------------

CampaignResults scripted_results() {
    CampaignResults results;
    results.config_json = Json{{"note", "scripted"}};
    results.healthy.push_back({"CartPole", "QNet", 487.5, 20.0});
    results.healthy.push_back({"MiniLander", "PG", -12.5, 0.04});

    KillVerdict killed;
    killed.criterion = Criterion::R;
    killed.killed = true;
    killed.conclusive = true;
    killed.p_value = 0.001;
    killed.effect_size = 2.0;
    killed.power = 0.99;
    KillVerdict spared = killed;
    spared.killed = false;

    results.initial.push_back({"CartPole", "QNet", "ILF", Criterion::R, killed});
    results.initial.push_back({"CartPole", "QNet", "NR", Criterion::R, std::nullopt});

    const auto e0 = default_config(EnvId::CartPole);
    MatrixEntry entry;
    entry.environment = "CartPole";
    entry.algorithm = "QNet";
    entry.matrix.criterion = Criterion::R;
    entry.matrix.columns = {e0, with_params(e0, {{"cart_mass", 2.0}})};
    entry.matrix.rows = {parse_mutation_string("ILF"), parse_mutation_string("NR")};
    entry.matrix.row_labels = {"ILF", "NR"};
    entry.matrix.cells.push_back({killed, spared});
    entry.matrix.cells.push_back({std::nullopt, std::nullopt});
    entry.envs.envs.push_back({e0, "initial", 0});
    entry.nontrivial = {"ILF"};
    results.matrices.push_back(entry);

    HomEntry hom;
    hom.environment = "CartPole";
    hom.algorithm = "QNet";
    hom.criterion = Criterion::R;
    hom.result.summary = {5, 1, 2, 0, 1, 1};
    results.homs.push_back(hom);

    results.gaps.push_back({"CartPole", "QNet", "NR", "incompatible"});
    return results;
}

TEST(ReportRenderers, CsvShapes) {
    const auto results = scripted_results();
    EXPECT_EQ(render_healthy_summary_csv(results),
              "environment,algorithm,healthy_return\n"
              "CartPole,QNet,487.5 (20)\n"
              "MiniLander,PG,-12.5 (0)\n");
    EXPECT_EQ(render_initial_verdicts_csv(results),
              "environment,algorithm,mutation,criterion,verdict\n"
              "CartPole,QNet,ILF,R,killed\n"
              "CartPole,QNet,NR,R,-\n");
    EXPECT_EQ(render_kill_counts_csv(results),
              "environment,algorithm,criterion,mutation,kills,nontrivial\n"
              "CartPole,QNet,R,ILF,1/2,yes\n"
              "CartPole,QNet,R,NR,-,-\n");
    EXPECT_EQ(render_hom_summary_csv(results),
              "environment,algorithm,criterion,hom_count,ns,wsc,wsd,ssc\n"
              "CartPole,QNet,R,5,2,0,1,1\n");
}

TEST(ReportRenderers, ExportWritesEveryArtifact) {
    const auto dir = scratch_dir("report");
    const auto results = scripted_results();
    export_report(results, ReportFormat::Csv, dir);
    export_report(results, ReportFormat::Json, dir);
    export_report(results, ReportFormat::Markdown, dir);

    for (const char* name : {"healthy_summary.csv", "initial_verdicts.csv", "kill_counts.csv",
                             "hom_summary.csv", "report.json", "report.md",
                             "kill_matrix_r_CartPole_QNet.json"})
        EXPECT_TRUE(fs::exists(dir / name)) << name;

    const Json report = load_json_file(dir / "report.json");
    EXPECT_EQ(report.at("config").at("note"), "scripted");
    EXPECT_EQ(report.at("healthy").size(), 2u);
    EXPECT_EQ(report.at("kill_matrices").size(), 1u);
    EXPECT_TRUE(report.at("initial_verdicts")[1].at("verdict").is_null());
    EXPECT_EQ(report.at("gaps")[0].at("reason"), "incompatible");

    const Json matrix = load_json_file(dir / "kill_matrix_r_CartPole_QNet.json");
    EXPECT_EQ(matrix.at("criterion"), "R");
    EXPECT_EQ(matrix.at("rows")[0].at("cells")[0].at("killed"), true);
    EXPECT_TRUE(matrix.at("rows")[1].at("cells")[0].is_null());

    const auto md = read_text_file(dir / "report.md");
    EXPECT_NE(md.find("# Mutation-testing campaign report"), std::string::npos);
    EXPECT_NE(md.find("| CartPole | QNet | 487.5 (20) |"), std::string::npos);

    EXPECT_EQ(parse_report_format("csv"), ReportFormat::Csv);
    EXPECT_EQ(parse_report_format("md"), ReportFormat::Markdown);
    EXPECT_THROW(parse_report_format("pdf"), UsageError);
    fs::remove_all(dir);
}

// --- micro end-to-end campaign -------------------------------------------

CampaignConfig micro_config(const fs::path& out_dir) {
    const Json j{
        {"environments", Json::array({"CartPole"})},
        {"algorithms", Json::array({"QNet"})},
        // NR cannot run on QNet: exercises the population-gap path.
        {"mutations", Json::array({"MTS", "NR"})},
        {"agents_per_population", 2},
        {"eval_episodes", 2},
        {"criteria", Json::array({"avg", "r"})},
        {"search_depth", 0},
        {"search_spaces",
         Json{{"CartPole", Json{{"cart_mass", Json::array({0.5, 2.0, 0.75})},
                                {"pole_mass", Json::array({0.05, 0.2, 0.075})}}}}},
        {"algo_overrides",
         Json{{"*", Json{{"training_budget", 600},
                         {"hidden_layers", Json::array({8})},
                         {"epsilon_decay_steps", 300},
                         {"warmup_steps", 100},
                         {"target_sync_interval", 100},
                         {"probe_interval", 300},
                         {"probe_episodes", 1}}}}}};
    CampaignConfig cfg = campaign_config_from_json(j);
    cfg.out_dir = out_dir;
    cfg.seed_base = 11;
    return cfg;
}

TEST(MicroCampaign, EndToEndArtifactsResumeAndDeterminism) {
    const auto dir = scratch_dir("micro");
    const auto cfg = micro_config(dir);
    const auto results = run_campaign(cfg);

    // Results structure.
    ASSERT_EQ(results.healthy.size(), 1u);
    EXPECT_EQ(results.healthy[0].environment, "CartPole");
    ASSERT_FALSE(results.gaps.empty());
    EXPECT_EQ(results.gaps[0].mutation, "NR");
    // Two criteria x two mutations on the initial environment.
    ASSERT_EQ(results.initial.size(), 4u);
    int missing = 0;
    for (const auto& row : results.initial) missing += !row.verdict.has_value();
    EXPECT_EQ(missing, 2);  // both NR rows
    ASSERT_EQ(results.matrices.size(), 2u);
    EXPECT_EQ(results.matrices[0].matrix.criterion, Criterion::AVG);
    EXPECT_EQ(results.matrices[0].matrix.columns.size(), 1u);  // AVG: initial env only
    EXPECT_EQ(results.matrices[1].matrix.criterion, Criterion::R);
    EXPECT_GE(results.matrices[1].matrix.columns.size(), 1u);
    ASSERT_EQ(results.homs.size(), 1u);  // R only; AVG has no composition stage
    EXPECT_EQ(results.homs[0].criterion, Criterion::R);

    // Artifacts.
    EXPECT_TRUE(fs::exists(dir / "campaign.json"));
    EXPECT_EQ(count_files(dir / "policies"), 4u);  // healthy x2 + MTS x2
    EXPECT_EQ(count_files(dir / "runs"), 4u);
    EXPECT_TRUE(fs::exists(dir / "envs" / "CartPole_QNet_r.json"));
    for (const char* name : {"healthy_summary.csv", "initial_verdicts.csv", "kill_counts.csv",
                             "hom_summary.csv", "report.json", "report.md"})
        EXPECT_TRUE(fs::exists(dir / "report" / name)) << name;

    // Reward CSVs exist for the healthy population on the initial env.
    const auto healthy_rewards = dir / "rewards" / "CartPole" / "QNet" / "healthy";
    EXPECT_GE(count_files(healthy_rewards), 1u);
    bool parsed_one = false;
    for (const auto& e : fs::directory_iterator(healthy_rewards)) {
        const auto sample = parse_reward_csv(read_text_file(e.path()));
        EXPECT_EQ(sample.agent_count(), 2);
        EXPECT_EQ(sample.per_agent[0].size(), 2u);
        parsed_one = true;
    }
    EXPECT_TRUE(parsed_one);

    // Resume: a second run re-uses every policy (mtimes untouched) and
    // rewrites byte-identical reports.
    std::map<std::string, fs::file_time_type> policy_times;
    for (const auto& e : fs::directory_iterator(dir / "policies"))
        policy_times[e.path().filename().string()] = fs::last_write_time(e.path());
    const auto report_json = read_text_file(dir / "report" / "report.json");
    const auto healthy_csv = read_text_file(dir / "report" / "healthy_summary.csv");

    const auto again = run_campaign(cfg);
    EXPECT_EQ(again.initial.size(), results.initial.size());
    for (const auto& e : fs::directory_iterator(dir / "policies"))
        EXPECT_EQ(fs::last_write_time(e.path()),
                  policy_times.at(e.path().filename().string()));
    EXPECT_EQ(read_text_file(dir / "report" / "report.json"), report_json);
    EXPECT_EQ(read_text_file(dir / "report" / "healthy_summary.csv"), healthy_csv);

    // A separate out dir with the same seed produces byte-identical reports.
    const auto dir2 = scratch_dir("micro2");
    auto cfg2 = cfg;
    cfg2.out_dir = dir2;
    run_campaign(cfg2);
    EXPECT_EQ(read_text_file(dir2 / "report" / "report.json"), report_json);
    EXPECT_EQ(read_text_file(dir2 / "report" / "healthy_summary.csv"), healthy_csv);

    // Reusing the out dir under a different campaign identity is refused.
    auto clashing = cfg;
    clashing.seed_base = 12;
    EXPECT_THROW(run_campaign(clashing), UsageError);

    fs::remove_all(dir);
    fs::remove_all(dir2);
}

TEST(MicroCampaign, TrainStageStopsBeforeReports) {
    const auto dir = scratch_dir("stage");
    const auto cfg = micro_config(dir);
    Campaign campaign(cfg);
    const auto results = campaign.run(Stage::Train);
    EXPECT_EQ(count_files(dir / "policies"), 4u);
    EXPECT_EQ(count_files(dir / "report"), 0u);
    EXPECT_EQ(count_files(dir / "envs"), 0u);
    EXPECT_TRUE(results.matrices.empty());
    EXPECT_TRUE(results.homs.empty());
    ASSERT_EQ(results.healthy.size(), 1u);
    fs::remove_all(dir);
}

}  // namespace
