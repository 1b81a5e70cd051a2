// Command line front end for the mutation-testing campaign pipeline.
//
// Subcommands run the pipeline up to a stage, reusing anything already in
// the output directory:
//   train     train healthy + mutated populations, evaluate on the
//             training environment
//   gen-envs  also generate the test-environment sets (R / DtR)
//   kill      also build the kill matrices (optionally one --criterion)
//   hom       also compose + classify higher-order mutations
//   report    full pipeline and report export
//   run       alias for report

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "rlmt/campaign.hpp"

namespace {

struct CommonOpts {
    std::string config;
    std::string out;
    std::string profile = "desk";
    std::uint64_t seeds = 0;
    bool seeds_set = false;
    int parallelism = 1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config, "Campaign config file (JSON)");
    cmd->add_option("--out", opts.out, "Output directory (overrides the config)");
    cmd->add_option("--seeds", opts.seeds, "Seed base (overrides the config)")
        ->each([&opts](const std::string&) { opts.seeds_set = true; });
    cmd->add_option("--parallelism", opts.parallelism, "Concurrent training runs")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--profile", opts.profile, "Scale profile: smoke, desk or full")
        ->check(CLI::IsMember({"smoke", "desk", "full"}));
}

rlmt::CampaignConfig build_config(const CommonOpts& opts) {
    const rlmt::Profile profile = rlmt::parse_profile(opts.profile);
    rlmt::CampaignConfig cfg;
    if (!opts.config.empty()) {
        cfg = rlmt::load_campaign_config(opts.config, profile);
    } else if (profile == rlmt::Profile::Smoke) {
        cfg = rlmt::smoke_campaign_config(opts.out.empty() ? "out" : opts.out);
    } else {
        throw rlmt::UsageError("--config is required (only --profile smoke has a built-in config)");
    }
    if (!opts.out.empty()) cfg.out_dir = opts.out;
    if (opts.seeds_set) cfg.seed_base = opts.seeds;
    cfg.parallelism = opts.parallelism;
    return cfg;
}

void print_summary(const rlmt::CampaignResults& results, const rlmt::CampaignConfig& cfg,
                   rlmt::Stage stage) {
    std::printf("output: %s\n", cfg.out_dir.string().c_str());
    for (const auto& row : results.healthy)
        std::printf("healthy %s/%s: %s (%s)\n", row.environment.c_str(), row.algorithm.c_str(),
                    rlmt::format_compact1(row.mean).c_str(),
                    rlmt::format_compact1(row.sd).c_str());
    if (rlmt::stage_at_least(stage, rlmt::Stage::Kill)) {
        int killed = 0, total = 0, gaps = 0;
        for (const auto& row : results.initial) {
            if (!row.verdict) {
                ++gaps;
                continue;
            }
            ++total;
            if (row.verdict->killed) ++killed;
        }
        std::printf("initial-environment verdicts: %d killed / %d decided, %d inapplicable\n",
                    killed, total, gaps);
        for (const auto& entry : results.matrices)
            std::printf("matrix %s/%s/%s: %zu mutations x %zu environments, %zu non-trivial\n",
                        entry.environment.c_str(), entry.algorithm.c_str(),
                        std::string(rlmt::criterion_name(entry.matrix.criterion)).c_str(),
                        entry.matrix.rows.size(), entry.matrix.columns.size(),
                        entry.nontrivial.size());
    }
    if (rlmt::stage_at_least(stage, rlmt::Stage::Hom)) {
        for (const auto& entry : results.homs) {
            const auto& s = entry.result.summary;
            std::printf("hom %s/%s/%s: %d composed (ns=%d wsc=%d wsd=%d ssc=%d not-killed=%d)\n",
                        entry.environment.c_str(), entry.algorithm.c_str(),
                        std::string(rlmt::criterion_name(entry.criterion)).c_str(), s.hom_count,
                        s.ns, s.wsc, s.wsd, s.ssc, s.not_killed);
        }
    }
    for (const auto& gap : results.gaps)
        std::printf("gap %s/%s/%s: %s\n", gap.environment.c_str(), gap.algorithm.c_str(),
                    gap.mutation.c_str(), gap.reason.c_str());
    if (rlmt::stage_at_least(stage, rlmt::Stage::Report))
        std::printf("report written to %s\n", (cfg.out_dir / "report").string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mutation testing for reinforcement learning agents"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string criterion_arg;

    CLI::App* train = app.add_subcommand("train", "Train healthy and mutated populations");
    CLI::App* gen_envs = app.add_subcommand("gen-envs", "Generate test-environment sets");
    CLI::App* kill = app.add_subcommand("kill", "Build kill matrices");
    CLI::App* hom = app.add_subcommand("hom", "Compose and classify higher-order mutations");
    CLI::App* report = app.add_subcommand("report", "Run the full pipeline and export reports");
    CLI::App* run = app.add_subcommand("run", "Full pipeline (alias for report)");
    for (CLI::App* cmd : {train, gen_envs, kill, hom, report, run}) add_common(cmd, opts);
    kill->add_option("--criterion", criterion_arg, "Restrict to one criterion: avg, r or dtr")
        ->check(CLI::IsMember({"avg", "r", "dtr"}));

    CLI11_PARSE(app, argc, argv);

    rlmt::Stage stage = rlmt::Stage::Report;
    if (train->parsed()) stage = rlmt::Stage::Train;
    else if (gen_envs->parsed()) stage = rlmt::Stage::GenEnvs;
    else if (kill->parsed()) stage = rlmt::Stage::Kill;
    else if (hom->parsed()) stage = rlmt::Stage::Hom;

    std::optional<rlmt::Criterion> only;
    if (!criterion_arg.empty()) only = rlmt::parse_criterion(criterion_arg);

    try {
        const rlmt::CampaignConfig cfg = build_config(opts);
        rlmt::Campaign campaign(cfg);
        const rlmt::CampaignResults results = campaign.run(stage, only);
        print_summary(results, cfg, stage);
    } catch (const rlmt::UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const rlmt::ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const rlmt::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
