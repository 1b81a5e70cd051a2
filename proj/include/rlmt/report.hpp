#pragma once

// Render campaign results into CSV / JSON / Markdown artifacts. Every
// renderer is a pure function of its inputs; identical results produce
// byte-identical files. Kill marks: killed / not-killed / "-" (gap or
// inapplicable).

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rlmt/hom.hpp"
#include "rlmt/json_io.hpp"
#include "rlmt/stats.hpp"
#include "rlmt/testgen.hpp"
#include "rlmt/text.hpp"

namespace rlmt {

enum class ReportFormat { Csv, Json, Markdown };

inline ReportFormat parse_report_format(std::string_view s) {
    if (s == "csv") return ReportFormat::Csv;
    if (s == "json") return ReportFormat::Json;
    if (s == "markdown" || s == "md") return ReportFormat::Markdown;
    throw UsageError("unknown report format '" + std::string(s) +
                     "' (expected csv, json or markdown)");
}

struct HealthySummaryRow {
    std::string environment;
    std::string algorithm;
    double mean = 0.0;
    double sd = 0.0;
};

// One verdict on the initial (training) environment; no verdict marks an
// inapplicable mutation (e.g. an operator the algorithm cannot host).
struct InitialVerdictRow {
    std::string environment;
    std::string algorithm;
    std::string mutation;
    Criterion criterion = Criterion::R;
    std::optional<KillVerdict> verdict;
};

struct MatrixEntry {
    std::string environment;
    std::string algorithm;
    KillMatrix matrix;
    TestEnvironmentSet envs;
    std::vector<std::string> nontrivial;  // canonical labels of composition candidates
};

struct HomEntry {
    std::string environment;
    std::string algorithm;
    Criterion criterion = Criterion::R;
    HomResult result;
};

struct PopulationGap {
    std::string environment;
    std::string algorithm;
    std::string mutation;
    std::string reason;
};

struct CampaignResults {
    Json config_json = Json::object();
    std::vector<HealthySummaryRow> healthy;
    std::vector<InitialVerdictRow> initial;
    std::vector<MatrixEntry> matrices;
    std::vector<HomEntry> homs;
    std::vector<PopulationGap> gaps;
};

namespace detail {
inline std::string verdict_mark(const std::optional<KillVerdict>& v) {
    if (!v) return "-";
    return v->killed ? "killed" : "not-killed";
}
}  // namespace detail

// Table-I shape: evaluation return of the healthy population as "mean (sd)".
inline std::string render_healthy_summary_csv(const CampaignResults& results) {
    std::string out = "environment,algorithm,healthy_return\n";
    for (const auto& row : results.healthy) {
        out += row.environment + ',' + row.algorithm + ',' + format_compact1(row.mean) + " (" +
               format_compact1(row.sd) + ")\n";
    }
    return out;
}

// Table-III shape: per-criterion verdicts on the initial environment.
inline std::string render_initial_verdicts_csv(const CampaignResults& results) {
    std::string out = "environment,algorithm,mutation,criterion,verdict\n";
    for (const auto& row : results.initial) {
        out += row.environment + ',' + row.algorithm + ',' + row.mutation + ',' +
               std::string(criterion_name(row.criterion)) + ',' + detail::verdict_mark(row.verdict) +
               '\n';
    }
    return out;
}

// Table-IV shape: kills per FOM over the generated environment set ("k/n");
// non-trivial rows are the composition candidates.
inline std::string render_kill_counts_csv(const CampaignResults& results) {
    std::string out = "environment,algorithm,criterion,mutation,kills,nontrivial\n";
    for (const auto& entry : results.matrices) {
        const auto& m = entry.matrix;
        const int n_envs = static_cast<int>(m.columns.size());
        for (std::size_t r = 0; r < m.rows.size(); ++r) {
            out += entry.environment + ',' + entry.algorithm + ',' +
                   std::string(criterion_name(m.criterion)) + ',' + m.row_labels[r] + ',';
            if (!m.row_complete(r)) {
                out += "-,-\n";
                continue;
            }
            const int kills = m.kill_count(r);
            out += format_int(kills) + '/' + format_int(n_envs) + ',';
            out += (kills != 0 && kills != n_envs) ? "yes" : "no";
            out += '\n';
        }
    }
    return out;
}

// Table-V shape (exact column set).
inline std::string render_hom_summary_csv(const CampaignResults& results) {
    std::string out = "environment,algorithm,criterion,hom_count,ns,wsc,wsd,ssc\n";
    for (const auto& entry : results.homs) {
        const auto& s = entry.result.summary;
        out += entry.environment + ',' + entry.algorithm + ',' +
               std::string(criterion_name(entry.criterion)) + ',' + format_int(s.hom_count) + ',' +
               format_int(s.ns) + ',' + format_int(s.wsc) + ',' + format_int(s.wsd) + ',' +
               format_int(s.ssc) + '\n';
    }
    return out;
}

inline Json to_json(const KillMatrix& m) {
    Json columns = Json::array();
    for (const auto& cfg : m.columns) {
        Json c = to_json(cfg);
        c["label"] = config_label(cfg);
        columns.push_back(std::move(c));
    }
    Json rows = Json::array();
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
        Json cells = Json::array();
        for (const auto& cell : m.cells[r]) cells.push_back(cell ? to_json(*cell) : Json(nullptr));
        rows.push_back(Json{{"mutation", m.row_labels[r]}, {"cells", std::move(cells)}});
    }
    return Json{{"criterion", criterion_name(m.criterion)},
                {"columns", std::move(columns)},
                {"rows", std::move(rows)}};
}

inline Json to_json(const HomResult& r) {
    Json classifications = Json::array();
    for (const auto& c : r.classifications) {
        classifications.push_back(Json{{"hom", c.label},
                                       {"type", hom_type_name(c.type)},
                                       {"killed_by", c.t_h},
                                       {"constituent_1_killed_by", c.t_1},
                                       {"constituent_2_killed_by", c.t_2}});
    }
    return Json{{"classifications", std::move(classifications)},
                {"summary",
                 Json{{"hom_count", r.summary.hom_count},
                      {"not_killed", r.summary.not_killed},
                      {"ns", r.summary.ns},
                      {"wsc", r.summary.wsc},
                      {"wsd", r.summary.wsd},
                      {"ssc", r.summary.ssc}}},
                {"skipped", r.skipped}};
}

inline Json render_report_json(const CampaignResults& results) {
    Json healthy = Json::array();
    for (const auto& row : results.healthy)
        healthy.push_back(Json{{"environment", row.environment},
                               {"algorithm", row.algorithm},
                               {"mean", row.mean},
                               {"sd", row.sd}});
    Json initial = Json::array();
    for (const auto& row : results.initial)
        initial.push_back(Json{{"environment", row.environment},
                               {"algorithm", row.algorithm},
                               {"mutation", row.mutation},
                               {"criterion", criterion_name(row.criterion)},
                               {"verdict", row.verdict ? to_json(*row.verdict) : Json(nullptr)}});
    Json matrices = Json::array();
    for (const auto& entry : results.matrices) {
        matrices.push_back(Json{{"environment", entry.environment},
                                {"algorithm", entry.algorithm},
                                {"environments", to_json(entry.envs)},
                                {"matrix", to_json(entry.matrix)},
                                {"nontrivial_foms", entry.nontrivial}});
    }
    Json homs = Json::array();
    for (const auto& entry : results.homs)
        homs.push_back(Json{{"environment", entry.environment},
                            {"algorithm", entry.algorithm},
                            {"criterion", criterion_name(entry.criterion)},
                            {"result", to_json(entry.result)}});
    Json gaps = Json::array();
    for (const auto& g : results.gaps)
        gaps.push_back(Json{{"environment", g.environment},
                            {"algorithm", g.algorithm},
                            {"mutation", g.mutation},
                            {"reason", g.reason}});
    return Json{{"config", results.config_json}, {"healthy", std::move(healthy)},
                {"initial_verdicts", std::move(initial)}, {"kill_matrices", std::move(matrices)},
                {"hom_analysis", std::move(homs)},       {"gaps", std::move(gaps)}};
}

inline std::string render_report_markdown(const CampaignResults& results) {
    std::string out = "# Mutation-testing campaign report\n";

    out += "\n## Healthy populations\n\n";
    out += "| environment | algorithm | return mean (sd) |\n|---|---|---|\n";
    for (const auto& row : results.healthy)
        out += "| " + row.environment + " | " + row.algorithm + " | " + format_compact1(row.mean) +
               " (" + format_compact1(row.sd) + ") |\n";

    out += "\n## Verdicts on the initial environment\n\n";
    out += "| environment | algorithm | mutation | criterion | verdict |\n|---|---|---|---|---|\n";
    for (const auto& row : results.initial)
        out += "| " + row.environment + " | " + row.algorithm + " | " + row.mutation + " | " +
               std::string(criterion_name(row.criterion)) + " | " +
               detail::verdict_mark(row.verdict) + " |\n";

    out += "\n## Kills over generated environments\n\n";
    out += "| environment | algorithm | criterion | mutation | kills | non-trivial |\n"
           "|---|---|---|---|---|---|\n";
    for (const auto& entry : results.matrices) {
        const auto& m = entry.matrix;
        for (std::size_t r = 0; r < m.rows.size(); ++r) {
            out += "| " + entry.environment + " | " + entry.algorithm + " | " +
                   std::string(criterion_name(m.criterion)) + " | " + m.row_labels[r] + " | ";
            if (!m.row_complete(r)) {
                out += "- | - |\n";
                continue;
            }
            const int kills = m.kill_count(r);
            out += format_int(kills) + "/" + format_int(static_cast<long long>(m.columns.size())) +
                   " | " + ((kills != 0 && kills != static_cast<int>(m.columns.size())) ? "yes" : "no") +
                   " |\n";
        }
    }

    out += "\n## Higher-order mutations\n\n";
    out += "| environment | algorithm | criterion | HOMs | NS | WSC | WSD | SSC |\n"
           "|---|---|---|---|---|---|---|---|\n";
    for (const auto& entry : results.homs) {
        const auto& s = entry.result.summary;
        out += "| " + entry.environment + " | " + entry.algorithm + " | " +
               std::string(criterion_name(entry.criterion)) + " | " + format_int(s.hom_count) +
               " | " + format_int(s.ns) + " | " + format_int(s.wsc) + " | " + format_int(s.wsd) +
               " | " + format_int(s.ssc) + " |\n";
    }

    if (!results.gaps.empty()) {
        out += "\n## Gaps\n\n";
        for (const auto& g : results.gaps)
            out += "- " + g.environment + " / " + g.algorithm + " / " + g.mutation + ": " +
                   g.reason + "\n";
    }
    return out;
}

// Writes the artifacts for one format into dir and returns their paths.
inline std::vector<std::filesystem::path> export_report(const CampaignResults& results,
                                                        ReportFormat format,
                                                        const std::filesystem::path& dir) {
    std::vector<std::pair<std::string, std::string>> files;
    switch (format) {
        case ReportFormat::Csv:
            files.emplace_back("healthy_summary.csv", render_healthy_summary_csv(results));
            files.emplace_back("initial_verdicts.csv", render_initial_verdicts_csv(results));
            files.emplace_back("kill_counts.csv", render_kill_counts_csv(results));
            files.emplace_back("hom_summary.csv", render_hom_summary_csv(results));
            break;
        case ReportFormat::Json:
            files.emplace_back("report.json", render_report_json(results).dump(2) + "\n");
            for (const auto& entry : results.matrices) {
                std::string name = "kill_matrix_";
                name += criterion_cli_name(entry.matrix.criterion);
                name += '_';
                name += entry.environment + '_' + entry.algorithm + ".json";
                files.emplace_back(std::move(name), to_json(entry.matrix).dump(2) + "\n");
            }
            break;
        case ReportFormat::Markdown:
            files.emplace_back("report.md", render_report_markdown(results));
            break;
    }
    std::vector<std::filesystem::path> paths;
    for (const auto& [name, content] : files) {
        const auto path = dir / name;
        write_text_file_atomic(path, content);
        paths.push_back(path);
    }
    return paths;
}

}  // namespace rlmt
