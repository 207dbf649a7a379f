#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "overeval/errors.hpp"
#include "overeval/metrics.hpp"

namespace overeval {

enum class ReportLayout { WellDefined, MiP, SelfDoubt };

/// The three renderings of one ComparisonReport. Every number in them is a
/// presentation-rounded copy of a report field; nothing is recomputed at
/// render time.
struct ReportBundle {
    std::string markdown_text;
    std::vector<std::string> csv_rows;  // includes the header row
    nlohmann::json json_blob;
    std::string generated_at;
    std::string config_digest;
};

inline constexpr const char* kCsvHeader =
    "dataset,model,variant,n,length,accuracy_or_abstain,steps,sd,ot_wo_sd,not";

namespace detail {

inline std::string fmt1(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f", round1(v));
    return buf;
}

inline std::string fmt_signed1(double v) {
    double r = round1(v);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%+.1f", r);
    return buf;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

inline std::string bold_if(const std::string& s, bool best) {
    return best ? "**" + s + "**" : s;
}

// Length: lower is better. Accuracy/abstain: higher is better. Ties mark both.
struct PairMarks {
    bool base_len_best, ours_len_best, base_score_best, ours_score_best;
};

inline PairMarks mark_pair(double base_len, double ours_len, std::optional<double> base_score,
                           std::optional<double> ours_score) {
    PairMarks m{};
    long bl = round_tokens(base_len), ol = round_tokens(ours_len);
    m.base_len_best = bl <= ol;
    m.ours_len_best = ol <= bl;
    if (base_score && ours_score) {
        double bs = round1(*base_score), os = round1(*ours_score);
        m.base_score_best = bs >= os;
        m.ours_score_best = os >= bs;
    }
    return m;
}

inline std::string pair_cell(double length, std::optional<double> score, bool len_best,
                             bool score_best) {
    std::string out = bold_if(std::to_string(round_tokens(length)), len_best);
    out += " / ";
    out += score ? bold_if(fmt1(*score), score_best) : std::string("-");
    return out;
}

inline std::string iso_timestamp_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline nlohmann::json summary_json(const RunSummary& s) {
    nlohmann::json j;
    j["n_total"] = s.n_total;
    j["n_valid"] = s.n_valid;
    j["length"] = round_tokens(s.avg_length_tokens);
    if (s.accuracy_pct) j["accuracy"] = round1(*s.accuracy_pct);
    if (s.abstain_pct) j["abstain"] = round1(*s.abstain_pct);
    j["steps"] = round1(s.avg_steps);
    if (s.sd_pct) j["sd"] = round1(*s.sd_pct);
    if (s.ot_wo_sd_pct) j["ot_wo_sd"] = round1(*s.ot_wo_sd_pct);
    if (s.not_pct) j["not"] = round1(*s.not_pct);
    j["approx_length"] = s.approx_length_flag;
    return j;
}

inline std::string summary_csv_line(const RunSummary& s) {
    auto opt1 = [](const std::optional<double>& v) { return v ? fmt1(*v) : std::string(); };
    std::optional<double> score = s.accuracy_pct ? s.accuracy_pct : s.abstain_pct;
    std::string line = csv_escape(s.dataset_name) + "," + csv_escape(s.model_id) + "," +
                       to_string(s.variant) + "," + std::to_string(s.n_total) + "," +
                       std::to_string(round_tokens(s.avg_length_tokens)) + "," + opt1(score) +
                       "," + fmt1(s.avg_steps) + "," + opt1(s.sd_pct) + "," +
                       opt1(s.ot_wo_sd_pct) + "," + opt1(s.not_pct);
    return line;
}

inline std::vector<const ComparisonRow*> rows_for_layout(const ComparisonReport& report,
                                                         ReportLayout layout) {
    std::vector<const ComparisonRow*> rows;
    for (const auto& row : report.rows) {
        switch (layout) {
            case ReportLayout::WellDefined:
                if (row.kind == DatasetKind::WellDefined) rows.push_back(&row);
                break;
            case ReportLayout::MiP:
                if (row.kind == DatasetKind::MissingPremise) rows.push_back(&row);
                break;
            case ReportLayout::SelfDoubt:
                if (row.sd_delta_points) rows.push_back(&row);
                break;
        }
    }
    return rows;
}

inline std::string render_paired_table(const std::vector<const ComparisonRow*>& rows,
                                       const std::vector<ModelAverageRow>& model_averages,
                                       bool with_average, const char* score_label) {
    std::set<std::string> dataset_set;
    std::set<std::string> model_set;
    std::map<std::pair<std::string, std::string>, const ComparisonRow*> cell;
    for (const ComparisonRow* r : rows) {
        dataset_set.insert(r->dataset_name);
        model_set.insert(r->model_id);
        cell[{r->dataset_name, r->model_id}] = r;
    }
    std::map<std::string, const ModelAverageRow*> averages;
    for (const auto& a : model_averages) averages[a.model_id] = &a;

    std::string md = "| Model | Method |";
    std::string sep = "| --- | --- |";
    for (const auto& ds : dataset_set) {
        md += " " + ds + " Length / " + score_label + " |";
        sep += " --- |";
    }
    if (with_average) {
        md += " Average Length / " + std::string(score_label) + " |";
        sep += " --- |";
    }
    md += "\n" + sep + "\n";

    for (const auto& model : model_set) {
        std::string base_line = "| " + model + " | baseline |";
        std::string ours_line = "| | ours |";
        for (const auto& ds : dataset_set) {
            auto it = cell.find({ds, model});
            if (it == cell.end()) {
                base_line += " - |";
                ours_line += " - |";
                continue;
            }
            const ComparisonRow* r = it->second;
            std::optional<double> bs =
                r->baseline.accuracy_pct ? r->baseline.accuracy_pct : r->baseline.abstain_pct;
            std::optional<double> os =
                r->ours.accuracy_pct ? r->ours.accuracy_pct : r->ours.abstain_pct;
            PairMarks m = mark_pair(r->baseline.avg_length_tokens, r->ours.avg_length_tokens, bs, os);
            base_line += " " + pair_cell(r->baseline.avg_length_tokens, bs, m.base_len_best,
                                         m.base_score_best) + " |";
            ours_line += " " + pair_cell(r->ours.avg_length_tokens, os, m.ours_len_best,
                                         m.ours_score_best) + " |";
        }
        if (with_average) {
            auto it = averages.find(model);
            if (it == averages.end()) {
                base_line += " - |";
                ours_line += " - |";
            } else {
                const ModelAverageRow* a = it->second;
                PairMarks m = mark_pair(a->baseline_length, a->ours_length, a->baseline_accuracy,
                                        a->ours_accuracy);
                base_line += " " + pair_cell(a->baseline_length, a->baseline_accuracy,
                                             m.base_len_best, m.base_score_best) + " |";
                ours_line += " " + pair_cell(a->ours_length, a->ours_accuracy, m.ours_len_best,
                                             m.ours_score_best) + " |";
            }
        }
        md += base_line + "\n" + ours_line + "\n";
    }
    return md;
}

inline std::string render_self_doubt_table(const std::vector<const ComparisonRow*>& rows) {
    std::set<std::string> models;
    for (const ComparisonRow* r : rows) models.insert(r->model_id);
    std::string md;
    for (const auto& model : models) {
        std::vector<const ComparisonRow*> mine;
        for (const ComparisonRow* r : rows)
            if (r->model_id == model) mine.push_back(r);
        md += "### " + model + "\n\n| Method |";
        std::string sep = "| --- |";
        for (const ComparisonRow* r : mine) {
            md += " " + r->dataset_name + " |";
            sep += " --- |";
        }
        md += "\n" + sep + "\n";
        std::string base = "| baseline |", ours = "| ours |", delta = "| Δ |";
        for (const ComparisonRow* r : mine) {
            base += " " + fmt1(*r->baseline.sd_pct) + " |";
            ours += " " + fmt1(*r->ours.sd_pct) + " |";
            delta += " " + fmt_signed1(*r->sd_delta_points) + " |";
        }
        md += base + "\n" + ours + "\n" + delta + "\n\n";
    }
    return md;
}

inline nlohmann::json comparison_json(const ComparisonReport& report,
                                      const std::vector<const ComparisonRow*>& rows,
                                      const std::string& config_digest) {
    nlohmann::json j;
    j["config_digest"] = config_digest;
    j["cells"] = nlohmann::json::array();
    for (const ComparisonRow* r : rows) {
        nlohmann::json cell;
        cell["dataset"] = r->dataset_name;
        cell["model"] = r->model_id;
        cell["kind"] = to_string(r->kind);
        cell["baseline"] = summary_json(r->baseline);
        cell["ours"] = summary_json(r->ours);
        if (r->sd_delta_points) cell["sd_delta_points"] = round1(*r->sd_delta_points);
        j["cells"].push_back(cell);
    }
    nlohmann::json agg = nlohmann::json::object();
    if (report.aggregate_length_delta_pct)
        agg["length_delta_pct"] = round1(*report.aggregate_length_delta_pct);
    if (report.aggregate_accuracy_delta_pct)
        agg["accuracy_delta_pct"] = round1(*report.aggregate_accuracy_delta_pct);
    j["aggregate"] = agg;
    j["model_averages"] = nlohmann::json::array();
    for (const auto& a : report.model_averages) {
        nlohmann::json m;
        m["model"] = a.model_id;
        m["baseline"] = {{"length", round_tokens(a.baseline_length)}};
        m["ours"] = {{"length", round_tokens(a.ours_length)}};
        if (a.baseline_accuracy) m["baseline"]["accuracy"] = round1(*a.baseline_accuracy);
        if (a.ours_accuracy) m["ours"]["accuracy"] = round1(*a.ours_accuracy);
        j["model_averages"].push_back(m);
    }
    return j;
}

}  // namespace detail

/// Renders one layout of a comparison. WellDefined mirrors the paper-style
/// Length/Accuracy table with an Average pair, MiP the Length/Abstain
/// table, SelfDoubt the baseline/ours/delta rows. Best value of each
/// column pair is bolded; ties mark both.
inline ReportBundle render_comparison(const ComparisonReport& report, ReportLayout layout,
                                      const std::string& config_digest = "") {
    if (report.rows.empty()) throw ValidationError("comparison report has no cells");
    auto rows = detail::rows_for_layout(report, layout);
    if (rows.empty()) throw ValidationError("no cells match the requested layout");

    ReportBundle bundle;
    bundle.config_digest = config_digest;
    bundle.generated_at = detail::iso_timestamp_now();
    switch (layout) {
        case ReportLayout::WellDefined:
            bundle.markdown_text = "## Well-defined datasets\n\n" +
                                   detail::render_paired_table(rows, report.model_averages, true,
                                                               "Accuracy");
            break;
        case ReportLayout::MiP:
            bundle.markdown_text =
                "## Missing-premise datasets\n\n" +
                detail::render_paired_table(rows, {}, false, "Abstain");
            break;
        case ReportLayout::SelfDoubt:
            bundle.markdown_text =
                "## Self-doubt ratio\n\n" + detail::render_self_doubt_table(rows);
            break;
    }
    bundle.csv_rows.push_back(kCsvHeader);
    for (const ComparisonRow* r : rows) {
        bundle.csv_rows.push_back(detail::summary_csv_line(r->baseline));
        bundle.csv_rows.push_back(detail::summary_csv_line(r->ours));
    }
    bundle.json_blob = detail::comparison_json(report, rows, config_digest);
    return bundle;
}

/// All applicable layouts merged into one bundle; what the run writes to
/// disk. The JSON covers every cell once.
inline ReportBundle render_full(const ComparisonReport& report,
                                const std::string& config_digest) {
    ReportBundle bundle;
    bundle.config_digest = config_digest;
    bundle.generated_at = detail::iso_timestamp_now();
    bundle.markdown_text = "# Evaluation report\n\nconfig_digest: " + config_digest + "\n\n";
    std::vector<const ComparisonRow*> all_rows;
    for (const auto& r : report.rows) all_rows.push_back(&r);

    for (ReportLayout layout :
         {ReportLayout::WellDefined, ReportLayout::MiP, ReportLayout::SelfDoubt}) {
        if (detail::rows_for_layout(report, layout).empty()) continue;
        bundle.markdown_text += render_comparison(report, layout, config_digest).markdown_text;
        bundle.markdown_text += "\n";
    }
    if (report.aggregate_length_delta_pct)
        bundle.markdown_text += "Aggregate length delta: " +
                                detail::fmt_signed1(*report.aggregate_length_delta_pct) + "%\n";
    if (report.aggregate_accuracy_delta_pct)
        bundle.markdown_text += "Aggregate accuracy delta: " +
                                detail::fmt_signed1(*report.aggregate_accuracy_delta_pct) + "%\n";

    bundle.csv_rows.push_back(kCsvHeader);
    for (const ComparisonRow* r : all_rows) {
        bundle.csv_rows.push_back(detail::summary_csv_line(r->baseline));
        bundle.csv_rows.push_back(detail::summary_csv_line(r->ours));
    }
    bundle.json_blob = detail::comparison_json(report, all_rows, config_digest);
    return bundle;
}

/// Single-variant fallback: plain summary table, no deltas.
inline ReportBundle render_summaries(const std::vector<RunSummary>& summaries,
                                     const std::string& config_digest) {
    ReportBundle bundle;
    bundle.config_digest = config_digest;
    bundle.generated_at = detail::iso_timestamp_now();
    bundle.markdown_text = "# Evaluation report (single variant)\n\n";
    bundle.csv_rows.push_back(kCsvHeader);
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& s : summaries) {
        bundle.csv_rows.push_back(detail::summary_csv_line(s));
        nlohmann::json c;
        c["dataset"] = s.dataset_name;
        c["model"] = s.model_id;
        c["variant"] = to_string(s.variant);
        c["kind"] = to_string(s.kind);
        c[to_string(s.variant)] = detail::summary_json(s);
        cells.push_back(c);
    }
    bundle.json_blob = {{"config_digest", config_digest}, {"cells", cells}};
    for (const auto& row : bundle.csv_rows) bundle.markdown_text += row + "\n";
    return bundle;
}

/// Run accounting summary, shaped for humans; not byte-stable across runs.
struct RunManifestStats {
    std::string config_digest;
    long total = 0;
    long judged = 0;
    long failed = 0;
    long pending = 0;
    std::map<std::string, long> cell_completed;  // "dataset/model/variant" -> judged count
    long cache_hits = 0;
    long network_calls = 0;
    long invalid_answer = 0;
    long invalid_sd = 0;
    std::string started_at;
    std::string finished_at;
};

inline std::string render_run_manifest(const RunManifestStats& m) {
    std::string out;
    out += "config_digest: " + m.config_digest + "\n";
    out += "tasks: total=" + std::to_string(m.total) + " judged=" + std::to_string(m.judged) +
           " failed=" + std::to_string(m.failed) + " pending=" + std::to_string(m.pending) + "\n";
    for (const auto& [cell, count] : m.cell_completed)
        out += "cell " + cell + ": completed=" + std::to_string(count) + "\n";
    long requests = m.cache_hits + m.network_calls;
    double rate = requests > 0 ? 100.0 * m.cache_hits / requests : 0.0;
    out += "cache: hits=" + std::to_string(m.cache_hits) +
           " network_calls=" + std::to_string(m.network_calls) +
           " hit_rate=" + detail::fmt1(rate) + "%\n";
    out += "invalid_verdicts: answer=" + std::to_string(m.invalid_answer) +
           " sd=" + std::to_string(m.invalid_sd) + "\n";
    if (!m.started_at.empty()) out += "started: " + m.started_at + "\n";
    if (!m.finished_at.empty()) out += "finished: " + m.finished_at + "\n";
    return out;
}

/// Writes report.md, report.csv, report.json under `out_dir`.
inline void write_bundle(const ReportBundle& bundle, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream md(out_dir / "report.md", std::ios::binary);
        if (!md) throw IoError("cannot write report.md");
        md << bundle.markdown_text;
    }
    {
        std::ofstream csv(out_dir / "report.csv", std::ios::binary);
        if (!csv) throw IoError("cannot write report.csv");
        for (const auto& row : bundle.csv_rows) csv << row << "\n";
    }
    {
        std::ofstream js(out_dir / "report.json", std::ios::binary);
        if (!js) throw IoError("cannot write report.json");
        js << bundle.json_blob.dump(2) << "\n";
    }
}

}  // namespace overeval
