#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "overeval/client.hpp"
#include "overeval/cot.hpp"
#include "overeval/dataset.hpp"
#include "overeval/errors.hpp"
#include "overeval/judge.hpp"
#include "overeval/prompts.hpp"

namespace overeval {

// Presentation rounding. Internal arithmetic stays at full precision;
// these are applied only when numbers are emitted.
inline double round1(double x) {
    double r = std::floor(std::abs(x) * 10.0 + 0.5) / 10.0;
    return x < 0 ? -r : r;
}
inline long round_tokens(double x) {
    double r = std::floor(std::abs(x) + 0.5);
    return static_cast<long>(x < 0 ? -r : r);
}

/// 100 x |Correct| / |valid|, Invalid verdicts excluded from the
/// denominator; absent when no valid verdicts exist.
inline std::optional<double> accuracy(std::span<const AnswerVerdict> verdicts) {
    long correct = 0, valid = 0;
    for (AnswerVerdict v : verdicts) {
        if (v == AnswerVerdict::Invalid) continue;
        ++valid;
        if (v == AnswerVerdict::Correct) ++correct;
    }
    if (valid == 0) return std::nullopt;
    return 100.0 * static_cast<double>(correct) / static_cast<double>(valid);
}

inline std::optional<double> abstain_rate(std::span<const MipVerdict> verdicts) {
    long abstained = 0, valid = 0;
    for (MipVerdict v : verdicts) {
        if (v == MipVerdict::Invalid) continue;
        ++valid;
        if (v == MipVerdict::Abstain) ++abstained;
    }
    if (valid == 0) return std::nullopt;
    return 100.0 * static_cast<double>(abstained) / static_cast<double>(valid);
}

struct SdDistribution {
    double sd_pct = 0;
    double ot_wo_sd_pct = 0;
    double not_pct = 0;
};

inline std::optional<SdDistribution> sd_distribution(std::span<const SelfDoubtCategory> cats) {
    long sd = 0, ot = 0, nt = 0;
    for (SelfDoubtCategory c : cats) {
        switch (c) {
            case SelfDoubtCategory::SelfDoubt: ++sd; break;
            case SelfDoubtCategory::OverthinkWithoutSd: ++ot; break;
            case SelfDoubtCategory::NonOverthinking: ++nt; break;
            case SelfDoubtCategory::Invalid: break;
        }
    }
    long valid = sd + ot + nt;
    if (valid == 0) return std::nullopt;
    double denom = static_cast<double>(valid);
    return SdDistribution{100.0 * sd / denom, 100.0 * ot / denom, 100.0 * nt / denom};
}

struct AverageResult {
    double avg_length_tokens = 0;
    double avg_steps = 0;
    bool approx_length = false;
};

/// Arithmetic means over integer token counts and step counts; exact under
/// permutation since the sums are integral.
inline std::optional<AverageResult> averages_from_values(std::span<const long> lengths,
                                                         std::span<const bool> usage_reported,
                                                         std::span<const long> steps) {
    if (lengths.empty() || lengths.size() != steps.size()) return std::nullopt;
    long length_sum = 0, step_sum = 0;
    bool approx = false;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        length_sum += lengths[i];
        step_sum += steps[i];
        if (i < usage_reported.size() && !usage_reported[i]) approx = true;
    }
    double n = static_cast<double>(lengths.size());
    return AverageResult{length_sum / n, step_sum / n, approx};
}

inline std::optional<AverageResult> averages(std::span<const ModelResponse> responses,
                                             std::span<const StepSplit> splits) {
    std::vector<long> lengths, steps;
    std::vector<bool> usage;
    lengths.reserve(responses.size());
    for (const auto& r : responses) {
        lengths.push_back(response_length(r));
        usage.push_back(r.has_usage);
    }
    for (const auto& s : splits) steps.push_back(static_cast<long>(s.count));
    return averages_from_values(lengths, usage, steps);
}

/// Aggregates for one (dataset x model x variant) cell.
struct RunSummary {
    std::string dataset_name;
    std::string model_id;
    PromptVariant variant = PromptVariant::Baseline;
    DatasetKind kind = DatasetKind::WellDefined;
    long n_total = 0;
    long n_valid = 0;
    std::optional<double> accuracy_pct;  // well-defined cells
    std::optional<double> abstain_pct;   // missing-premise cells
    double avg_length_tokens = 0;
    double avg_steps = 0;
    std::optional<double> sd_pct, ot_wo_sd_pct, not_pct;
    bool approx_length_flag = false;
};

struct ComparisonRow {
    std::string dataset_name;
    std::string model_id;
    DatasetKind kind = DatasetKind::WellDefined;
    RunSummary baseline;
    RunSummary ours;
    std::optional<double> sd_delta_points;  // ours - baseline, raw signed points
};

/// Per-model mean over its well-defined cells (the "Average" column pair).
struct ModelAverageRow {
    std::string model_id;
    double baseline_length = 0;
    double ours_length = 0;
    std::optional<double> baseline_accuracy;
    std::optional<double> ours_accuracy;
};

struct ComparisonReport {
    std::vector<ComparisonRow> rows;  // sorted by (dataset, model)
    std::vector<ModelAverageRow> model_averages;
    std::optional<double> aggregate_length_delta_pct;
    std::optional<double> aggregate_accuracy_delta_pct;
};

/// Pairs baseline and ours cells and computes the aggregate deltas:
/// length as the relative change of summed per-cell average lengths,
/// accuracy as the relative change of mean accuracy. These are the
/// conventions that reproduce the reference aggregate numbers.
inline ComparisonReport compare(const std::vector<RunSummary>& baseline,
                                const std::vector<RunSummary>& ours) {
    using Key = std::pair<std::string, std::string>;
    std::map<Key, const RunSummary*> base_by_cell, ours_by_cell;
    for (const auto& s : baseline) base_by_cell[{s.dataset_name, s.model_id}] = &s;
    for (const auto& s : ours) ours_by_cell[{s.dataset_name, s.model_id}] = &s;

    std::string missing;
    for (const auto& [key, _] : base_by_cell)
        if (!ours_by_cell.count(key)) missing += " ours:" + key.first + "/" + key.second;
    for (const auto& [key, _] : ours_by_cell)
        if (!base_by_cell.count(key)) missing += " baseline:" + key.first + "/" + key.second;
    if (!missing.empty()) throw ValidationError("mismatched comparison cells:" + missing);

    ComparisonReport report;
    double base_length_sum = 0, ours_length_sum = 0;
    double base_acc_sum = 0, ours_acc_sum = 0;
    long acc_cells = 0;
    for (const auto& [key, base] : base_by_cell) {
        const RunSummary* our = ours_by_cell.at(key);
        ComparisonRow row;
        row.dataset_name = key.first;
        row.model_id = key.second;
        row.kind = base->kind;
        row.baseline = *base;
        row.ours = *our;
        if (base->sd_pct && our->sd_pct) row.sd_delta_points = *our->sd_pct - *base->sd_pct;
        report.rows.push_back(std::move(row));

        base_length_sum += base->avg_length_tokens;
        ours_length_sum += our->avg_length_tokens;
        if (base->accuracy_pct && our->accuracy_pct) {
            base_acc_sum += *base->accuracy_pct;
            ours_acc_sum += *our->accuracy_pct;
            ++acc_cells;
        }
    }
    if (base_length_sum > 0)
        report.aggregate_length_delta_pct =
            100.0 * (ours_length_sum - base_length_sum) / base_length_sum;
    if (acc_cells > 0 && base_acc_sum > 0)
        report.aggregate_accuracy_delta_pct =
            100.0 * (ours_acc_sum - base_acc_sum) / base_acc_sum;

    std::map<std::string, std::vector<const ComparisonRow*>> by_model;
    for (const auto& row : report.rows)
        if (row.kind == DatasetKind::WellDefined) by_model[row.model_id].push_back(&row);
    for (const auto& [model, rows] : by_model) {
        ModelAverageRow avg;
        avg.model_id = model;
        double bl = 0, ol = 0, ba = 0, oa = 0;
        long acc_n = 0;
        for (const ComparisonRow* r : rows) {
            bl += r->baseline.avg_length_tokens;
            ol += r->ours.avg_length_tokens;
            if (r->baseline.accuracy_pct && r->ours.accuracy_pct) {
                ba += *r->baseline.accuracy_pct;
                oa += *r->ours.accuracy_pct;
                ++acc_n;
            }
        }
        double n = static_cast<double>(rows.size());
        avg.baseline_length = bl / n;
        avg.ours_length = ol / n;
        if (acc_n > 0) {
            avg.baseline_accuracy = ba / acc_n;
            avg.ours_accuracy = oa / acc_n;
        }
        report.model_averages.push_back(std::move(avg));
    }
    return report;
}

}  // namespace overeval
