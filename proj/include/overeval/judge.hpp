#pragma once

#include <cctype>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "overeval/client.hpp"
#include "overeval/dataset.hpp"
#include "overeval/prompts.hpp"

namespace overeval {

// Verdict domains for the three rubrics. Invalid means the re-ask budget
// was exhausted without a parsable reply.
enum class AnswerVerdict { Insufficient = 0, Correct = 1, Incorrect = 2, Invalid = 3 };
enum class MipVerdict { Abstain = 0, Answered = 1, Invalid = 2 };
enum class SelfDoubtCategory { SelfDoubt = 0, OverthinkWithoutSd = 1, NonOverthinking = 2, Invalid = 3 };

/// Parses a categorical judge reply. Accepts a bare integer from `allowed`
/// after trimming, or a first token that is such an integer with trailing
/// punctuation ("0." counts, "0x1" does not). Failure is a value, never an
/// exception.
inline std::optional<int> parse_verdict(std::string_view raw, const std::set<int>& allowed) {
    std::size_t b = raw.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return std::nullopt;
    std::size_t e = raw.find_last_not_of(" \t\r\n");
    std::string_view trimmed = raw.substr(b, e - b + 1);
    std::size_t sp = trimmed.find_first_of(" \t\r\n");
    std::string_view token = sp == std::string_view::npos ? trimmed : trimmed.substr(0, sp);

    std::size_t digits = 0;
    while (digits < token.size() && std::isdigit(static_cast<unsigned char>(token[digits])))
        ++digits;
    if (digits == 0 || digits > 6) return std::nullopt;
    for (std::size_t i = digits; i < token.size(); ++i)
        if (std::isalnum(static_cast<unsigned char>(token[i]))) return std::nullopt;

    int value = 0;
    for (std::size_t i = 0; i < digits; ++i) value = value * 10 + (token[i] - '0');
    if (allowed.count(value) == 0) return std::nullopt;
    return value;
}

/// Reply parse as the orchestrator applies it: a thinking judge gets its
/// think block stripped first, then parse_verdict runs on the remainder.
inline std::optional<int> parse_judge_reply(const std::string& raw_reply,
                                            const std::set<int>& allowed) {
    auto [thinking, answer] = split_thinking(raw_reply);
    return parse_verdict(answer.empty() ? raw_reply : answer, allowed);
}

inline const std::set<int>& allowed_values(JudgeKind kind) {
    static const std::set<int> mip{0, 1};
    static const std::set<int> three{0, 1, 2};
    return kind == JudgeKind::MipAnswer ? mip : three;
}

/// One judged item: the rubric, the parsed value (nullopt = Invalid), the
/// verbatim final reply, and how many judge calls it took.
struct JudgeResult {
    JudgeKind rubric = JudgeKind::WellDefinedAnswer;
    std::optional<int> value;
    std::string raw_reply;
    int attempts = 0;
};

inline AnswerVerdict to_answer_verdict(const JudgeResult& r) {
    return r.value ? static_cast<AnswerVerdict>(*r.value) : AnswerVerdict::Invalid;
}
inline MipVerdict to_mip_verdict(const JudgeResult& r) {
    return r.value ? static_cast<MipVerdict>(*r.value) : MipVerdict::Invalid;
}
inline SelfDoubtCategory to_self_doubt(const JudgeResult& r) {
    return r.value ? static_cast<SelfDoubtCategory>(*r.value) : SelfDoubtCategory::Invalid;
}

/// Runs the judge rubrics with bounded re-asking. A reply that does not
/// parse is retried with a cache-busting nonce appended to the user
/// message, at most `reask_budget` extra times; after that the item is
/// Invalid (counted, not fatal). Transport failures propagate.
class JudgeOrchestrator {
public:
    JudgeOrchestrator(InferenceClient& client, GenerationParams judge_params, int reask_budget = 2)
        : client_(client), params_(std::move(judge_params)), reask_budget_(reask_budget) {}

    /// Rubric chosen by record kind: MiP records get the abstain rubric,
    /// well-defined records the reference-match rubric.
    JudgeResult judge_answer(const DatasetRecord& record, const std::string& excerpt) {
        if (record.kind == DatasetKind::MissingPremise)
            return run_rubric(JudgeKind::MipAnswer, excerpt, std::nullopt);
        return run_rubric(JudgeKind::WellDefinedAnswer, excerpt, record.reference_answer);
    }

    JudgeResult judge_self_doubt(const DatasetRecord& record, const std::string& second_segment) {
        return run_rubric(JudgeKind::SelfDoubt, second_segment, record.reference_answer);
    }

    int reask_budget() const { return reask_budget_; }
    const GenerationParams& params() const { return params_; }

private:
    JudgeResult run_rubric(JudgeKind kind, const std::string& model_answer,
                           const std::optional<std::string>& reference) {
        JudgeResult result;
        result.rubric = kind;
        for (int attempt = 0; attempt <= reask_budget_; ++attempt) {
            auto messages = build_judge_messages(kind, model_answer, reference);
            if (attempt > 0)
                messages.back().content += "\n[reask " + std::to_string(attempt) + "]";
            ModelResponse resp = client_.complete(messages, params_);
            result.raw_reply = resp.raw_text;
            result.attempts = attempt + 1;
            if (auto value = parse_judge_reply(resp.raw_text, allowed_values(kind))) {
                result.value = value;
                return result;
            }
        }
        return result;
    }

    InferenceClient& client_;
    GenerationParams params_;
    int reask_budget_;
};

}  // namespace overeval
