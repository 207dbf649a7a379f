#pragma once

#include <optional>
#include <string>
#include <vector>

#include "overeval/digest.hpp"
#include "overeval/errors.hpp"

namespace overeval {

enum class PromptVariant { Baseline, Ours };

inline std::string to_string(PromptVariant v) {
    return v == PromptVariant::Baseline ? "baseline" : "ours";
}

inline PromptVariant variant_from_string(const std::string& s) {
    if (s == "baseline") return PromptVariant::Baseline;
    if (s == "ours") return PromptVariant::Ours;
    throw ConfigError("unknown variant: " + s);
}

enum class Role { System, User };

struct ChatMessage {
    Role role = Role::User;
    std::string content;
    bool operator==(const ChatMessage&) const = default;
};

enum class JudgeKind { MipAnswer, WellDefinedAnswer, SelfDoubt };

// Premise-check suffix appended to the question under the Ours variant.
inline constexpr const char* kOursSuffix =
    "Before reasoning deeply, check whether all necessary information is available. "
    "If any key data is missing or ambiguous, explicitly state that first; otherwise, "
    "answer it with the minimum number of tokens required.";

// The three judge rubrics. These are fixed protocol constants; any edit here
// changes the digests printed by `prompts show`.
inline constexpr const char* kMipJudgeSystem =
    "You are a helpful assistant that evaluates the quality of a model’s answer. "
    "You will be given a question and a model’s answer. You need to evaluate the "
    "correctness of the model’s answer. If the answer explicitly says that the "
    "condition of the question is insufficient, you should return 0. If the model "
    "provides an answer that is a number or formula with variables, you should "
    "return 1. Please only return the number, no other text.";

inline constexpr const char* kWellDefinedJudgeSystem =
    "You are a helpful assistant that evaluates the quality of a model’s answer. "
    "You will be given a question and a model’s answer. You need to evaluate the "
    "correctness of the model’s answer. If the model output says that the condition "
    "of the question is insufficient, you should return 0. Otherwise, if the model "
    "give a clear answer and matches the reference answer, you should return 1. If "
    "the model’s answer does not match the reference answer, you should return 2. "
    "Please only return the number, no other text.";

inline constexpr const char* kSelfDoubtJudgeSystem =
    "You are a helpful assistant tasked with evaluating the quality of a model’s "
    "answer. You will be given a question, a reference answer and the model’s "
    "answer. Evaluate the model’s answer according to the following criteria:\n\n"
    "- Return 0 if the answer includes unnecessarily long reasoning and repeats "
    "verification of already correct answer;\n\n"
    "- Return 1 if the answer is unnecessarily long but does not include redundant "
    "verification;\n\n"
    "- Return 2 if the answer avoids both unnecessary reasoning and redundant "
    "verification.\n\n"
    "Return only the appropriate number. Do not include any explanation or extra text.";

inline const char* judge_system_prompt(JudgeKind kind) {
    switch (kind) {
        case JudgeKind::MipAnswer: return kMipJudgeSystem;
        case JudgeKind::WellDefinedAnswer: return kWellDefinedJudgeSystem;
        case JudgeKind::SelfDoubt: return kSelfDoubtJudgeSystem;
    }
    return "";
}

/// Candidate prompt for one question. Baseline sends the question verbatim;
/// Ours appends the premise-check suffix after a single space.
inline std::vector<ChatMessage> build_user_prompt(const std::string& question,
                                                  PromptVariant variant) {
    if (question.empty()) throw ValidationError("question must be nonempty");
    std::string content = question;
    if (variant == PromptVariant::Ours) content += std::string(" ") + kOursSuffix;
    return {ChatMessage{Role::User, std::move(content)}};
}

/// Judge message pair for one rubric. The user message carries the model
/// answer and, for the reference-based rubrics, the reference answer.
inline std::vector<ChatMessage> build_judge_messages(
    JudgeKind kind, const std::string& model_answer,
    const std::optional<std::string>& reference_answer = std::nullopt) {
    if (model_answer.empty()) throw ValidationError("model answer must be nonempty");
    const bool needs_reference = kind != JudgeKind::MipAnswer;
    if (needs_reference && !reference_answer)
        throw ValidationError("rubric requires a reference answer");

    std::string user = "Model answer: " + model_answer + "\n";
    if (needs_reference) user += "Reference answer: " + *reference_answer + "\n";
    return {ChatMessage{Role::System, judge_system_prompt(kind)},
            ChatMessage{Role::User, std::move(user)}};
}

/// Digest of each embedded template, for audit output.
inline std::string prompt_digest(const std::string& text) { return sha256_hex(text); }

}  // namespace overeval
