#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace overeval {

// Reasoning-step segmentation. The step delimiter is the literal byte pair
// LF LF; CRLF input is normalized to LF before splitting.
inline constexpr const char* kStepDelimiter = "\n\n";

struct StepSplit {
    std::vector<std::string> steps;
    std::size_t count = 0;
};

struct SegmentPair {
    std::string first;
    std::string second;
    std::size_t first_steps = 0;
    std::size_t second_steps = 0;
};

namespace detail {

inline std::string normalize_newlines(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\r' && i + 1 < text.size() && text[i + 1] == '\n') continue;
        out.push_back(text[i]);
    }
    return out;
}

inline bool is_blank(std::string_view s) {
    return s.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

inline std::string join_steps(const std::vector<std::string>& steps, std::size_t begin,
                              std::size_t end) {
    std::string out;
    for (std::size_t i = begin; i < end; ++i) {
        if (i > begin) out += kStepDelimiter;
        out += steps[i];
    }
    return out;
}

}  // namespace detail

/// Splits `text` on the step delimiter. Segments that are empty after
/// trimming are dropped, which absorbs the trailing delimiter reasoning
/// models tend to emit. Kept segments are untouched, so rejoining them
/// differs from the input only by the dropped blanks.
inline StepSplit split_steps(std::string_view text) {
    const std::string norm = detail::normalize_newlines(text);
    StepSplit split;
    std::size_t pos = 0;
    while (pos <= norm.size()) {
        std::size_t next = norm.find(kStepDelimiter, pos);
        std::string_view seg = next == std::string::npos
                                   ? std::string_view(norm).substr(pos)
                                   : std::string_view(norm).substr(pos, next - pos);
        if (!detail::is_blank(seg)) split.steps.emplace_back(seg);
        if (next == std::string::npos) break;
        pos = next + 2;
    }
    split.count = split.steps.size();
    return split;
}

/// Partitions the steps into a balanced prefix/suffix; for odd counts the
/// second segment takes the extra step (self-doubt shows up late, and the
/// second segment is the one judged). Returns nullopt on zero steps, which
/// callers treat as "skip self-doubt judging".
inline std::optional<SegmentPair> second_half(std::string_view text) {
    StepSplit split = split_steps(text);
    if (split.count == 0) return std::nullopt;
    SegmentPair pair;
    pair.first_steps = split.count / 2;
    pair.second_steps = split.count - pair.first_steps;
    pair.first = detail::join_steps(split.steps, 0, pair.first_steps);
    pair.second = detail::join_steps(split.steps, pair.first_steps, split.count);
    return pair;
}

/// Last two nonempty paragraphs, rejoined with the delimiter; a single
/// paragraph is returned as-is. Returns nullopt only when the text holds
/// no non-whitespace content.
inline std::optional<std::string> answer_excerpt(std::string_view text) {
    StepSplit split = split_steps(text);
    if (split.count == 0) return std::nullopt;
    std::size_t begin = split.count >= 2 ? split.count - 2 : 0;
    return detail::join_steps(split.steps, begin, split.count);
}

}  // namespace overeval
