#pragma once

#include <string_view>

// Shared markers for the structured prompt layout. Stage prompt builders
// emit them and the stub backend keys its deterministic rules off them, so
// the offline path parses exactly the text a remote model would see.
namespace sentipipe::prompts {

inline constexpr std::string_view kCombinedScorePrefix = "combined score: ";
inline constexpr std::string_view kPostTextHeader = "post text:";
inline constexpr std::string_view kEntryLabelPrefix = "label: ";
inline constexpr std::string_view kScoreReportFormat =
    "Respond with a single line: SCORE | one-sentence justification, "
    "with SCORE in [-1, 1].";
inline constexpr std::string_view kLabelReportFormat =
    "Respond with a single line: LABEL | one-sentence justification, where "
    "LABEL is exactly one of Like, Happiness, Anger, Disgust, Fear, "
    "Sadness, Surprise.";

}  // namespace sentipipe::prompts
