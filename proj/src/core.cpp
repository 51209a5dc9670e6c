#include "sentipipe/core.hpp"

#include "sentipipe/util.hpp"

#include <cmath>

namespace sentipipe {

const std::array<SentimentLabel, kLabelCount>& all_labels() {
    static const std::array<SentimentLabel, kLabelCount> labels = {
        SentimentLabel::Like,    SentimentLabel::Happiness,
        SentimentLabel::Anger,   SentimentLabel::Disgust,
        SentimentLabel::Fear,    SentimentLabel::Sadness,
        SentimentLabel::Surprise,
    };
    return labels;
}

const std::string& canonical_name(SentimentLabel label) {
    static const std::array<std::string, kLabelCount> names = {
        "Like", "Happiness", "Anger", "Disgust", "Fear", "Sadness", "Surprise",
    };
    return names[static_cast<int>(label)];
}

int label_index(SentimentLabel label) {
    return static_cast<int>(label);
}

SentimentLabel parse_label(std::string_view text) {
    for (SentimentLabel label : all_labels()) {
        if (util::iequals(text, canonical_name(label))) return label;
    }
    throw UnknownLabel("unknown sentiment label: '" + std::string(text) + "'");
}

Score::Score(double value) : value_(value) {
    if (!std::isfinite(value)) {
        throw InvalidScore("score must be finite, got " + util::fmt_double(value));
    }
    if (value < -1.0 || value > 1.0) {
        throw InvalidScore("score out of [-1, 1]: " + util::fmt_double(value));
    }
}

FeatureVector::FeatureVector(std::vector<float> values) : values_(std::move(values)) {
    for (float v : values_) {
        if (!std::isfinite(v)) {
            throw InvalidFeature("feature vector entry is not finite");
        }
    }
}

const std::vector<ImageRef>& visual_refs(const VisualInput& visual) {
    if (const auto* set = std::get_if<ImageSet>(&visual)) return set->images;
    return std::get<VideoFrames>(visual).frames;
}

void Post::validate() const {
    if (util::trim(text).empty()) {
        throw EmptyText("post '" + id + "' has empty text");
    }
    if (visual_refs(visual).empty()) {
        throw InvalidArgument("post '" + id + "' has no visual content");
    }
}

PipelineConfig::PipelineConfig()
    : label_valence(default_label_valence()), stopwords(default_stopwords()) {}

void PipelineConfig::validate() const {
    if (dimension < 1) throw ConfigError("dimension_D must be >= 1");
    if (!(theta > 0.0)) throw ConfigError("theta must be > 0");
    if (top_k < 1) throw ConfigError("top_k must be >= 1");
    if (alpha < 0.0 || alpha > 1.0 || beta < 0.0 || beta > 1.0) {
        throw ConfigError("alpha and beta must lie in [0, 1]");
    }
    if (std::abs(alpha + beta - 1.0) > 1e-9) {
        throw ConfigError("alpha + beta must equal 1 (got " +
                          util::fmt_double(alpha + beta) + ")");
    }
    if (concurrency < 1) throw ConfigError("concurrency must be >= 1");
    if (backend.retry.max_attempts < 1) throw ConfigError("retry max_attempts must be >= 1");
    if (backend.timeout_ms < 1) throw ConfigError("timeout_ms must be >= 1");
    for (SentimentLabel label : all_labels()) {
        auto it = label_valence.find(label);
        if (it == label_valence.end()) {
            throw ConfigError("label_valence_map missing " + canonical_name(label));
        }
        if (!std::isfinite(it->second) || it->second < -1.0 || it->second > 1.0) {
            throw ConfigError("valence for " + canonical_name(label) +
                              " out of [-1, 1]");
        }
    }
}

std::map<SentimentLabel, double> default_label_valence() {
    return {
        {SentimentLabel::Happiness, 0.9}, {SentimentLabel::Like, 0.6},
        {SentimentLabel::Surprise, 0.1},  {SentimentLabel::Fear, -0.5},
        {SentimentLabel::Sadness, -0.6},  {SentimentLabel::Disgust, -0.7},
        {SentimentLabel::Anger, -0.8},
    };
}

const std::vector<std::string>& default_stopwords() {
    // 50 common English function words.
    static const std::vector<std::string> words = {
        "a",    "an",   "the",  "and",  "or",    "but",  "if",    "then",
        "this", "that", "these","those","of",    "at",   "by",    "for",
        "with", "about","into", "through", "during", "before", "after",
        "above","below","to",   "from", "up",    "down", "in",    "out",
        "on",   "off",  "over", "under","again", "once", "here",  "there",
        "all",  "any",  "both", "each", "is",    "are",  "was",   "were",
        "be",   "been", "being",
    };
    return words;
}

Score label_valence(SentimentLabel label,
                    const std::map<SentimentLabel, double>& valence_map) {
    auto it = valence_map.find(label);
    if (it == valence_map.end()) {
        throw ConfigError("label_valence_map missing " + canonical_name(label));
    }
    return Score(it->second);
}

}  // namespace sentipipe
