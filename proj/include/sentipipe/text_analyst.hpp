#pragma once

#include "sentipipe/backend.hpp"
#include "sentipipe/core.hpp"

namespace sentipipe {

struct Segment {
    int index = 0;          // 0-based, contiguous
    std::string text;       // non-empty after trimming
    int token_count = 0;    // whitespace-delimited tokens
};

// Stage 1 output: overall weighted score plus per-segment scores, features
// and weights.
struct TextAnalysis {
    Score overall;
    std::vector<Score> segment_scores;
    std::vector<FeatureVector> segment_features;
    std::vector<double> weights;

    // Equal list lengths >= 1, weights >= 0 summing to 1 within 1e-9,
    // overall equal to the weighted sum within 1e-9, features of length
    // `dimension`.
    void validate(int dimension) const;
};

// Normalization, stop-word removal and conservative suffix stripping.
// Sentence-boundary punctuation survives for segmentation.
std::string preprocess(std::string_view raw, const std::vector<std::string>& stopwords);

// Splits on sentence-final punctuation (. ! ? and CJK equivalents); text
// without any yields a single segment.
std::vector<Segment> segment_text(std::string_view pre);

std::vector<double> compute_weights(const std::vector<Segment>& segments,
                                    SegmentWeighting mode);

// Weighted sum of segment scores; lengths must match and weights must sum
// to 1 within 1e-9 (WeightMismatch otherwise).
Score aggregate_text(const std::vector<Score>& scores, const std::vector<double>& weights);

// Full stage 1: one score call and one embed call per segment.
TextAnalysis run_text_analyst(std::string_view text, ModelBackend& backend,
                              const PipelineConfig& config);

// Feature-only path (no scoring calls); used when building the knowledge
// base from labeled samples.
std::vector<FeatureVector> text_segment_features(std::string_view text,
                                                 ModelBackend& backend,
                                                 const PipelineConfig& config);

namespace detail {
// Conservative suffix stripping: -ing, -ed, plural -s/-es; minimum stem
// length 3; final double consonants undoubled except l/s/z.
std::string strip_suffix(const std::string& token);
}  // namespace detail

}  // namespace sentipipe
