#pragma once

#include "sentipipe/backend.hpp"
#include "sentipipe/core.hpp"
#include "sentipipe/image_analyst.hpp"
#include "sentipipe/text_analyst.hpp"

namespace sentipipe {

// Stage 3 output: the multimodal score, the cross-modal difference metrics
// and any refinement hypotheses raised when they exceed theta.
struct FusionOutput {
    Score multimodal_score;
    std::string fusion_report;
    double delta_text = 0.0;
    double delta_image = 0.0;
    std::vector<std::string> hypotheses;  // empty when no conflict
    FeatureVector combined_features;      // length 2*D, text half first

    void validate(const Score& text_score, const Score& visual_score,
                  double theta, int dimension) const;
};

// Mean-pools segment features and frame features to one D-vector each and
// concatenates them (text half first) into a 2*D vector.
FeatureVector combine_features(const TextAnalysis& text, const VisualAnalysis& visual,
                               int dimension);

// One score-and-report model call over the combined features; the prompt
// carries both modality summaries.
std::pair<Score, std::string> fuse(const FeatureVector& combined,
                                   std::string_view text_summary,
                                   std::string_view visual_report,
                                   ModelBackend& backend, int dimension);

// (|s_mm - s_text|, |s_mm - s_visual|), each in [0, 2].
std::pair<double, double> compute_deltas(Score multimodal, Score text, Score visual);

struct RefinementContext {
    const Post* post = nullptr;  // original input, attached when available
    const TextAnalysis* text = nullptr;
    const VisualAnalysis* visual = nullptr;
    Score multimodal;
};

// Strictly-above-theta trigger: returns an empty list without any model
// call when max(deltas) <= theta, otherwise one hypotheses call.
std::vector<std::string> maybe_refine(std::pair<double, double> deltas, double theta,
                                      const RefinementContext& context,
                                      ModelBackend& backend);

FusionOutput run_fusion_inspector(const Post& post, const TextAnalysis& text,
                                  const VisualAnalysis& visual, ModelBackend& backend,
                                  const PipelineConfig& config);

// Deterministic one-line rendering of a text analysis for prompts.
std::string text_summary_line(const TextAnalysis& text);

}  // namespace sentipipe
