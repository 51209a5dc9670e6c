#pragma once

#include "sentipipe/backend.hpp"
#include "sentipipe/core.hpp"

namespace sentipipe {

// Stage 2 output: per-frame scores, reports and features aggregated into an
// overall visual score (single images are the m = 1 case).
struct VisualAnalysis {
    Score overall;
    std::string report;  // one "frame k: ..." line per frame
    std::vector<Score> frame_scores;
    std::vector<FeatureVector> frame_features;
    std::vector<double> frame_weights;

    void validate(int dimension) const;
};

struct FrameAnalysis {
    Score score;
    std::string report;
    FeatureVector features;
};

// Validates pre-extracted keyframes and returns them in input order:
// paths must exist with a PNG/JPEG extension, byte refs must carry a
// recognizable image signature, precomputed vectors must match `dimension`.
std::vector<ImageRef> decompose_video(const std::vector<ImageRef>& frames, int dimension);

// One embed call plus one score-and-report call for a single frame.
FrameAnalysis analyze_frame(const ImageRef& frame, ModelBackend& backend,
                            const PipelineConfig& config);

// Weighted frame-score sum plus the joined per-frame report.
std::pair<Score, std::string> aggregate_video(const std::vector<Score>& scores,
                                              const std::vector<std::string>& reports,
                                              const std::vector<double>& weights);

VisualAnalysis run_image_analyst(const VisualInput& visual, ModelBackend& backend,
                                 const PipelineConfig& config);

// Feature-only path (no scoring calls) for knowledge-base construction.
std::vector<FeatureVector> visual_frame_features(const VisualInput& visual,
                                                 ModelBackend& backend,
                                                 const PipelineConfig& config);

}  // namespace sentipipe
