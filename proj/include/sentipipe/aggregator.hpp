#pragma once

#include "sentipipe/backend.hpp"
#include "sentipipe/core.hpp"
#include "sentipipe/fusion_inspector.hpp"
#include "sentipipe/knowledge_base.hpp"

#include <span>

namespace sentipipe {

// Upstream stage outputs retained for audit. Ablation variants leave the
// stages they skip unset.
struct PipelineTrace {
    std::optional<TextAnalysis> text;
    std::optional<VisualAnalysis> visual;
    std::optional<FusionOutput> fusion;
    std::optional<RetrievalOutput> retrieval;
};

struct FinalOutput {
    SentimentLabel label = SentimentLabel::Like;
    std::string final_report;
    Score combined_score;
    Score similar_score;
    PipelineTrace trace;
};

// Unweighted mean of the retrieved entries' label valences (similarity
// values are not weights). EmptyRetrieval on an empty list.
Score mean_similar(const std::vector<std::pair<KbEntry, double>>& similar,
                   const std::map<SentimentLabel, double>& valence_map);

// alpha*s_mm + beta*s_sim; alpha + beta must equal 1 within 1e-9 with both
// in [0, 1] (WeightViolation otherwise).
Score combine_scores(Score multimodal, Score similar, double alpha, double beta);

// One label-and-report call carrying the combined score, both reports, the
// hypotheses and the original post text (plus the post's images when the
// backend is visual-capable).
std::pair<SentimentLabel, std::string> classify(Score combined,
                                                std::string_view fusion_report,
                                                std::string_view rag_report,
                                                std::span<const std::string> hypotheses,
                                                const Post& post, ModelBackend& backend);

// Stages 1-5 in order; the first failing stage aborts the run with a
// stage-tagged error.
FinalOutput run_pipeline(const Post& post, const KbStore& store, ModelBackend& backend,
                         const PipelineConfig& config);

// Fans posts out over up to `jobs` workers; output order matches input
// order regardless of completion order.
std::vector<FinalOutput> run_batch(std::span<const Post> posts, const KbStore& store,
                                   ModelBackend& backend, const PipelineConfig& config,
                                   int jobs);

}  // namespace sentipipe
