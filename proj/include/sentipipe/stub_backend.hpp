#pragma once

#include "sentipipe/backend.hpp"

namespace sentipipe {

// Deterministic offline backend. Every rule is count- or hash-based, so
// identical inputs produce bit-identical outputs across runs and platforms.
//
//  - text scoring: (pos - neg) / (pos + neg + 1) over lexicon terms
//  - frame scoring: first component of the frame embedding, clamped
//  - fusion: mean of the combined vector's two halves' means, clamped
//  - retrieval summary: label histogram of the rendered entries
//  - classification: lexicon keyword in the post text, else the label whose
//    valence is nearest to the combined score (ties by name, ascending)
//  - embedding: seeded hash expanded to D values in [-1, 1], L2-normalized
class StubBackend : public ModelBackend {
  public:
    StubBackend(StubLexicon lexicon, int dimension,
                std::map<SentimentLabel, double> valence_map);
    explicit StubBackend(const PipelineConfig& config);

    bool visual_capable() const override { return true; }

    const StubLexicon& lexicon() const { return lexicon_; }

  protected:
    ModelResponse do_complete(const ModelRequest& request) override;
    FeatureVector do_embed_text(std::string_view text) override;
    FeatureVector do_embed_image(std::span<const std::uint8_t> bytes) override;

  private:
    FeatureVector expand_seed(std::uint64_t seed) const;
    ModelResponse score_visual(const ModelRequest& request);
    ModelResponse score_fusion(const ModelRequest& request);
    ModelResponse score_text(const ModelRequest& request);
    ModelResponse summarize_labels(const ModelRequest& request);
    ModelResponse classify_post(const ModelRequest& request);

    StubLexicon lexicon_;
    int dimension_;
    std::map<SentimentLabel, double> valence_map_;
};

}  // namespace sentipipe
