#pragma once

#include "sentipipe/core.hpp"

#include <atomic>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace sentipipe {

// What shape of answer a model call must produce.
enum class ResponseSchema {
    ScoreAndReport,
    ScoreOnly,
    ReportOnly,
    LabelAndReport,
    Hypotheses,
};

struct TextPart {
    std::string text;
};

struct ImagePart {
    std::vector<std::uint8_t> bytes;  // may be empty for precomputed-vector refs
    std::string mime;                 // "image/png" or "image/jpeg"
};

using ContentPart = std::variant<TextPart, ImagePart>;

struct ModelRequest {
    std::string role_prompt;
    std::vector<ContentPart> content;
    ResponseSchema schema = ResponseSchema::ScoreOnly;
    // Feature payload for calls whose model input is a feature vector: frame
    // scoring receives the frame features, fusion receives the combined
    // vector. The remote backend never transmits it (prompts carry the
    // textual summaries); the stub backend scores from it.
    std::optional<FeatureVector> features;

    bool has_image() const;
    std::string joined_text() const;  // text parts joined with newlines
};

struct ModelResponse {
    std::optional<Score> score;
    std::optional<std::string> report;
    std::optional<SentimentLabel> label;
    std::vector<std::string> hypotheses;
};

// Snapshot of per-kind call counts; used by tests and ablation isolation
// checks to observe which model surfaces a pipeline variant touched.
struct BackendCounters {
    long text_score_calls = 0;   // Score* schema, no image parts, no features
    long image_score_calls = 0;  // Score* schema with image parts
    long fusion_calls = 0;       // Score* schema with features, no image parts
    long report_calls = 0;
    long label_calls = 0;
    long hypothesis_calls = 0;
    long text_embeds = 0;
    long image_embeds = 0;
    long clamped_scores = 0;

    long total_completions() const {
        return text_score_calls + image_score_calls + fusion_calls +
               report_calls + label_calls + hypothesis_calls;
    }
};

// Uniform interface to the language/vision models. Stages never talk to a
// model any other way. Handles are stateless apart from counters and safe
// to share across threads.
class ModelBackend {
  public:
    virtual ~ModelBackend() = default;

    // Validates the request, dispatches, then enforces the response schema.
    // This is the single place where an out-of-range model score is clamped
    // into [-1, 1] (and logged); everything downstream can trust Score.
    ModelResponse complete(const ModelRequest& request);

    FeatureVector embed_text(std::string_view text);
    FeatureVector embed_image(std::span<const std::uint8_t> bytes);

    virtual bool visual_capable() const = 0;

    BackendCounters counters() const;
    void reset_counters();

  protected:
    virtual ModelResponse do_complete(const ModelRequest& request) = 0;
    virtual FeatureVector do_embed_text(std::string_view text) = 0;
    virtual FeatureVector do_embed_image(std::span<const std::uint8_t> bytes) = 0;

    // The sanctioned normalization point: clamps into [-1, 1] with a log
    // line, throws ProtocolError on non-finite input.
    Score normalize_score(double raw);

  private:
    void count_request(const ModelRequest& request);
    static void check_schema(const ModelRequest& request, const ModelResponse& response);

    std::atomic<long> text_score_calls_{0};
    std::atomic<long> image_score_calls_{0};
    std::atomic<long> fusion_calls_{0};
    std::atomic<long> report_calls_{0};
    std::atomic<long> label_calls_{0};
    std::atomic<long> hypothesis_calls_{0};
    std::atomic<long> text_embeds_{0};
    std::atomic<long> image_embeds_{0};
    std::atomic<long> clamped_scores_{0};
};

// Projects a raw embedding onto `dimension` entries: truncates long vectors,
// zero-pads short ones.
FeatureVector project_to_dimension(const std::vector<double>& raw, int dimension);

// ---------------------------------------------------------------------------
// Stub lexicon
// ---------------------------------------------------------------------------

struct StubLexicon {
    std::set<std::string> positive_terms;
    std::set<std::string> negative_terms;
    std::map<std::string, SentimentLabel> label_keywords;

    void validate() const;  // ConfigError if positive/negative overlap
};

const StubLexicon& default_stub_lexicon();

// Lexicon file: one term per line under "[positive]" / "[negative]"
// sections, "keyword=Label" lines under "[labels]".
StubLexicon parse_stub_lexicon(std::string_view text);
StubLexicon load_stub_lexicon(const std::string& path);

// (pos - neg) / (pos + neg + 1) over lexicon-term occurrences, counted
// after lowercasing and punctuation stripping.
Score stub_text_score(std::string_view segment, const StubLexicon& lexicon);

// Instantiates the backend the config names (stub or remote).
std::unique_ptr<ModelBackend> make_backend(const PipelineConfig& config);

}  // namespace sentipipe
