#pragma once

#include <array>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace sentipipe {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class UnknownLabel : public Error { public: using Error::Error; };
class InvalidScore : public Error { public: using Error::Error; };
class InvalidFeature : public Error { public: using Error::Error; };
class InvalidArgument : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };
class EmptyText : public Error { public: using Error::Error; };
class WeightMismatch : public Error { public: using Error::Error; };
class WeightViolation : public Error { public: using Error::Error; };
class TransportError : public Error { public: using Error::Error; };
class ProtocolError : public Error { public: using Error::Error; };
class CapabilityError : public Error { public: using Error::Error; };
class MissingFrame : public Error { public: using Error::Error; };
class DimensionMismatch : public Error { public: using Error::Error; };
class EmptyStore : public Error { public: using Error::Error; };
class DuplicateId : public Error { public: using Error::Error; };
class EmptyRetrieval : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };
class FormatError : public Error { public: using Error::Error; };
class SchemaError : public Error { public: using Error::Error; };
class EmptyEvaluation : public Error { public: using Error::Error; };

// Wraps an error raised inside a numbered pipeline stage.
class StageError : public Error {
  public:
    StageError(int stage, const std::string& message)
        : Error(message), stage_(stage) {}
    int stage() const { return stage_; }

  private:
    int stage_;
};

// ---------------------------------------------------------------------------
// Sentiment labels
// ---------------------------------------------------------------------------

enum class SentimentLabel {
    Like,
    Happiness,
    Anger,
    Disgust,
    Fear,
    Sadness,
    Surprise,
};

inline constexpr int kLabelCount = 7;

const std::array<SentimentLabel, kLabelCount>& all_labels();
const std::string& canonical_name(SentimentLabel label);
int label_index(SentimentLabel label);

// Case-insensitive on canonical names; anything else is UnknownLabel.
SentimentLabel parse_label(std::string_view text);

// ---------------------------------------------------------------------------
// Score: sentiment polarity in [-1, 1]
// ---------------------------------------------------------------------------

class Score {
  public:
    Score() = default;
    // Throws InvalidScore for non-finite values or |value| > 1. There is no
    // clamping constructor; model-output normalization lives in the backend.
    explicit Score(double value);

    double value() const { return value_; }

    friend bool operator==(const Score&, const Score&) = default;

  private:
    double value_ = 0.0;
};

// ---------------------------------------------------------------------------
// Feature vectors
// ---------------------------------------------------------------------------

class FeatureVector {
  public:
    FeatureVector() = default;
    // Throws InvalidFeature if any entry is non-finite.
    explicit FeatureVector(std::vector<float> values);

    const std::vector<float>& values() const { return values_; }
    std::size_t size() const { return values_.size(); }
    float operator[](std::size_t i) const { return values_[i]; }
    bool empty() const { return values_.empty(); }

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

  private:
    std::vector<float> values_;
};

// ---------------------------------------------------------------------------
// Posts and visual references
// ---------------------------------------------------------------------------

struct ImagePath {
    std::string path;
    friend bool operator==(const ImagePath&, const ImagePath&) = default;
};

struct ImageBytes {
    std::vector<std::uint8_t> bytes;
    friend bool operator==(const ImageBytes&, const ImageBytes&) = default;
};

// A visual item is referenced by file path, raw bytes, or a precomputed
// feature vector (the offline-testing form).
using ImageRef = std::variant<ImagePath, ImageBytes, FeatureVector>;

struct ImageSet {
    std::vector<ImageRef> images;
};

struct VideoFrames {
    std::vector<ImageRef> frames;  // keyframes, input order preserved
};

using VisualInput = std::variant<ImageSet, VideoFrames>;

const std::vector<ImageRef>& visual_refs(const VisualInput& visual);

struct Post {
    std::string id;
    std::string text;
    VisualInput visual;
    std::optional<SentimentLabel> gold_label;

    // text non-empty after trimming, visual list non-empty.
    void validate() const;
};

// ---------------------------------------------------------------------------
// Pipeline configuration
// ---------------------------------------------------------------------------

enum class SegmentWeighting { token_proportional, uniform };
enum class FrameWeighting { uniform };
enum class BackendKind { stub, remote };

struct RetryPolicy {
    int max_attempts = 3;
    int base_delay_ms = 1000;
    double factor = 2.0;
};

struct BackendSpec {
    BackendKind kind = BackendKind::stub;
    std::string endpoint;                          // remote base URL
    std::string model = "gpt-4o";                  // chat model name
    std::string embed_model = "text-embedding-3-small";
    std::string api_key_env = "OPENAI_API_KEY";
    int timeout_ms = 30000;
    RetryPolicy retry;
    bool visual_capable = true;
    int max_in_flight = 4;
    std::string lexicon_path;  // stub backend; empty -> built-in lexicon
};

struct PipelineConfig {
    int dimension = 256;  // shared feature dimension D
    double theta = 0.4;   // cross-modal conflict threshold
    int top_k = 5;
    double alpha = 0.7;
    double beta = 0.3;
    SegmentWeighting segment_weighting = SegmentWeighting::token_proportional;
    FrameWeighting frame_weighting = FrameWeighting::uniform;
    BackendSpec backend;
    std::map<SentimentLabel, double> label_valence;
    std::vector<std::string> stopwords;
    int concurrency = 4;

    PipelineConfig();

    // Throws ConfigError: alpha + beta must equal 1 within 1e-9, theta > 0,
    // top_k >= 1, dimension >= 1, valence map total over the seven labels
    // with every value in [-1, 1].
    void validate() const;
};

std::map<SentimentLabel, double> default_label_valence();
const std::vector<std::string>& default_stopwords();

// Configured scalar valence for a label; the map must cover all seven.
Score label_valence(SentimentLabel label, const std::map<SentimentLabel, double>& valence_map);

}  // namespace sentipipe
