#pragma once

#include "sentipipe/backend.hpp"

#include <memory>

namespace sentipipe {

// HTTP client speaking the OpenAI-compatible chat-completion and embedding
// protocol. Requests run at temperature 0; structured outputs are requested
// as single "SCORE | REPORT" style lines and re-asked once on parse failure.
// 429/5xx and transport failures are retried with exponential backoff.
class RemoteBackend : public ModelBackend {
  public:
    RemoteBackend(const BackendSpec& spec, int dimension);
    ~RemoteBackend() override;

    bool visual_capable() const override;

  protected:
    ModelResponse do_complete(const ModelRequest& request) override;
    FeatureVector do_embed_text(std::string_view text) override;
    FeatureVector do_embed_image(std::span<const std::uint8_t> bytes) override;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Parses a "SCORE | REPORT" line; the report may be empty. Throws
// ProtocolError when no leading number is present.
std::pair<double, std::string> parse_score_report_line(std::string_view body);

// Parses a "LABEL | REPORT" line against the seven canonical labels.
std::pair<SentimentLabel, std::string> parse_label_report_line(std::string_view body);

// One hypothesis per non-empty line; leading "-"/"*" bullets stripped.
std::vector<std::string> parse_hypotheses(std::string_view body);

}  // namespace sentipipe
