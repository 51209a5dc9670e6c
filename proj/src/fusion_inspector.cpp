#include "sentipipe/fusion_inspector.hpp"

#include "sentipipe/prompts.hpp"
#include "sentipipe/util.hpp"

#include <algorithm>
#include <cmath>

namespace sentipipe {

namespace {

constexpr std::string_view kFusionRole =
    "You are a multimodal fusion inspector. Combine the textual and visual "
    "sentiment evidence below into one multimodal sentiment score in [-1, 1]. ";

constexpr std::string_view kRefineRole =
    "You are a multimodal conflict analyst. The text and visual sentiment "
    "estimates disagree. Hypothesize what is missing or conflicting (sarcasm, "
    "irony, off-topic imagery, ...). Respond with one hypothesis per line.";

FeatureVector mean_pool(const std::vector<FeatureVector>& features, int dimension) {
    std::vector<double> acc(static_cast<std::size_t>(dimension), 0.0);
    for (const FeatureVector& f : features) {
        if (f.size() != static_cast<std::size_t>(dimension)) {
            throw DimensionMismatch("feature vector has length " +
                                    std::to_string(f.size()) + ", expected " +
                                    std::to_string(dimension));
        }
        for (std::size_t i = 0; i < f.size(); ++i) acc[i] += f[i];
    }
    std::vector<float> out(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) {
        out[i] = static_cast<float>(acc[i] / static_cast<double>(features.size()));
    }
    return FeatureVector(std::move(out));
}

}  // namespace

std::string text_summary_line(const TextAnalysis& text) {
    std::string out = "text sentiment: overall=" + util::fmt_double(text.overall.value()) +
                      " segments=[";
    for (std::size_t i = 0; i < text.segment_scores.size(); ++i) {
        if (i > 0) out += ", ";
        out += util::fmt_double(text.segment_scores[i].value());
    }
    out += "]";
    return out;
}

FeatureVector combine_features(const TextAnalysis& text, const VisualAnalysis& visual,
                               int dimension) {
    if (text.segment_features.empty() || visual.frame_features.empty()) {
        throw InvalidArgument("both modalities must carry features");
    }
    FeatureVector text_half = mean_pool(text.segment_features, dimension);
    FeatureVector visual_half = mean_pool(visual.frame_features, dimension);
    std::vector<float> combined;
    combined.reserve(2 * static_cast<std::size_t>(dimension));
    combined.insert(combined.end(), text_half.values().begin(), text_half.values().end());
    combined.insert(combined.end(), visual_half.values().begin(), visual_half.values().end());
    return FeatureVector(std::move(combined));
}

std::pair<Score, std::string> fuse(const FeatureVector& combined,
                                   std::string_view text_summary,
                                   std::string_view visual_report,
                                   ModelBackend& backend, int dimension) {
    if (combined.size() != 2 * static_cast<std::size_t>(dimension)) {
        throw DimensionMismatch("combined features must have length 2*D");
    }
    ModelRequest request;
    request.role_prompt = std::string(kFusionRole) +
                          std::string(prompts::kScoreReportFormat);
    std::string body(text_summary);
    body += "\nvisual report:\n";
    body += visual_report;
    request.content.push_back(TextPart{std::move(body)});
    request.schema = ResponseSchema::ScoreAndReport;
    request.features = combined;
    ModelResponse response = backend.complete(request);
    return {*response.score, *response.report};
}

std::pair<double, double> compute_deltas(Score multimodal, Score text, Score visual) {
    return {std::abs(multimodal.value() - text.value()),
            std::abs(multimodal.value() - visual.value())};
}

std::vector<std::string> maybe_refine(std::pair<double, double> deltas, double theta,
                                      const RefinementContext& context,
                                      ModelBackend& backend) {
    if (!(theta > 0.0)) throw ConfigError("theta must be > 0");
    if (std::max(deltas.first, deltas.second) <= theta) {
        return {};
    }
    ModelRequest request;
    request.role_prompt = std::string(kRefineRole);
    std::string body = "multimodal score: " +
                       util::fmt_double(context.multimodal.value());
    body += "\ndelta_text: " + util::fmt_double(deltas.first);
    body += "\ndelta_image: " + util::fmt_double(deltas.second);
    if (context.text != nullptr) {
        body += "\n" + text_summary_line(*context.text);
    }
    if (context.visual != nullptr) {
        body += "\nvisual sentiment: overall=" +
                util::fmt_double(context.visual->overall.value());
        body += "\nvisual report:\n" + context.visual->report;
    }
    if (context.post != nullptr) {
        body += "\n";
        body += prompts::kPostTextHeader;
        body += "\n" + context.post->text;
    }
    request.content.push_back(TextPart{std::move(body)});
    request.schema = ResponseSchema::Hypotheses;
    ModelResponse response = backend.complete(request);
    return response.hypotheses;
}

FusionOutput run_fusion_inspector(const Post& post, const TextAnalysis& text,
                                  const VisualAnalysis& visual, ModelBackend& backend,
                                  const PipelineConfig& config) {
    FusionOutput out;
    out.combined_features = combine_features(text, visual, config.dimension);
    auto [score, report] = fuse(out.combined_features, text_summary_line(text),
                                visual.report, backend, config.dimension);
    out.multimodal_score = score;
    out.fusion_report = std::move(report);
    auto deltas = compute_deltas(out.multimodal_score, text.overall, visual.overall);
    out.delta_text = deltas.first;
    out.delta_image = deltas.second;
    RefinementContext context{&post, &text, &visual, out.multimodal_score};
    out.hypotheses = maybe_refine(deltas, config.theta, context, backend);
    return out;
}

void FusionOutput::validate(const Score& text_score, const Score& visual_score,
                            double theta, int dimension) const {
    double expect_dt = std::abs(multimodal_score.value() - text_score.value());
    double expect_di = std::abs(multimodal_score.value() - visual_score.value());
    if (std::abs(expect_dt - delta_text) > 1e-12 ||
        std::abs(expect_di - delta_image) > 1e-12) {
        throw InvalidArgument("delta fields do not match the stored scores");
    }
    bool triggered = std::max(delta_text, delta_image) > theta;
    if (triggered != !hypotheses.empty()) {
        throw InvalidArgument("hypotheses presence does not match the trigger rule");
    }
    if (combined_features.size() != 2 * static_cast<std::size_t>(dimension)) {
        throw DimensionMismatch("combined features must have length 2*D");
    }
}

}  // namespace sentipipe
