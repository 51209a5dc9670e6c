#include "sentipipe/image_analyst.hpp"

#include "sentipipe/prompts.hpp"
#include "sentipipe/util.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace sentipipe {

namespace {

constexpr std::string_view kFrameScoreRole =
    "You are a visual sentiment analyst. Rate the sentiment conveyed by the "
    "image (colors, scene, expressions, context) as a number in [-1, 1]. ";

bool has_image_extension(const std::string& path) {
    auto dot = path.rfind('.');
    if (dot == std::string::npos) return false;
    std::string ext = util::to_lower_ascii(path.substr(dot + 1));
    return ext == "png" || ext == "jpg" || ext == "jpeg";
}

bool sniff_png(std::span<const std::uint8_t> bytes) {
    static const std::uint8_t sig[] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    return bytes.size() >= 8 && std::equal(sig, sig + 8, bytes.begin());
}

bool sniff_jpeg(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF;
}

std::string mime_for(std::span<const std::uint8_t> bytes) {
    if (sniff_png(bytes)) return "image/png";
    if (sniff_jpeg(bytes)) return "image/jpeg";
    return "";
}

void validate_ref(const ImageRef& ref, int dimension, std::size_t index) {
    const std::string where = "frame " + std::to_string(index);
    if (const auto* path = std::get_if<ImagePath>(&ref)) {
        if (!has_image_extension(path->path)) {
            throw MissingFrame(where + ": unsupported image extension: " + path->path);
        }
        if (!std::filesystem::exists(path->path)) {
            throw MissingFrame(where + ": file does not exist: " + path->path);
        }
    } else if (const auto* bytes = std::get_if<ImageBytes>(&ref)) {
        if (mime_for(bytes->bytes).empty()) {
            throw MissingFrame(where + ": bytes are not a PNG or JPEG image");
        }
    } else {
        const auto& features = std::get<FeatureVector>(ref);
        if (features.size() != static_cast<std::size_t>(dimension)) {
            throw MissingFrame(where + ": precomputed vector has length " +
                               std::to_string(features.size()) + ", expected " +
                               std::to_string(dimension));
        }
    }
}

}  // namespace

std::vector<ImageRef> decompose_video(const std::vector<ImageRef>& frames, int dimension) {
    if (frames.empty()) {
        throw InvalidArgument("visual input carries no frames");
    }
    for (std::size_t i = 0; i < frames.size(); ++i) {
        validate_ref(frames[i], dimension, i);
    }
    return frames;
}

FrameAnalysis analyze_frame(const ImageRef& frame, ModelBackend& backend,
                            const PipelineConfig& config) {
    validate_ref(frame, config.dimension, 0);

    FrameAnalysis out;
    std::vector<std::uint8_t> bytes;
    if (const auto* path = std::get_if<ImagePath>(&frame)) {
        try {
            bytes = util::read_file_bytes(path->path);
        } catch (const IoError& e) {
            throw MissingFrame(e.what());
        }
        out.features = backend.embed_image(bytes);
    } else if (const auto* raw = std::get_if<ImageBytes>(&frame)) {
        bytes = raw->bytes;
        out.features = backend.embed_image(bytes);
    } else {
        out.features = std::get<FeatureVector>(frame);
    }

    ModelRequest request;
    request.role_prompt = std::string(kFrameScoreRole) +
                          std::string(prompts::kScoreReportFormat);
    request.content.push_back(ImagePart{bytes, mime_for(bytes)});
    request.schema = ResponseSchema::ScoreAndReport;
    request.features = out.features;
    ModelResponse response = backend.complete(request);
    out.score = *response.score;
    out.report = *response.report;
    return out;
}

std::pair<Score, std::string> aggregate_video(const std::vector<Score>& scores,
                                              const std::vector<std::string>& reports,
                                              const std::vector<double>& weights) {
    if (scores.empty() || scores.size() != reports.size() ||
        scores.size() != weights.size()) {
        throw WeightMismatch("frame lists must be equal-length and non-empty");
    }
    double weight_sum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw WeightMismatch("weights must be non-negative");
        weight_sum += w;
    }
    if (std::abs(weight_sum - 1.0) > 1e-9) {
        throw WeightMismatch("weights must sum to 1, got " + util::fmt_double(weight_sum));
    }
    double lo = scores.front().value();
    double hi = lo;
    double sum = 0.0;
    std::string report;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        sum += weights[k] * scores[k].value();
        lo = std::min(lo, scores[k].value());
        hi = std::max(hi, scores[k].value());
        if (k > 0) report.push_back('\n');
        report += "frame " + std::to_string(k) + ": " + reports[k];
    }
    sum = std::clamp(sum, lo, hi);
    return {Score(sum), std::move(report)};
}

VisualAnalysis run_image_analyst(const VisualInput& visual, ModelBackend& backend,
                                 const PipelineConfig& config) {
    const std::vector<ImageRef> frames =
        decompose_video(visual_refs(visual), config.dimension);

    VisualAnalysis analysis;
    std::vector<std::string> reports;
    for (const ImageRef& frame : frames) {
        FrameAnalysis fa = analyze_frame(frame, backend, config);
        analysis.frame_scores.push_back(fa.score);
        analysis.frame_features.push_back(std::move(fa.features));
        reports.push_back(std::move(fa.report));
    }
    // frame_weighting only knows the uniform strategy today
    analysis.frame_weights.assign(frames.size(), 1.0 / static_cast<double>(frames.size()));
    auto [overall, report] =
        aggregate_video(analysis.frame_scores, reports, analysis.frame_weights);
    analysis.overall = overall;
    analysis.report = std::move(report);
    return analysis;
}

std::vector<FeatureVector> visual_frame_features(const VisualInput& visual,
                                                 ModelBackend& backend,
                                                 const PipelineConfig& config) {
    const std::vector<ImageRef> frames =
        decompose_video(visual_refs(visual), config.dimension);
    std::vector<FeatureVector> features;
    features.reserve(frames.size());
    for (const ImageRef& frame : frames) {
        if (const auto* path = std::get_if<ImagePath>(&frame)) {
            features.push_back(backend.embed_image(util::read_file_bytes(path->path)));
        } else if (const auto* raw = std::get_if<ImageBytes>(&frame)) {
            features.push_back(backend.embed_image(raw->bytes));
        } else {
            features.push_back(std::get<FeatureVector>(frame));
        }
    }
    return features;
}

void VisualAnalysis::validate(int dimension) const {
    const std::size_t m = frame_scores.size();
    if (m == 0 || frame_features.size() != m || frame_weights.size() != m) {
        throw WeightMismatch("visual analysis lists must be equal-length and non-empty");
    }
    double weight_sum = 0.0;
    double weighted = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        if (frame_weights[k] < 0.0) throw WeightMismatch("negative frame weight");
        weight_sum += frame_weights[k];
        weighted += frame_weights[k] * frame_scores[k].value();
        if (frame_features[k].size() != static_cast<std::size_t>(dimension)) {
            throw DimensionMismatch("frame feature has wrong dimension");
        }
    }
    if (std::abs(weight_sum - 1.0) > 1e-9) {
        throw WeightMismatch("frame weights do not sum to 1");
    }
    if (std::abs(weighted - overall.value()) > 1e-9) {
        throw WeightMismatch("overall does not match the weighted frame sum");
    }
}

}  // namespace sentipipe
