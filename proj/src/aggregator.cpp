#include "sentipipe/aggregator.hpp"

#include "sentipipe/prompts.hpp"
#include "sentipipe/util.hpp"

#include <algorithm>
#include <cmath>

namespace sentipipe {

namespace {

constexpr std::string_view kClassifyRole =
    "You are the final sentiment classifier. Considering the combined score, "
    "the fusion and retrieval reports, any conflict hypotheses and the "
    "original post, assign exactly one sentiment label. ";

template <typename Fn>
auto run_stage(int stage, const char* name, Fn&& fn) {
    const auto tag = [&](const char* what) {
        return "stage " + std::to_string(stage) + " (" + name + "): " + what;
    };
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const TransportError& e) {  // keep backend error types observable
        throw TransportError(tag(e.what()));
    } catch (const ProtocolError& e) {
        throw ProtocolError(tag(e.what()));
    } catch (const CapabilityError& e) {
        throw CapabilityError(tag(e.what()));
    } catch (const EmptyStore& e) {
        throw EmptyStore(tag(e.what()));
    } catch (const Error& e) {
        throw StageError(stage, tag(e.what()));
    }
}

}  // namespace

Score mean_similar(const std::vector<std::pair<KbEntry, double>>& similar,
                   const std::map<SentimentLabel, double>& valence_map) {
    if (similar.empty()) {
        throw EmptyRetrieval("cannot average an empty retrieval list");
    }
    double sum = 0.0;
    double lo = 1.0;
    double hi = -1.0;
    for (const auto& [entry, sim] : similar) {
        double v = label_valence(entry.label, valence_map).value();
        sum += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    double mean = sum / static_cast<double>(similar.size());
    return Score(std::clamp(mean, lo, hi));
}

Score combine_scores(Score multimodal, Score similar, double alpha, double beta) {
    if (alpha < 0.0 || alpha > 1.0 || beta < 0.0 || beta > 1.0) {
        throw WeightViolation("alpha and beta must lie in [0, 1]");
    }
    if (std::abs(alpha + beta - 1.0) > 1e-9) {
        throw WeightViolation("alpha + beta must equal 1, got " +
                              util::fmt_double(alpha + beta));
    }
    double combined = alpha * multimodal.value() + beta * similar.value();
    double lo = std::min(multimodal.value(), similar.value());
    double hi = std::max(multimodal.value(), similar.value());
    return Score(std::clamp(combined, lo, hi));
}

std::pair<SentimentLabel, std::string> classify(Score combined,
                                                std::string_view fusion_report,
                                                std::string_view rag_report,
                                                std::span<const std::string> hypotheses,
                                                const Post& post, ModelBackend& backend) {
    ModelRequest request;
    request.role_prompt = std::string(kClassifyRole) +
                          std::string(prompts::kLabelReportFormat);

    std::string body(prompts::kCombinedScorePrefix);
    body += util::fmt_double(combined.value());
    body += "\nfusion report:\n";
    body += fusion_report;
    body += "\nretrieval report:\n";
    body += rag_report;
    body += "\nhypotheses:\n";
    if (hypotheses.empty()) {
        body += "(none)\n";
    } else {
        for (const std::string& h : hypotheses) {
            body += "- " + h + "\n";
        }
    }
    body += prompts::kPostTextHeader;
    body += "\n";
    body += post.text;
    request.content.push_back(TextPart{std::move(body)});

    if (backend.visual_capable()) {
        for (const ImageRef& ref : visual_refs(post.visual)) {
            if (const auto* path = std::get_if<ImagePath>(&ref)) {
                std::vector<std::uint8_t> bytes;
                try {
                    bytes = util::read_file_bytes(path->path);
                } catch (const IoError& e) {
                    throw MissingFrame(e.what());
                }
                std::string mime =
                    util::to_lower_ascii(path->path).ends_with(".png") ? "image/png"
                                                                       : "image/jpeg";
                request.content.push_back(ImagePart{std::move(bytes), mime});
            } else if (const auto* raw = std::get_if<ImageBytes>(&ref)) {
                request.content.push_back(ImagePart{raw->bytes, ""});
            }
            // precomputed-vector refs carry nothing transmissible
        }
    }

    request.schema = ResponseSchema::LabelAndReport;
    ModelResponse response = backend.complete(request);

    std::string final_report = "label=" + canonical_name(*response.label) +
                               " combined=" + util::fmt_double(combined.value());
    final_report += "\n" + *response.report;
    return {*response.label, std::move(final_report)};
}

FinalOutput run_pipeline(const Post& post, const KbStore& store, ModelBackend& backend,
                         const PipelineConfig& config) {
    run_stage(1, "text analyst", [&] { post.validate(); return 0; });

    FinalOutput out;
    out.trace.text = run_stage(1, "text analyst", [&] {
        return run_text_analyst(post.text, backend, config);
    });
    out.trace.visual = run_stage(2, "image analyst", [&] {
        return run_image_analyst(post.visual, backend, config);
    });
    out.trace.fusion = run_stage(3, "fusion inspector", [&] {
        return run_fusion_inspector(post, *out.trace.text, *out.trace.visual, backend,
                                    config);
    });

    if (store.empty()) {
        throw EmptyStore("stage 4 (kb assistant): knowledge-base store is empty");
    }
    out.trace.retrieval = run_stage(4, "kb assistant", [&] {
        RetrievalOutput retrieval;
        FeatureVector key =
            select_key_features(out.trace.fusion->combined_features, config.dimension);
        retrieval.similar = top_k(store, key, config.top_k);
        retrieval.rag_report = summarize_retrieved(retrieval.similar, backend);
        return retrieval;
    });

    run_stage(5, "classifier aggregator", [&] {
        out.similar_score = mean_similar(out.trace.retrieval->similar, config.label_valence);
        out.combined_score = combine_scores(out.trace.fusion->multimodal_score,
                                            out.similar_score, config.alpha, config.beta);
        auto [label, report] = classify(out.combined_score,
                                        out.trace.fusion->fusion_report,
                                        out.trace.retrieval->rag_report,
                                        out.trace.fusion->hypotheses, post, backend);
        out.label = label;
        out.final_report = std::move(report);
        return 0;
    });
    return out;
}

std::vector<FinalOutput> run_batch(std::span<const Post> posts, const KbStore& store,
                                   ModelBackend& backend, const PipelineConfig& config,
                                   int jobs) {
    std::vector<FinalOutput> results(posts.size());
    util::parallel_for(posts.size(), jobs, [&](std::size_t i) {
        results[i] = run_pipeline(posts[i], store, backend, config);
    });
    return results;
}

}  // namespace sentipipe
