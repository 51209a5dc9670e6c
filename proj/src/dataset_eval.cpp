#include "sentipipe/dataset_eval.hpp"

#include "sentipipe/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

namespace sentipipe {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

long Metrics::total() const {
    long n = 0;
    for (const auto& row : confusion) {
        for (long cell : row) n += cell;
    }
    return n;
}

AblationMode parse_ablation_mode(std::string_view name) {
    for (AblationMode mode : kAllAblationModes) {
        if (name == ablation_mode_name(mode)) return mode;
    }
    throw InvalidArgument("unknown ablation mode: '" + std::string(name) + "'");
}

std::string_view ablation_mode_name(AblationMode mode) {
    switch (mode) {
        case AblationMode::full: return "full";
        case AblationMode::no_kb: return "no_kb";
        case AblationMode::no_fusion_inspector: return "no_fusion_inspector";
        case AblationMode::text_only: return "text_only";
        case AblationMode::image_only: return "image_only";
        case AblationMode::no_aggregator: return "no_aggregator";
    }
    return "full";
}

std::string_view ablation_row_label(AblationMode mode) {
    switch (mode) {
        case AblationMode::full:
            return "Full pipeline";
        case AblationMode::no_kb:
            return "w/o KB Assistant (no retrieval)";
        case AblationMode::no_fusion_inspector:
            return "w/o Fusion Inspector (no refinement)";
        case AblationMode::text_only:
            return "w/o Image Analyst (text only)";
        case AblationMode::image_only:
            return "w/o Text Analyst (image/video only)";
        case AblationMode::no_aggregator:
            return "w/o Classifier Aggregator (direct fusion only)";
    }
    return "Full pipeline";
}

namespace {

ImageRef parse_image_element(const json& element, const std::string& base_dir) {
    if (element.is_string()) {
        std::string path = element.get<std::string>();
        if (path.empty()) throw SchemaError("empty image path");
        std::filesystem::path p(path);
        if (p.is_relative() && !base_dir.empty()) {
            p = std::filesystem::path(base_dir) / p;
        }
        return ImagePath{p.string()};
    }
    if (element.is_array()) {
        std::vector<float> values;
        values.reserve(element.size());
        for (const json& v : element) {
            if (!v.is_number()) {
                throw SchemaError("precomputed vector entries must be numbers");
            }
            values.push_back(v.get<float>());
        }
        if (values.empty()) throw SchemaError("precomputed vector is empty");
        return FeatureVector(std::move(values));
    }
    throw SchemaError("image entries must be path strings or number arrays");
}

}  // namespace

Post parse_post_line(std::string_view line, bool require_label,
                     const std::string& base_dir) {
    json obj;
    try {
        obj = json::parse(line);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw SchemaError("line is not a JSON object");

    Post post;
    if (!obj.contains("id") || !obj["id"].is_string()) {
        throw SchemaError("missing string field 'id'");
    }
    post.id = obj["id"].get<std::string>();
    if (post.id.empty()) throw SchemaError("empty 'id'");

    if (!obj.contains("text") || !obj["text"].is_string()) {
        throw SchemaError("missing string field 'text'");
    }
    post.text = obj["text"].get<std::string>();
    if (util::trim(post.text).empty()) throw SchemaError("empty 'text'");

    std::vector<ImageRef> images;
    std::vector<ImageRef> frames;
    if (obj.contains("images")) {
        if (!obj["images"].is_array()) throw SchemaError("'images' must be an array");
        for (const json& e : obj["images"]) images.push_back(parse_image_element(e, base_dir));
    }
    if (obj.contains("frames")) {
        if (!obj["frames"].is_array()) throw SchemaError("'frames' must be an array");
        for (const json& e : obj["frames"]) frames.push_back(parse_image_element(e, base_dir));
    }
    if (!images.empty() && !frames.empty()) {
        throw SchemaError("exactly one of 'images'/'frames' may be non-empty");
    }
    if (images.empty() && frames.empty()) {
        throw SchemaError("one of 'images'/'frames' must be non-empty");
    }
    if (!images.empty()) post.visual = ImageSet{std::move(images)};
    else post.visual = VideoFrames{std::move(frames)};

    if (obj.contains("label")) {
        if (!obj["label"].is_string()) throw SchemaError("'label' must be a string");
        try {
            post.gold_label = parse_label(obj["label"].get<std::string>());
        } catch (const UnknownLabel& e) {
            throw SchemaError(e.what());
        }
    } else if (require_label) {
        throw SchemaError("missing field 'label'");
    }
    return post;
}

std::string post_to_jsonl(const Post& post) {
    ordered_json obj;
    obj["id"] = post.id;
    obj["text"] = post.text;
    json refs = json::array();
    for (const ImageRef& ref : visual_refs(post.visual)) {
        if (const auto* path = std::get_if<ImagePath>(&ref)) {
            refs.push_back(path->path);
        } else if (const auto* vec = std::get_if<FeatureVector>(&ref)) {
            refs.push_back(vec->values());
        } else {
            throw InvalidArgument("raw image bytes cannot be serialized to JSONL");
        }
    }
    obj[std::holds_alternative<ImageSet>(post.visual) ? "images" : "frames"] =
        std::move(refs);
    if (post.gold_label) obj["label"] = canonical_name(*post.gold_label);
    return obj.dump();
}

Dataset load_dataset(const std::string& path) {
    std::string text = util::read_file_text(path);
    std::string base_dir = std::filesystem::path(path).parent_path().string();

    Dataset dataset;
    dataset.name = std::filesystem::path(path).stem().string();
    std::vector<std::string> problems;
    std::set<std::string> seen_ids;
    std::vector<std::string> duplicates;
    int line_no = 0;
    for (const std::string& line : util::split_lines(text)) {
        ++line_no;
        if (util::trim(line).empty()) continue;
        try {
            Post post = parse_post_line(line, /*require_label=*/true, base_dir);
            if (!seen_ids.insert(post.id).second) {
                duplicates.push_back("line " + std::to_string(line_no) + ": id '" +
                                     post.id + "'");
                continue;
            }
            dataset.samples.push_back(std::move(post));
        } catch (const SchemaError& e) {
            problems.push_back("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!problems.empty()) {
        std::string message = "dataset " + path + " has " +
                              std::to_string(problems.size()) + " malformed line(s): ";
        for (std::size_t i = 0; i < problems.size(); ++i) {
            if (i > 0) message += "; ";
            message += problems[i];
        }
        throw SchemaError(message);
    }
    if (!duplicates.empty()) {
        std::string message = "dataset " + path + " has duplicate ids: ";
        for (std::size_t i = 0; i < duplicates.size(); ++i) {
            if (i > 0) message += "; ";
            message += duplicates[i];
        }
        throw DuplicateId(message);
    }
    return dataset;
}

void write_dataset(const Dataset& dataset, const std::string& path) {
    std::string out;
    for (const Post& post : dataset.samples) {
        out += post_to_jsonl(post);
        out.push_back('\n');
    }
    util::write_file(path, out);
}

SplitResult split(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0) || !(test_fraction < 1.0)) {
        throw InvalidArgument("test fraction must lie strictly between 0 and 1");
    }
    std::array<std::vector<std::size_t>, kLabelCount> groups;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const Post& post = dataset.samples[i];
        if (!post.gold_label) {
            throw InvalidArgument("sample '" + post.id + "' carries no label");
        }
        groups[label_index(*post.gold_label)].push_back(i);
    }

    util::SplitMix64 seeder(seed);
    std::vector<std::size_t> test_indices;
    std::vector<std::size_t> train_indices;
    for (auto& group : groups) {
        util::SplitMix64 rng(seeder.next());
        // Fisher-Yates with an explicit bounded draw, platform-independent
        for (std::size_t i = group.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(rng.bounded(i));
            std::swap(group[i - 1], group[j]);
        }
        std::size_t take = static_cast<std::size_t>(
            std::floor(test_fraction * static_cast<double>(group.size())));
        for (std::size_t i = 0; i < group.size(); ++i) {
            (i < take ? test_indices : train_indices).push_back(group[i]);
        }
    }
    std::sort(test_indices.begin(), test_indices.end());
    std::sort(train_indices.begin(), train_indices.end());

    SplitResult result;
    result.train.name = dataset.name + "-train";
    result.test.name = dataset.name + "-test";
    for (std::size_t i : train_indices) result.train.samples.push_back(dataset.samples[i]);
    for (std::size_t i : test_indices) result.test.samples.push_back(dataset.samples[i]);
    return result;
}

Metrics compute_metrics(
    std::span<const std::pair<SentimentLabel, SentimentLabel>> gold_predicted) {
    if (gold_predicted.empty()) {
        throw EmptyEvaluation("no (gold, predicted) pairs to evaluate");
    }
    Metrics m;
    for (const auto& [gold, predicted] : gold_predicted) {
        ++m.confusion[label_index(gold)][label_index(predicted)];
    }
    long total = static_cast<long>(gold_predicted.size());
    long diagonal = 0;
    double precision_sum = 0.0;
    double recall_sum = 0.0;
    double f1_sum = 0.0;
    for (int c = 0; c < kLabelCount; ++c) {
        long true_positive = m.confusion[c][c];
        diagonal += true_positive;
        long gold_count = 0;
        long predicted_count = 0;
        for (int other = 0; other < kLabelCount; ++other) {
            gold_count += m.confusion[c][other];
            predicted_count += m.confusion[other][c];
        }
        double precision = predicted_count > 0
                               ? static_cast<double>(true_positive) / predicted_count
                               : 0.0;
        double recall =
            gold_count > 0 ? static_cast<double>(true_positive) / gold_count : 0.0;
        double f1 = (precision + recall) > 0.0
                        ? 2.0 * precision * recall / (precision + recall)
                        : 0.0;
        precision_sum += precision;
        recall_sum += recall;
        f1_sum += f1;
    }
    m.accuracy = static_cast<double>(diagonal) / static_cast<double>(total);
    m.macro_precision = precision_sum / kLabelCount;
    m.macro_recall = recall_sum / kLabelCount;
    m.macro_f1 = f1_sum / kLabelCount;
    return m;
}

namespace {

// Single-element zero analysis standing in for a skipped modality, so the
// combined vector keeps its 2*D shape with the skipped half zeroed.
TextAnalysis zero_text_analysis(int dimension) {
    TextAnalysis t;
    t.segment_features.emplace_back(
        std::vector<float>(static_cast<std::size_t>(dimension), 0.0f));
    return t;
}

VisualAnalysis zero_visual_analysis(int dimension) {
    VisualAnalysis v;
    v.frame_features.emplace_back(
        std::vector<float>(static_cast<std::size_t>(dimension), 0.0f));
    return v;
}

Score mean_of_two(Score a, Score b) {
    double mean = (a.value() + b.value()) / 2.0;
    return Score(std::clamp(mean, std::min(a.value(), b.value()),
                            std::max(a.value(), b.value())));
}

}  // namespace

FinalOutput run_post_with_mode(const Post& post, const KbStore* store,
                               ModelBackend& backend, const PipelineConfig& config,
                               AblationMode mode) {
    if (mode == AblationMode::full) {
        if (store == nullptr) throw EmptyStore("full mode requires a knowledge base");
        return run_pipeline(post, *store, backend, config);
    }
    post.validate();

    FinalOutput out;
    const bool run_text = mode != AblationMode::image_only;
    const bool run_visual = mode != AblationMode::text_only;

    if (run_text) {
        out.trace.text = run_text_analyst(post.text, backend, config);
    }
    if (run_visual) {
        out.trace.visual = run_image_analyst(post.visual, backend, config);
    }

    FusionOutput fusion;
    switch (mode) {
        case AblationMode::no_kb:
        case AblationMode::no_aggregator:
            fusion = run_fusion_inspector(post, *out.trace.text, *out.trace.visual,
                                          backend, config);
            break;
        case AblationMode::no_fusion_inspector:
            fusion.combined_features =
                combine_features(*out.trace.text, *out.trace.visual, config.dimension);
            fusion.multimodal_score =
                mean_of_two(out.trace.text->overall, out.trace.visual->overall);
            break;
        case AblationMode::text_only: {
            VisualAnalysis zero = zero_visual_analysis(config.dimension);
            fusion.combined_features =
                combine_features(*out.trace.text, zero, config.dimension);
            fusion.multimodal_score = out.trace.text->overall;
            break;
        }
        case AblationMode::image_only: {
            TextAnalysis zero = zero_text_analysis(config.dimension);
            fusion.combined_features =
                combine_features(zero, *out.trace.visual, config.dimension);
            fusion.multimodal_score = out.trace.visual->overall;
            break;
        }
        case AblationMode::full:
            break;  // handled above
    }
    out.trace.fusion = std::move(fusion);

    if (mode != AblationMode::no_kb) {
        if (store == nullptr || store->empty()) {
            throw EmptyStore("stage 4 (kb assistant): knowledge-base store is empty");
        }
        RetrievalOutput retrieval;
        FeatureVector key =
            select_key_features(out.trace.fusion->combined_features, config.dimension);
        retrieval.similar = top_k(*store, key, config.top_k);
        retrieval.rag_report = summarize_retrieved(retrieval.similar, backend);
        out.trace.retrieval = std::move(retrieval);
    }

    switch (mode) {
        case AblationMode::no_kb:
            out.similar_score = Score(0.0);
            out.combined_score = combine_scores(out.trace.fusion->multimodal_score,
                                                out.similar_score, 1.0, 0.0);
            break;
        case AblationMode::no_aggregator:
            out.similar_score = Score(0.0);
            out.combined_score = out.trace.fusion->multimodal_score;
            break;
        default:
            out.similar_score =
                mean_similar(out.trace.retrieval->similar, config.label_valence);
            out.combined_score = combine_scores(out.trace.fusion->multimodal_score,
                                                out.similar_score, config.alpha,
                                                config.beta);
            break;
    }

    auto [label, report] = classify(
        out.combined_score, out.trace.fusion->fusion_report,
        out.trace.retrieval ? out.trace.retrieval->rag_report : std::string(),
        out.trace.fusion->hypotheses, post, backend);
    out.label = label;
    out.final_report = std::move(report);
    return out;
}

EvalResult evaluate(const Dataset& test, const KbStore* store, ModelBackend& backend,
                    const PipelineConfig& config, AblationMode mode, int jobs) {
    if (test.samples.empty()) {
        throw EmptyEvaluation("test dataset is empty");
    }
    EvalResult result;
    result.outputs.resize(test.samples.size());
    util::parallel_for(test.samples.size(), jobs, [&](std::size_t i) {
        result.outputs[i] = run_post_with_mode(test.samples[i], store, backend,
                                               config, mode);
    });
    std::vector<std::pair<SentimentLabel, SentimentLabel>> pairs;
    pairs.reserve(test.samples.size());
    for (std::size_t i = 0; i < test.samples.size(); ++i) {
        if (!test.samples[i].gold_label) {
            throw InvalidArgument("sample '" + test.samples[i].id +
                                  "' carries no gold label");
        }
        pairs.emplace_back(*test.samples[i].gold_label, result.outputs[i].label);
    }
    result.metrics = compute_metrics(pairs);
    return result;
}

Metrics run_ablation(const Dataset& test, const KbStore& store, ModelBackend& backend,
                     const PipelineConfig& config, AblationMode mode, int jobs) {
    return evaluate(test, &store, backend, config, mode, jobs).metrics;
}

std::map<SentimentLabel, long> label_counts(const Dataset& dataset) {
    std::map<SentimentLabel, long> counts;
    for (SentimentLabel label : all_labels()) counts[label] = 0;
    for (const Post& post : dataset.samples) {
        if (post.gold_label) ++counts[*post.gold_label];
    }
    return counts;
}

namespace {

std::string percent(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", v * 100.0);
    return buf;
}

}  // namespace

std::string metrics_table(const Metrics& metrics) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "metric  value (%%)\n"
                  "Acc.    %9s\n"
                  "MP      %9s\n"
                  "MR      %9s\n"
                  "MF1     %9s\n",
                  percent(metrics.accuracy).c_str(),
                  percent(metrics.macro_precision).c_str(),
                  percent(metrics.macro_recall).c_str(),
                  percent(metrics.macro_f1).c_str());
    return buf;
}

std::string metrics_json(const Metrics& metrics) {
    ordered_json obj;
    obj["accuracy"] = metrics.accuracy;
    obj["macro_precision"] = metrics.macro_precision;
    obj["macro_recall"] = metrics.macro_recall;
    obj["macro_f1"] = metrics.macro_f1;
    obj["total"] = metrics.total();
    json labels = json::array();
    for (SentimentLabel label : all_labels()) labels.push_back(canonical_name(label));
    obj["labels"] = std::move(labels);
    json confusion = json::array();
    for (const auto& row : metrics.confusion) {
        json r = json::array();
        for (long cell : row) r.push_back(cell);
        confusion.push_back(std::move(r));
    }
    obj["confusion"] = std::move(confusion);
    return obj.dump();
}

std::string ablation_table(std::span<const std::pair<AblationMode, Metrics>> rows) {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-48s %9s %9s\n", "variant", "Acc. (%)", "MF1 (%)");
    out += buf;
    for (const auto& [mode, metrics] : rows) {
        std::snprintf(buf, sizeof(buf), "%-48s %9s %9s\n",
                      std::string(ablation_row_label(mode)).c_str(),
                      percent(metrics.accuracy).c_str(),
                      percent(metrics.macro_f1).c_str());
        out += buf;
    }
    return out;
}

std::string prediction_jsonl_line(const Post& post, const FinalOutput& output) {
    ordered_json obj;
    obj["id"] = post.id;
    obj["label"] = canonical_name(output.label);
    obj["combined_score"] = output.combined_score.value();
    obj["similar_score"] = output.similar_score.value();
    obj["delta_text"] = output.trace.fusion ? output.trace.fusion->delta_text : 0.0;
    obj["delta_image"] = output.trace.fusion ? output.trace.fusion->delta_image : 0.0;
    json hyp = json::array();
    if (output.trace.fusion) {
        for (const std::string& h : output.trace.fusion->hypotheses) hyp.push_back(h);
    }
    obj["hypotheses"] = std::move(hyp);
    obj["report"] = output.final_report;
    return obj.dump();
}

}  // namespace sentipipe
