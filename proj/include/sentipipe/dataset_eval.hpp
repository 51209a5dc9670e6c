#pragma once

#include "sentipipe/aggregator.hpp"
#include "sentipipe/core.hpp"

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace sentipipe {

struct Dataset {
    std::vector<Post> samples;  // every sample carries a gold label
    std::string name;
};

struct Metrics {
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    // rows = gold, columns = predicted, canonical label order
    std::array<std::array<long, kLabelCount>, kLabelCount> confusion{};

    long total() const;
};

enum class AblationMode {
    full,
    no_kb,
    no_fusion_inspector,
    text_only,   // visual stage removed
    image_only,  // text stage removed
    no_aggregator,
};

inline constexpr std::array<AblationMode, 6> kAllAblationModes = {
    AblationMode::full,          AblationMode::no_kb,
    AblationMode::no_fusion_inspector, AblationMode::text_only,
    AblationMode::image_only,    AblationMode::no_aggregator,
};

AblationMode parse_ablation_mode(std::string_view name);
std::string_view ablation_mode_name(AblationMode mode);
std::string_view ablation_row_label(AblationMode mode);

// JSONL lines {"id", "text", "images": [...], "frames": [...], "label"};
// exactly one of images/frames non-empty. Malformed lines are collected and
// reported with their line numbers.
Dataset load_dataset(const std::string& path);

// Parses one dataset line; relative image paths resolve against base_dir.
Post parse_post_line(std::string_view line, bool require_label,
                     const std::string& base_dir);
std::string post_to_jsonl(const Post& post);
void write_dataset(const Dataset& dataset, const std::string& path);

struct SplitResult {
    Dataset train;
    Dataset test;
};

// Stratified per label: after a seeded shuffle, floor(fraction * count)
// samples of each label go to the test set. Deterministic for a fixed seed.
SplitResult split(const Dataset& dataset, double test_fraction, std::uint64_t seed);

Metrics compute_metrics(
    std::span<const std::pair<SentimentLabel, SentimentLabel>> gold_predicted);

// Runs one post through the pipeline variant selected by `mode`. The store
// may be null only for no_kb.
FinalOutput run_post_with_mode(const Post& post, const KbStore* store,
                               ModelBackend& backend, const PipelineConfig& config,
                               AblationMode mode);

struct EvalResult {
    Metrics metrics;
    std::vector<FinalOutput> outputs;  // input order
};

EvalResult evaluate(const Dataset& test, const KbStore* store, ModelBackend& backend,
                    const PipelineConfig& config, AblationMode mode, int jobs);

Metrics run_ablation(const Dataset& test, const KbStore& store, ModelBackend& backend,
                     const PipelineConfig& config, AblationMode mode, int jobs = 1);

std::map<SentimentLabel, long> label_counts(const Dataset& dataset);

// Plain-text metric table (percentages to one decimal) and one-line JSON
// including the full confusion matrix.
std::string metrics_table(const Metrics& metrics);
std::string metrics_json(const Metrics& metrics);
std::string ablation_table(std::span<const std::pair<AblationMode, Metrics>> rows);

// Prediction line: {"id","label","combined_score","similar_score",
// "delta_text","delta_image","hypotheses","report"}.
std::string prediction_jsonl_line(const Post& post, const FinalOutput& output);

}  // namespace sentipipe
