#include "sentipipe/aggregator.hpp"
#include "sentipipe/config_file.hpp"
#include "sentipipe/dataset_eval.hpp"
#include "sentipipe/knowledge_base.hpp"
#include "sentipipe/util.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

namespace {

using namespace sentipipe;

struct CommonOptions {
    std::string config_path;
    std::string backend_name;
    std::vector<std::string> overrides;
};

PipelineConfig build_config(const CommonOptions& common) {
    PipelineConfig config;
    if (!common.config_path.empty()) {
        config = load_config_file(common.config_path);
    }
    for (const std::string& pair : common.overrides) {
        auto eq = pair.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("--set expects KEY=VALUE, got '" + pair + "'");
        }
        apply_config_override(config, pair.substr(0, eq), pair.substr(eq + 1));
    }
    if (!common.backend_name.empty()) {
        apply_config_override(config, "backend", common.backend_name);
    }
    config.validate();
    return config;
}

void require_file(const std::string& path, const char* what) {
    if (!std::filesystem::exists(path)) {
        throw IoError(std::string(what) + " not found: " + path);
    }
}

int effective_jobs(int jobs) {
    if (jobs > 0) return jobs;
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void cmd_stats(const std::string& dataset_path) {
    require_file(dataset_path, "dataset");
    Dataset dataset = load_dataset(dataset_path);
    std::cout << "dataset: " << dataset.name << "\n";
    std::cout << "label      count\n";
    for (const auto& [label, count] : label_counts(dataset)) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%-10s %5ld\n",
                      canonical_name(label).c_str(), count);
        std::cout << buf;
    }
    std::cout << "total      " << dataset.samples.size() << "\n";
    long tokens = 0;
    for (const Post& post : dataset.samples) {
        tokens += static_cast<long>(util::split_whitespace(post.text).size());
    }
    if (!dataset.samples.empty()) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.1f",
                      static_cast<double>(tokens) /
                          static_cast<double>(dataset.samples.size()));
        std::cout << "mean tokens per text: " << buf << "\n";
    }
}

void cmd_split(const std::string& dataset_path, double fraction, std::uint64_t seed,
               const std::string& out_dir) {
    require_file(dataset_path, "dataset");
    Dataset dataset = load_dataset(dataset_path);
    SplitResult result = split(dataset, fraction, seed);
    std::filesystem::create_directories(out_dir);
    std::string train_path = (std::filesystem::path(out_dir) / "train.jsonl").string();
    std::string test_path = (std::filesystem::path(out_dir) / "test.jsonl").string();
    write_dataset(result.train, train_path);
    write_dataset(result.test, test_path);
    std::cout << "train: " << result.train.samples.size() << " -> " << train_path << "\n";
    std::cout << "test:  " << result.test.samples.size() << " -> " << test_path << "\n";
}

void cmd_build_kb(const CommonOptions& common, const std::string& train_path,
                  const std::vector<std::string>& corpus_paths,
                  const std::string& out_path) {
    PipelineConfig config = build_config(common);
    require_file(train_path, "training dataset");
    Dataset train = load_dataset(train_path);
    std::vector<CorpusEntry> corpus;
    for (const std::string& corpus_path : corpus_paths) {
        require_file(corpus_path, "corpus file");
        std::vector<CorpusEntry> part = load_corpus(corpus_path);
        corpus.insert(corpus.end(), part.begin(), part.end());
    }
    auto backend = make_backend(config);
    KbStore store = build_kb(train.samples, corpus, *backend, config, train.name);
    persist(store, out_path);
    std::cout << "knowledge base: " << store.size() << " entries, dimension "
              << store.dimension() << " -> " << out_path << "\n";
}

void print_trace(const Post& post, const FinalOutput& output) {
    std::cout << "post " << post.id << "\n";
    if (output.trace.text) {
        const TextAnalysis& t = *output.trace.text;
        std::cout << "stage 1 text analyst: overall="
                  << util::fmt_double(t.overall.value())
                  << " segments=" << t.segment_scores.size() << " scores=[";
        for (std::size_t i = 0; i < t.segment_scores.size(); ++i) {
            std::cout << (i ? ", " : "") << util::fmt_double(t.segment_scores[i].value());
        }
        std::cout << "]\n";
    }
    if (output.trace.visual) {
        const VisualAnalysis& v = *output.trace.visual;
        std::cout << "stage 2 image analyst: overall="
                  << util::fmt_double(v.overall.value())
                  << " frames=" << v.frame_scores.size() << "\n";
    }
    if (output.trace.fusion) {
        const FusionOutput& f = *output.trace.fusion;
        std::cout << "stage 3 fusion inspector: multimodal="
                  << util::fmt_double(f.multimodal_score.value())
                  << " delta_text=" << util::fmt_double(f.delta_text)
                  << " delta_image=" << util::fmt_double(f.delta_image)
                  << " hypotheses=" << f.hypotheses.size() << "\n";
        for (const std::string& h : f.hypotheses) {
            std::cout << "  hypothesis: " << h << "\n";
        }
    }
    if (output.trace.retrieval) {
        const RetrievalOutput& r = *output.trace.retrieval;
        std::cout << "stage 4 kb assistant: retrieved=" << r.similar.size() << "\n";
        for (const auto& [entry, sim] : r.similar) {
            std::cout << "  " << entry.id << " (" << canonical_name(entry.label)
                      << ", sim=" << util::fmt_double(sim) << ")\n";
        }
        std::cout << "  report: " << r.rag_report << "\n";
    }
    std::cout << "stage 5 classifier aggregator: similar="
              << util::fmt_double(output.similar_score.value())
              << " combined=" << util::fmt_double(output.combined_score.value())
              << " label=" << canonical_name(output.label) << "\n";
    std::cout << "report: " << output.final_report << "\n";
}

void cmd_run(const CommonOptions& common, const std::string& post_path,
             const std::string& kb_path) {
    PipelineConfig config = build_config(common);
    require_file(post_path, "post file");
    require_file(kb_path, "knowledge base");

    std::string text = util::read_file_text(post_path);
    std::string line;
    for (const std::string& candidate : util::split_lines(text)) {
        if (!util::trim(candidate).empty()) {
            line = candidate;
            break;
        }
    }
    if (line.empty()) throw SchemaError("post file contains no JSON line");
    std::string base_dir = std::filesystem::path(post_path).parent_path().string();
    Post post = parse_post_line(line, /*require_label=*/false, base_dir);

    KbStore store = load_kb(kb_path, 2 * config.dimension);
    auto backend = make_backend(config);
    FinalOutput output = run_pipeline(post, store, *backend, config);
    print_trace(post, output);
    std::cout << prediction_jsonl_line(post, output) << "\n";
}

void cmd_eval(const CommonOptions& common, const std::string& test_path,
              const std::string& kb_path, const std::string& ablate,
              int jobs, const std::string& predictions_path) {
    PipelineConfig config = build_config(common);
    require_file(test_path, "test dataset");
    require_file(kb_path, "knowledge base");
    Dataset test = load_dataset(test_path);
    KbStore store = load_kb(kb_path, 2 * config.dimension);
    auto backend = make_backend(config);
    int n_jobs = effective_jobs(jobs);

    if (ablate == "all") {
        if (!predictions_path.empty()) {
            throw InvalidArgument("--predictions requires a single ablation mode");
        }
        std::vector<std::pair<AblationMode, Metrics>> rows;
        for (AblationMode mode : kAllAblationModes) {
            rows.emplace_back(mode,
                              run_ablation(test, store, *backend, config, mode, n_jobs));
        }
        std::cout << ablation_table(rows);
        return;
    }

    AblationMode mode = ablate.empty() ? AblationMode::full : parse_ablation_mode(ablate);
    EvalResult result = evaluate(test, &store, *backend, config, mode, n_jobs);
    std::cout << metrics_table(result.metrics);
    std::cout << metrics_json(result.metrics) << "\n";
    if (!predictions_path.empty()) {
        std::string out;
        for (std::size_t i = 0; i < test.samples.size(); ++i) {
            out += prediction_jsonl_line(test.samples[i], result.outputs[i]);
            out.push_back('\n');
        }
        util::write_file(predictions_path, out);
        std::cerr << "predictions written to " << predictions_path << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"five-stage multimodal sentiment pipeline"};
    app.require_subcommand(1);
    app.fallthrough();

    CommonOptions common;
    app.add_option("--config", common.config_path, "pipeline config file (key = value)");
    app.add_option("--backend", common.backend_name, "backend override: stub or remote")
        ->check(CLI::IsMember({"stub", "remote"}));
    app.add_option("--set", common.overrides, "config override KEY=VALUE (repeatable)");

    auto* stats = app.add_subcommand("stats", "per-label dataset statistics");
    std::string stats_dataset;
    stats->add_option("dataset", stats_dataset, "dataset JSONL")->required();

    auto* split_cmd = app.add_subcommand("split", "stratified train/test split");
    std::string split_dataset, split_out_dir;
    double split_fraction = 0.1;
    std::uint64_t split_seed = 42;
    split_cmd->add_option("dataset", split_dataset, "dataset JSONL")->required();
    split_cmd->add_option("--fraction", split_fraction, "test fraction (default 0.1)");
    split_cmd->add_option("--seed", split_seed, "shuffle seed (default 42)");
    split_cmd->add_option("--out-dir", split_out_dir, "output directory")->required();

    auto* build = app.add_subcommand("build-kb", "build the knowledge base");
    std::string build_train, build_out;
    std::vector<std::string> build_corpus;
    build->add_option("--train", build_train, "labeled training JSONL")->required();
    build->add_option("--corpus", build_corpus, "text corpus JSONL (repeatable)");
    build->add_option("--out", build_out, "output .smkb path")->required();

    auto* run = app.add_subcommand("run", "run one post through the pipeline");
    std::string run_post, run_kb;
    run->add_option("--post", run_post, "post JSON file")->required();
    run->add_option("--kb", run_kb, "knowledge base .smkb")->required();

    auto* eval = app.add_subcommand("eval", "evaluate a test split");
    std::string eval_test, eval_kb, eval_ablate, eval_predictions;
    int eval_jobs = 0;
    eval->add_option("--test", eval_test, "test JSONL")->required();
    eval->add_option("--kb", eval_kb, "knowledge base .smkb")->required();
    eval->add_option("--ablate", eval_ablate,
                     "ablation mode (full, no_kb, no_fusion_inspector, text_only, "
                     "image_only, no_aggregator) or 'all'");
    eval->add_option("--jobs", eval_jobs, "worker threads (default: hardware)");
    eval->add_option("--predictions", eval_predictions, "write prediction JSONL here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        return 1;
    }

    try {
        if (stats->parsed()) cmd_stats(stats_dataset);
        else if (split_cmd->parsed()) cmd_split(split_dataset, split_fraction, split_seed, split_out_dir);
        else if (build->parsed()) cmd_build_kb(common, build_train, build_corpus, build_out);
        else if (run->parsed()) cmd_run(common, run_post, run_kb);
        else if (eval->parsed()) cmd_eval(common, eval_test, eval_kb, eval_ablate, eval_jobs, eval_predictions);
        return 0;
    } catch (const TransportError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return 3;
    } catch (const ProtocolError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return 3;
    } catch (const CapabilityError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return 3;
    } catch (const InvalidArgument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
