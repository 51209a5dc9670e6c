#pragma once

#include "sentipipe/backend.hpp"
#include "sentipipe/core.hpp"

#include <atomic>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace sentipipe {

// One embedded, annotated knowledge-base record. Text-only corpus entries
// leave visual_refs empty and zero the visual half of the embedding.
struct KbEntry {
    std::string id;
    std::string text;
    std::vector<ImageRef> visual_refs;  // in-memory provenance, not persisted
    SentimentLabel label = SentimentLabel::Like;
    FeatureVector embedding;  // length = store dimension (2*D)
    std::map<std::string, std::string> metadata;
};

// Searchable collection of entries sharing one embedding dimension. A built
// or loaded store is immutable in pipeline use and safe for concurrent
// readers; inserting requires exclusive access.
class KbStore {
  public:
    explicit KbStore(int dimension);

    KbStore(KbStore&& other) noexcept;
    KbStore& operator=(KbStore&& other) noexcept;
    KbStore(const KbStore&) = delete;
    KbStore& operator=(const KbStore&) = delete;

    int dimension() const { return dimension_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::vector<KbEntry>& entries() const { return entries_; }

    // Throws DuplicateId / DimensionMismatch.
    void insert(KbEntry entry);

    // Number of top-k queries served; lets tests observe skip contracts.
    long queries_served() const { return queries_.load(); }

  private:
    friend std::vector<std::pair<KbEntry, double>> top_k(const KbStore&,
                                                         const FeatureVector&, int);
    int dimension_ = 0;
    std::vector<KbEntry> entries_;
    std::set<std::string> ids_;
    mutable std::atomic<long> queries_{0};
};

// Stage 4 output: the retrieved entries with similarities (non-increasing,
// ties by ascending id) and the summarizing report.
struct RetrievalOutput {
    std::vector<std::pair<KbEntry, double>> similar;
    std::string rag_report;
};

// Key-feature selection is the identity today; kept as the extension point.
FeatureVector select_key_features(const FeatureVector& combined, int dimension);

// Cosine similarity in [-1, 1]; zero-norm inputs yield 0.
double similarity(const FeatureVector& a, const FeatureVector& b);

// Exact top-k by similarity (descending, ties by ascending id); equivalent
// to a full linear scan. Throws EmptyStore on an empty store.
std::vector<std::pair<KbEntry, double>> top_k(const KbStore& store,
                                              const FeatureVector& query, int k);

// One report-only model call over the entries' texts, labels and metadata.
std::string summarize_retrieved(const std::vector<std::pair<KbEntry, double>>& similar,
                                ModelBackend& backend);

// Text-corpus ingestion format: JSONL lines {"id", "text", "label"}.
struct CorpusEntry {
    std::string id;
    std::string text;
    SentimentLabel label = SentimentLabel::Like;
};

std::vector<CorpusEntry> load_corpus(const std::string& path);

// Builds the store from labeled multimodal samples (embedded through the
// stage 1-3 feature paths) and pure-text corpus entries (text embedding,
// zero visual half).
KbStore build_kb(std::span<const Post> samples, std::span<const CorpusEntry> corpus,
                 ModelBackend& backend, const PipelineConfig& config,
                 const std::string& source_name);

// Binary store format: "SMKB" magic, version, dimension, entry count, then
// length-prefixed UTF-8 fields and little-endian float32 embeddings.
void persist(const KbStore& store, const std::string& path);
KbStore load_kb(const std::string& path, std::optional<int> expected_dimension = {});
std::vector<std::uint8_t> serialize_store(const KbStore& store);
KbStore deserialize_store(std::span<const std::uint8_t> bytes,
                          std::optional<int> expected_dimension = {});

}  // namespace sentipipe
