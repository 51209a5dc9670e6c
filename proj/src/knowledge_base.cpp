#include "sentipipe/knowledge_base.hpp"

#include "sentipipe/fusion_inspector.hpp"
#include "sentipipe/image_analyst.hpp"
#include "sentipipe/prompts.hpp"
#include "sentipipe/text_analyst.hpp"
#include "sentipipe/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace sentipipe {

using nlohmann::json;

namespace {

constexpr std::string_view kSummarizeRole =
    "You are a retrieval assistant. Summarize the sentiment patterns and "
    "trends across the retrieved entries below in a short report.";

constexpr char kMagic[4] = {'S', 'M', 'K', 'B'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 24));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    put_u32(out, static_cast<std::uint32_t>(v));
    put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

void put_string(std::vector<std::uint8_t>& out, std::string_view s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
}

void put_f32(std::vector<std::uint8_t>& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof(bits));
    put_u32(out, bits);
}

// Bounds-checked little-endian reader; every failure is a FormatError.
struct Reader {
    std::span<const std::uint8_t> data;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > data.size()) {
            throw FormatError("knowledge-base file is truncated");
        }
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = data[pos] | (data[pos + 1] << 8) |
                          (data[pos + 2] << 16) |
                          (static_cast<std::uint32_t>(data[pos + 3]) << 24);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t lo = u32();
        std::uint64_t hi = u32();
        return lo | (hi << 32);
    }
    std::string str() {
        std::uint32_t len = u32();
        need(len);
        std::string s(reinterpret_cast<const char*>(data.data() + pos), len);
        pos += len;
        return s;
    }
    float f32() {
        std::uint32_t bits = u32();
        float f;
        std::memcpy(&f, &bits, sizeof(f));
        return f;
    }
};

}  // namespace

KbStore::KbStore(int dimension) : dimension_(dimension) {
    if (dimension < 1) throw DimensionMismatch("store dimension must be >= 1");
}

KbStore::KbStore(KbStore&& other) noexcept
    : dimension_(other.dimension_),
      entries_(std::move(other.entries_)),
      ids_(std::move(other.ids_)),
      queries_(other.queries_.load()) {}

KbStore& KbStore::operator=(KbStore&& other) noexcept {
    dimension_ = other.dimension_;
    entries_ = std::move(other.entries_);
    ids_ = std::move(other.ids_);
    queries_.store(other.queries_.load());
    return *this;
}

void KbStore::insert(KbEntry entry) {
    if (entry.embedding.size() != static_cast<std::size_t>(dimension_)) {
        throw DimensionMismatch("entry '" + entry.id + "' embedding has length " +
                                std::to_string(entry.embedding.size()) +
                                ", store dimension is " + std::to_string(dimension_));
    }
    if (!ids_.insert(entry.id).second) {
        throw DuplicateId("duplicate knowledge-base id: " + entry.id);
    }
    entries_.push_back(std::move(entry));
}

FeatureVector select_key_features(const FeatureVector& combined, int dimension) {
    if (combined.size() != 2 * static_cast<std::size_t>(dimension)) {
        throw DimensionMismatch("key-feature selection expects length 2*D");
    }
    return combined;
}

double similarity(const FeatureVector& a, const FeatureVector& b) {
    if (a.size() != b.size()) {
        throw DimensionMismatch("similarity inputs differ in length: " +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
    }
    double dot = 0.0;
    double norm_a = 0.0;
    double norm_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double x = a[i];
        double y = b[i];
        dot += x * y;
        norm_a += x * x;
        norm_b += y * y;
    }
    if (norm_a == 0.0 || norm_b == 0.0) return 0.0;
    return dot / std::sqrt(norm_a * norm_b);
}

std::vector<std::pair<KbEntry, double>> top_k(const KbStore& store,
                                              const FeatureVector& query, int k) {
    if (store.empty()) {
        throw EmptyStore("knowledge-base store is empty");
    }
    if (k < 1) throw InvalidArgument("k must be >= 1");
    if (query.size() != static_cast<std::size_t>(store.dimension())) {
        throw DimensionMismatch("query has length " + std::to_string(query.size()) +
                                ", store dimension is " +
                                std::to_string(store.dimension()));
    }
    store.queries_.fetch_add(1, std::memory_order_relaxed);

    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(store.size());
    for (std::size_t i = 0; i < store.size(); ++i) {
        scored.emplace_back(similarity(store.entries()[i].embedding, query), i);
    }
    const auto better = [&](const auto& lhs, const auto& rhs) {
        if (lhs.first != rhs.first) return lhs.first > rhs.first;
        return store.entries()[lhs.second].id < store.entries()[rhs.second].id;
    };
    std::size_t take = std::min(static_cast<std::size_t>(k), scored.size());
    std::partial_sort(scored.begin(), scored.begin() + take, scored.end(), better);

    std::vector<std::pair<KbEntry, double>> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        out.emplace_back(store.entries()[scored[i].second], scored[i].first);
    }
    return out;
}

std::string summarize_retrieved(const std::vector<std::pair<KbEntry, double>>& similar,
                                ModelBackend& backend) {
    if (similar.empty()) {
        throw EmptyRetrieval("no retrieved entries to summarize");
    }
    std::string body = "retrieved entries:";
    for (const auto& [entry, sim] : similar) {
        body += "\nentry: " + entry.id;
        body += "\n";
        body += prompts::kEntryLabelPrefix;
        body += canonical_name(entry.label);
        body += "\nsimilarity: " + util::fmt_double(sim);
        body += "\ntext: " + entry.text;
        if (!entry.metadata.empty()) {
            body += "\nmeta:";
            for (const auto& [key, value] : entry.metadata) {
                body += " " + key + "=" + value;
            }
        }
    }
    ModelRequest request;
    request.role_prompt = std::string(kSummarizeRole);
    request.content.push_back(TextPart{std::move(body)});
    request.schema = ResponseSchema::ReportOnly;
    return *backend.complete(request).report;
}

std::vector<CorpusEntry> load_corpus(const std::string& path) {
    std::string text = util::read_file_text(path);
    std::vector<CorpusEntry> corpus;
    std::vector<std::string> problems;
    int line_no = 0;
    for (const std::string& line : util::split_lines(text)) {
        ++line_no;
        if (util::trim(line).empty()) continue;
        try {
            json obj = json::parse(line);
            CorpusEntry entry;
            entry.id = obj.at("id").get<std::string>();
            entry.text = obj.at("text").get<std::string>();
            entry.label = parse_label(obj.at("label").get<std::string>());
            if (entry.id.empty()) throw SchemaError("empty id");
            if (util::trim(entry.text).empty()) throw SchemaError("empty text");
            corpus.push_back(std::move(entry));
        } catch (const json::exception& e) {
            problems.push_back("line " + std::to_string(line_no) + ": " + e.what());
        } catch (const Error& e) {
            problems.push_back("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!problems.empty()) {
        std::string message = "corpus file " + path + " has " +
                              std::to_string(problems.size()) + " malformed line(s): ";
        for (std::size_t i = 0; i < problems.size(); ++i) {
            if (i > 0) message += "; ";
            message += problems[i];
        }
        throw SchemaError(message);
    }
    return corpus;
}

KbStore build_kb(std::span<const Post> samples, std::span<const CorpusEntry> corpus,
                 ModelBackend& backend, const PipelineConfig& config,
                 const std::string& source_name) {
    const int dim = config.dimension;
    KbStore store(2 * dim);

    for (const Post& post : samples) {
        post.validate();
        if (!post.gold_label) {
            throw InvalidArgument("knowledge-base sample '" + post.id +
                                  "' carries no label");
        }
        std::vector<FeatureVector> text_features =
            text_segment_features(post.text, backend, config);
        std::vector<FeatureVector> frame_features =
            visual_frame_features(post.visual, backend, config);
        TextAnalysis text_stub;
        text_stub.segment_features = std::move(text_features);
        VisualAnalysis visual_stub;
        visual_stub.frame_features = std::move(frame_features);

        KbEntry entry;
        entry.id = post.id;
        entry.text = post.text;
        entry.visual_refs = visual_refs(post.visual);
        entry.label = *post.gold_label;
        entry.embedding = combine_features(text_stub, visual_stub, dim);
        entry.metadata = {{"source", source_name}, {"modality", "multimodal"}};
        store.insert(std::move(entry));
    }

    for (const CorpusEntry& corpus_entry : corpus) {
        std::vector<FeatureVector> text_features =
            text_segment_features(corpus_entry.text, backend, config);
        std::vector<double> acc(static_cast<std::size_t>(dim), 0.0);
        for (const FeatureVector& f : text_features) {
            if (f.size() != static_cast<std::size_t>(dim)) {
                throw DimensionMismatch("text feature has wrong dimension");
            }
            for (std::size_t i = 0; i < f.size(); ++i) acc[i] += f[i];
        }
        std::vector<float> embedding(2 * static_cast<std::size_t>(dim), 0.0f);
        for (std::size_t i = 0; i < acc.size(); ++i) {
            embedding[i] = static_cast<float>(acc[i] / static_cast<double>(text_features.size()));
        }

        KbEntry entry;
        entry.id = corpus_entry.id;
        entry.text = corpus_entry.text;
        entry.label = corpus_entry.label;
        entry.embedding = FeatureVector(std::move(embedding));
        entry.metadata = {{"source", source_name}, {"modality", "text"}};
        store.insert(std::move(entry));
    }

    return store;
}

std::vector<std::uint8_t> serialize_store(const KbStore& store) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(store.dimension()));
    put_u64(out, store.size());
    for (const KbEntry& entry : store.entries()) {
        put_string(out, entry.id);
        put_string(out, canonical_name(entry.label));
        put_string(out, entry.text);
        put_u32(out, static_cast<std::uint32_t>(entry.metadata.size()));
        for (const auto& [key, value] : entry.metadata) {
            put_string(out, key);
            put_string(out, value);
        }
        for (float f : entry.embedding.values()) put_f32(out, f);
    }
    return out;
}

KbStore deserialize_store(std::span<const std::uint8_t> bytes,
                          std::optional<int> expected_dimension) {
    Reader reader{bytes};
    reader.need(4);
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw FormatError("not a knowledge-base file (bad magic)");
    }
    reader.pos = 4;
    std::uint32_t version = reader.u32();
    if (version != kFormatVersion) {
        throw FormatError("unsupported knowledge-base format version " +
                          std::to_string(version));
    }
    std::uint32_t dimension = reader.u32();
    if (dimension == 0 || dimension > (1u << 24)) {
        throw FormatError("implausible dimension in knowledge-base file");
    }
    if (expected_dimension && static_cast<int>(dimension) != *expected_dimension) {
        throw DimensionMismatch("knowledge-base file has dimension " +
                                std::to_string(dimension) + ", pipeline expects " +
                                std::to_string(*expected_dimension));
    }
    std::uint64_t count = reader.u64();

    KbStore store(static_cast<int>(dimension));
    for (std::uint64_t i = 0; i < count; ++i) {
        KbEntry entry;
        entry.id = reader.str();
        try {
            entry.label = parse_label(reader.str());
        } catch (const UnknownLabel& e) {
            throw FormatError(std::string("corrupt entry label: ") + e.what());
        }
        entry.text = reader.str();
        std::uint32_t meta_count = reader.u32();
        for (std::uint32_t m = 0; m < meta_count; ++m) {
            std::string key = reader.str();
            std::string value = reader.str();
            entry.metadata.emplace(std::move(key), std::move(value));
        }
        std::vector<float> values(dimension);
        for (std::uint32_t d = 0; d < dimension; ++d) {
            float f = reader.f32();
            if (!std::isfinite(f)) {
                throw FormatError("corrupt embedding value in entry '" + entry.id + "'");
            }
            values[d] = f;
        }
        entry.embedding = FeatureVector(std::move(values));
        try {
            store.insert(std::move(entry));
        } catch (const DuplicateId& e) {
            throw FormatError(std::string("corrupt store: ") + e.what());
        }
    }
    if (reader.pos != bytes.size()) {
        throw FormatError("trailing bytes after the last entry");
    }
    return store;
}

void persist(const KbStore& store, const std::string& path) {
    std::vector<std::uint8_t> bytes = serialize_store(store);
    util::write_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()),
                                            bytes.size()));
}

KbStore load_kb(const std::string& path, std::optional<int> expected_dimension) {
    std::vector<std::uint8_t> bytes = util::read_file_bytes(path);
    return deserialize_store(bytes, expected_dimension);
}

}  // namespace sentipipe
