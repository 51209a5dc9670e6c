#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sentipipe/knowledge_base.hpp"
#include "sentipipe/stub_backend.hpp"
#include "support/fixtures.hpp"

#include <algorithm>
#include <cmath>

using namespace sentipipe;
using fixtures::ScopedTempDir;

namespace {

FeatureVector fv(std::vector<float> values) { return FeatureVector(std::move(values)); }

// Independent oracle: naive cosine plus a full stable sort.
double naive_cosine(const FeatureVector& a, const FeatureVector& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / std::sqrt(na * nb);
}

std::vector<std::pair<std::string, double>> brute_force_top_k(const KbStore& store,
                                                              const FeatureVector& query,
                                                              int k) {
    std::vector<std::pair<std::string, double>> all;
    for (const KbEntry& entry : store.entries()) {
        all.emplace_back(entry.id, naive_cosine(entry.embedding, query));
    }
    std::stable_sort(all.begin(), all.end(), [](const auto& l, const auto& r) {
        if (l.second != r.second) return l.second > r.second;
        return l.first < r.first;
    });
    if (all.size() > static_cast<std::size_t>(k)) all.resize(k);
    return all;
}

}  // namespace

TEST_CASE("select_key_features is the identity at the right length") {
    FeatureVector v = fv({1.0f, 2.0f, 3.0f, 4.0f});
    CHECK(select_key_features(v, 2) == v);
    FeatureVector zero = fv({0.0f, 0.0f});
    CHECK(select_key_features(zero, 1) == zero);
    CHECK_THROWS_AS(select_key_features(v, 3), DimensionMismatch);
}

TEST_CASE("cosine similarity") {
    FeatureVector a = fv({1.0f, 0.0f});
    FeatureVector b = fv({0.0f, 1.0f});
    FeatureVector c = fv({1.0f, 1.0f});

    CHECK(similarity(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(similarity(a, b) == 0.0);
    CHECK(similarity(a, c) == doctest::Approx(0.70711).epsilon(1e-5));
    CHECK(similarity(fv({0.0f, 0.0f}), a) == 0.0);
    CHECK_THROWS_AS(similarity(a, fv({1.0f})), DimensionMismatch);

    SUBCASE("symmetry and scale invariance over random vectors") {
        util::SplitMix64 rng(99);
        for (int round = 0; round < 200; ++round) {
            int dim = 2 + static_cast<int>(rng.bounded(16));
            FeatureVector x = fixtures::random_feature(dim, rng);
            FeatureVector y = fixtures::random_feature(dim, rng);
            double xy = similarity(x, y);
            CHECK(std::abs(xy - similarity(y, x)) <= 1e-12);
            CHECK(xy >= -1.0 - 1e-12);
            CHECK(xy <= 1.0 + 1e-12);

            // power-of-two scales are exact in float, so c*a carries no
            // storage rounding and the 1e-9 bound applies cleanly
            float exact_scale = static_cast<float>(1 << (1 + rng.bounded(6)));
            if (rng.bounded(2) == 0) exact_scale = 1.0f / exact_scale;
            std::vector<float> scaled = x.values();
            for (float& s : scaled) s *= exact_scale;
            CHECK(std::abs(similarity(fv(std::move(scaled)), y) - xy) <= 1e-9);

            // arbitrary scales perturb each float entry by ~1e-7
            float rough_scale = static_cast<float>(0.5 + rng.next_unit() * 4.0);
            std::vector<float> rough = x.values();
            for (float& s : rough) s *= rough_scale;
            CHECK(std::abs(similarity(fv(std::move(rough)), y) - xy) <= 1e-5);
        }
    }
}

TEST_CASE("store insertion enforces ids and dimensions") {
    KbStore store(4);
    KbEntry entry;
    entry.id = "a";
    entry.text = "t";
    entry.label = SentimentLabel::Like;
    entry.embedding = fv({1.0f, 0.0f, 0.0f, 0.0f});
    store.insert(entry);
    CHECK(store.size() == 1);
    CHECK_THROWS_AS(store.insert(entry), DuplicateId);

    KbEntry wrong = entry;
    wrong.id = "b";
    wrong.embedding = fv({1.0f});
    CHECK_THROWS_AS(store.insert(wrong), DimensionMismatch);
}

TEST_CASE("top_k basics") {
    KbStore store(2);
    const auto add = [&](const std::string& id, float x, float y, SentimentLabel label) {
        KbEntry e;
        e.id = id;
        e.text = id;
        e.label = label;
        e.embedding = fv({x, y});
        store.insert(e);
    };
    add("a", 1.0f, 0.0f, SentimentLabel::Happiness);
    add("b", 0.0f, 1.0f, SentimentLabel::Anger);
    add("c", 1.0f, 1.0f, SentimentLabel::Like);

    SUBCASE("k larger than the store returns everything") {
        auto out = top_k(store, fv({1.0f, 0.0f}), 5);
        REQUIRE(out.size() == 3);
        CHECK(out[0].first.id == "a");
        CHECK(out[0].second == doctest::Approx(1.0));
    }
    SUBCASE("self-match ranks first with similarity 1") {
        auto out = top_k(store, fv({0.0f, 1.0f}), 1);
        REQUIRE(out.size() == 1);
        CHECK(out[0].first.id == "b");
        CHECK(out[0].second == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("exact ties order by ascending id") {
        add("z", 2.0f, 0.0f, SentimentLabel::Fear);  // same direction as "a"
        auto out = top_k(store, fv({1.0f, 0.0f}), 2);
        REQUIRE(out.size() == 2);
        CHECK(out[0].first.id == "a");
        CHECK(out[1].first.id == "z");
    }
    SUBCASE("query counter observes calls") {
        CHECK(store.queries_served() == 0);
        top_k(store, fv({1.0f, 0.0f}), 1);
        top_k(store, fv({1.0f, 0.0f}), 1);
        CHECK(store.queries_served() == 2);
    }
    SUBCASE("empty store") {
        KbStore empty(2);
        CHECK_THROWS_AS(top_k(empty, fv({1.0f, 0.0f}), 1), EmptyStore);
    }
    SUBCASE("query dimension must match") {
        CHECK_THROWS_AS(top_k(store, fv({1.0f}), 1), DimensionMismatch);
    }
}

TEST_CASE("top_k equals the brute-force oracle on seeded random stores") {
    util::SplitMix64 rng(4242);
    for (int round = 0; round < 25; ++round) {
        std::size_t n = 1 + rng.bounded(400);
        int dim = 2 + static_cast<int>(rng.bounded(32));
        KbStore store = fixtures::make_random_store(n, dim, rng.next(),
                                                    /*duplicate_every=*/7);
        FeatureVector query = fixtures::random_feature(dim, rng);
        int k = 1 + static_cast<int>(rng.bounded(12));

        auto got = top_k(store, query, k);
        auto expect = brute_force_top_k(store, query, k);
        REQUIRE(got.size() == expect.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].first.id == expect[i].first);
        }
        // similarities non-increasing
        for (std::size_t i = 1; i < got.size(); ++i) {
            CHECK(got[i - 1].second >= got[i].second);
        }
    }
}

TEST_CASE("summarize_retrieved renders entries for the stub histogram") {
    PipelineConfig config;
    config.dimension = 2;
    StubBackend stub(config);

    std::vector<std::pair<KbEntry, double>> similar;
    const auto add = [&](const std::string& id, SentimentLabel label) {
        KbEntry e;
        e.id = id;
        e.text = "text of " + id;
        e.label = label;
        e.embedding = fv({1.0f, 0.0f, 0.0f, 0.0f});
        e.metadata = {{"source", "unit"}};
        similar.emplace_back(std::move(e), 0.5);
    };
    add("a", SentimentLabel::Happiness);
    add("b", SentimentLabel::Happiness);
    add("c", SentimentLabel::Anger);
    CHECK(summarize_retrieved(similar, stub) == "retrieved: Happiness×2, Anger×1");

    similar.clear();
    add("only", SentimentLabel::Fear);
    CHECK(summarize_retrieved(similar, stub) == "retrieved: Fear×1");

    similar.clear();
    CHECK_THROWS_AS(summarize_retrieved(similar, stub), EmptyRetrieval);
}

TEST_CASE("corpus files are JSONL id/text/label lines") {
    ScopedTempDir dir;
    util::write_file(dir.file("corpus.jsonl"),
                     R"({"id":"c1","text":"lovely weather today","label":"Happiness"})"
                     "\n"
                     R"({"id":"c2","text":"this is dreadful","label":"anger"})"
                     "\n");
    auto corpus = load_corpus(dir.file("corpus.jsonl"));
    REQUIRE(corpus.size() == 2);
    CHECK(corpus[0].id == "c1");
    CHECK(corpus[0].label == SentimentLabel::Happiness);
    CHECK(corpus[1].label == SentimentLabel::Anger);  // case-insensitive labels

    SUBCASE("malformed lines are reported with numbers") {
        util::write_file(dir.file("bad.jsonl"),
                         R"({"id":"c1","text":"fine","label":"Happiness"})"
                         "\n"
                         R"({"id":"c2","text":"missing label"})"
                         "\n");
        try {
            load_corpus(dir.file("bad.jsonl"));
            FAIL("expected SchemaError");
        } catch (const SchemaError& e) {
            CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        }
    }
    SUBCASE("missing file is an io error") {
        CHECK_THROWS_AS(load_corpus(dir.file("nope.jsonl")), IoError);
    }
}

TEST_CASE("build_kb embeds samples and corpus entries") {
    PipelineConfig config;
    config.dimension = 4;
    StubBackend stub(config);
    Dataset dataset = fixtures::make_keyword_dataset(1, 7, config.dimension);
    REQUIRE(dataset.samples.size() == 7);
    std::vector<CorpusEntry> corpus = fixtures::make_corpus(3, 8);

    KbStore store = build_kb(dataset.samples, corpus, stub, config, "unit");
    CHECK(store.size() == 10);
    CHECK(store.dimension() == 8);

    SUBCASE("text-only entries have a zero visual half") {
        const KbEntry* corpus_entry = nullptr;
        for (const KbEntry& e : store.entries()) {
            if (e.id == "c0") corpus_entry = &e;
        }
        REQUIRE(corpus_entry != nullptr);
        bool text_half_nonzero = false;
        for (int i = 0; i < 4; ++i) {
            if ((*corpus_entry).embedding[i] != 0.0f) text_half_nonzero = true;
            CHECK((*corpus_entry).embedding[4 + i] == 0.0f);
        }
        CHECK(text_half_nonzero);
        CHECK(corpus_entry->metadata.at("modality") == "text");
    }
    SUBCASE("duplicate ids are rejected") {
        std::vector<CorpusEntry> duped = corpus;
        duped.push_back(corpus[0]);
        CHECK_THROWS_AS(build_kb(dataset.samples, duped, stub, config, "unit"),
                        DuplicateId);
    }
    SUBCASE("unlabeled samples are rejected") {
        Dataset bad = dataset;
        bad.samples[0].gold_label.reset();
        CHECK_THROWS_AS(build_kb(bad.samples, {}, stub, config, "unit"),
                        InvalidArgument);
    }
}

TEST_CASE("persistence round-trips bit-exactly") {
    ScopedTempDir dir;
    util::SplitMix64 rng(31337);

    for (int round = 0; round < 10; ++round) {
        KbStore store = fixtures::make_random_store(1 + rng.bounded(50),
                                                    2 + 2 * static_cast<int>(rng.bounded(8)),
                                                    rng.next());
        std::string path = dir.file("store" + std::to_string(round) + ".smkb");
        persist(store, path);
        KbStore loaded = load_kb(path);

        REQUIRE(loaded.size() == store.size());
        CHECK(loaded.dimension() == store.dimension());
        for (std::size_t i = 0; i < store.size(); ++i) {
            const KbEntry& a = store.entries()[i];
            const KbEntry& b = loaded.entries()[i];
            CHECK(a.id == b.id);
            CHECK(a.label == b.label);
            CHECK(a.text == b.text);
            CHECK(a.metadata == b.metadata);
            CHECK(a.embedding == b.embedding);  // float-exact
        }
        // byte-level: serialize(load(persist(s))) == serialize(s)
        CHECK(serialize_store(loaded) == serialize_store(store));
    }
}

TEST_CASE("corrupted stores fail with FormatError, never a crash") {
    ScopedTempDir dir;
    KbStore store = fixtures::make_random_store(5, 6, 11);
    std::vector<std::uint8_t> bytes = serialize_store(store);

    SUBCASE("bad magic") {
        auto bad = bytes;
        bad[0] = 'X';
        CHECK_THROWS_AS(deserialize_store(bad), FormatError);
    }
    SUBCASE("bad version") {
        auto bad = bytes;
        bad[4] = 99;
        CHECK_THROWS_AS(deserialize_store(bad), FormatError);
    }
    SUBCASE("truncations at every prefix length") {
        for (std::size_t len = 0; len < bytes.size(); len += 3) {
            std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + len);
            CHECK_THROWS_AS(deserialize_store(cut), FormatError);
        }
    }
    SUBCASE("trailing garbage") {
        auto bad = bytes;
        bad.push_back(0);
        CHECK_THROWS_AS(deserialize_store(bad), FormatError);
    }
    SUBCASE("dimension mismatch on load") {
        std::string path = dir.file("s.smkb");
        persist(store, path);
        CHECK_THROWS_AS(load_kb(path, 8), DimensionMismatch);
        CHECK_NOTHROW(load_kb(path, 6));
    }
    SUBCASE("missing file is an io error") {
        CHECK_THROWS_AS(load_kb(dir.file("nope.smkb")), IoError);
    }
}
