#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sentipipe/stub_backend.hpp"
#include "sentipipe/text_analyst.hpp"
#include "sentipipe/util.hpp"

#include <algorithm>
#include <numeric>

using namespace sentipipe;

TEST_CASE("preprocess normalizes, drops stop-words and strips suffixes") {
    std::vector<std::string> stops = {"the", "are"};
    CHECK(preprocess("The CATS   are running!", stops) == "cat run!");
    CHECK(preprocess("hello.", {}) == "hello.");
    CHECK_THROWS_AS(preprocess("   ", {}), EmptyText);
}

TEST_CASE("preprocess composes decomposed accents") {
    // 'e' + combining acute composes, then lowercases
    CHECK(preprocess("Cafe\xcc\x81 life", {}) == "caf\xc3\xa9 life");
    CHECK(preprocess("CAFE\xcc\x81", {}) == "caf\xc3\xa9");
}

TEST_CASE("preprocess keeps sentence punctuation from dropped tokens") {
    std::vector<std::string> stops = {"it", "was"};
    // terminator carried by a stop-word token attaches to the previous token
    CHECK(preprocess("nice, it was.", stops) == "nice.");
    CHECK(preprocess("good day, bad night", {}) == "good day bad night");
    // standalone punctuation tokens keep their sentence boundary
    CHECK(preprocess("wow ! and then", {}) == "wow! and then");
    CHECK(preprocess("\"bright.\" next", {}) == "bright. next");
}

TEST_CASE("suffix stripping is conservative") {
    using detail::strip_suffix;
    CHECK(strip_suffix("cats") == "cat");
    CHECK(strip_suffix("running") == "run");
    CHECK(strip_suffix("falling") == "fall");   // ll is never undoubled
    CHECK(strip_suffix("stopped") == "stop");
    CHECK(strip_suffix("boxes") == "box");
    CHECK(strip_suffix("glasses") == "glass");
    CHECK(strip_suffix("glass") == "glass");    // -ss plurals stay
    CHECK(strip_suffix("sing") == "sing");      // stem would be too short
    CHECK(strip_suffix("need") == "need");
    CHECK(strip_suffix("gas") == "gas");
    CHECK(strip_suffix("added") == "add");      // undoubling respects min length
}

TEST_CASE("segmentation splits on sentence-final punctuation") {
    auto segs = segment_text("good day. bad night.");
    REQUIRE(segs.size() == 2);
    CHECK(segs[0].text == "good day.");
    CHECK(segs[0].index == 0);
    CHECK(segs[0].token_count == 2);
    CHECK(segs[1].text == "bad night.");
    CHECK(segs[1].token_count == 2);

    CHECK(segment_text("no punctuation here").size() == 1);

    auto three = segment_text("a! b? c.");
    REQUIRE(three.size() == 3);
    CHECK(three[0].index == 0);
    CHECK(three[1].index == 1);
    CHECK(three[2].index == 2);

    // consecutive terminators stay with their segment
    auto grouped = segment_text("what?! ok.");
    REQUIRE(grouped.size() == 2);
    CHECK(grouped[0].text == "what?!");

    // CJK terminators
    auto cjk = segment_text("\xe4\xbd\xa0\xe5\xa5\xbd\xe3\x80\x82" "again" "\xef\xbc\x81");
    CHECK(cjk.size() == 2);
}

TEST_CASE("segment weights") {
    std::vector<Segment> segs = {{0, "a b", 2}, {1, "c d", 2}};
    auto even = compute_weights(segs, SegmentWeighting::token_proportional);
    CHECK(even == std::vector<double>{0.5, 0.5});

    segs = {{0, "a", 1}, {1, "b c d", 3}};
    auto prop = compute_weights(segs, SegmentWeighting::token_proportional);
    CHECK(prop[0] == doctest::Approx(0.25));
    CHECK(prop[1] == doctest::Approx(0.75));

    auto uniform = compute_weights(segs, SegmentWeighting::uniform);
    CHECK(uniform == std::vector<double>{0.5, 0.5});
    double sum = std::accumulate(prop.begin(), prop.end(), 0.0);
    CHECK(std::abs(sum - 1.0) <= 1e-9);
}

TEST_CASE("aggregate_text computes the weighted sum") {
    CHECK(aggregate_text({Score(0.4)}, {1.0}).value() == doctest::Approx(0.4));
    CHECK(aggregate_text({Score(1.0), Score(-1.0)}, {0.5, 0.5}).value() == 0.0);
    CHECK(aggregate_text({Score(0.8), Score(0.0)}, {0.25, 0.75}).value() ==
          doctest::Approx(0.2));

    CHECK_THROWS_AS(aggregate_text({Score(0.1)}, {0.5, 0.5}), WeightMismatch);
    CHECK_THROWS_AS(aggregate_text({Score(0.1), Score(0.2)}, {0.6, 0.6}), WeightMismatch);
    CHECK_THROWS_AS(aggregate_text({Score(0.1), Score(0.2)}, {1.5, -0.5}), WeightMismatch);
    CHECK_THROWS_AS(aggregate_text({}, {}), WeightMismatch);
}

TEST_CASE("aggregation properties over seeded random cases") {
    util::SplitMix64 rng(2024);
    for (int round = 0; round < 500; ++round) {
        std::size_t n = 1 + rng.bounded(6);
        std::vector<Score> scores;
        std::vector<double> raw(n);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            scores.push_back(Score(rng.next_symmetric()));
            raw[i] = rng.next_unit() + 1e-9;
            total += raw[i];
        }
        std::vector<double> weights(n);
        for (std::size_t i = 0; i < n; ++i) weights[i] = raw[i] / total;

        Score overall = aggregate_text(scores, weights);

        // independent recomputation in long double
        long double expect = 0.0L;
        double lo = 1.0, hi = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            expect += static_cast<long double>(weights[i]) * scores[i].value();
            lo = std::min(lo, scores[i].value());
            hi = std::max(hi, scores[i].value());
        }
        CHECK(std::abs(overall.value() - static_cast<double>(expect)) <= 1e-12);
        CHECK(overall.value() >= lo - 1e-15);
        CHECK(overall.value() <= hi + 1e-15);

        // permutation invariance
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = n; i > 1; --i) {
            std::swap(perm[i - 1], perm[rng.bounded(i)]);
        }
        std::vector<Score> pscores;
        std::vector<double> pweights;
        for (std::size_t i : perm) {
            pscores.push_back(scores[i]);
            pweights.push_back(weights[i]);
        }
        CHECK(std::abs(aggregate_text(pscores, pweights).value() - overall.value()) <=
              1e-12);
    }
}

TEST_CASE("run_text_analyst composes the stage") {
    PipelineConfig config;
    config.dimension = 8;
    StubBackend stub(config);

    SUBCASE("worked two-segment example") {
        TextAnalysis analysis = run_text_analyst("good good. awful.", stub, config);
        REQUIRE(analysis.segment_scores.size() == 2);
        CHECK(analysis.segment_scores[0].value() == doctest::Approx(2.0 / 3.0));
        CHECK(analysis.segment_scores[1].value() == doctest::Approx(-0.5));
        CHECK(analysis.weights[0] == doctest::Approx(2.0 / 3.0));
        CHECK(analysis.weights[1] == doctest::Approx(1.0 / 3.0));
        CHECK(analysis.overall.value() == doctest::Approx(5.0 / 18.0));
        CHECK_NOTHROW(analysis.validate(config.dimension));
        // one score call and one embed per segment
        CHECK(stub.counters().text_score_calls == 2);
        CHECK(stub.counters().text_embeds == 2);
    }
    SUBCASE("single neutral segment") {
        TextAnalysis analysis = run_text_analyst("nothing matches", stub, config);
        REQUIRE(analysis.segment_scores.size() == 1);
        CHECK(analysis.overall.value() == 0.0);
        CHECK(analysis.weights == std::vector<double>{1.0});
    }
    SUBCASE("empty text is rejected") {
        CHECK_THROWS_AS(run_text_analyst("   ", stub, config), EmptyText);
    }
    SUBCASE("stub determinism end to end") {
        TextAnalysis a = run_text_analyst("good day. awful night.", stub, config);
        TextAnalysis b = run_text_analyst("good day. awful night.", stub, config);
        CHECK(a.overall == b.overall);
        CHECK(a.segment_features == b.segment_features);
    }
}
