#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sentipipe/aggregator.hpp"
#include "sentipipe/dataset_eval.hpp"
#include "sentipipe/stub_backend.hpp"
#include "support/fixtures.hpp"

#include <cmath>

using namespace sentipipe;

namespace {

KbEntry labeled_entry(const std::string& id, SentimentLabel label) {
    KbEntry e;
    e.id = id;
    e.text = "entry " + id;
    e.label = label;
    e.embedding = FeatureVector({1.0f, 0.0f});
    return e;
}

PipelineConfig fixture_config() {
    PipelineConfig config;
    config.dimension = 4;
    return config;
}

Post keyword_post(const std::string& id, const std::string& text, double v0,
                  int dimension = 4) {
    Post post;
    post.id = id;
    post.text = text;
    std::vector<float> values(static_cast<std::size_t>(dimension),
                              static_cast<float>(v0));
    post.visual = ImageSet{{FeatureVector(std::move(values))}};
    return post;
}

}  // namespace

TEST_CASE("mean_similar averages label valences") {
    auto valences = default_label_valence();
    std::vector<std::pair<KbEntry, double>> similar;

    similar.emplace_back(labeled_entry("a", SentimentLabel::Happiness), 0.9);
    CHECK(mean_similar(similar, valences).value() == doctest::Approx(0.9));

    similar.emplace_back(labeled_entry("b", SentimentLabel::Anger), 0.8);
    similar.emplace_back(labeled_entry("c", SentimentLabel::Like), 0.7);
    CHECK(mean_similar(similar, valences).value() == doctest::Approx(0.7 / 3.0));

    // similarity values are not weights: reversing them changes nothing
    similar[0].second = 0.1;
    similar[2].second = 0.99;
    CHECK(mean_similar(similar, valences).value() == doctest::Approx(0.7 / 3.0));

    similar.clear();
    similar.emplace_back(labeled_entry("d", SentimentLabel::Happiness), 0.5);
    similar.emplace_back(labeled_entry("e", SentimentLabel::Sadness), 0.5);
    std::map<SentimentLabel, double> symmetric = default_label_valence();
    symmetric[SentimentLabel::Happiness] = 0.6;
    symmetric[SentimentLabel::Sadness] = -0.6;
    CHECK(mean_similar(similar, symmetric).value() == 0.0);

    similar.clear();
    CHECK_THROWS_AS(mean_similar(similar, valences), EmptyRetrieval);
}

TEST_CASE("combine_scores is the alpha/beta convex combination") {
    CHECK(combine_scores(Score(0.42), Score(-0.9), 1.0, 0.0).value() == 0.42);
    CHECK(combine_scores(Score(0.5), Score(-0.5), 0.7, 0.3).value() ==
          doctest::Approx(0.2));
    CHECK(combine_scores(Score(0.37), Score(0.37), 0.25, 0.75).value() ==
          doctest::Approx(0.37));

    CHECK_THROWS_AS(combine_scores(Score(0.1), Score(0.1), 0.7, 0.2), WeightViolation);
    CHECK_THROWS_AS(combine_scores(Score(0.1), Score(0.1), 1.2, -0.2), WeightViolation);

    SUBCASE("convexity and alpha-monotonicity") {
        util::SplitMix64 rng(555);
        for (int round = 0; round < 300; ++round) {
            Score mm(rng.next_symmetric());
            Score sim(rng.next_symmetric());
            double alpha = rng.next_unit();
            Score combined = combine_scores(mm, sim, alpha, 1.0 - alpha);
            CHECK(combined.value() >= std::min(mm.value(), sim.value()) - 1e-15);
            CHECK(combined.value() <= std::max(mm.value(), sim.value()) + 1e-15);
        }
        Score mm(0.8), sim(-0.4);
        double previous = -2.0;
        for (double alpha = 0.0; alpha <= 1.0 + 1e-12; alpha += 0.1) {
            double value = combine_scores(mm, sim, alpha, 1.0 - alpha).value();
            CHECK(value > previous);
            previous = value;
        }
    }
}

TEST_CASE("classify goes through the backend prompt contract") {
    PipelineConfig config = fixture_config();
    StubBackend stub(config);

    SUBCASE("keyword precedence") {
        Post post = keyword_post("p1", "I was terrified by the storm", 0.0);
        auto [label, report] = classify(Score(0.9), "fusion", "rag", {}, post, stub);
        CHECK(label == SentimentLabel::Fear);
        CHECK(report.find("label=Fear combined=0.9") == 0);
    }
    SUBCASE("nearest valence fallback") {
        Post post = keyword_post("p2", "plain words only", 0.0);
        auto [label, report] = classify(Score(0.85), "f", "r", {}, post, stub);
        CHECK(label == SentimentLabel::Happiness);
    }
    SUBCASE("tie breaks to the lexicographically smaller name") {
        Post post = keyword_post("p3", "plain words only", 0.0);
        auto [label, report] = classify(Score(-0.75), "f", "r", {}, post, stub);
        CHECK(label == SentimentLabel::Anger);
    }
    SUBCASE("hypotheses are carried in the prompt") {
        Post post = keyword_post("p4", "plain words only", 0.0);
        std::vector<std::string> hypotheses = {"modality conflict"};
        auto [label, report] = classify(Score(0.0), "f", "r", hypotheses, post, stub);
        CHECK(label == SentimentLabel::Surprise);  // valence 0.1 nearest to 0
    }
}

TEST_CASE("run_pipeline executes all five stages") {
    PipelineConfig config = fixture_config();
    StubBackend stub(config);
    Dataset train = fixtures::make_keyword_dataset(2, 17, config.dimension, "train");
    KbStore store = build_kb(train.samples, {}, stub, config, "train");
    stub.reset_counters();

    Post post = keyword_post("q1", "the parade felt joyful today. great views.", 0.9);
    post.gold_label = SentimentLabel::Happiness;

    SUBCASE("keyword fixture lands on its gold label with a full trace") {
        FinalOutput out = run_pipeline(post, store, stub, config);
        CHECK(out.label == SentimentLabel::Happiness);
        REQUIRE(out.trace.text.has_value());
        REQUIRE(out.trace.visual.has_value());
        REQUIRE(out.trace.fusion.has_value());
        REQUIRE(out.trace.retrieval.has_value());
        CHECK(out.trace.retrieval->similar.size() ==
              std::min<std::size_t>(config.top_k, store.size()));

        // combined score is recomputable from the trace
        double recomputed = config.alpha * out.trace.fusion->multimodal_score.value() +
                            config.beta * out.similar_score.value();
        CHECK(std::abs(out.combined_score.value() - recomputed) <= 1e-9);
        CHECK(out.final_report.find("label=Happiness") == 0);
    }
    SUBCASE("identical post twice gives identical output") {
        FinalOutput a = run_pipeline(post, store, stub, config);
        FinalOutput b = run_pipeline(post, store, stub, config);
        CHECK(a.label == b.label);
        CHECK(a.final_report == b.final_report);
        CHECK(a.combined_score == b.combined_score);
        CHECK(a.similar_score == b.similar_score);
        CHECK(prediction_jsonl_line(post, a) == prediction_jsonl_line(post, b));
    }
    SUBCASE("empty store aborts in stage 4 with EmptyStore") {
        KbStore empty(2 * config.dimension);
        bool caught = false;
        try {
            run_pipeline(post, empty, stub, config);
        } catch (const EmptyStore& e) {
            caught = true;
            CHECK(std::string(e.what()).find("stage 4") != std::string::npos);
        }
        CHECK(caught);
    }
    SUBCASE("batch runner preserves input order across jobs") {
        Dataset batch = fixtures::make_keyword_dataset(3, 23, config.dimension, "batch");
        std::vector<FinalOutput> serial =
            run_batch(batch.samples, store, stub, config, 1);
        std::vector<FinalOutput> parallel =
            run_batch(batch.samples, store, stub, config, 4);
        REQUIRE(serial.size() == batch.samples.size());
        REQUIRE(parallel.size() == batch.samples.size());
        for (std::size_t i = 0; i < serial.size(); ++i) {
            CHECK(serial[i].label == parallel[i].label);
            CHECK(serial[i].final_report == parallel[i].final_report);
            CHECK(prediction_jsonl_line(batch.samples[i], serial[i]) ==
                  prediction_jsonl_line(batch.samples[i], parallel[i]));
        }
    }
}
