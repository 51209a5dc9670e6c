#include "fixtures.hpp"

#include "sentipipe/backend.hpp"

#include <random>

namespace sentipipe::fixtures {

ScopedTempDir::ScopedTempDir() {
    std::random_device rd;
    std::filesystem::path base = std::filesystem::temp_directory_path();
    for (int attempt = 0; attempt < 16; ++attempt) {
        std::filesystem::path candidate =
            base / ("sentipipe-test-" + std::to_string(rd()));
        std::error_code ec;
        if (std::filesystem::create_directory(candidate, ec)) {
            path_ = candidate;
            return;
        }
    }
    throw IoError("cannot create a temporary test directory");
}

ScopedTempDir::~ScopedTempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

std::vector<std::uint8_t> tiny_png(std::uint64_t variant) {
    static const std::uint8_t base[] = {
        0x89, 0x50, 0x4E, 0x47, 0x0D, 0x0A, 0x1A, 0x0A, 0x00, 0x00, 0x00, 0x0D,
        0x49, 0x48, 0x44, 0x52, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x01,
        0x08, 0x00, 0x00, 0x00, 0x00, 0x3A, 0x7E, 0x9B, 0x55, 0x00, 0x00, 0x00,
        0x0A, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9C, 0x63, 0x68, 0x00, 0x00, 0x00,
        0x82, 0x00, 0x81, 0x77, 0xCD, 0x72, 0xB6, 0x00, 0x00, 0x00, 0x00, 0x49,
        0x45, 0x4E, 0x44, 0xAE, 0x42, 0x60, 0x82,
    };
    std::vector<std::uint8_t> bytes(base, base + sizeof(base));
    for (int i = 0; i < 8; ++i) {
        bytes.push_back(static_cast<std::uint8_t>(variant >> (8 * i)));
    }
    return bytes;
}

FeatureVector random_feature(int dimension, util::SplitMix64& rng) {
    std::vector<float> values(static_cast<std::size_t>(dimension));
    for (float& v : values) v = static_cast<float>(rng.next_symmetric());
    return FeatureVector(std::move(values));
}

KbStore make_random_store(std::size_t n, int dimension, std::uint64_t seed,
                          std::size_t duplicate_every) {
    util::SplitMix64 rng(seed);
    KbStore store(dimension);
    for (std::size_t i = 0; i < n; ++i) {
        KbEntry entry;
        entry.id = "e" + std::to_string(i);
        entry.text = "entry " + std::to_string(i);
        entry.label = all_labels()[rng.bounded(kLabelCount)];
        if (duplicate_every > 0 && i > 0 && i % duplicate_every == 0) {
            entry.embedding = store.entries()[i / 2].embedding;
        } else {
            entry.embedding = random_feature(dimension, rng);
        }
        entry.metadata = {{"source", "random"}};
        store.insert(std::move(entry));
    }
    return store;
}

namespace {

const std::vector<std::string>& keywords_for(SentimentLabel label) {
    static const std::map<SentimentLabel, std::vector<std::string>> table = {
        {SentimentLabel::Like, {"adore", "cherish"}},
        {SentimentLabel::Happiness, {"joyful", "elated"}},
        {SentimentLabel::Anger, {"furious", "outraged"}},
        {SentimentLabel::Disgust, {"revolting", "repulsive"}},
        {SentimentLabel::Fear, {"terrified"}},
        {SentimentLabel::Sadness, {"heartbroken", "mournful"}},
        {SentimentLabel::Surprise, {"astonished", "unexpected"}},
    };
    return table.at(label);
}

const std::vector<std::string>& fillers() {
    static const std::vector<std::string> pool = {
        "the morning walk", "a city street", "the long journey", "a quiet room",
        "the open field",   "a familiar song", "an old photograph", "the harbor",
        "a festival night", "an empty train",
    };
    return pool;
}

// Valence-matched polarity words; none contains a label keyword as a
// substring (checked below when the post is assembled).
std::string polarity_word(double valence, util::SplitMix64& rng) {
    static const std::vector<std::string> positive = {"good", "great", "wonderful"};
    static const std::vector<std::string> negative = {"awful", "terrible", "gloomy"};
    const auto& pool = valence >= 0 ? positive : negative;
    return pool[rng.bounded(pool.size())];
}

}  // namespace

Dataset make_keyword_dataset(int per_label, std::uint64_t seed, int dimension,
                             const std::string& name) {
    const StubLexicon& lexicon = default_stub_lexicon();
    const auto valences = default_label_valence();
    util::SplitMix64 rng(seed);
    Dataset dataset;
    dataset.name = name;
    int index = 0;
    for (int i = 0; i < per_label; ++i) {
        for (SentimentLabel label : all_labels()) {
            const auto& keys = keywords_for(label);
            const std::string& keyword = keys[rng.bounded(keys.size())];
            double valence = valences.at(label);

            Post post;
            post.id = "p" + std::to_string(index++);
            post.text = fillers()[rng.bounded(fillers().size())] + " felt " + keyword +
                        " today. " + polarity_word(valence, rng) +
                        " views over the water.";

            // exactly one label keyword may occur in the text
            std::string lowered = util::to_lower_ascii(post.text);
            for (const auto& [kw, kw_label] : lexicon.label_keywords) {
                if (lowered.find(kw) != std::string::npos && kw_label != label) {
                    throw InvalidArgument("fixture text collides with keyword " + kw);
                }
            }

            int frames = 1 + static_cast<int>(rng.bounded(3));
            std::vector<ImageRef> refs;
            for (int f = 0; f < frames; ++f) {
                std::vector<float> values(static_cast<std::size_t>(dimension));
                values[0] = static_cast<float>(valence);
                for (std::size_t d = 1; d < values.size(); ++d) {
                    values[d] = static_cast<float>(valence + 0.05 * rng.next_symmetric());
                }
                refs.emplace_back(FeatureVector(std::move(values)));
            }
            if (frames == 1 || index % 2 == 0) {
                post.visual = ImageSet{std::move(refs)};
            } else {
                post.visual = VideoFrames{std::move(refs)};
            }
            post.gold_label = label;
            dataset.samples.push_back(std::move(post));
        }
    }
    return dataset;
}

std::vector<CorpusEntry> make_corpus(int n, std::uint64_t seed) {
    util::SplitMix64 rng(seed);
    std::vector<CorpusEntry> corpus;
    for (int i = 0; i < n; ++i) {
        SentimentLabel label = all_labels()[i % kLabelCount];
        const auto& keys = keywords_for(label);
        CorpusEntry entry;
        entry.id = "c" + std::to_string(i);
        entry.text = fillers()[rng.bounded(fillers().size())] + " archive note, " +
                     keys[rng.bounded(keys.size())] + " tone.";
        entry.label = label;
        corpus.push_back(std::move(entry));
    }
    return corpus;
}

}  // namespace sentipipe::fixtures
