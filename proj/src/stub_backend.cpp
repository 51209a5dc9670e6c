#include "sentipipe/stub_backend.hpp"

#include "sentipipe/prompts.hpp"
#include "sentipipe/util.hpp"

#include <algorithm>
#include <cmath>

namespace sentipipe {

namespace {

std::string normalize_for_hash(std::string_view text) {
    std::string lowered = util::to_lower_ascii(text);
    std::string out;
    out.reserve(lowered.size());
    bool in_space = true;
    for (char c : lowered) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!in_space) out.push_back(' ');
            in_space = true;
        } else {
            out.push_back(c);
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

std::pair<long, long> count_lexicon_terms(std::string_view segment,
                                          const StubLexicon& lexicon) {
    std::string cleaned = util::to_lower_ascii(segment);
    for (char& c : cleaned) {
        if (std::ispunct(static_cast<unsigned char>(c))) c = ' ';
    }
    long pos = 0;
    long neg = 0;
    for (const std::string& token : util::split_whitespace(cleaned)) {
        if (lexicon.positive_terms.count(token) > 0) ++pos;
        else if (lexicon.negative_terms.count(token) > 0) ++neg;
    }
    return {pos, neg};
}

// Keeps only the fields the schema names; the response invariant is an
// exact field match.
ModelResponse prune_to_schema(ModelResponse r, ResponseSchema schema) {
    switch (schema) {
        case ResponseSchema::ScoreOnly:
            r.report.reset();
            r.label.reset();
            r.hypotheses.clear();
            break;
        case ResponseSchema::ScoreAndReport:
            r.label.reset();
            r.hypotheses.clear();
            break;
        case ResponseSchema::ReportOnly:
            r.score.reset();
            r.label.reset();
            r.hypotheses.clear();
            break;
        case ResponseSchema::LabelAndReport:
            r.score.reset();
            r.hypotheses.clear();
            break;
        case ResponseSchema::Hypotheses:
            r.score.reset();
            r.report.reset();
            r.label.reset();
            break;
    }
    return r;
}

}  // namespace

StubBackend::StubBackend(StubLexicon lexicon, int dimension,
                         std::map<SentimentLabel, double> valence_map)
    : lexicon_(std::move(lexicon)),
      dimension_(dimension),
      valence_map_(std::move(valence_map)) {
    lexicon_.validate();
    if (dimension_ < 1) throw ConfigError("stub backend dimension must be >= 1");
}

StubBackend::StubBackend(const PipelineConfig& config)
    : StubBackend(config.backend.lexicon_path.empty()
                      ? default_stub_lexicon()
                      : load_stub_lexicon(config.backend.lexicon_path),
                  config.dimension, config.label_valence) {}

ModelResponse StubBackend::do_complete(const ModelRequest& request) {
    ModelResponse response;
    switch (request.schema) {
        case ResponseSchema::ScoreOnly:
        case ResponseSchema::ScoreAndReport:
            if (request.has_image()) {
                response = score_visual(request);
            } else if (request.features) {
                response = score_fusion(request);
            } else {
                response = score_text(request);
            }
            break;
        case ResponseSchema::ReportOnly:
            response = summarize_labels(request);
            break;
        case ResponseSchema::LabelAndReport:
            response = classify_post(request);
            break;
        case ResponseSchema::Hypotheses:
            response.hypotheses = {"stub: cross-modal conflict flagged"};
            break;
    }
    return prune_to_schema(std::move(response), request.schema);
}

FeatureVector StubBackend::do_embed_text(std::string_view text) {
    return expand_seed(util::fnv1a64(normalize_for_hash(text)));
}

FeatureVector StubBackend::do_embed_image(std::span<const std::uint8_t> bytes) {
    return expand_seed(util::fnv1a64(bytes));
}

FeatureVector StubBackend::expand_seed(std::uint64_t seed) const {
    util::SplitMix64 rng(seed);
    std::vector<double> raw(static_cast<std::size_t>(dimension_));
    double norm_sq = 0.0;
    for (double& v : raw) {
        v = rng.next_symmetric();
        norm_sq += v * v;
    }
    double norm = std::sqrt(norm_sq);
    std::vector<float> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out[i] = static_cast<float>(norm > 0.0 ? raw[i] / norm : raw[i]);
    }
    return FeatureVector(std::move(out));
}

ModelResponse StubBackend::score_visual(const ModelRequest& request) {
    FeatureVector features;
    if (request.features) {
        features = *request.features;
    } else {
        for (const auto& part : request.content) {
            if (const auto* image = std::get_if<ImagePart>(&part)) {
                if (image->bytes.empty()) {
                    throw InvalidArgument("image part carries no bytes");
                }
                features = do_embed_image(image->bytes);
                break;
            }
        }
    }
    if (features.empty()) {
        throw InvalidArgument("visual scoring request carries no features");
    }
    float v0 = features[0];
    ModelResponse response;
    response.score = normalize_score(static_cast<double>(v0));
    response.report = "stub: v[0]=" + util::fmt_float(v0);
    return response;
}

ModelResponse StubBackend::score_fusion(const ModelRequest& request) {
    const FeatureVector& combined = *request.features;
    if (combined.size() < 2 || combined.size() % 2 != 0) {
        throw DimensionMismatch("fusion features must have even length, got " +
                                std::to_string(combined.size()));
    }
    std::size_t half = combined.size() / 2;
    double text_sum = 0.0;
    double visual_sum = 0.0;
    for (std::size_t i = 0; i < half; ++i) text_sum += combined[i];
    for (std::size_t i = half; i < combined.size(); ++i) visual_sum += combined[i];
    double text_mean = text_sum / static_cast<double>(half);
    double visual_mean = visual_sum / static_cast<double>(half);
    ModelResponse response;
    response.score = normalize_score((text_mean + visual_mean) / 2.0);
    response.report = "stub fusion: text_mean=" + util::fmt_double(text_mean) +
                      " visual_mean=" + util::fmt_double(visual_mean);
    return response;
}

ModelResponse StubBackend::score_text(const ModelRequest& request) {
    std::string text = request.joined_text();
    auto [pos, neg] = count_lexicon_terms(text, lexicon_);
    ModelResponse response;
    response.score = stub_text_score(text, lexicon_);
    response.report = "stub lexicon: pos=" + std::to_string(pos) +
                      " neg=" + std::to_string(neg);
    return response;
}

ModelResponse StubBackend::summarize_labels(const ModelRequest& request) {
    std::vector<SentimentLabel> order;
    std::map<SentimentLabel, long> counts;
    for (const std::string& line : util::split_lines(request.joined_text())) {
        std::string trimmed = util::trim(line);
        if (!trimmed.starts_with(prompts::kEntryLabelPrefix)) continue;
        std::string name = util::trim(trimmed.substr(prompts::kEntryLabelPrefix.size()));
        SentimentLabel label;
        try {
            label = parse_label(name);
        } catch (const UnknownLabel&) {
            continue;
        }
        if (counts[label]++ == 0) order.push_back(label);
    }
    std::string report = "retrieved:";
    if (order.empty()) {
        report += " (none)";
    } else {
        for (std::size_t i = 0; i < order.size(); ++i) {
            report += (i == 0 ? " " : ", ");
            report += canonical_name(order[i]) + "×" + std::to_string(counts[order[i]]);
        }
    }
    ModelResponse response;
    response.report = std::move(report);
    return response;
}

ModelResponse StubBackend::classify_post(const ModelRequest& request) {
    std::string content = request.joined_text();
    std::vector<std::string> lines = util::split_lines(content);

    std::optional<double> combined;
    std::string subject;
    bool in_subject = false;
    for (const std::string& line : lines) {
        if (in_subject) {
            if (!subject.empty()) subject.push_back('\n');
            subject += line;
            continue;
        }
        if (line.starts_with(prompts::kCombinedScorePrefix)) {
            combined = util::parse_double(line.substr(prompts::kCombinedScorePrefix.size()));
        } else if (util::trim(line) == prompts::kPostTextHeader) {
            in_subject = true;
        }
    }
    if (!combined) {
        throw InvalidArgument("classification prompt missing combined score line");
    }
    if (!in_subject) {
        throw InvalidArgument("classification prompt missing post text section");
    }

    ModelResponse response;

    // Keyword rule first: earliest occurrence in the post text wins; ties
    // broken by the lexicographically smallest keyword (map order).
    std::string lowered = util::to_lower_ascii(subject);
    std::size_t best_pos = std::string::npos;
    const std::string* best_keyword = nullptr;
    SentimentLabel best_label = SentimentLabel::Like;
    for (const auto& [keyword, label] : lexicon_.label_keywords) {
        std::size_t at = lowered.find(keyword);
        if (at == std::string::npos) continue;
        if (at < best_pos) {
            best_pos = at;
            best_keyword = &keyword;
            best_label = label;
        }
    }
    if (best_keyword != nullptr) {
        response.label = best_label;
        response.report = "stub: keyword '" + *best_keyword + "'";
        return response;
    }

    // Fallback: nearest valence, ties by canonical name ascending.
    std::vector<SentimentLabel> by_name(all_labels().begin(), all_labels().end());
    std::sort(by_name.begin(), by_name.end(), [](SentimentLabel a, SentimentLabel b) {
        return canonical_name(a) < canonical_name(b);
    });
    constexpr double kTieEpsilon = 1e-12;
    SentimentLabel nearest = by_name.front();
    double best_dist = std::numeric_limits<double>::infinity();
    for (SentimentLabel label : by_name) {
        double dist = std::abs(label_valence(label, valence_map_).value() - *combined);
        if (dist < best_dist - kTieEpsilon) {
            best_dist = dist;
            nearest = label;
        }
    }
    response.label = nearest;
    response.report = "stub: nearest valence to " + util::fmt_double(*combined);
    return response;
}

}  // namespace sentipipe
