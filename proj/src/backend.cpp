#include "sentipipe/backend.hpp"

#include "sentipipe/util.hpp"

#include <cmath>
#include <iostream>

namespace sentipipe {

bool ModelRequest::has_image() const {
    for (const auto& part : content) {
        if (std::holds_alternative<ImagePart>(part)) return true;
    }
    return false;
}

std::string ModelRequest::joined_text() const {
    std::string out;
    for (const auto& part : content) {
        if (const auto* text = std::get_if<TextPart>(&part)) {
            if (!out.empty()) out.push_back('\n');
            out += text->text;
        }
    }
    return out;
}

ModelResponse ModelBackend::complete(const ModelRequest& request) {
    if (request.content.empty()) {
        throw InvalidArgument("model request has no content");
    }
    if (request.has_image() && !visual_capable()) {
        throw CapabilityError("image content sent to a text-only backend");
    }
    count_request(request);
    ModelResponse response = do_complete(request);
    check_schema(request, response);
    return response;
}

FeatureVector ModelBackend::embed_text(std::string_view text) {
    if (util::trim(text).empty()) {
        throw InvalidArgument("embed input is empty");
    }
    text_embeds_.fetch_add(1, std::memory_order_relaxed);
    return do_embed_text(text);
}

FeatureVector ModelBackend::embed_image(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) {
        throw InvalidArgument("embed input is empty");
    }
    if (!visual_capable()) {
        throw CapabilityError("image content sent to a text-only backend");
    }
    image_embeds_.fetch_add(1, std::memory_order_relaxed);
    return do_embed_image(bytes);
}

BackendCounters ModelBackend::counters() const {
    BackendCounters c;
    c.text_score_calls = text_score_calls_.load();
    c.image_score_calls = image_score_calls_.load();
    c.fusion_calls = fusion_calls_.load();
    c.report_calls = report_calls_.load();
    c.label_calls = label_calls_.load();
    c.hypothesis_calls = hypothesis_calls_.load();
    c.text_embeds = text_embeds_.load();
    c.image_embeds = image_embeds_.load();
    c.clamped_scores = clamped_scores_.load();
    return c;
}

void ModelBackend::reset_counters() {
    text_score_calls_ = 0;
    image_score_calls_ = 0;
    fusion_calls_ = 0;
    report_calls_ = 0;
    label_calls_ = 0;
    hypothesis_calls_ = 0;
    text_embeds_ = 0;
    image_embeds_ = 0;
    clamped_scores_ = 0;
}

Score ModelBackend::normalize_score(double raw) {
    if (!std::isfinite(raw)) {
        throw ProtocolError("model emitted a non-finite score");
    }
    if (raw < -1.0 || raw > 1.0) {
        double clamped = raw < -1.0 ? -1.0 : 1.0;
        clamped_scores_.fetch_add(1, std::memory_order_relaxed);
        std::cerr << "backend: model score " << util::fmt_double(raw)
                  << " clamped to " << util::fmt_double(clamped) << "\n";
        return Score(clamped);
    }
    return Score(raw);
}

void ModelBackend::count_request(const ModelRequest& request) {
    switch (request.schema) {
        case ResponseSchema::ScoreOnly:
        case ResponseSchema::ScoreAndReport:
            if (request.has_image()) {
                image_score_calls_.fetch_add(1, std::memory_order_relaxed);
            } else if (request.features) {
                fusion_calls_.fetch_add(1, std::memory_order_relaxed);
            } else {
                text_score_calls_.fetch_add(1, std::memory_order_relaxed);
            }
            break;
        case ResponseSchema::ReportOnly:
            report_calls_.fetch_add(1, std::memory_order_relaxed);
            break;
        case ResponseSchema::LabelAndReport:
            label_calls_.fetch_add(1, std::memory_order_relaxed);
            break;
        case ResponseSchema::Hypotheses:
            hypothesis_calls_.fetch_add(1, std::memory_order_relaxed);
            break;
    }
}

void ModelBackend::check_schema(const ModelRequest& request, const ModelResponse& response) {
    const auto fail = [&](const char* what) {
        throw ProtocolError(std::string("response does not match schema: ") + what);
    };
    switch (request.schema) {
        case ResponseSchema::ScoreOnly:
            if (!response.score) fail("missing score");
            break;
        case ResponseSchema::ScoreAndReport:
            if (!response.score) fail("missing score");
            if (!response.report) fail("missing report");
            break;
        case ResponseSchema::ReportOnly:
            if (!response.report) fail("missing report");
            break;
        case ResponseSchema::LabelAndReport:
            if (!response.label) fail("missing label");
            if (!response.report) fail("missing report");
            break;
        case ResponseSchema::Hypotheses:
            if (response.hypotheses.empty()) fail("missing hypotheses");
            break;
    }
}

FeatureVector project_to_dimension(const std::vector<double>& raw, int dimension) {
    std::vector<float> out(static_cast<std::size_t>(dimension), 0.0f);
    std::size_t n = std::min(raw.size(), out.size());
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(raw[i]);
    return FeatureVector(std::move(out));
}

void StubLexicon::validate() const {
    for (const auto& term : positive_terms) {
        if (negative_terms.count(term) > 0) {
            throw ConfigError("lexicon term in both positive and negative sets: " + term);
        }
    }
}

const StubLexicon& default_stub_lexicon() {
    static const StubLexicon lexicon = [] {
        StubLexicon lex;
        lex.positive_terms = {
            "good",  "great",     "love",      "wonderful", "excellent",
            "amazing", "delightful", "fantastic", "awesome",  "pleasant",
            "beautiful", "enjoy",  "charming",  "bright",    "warm",
        };
        lex.negative_terms = {
            "bad",   "awful",  "terrible", "horrible", "hate",
            "nasty", "gloomy", "ugly",     "worst",    "miserable",
            "dreadful", "cruel", "grim",   "rotten",   "sour",
        };
        lex.label_keywords = {
            {"adore", SentimentLabel::Like},
            {"cherish", SentimentLabel::Like},
            {"joyful", SentimentLabel::Happiness},
            {"elated", SentimentLabel::Happiness},
            {"furious", SentimentLabel::Anger},
            {"outraged", SentimentLabel::Anger},
            {"revolting", SentimentLabel::Disgust},
            {"repulsive", SentimentLabel::Disgust},
            {"terrified", SentimentLabel::Fear},
            {"dread", SentimentLabel::Fear},
            {"heartbroken", SentimentLabel::Sadness},
            {"mournful", SentimentLabel::Sadness},
            {"astonished", SentimentLabel::Surprise},
            {"unexpected", SentimentLabel::Surprise},
        };
        lex.validate();
        return lex;
    }();
    return lexicon;
}

StubLexicon parse_stub_lexicon(std::string_view text) {
    StubLexicon lex;
    enum class Section { none, positive, negative, labels };
    Section section = Section::none;
    int line_no = 0;
    for (const std::string& raw_line : util::split_lines(text)) {
        ++line_no;
        std::string line = util::trim(raw_line);
        if (line.empty() || line[0] == '#') continue;
        if (line == "[positive]") { section = Section::positive; continue; }
        if (line == "[negative]") { section = Section::negative; continue; }
        if (line == "[labels]")   { section = Section::labels;   continue; }
        if (line.front() == '[') {
            throw ConfigError("lexicon line " + std::to_string(line_no) +
                              ": unknown section " + line);
        }
        switch (section) {
            case Section::positive:
                lex.positive_terms.insert(util::to_lower_ascii(line));
                break;
            case Section::negative:
                lex.negative_terms.insert(util::to_lower_ascii(line));
                break;
            case Section::labels: {
                auto eq = line.find('=');
                if (eq == std::string::npos) {
                    throw ConfigError("lexicon line " + std::to_string(line_no) +
                                      ": expected keyword=Label");
                }
                std::string keyword = util::to_lower_ascii(util::trim(line.substr(0, eq)));
                std::string label = util::trim(line.substr(eq + 1));
                if (keyword.empty()) {
                    throw ConfigError("lexicon line " + std::to_string(line_no) +
                                      ": empty keyword");
                }
                lex.label_keywords[keyword] = parse_label(label);
                break;
            }
            case Section::none:
                throw ConfigError("lexicon line " + std::to_string(line_no) +
                                  ": term before any section header");
        }
    }
    lex.validate();
    return lex;
}

StubLexicon load_stub_lexicon(const std::string& path) {
    return parse_stub_lexicon(util::read_file_text(path));
}

Score stub_text_score(std::string_view segment, const StubLexicon& lexicon) {
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
    return Score(static_cast<double>(pos - neg) / static_cast<double>(pos + neg + 1));
}

}  // namespace sentipipe
