#include "sentipipe/text_analyst.hpp"

#include "sentipipe/prompts.hpp"
#include "sentipipe/util.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <span>

namespace sentipipe {

namespace {

constexpr char32_t kCjkFullStop = 0x3002;
constexpr char32_t kCjkExclamation = 0xFF01;
constexpr char32_t kCjkQuestion = 0xFF1F;

bool is_sentence_terminator(char32_t cp) {
    return cp == '.' || cp == '!' || cp == '?' || cp == kCjkFullStop ||
           cp == kCjkExclamation || cp == kCjkQuestion;
}

bool is_punct_cp(char32_t cp) {
    if (cp < 0x80) return std::ispunct(static_cast<int>(cp)) != 0;
    if (is_sentence_terminator(cp)) return true;
    // curly quotes, dashes, ellipsis
    return (cp >= 0x2018 && cp <= 0x201F) || cp == 0x2013 || cp == 0x2014 ||
           cp == 0x2026;
}

bool is_space_cp(char32_t cp) {
    return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' ||
           cp == '\v' || cp == 0x00A0 || cp == 0x3000;
}

// Composition of an ASCII base letter with a common combining diacritic
// into the precomposed Latin-1 codepoint (NFC for the sequences this
// pipeline actually meets; everything else passes through unchanged).
char32_t compose(char32_t base, char32_t mark) {
    struct Pair { char32_t base, mark, composed; };
    static const Pair table[] = {
        {'a', 0x300, 0xE0}, {'a', 0x301, 0xE1}, {'a', 0x302, 0xE2},
        {'a', 0x303, 0xE3}, {'a', 0x308, 0xE4}, {'a', 0x30A, 0xE5},
        {'e', 0x300, 0xE8}, {'e', 0x301, 0xE9}, {'e', 0x302, 0xEA},
        {'e', 0x308, 0xEB},
        {'i', 0x300, 0xEC}, {'i', 0x301, 0xED}, {'i', 0x302, 0xEE},
        {'i', 0x308, 0xEF},
        {'o', 0x300, 0xF2}, {'o', 0x301, 0xF3}, {'o', 0x302, 0xF4},
        {'o', 0x303, 0xF5}, {'o', 0x308, 0xF6},
        {'u', 0x300, 0xF9}, {'u', 0x301, 0xFA}, {'u', 0x302, 0xFB},
        {'u', 0x308, 0xFC},
        {'n', 0x303, 0xF1}, {'c', 0x327, 0xE7},
        {'y', 0x301, 0xFD}, {'y', 0x308, 0xFF},
        {'A', 0x300, 0xC0}, {'A', 0x301, 0xC1}, {'A', 0x302, 0xC2},
        {'A', 0x303, 0xC3}, {'A', 0x308, 0xC4}, {'A', 0x30A, 0xC5},
        {'E', 0x300, 0xC8}, {'E', 0x301, 0xC9}, {'E', 0x302, 0xCA},
        {'E', 0x308, 0xCB},
        {'I', 0x300, 0xCC}, {'I', 0x301, 0xCD}, {'I', 0x302, 0xCE},
        {'I', 0x308, 0xCF},
        {'O', 0x300, 0xD2}, {'O', 0x301, 0xD3}, {'O', 0x302, 0xD4},
        {'O', 0x303, 0xD5}, {'O', 0x308, 0xD6},
        {'U', 0x300, 0xD9}, {'U', 0x301, 0xDA}, {'U', 0x302, 0xDB},
        {'U', 0x308, 0xDC},
        {'N', 0x303, 0xD1}, {'C', 0x327, 0xC7}, {'Y', 0x301, 0xDD},
    };
    for (const Pair& p : table) {
        if (p.base == base && p.mark == mark) return p.composed;
    }
    return 0;
}

char32_t lower_cp(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 32;
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 32;  // Latin-1
    if (cp == 0x178) return 0xFF;                                // Y with diaeresis
    return cp;
}

std::vector<char32_t> decode_all(std::string_view s) {
    std::vector<char32_t> cps;
    cps.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        auto [cp, len] = util::utf8_decode(s, i);
        cps.push_back(cp);
        i += static_cast<std::size_t>(len);
    }
    return cps;
}

std::string encode_all(std::span<const char32_t> cps) {
    std::string out;
    for (char32_t cp : cps) util::utf8_append(out, cp);
    return out;
}

bool is_ascii_vowel(char c) {
    return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

// Undoubles a trailing double consonant ("runn" -> "run") unless the letter
// is l, s or z or the result would fall under the minimum stem length.
std::string undouble(std::string stem) {
    if (stem.size() >= 4 && stem[stem.size() - 1] == stem[stem.size() - 2]) {
        char c = stem.back();
        if (c >= 'a' && c <= 'z' && !is_ascii_vowel(c) && c != 'l' && c != 's' &&
            c != 'z') {
            stem.pop_back();
        }
    }
    return stem;
}

constexpr std::string_view kTextScoreRole =
    "You are a text sentiment analyst. Rate the sentiment polarity of the "
    "given text segment as a number in [-1, 1], from extremely negative to "
    "extremely positive. ";

}  // namespace

namespace detail {

std::string strip_suffix(const std::string& token) {
    const std::size_t n = token.size();
    auto ends_with = [&](std::string_view suffix) {
        return n >= suffix.size() &&
               std::string_view(token).substr(n - suffix.size()) == suffix;
    };
    if (ends_with("ing") && n - 3 >= 3) {
        return undouble(token.substr(0, n - 3));
    }
    if (ends_with("ed") && n - 2 >= 3) {
        return undouble(token.substr(0, n - 2));
    }
    if ((ends_with("ses") || ends_with("xes") || ends_with("zes") ||
         ends_with("ches") || ends_with("shes")) &&
        n - 2 >= 3) {
        return token.substr(0, n - 2);
    }
    if (ends_with("s") && !ends_with("ss") && n - 1 >= 3) {
        return token.substr(0, n - 1);
    }
    return token;
}

}  // namespace detail

std::string preprocess(std::string_view raw, const std::vector<std::string>& stopwords) {
    if (util::trim(raw).empty()) {
        throw EmptyText("text is empty after trimming");
    }

    // NFC composition for common Latin sequences, then lowercasing.
    std::vector<char32_t> cps = decode_all(raw);
    std::vector<char32_t> composed;
    composed.reserve(cps.size());
    for (char32_t cp : cps) {
        if (!composed.empty()) {
            if (char32_t c = compose(composed.back(), cp); c != 0) {
                composed.back() = c;
                continue;
            }
        }
        composed.push_back(cp);
    }
    for (char32_t& cp : composed) cp = lower_cp(cp);

    std::set<std::string> stopset;
    for (const std::string& w : stopwords) stopset.insert(util::to_lower_ascii(w));

    std::vector<std::string> out_tokens;
    const auto emit = [&](const std::string& core, const std::string& trail) {
        if (!core.empty()) {
            out_tokens.push_back(core + trail);
        } else if (!trail.empty()) {
            // punctuation left behind by a dropped token attaches to the
            // previous token so sentence boundaries survive
            if (!out_tokens.empty()) out_tokens.back() += trail;
            else out_tokens.push_back(trail);
        }
    };

    std::size_t i = 0;
    const std::size_t n = composed.size();
    while (i < n) {
        while (i < n && is_space_cp(composed[i])) ++i;
        std::size_t start = i;
        while (i < n && !is_space_cp(composed[i])) ++i;
        if (i == start) break;
        std::span<const char32_t> token(&composed[start], i - start);

        // trailing punctuation first, so an all-punctuation token still
        // yields its sentence terminators
        std::size_t e = token.size();
        while (e > 0 && is_punct_cp(token[e - 1])) --e;
        std::string trail;
        for (std::size_t k = e; k < token.size(); ++k) {
            if (is_sentence_terminator(token[k])) util::utf8_append(trail, token[k]);
        }
        std::size_t b = 0;
        while (b < e && is_punct_cp(token[b])) ++b;
        std::string core = encode_all(token.subspan(b, e - b));
        if (core.empty()) {
            emit("", trail);
            continue;
        }
        if (stopset.count(core) > 0) {
            emit("", trail);
            continue;
        }
        emit(detail::strip_suffix(core), trail);
    }

    std::string result;
    for (std::size_t k = 0; k < out_tokens.size(); ++k) {
        if (k > 0) result.push_back(' ');
        result += out_tokens[k];
    }
    return result;
}

std::vector<Segment> segment_text(std::string_view pre) {
    if (util::trim(pre).empty()) {
        throw EmptyText("cannot segment empty text");
    }
    std::vector<Segment> segments;
    std::string current;
    std::size_t i = 0;
    bool in_terminator_run = false;
    const auto flush = [&] {
        std::string trimmed = util::trim(current);
        current.clear();
        if (trimmed.empty()) return;
        Segment seg;
        seg.index = static_cast<int>(segments.size());
        seg.token_count = static_cast<int>(util::split_whitespace(trimmed).size());
        seg.text = std::move(trimmed);
        segments.push_back(std::move(seg));
    };
    while (i < pre.size()) {
        auto [cp, len] = util::utf8_decode(pre, i);
        bool terminator = is_sentence_terminator(cp);
        if (in_terminator_run && !terminator) {
            flush();
        }
        util::utf8_append(current, cp);
        in_terminator_run = terminator;
        i += static_cast<std::size_t>(len);
    }
    flush();
    return segments;
}

std::vector<double> compute_weights(const std::vector<Segment>& segments,
                                    SegmentWeighting mode) {
    if (segments.empty()) {
        throw InvalidArgument("cannot compute weights for zero segments");
    }
    std::vector<double> weights(segments.size());
    if (mode == SegmentWeighting::uniform) {
        double w = 1.0 / static_cast<double>(segments.size());
        std::fill(weights.begin(), weights.end(), w);
        return weights;
    }
    long total = 0;
    for (const Segment& s : segments) total += s.token_count;
    if (total <= 0) {
        throw InvalidArgument("segments carry no tokens");
    }
    for (std::size_t i = 0; i < segments.size(); ++i) {
        weights[i] = static_cast<double>(segments[i].token_count) /
                     static_cast<double>(total);
    }
    return weights;
}

Score aggregate_text(const std::vector<Score>& scores, const std::vector<double>& weights) {
    if (scores.empty() || scores.size() != weights.size()) {
        throw WeightMismatch("scores and weights must be equal-length and non-empty");
    }
    double weight_sum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw WeightMismatch("weights must be non-negative");
        weight_sum += w;
    }
    if (std::abs(weight_sum - 1.0) > 1e-9) {
        throw WeightMismatch("weights must sum to 1, got " + util::fmt_double(weight_sum));
    }
    double lo = scores.front().value();
    double hi = lo;
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        sum += weights[i] * scores[i].value();
        lo = std::min(lo, scores[i].value());
        hi = std::max(hi, scores[i].value());
    }
    // Convex combination; rounding can land a hair outside the hull, so snap
    // back to the exact invariant.
    sum = std::clamp(sum, lo, hi);
    return Score(sum);
}

TextAnalysis run_text_analyst(std::string_view text, ModelBackend& backend,
                              const PipelineConfig& config) {
    std::string pre = preprocess(text, config.stopwords);
    if (pre.empty()) {
        throw EmptyText("nothing survives preprocessing");
    }
    std::vector<Segment> segments = segment_text(pre);

    TextAnalysis analysis;
    analysis.segment_scores.reserve(segments.size());
    analysis.segment_features.reserve(segments.size());
    for (const Segment& seg : segments) {
        ModelRequest request;
        request.role_prompt = std::string(kTextScoreRole) +
                              std::string(prompts::kScoreReportFormat);
        request.content.push_back(TextPart{seg.text});
        request.schema = ResponseSchema::ScoreOnly;
        ModelResponse response = backend.complete(request);
        analysis.segment_scores.push_back(*response.score);
        analysis.segment_features.push_back(backend.embed_text(seg.text));
    }
    analysis.weights = compute_weights(segments, config.segment_weighting);
    analysis.overall = aggregate_text(analysis.segment_scores, analysis.weights);
    return analysis;
}

std::vector<FeatureVector> text_segment_features(std::string_view text,
                                                 ModelBackend& backend,
                                                 const PipelineConfig& config) {
    std::string pre = preprocess(text, config.stopwords);
    if (pre.empty()) {
        throw EmptyText("nothing survives preprocessing");
    }
    std::vector<FeatureVector> features;
    for (const Segment& seg : segment_text(pre)) {
        features.push_back(backend.embed_text(seg.text));
    }
    return features;
}

void TextAnalysis::validate(int dimension) const {
    const std::size_t n = segment_scores.size();
    if (n == 0 || segment_features.size() != n || weights.size() != n) {
        throw WeightMismatch("text analysis lists must be equal-length and non-empty");
    }
    double weight_sum = 0.0;
    double weighted = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (weights[i] < 0.0) throw WeightMismatch("negative segment weight");
        weight_sum += weights[i];
        weighted += weights[i] * segment_scores[i].value();
        if (segment_features[i].size() != static_cast<std::size_t>(dimension)) {
            throw DimensionMismatch("segment feature has wrong dimension");
        }
    }
    if (std::abs(weight_sum - 1.0) > 1e-9) {
        throw WeightMismatch("segment weights do not sum to 1");
    }
    if (std::abs(weighted - overall.value()) > 1e-9) {
        throw WeightMismatch("overall does not match the weighted segment sum");
    }
}

}  // namespace sentipipe
