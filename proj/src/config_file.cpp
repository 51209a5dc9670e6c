#include "sentipipe/config_file.hpp"

#include "sentipipe/util.hpp"

#include <filesystem>

namespace sentipipe {

namespace {

bool parse_bool(std::string_view value) {
    std::string v = util::to_lower_ascii(util::trim(value));
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("expected a boolean, got '" + std::string(value) + "'");
}

int parse_int(std::string_view key, std::string_view value) {
    try {
        double d = util::parse_double(value);
        int i = static_cast<int>(d);
        if (static_cast<double>(i) != d) throw std::invalid_argument("not an integer");
        return i;
    } catch (const std::invalid_argument&) {
        throw ConfigError(std::string(key) + ": expected an integer, got '" +
                          std::string(value) + "'");
    }
}

double parse_real(std::string_view key, std::string_view value) {
    try {
        return util::parse_double(value);
    } catch (const std::invalid_argument&) {
        throw ConfigError(std::string(key) + ": expected a number, got '" +
                          std::string(value) + "'");
    }
}

}  // namespace

std::vector<std::string> load_stopword_file(const std::string& path) {
    std::vector<std::string> words;
    for (const std::string& line : util::split_lines(util::read_file_text(path))) {
        std::string word = util::trim(line);
        if (word.empty() || word[0] == '#') continue;
        words.push_back(util::to_lower_ascii(word));
    }
    return words;
}

void apply_config_override(PipelineConfig& config, std::string_view raw_key,
                           std::string_view raw_value) {
    std::string key = util::trim(raw_key);
    std::string value = util::trim(raw_value);
    if (key == "dimension_D") {
        config.dimension = parse_int(key, value);
    } else if (key == "theta") {
        config.theta = parse_real(key, value);
    } else if (key == "top_k") {
        config.top_k = parse_int(key, value);
    } else if (key == "alpha") {
        config.alpha = parse_real(key, value);
    } else if (key == "beta") {
        config.beta = parse_real(key, value);
    } else if (key == "segment_weighting") {
        if (value == "token_proportional") {
            config.segment_weighting = SegmentWeighting::token_proportional;
        } else if (value == "uniform") {
            config.segment_weighting = SegmentWeighting::uniform;
        } else {
            throw ConfigError("segment_weighting must be token_proportional or uniform");
        }
    } else if (key == "frame_weighting") {
        if (value != "uniform") {
            throw ConfigError("frame_weighting only supports uniform");
        }
        config.frame_weighting = FrameWeighting::uniform;
    } else if (key == "backend") {
        if (value == "stub") config.backend.kind = BackendKind::stub;
        else if (value == "remote") config.backend.kind = BackendKind::remote;
        else throw ConfigError("backend must be stub or remote");
    } else if (key == "endpoint") {
        config.backend.endpoint = value;
    } else if (key == "model") {
        config.backend.model = value;
    } else if (key == "embed_model") {
        config.backend.embed_model = value;
    } else if (key == "api_key_env") {
        config.backend.api_key_env = value;
    } else if (key == "timeout_ms") {
        config.backend.timeout_ms = parse_int(key, value);
    } else if (key == "retry_max_attempts") {
        config.backend.retry.max_attempts = parse_int(key, value);
    } else if (key == "retry_base_ms") {
        config.backend.retry.base_delay_ms = parse_int(key, value);
    } else if (key == "retry_factor") {
        config.backend.retry.factor = parse_real(key, value);
    } else if (key == "visual_capable") {
        config.backend.visual_capable = parse_bool(value);
    } else if (key == "max_in_flight") {
        config.backend.max_in_flight = parse_int(key, value);
    } else if (key == "lexicon_path") {
        config.backend.lexicon_path = value;
    } else if (key == "stopwords_path") {
        config.stopwords = load_stopword_file(value);
    } else if (key == "concurrency") {
        config.concurrency = parse_int(key, value);
    } else if (key.starts_with("valence.")) {
        SentimentLabel label = parse_label(key.substr(std::string("valence.").size()));
        config.label_valence[label] = parse_real(key, value);
    } else {
        throw ConfigError("unknown config key: '" + key + "'");
    }
}

PipelineConfig load_config_file(const std::string& path) {
    PipelineConfig config;
    std::string base_dir = std::filesystem::path(path).parent_path().string();
    const auto resolve = [&](std::string_view value) {
        std::filesystem::path p{std::string(value)};
        if (p.is_relative() && !base_dir.empty()) {
            p = std::filesystem::path(base_dir) / p;
        }
        return p.string();
    };

    int line_no = 0;
    for (const std::string& raw : util::split_lines(util::read_file_text(path))) {
        ++line_no;
        std::string line = raw;
        if (auto hash = line.find('#'); hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = util::trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + " line " + std::to_string(line_no) +
                              ": expected key = value");
        }
        std::string key = util::trim(line.substr(0, eq));
        std::string value = util::trim(line.substr(eq + 1));
        try {
            if (key == "lexicon_path" || key == "stopwords_path") {
                value = resolve(value);
            }
            apply_config_override(config, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(path + " line " + std::to_string(line_no) + ": " +
                              e.what());
        }
    }
    config.validate();
    return config;
}

}  // namespace sentipipe
