#include "sentipipe/remote_backend.hpp"

#include "sentipipe/util.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <semaphore>
#include <thread>

namespace sentipipe {

using nlohmann::json;

namespace {

bool is_retryable_status(int status) {
    return status == 429 || (status >= 500 && status <= 599);
}

// Splits "http://host:port/base" into host-port root and path prefix.
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
    std::string rest = endpoint;
    std::size_t scheme = rest.find("://");
    std::size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
    std::size_t slash = rest.find('/', host_start);
    if (slash == std::string::npos) return {rest, ""};
    std::string base = rest.substr(0, slash);
    std::string prefix = rest.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {base, prefix};
}

std::string strip_first_line(std::string_view body) {
    std::size_t nl = body.find('\n');
    std::string line(nl == std::string::npos ? body : body.substr(0, nl));
    return util::trim(line);
}

}  // namespace

std::pair<double, std::string> parse_score_report_line(std::string_view body) {
    std::string line = strip_first_line(body);
    if (line.empty()) throw ProtocolError("empty model reply where a score was expected");
    std::string score_part = line;
    std::string report;
    std::size_t bar = line.find('|');
    if (bar != std::string::npos) {
        score_part = util::trim(line.substr(0, bar));
        report = util::trim(line.substr(bar + 1));
    }
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(score_part.data(),
                                     score_part.data() + score_part.size(), value);
    if (ec != std::errc() || ptr != score_part.data() + score_part.size()) {
        throw ProtocolError("cannot parse score from model reply: '" + line + "'");
    }
    return {value, report};
}

std::pair<SentimentLabel, std::string> parse_label_report_line(std::string_view body) {
    std::string line = strip_first_line(body);
    if (line.empty()) throw ProtocolError("empty model reply where a label was expected");
    std::string label_part = line;
    std::string report;
    std::size_t bar = line.find('|');
    if (bar != std::string::npos) {
        label_part = util::trim(line.substr(0, bar));
        report = util::trim(line.substr(bar + 1));
    }
    try {
        return {parse_label(label_part), report};
    } catch (const UnknownLabel&) {
        throw ProtocolError("model emitted a label outside the seven categories: '" +
                            label_part + "'");
    }
}

std::vector<std::string> parse_hypotheses(std::string_view body) {
    std::vector<std::string> hypotheses;
    for (const std::string& raw : util::split_lines(body)) {
        std::string line = util::trim(raw);
        if (line.starts_with("- ") || line.starts_with("* ")) {
            line = util::trim(line.substr(2));
        }
        if (!line.empty()) hypotheses.push_back(std::move(line));
    }
    if (hypotheses.empty()) {
        throw ProtocolError("model reply contains no hypotheses");
    }
    return hypotheses;
}

struct RemoteBackend::Impl {
    BackendSpec spec;
    int dimension;
    std::string host;
    std::string path_prefix;
    std::string api_key;
    std::counting_semaphore<64> in_flight;

    Impl(const BackendSpec& s, int dim)
        : spec(s),
          dimension(dim),
          in_flight(std::min(std::max(s.max_in_flight, 1), 64)) {
        if (spec.endpoint.empty()) {
            throw ConfigError("remote backend requires an endpoint URL");
        }
        auto [base, prefix] = split_endpoint(spec.endpoint);
        host = base;
        path_prefix = prefix;
        if (!spec.api_key_env.empty()) {
            if (const char* key = std::getenv(spec.api_key_env.c_str())) {
                api_key = key;
            }
        }
    }

    std::unique_ptr<httplib::Client> make_client() const {
        auto client = std::make_unique<httplib::Client>(host);
        const auto timeout = std::chrono::milliseconds(spec.timeout_ms);
        client->set_connection_timeout(timeout);
        client->set_read_timeout(timeout);
        client->set_write_timeout(timeout);
        if (!api_key.empty()) client->set_bearer_token_auth(api_key);
        return client;
    }

    // POST with the configured retry budget. Returns the response body.
    std::string post_json(const std::string& path, const json& payload) {
        in_flight.acquire();
        struct Release {
            std::counting_semaphore<64>& sem;
            ~Release() { sem.release(); }
        } release{in_flight};

        std::string body = payload.dump();
        std::string last_failure;
        for (int attempt = 0; attempt < spec.retry.max_attempts; ++attempt) {
            if (attempt > 0) {
                double factor = std::pow(spec.retry.factor, attempt - 1);
                auto delay = std::chrono::milliseconds(
                    static_cast<long>(spec.retry.base_delay_ms * factor));
                std::this_thread::sleep_for(delay);
            }
            auto client = make_client();
            httplib::Result result =
                client->Post(path_prefix + path, body, "application/json");
            if (!result) {
                last_failure = "transport failure: " + httplib::to_string(result.error());
                continue;  // connection-level errors are retryable
            }
            if (result->status == 200) return result->body;
            std::string excerpt = result->body.substr(0, 200);
            last_failure = "HTTP " + std::to_string(result->status) +
                           (excerpt.empty() ? "" : ": " + excerpt);
            if (!is_retryable_status(result->status)) {
                throw TransportError("request to " + path + " failed (" + last_failure + ")");
            }
        }
        throw TransportError("request to " + path + " failed after " +
                             std::to_string(spec.retry.max_attempts) +
                             " attempts (" + last_failure + ")");
    }

    json user_content(const ModelRequest& request) const {
        json parts = json::array();
        for (const auto& part : request.content) {
            if (const auto* text = std::get_if<TextPart>(&part)) {
                parts.push_back({{"type", "text"}, {"text", text->text}});
            } else {
                const auto& image = std::get<ImagePart>(part);
                if (image.bytes.empty()) {
                    throw CapabilityError(
                        "precomputed-vector image ref cannot be sent to a remote backend");
                }
                std::string mime = image.mime.empty() ? "image/png" : image.mime;
                std::string url = "data:" + mime + ";base64," +
                                  util::base64_encode(image.bytes);
                parts.push_back({{"type", "image_url"},
                                 {"image_url", {{"url", url}}}});
            }
        }
        return parts;
    }

    std::string chat(const ModelRequest& request, const std::string& reask_note,
                     const std::string& previous_reply) {
        json messages = json::array();
        messages.push_back({{"role", "system"}, {"content", request.role_prompt}});
        messages.push_back({{"role", "user"}, {"content", user_content(request)}});
        if (!reask_note.empty()) {
            messages.push_back({{"role", "assistant"}, {"content", previous_reply}});
            messages.push_back({{"role", "user"}, {"content", reask_note}});
        }
        json payload = {
            {"model", spec.model},
            {"messages", messages},
            {"temperature", 0},
        };
        std::string body = post_json("/chat/completions", payload);
        json reply;
        try {
            reply = json::parse(body);
        } catch (const json::exception& e) {
            throw ProtocolError(std::string("chat response is not valid JSON: ") + e.what());
        }
        try {
            return reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception&) {
            throw ProtocolError("chat response missing choices[0].message.content");
        }
    }
};

RemoteBackend::RemoteBackend(const BackendSpec& spec, int dimension)
    : impl_(std::make_unique<Impl>(spec, dimension)) {}

RemoteBackend::~RemoteBackend() = default;

bool RemoteBackend::visual_capable() const {
    return impl_->spec.visual_capable;
}

ModelResponse RemoteBackend::do_complete(const ModelRequest& request) {
    const char* format_note = nullptr;
    switch (request.schema) {
        case ResponseSchema::ScoreOnly:
        case ResponseSchema::ScoreAndReport:
            format_note = "Your previous reply could not be parsed. Respond with "
                          "exactly one line: SCORE | REPORT, with SCORE a number "
                          "in [-1, 1].";
            break;
        case ResponseSchema::LabelAndReport:
            format_note = "Your previous reply could not be parsed. Respond with "
                          "exactly one line: LABEL | REPORT, where LABEL is one of "
                          "Like, Happiness, Anger, Disgust, Fear, Sadness, Surprise.";
            break;
        case ResponseSchema::ReportOnly:
            format_note = "Your previous reply was empty. Respond with a short "
                          "plain-text report.";
            break;
        case ResponseSchema::Hypotheses:
            format_note = "Your previous reply could not be parsed. Respond with "
                          "one hypothesis per line.";
            break;
    }

    std::string reply = impl_->chat(request, "", "");
    for (int round = 0;; ++round) {
        try {
            ModelResponse response;
            switch (request.schema) {
                case ResponseSchema::ScoreOnly: {
                    auto [raw, report] = parse_score_report_line(reply);
                    response.score = normalize_score(raw);
                    break;
                }
                case ResponseSchema::ScoreAndReport: {
                    auto [raw, report] = parse_score_report_line(reply);
                    response.score = normalize_score(raw);
                    response.report = report;
                    break;
                }
                case ResponseSchema::ReportOnly: {
                    std::string report = util::trim(reply);
                    if (report.empty()) throw ProtocolError("empty report reply");
                    response.report = report;
                    break;
                }
                case ResponseSchema::LabelAndReport: {
                    auto [label, report] = parse_label_report_line(reply);
                    response.label = label;
                    response.report = report;
                    break;
                }
                case ResponseSchema::Hypotheses:
                    response.hypotheses = parse_hypotheses(reply);
                    break;
            }
            return response;
        } catch (const ProtocolError&) {
            if (round >= 1) throw;  // one re-ask, then give up
            std::cerr << "backend: unparseable model reply, re-asking once\n";
            reply = impl_->chat(request, format_note, reply);
        }
    }
}

FeatureVector RemoteBackend::do_embed_text(std::string_view text) {
    json payload = {
        {"model", impl_->spec.embed_model},
        {"input", std::string(text)},
    };
    std::string body = impl_->post_json("/embeddings", payload);
    json reply;
    try {
        reply = json::parse(body);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("embedding response is not valid JSON: ") + e.what());
    }
    try {
        std::vector<double> raw =
            reply.at("data").at(0).at("embedding").get<std::vector<double>>();
        return project_to_dimension(raw, impl_->dimension);
    } catch (const json::exception&) {
        throw ProtocolError("embedding response missing data[0].embedding");
    }
}

FeatureVector RemoteBackend::do_embed_image(std::span<const std::uint8_t> bytes) {
    // OpenAI-compatible multimodal embedding endpoints accept data URLs as
    // input strings; servers without image support will reject the call.
    std::string url = "data:image/png;base64," + util::base64_encode(bytes);
    json payload = {
        {"model", impl_->spec.embed_model},
        {"input", url},
    };
    std::string body = impl_->post_json("/embeddings", payload);
    json reply;
    try {
        reply = json::parse(body);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("embedding response is not valid JSON: ") + e.what());
    }
    try {
        std::vector<double> raw =
            reply.at("data").at(0).at("embedding").get<std::vector<double>>();
        return project_to_dimension(raw, impl_->dimension);
    } catch (const json::exception&) {
        throw ProtocolError("embedding response missing data[0].embedding");
    }
}

}  // namespace sentipipe
