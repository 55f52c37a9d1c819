#pragma once

#include <cstdlib>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "httplib.h"

#include "hroute/error.hpp"
#include "hroute/gateway.hpp"
#include "hroute/json_util.hpp"

namespace hroute {

struct HttpEndpoint {
    /// Scheme, host and port, e.g. "http://localhost:8000". https needs a
    /// build with OpenSSL support.
    std::string base_url;
    std::string path;
    std::string api_key;
    int timeout_seconds = 120;
};

namespace detail {

inline httplib::Result post_json(const HttpEndpoint& ep, const Json& body) {
    httplib::Client client(ep.base_url);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(ep.timeout_seconds, 0);
    httplib::Headers headers;
    if (!ep.api_key.empty()) headers.emplace("Authorization", "Bearer " + ep.api_key);
    return client.Post(ep.path, headers, dump_line(body), "application/json");
}

/// 429 and 5xx are retryable; other failures are not.
inline void check_status(const httplib::Result& res, const std::string& what) {
    if (!res) throw Error(Errc::BackendUnavailable, what + ": " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500) throw TransientFault(what + ": HTTP " + std::to_string(res->status));
    if (res->status < 200 || res->status >= 300)
        throw Error(Errc::BackendUnavailable, what + ": HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
}

inline Json parse_body(const std::string& body, const std::string& what) {
    Json j = Json::parse(body, nullptr, false);
    if (j.is_discarded()) throw Error(Errc::BackendUnavailable, what + ": response is not JSON");
    return j;
}

}  // namespace detail

inline std::string api_key_from_env(const std::string& var) {
    if (var.empty()) return {};
    const char* v = std::getenv(var.c_str());
    return v ? std::string(v) : std::string();
}

/// Chat completions in the OpenAI wire format.
class HttpChatBackend final : public ChatBackend {
  public:
    explicit HttpChatBackend(HttpEndpoint ep) : ep_(std::move(ep)) {
        if (ep_.path.empty()) ep_.path = "/v1/chat/completions";
    }

    ChatResponse complete(const ChatRequest& req) override {
        Json messages = Json::array();
        for (const auto& m : req.messages) messages.push_back(Json{{"role", to_string(m.role)}, {"content", m.content}});
        Json body{{"model", req.model_id}, {"messages", messages}, {"temperature", req.temperature}, {"max_tokens", req.max_tokens}};
        if (req.seed) body["seed"] = *req.seed;
        const auto res = detail::post_json(ep_, body);
        detail::check_status(res, name());
        const Json doc = detail::parse_body(res->body, name());
        try {
            ChatResponse out;
            out.text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
            if (auto u = doc.find("usage"); u != doc.end() && u->is_object()) {
                out.prompt_tokens = u->value("prompt_tokens", 0ULL);
                out.completion_tokens = u->value("completion_tokens", 0ULL);
            }
            return out;
        } catch (const Json::exception& e) {
            throw Error(Errc::BackendUnavailable, name() + ": unexpected response shape: " + e.what());
        }
    }

    std::string name() const override { return "http-chat(" + ep_.base_url + ")"; }

  private:
    HttpEndpoint ep_;
};

class HttpEmbeddingBackend final : public EmbeddingBackend {
  public:
    HttpEmbeddingBackend(HttpEndpoint ep, std::string model) : ep_(std::move(ep)), model_(std::move(model)) {
        if (ep_.path.empty()) ep_.path = "/v1/embeddings";
    }

    std::vector<std::vector<double>> embed(std::span<const std::string> texts) override {
        Json input = Json::array();
        for (const auto& t : texts) input.push_back(t);
        const auto res = detail::post_json(ep_, Json{{"model", model_}, {"input", input}});
        detail::check_status(res, "http-embed");
        const Json doc = detail::parse_body(res->body, "http-embed");
        try {
            std::vector<std::vector<double>> out(texts.size());
            for (const auto& item : doc.at("data")) {
                const auto idx = item.value("index", std::size_t{0});
                if (idx >= out.size()) throw Error(Errc::BackendUnavailable, "http-embed: index out of range");
                out[idx] = item.at("embedding").get<std::vector<double>>();
            }
            for (const auto& v : out)
                if (v.empty()) throw Error(Errc::BackendUnavailable, "http-embed: missing embedding");
            return out;
        } catch (const Json::exception& e) {
            throw Error(Errc::BackendUnavailable, std::string("http-embed: unexpected response shape: ") + e.what());
        }
    }

    std::string model_id() const override { return model_; }

  private:
    HttpEndpoint ep_;
    std::string model_;
};

}  // namespace hroute
