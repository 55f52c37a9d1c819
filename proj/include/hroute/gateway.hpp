#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hroute/error.hpp"
#include "hroute/rng.hpp"

namespace hroute {

enum class Role { System, User, Assistant };

constexpr std::string_view to_string(Role r) noexcept {
    switch (r) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

struct ChatMessage {
    Role role = Role::User;
    std::string content;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    double temperature = 0.7;
    int max_tokens = 2048;
    std::string model_id = "mock";
    /// Sampling seed forwarded to backends that support one. Mock backends
    /// fold it into their output, so two requests that differ only by seed
    /// can produce different completions.
    std::optional<std::uint64_t> seed;

    void validate() const {
        if (messages.empty()) throw Error(Errc::BadConfig, "chat request without messages");
        if (messages.front().role == Role::Assistant) throw Error(Errc::BadConfig, "first message must be system or user");
        if (!(temperature >= 0)) throw Error(Errc::BadConfig, "temperature must be >= 0");
        if (max_tokens <= 0) throw Error(Errc::BadConfig, "max_tokens must be positive");
    }

    /// Concatenated message contents; what mocks pattern-match against.
    std::string joined() const {
        std::string out;
        for (const auto& m : messages) {
            out += m.content;
            out += '\n';
        }
        return out;
    }

    std::uint64_t hash() const noexcept {
        std::uint64_t h = fnv1a(model_id);
        for (const auto& m : messages) {
            h = fnv1a(to_string(m.role), h);
            h = fnv1a("\x1f", h);
            h = fnv1a(m.content, h);
            h = fnv1a("\x1e", h);
        }
        h = splitmix64(h ^ static_cast<std::uint64_t>(std::llround(temperature * 1000.0)));
        h = splitmix64(h ^ static_cast<std::uint64_t>(max_tokens));
        if (seed) h = splitmix64(h ^ *seed ^ 0x5eedULL);
        return h;
    }
};

struct ChatResponse {
    std::string text;
    std::uint64_t prompt_tokens = 0;
    std::uint64_t completion_tokens = 0;
};

/// Raised by backends for retryable conditions (rate limits, 5xx).
class TransientFault : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ChatBackend {
  public:
    virtual ~ChatBackend() = default;
    /// Throws TransientFault for retryable failures and
    /// Error(BackendUnavailable) for transport or payload failures.
    virtual ChatResponse complete(const ChatRequest& request) = 0;
    virtual std::string name() const = 0;
};

class EmbeddingBackend {
  public:
    virtual ~EmbeddingBackend() = default;
    virtual std::vector<std::vector<double>> embed(std::span<const std::string> texts) = 0;
    virtual std::string model_id() const = 0;
};

struct EmbeddingVector {
    std::vector<double> values;
    std::string model_id;

    std::size_t dim() const noexcept { return values.size(); }
    bool operator==(const EmbeddingVector&) const = default;
};

/// Bag-of-tokens feature hashing into a fixed number of dimensions, then
/// L2-normalized. Deterministic in (seed, text). Texts sharing vocabulary
/// land close together, which keeps similarity-based code paths meaningful
/// offline.
class MockEmbeddingBackend final : public EmbeddingBackend {
  public:
    explicit MockEmbeddingBackend(std::uint64_t seed = 0, std::size_t dim = 64) : seed_(seed), dim_(dim) {}

    std::vector<std::vector<double>> embed(std::span<const std::string> texts) override {
        std::vector<std::vector<double>> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(embed_one(t));
        return out;
    }

    std::string model_id() const override { return "mock-hash-" + std::to_string(dim_); }

    std::vector<double> embed_one(std::string_view text) const {
        std::vector<double> v(dim_, 0.0);
        const std::uint64_t basis = splitmix64(seed_ ^ 0xe3b0c44298fc1c14ULL);
        for_each_token(text, [&](std::string_view tok) {
            const std::uint64_t h = fnv1a(tok, basis);
            v[h % dim_] += ((h >> 40) & 1) ? 1.0 : -1.0;
        });
        double norm2 = 0;
        for (double x : v) norm2 += x * x;
        if (norm2 == 0) {
            Rng rng(fnv1a(text, basis) ^ 0xa5a5a5a5ULL);
            for (auto& x : v) x = rng.uniform() * 2.0 - 1.0;
            norm2 = 0;
            for (double x : v) norm2 += x * x;
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (auto& x : v) x *= inv;
        return v;
    }

    /// Lower-cased alphanumeric runs, minus a few structural stopwords.
    template <typename F>
    static void for_each_token(std::string_view text, F&& f) {
        static const std::unordered_set<std::string> stop{
            "a",    "an",   "the",  "of",   "to",   "and",  "or",   "in",       "on",         "for",
            "with", "is",   "be",   "by",   "it",   "as",   "at",   "this",     "that",       "from",
            "name", "description", "parameters", "tools", "required", "string", "integer", "number",
            "boolean", "object", "array", "any", "user", "assistant", "please"};
        std::string tok;
        auto flush = [&] {
            if (!tok.empty() && !stop.count(tok)) f(std::string_view(tok));
            tok.clear();
        };
        for (char c : text) {
            const unsigned char u = static_cast<unsigned char>(c);
            if (std::isalnum(u)) {
                tok += static_cast<char>(std::tolower(u));
            } else {
                flush();
            }
        }
        flush();
    }

  private:
    std::uint64_t seed_;
    std::size_t dim_;
};

struct GatewayConfig {
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{200};
    double backoff_multiplier = 2.0;
    /// 0 means unlimited. Counts chat calls that reach the backend.
    std::uint64_t max_chat_calls = 0;
    std::size_t max_in_flight = 4;
    std::size_t embed_batch_size = 64;
    bool cache_chat = true;
    bool cache_embeddings = true;
};

struct UsageStats {
    std::uint64_t chat_calls = 0;
    std::uint64_t chat_cache_hits = 0;
    std::uint64_t backend_attempts = 0;
    std::uint64_t retries = 0;
    std::uint64_t prompt_tokens = 0;
    std::uint64_t completion_tokens = 0;
    std::uint64_t embedded_texts = 0;
    std::uint64_t embedding_cache_hits = 0;
};

/// Single entry point for chat completions and embeddings. Thread-safe.
class Gateway {
  public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    Gateway(std::shared_ptr<ChatBackend> chat, std::shared_ptr<EmbeddingBackend> embedder, GatewayConfig cfg = {})
        : chat_(std::move(chat)),
          embedder_(std::move(embedder)),
          cfg_(cfg),
          slots_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(cfg.max_in_flight, 1, kMaxSlots))),
          sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {}

    void set_sleeper(Sleeper s) { sleeper_ = std::move(s); }
    const GatewayConfig& config() const noexcept { return cfg_; }
    bool has_chat() const noexcept { return chat_ != nullptr; }
    bool has_embedder() const noexcept { return embedder_ != nullptr; }
    std::string embedding_model() const { return embedder_ ? embedder_->model_id() : std::string(); }

    std::string chat(const ChatRequest& request) {
        request.validate();
        if (!chat_) throw Error(Errc::BackendUnavailable, "no chat backend configured");
        const std::uint64_t key = request.hash();
        if (cfg_.cache_chat) {
            std::lock_guard lock(mu_);
            if (auto it = chat_cache_.find(key); it != chat_cache_.end()) {
                ++usage_.chat_cache_hits;
                return it->second;
            }
        }
        {
            std::lock_guard lock(mu_);
            if (cfg_.max_chat_calls && usage_.chat_calls >= cfg_.max_chat_calls)
                throw Error(Errc::BudgetExceeded, "chat call budget of " + std::to_string(cfg_.max_chat_calls) + " exhausted");
            ++usage_.chat_calls;
        }
        SlotGuard guard(slots_);
        auto backoff = cfg_.initial_backoff;
        std::string last_error;
        bool transient = false;
        for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
            if (attempt > 0) {
                {
                    std::lock_guard lock(mu_);
                    ++usage_.retries;
                }
                sleeper_(backoff);
                backoff = std::chrono::milliseconds(static_cast<long long>(backoff.count() * cfg_.backoff_multiplier));
            }
            try {
                {
                    std::lock_guard lock(mu_);
                    ++usage_.backend_attempts;
                }
                ChatResponse resp = chat_->complete(request);
                std::lock_guard lock(mu_);
                usage_.prompt_tokens += resp.prompt_tokens;
                usage_.completion_tokens += resp.completion_tokens;
                if (cfg_.cache_chat) chat_cache_.emplace(key, resp.text);
                return std::move(resp.text);
            } catch (const TransientFault& e) {
                transient = true;
                last_error = e.what();
            } catch (const Error& e) {
                if (e.code() != Errc::BackendUnavailable) throw;
                transient = false;
                last_error = e.detail();
            }
        }
        if (transient) throw Error(Errc::RetriesExhausted, chat_->name() + ": " + last_error);
        throw Error(Errc::BackendUnavailable, chat_->name() + ": " + last_error);
    }

    /// One vector per input, in input order; all-or-error.
    std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts) {
        if (!embedder_) throw Error(Errc::BackendUnavailable, "no embedding backend configured");
        if (texts.empty()) throw Error(Errc::BadConfig, "embed_texts on an empty batch");
        const std::string model = embedder_->model_id();

        std::vector<std::optional<std::vector<double>>> found(texts.size());
        std::vector<std::size_t> missing;
        {
            std::lock_guard lock(mu_);
            for (std::size_t i = 0; i < texts.size(); ++i) {
                if (cfg_.cache_embeddings) {
                    if (auto it = embed_cache_.find(texts[i]); it != embed_cache_.end()) {
                        found[i] = it->second;
                        ++usage_.embedding_cache_hits;
                        continue;
                    }
                }
                missing.push_back(i);
            }
        }

        const std::size_t batch = std::max<std::size_t>(1, cfg_.embed_batch_size);
        std::vector<std::future<void>> jobs;
        std::vector<std::exception_ptr> failures((missing.size() + batch - 1) / batch);
        for (std::size_t b = 0; b * batch < missing.size(); ++b) {
            jobs.push_back(std::async(std::launch::async, [&, b] {
                try {
                    SlotGuard guard(slots_);
                    const std::size_t lo = b * batch;
                    const std::size_t hi = std::min(missing.size(), lo + batch);
                    std::vector<std::string> chunk;
                    for (std::size_t k = lo; k < hi; ++k) chunk.push_back(texts[missing[k]]);
                    auto vecs = embed_with_retry(chunk);
                    if (vecs.size() != chunk.size())
                        throw Error(Errc::BackendUnavailable, "embedding backend returned a partial batch");
                    for (std::size_t k = lo; k < hi; ++k) found[missing[k]] = std::move(vecs[k - lo]);
                } catch (...) {
                    failures[b] = std::current_exception();
                }
            }));
        }
        for (auto& j : jobs) j.get();
        for (auto& f : failures)
            if (f) std::rethrow_exception(f);

        std::lock_guard lock(mu_);
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (std::size_t i = 0; i < texts.size(); ++i) {
            auto& v = *found[i];
            for (double x : v)
                if (!std::isfinite(x)) throw Error(Errc::BackendUnavailable, "non-finite embedding value");
            auto [it, inserted] = dims_.try_emplace(model, v.size());
            if (v.empty() || it->second != v.size())
                throw Error(Errc::DimensionMismatch, model + ": expected d=" + std::to_string(it->second) + ", got " +
                                                          std::to_string(v.size()));
            if (cfg_.cache_embeddings) embed_cache_.try_emplace(texts[i], v);
            out.push_back({v, model});
        }
        usage_.embedded_texts += missing.size();
        return out;
    }

    EmbeddingVector embed_text(const std::string& text) { return std::move(embed_texts(std::span(&text, 1)).front()); }

    UsageStats usage() const {
        std::lock_guard lock(mu_);
        return usage_;
    }

  private:
    static constexpr std::size_t kMaxSlots = 256;
    using Semaphore = std::counting_semaphore<kMaxSlots>;

    struct SlotGuard {
        explicit SlotGuard(Semaphore& s) : sem(s) { sem.acquire(); }
        ~SlotGuard() { sem.release(); }
        Semaphore& sem;
    };

    std::vector<std::vector<double>> embed_with_retry(const std::vector<std::string>& chunk) {
        auto backoff = cfg_.initial_backoff;
        std::string last_error;
        bool transient = false;
        for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
            if (attempt > 0) {
                sleeper_(backoff);
                backoff = std::chrono::milliseconds(static_cast<long long>(backoff.count() * cfg_.backoff_multiplier));
            }
            try {
                return embedder_->embed(chunk);
            } catch (const TransientFault& e) {
                transient = true;
                last_error = e.what();
            } catch (const Error& e) {
                if (e.code() != Errc::BackendUnavailable) throw;
                transient = false;
                last_error = e.detail();
            }
        }
        throw Error(transient ? Errc::RetriesExhausted : Errc::BackendUnavailable, last_error);
    }

    std::shared_ptr<ChatBackend> chat_;
    std::shared_ptr<EmbeddingBackend> embedder_;
    GatewayConfig cfg_;
    Semaphore slots_;
    Sleeper sleeper_;

    mutable std::mutex mu_;
    UsageStats usage_;
    std::unordered_map<std::uint64_t, std::string> chat_cache_;
    std::unordered_map<std::string, std::vector<double>> embed_cache_;
    std::map<std::string, std::size_t> dims_;
};

}  // namespace hroute
