#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <thread>

#include "fixtures.hpp"

using namespace hroute;

namespace {

ChatRequest simple_request(const std::string& text, std::optional<std::uint64_t> seed = 1) {
    ChatRequest r;
    r.messages = {{Role::User, text}};
    r.seed = seed;
    return r;
}

class FlakyChat final : public ChatBackend {
  public:
    explicit FlakyChat(int transient, bool unavailable = false) : transient_(transient), unavailable_(unavailable) {}
    ChatResponse complete(const ChatRequest&) override {
        ++attempts;
        if (unavailable_) throw Error(Errc::BackendUnavailable, "malformed payload");
        if (transient_-- > 0) throw TransientFault("429");
        return {"fine", 1, 1};
    }
    std::string name() const override { return "flaky"; }
    std::atomic<int> attempts{0};

  private:
    int transient_;
    bool unavailable_;
};

class RaggedEmbedder final : public EmbeddingBackend {
  public:
    std::vector<std::vector<double>> embed(std::span<const std::string> texts) override {
        std::vector<std::vector<double>> out;
        for (const auto& t : texts) out.push_back(std::vector<double>(t.size() % 2 ? 3 : 4, 1.0));
        return out;
    }
    std::string model_id() const override { return "ragged"; }
};

class ConcurrencyProbe final : public ChatBackend {
  public:
    ChatResponse complete(const ChatRequest&) override {
        const int now = ++in_flight;
        int prev = peak.load();
        while (now > prev && !peak.compare_exchange_weak(prev, now)) {}
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
        --in_flight;
        return {"ok", 1, 1};
    }
    std::string name() const override { return "probe"; }
    std::atomic<int> in_flight{0};
    std::atomic<int> peak{0};
};

}  // namespace

TEST(Chat, MockIsDeterministicPerSeed) {
    auto a = make_mock_gateway(9);
    auto b = make_mock_gateway(9);
    GatewayConfig nocache;
    nocache.cache_chat = false;
    auto c = make_mock_gateway(9, nocache);
    const auto req = simple_request("# Role: Tool Simulator\n<call>{\"name\":\"x\",\"arguments\":{},\"simulate_failure\":false}</call>");
    EXPECT_EQ(a->chat(req), b->chat(req));
    EXPECT_EQ(c->chat(req), c->chat(req));
}

TEST(Chat, RequestSeedChangesMockOutput) {
    auto gw = make_mock_gateway(9);
    const std::string prompt = "# Role: Tool Simulator\n<call>{\"name\":\"x\",\"arguments\":{},\"simulate_failure\":false}</call>";
    std::set<std::string> outs;
    for (std::uint64_t s = 0; s < 8; ++s) outs.insert(gw->chat(simple_request(prompt, s)));
    EXPECT_GT(outs.size(), 1u);
}

TEST(Chat, BudgetExceeded) {
    GatewayConfig cfg;
    cfg.max_chat_calls = 2;
    auto gw = make_mock_gateway(1, cfg);
    gw->chat(simple_request("one"));
    gw->chat(simple_request("two"));
    gw->chat(simple_request("one"));  // cache hit, not billed
    try {
        gw->chat(simple_request("three"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::BudgetExceeded);
    }
    EXPECT_EQ(gw->usage().chat_cache_hits, 1u);
}

TEST(Chat, TransientFaultsAreRetriedWithBackoff) {
    auto backend = std::make_shared<FlakyChat>(2);
    GatewayConfig cfg;
    cfg.max_retries = 3;
    cfg.initial_backoff = std::chrono::milliseconds(100);
    Gateway gw(backend, nullptr, cfg);
    std::vector<long long> sleeps;
    gw.set_sleeper([&](std::chrono::milliseconds d) { sleeps.push_back(d.count()); });
    EXPECT_EQ(gw.chat(simple_request("x")), "fine");
    EXPECT_EQ(backend->attempts, 3);
    EXPECT_EQ(sleeps, (std::vector<long long>{100, 200}));
    EXPECT_EQ(gw.usage().retries, 2u);
}

TEST(Chat, RetriesExhausted) {
    auto backend = std::make_shared<FlakyChat>(100);
    GatewayConfig cfg;
    cfg.max_retries = 2;
    Gateway gw(backend, nullptr, cfg);
    gw.set_sleeper([](auto) {});
    try {
        gw.chat(simple_request("x"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::RetriesExhausted);
    }
    EXPECT_EQ(backend->attempts, 3);
}

TEST(Chat, MalformedPayloadIsBackendUnavailableAfterRetries) {
    auto backend = std::make_shared<FlakyChat>(0, true);
    GatewayConfig cfg;
    cfg.max_retries = 2;
    Gateway gw(backend, nullptr, cfg);
    gw.set_sleeper([](auto) {});
    try {
        gw.chat(simple_request("x"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::BackendUnavailable);
    }
    EXPECT_EQ(backend->attempts, 3);
}

TEST(Chat, RequestValidation) {
    auto gw = make_mock_gateway(1);
    ChatRequest empty;
    EXPECT_THROW(gw->chat(empty), Error);
    ChatRequest assistant_first;
    assistant_first.messages = {{Role::Assistant, "hi"}};
    EXPECT_THROW(gw->chat(assistant_first), Error);
}

TEST(Chat, InFlightLimitIsRespected) {
    auto probe = std::make_shared<ConcurrencyProbe>();
    GatewayConfig cfg;
    cfg.max_in_flight = 3;
    cfg.cache_chat = false;
    Gateway gw(probe, nullptr, cfg);
    std::vector<std::thread> threads;
    for (int i = 0; i < 12; ++i) threads.emplace_back([&, i] { gw.chat(simple_request("r" + std::to_string(i))); });
    for (auto& t : threads) t.join();
    EXPECT_LE(probe->peak.load(), 3);
    EXPECT_GE(probe->peak.load(), 1);
}

TEST(Embed, IdenticalTextsIdenticalVectors) {
    auto gw = make_mock_gateway(4);
    std::vector<std::string> texts{"weather in paris", "stock price", "weather in paris"};
    auto v = gw->embed_texts(texts);
    ASSERT_EQ(v.size(), 3u);
    EXPECT_EQ(v[0].values, v[2].values);
    EXPECT_NE(v[0].values, v[1].values);
    EXPECT_EQ(v[0].dim(), 64u);
}

TEST(Embed, MockVectorsHaveUnitNorm) {
    MockEmbeddingBackend m(3);
    for (const std::string t : {"a b c", "", "the of and", "x", "long text with many many words in it"}) {
        double n = 0;
        for (double x : m.embed_one(t)) n += x * x;
        EXPECT_NEAR(std::sqrt(n), 1.0, 1e-9) << t;
    }
}

TEST(Embed, OrderPreservedAcrossBatches) {
    GatewayConfig cfg;
    cfg.embed_batch_size = 2;
    auto gw = make_mock_gateway(4, cfg);
    MockEmbeddingBackend ref(4);
    std::vector<std::string> texts{"alpha", "beta", "gamma", "delta", "epsilon"};
    auto v = gw->embed_texts(texts);
    for (std::size_t i = 0; i < texts.size(); ++i) EXPECT_EQ(v[i].values, ref.embed_one(texts[i]));
}

TEST(Embed, InconsistentDimensionIsAnError) {
    Gateway gw(nullptr, std::make_shared<RaggedEmbedder>());
    std::vector<std::string> texts{"ab", "abc"};
    try {
        gw.embed_texts(texts);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::DimensionMismatch);
    }
}

TEST(Embed, CacheAvoidsRecomputation) {
    auto gw = make_mock_gateway(4);
    std::vector<std::string> texts{"one", "two"};
    gw->embed_texts(texts);
    gw->embed_texts(texts);
    EXPECT_EQ(gw->usage().embedded_texts, 2u);
    EXPECT_EQ(gw->usage().embedding_cache_hits, 2u);
}

TEST(Embed, EmptyBatchAndMissingBackend) {
    auto gw = make_mock_gateway(4);
    std::vector<std::string> none;
    EXPECT_THROW(gw->embed_texts(none), Error);
    Gateway bare(nullptr, nullptr);
    std::vector<std::string> one{"x"};
    try {
        bare.embed_texts(one);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::BackendUnavailable);
    }
}
