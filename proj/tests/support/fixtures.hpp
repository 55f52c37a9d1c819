#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "hroute.hpp"

namespace fixtures {

using namespace hroute;

inline Json tool_doc(const std::string& name, const std::string& description, Json properties = Json::object(),
                     Json required = Json::array(), std::vector<std::string> tags = {"General"}) {
    return Json{{"name", name},
                {"description", description},
                {"inputSchema", {{"type", "object"}, {"properties", properties}, {"required", required}}},
                {"tags", tags}};
}

inline CandidateSpec make_tool(const std::string& name, const std::string& description, Json properties = Json::object(),
                               Json required = Json::array(), std::vector<std::string> tags = {"General"}) {
    return validate_spec(tool_doc(name, description, std::move(properties), std::move(required), std::move(tags)),
                         CandidateKind::Tool);
}

inline CandidateSpec make_agent(const std::string& name, const std::string& description, std::vector<std::string> tools,
                                Json properties = Json::object(), std::vector<std::string> tags = {"general agent"}) {
    Json doc{{"name", name},
             {"description", description},
             {"tools", tools},
             {"inputSchema", {{"type", "object"}, {"properties", properties}, {"required", Json::array()}}},
             {"tags", tags}};
    return validate_spec(doc, CandidateKind::Agent, ValidationMode::Lenient);
}

/// n tools drawn from a handful of topic vocabularies, so that some pairs
/// embed close together and most do not.
inline CandidateBank synthetic_bank(std::size_t n, std::uint64_t seed) {
    static const std::vector<std::vector<std::string>> topics = {
        {"weather", "forecast", "temperature", "rain", "wind", "humidity", "climate", "storm"},
        {"stock", "price", "ticker", "market", "trading", "equity", "dividend", "quote"},
        {"file", "read", "write", "directory", "path", "disk", "folder", "copy"},
        {"email", "send", "inbox", "message", "recipient", "subject", "reply", "draft"},
        {"image", "resize", "crop", "pixel", "photo", "filter", "thumbnail", "color"},
        {"translate", "language", "text", "grammar", "dictionary", "phrase", "locale", "spelling"},
        {"calendar", "event", "meeting", "schedule", "invite", "agenda", "reminder", "slot"},
        {"database", "query", "table", "row", "index", "schema", "column", "join"},
    };
    static const std::vector<std::string> filler = {"quickly", "reliable", "simple", "advanced", "batch", "secure", "local", "remote"};
    Rng rng(seed);
    CandidateBank bank(CandidateKind::Tool);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& topic = topics[rng.below(topics.size())];
        std::vector<std::string> words = topic;
        rng.shuffle(words);
        std::string desc;
        const std::size_t take = 4 + rng.below(4);
        for (std::size_t w = 0; w < take; ++w) desc += words[w] + " ";
        desc += filler[rng.below(filler.size())];
        char name[32];
        std::snprintf(name, sizeof name, "cand_%03zu", i);
        bank.insert(make_tool(name, desc, Json{{words[0], {{"type", "string"}}}}, Json::array({words[0]})));
    }
    return bank;
}

/// Embeds "name: X\n..." texts to vectors planted per candidate name; any
/// other text gets a fixed vector.
class PlantedEmbedder final : public EmbeddingBackend {
  public:
    explicit PlantedEmbedder(std::map<std::string, std::vector<double>> by_name, std::size_t dim)
        : by_name_(std::move(by_name)), dim_(dim) {}

    std::vector<std::vector<double>> embed(std::span<const std::string> texts) override {
        std::vector<std::vector<double>> out;
        for (const auto& t : texts) {
            std::string name;
            if (t.rfind("name: ", 0) == 0) name = t.substr(6, t.find('\n') - 6);
            auto it = by_name_.find(name);
            if (it != by_name_.end()) {
                out.push_back(it->second);
            } else {
                std::vector<double> v(dim_, 0.0);
                v.back() = 1.0;
                out.push_back(v);
            }
        }
        return out;
    }
    std::string model_id() const override { return "planted"; }

  private:
    std::map<std::string, std::vector<double>> by_name_;
    std::size_t dim_;
};

inline std::shared_ptr<Gateway> planted_gateway(std::map<std::string, std::vector<double>> vectors, std::size_t dim) {
    auto gw = std::make_shared<Gateway>(nullptr, std::make_shared<PlantedEmbedder>(std::move(vectors), dim));
    gw->set_sleeper([](std::chrono::milliseconds) {});
    return gw;
}

/// Plain O(N^2) recomputation of the thresholded similarity edge set from
/// raw vectors, independent of the library's cosine routine.
inline std::set<std::pair<std::string, std::string>> brute_force_edges(const std::vector<std::string>& names,
                                                                        const std::vector<std::vector<double>>& vecs,
                                                                        double tau) {
    std::set<std::pair<std::string, std::string>> edges;
    for (std::size_t i = 0; i < names.size(); ++i) {
        for (std::size_t j = i + 1; j < names.size(); ++j) {
            long double dot = 0, a = 0, b = 0;
            for (std::size_t k = 0; k < vecs[i].size(); ++k) {
                dot += static_cast<long double>(vecs[i][k]) * vecs[j][k];
                a += static_cast<long double>(vecs[i][k]) * vecs[i][k];
                b += static_cast<long double>(vecs[j][k]) * vecs[j][k];
            }
            const long double cos = dot / std::sqrt(a * b);
            if (cos > tau) edges.emplace(std::min(names[i], names[j]), std::max(names[i], names[j]));
        }
    }
    return edges;
}

inline std::set<std::pair<std::string, std::string>> similarity_edges(const CandidateGraph& g) {
    std::set<std::pair<std::string, std::string>> out;
    for (const auto& e : g.edges())
        if (e.kind == EdgeKind::Similarity) out.emplace(e.a, e.b);
    return out;
}

inline CandidateCall call(const std::string& name, Json args = Json::object()) { return {name, std::move(args), "done"}; }

/// Trajectory over named candidates built from a compact script: each
/// element is either a user line ("U:text"), a tool-result line ("R:text")
/// or an action ("A:text|name1,name2").
inline Trajectory scripted_trajectory(const std::string& id, const std::vector<std::string>& script,
                                      const std::vector<std::string>& subset) {
    Trajectory t;
    t.id = id;
    t.subset.members = subset;
    for (const auto& line : script) {
        const std::string body = line.substr(2);
        if (line[0] == 'U') {
            t.turns.push_back(Observation::user(body));
        } else if (line[0] == 'R') {
            t.turns.push_back(Observation::tool({body}));
        } else {
            Action a;
            const auto bar = body.find('|');
            a.content = body.substr(0, bar);
            if (bar != std::string::npos) {
                std::string names = body.substr(bar + 1);
                std::size_t pos = 0;
                while (pos <= names.size()) {
                    auto comma = names.find(',', pos);
                    if (comma == std::string::npos) comma = names.size();
                    if (comma > pos) a.calls.push_back(call(names.substr(pos, comma - pos)));
                    pos = comma + 1;
                }
            }
            t.turns.push_back(std::move(a));
        }
    }
    return t;
}

/// Pool over a fresh catalog of trivially-described tools.
inline CandidatePool name_pool(const std::vector<std::string>& names) {
    auto catalog = std::make_shared<CandidateCatalog>();
    for (const auto& n : names) catalog->add(make_tool(n, "Tool " + n + " description"));
    return CandidatePool::make(catalog, names);
}

}  // namespace fixtures
