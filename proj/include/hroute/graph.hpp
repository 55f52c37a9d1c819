#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "hroute/candidate.hpp"
#include "hroute/error.hpp"
#include "hroute/gateway.hpp"
#include "hroute/json_util.hpp"

namespace hroute {

/// Cosine similarity, clamped to [-1, 1].
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty())
        throw Error(Errc::DimensionMismatch, std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) throw Error(Errc::ZeroVector, "cosine of a zero vector");
    const double s = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(s, -1.0, 1.0);
}

inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    return cosine_similarity(std::span<const double>(a.values), std::span<const double>(b.values));
}

struct GraphConfig {
    double tau = 0.82;
    std::string model_id;

    void validate() const {
        if (!(tau > 0.0 && tau < 1.0)) throw Error(Errc::BadConfig, "tau must lie in (0, 1)");
    }
};

enum class EdgeKind { Similarity, Mutation };

constexpr std::string_view to_string(EdgeKind k) noexcept { return k == EdgeKind::Similarity ? "similarity" : "mutation"; }

/// Undirected edge stored with a < b.
struct Edge {
    std::string a;
    std::string b;
    EdgeKind kind = EdgeKind::Similarity;
    std::optional<double> weight;  // similarity edges only

    auto key() const { return std::tie(a, b, kind); }
    bool operator<(const Edge& o) const { return key() < o.key(); }
    bool operator==(const Edge& o) const { return key() == o.key() && weight == o.weight; }

    static Edge make(std::string x, std::string y, EdgeKind kind, std::optional<double> weight = std::nullopt) {
        if (y < x) std::swap(x, y);
        return {std::move(x), std::move(y), kind, weight};
    }
};

struct GraphNode {
    CandidateSpec spec;
    EmbeddingVector embedding;
};

struct Neighbor {
    std::string name;
    EdgeKind kind;
};

/// Nodes are candidates; edges are thresholded-similarity or mutation links.
/// Value type: add_mutant returns the extended graph.
class CandidateGraph {
  public:
    CandidateGraph() = default;
    explicit CandidateGraph(GraphConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

    const GraphConfig& config() const noexcept { return cfg_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    bool empty() const noexcept { return nodes_.empty(); }
    const std::vector<GraphNode>& nodes() const noexcept { return nodes_; }
    const std::set<Edge>& edges() const noexcept { return edges_; }

    bool contains(std::string_view name) const { return index_.count(std::string(name)) > 0; }

    const GraphNode& node(std::string_view name) const {
        auto it = index_.find(std::string(name));
        if (it == index_.end()) throw Error(Errc::UnknownParent, std::string(name));
        return nodes_[it->second];
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& n : nodes_) out.push_back(n.spec.name());
        return out;
    }

    std::vector<std::string> names_of_kind(CandidateKind kind) const {
        std::vector<std::string> out;
        for (const auto& n : nodes_)
            if (n.spec.kind() == kind) out.push_back(n.spec.name());
        return out;
    }

    /// Deduplicated neighbors in insertion order of edges; when a pair has
    /// both edge kinds the mutation edge is reported.
    std::vector<Neighbor> neighbors(std::string_view name) const {
        auto it = adjacency_.find(std::string(name));
        if (it == adjacency_.end()) return {};
        std::vector<Neighbor> out;
        std::map<std::string, std::size_t> pos;
        for (const auto& nb : it->second) {
            auto [p, inserted] = pos.try_emplace(nb.name, out.size());
            if (inserted) {
                out.push_back(nb);
            } else if (nb.kind == EdgeKind::Mutation) {
                out[p->second].kind = EdgeKind::Mutation;
            }
        }
        return out;
    }

    bool has_edge(std::string_view x, std::string_view y, EdgeKind kind) const {
        return edges_.count(Edge::make(std::string(x), std::string(y), kind)) > 0;
    }

    std::size_t count_edges(EdgeKind kind) const {
        return static_cast<std::size_t>(
            std::count_if(edges_.begin(), edges_.end(), [&](const Edge& e) { return e.kind == kind; }));
    }

    std::size_t mutation_degree(std::string_view name) const {
        std::size_t d = 0;
        if (auto it = adjacency_.find(std::string(name)); it != adjacency_.end())
            for (const auto& nb : it->second) d += nb.kind == EdgeKind::Mutation;
        return d;
    }

    /// Mutation edges to nodes inserted earlier: 0 for seeds, 1 for every
    /// mutant regardless of how many children it later acquires.
    std::size_t parent_degree(std::string_view name) const {
        auto self = index_.find(std::string(name));
        if (self == index_.end()) return 0;
        std::size_t d = 0;
        if (auto it = adjacency_.find(std::string(name)); it != adjacency_.end())
            for (const auto& nb : it->second)
                if (nb.kind == EdgeKind::Mutation && index_.at(nb.name) < self->second) ++d;
        return d;
    }

    /// All node specs as a bank (one kind only).
    CandidateBank to_bank() const {
        CandidateBank bank(nodes_.empty() ? CandidateKind::Tool : nodes_.front().spec.kind());
        for (const auto& n : nodes_) bank.insert(n.spec);
        return bank;
    }

    void insert_node(CandidateSpec spec, EmbeddingVector embedding) {
        if (contains(spec.name())) throw Error(Errc::DuplicateName, spec.name());
        if (!nodes_.empty() && nodes_.front().embedding.dim() != embedding.dim())
            throw Error(Errc::DimensionMismatch, spec.name());
        index_.emplace(spec.name(), nodes_.size());
        adjacency_[spec.name()];
        nodes_.push_back({std::move(spec), std::move(embedding)});
    }

    void insert_edge(Edge e) {
        if (e.a == e.b) throw Error(Errc::BadConfig, "self-edge on " + e.a);
        if (!contains(e.a) || !contains(e.b)) throw Error(Errc::UnknownParent, e.a + " / " + e.b);
        if (e.kind == EdgeKind::Mutation) e.weight.reset();
        auto [it, inserted] = edges_.insert(e);
        if (!inserted) return;
        adjacency_[e.a].push_back({e.b, e.kind});
        adjacency_[e.b].push_back({e.a, e.kind});
    }

    bool operator==(const CandidateGraph& o) const {
        if (cfg_.tau != o.cfg_.tau || nodes_.size() != o.nodes_.size() || edges_ != o.edges_) return false;
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (!(nodes_[i].spec == o.nodes_[i].spec) || !(nodes_[i].embedding == o.nodes_[i].embedding)) return false;
        return true;
    }

  private:
    GraphConfig cfg_;
    std::vector<GraphNode> nodes_;
    std::unordered_map<std::string, std::size_t> index_;
    std::set<Edge> edges_;
    std::unordered_map<std::string, std::vector<Neighbor>> adjacency_;
};

/// Builds the graph from precomputed embeddings (one per bank entry, same
/// order). Similarity edge iff cosine > tau, strictly.
inline CandidateGraph assemble_graph(const CandidateBank& bank, std::vector<EmbeddingVector> embeddings,
                                     const GraphConfig& cfg) {
    cfg.validate();
    if (bank.empty()) throw Error(Errc::EmptyBank, "cannot build a graph from an empty bank");
    if (embeddings.size() != bank.size()) throw Error(Errc::DimensionMismatch, "one embedding per candidate required");
    CandidateGraph g(cfg);
    const auto& entries = bank.entries();
    for (std::size_t i = 0; i < entries.size(); ++i) g.insert_node(entries[i], std::move(embeddings[i]));
    const auto& nodes = g.nodes();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (std::size_t j = i + 1; j < nodes.size(); ++j) {
            const double s = cosine_similarity(nodes[i].embedding, nodes[j].embedding);
            if (s > cfg.tau) g.insert_edge(Edge::make(nodes[i].spec.name(), nodes[j].spec.name(), EdgeKind::Similarity, s));
        }
    }
    return g;
}

/// Embeds serialize_phi of every candidate through the gateway, then
/// thresholds pairwise similarity.
inline CandidateGraph build_graph(const CandidateBank& bank, GraphConfig cfg, Gateway& gateway) {
    cfg.validate();
    if (bank.empty()) throw Error(Errc::EmptyBank, "cannot build a graph from an empty bank");
    std::vector<std::string> texts;
    texts.reserve(bank.size());
    for (const auto& e : bank.entries()) texts.push_back(serialize_phi(e));
    auto embeddings = gateway.embed_texts(texts);
    if (cfg.model_id.empty()) cfg.model_id = gateway.embedding_model();
    return assemble_graph(bank, std::move(embeddings), cfg);
}

/// Inserts a mutant node with exactly one mutation edge to its parent and
/// similarity edges to every existing node under the graph's tau. Existing
/// edges are untouched. Leaves `graph` unchanged when it throws.
inline void insert_mutant(CandidateGraph& graph, const std::string& parent, CandidateSpec mutant, EmbeddingVector embedding) {
    if (!graph.contains(parent)) throw Error(Errc::UnknownParent, parent);
    if (graph.contains(mutant.name())) throw Error(Errc::DuplicateName, mutant.name());
    const std::string name = mutant.name();
    std::vector<std::pair<std::string, double>> similar;
    for (const auto& n : graph.nodes()) {
        const double s = cosine_similarity(n.embedding, embedding);
        if (s > graph.config().tau) similar.emplace_back(n.spec.name(), s);
    }
    graph.insert_node(std::move(mutant), std::move(embedding));
    graph.insert_edge(Edge::make(parent, name, EdgeKind::Mutation));
    for (auto& [other, s] : similar) graph.insert_edge(Edge::make(other, name, EdgeKind::Similarity, s));
}

inline CandidateGraph add_mutant(CandidateGraph graph, const std::string& parent, CandidateSpec mutant,
                                 EmbeddingVector embedding) {
    insert_mutant(graph, parent, std::move(mutant), std::move(embedding));
    return graph;
}

/// Line-oriented snapshot: a header line, one line per node (name +
/// embedding), one line per edge. Specs are resolved by name from a bank.
inline std::string render_graph(const CandidateGraph& g) {
    std::string out;
    out += dump_line(Json{{"format", "candidate-graph"},
                          {"version", 1},
                          {"tau", g.config().tau},
                          {"model_id", g.config().model_id},
                          {"nodes", g.size()},
                          {"edges", g.edges().size()}});
    out += '\n';
    for (const auto& n : g.nodes()) {
        out += dump_line(Json{{"node", n.spec.name()}, {"model_id", n.embedding.model_id}, {"embedding", n.embedding.values}});
        out += '\n';
    }
    for (const auto& e : g.edges()) {
        Json j{{"edge", Json::array({e.a, e.b})}, {"kind", std::string(to_string(e.kind))}};
        if (e.weight) j["weight"] = *e.weight;
        out += dump_line(j);
        out += '\n';
    }
    return out;
}

inline void save_graph(const CandidateGraph& g, const std::string& path) { write_text_file(path, render_graph(g)); }

inline CandidateGraph parse_graph(std::string_view text, const CandidateCatalog& specs, const std::string& origin) {
    auto records = parse_records(text, origin);
    if (records.empty()) throw Error(Errc::ParseError, origin + ":1: empty graph snapshot");
    const Json& head = records.front().value;
    if (!head.is_object() || head.value("format", std::string()) != "candidate-graph")
        throw Error(Errc::ParseError, origin + ":1: not a candidate-graph snapshot");
    GraphConfig cfg{head.value("tau", 0.82), head.value("model_id", std::string())};
    CandidateGraph g(cfg);
    for (std::size_t i = 1; i < records.size(); ++i) {
        const auto& [line, rec] = records[i];
        const std::string where = origin + ":" + std::to_string(line);
        try {
            if (rec.contains("node")) {
                const std::string name = rec.at("node").get<std::string>();
                const auto* spec = specs.find(name);
                if (!spec) throw Error(Errc::UnresolvedPoolMember, name);
                g.insert_node(*spec, {rec.at("embedding").get<std::vector<double>>(), rec.value("model_id", cfg.model_id)});
            } else if (rec.contains("edge")) {
                const auto& ends = rec.at("edge");
                const std::string kind = rec.at("kind").get<std::string>();
                if (kind != "similarity" && kind != "mutation") throw Error(Errc::ParseError, "edge kind " + kind);
                const EdgeKind k = kind == "similarity" ? EdgeKind::Similarity : EdgeKind::Mutation;
                std::optional<double> w;
                if (rec.contains("weight")) w = rec.at("weight").get<double>();
                g.insert_edge(Edge::make(ends.at(0).get<std::string>(), ends.at(1).get<std::string>(), k, w));
            } else {
                throw Error(Errc::ParseError, "unrecognized record");
            }
        } catch (const Error& e) {
            throw Error(Errc::ParseError, where + ": " + e.what(), e.code());
        } catch (const Json::exception& e) {
            throw Error(Errc::ParseError, where + ": " + e.what());
        }
    }
    return g;
}

inline CandidateGraph load_graph(const std::string& path, const CandidateCatalog& specs) {
    return parse_graph(read_text_file(path), specs, path);
}

}  // namespace hroute
