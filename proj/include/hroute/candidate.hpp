#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "hroute/error.hpp"
#include "hroute/json_util.hpp"
#include "hroute/operators.hpp"

namespace hroute {

struct Provenance {
    enum class Origin { Seed, Mutant };
    Origin origin = Origin::Seed;
    std::optional<std::string> parent_name;
    std::optional<MutationOperator> op;

    static Provenance mutant(std::string parent, MutationOperator m) {
        return {Origin::Mutant, std::move(parent), m};
    }
    bool is_mutant() const noexcept { return origin == Origin::Mutant; }
    bool operator==(const Provenance&) const = default;
};

struct ToolSpec {
    std::string name;
    std::string description;
    Json input_schema;
    std::vector<std::string> tags;
    std::optional<Json> results;
    Provenance provenance;

    bool operator==(const ToolSpec&) const = default;
};

struct AgentSpec {
    std::string name;
    std::string description;
    std::vector<std::string> tools;
    Json input_schema;
    std::vector<std::string> tags;
    Provenance provenance;

    bool operator==(const AgentSpec&) const = default;
};

/// A routable unit: exactly one of ToolSpec or AgentSpec.
class CandidateSpec {
  public:
    CandidateSpec(ToolSpec t) : v_(std::move(t)) {}
    CandidateSpec(AgentSpec a) : v_(std::move(a)) {}

    CandidateKind kind() const noexcept {
        return std::holds_alternative<ToolSpec>(v_) ? CandidateKind::Tool : CandidateKind::Agent;
    }
    bool is_tool() const noexcept { return kind() == CandidateKind::Tool; }
    bool is_agent() const noexcept { return kind() == CandidateKind::Agent; }

    const ToolSpec& tool() const { return std::get<ToolSpec>(v_); }
    const AgentSpec& agent() const { return std::get<AgentSpec>(v_); }

    const std::string& name() const noexcept {
        return std::visit([](const auto& s) -> const std::string& { return s.name; }, v_);
    }
    const std::string& description() const noexcept {
        return std::visit([](const auto& s) -> const std::string& { return s.description; }, v_);
    }
    const Json& input_schema() const noexcept {
        return std::visit([](const auto& s) -> const Json& { return s.input_schema; }, v_);
    }
    const std::vector<std::string>& tags() const noexcept {
        return std::visit([](const auto& s) -> const std::vector<std::string>& { return s.tags; }, v_);
    }
    const Provenance& provenance() const noexcept {
        return std::visit([](const auto& s) -> const Provenance& { return s.provenance; }, v_);
    }
    void set_provenance(Provenance p) {
        std::visit([&](auto& s) { s.provenance = std::move(p); }, v_);
    }

    bool operator==(const CandidateSpec&) const = default;

  private:
    std::variant<ToolSpec, AgentSpec> v_;
};

/// Strict enforces every rule the mutation prompts demand (agent tags and
/// per-property descriptions). Lenient accepts hand-collected agent specs
/// that omit them.
enum class ValidationMode { Strict, Lenient };

namespace detail {

inline bool is_identifier(std::string_view s) noexcept {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
               c == '.';
    });
}

inline const Json& require_field(const Json& doc, const char* field) {
    auto it = doc.find(field);
    if (it == doc.end() || it->is_null()) throw Error(Errc::MissingField, field);
    return *it;
}

inline std::string require_string(const Json& doc, const char* field) {
    const Json& v = require_field(doc, field);
    if (!v.is_string()) throw Error(Errc::SchemaMalformed, field);
    return v.get<std::string>();
}

inline std::vector<std::string> string_list(const Json& v, const std::string& path) {
    if (!v.is_array()) throw Error(Errc::SchemaMalformed, path);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_string()) throw Error(Errc::SchemaMalformed, path + "[" + std::to_string(i) + "]");
        out.push_back(v[i].get<std::string>());
    }
    return out;
}

inline bool valid_type_field(const Json& t) {
    if (t.is_string()) return true;
    if (!t.is_array() || t.empty()) return false;
    return std::all_of(t.begin(), t.end(), [](const Json& x) { return x.is_string(); });
}

/// Checks an object-typed schema; recurses into nested object properties.
inline void check_object_schema(const Json& schema, const std::string& path, bool need_descriptions) {
    if (!schema.is_object()) throw Error(Errc::SchemaMalformed, path);
    auto type = schema.find("type");
    if (type == schema.end() || !type->is_string() || *type != "object") throw Error(Errc::SchemaMalformed, path + ".type");
    auto props = schema.find("properties");
    if (props != schema.end() && !props->is_object()) throw Error(Errc::SchemaMalformed, path + ".properties");
    if (props != schema.end()) {
        for (const auto& [key, prop] : props->items()) {
            const std::string ppath = path + ".properties." + key;
            if (key.empty() || !prop.is_object()) throw Error(Errc::SchemaMalformed, ppath);
            if (auto t = prop.find("type"); t != prop.end() && !valid_type_field(*t))
                throw Error(Errc::SchemaMalformed, ppath + ".type");
            if (auto d = prop.find("description"); d != prop.end() && !d->is_string())
                throw Error(Errc::SchemaMalformed, ppath + ".description");
            if (need_descriptions) {
                auto d = prop.find("description");
                if (d == prop.end() || d->get<std::string>().empty())
                    throw Error(Errc::SchemaMalformed, ppath + ".description");
            }
            if (auto t = prop.find("type"); t != prop.end() && t->is_string() && *t == "object" && prop.contains("properties"))
                check_object_schema(prop, ppath, false);
        }
    }
    if (auto req = schema.find("required"); req != schema.end()) {
        if (!req->is_array()) throw Error(Errc::SchemaMalformed, path + ".required");
        for (std::size_t i = 0; i < req->size(); ++i) {
            const Json& r = (*req)[i];
            const std::string rpath = path + ".required[" + std::to_string(i) + "]";
            if (!r.is_string()) throw Error(Errc::SchemaMalformed, rpath);
            if (props == schema.end() || !props->contains(r.get<std::string>())) throw Error(Errc::SchemaMalformed, rpath);
        }
    }
}

inline Provenance parse_provenance(const Json& doc) {
    auto it = doc.find("provenance");
    if (it == doc.end() || it->is_null()) return {};
    const Json& p = *it;
    if (!p.is_object()) throw Error(Errc::SchemaMalformed, "provenance");
    const std::string origin = p.value("origin", std::string("seed"));
    if (origin == "seed") {
        if (p.contains("parent") || p.contains("operator")) throw Error(Errc::SchemaMalformed, "provenance");
        return {};
    }
    if (origin != "mutant") throw Error(Errc::SchemaMalformed, "provenance.origin");
    auto parent = p.find("parent");
    auto op = p.find("operator");
    if (parent == p.end() || !parent->is_string() || parent->get<std::string>().empty())
        throw Error(Errc::SchemaMalformed, "provenance.parent");
    if (op == p.end() || !op->is_string()) throw Error(Errc::SchemaMalformed, "provenance.operator");
    auto m = parse_operator(op->get<std::string>());
    if (!m) throw Error(Errc::SchemaMalformed, "provenance.operator");
    return Provenance::mutant(parent->get<std::string>(), *m);
}

}  // namespace detail

/// Validates an exchange-format document and returns the normalized spec.
/// Absent tags become an empty list; absent inputSchema is MissingField.
inline CandidateSpec validate_spec(const Json& doc, CandidateKind kind, ValidationMode mode = ValidationMode::Strict) {
    if (!doc.is_object()) throw Error(Errc::SchemaMalformed, "$");
    std::string name = detail::require_string(doc, "name");
    if (name.empty()) throw Error(Errc::MissingField, "name");
    if (!detail::is_identifier(name)) throw Error(Errc::SchemaMalformed, "name");
    std::string description = detail::require_string(doc, "description");
    const Json& schema = detail::require_field(doc, "inputSchema");

    std::vector<std::string> tags;
    if (auto t = doc.find("tags"); t != doc.end() && !t->is_null()) tags = detail::string_list(*t, "tags");

    Provenance prov = detail::parse_provenance(doc);
    if (prov.is_mutant() && (*prov.parent_name == name)) throw Error(Errc::NameEqualsParent, name);
    if (prov.is_mutant() && operator_info(*prov.op).family != kind) throw Error(Errc::FamilyMismatch, "provenance.operator");

    if (kind == CandidateKind::Tool) {
        detail::check_object_schema(schema, "inputSchema", false);
        ToolSpec t{std::move(name), std::move(description), schema, std::move(tags), std::nullopt, std::move(prov)};
        if (auto r = doc.find("results"); r != doc.end() && !r->is_null()) t.results = *r;
        return t;
    }

    const std::string_view suffix = "_agent";
    if (name.size() < suffix.size() || std::string_view(name).substr(name.size() - suffix.size()) != suffix)
        throw Error(Errc::BadAgentName, name);
    std::vector<std::string> tools = detail::string_list(detail::require_field(doc, "tools"), "tools");
    if (tools.empty() || tools.size() > 16) throw Error(Errc::SchemaMalformed, "tools");
    {
        std::set<std::string> seen;
        for (const auto& tool : tools) {
            if (tool.empty()) throw Error(Errc::SchemaMalformed, "tools");
            if (!seen.insert(tool).second) throw Error(Errc::DuplicateToolEntry, tool);
        }
    }
    const bool strict = mode == ValidationMode::Strict;
    detail::check_object_schema(schema, "inputSchema", strict);
    if (strict && tags.empty()) throw Error(Errc::MissingField, "tags");
    return AgentSpec{std::move(name), std::move(description), std::move(tools), schema, std::move(tags), std::move(prov)};
}

/// Exchange-format rendering. Seeds carry exactly name/description/
/// (tools)/inputSchema/tags; mutants add a provenance object.
inline Json to_json(const CandidateSpec& spec) {
    Json j = Json::object();
    j["name"] = spec.name();
    j["description"] = spec.description();
    if (spec.is_agent()) j["tools"] = spec.agent().tools;
    j["inputSchema"] = spec.input_schema();
    j["tags"] = spec.tags();
    if (spec.is_tool() && spec.tool().results) j["results"] = *spec.tool().results;
    const auto& p = spec.provenance();
    if (p.is_mutant()) {
        j["provenance"] = Json{{"origin", "mutant"}, {"parent", *p.parent_name}, {"operator", std::string(to_string(*p.op))}};
    }
    return j;
}

namespace detail {

inline std::string type_label(const Json& prop) {
    auto t = prop.find("type");
    if (t == prop.end()) return "any";
    if (t->is_string()) return t->get<std::string>();
    std::string out;
    for (const auto& x : *t) {
        if (!out.empty()) out += "|";
        out += x.get<std::string>();
    }
    return out;
}

inline void flatten_schema(const Json& schema, const std::string& prefix, std::vector<std::string>& lines) {
    auto props = schema.find("properties");
    if (props == schema.end() || !props->is_object()) return;
    std::set<std::string> required;
    if (auto r = schema.find("required"); r != schema.end() && r->is_array())
        for (const auto& x : *r)
            if (x.is_string()) required.insert(x.get<std::string>());
    std::vector<std::string> keys;
    for (const auto& [key, _] : props->items()) keys.push_back(key);
    std::sort(keys.begin(), keys.end());
    for (const auto& key : keys) {
        const Json& prop = (*props)[key];
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        std::string line = "  - " + path + " (" + type_label(prop);
        if (required.count(key)) line += ", required";
        line += ")";
        if (auto d = prop.find("description"); d != prop.end() && d->is_string() && !d->get<std::string>().empty())
            line += ": " + d->get<std::string>();
        if (auto e = prop.find("enum"); e != prop.end()) line += " [enum " + dump_line(*e) + "]";
        if (auto d = prop.find("default"); d != prop.end()) line += " [default " + dump_line(*d) + "]";
        lines.push_back(std::move(line));
        if (prop.is_object() && prop.contains("properties")) flatten_schema(prop, path, lines);
    }
}

}  // namespace detail

/// Canonical text used as embedding input: name, description, schema
/// fields flattened in lexicographic order, and for agents the tool list.
/// Sections with no content are omitted.
inline std::string serialize_phi(const CandidateSpec& spec) {
    std::string out = "name: " + spec.name() + "\ndescription: " + spec.description() + "\n";
    std::vector<std::string> lines;
    detail::flatten_schema(spec.input_schema(), "", lines);
    if (!lines.empty()) {
        out += "parameters:\n";
        for (const auto& l : lines) out += l + "\n";
    }
    if (spec.is_agent()) {
        out += "tools:";
        for (const auto& t : spec.agent().tools) out += " " + t;
        out += "\n";
    }
    return out;
}

/// Ordered, name-unique collection of candidates of one kind. Value type;
/// treat loaded banks as immutable snapshots and copy to extend.
class CandidateBank {
  public:
    explicit CandidateBank(CandidateKind kind = CandidateKind::Tool) : kind_(kind) {}

    CandidateKind kind() const noexcept { return kind_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    const std::vector<CandidateSpec>& entries() const noexcept { return entries_; }

    bool contains(std::string_view name) const { return index_.count(std::string(name)) > 0; }

    const CandidateSpec* find(std::string_view name) const {
        auto it = index_.find(std::string(name));
        return it == index_.end() ? nullptr : &entries_[it->second];
    }

    /// Throws DuplicateName on collision and FamilyMismatch on a kind clash.
    void insert(CandidateSpec spec) {
        if (spec.kind() != kind_) throw Error(Errc::FamilyMismatch, spec.name());
        if (contains(spec.name())) throw Error(Errc::DuplicateName, spec.name());
        index_.emplace(spec.name(), entries_.size());
        entries_.push_back(std::move(spec));
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(entries_.size());
        for (const auto& e : entries_) out.push_back(e.name());
        return out;
    }

    bool operator==(const CandidateBank& o) const { return kind_ == o.kind_ && entries_ == o.entries_; }

  private:
    CandidateKind kind_;
    std::vector<CandidateSpec> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Infers the kind from the first document when not given: documents with
/// a "tools" list are agents.
inline CandidateBank bank_from_records(const std::vector<LineRecord>& records, const std::string& origin,
                                       std::optional<CandidateKind> kind = std::nullopt,
                                       ValidationMode mode = ValidationMode::Strict) {
    if (!kind) {
        kind = (!records.empty() && records.front().value.is_object() && records.front().value.contains("tools"))
                   ? CandidateKind::Agent
                   : CandidateKind::Tool;
    }
    CandidateBank bank(*kind);
    for (const auto& rec : records) {
        const std::string where = origin + ":" + std::to_string(rec.line);
        std::string name = rec.value.is_object() ? rec.value.value("name", std::string()) : std::string();
        try {
            bank.insert(validate_spec(rec.value, *kind, mode));
        } catch (const Error& e) {
            throw Error(Errc::ValidationError, where + ": " + (name.empty() ? "<unnamed>" : name) + ": " + e.what(),
                        e.code());
        }
    }
    return bank;
}

inline CandidateBank load_bank(const std::string& path, std::optional<CandidateKind> kind = std::nullopt,
                               ValidationMode mode = ValidationMode::Strict) {
    return bank_from_records(read_records(path), path, kind, mode);
}

/// Writes one spec per line in normalized form.
inline std::string render_bank(const CandidateBank& bank) {
    std::string out;
    for (const auto& e : bank.entries()) {
        out += dump_line(to_json(e));
        out += '\n';
    }
    return out;
}

inline void save_bank(const CandidateBank& bank, const std::string& path) { write_text_file(path, render_bank(bank)); }

/// Name -> spec lookup spanning several banks. First registration wins.
/// An optional fallback catalog is consulted for names not held locally.
class CandidateCatalog {
  public:
    CandidateCatalog() = default;
    explicit CandidateCatalog(const CandidateBank& bank) { add(bank); }
    explicit CandidateCatalog(std::shared_ptr<const CandidateCatalog> fallback) : fallback_(std::move(fallback)) {}

    void add(const CandidateBank& bank) {
        for (const auto& e : bank.entries()) add(e);
    }
    bool add(const CandidateSpec& spec) { return add(std::make_shared<const CandidateSpec>(spec)); }
    bool add(std::shared_ptr<const CandidateSpec> spec) {
        const std::string name = spec->name();
        auto [it, inserted] = specs_.try_emplace(name, std::move(spec));
        if (inserted) order_.push_back(name);
        return inserted;
    }
    /// Shares (does not copy) the entry `name` of another catalog.
    bool share(const CandidateCatalog& other, std::string_view name) {
        auto p = other.find_shared(name);
        if (!p) throw Error(Errc::UnresolvedPoolMember, std::string(name));
        return add(std::move(p));
    }

    std::shared_ptr<const CandidateSpec> find_shared(std::string_view name) const {
        auto it = specs_.find(std::string(name));
        if (it != specs_.end()) return it->second;
        return fallback_ ? fallback_->find_shared(name) : nullptr;
    }
    const CandidateSpec* find(std::string_view name) const { return find_shared(name).get(); }
    const CandidateSpec& at(std::string_view name) const {
        if (const auto* s = find(name)) return *s;
        throw Error(Errc::UnresolvedPoolMember, std::string(name));
    }
    bool contains(std::string_view name) const { return find(name) != nullptr; }
    /// Locally held entries only.
    std::size_t size() const noexcept { return order_.size(); }
    const std::vector<std::string>& names() const noexcept { return order_; }

  private:
    std::unordered_map<std::string, std::shared_ptr<const CandidateSpec>> specs_;
    std::vector<std::string> order_;
    std::shared_ptr<const CandidateCatalog> fallback_;
};

enum class PoolSettingKind { Clean, Multi, PlusMutation, PlusExternal };

constexpr std::string_view to_string(PoolSettingKind k) noexcept {
    switch (k) {
        case PoolSettingKind::Clean: return "Clean";
        case PoolSettingKind::Multi: return "Multi";
        case PoolSettingKind::PlusMutation: return "+Mutation";
        case PoolSettingKind::PlusExternal: return "+External";
    }
    return "?";
}

inline std::optional<PoolSettingKind> parse_pool_setting(std::string_view s) noexcept {
    if (s == "Clean" || s == "clean") return PoolSettingKind::Clean;
    if (s == "Multi" || s == "multi") return PoolSettingKind::Multi;
    if (s == "+Mutation" || s == "mutation" || s == "PlusMutation") return PoolSettingKind::PlusMutation;
    if (s == "+External" || s == "external" || s == "PlusExternal") return PoolSettingKind::PlusExternal;
    return std::nullopt;
}

/// The names offered at one routing step, resolved through a catalog.
struct CandidatePool {
    std::shared_ptr<const CandidateCatalog> catalog;
    std::vector<std::string> members;
    PoolSettingKind setting = PoolSettingKind::Clean;
    std::set<std::string> non_callable;

    /// Throws BadConfig for an empty pool and UnresolvedPoolMember for names
    /// the catalog cannot resolve.
    static CandidatePool make(std::shared_ptr<const CandidateCatalog> catalog, std::vector<std::string> members,
                              PoolSettingKind setting = PoolSettingKind::Clean) {
        if (members.empty()) throw Error(Errc::BadConfig, "empty candidate pool");
        if (!catalog) throw Error(Errc::BadConfig, "pool without catalog");
        std::set<std::string> seen;
        for (const auto& m : members) {
            if (!catalog->contains(m)) throw Error(Errc::UnresolvedPoolMember, m);
            if (!seen.insert(m).second) throw Error(Errc::DuplicateName, m);
        }
        return {std::move(catalog), std::move(members), setting, {}};
    }

    bool contains(std::string_view name) const {
        return std::find(members.begin(), members.end(), name) != members.end();
    }
    std::size_t size() const noexcept { return members.size(); }
    const CandidateSpec& spec(std::string_view name) const { return catalog->at(name); }
};

}  // namespace hroute
