#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hroute/candidate.hpp"
#include "hroute/error.hpp"
#include "hroute/gateway.hpp"
#include "hroute/graph.hpp"
#include "hroute/json_util.hpp"
#include "hroute/rng.hpp"
#include "hroute/router.hpp"
#include "hroute/supervision.hpp"

namespace hroute {

struct PoolSetting {
    PoolSettingKind kind = PoolSettingKind::Clean;
    /// Multi and later: every server/group bank to merge.
    std::vector<std::shared_ptr<const CandidateBank>> group_banks;
    /// +Mutation and later: the evolved graph whose mutants join the pool.
    std::shared_ptr<const CandidateGraph> mutation_graph;
    /// +External: an outside bank appended last.
    std::shared_ptr<const CandidateBank> external_bank;

    void validate() const {
        const int level = static_cast<int>(kind);
        if (level >= static_cast<int>(PoolSettingKind::Multi) && group_banks.empty())
            throw Error(Errc::MissingParameter, std::string(to_string(kind)) + " needs group banks");
        if (level >= static_cast<int>(PoolSettingKind::PlusMutation) && !mutation_graph)
            throw Error(Errc::MissingParameter, std::string(to_string(kind)) + " needs a mutation graph");
        if (level >= static_cast<int>(PoolSettingKind::PlusExternal) && !external_bank)
            throw Error(Errc::MissingParameter, std::string(to_string(kind)) + " needs an external bank");
    }
};

/// What a setting adds on top of any base pool, resolved once.
struct PoolExtension {
    PoolSettingKind kind = PoolSettingKind::Clean;
    std::shared_ptr<CandidateCatalog> catalog = std::make_shared<CandidateCatalog>();
    std::vector<std::string> names;
    std::set<std::string> mutants;
};

inline PoolExtension prepare_extension(const PoolSetting& setting) {
    setting.validate();
    PoolExtension ext;
    ext.kind = setting.kind;
    std::set<std::string> seen;
    auto take = [&](const CandidateSpec& spec) {
        if (!seen.insert(spec.name()).second) return false;
        ext.catalog->add(spec);
        ext.names.push_back(spec.name());
        return true;
    };
    const int level = static_cast<int>(setting.kind);
    if (level >= static_cast<int>(PoolSettingKind::Multi))
        for (const auto& bank : setting.group_banks)
            for (const auto& spec : bank->entries()) take(spec);
    if (level >= static_cast<int>(PoolSettingKind::PlusMutation))
        for (const auto& node : setting.mutation_graph->nodes())
            if (node.spec.provenance().is_mutant() && take(node.spec)) ext.mutants.insert(node.spec.name());
    if (level >= static_cast<int>(PoolSettingKind::PlusExternal))
        for (const auto& spec : setting.external_bank->entries()) take(spec);
    return ext;
}

/// base, then the extension's names not already present. Base specs take
/// precedence; mutants that were not in the base are marked non-callable.
inline CandidatePool apply_extension(const CandidatePool& base, const PoolExtension& ext,
                                     const std::optional<std::string>& label = std::nullopt) {
    if (ext.kind == PoolSettingKind::Clean) {
        if (label && !base.contains(*label)) throw Error(Errc::LabelEvicted, *label);
        return base;
    }
    auto catalog = std::make_shared<CandidateCatalog>(std::shared_ptr<const CandidateCatalog>(ext.catalog));
    for (const auto& m : base.members) catalog->share(*base.catalog, m);
    CandidatePool pool;
    pool.catalog = catalog;
    pool.setting = ext.kind;
    pool.members = base.members;
    pool.non_callable = base.non_callable;
    std::set<std::string> present(base.members.begin(), base.members.end());
    for (const auto& n : ext.names) {
        if (!present.insert(n).second) continue;
        pool.members.push_back(n);
        if (ext.mutants.count(n)) pool.non_callable.insert(n);
    }
    if (label && !pool.contains(*label)) throw Error(Errc::LabelEvicted, *label);
    return pool;
}

inline CandidatePool build_pool(const CandidatePool& base, const PoolSetting& setting,
                                const std::optional<std::string>& label = std::nullopt) {
    return apply_extension(base, prepare_extension(setting), label);
}

// ---------------------------------------------------------------------------
// Datasets

struct EvalInstance {
    RoutingInstance instance;
    CandidateKind kind = CandidateKind::Tool;
    std::size_t line = 0;
};

inline std::vector<EvalInstance> parse_dataset(const std::vector<LineRecord>& records, const std::string& origin) {
    std::vector<EvalInstance> out;
    out.reserve(records.size());
    for (const auto& rec : records) {
        const std::string where = origin + ":" + std::to_string(rec.line);
        out.push_back({parse_rendered_sample(rec.value, where), sample_kind(rec.value), rec.line});
    }
    return out;
}

inline std::vector<EvalInstance> load_dataset(const std::string& path) {
    std::vector<LineRecord> records;
    try {
        records = read_records(path);
    } catch (const Error& e) {
        if (e.is(Errc::ParseError)) throw Error(Errc::DatasetFormat, e.detail());
        throw;
    }
    return parse_dataset(records, path);
}

// ---------------------------------------------------------------------------
// Evaluation

struct Metrics {
    std::vector<double> per_run;
    double avg_at_k = 0.0;
    std::map<std::string, double> per_group;
    std::size_t n_instances = 0;
    std::size_t abstentions = 0;
};

struct EvalConfig {
    int k = 5;
    std::uint64_t seed = 0;
    std::size_t concurrency = 8;
};

/// k independent passes with derived seeds; abstentions count as wrong.
/// Runs are sequential, instances within a run are routed concurrently.
inline Metrics evaluate(const RouterConfig& router, const std::vector<EvalInstance>& dataset, const PoolSetting& setting,
                        const EvalConfig& cfg, Gateway& gateway) {
    if (cfg.k < 1) throw Error(Errc::BadConfig, "k must be >= 1");
    const PoolExtension ext = prepare_extension(setting);
    const std::size_t n = dataset.size();
    std::vector<CandidatePool> pools;
    pools.reserve(n);
    for (const auto& e : dataset) pools.push_back(apply_extension(e.instance.pool, ext, e.instance.label));

    Metrics m;
    m.n_instances = n;
    std::map<std::string, std::pair<std::size_t, std::size_t>> group_hits;  // correct, total over runs
    for (int run = 0; run < cfg.k; ++run) {
        const std::uint64_t run_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(run));
        std::vector<char> correct(n, 0);
        std::vector<char> abstained(n, 0);
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i = next++; i < n; i = next++) {
                const auto& inst = dataset[i].instance;
                RouterConfig rc = router;
                rc.kind = dataset[i].kind;
                const auto d = route(rc, RouteRequest{inst.query, inst.history, pools[i], inst.label, derive_seed(run_seed, i)}, gateway);
                abstained[i] = d.abstained;
                correct[i] = !d.abstained && d.chosen == inst.label;
            }
        };
        const std::size_t threads = std::max<std::size_t>(1, std::min(cfg.concurrency, n));
        std::vector<std::future<void>> jobs;
        for (std::size_t t = 0; t < threads; ++t) jobs.push_back(std::async(std::launch::async, worker));
        for (auto& j : jobs) j.get();

        std::size_t hits = 0;
        for (std::size_t i = 0; i < n; ++i) {
            hits += static_cast<std::size_t>(correct[i]);
            m.abstentions += static_cast<std::size_t>(abstained[i]);
            auto& g = group_hits[dataset[i].instance.group];
            g.first += static_cast<std::size_t>(correct[i]);
            ++g.second;
        }
        m.per_run.push_back(n ? static_cast<double>(hits) / static_cast<double>(n) : 0.0);
    }
    double sum = 0.0;
    for (double a : m.per_run) sum += a;
    m.avg_at_k = sum / static_cast<double>(m.per_run.size());
    for (const auto& [g, c] : group_hits) m.per_group[g] = static_cast<double>(c.first) / static_cast<double>(c.second);
    return m;
}

inline Json to_json(const Metrics& m) {
    return Json{{"per_run", m.per_run}, {"avg_at_k", m.avg_at_k}, {"per_group", m.per_group},
                {"n_instances", m.n_instances}, {"abstentions", m.abstentions}};
}

// ---------------------------------------------------------------------------
// Reports

inline constexpr std::string_view kMissingCell = "—";

struct MethodResult {
    std::string method;
    PoolSettingKind setting = PoolSettingKind::Clean;
    Metrics metrics;
};

struct ReportTable {
    std::vector<std::string> rows;
    std::vector<std::string> columns;
    std::vector<std::vector<std::optional<double>>> cells;
};

/// Methods as rows in first-seen order; settings as columns in canonical
/// order (only settings that occur). With by_group, one column per
/// (setting, group) pair.
inline ReportTable make_table(const std::vector<MethodResult>& results, bool by_group = false) {
    ReportTable t;
    std::vector<std::pair<PoolSettingKind, std::string>> keys;
    for (const auto kind : {PoolSettingKind::Clean, PoolSettingKind::Multi, PoolSettingKind::PlusMutation, PoolSettingKind::PlusExternal}) {
        std::set<std::string> groups;
        bool present = false;
        for (const auto& r : results) {
            if (r.setting != kind) continue;
            present = true;
            for (const auto& [g, _] : r.metrics.per_group) groups.insert(g);
        }
        if (!present) continue;
        if (!by_group) {
            keys.emplace_back(kind, "");
            t.columns.emplace_back(to_string(kind));
        } else {
            for (const auto& g : groups) {
                keys.emplace_back(kind, g);
                t.columns.push_back(std::string(to_string(kind)) + "/" + g);
            }
        }
    }
    for (const auto& r : results)
        if (std::find(t.rows.begin(), t.rows.end(), r.method) == t.rows.end()) t.rows.push_back(r.method);
    t.cells.assign(t.rows.size(), std::vector<std::optional<double>>(keys.size()));
    for (const auto& r : results) {
        const auto row = static_cast<std::size_t>(std::find(t.rows.begin(), t.rows.end(), r.method) - t.rows.begin());
        for (std::size_t c = 0; c < keys.size(); ++c) {
            if (keys[c].first != r.setting) continue;
            if (keys[c].second.empty()) {
                t.cells[row][c] = r.metrics.avg_at_k;
            } else if (auto it = r.metrics.per_group.find(keys[c].second); it != r.metrics.per_group.end()) {
                t.cells[row][c] = it->second;
            }
        }
    }
    return t;
}

namespace detail {

inline std::string percent(double v) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(2);
    os << v * 100.0;
    return os.str();
}

inline std::size_t display_width(std::string_view s) {
    std::size_t w = 0;
    for (unsigned char c : s) w += (c & 0xC0) != 0x80;
    return w;
}

}  // namespace detail

/// Accuracies as percentages with two decimals; missing cells as an em dash.
inline std::string render_table_text(const ReportTable& t) {
    std::vector<std::vector<std::string>> grid;
    grid.push_back({"Method"});
    for (const auto& c : t.columns) grid[0].push_back(c);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        std::vector<std::string> line{t.rows[r]};
        for (const auto& cell : t.cells[r]) line.push_back(cell ? detail::percent(*cell) : std::string(kMissingCell));
        grid.push_back(std::move(line));
    }
    std::vector<std::size_t> width(grid[0].size(), 0);
    for (const auto& line : grid)
        for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], detail::display_width(line[c]));
    std::string out;
    for (std::size_t r = 0; r < grid.size(); ++r) {
        for (std::size_t c = 0; c < grid[r].size(); ++c) {
            const auto& s = grid[r][c];
            const std::string pad(width[c] - detail::display_width(s), ' ');
            if (c) out += "  ";
            out += c == 0 ? s + pad : pad + s;
        }
        while (!out.empty() && out.back() == ' ') out.pop_back();
        out += '\n';
        if (r == 0) {
            std::size_t total = 0;
            for (auto w : width) total += w;
            out += std::string(total + 2 * (width.size() - 1), '-') + '\n';
        }
    }
    return out;
}

inline std::string render_table_csv(const ReportTable& t) {
    auto quote = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
        return q + "\"";
    };
    std::string out = "method";
    for (const auto& c : t.columns) out += "," + quote(c);
    out += '\n';
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        out += quote(t.rows[r]);
        for (const auto& cell : t.cells[r]) out += "," + (cell ? detail::percent(*cell) : std::string(kMissingCell));
        out += '\n';
    }
    return out;
}

inline std::string report(const std::vector<MethodResult>& results, bool by_group = false) {
    return render_table_text(make_table(results, by_group));
}

/// One line per (method, setting, run).
inline std::vector<Json> result_records(const std::vector<MethodResult>& results) {
    std::vector<Json> out;
    for (const auto& r : results)
        for (std::size_t i = 0; i < r.metrics.per_run.size(); ++i)
            out.push_back(Json{{"method", r.method},
                               {"setting", std::string(to_string(r.setting))},
                               {"run", i},
                               {"accuracy", r.metrics.per_run[i]},
                               {"n_instances", r.metrics.n_instances}});
    return out;
}

}  // namespace hroute
