#pragma once

#include <algorithm>
#include <atomic>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hroute/candidate.hpp"
#include "hroute/gateway.hpp"
#include "hroute/graph.hpp"
#include "hroute/rng.hpp"
#include "hroute/sampler.hpp"
#include "hroute/supervision.hpp"
#include "hroute/trajectory.hpp"

namespace hroute {

/// Graph snapshots reference specs by name; the specs travel in a bank file
/// next to the snapshot ("graph.jsonl" -> "graph.bank.jsonl").
inline std::string companion_bank_path(const std::string& graph_path) {
    const auto slash = graph_path.find_last_of('/');
    const auto dot = graph_path.rfind('.');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return graph_path + ".bank.jsonl";
    return graph_path.substr(0, dot) + ".bank.jsonl";
}

inline void save_graph_with_bank(const CandidateGraph& g, const std::string& path) {
    save_graph(g, path);
    save_bank(g.to_bank(), companion_bank_path(path));
}

inline CandidateGraph load_graph_with_bank(const std::string& path) {
    const CandidateBank bank = load_bank(companion_bank_path(path), std::nullopt, ValidationMode::Lenient);
    return load_graph(path, CandidateCatalog(bank));
}

struct SynthesisReport {
    std::vector<Trajectory> trajectories;
    std::map<std::string, std::size_t> discards;  // reason -> count
    std::size_t failed_slots = 0;
};

/// `count` slots, each: sample a subset, propose a task, simulate. A
/// discarded attempt is retried with fresh seeds up to `attempts` times.
/// Slots run concurrently; output order is slot order.
inline SynthesisReport synthesize(const CandidateGraph& graph, std::size_t count, const SamplerConfig& sampler,
                                  const SimulationConfig& sim, int attempts, std::uint64_t seed, Gateway& gateway,
                                  std::size_t concurrency = 8) {
    const CandidateCatalog catalog(graph.to_bank());
    struct Slot {
        std::optional<Trajectory> traj;
        std::vector<std::string> reasons;
    };
    std::vector<Slot> slots(count);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr fatal;
    std::mutex fatal_mu;
    auto worker = [&] {
        for (std::size_t i = next++; i < count && !stop; i = next++) {
            for (int a = 0; a < attempts && !slots[i].traj; ++a) {
                const std::uint64_t s = derive_seed(derive_seed(seed, i), static_cast<std::uint64_t>(a));
                try {
                    SamplerConfig sc = sampler;
                    sc.rng_seed = derive_seed(s, "sample");
                    const CandidateSubset subset = sample_subset(graph, sc);
                    SimulationConfig cfg = sim;
                    cfg.llm.seed = derive_seed(s, "llm");
                    const TaskPlan plan = propose_task(subset, catalog, cfg.llm, gateway);
                    slots[i].traj = simulate_trajectory(plan, subset, catalog, cfg, gateway, "traj-" + std::to_string(i));
                } catch (const DiscardedTrajectory& d) {
                    slots[i].reasons.emplace_back(to_string(d.reason()));
                } catch (const Error& e) {
                    // A plan that never parsed carries its cause; gateway exhaustion does not.
                    const bool gateway_exhausted = e.code() == Errc::RetriesExhausted && !e.cause();
                    if (gateway_exhausted || e.is(Errc::BackendUnavailable) || e.is(Errc::BudgetExceeded) ||
                        e.is(Errc::DimensionMismatch) || e.is(Errc::BadConfig)) {
                        std::lock_guard lock(fatal_mu);
                        if (!fatal) fatal = std::current_exception();
                        stop = true;
                        return;
                    }
                    slots[i].reasons.emplace_back(errc_name(e.code()));
                }
            }
        }
    };
    const std::size_t threads = std::max<std::size_t>(1, std::min(concurrency, count));
    std::vector<std::future<void>> jobs;
    for (std::size_t t = 0; t < threads; ++t) jobs.push_back(std::async(std::launch::async, worker));
    for (auto& j : jobs) j.get();
    if (fatal) std::rethrow_exception(fatal);

    SynthesisReport report;
    for (auto& slot : slots) {
        for (const auto& r : slot.reasons) ++report.discards[r];
        if (slot.traj) report.trajectories.push_back(std::move(*slot.traj));
        else ++report.failed_slots;
    }
    return report;
}

/// One pool per trajectory: its subset plus seeded distractors up to
/// pool_size.
inline std::vector<CandidatePool> pools_for(const std::vector<Trajectory>& trajs, std::shared_ptr<const CandidateCatalog> catalog,
                                            std::size_t pool_size, std::uint64_t seed) {
    std::vector<CandidatePool> pools;
    pools.reserve(trajs.size());
    for (const auto& t : trajs) pools.push_back(pool_for(t, catalog, pool_size, seed));
    return pools;
}

}  // namespace hroute
