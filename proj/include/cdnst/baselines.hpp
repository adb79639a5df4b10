#ifndef CDNST_BASELINES_HPP
#define CDNST_BASELINES_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cdnst/dcn.hpp"
#include "cdnst/domain.hpp"
#include "cdnst/gibbs.hpp"

namespace cdnst {

// Pooled (_U) variants bridge the two choice universes through keyword text,
// the only vocabulary both domains share.

inline constexpr double mc_smoothing = 0.01;

/// Occurrence counts of each choice in the history.
inline std::vector<double> of_scores(std::span<const ChoiceIndex> history, std::size_t M) {
    std::vector<double> s(M, 0.0);
    for (ChoiceIndex c : history) s[c] += 1.0;
    return s;
}

/// Count of keyword text over every action of a history.
inline std::unordered_map<std::string, double> keyword_counts(std::span<const ChoiceIndex> history,
                                                              const DomainCatalog& catalog) {
    std::unordered_map<std::string, double> counts;
    for (ChoiceIndex c : history) {
        for (const auto& kw : catalog.choice(c).keywords) counts[kw.text()] += 1.0;
    }
    return counts;
}

/// Target counts plus, per candidate, the mean pooled source count of its keywords.
inline std::vector<double> of_u_scores(std::span<const ChoiceIndex> target_history,
                                       const DomainCatalog& target_catalog,
                                       std::span<const ChoiceIndex> source_history,
                                       const DomainCatalog& source_catalog) {
    auto s = of_scores(target_history, target_catalog.size());
    if (source_history.empty()) return s;
    const auto pooled = keyword_counts(source_history, source_catalog);
    for (ChoiceIndex o = 0; o < target_catalog.size(); ++o) {
        const auto& kws = target_catalog.choice(o).keywords;
        double sum = 0.0;
        for (const auto& kw : kws) {
            auto it = pooled.find(kw.text());
            if (it != pooled.end()) sum += it->second;
        }
        s[o] += sum / static_cast<double>(kws.size());
    }
    return s;
}

struct TransitionGraph {
    std::map<std::pair<ChoiceIndex, ChoiceIndex>, std::uint64_t> counts;
    std::map<ChoiceIndex, std::uint64_t> row_totals;

    void add(ChoiceIndex from, ChoiceIndex to) {
        ++counts[{from, to}];
        ++row_totals[from];
    }
    std::uint64_t count(ChoiceIndex from, ChoiceIndex to) const {
        auto it = counts.find({from, to});
        return it == counts.end() ? 0 : it->second;
    }
    std::uint64_t row_total(ChoiceIndex from) const {
        auto it = row_totals.find(from);
        return it == row_totals.end() ? 0 : it->second;
    }
};

/// Adjacent-pair counts within each history (pairs never span histories).
inline TransitionGraph mc_fit(std::span<const std::vector<ChoiceIndex>> histories) {
    TransitionGraph g;
    for (const auto& h : histories) {
        for (std::size_t i = 1; i < h.size(); ++i) g.add(h[i - 1], h[i]);
    }
    return g;
}

inline TransitionGraph mc_fit(std::span<const ChoiceIndex> history) {
    TransitionGraph g;
    for (std::size_t i = 1; i < history.size(); ++i) g.add(history[i - 1], history[i]);
    return g;
}

/// (count(last, o) + lambda) / (row_total(last) + lambda M).
inline std::vector<double> mc_scores(const TransitionGraph& graph, ChoiceIndex last, std::size_t M,
                                     double lambda = mc_smoothing) {
    std::vector<double> s(M);
    const double total = static_cast<double>(graph.row_total(last)) + lambda * static_cast<double>(M);
    for (ChoiceIndex o = 0; o < M; ++o) {
        s[o] = (static_cast<double>(graph.count(last, o)) + lambda) / total;
    }
    return s;
}

/// Target item transitions plus keyword-text transitions from every merged
/// adjacency that involves a source action.
struct PooledTransitions {
    TransitionGraph target;
    std::map<std::pair<std::string, std::string>, double> keyword;
};

struct DomainTag {
    bool is_source;
    ChoiceIndex choice;
};

/// Merges two timestamped sequences; ties keep source before target.
inline std::vector<DomainTag> merged_chronology(std::span<const Action> source,
                                                std::span<const Action> target) {
    std::vector<std::pair<Timestamp, DomainTag>> all;
    all.reserve(source.size() + target.size());
    for (const auto& a : source) all.push_back({a.timestamp, {true, a.choice}});
    for (const auto& a : target) all.push_back({a.timestamp, {false, a.choice}});
    std::stable_sort(all.begin(), all.end(),
                     [](const auto& x, const auto& y) { return x.first < y.first; });
    std::vector<DomainTag> out;
    out.reserve(all.size());
    for (const auto& [t, tag] : all) out.push_back(tag);
    return out;
}

inline PooledTransitions mc_u_fit(std::span<const Action> target, const DomainCatalog& target_catalog,
                                  std::span<const Action> source, const DomainCatalog& source_catalog) {
    PooledTransitions p;
    const auto merged = merged_chronology(source, target);
    for (std::size_t i = 1; i < merged.size(); ++i) {
        const auto& a = merged[i - 1];
        const auto& b = merged[i];
        if (!a.is_source && !b.is_source) {
            p.target.add(a.choice, b.choice);
            continue;
        }
        const auto& ka = (a.is_source ? source_catalog : target_catalog).choice(a.choice).keywords;
        const auto& kb = (b.is_source ? source_catalog : target_catalog).choice(b.choice).keywords;
        for (const auto& x : ka) {
            for (const auto& y : kb) p.keyword[{x.text(), y.text()}] += 1.0;
        }
    }
    return p;
}

/// Normalized (count(last, o) + lambda + S(last, o)), where S is the mean pooled
/// keyword-transition count over keyword pairs of last and o.
inline std::vector<double> mc_u_scores(const PooledTransitions& pooled, ChoiceIndex last,
                                       const DomainCatalog& target_catalog,
                                       double lambda = mc_smoothing) {
    const std::size_t M = target_catalog.size();
    std::vector<double> s(M);
    const auto& kl = target_catalog.choice(last).keywords;
    double total = 0.0;
    for (ChoiceIndex o = 0; o < M; ++o) {
        double bridge = 0.0;
        if (!pooled.keyword.empty()) {
            const auto& ko = target_catalog.choice(o).keywords;
            for (const auto& x : kl) {
                for (const auto& y : ko) {
                    auto it = pooled.keyword.find({x.text(), y.text()});
                    if (it != pooled.keyword.end()) bridge += it->second;
                }
            }
            bridge /= static_cast<double>(kl.size() * ko.size());
        }
        total += s[o] = static_cast<double>(pooled.target.count(last, o)) + lambda + bridge;
    }
    for (double& x : s) x /= total;
    return s;
}

/// For every choice of `from`, the choice of `to` with the highest keyword
/// Jaccard overlap (lowest index on ties), or nothing when no keyword is shared.
inline std::vector<std::optional<ChoiceIndex>> keyword_bridge(const DomainCatalog& from,
                                                              const DomainCatalog& to) {
    std::vector<std::optional<ChoiceIndex>> map(from.size());
    for (ChoiceIndex a = 0; a < from.size(); ++a) {
        const auto& ka = from.choice(a).keywords;
        double best = 0.0;
        for (ChoiceIndex b = 0; b < to.size(); ++b) {
            const auto& kb = to.choice(b).keywords;
            std::size_t shared = 0;
            for (const auto& x : ka) shared += std::count(kb.begin(), kb.end(), x);
            if (shared == 0) continue;
            const double j = static_cast<double>(shared) /
                             static_cast<double>(ka.size() + kb.size() - shared);
            if (j > best) {
                best = j;
                map[a] = b;
            }
        }
    }
    return map;
}

struct PooledSequence {
    std::vector<Action> actions;  // expressed in the target catalog
    std::size_t mapped = 0;
    std::size_t dropped = 0;
};

/// Re-expresses source actions in the target catalog and merges by time.
inline PooledSequence pool_into_target(std::span<const Action> source, const DomainCatalog& source_catalog,
                                       std::span<const Action> target, const DomainCatalog& target_catalog) {
    PooledSequence out;
    const auto bridge = keyword_bridge(source_catalog, target_catalog);
    std::vector<Action> mapped;
    for (const auto& a : source) {
        if (auto b = bridge[a.choice]) {
            mapped.push_back({*b, a.timestamp});
            ++out.mapped;
        } else {
            ++out.dropped;
        }
    }
    out.actions = mapped;
    out.actions.insert(out.actions.end(), target.begin(), target.end());
    // source first on timestamp ties
    std::stable_sort(out.actions.begin(), out.actions.end(),
                     [](const Action& x, const Action& y) { return x.timestamp < y.timestamp; });
    return out;
}

struct PooledFit {
    FitResult fit;
    bool fell_back = false;  // no source action shared a keyword with the target catalog
};

/// Single-domain model fitted on the time-merged pseudo-sequence.
inline PooledFit pooled_nsm_fit(std::span<const Action> source, const DomainCatalog& source_catalog,
                                std::span<const Action> target, const DomainCatalog& target_catalog,
                                const Hyperparams& hp, const SamplerConfig& cfg) {
    PooledFit out;
    std::vector<ChoiceIndex> choices;
    if (!source.empty()) {
        auto pooled = pool_into_target(source, source_catalog, target, target_catalog);
        if (pooled.mapped == 0) {
            out.fell_back = true;
        } else {
            for (const auto& a : pooled.actions) choices.push_back(a.choice);
        }
    }
    if (choices.empty()) {
        for (const auto& a : target) choices.push_back(a.choice);
    }
    auto dcn = build_dcn(choices, target_catalog);
    out.fit = fit(std::nullopt, DomainObservations{choices, &dcn}, hp, cfg);
    return out;
}

}  // namespace cdnst

#endif
