#ifndef CDNST_METRICS_HPP
#define CDNST_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "cdnst/domain.hpp"

namespace cdnst {

/// Candidates in descending score order with a relevance grade per position.
struct RankedList {
    std::vector<ChoiceIndex> items;
    std::vector<int> rel;
};

/// Sorts `candidates` by descending score, ties by ascending choice index.
/// Relevance is 1 for `truth`, 0 elsewhere.
inline RankedList rank_candidates(std::span<const double> scores,
                                  std::span<const ChoiceIndex> candidates, ChoiceIndex truth) {
    RankedList list;
    list.items.assign(candidates.begin(), candidates.end());
    std::sort(list.items.begin(), list.items.end(), [&](ChoiceIndex a, ChoiceIndex b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    list.rel.reserve(list.items.size());
    for (ChoiceIndex c : list.items) list.rel.push_back(c == truth ? 1 : 0);
    return list;
}

struct NdcgValue {
    double value = 0.0;
    bool degenerate = false;  // no positive relevance anywhere
};

inline double dcg_at_k(std::span<const int> rel, std::size_t k) {
    double dcg = 0.0;
    const std::size_t n = std::min(k, rel.size());
    for (std::size_t i = 0; i < n; ++i) {
        dcg += (std::exp2(rel[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
    }
    return dcg;
}

inline NdcgValue ndcg_at_k(const RankedList& list, std::size_t k) {
    std::vector<int> ideal = list.rel;
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    const double idcg = dcg_at_k(ideal, k);
    if (idcg <= 0.0) return {0.0, true};
    return {dcg_at_k(list.rel, k) / idcg, false};
}

/// sum_i (2^rel_i - 1) / i over the whole list; the reciprocal rank under a
/// single binary hit.
inline double mrr(const RankedList& list) {
    double s = 0.0;
    for (std::size_t i = 0; i < list.rel.size(); ++i) {
        s += (std::exp2(list.rel[i]) - 1.0) / static_cast<double>(i + 1);
    }
    return s;
}

enum class PrecisionMode { standard, paper_literal };

inline const char* to_string(PrecisionMode m) {
    return m == PrecisionMode::standard ? "standard" : "paper_literal";
}
inline PrecisionMode parse_precision_mode(const std::string& s) {
    if (s == "standard") return PrecisionMode::standard;
    if (s == "paper_literal") return PrecisionMode::paper_literal;
    throw UsageError("unknown precision mode '" + s + "'");
}

/// standard: hits in the top k over k.
/// paper_literal: sum over top-k positions with rel >= 1 of 1 / (i (2^rel - 1));
/// positions with rel = 0 have a zero denominator and are skipped.
inline double precision_at_k(const RankedList& list, std::size_t k, PrecisionMode mode) {
    const std::size_t n = std::min(k, list.rel.size());
    if (mode == PrecisionMode::standard) {
        if (k == 0) return 0.0;
        std::size_t hits = 0;
        for (std::size_t i = 0; i < n; ++i) hits += list.rel[i] >= 1 ? 1 : 0;
        return static_cast<double>(hits) / static_cast<double>(k);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (list.rel[i] < 1) continue;
        s += 1.0 / (static_cast<double>(i + 1) * (std::exp2(list.rel[i]) - 1.0));
    }
    return s;
}

}  // namespace cdnst

#endif
