#ifndef CDNST_DCN_HPP
#define CDNST_DCN_HPP

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <span>
#include <unordered_map>
#include <vector>

#include "cdnst/domain.hpp"

namespace cdnst {

/// Keyword occurrence and adjacent-action keyword-transition counts over a
/// history prefix.
struct KeywordStats {
    std::unordered_map<KeywordId, std::uint64_t> freq;
    std::unordered_map<std::uint64_t, std::uint64_t> trans;

    static std::uint64_t pair_key(KeywordId from, KeywordId to) {
        return (static_cast<std::uint64_t>(from) << 32) | to;
    }

    std::uint64_t freq_of(KeywordId k) const {
        auto it = freq.find(k);
        return it == freq.end() ? 0 : it->second;
    }
    std::uint64_t trans_of(KeywordId from, KeywordId to) const {
        auto it = trans.find(pair_key(from, to));
        return it == trans.end() ? 0 : it->second;
    }

    /// Adds one action; `prev` is empty for the first action of a sequence.
    void observe(std::span<const KeywordId> prev, std::span<const KeywordId> current) {
        for (KeywordId k : current) ++freq[k];
        for (KeywordId a : prev) {
            for (KeywordId b : current) ++trans[pair_key(a, b)];
        }
    }
};

/// 1 / ((F+1)(T+1)) held as an exact fraction so ties are detected without
/// rounding. F is the mean keyword frequency of the candidate, T the mean
/// transition count over (previous keyword, candidate keyword) pairs.
struct NoveltyScore {
    std::uint64_t numerator = 1;
    std::uint64_t denominator = 1;

    double value() const {
        return static_cast<double>(numerator) / static_cast<double>(denominator);
    }

    friend bool operator<(const NoveltyScore& a, const NoveltyScore& b) {
        using wide = unsigned __int128;
        return static_cast<wide>(a.numerator) * b.denominator <
               static_cast<wide>(b.numerator) * a.denominator;
    }
    friend bool operator==(const NoveltyScore& a, const NoveltyScore& b) {
        using wide = unsigned __int128;
        return static_cast<wide>(a.numerator) * b.denominator ==
               static_cast<wide>(b.numerator) * a.denominator;
    }
};

inline NoveltyScore raw_novelty_score(const KeywordStats& stats, std::span<const KeywordId> prev,
                                      std::span<const KeywordId> cand) {
    const std::uint64_t nk = cand.size();
    std::uint64_t sum_freq = 0;
    for (KeywordId k : cand) sum_freq += stats.freq_of(k);

    std::uint64_t pairs = 1;
    std::uint64_t sum_trans = 0;
    if (!prev.empty()) {
        pairs = prev.size() * nk;
        for (KeywordId a : prev) {
            for (KeywordId b : cand) sum_trans += stats.trans_of(a, b);
        }
    }
    // (F+1)(T+1) = (sum_freq + nk)/nk * (sum_trans + pairs)/pairs
    return NoveltyScore{nk * pairs, (sum_freq + nk) * (sum_trans + pairs)};
}

/// One DCN row: dense ranks over all choices, 1 = least novel.
struct DcnRow {
    std::vector<std::uint32_t> ranks;
    std::uint32_t row_max = 1;
};

/// Dense ranking of scores: equal scores share a rank, rank 1 is the lowest score.
inline DcnRow dense_rank(std::span<const NoveltyScore> scores) {
    std::vector<std::uint32_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return scores[a] < scores[b]; });
    DcnRow row;
    row.ranks.assign(scores.size(), 1);
    std::uint32_t rank = 1;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i > 0 && scores[order[i - 1]] < scores[order[i]]) ++rank;
        row.ranks[order[i]] = rank;
    }
    row.row_max = rank;
    return row;
}

/// N x M matrix of dense novelty ranks, row-major.
class DcnMatrix {
public:
    DcnMatrix() = default;
    DcnMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {
        ranks_.reserve(rows * cols);
        row_max_.reserve(rows);
    }

    void append_row(const DcnRow& row) {
        ranks_.insert(ranks_.end(), row.ranks.begin(), row.ranks.end());
        row_max_.push_back(row.row_max);
        rows_ = row_max_.size();
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::uint32_t rank(std::size_t i, std::size_t j) const { return ranks_[i * cols_ + j]; }
    std::uint32_t row_max(std::size_t i) const { return row_max_[i]; }
    std::span<const std::uint32_t> row(std::size_t i) const {
        return {ranks_.data() + i * cols_, cols_};
    }

    friend bool operator==(const DcnMatrix&, const DcnMatrix&) = default;

    /// Tab-separated dump, one line per position.
    void write(std::ostream& os) const {
        for (std::size_t i = 0; i < rows_; ++i) {
            for (std::size_t j = 0; j < cols_; ++j) {
                if (j) os << '\t';
                os << rank(i, j);
            }
            os << '\n';
        }
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::uint32_t> ranks_;
    std::vector<std::uint32_t> row_max_;
};

/// Walks a sequence position by position, producing the DCN row for the
/// upcoming position from everything observed so far.
class DcnBuilder {
public:
    explicit DcnBuilder(const DomainCatalog& catalog) : catalog_(&catalog) {
        scores_.resize(catalog.size());
    }

    DcnRow current_row() {
        std::span<const KeywordId> prev;
        if (has_prev_) prev = catalog_->keyword_ids(prev_);
        for (ChoiceIndex c = 0; c < catalog_->size(); ++c) {
            scores_[c] = raw_novelty_score(stats_, prev, catalog_->keyword_ids(c));
        }
        return dense_rank(scores_);
    }

    void push(ChoiceIndex choice) {
        std::span<const KeywordId> prev;
        if (has_prev_) prev = catalog_->keyword_ids(prev_);
        stats_.observe(prev, catalog_->keyword_ids(choice));
        prev_ = choice;
        has_prev_ = true;
    }

    const KeywordStats& stats() const noexcept { return stats_; }

private:
    const DomainCatalog* catalog_;
    KeywordStats stats_;
    std::vector<NoveltyScore> scores_;
    ChoiceIndex prev_ = 0;
    bool has_prev_ = false;
};

/// Row i uses counts from actions before i and the keywords of action i-1.
inline DcnMatrix build_dcn(std::span<const ChoiceIndex> choices, const DomainCatalog& catalog) {
    DcnMatrix dcn(choices.size(), catalog.size());
    DcnBuilder builder(catalog);
    for (ChoiceIndex c : choices) {
        dcn.append_row(builder.current_row());
        builder.push(c);
    }
    return dcn;
}

inline DcnMatrix build_dcn(const ActionSequence& seq, const DomainCatalog& catalog) {
    auto choices = seq.choices();
    return build_dcn(choices, catalog);
}

/// The row for position N+1 given a full history of N actions.
inline DcnRow next_dcn_row(std::span<const ChoiceIndex> history, const DomainCatalog& catalog) {
    DcnBuilder builder(catalog);
    for (ChoiceIndex c : history) builder.push(c);
    return builder.current_row();
}

}  // namespace cdnst

#endif
