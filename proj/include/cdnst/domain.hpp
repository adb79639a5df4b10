#ifndef CDNST_DOMAIN_HPP
#define CDNST_DOMAIN_HPP

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace cdnst {

/// Raised for malformed input data (bad rows, out-of-range indices, unknown ids).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a caller violates an operation's precondition.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical routine produces a non-finite result.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Timestamp = std::int64_t;  // seconds since epoch, UTC
using ChoiceIndex = std::uint32_t;
using KeywordId = std::uint32_t;

inline constexpr Timestamp seconds_per_day = 86400;

/// A normalized context-information token: lowercase, trimmed, inner whitespace as '_'.
class Keyword {
public:
    Keyword() = default;

    const std::string& text() const noexcept { return text_; }

    friend bool operator==(const Keyword&, const Keyword&) = default;
    friend auto operator<=>(const Keyword&, const Keyword&) = default;

private:
    explicit Keyword(std::string text) : text_(std::move(text)) {}
    friend Keyword normalize_keyword(std::string_view raw);

    std::string text_;
};

inline Keyword normalize_keyword(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_gap = false;
    for (char ch : raw) {
        auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            pending_gap = !out.empty();
            continue;
        }
        if (pending_gap) {
            out.push_back('_');
            pending_gap = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    if (out.empty()) {
        throw DataError("rejected token: keyword is empty after normalization");
    }
    return Keyword(std::move(out));
}

struct Choice {
    std::string id;
    std::vector<Keyword> keywords;  // first-seen order, no duplicates
};

/// The choice universe of one domain. Keywords are interned to dense ids so
/// that novelty counting can use integer keys.
class DomainCatalog {
public:
    DomainCatalog() = default;

    DomainCatalog(std::string domain_id, std::vector<Choice> choices)
        : domain_id_(std::move(domain_id)), choices_(std::move(choices)) {
        if (choices_.size() < 2) {
            throw DataError("catalog '" + domain_id_ + "' needs at least 2 choices");
        }
        choice_keyword_ids_.resize(choices_.size());
        for (std::size_t c = 0; c < choices_.size(); ++c) {
            auto& ch = choices_[c];
            if (ch.keywords.empty()) {
                throw DataError("choice '" + ch.id + "' in domain '" + domain_id_ +
                                "' has no keywords");
            }
            if (!index_by_id_.emplace(ch.id, static_cast<ChoiceIndex>(c)).second) {
                throw DataError("duplicate choice id '" + ch.id + "' in domain '" +
                                domain_id_ + "'");
            }
            std::vector<Keyword> unique;
            for (auto& kw : ch.keywords) {
                if (std::find(unique.begin(), unique.end(), kw) == unique.end()) {
                    unique.push_back(kw);
                }
            }
            ch.keywords = std::move(unique);
            for (const auto& kw : ch.keywords) {
                auto [it, inserted] =
                    keyword_ids_.emplace(kw.text(), static_cast<KeywordId>(keywords_.size()));
                if (inserted) keywords_.push_back(kw);
                choice_keyword_ids_[c].push_back(it->second);
            }
        }
    }

    const std::string& domain_id() const noexcept { return domain_id_; }
    std::size_t size() const noexcept { return choices_.size(); }
    const Choice& choice(ChoiceIndex i) const { return choices_.at(i); }
    const std::vector<Choice>& choices() const noexcept { return choices_; }

    const std::vector<KeywordId>& keyword_ids(ChoiceIndex i) const {
        return choice_keyword_ids_.at(i);
    }
    std::size_t vocabulary_size() const noexcept { return keywords_.size(); }
    const Keyword& keyword(KeywordId id) const { return keywords_.at(id); }

    bool contains(const std::string& choice_id) const {
        return index_by_id_.count(choice_id) != 0;
    }
    ChoiceIndex index_of(const std::string& choice_id) const {
        auto it = index_by_id_.find(choice_id);
        if (it == index_by_id_.end()) {
            throw DataError("unknown choice id '" + choice_id + "' in domain '" +
                            domain_id_ + "'");
        }
        return it->second;
    }

private:
    std::string domain_id_;
    std::vector<Choice> choices_;
    std::unordered_map<std::string, ChoiceIndex> index_by_id_;
    std::vector<Keyword> keywords_;
    std::unordered_map<std::string, KeywordId> keyword_ids_;
    std::vector<std::vector<KeywordId>> choice_keyword_ids_;
};

struct Action {
    ChoiceIndex choice = 0;
    Timestamp timestamp = 0;

    friend bool operator==(const Action&, const Action&) = default;
};

struct ActionSequence {
    std::string user_id;
    std::string domain_id;
    std::vector<Action> actions;

    std::size_t size() const noexcept { return actions.size(); }
    bool fittable() const noexcept { return actions.size() >= 2; }

    std::vector<ChoiceIndex> choices() const {
        std::vector<ChoiceIndex> out;
        out.reserve(actions.size());
        for (const auto& a : actions) out.push_back(a.choice);
        return out;
    }

    friend bool operator==(const ActionSequence&, const ActionSequence&) = default;
};

/// Stable-sorts by timestamp and bounds-checks every choice index. Sequences
/// with fewer than two actions are returned as-is; callers that fit models
/// check fittable().
inline ActionSequence validate_sequence(ActionSequence seq, const DomainCatalog& catalog) {
    for (const auto& a : seq.actions) {
        if (a.choice >= catalog.size()) {
            throw DataError("choice index " + std::to_string(a.choice) +
                            " out of range for domain '" + catalog.domain_id() +
                            "' with " + std::to_string(catalog.size()) + " choices");
        }
    }
    std::stable_sort(seq.actions.begin(), seq.actions.end(),
                     [](const Action& a, const Action& b) { return a.timestamp < b.timestamp; });
    return seq;
}

struct Hyperparams {
    int K = 9;
    std::vector<double> alpha_s;
    std::vector<double> alpha_t;
    std::vector<double> beta;
    Timestamp tau_seconds = 60 * seconds_per_day;

    /// Symmetric concentrations: alpha for both utility vectors, beta for levels.
    static Hyperparams symmetric(int K, std::size_t M_s, std::size_t M_t, double alpha = 0.1,
                                 double beta = 1.0,
                                 Timestamp tau_seconds = 60 * seconds_per_day) {
        Hyperparams hp;
        hp.K = K;
        hp.alpha_s.assign(M_s, alpha);
        hp.alpha_t.assign(M_t, alpha);
        hp.beta.assign(static_cast<std::size_t>(K), beta);
        hp.tau_seconds = tau_seconds;
        hp.validate();
        return hp;
    }

    void validate() const {
        if (K < 1) throw UsageError("K must be at least 1");
        if (beta.size() != static_cast<std::size_t>(K)) {
            throw UsageError("beta must have length K");
        }
        auto positive = [](const std::vector<double>& v) {
            return std::all_of(v.begin(), v.end(), [](double x) { return x > 0.0; });
        };
        if (!positive(alpha_s) || !positive(alpha_t) || !positive(beta)) {
            throw UsageError("Dirichlet concentrations must be strictly positive");
        }
        if (tau_seconds <= 0) throw UsageError("tau must be positive");
    }
};

}  // namespace cdnst

#endif
