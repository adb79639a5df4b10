#ifndef CDNST_RELATEDNESS_HPP
#define CDNST_RELATEDNESS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cdnst/domain.hpp"
#include "cdnst/random.hpp"

namespace cdnst {

/// Keyword vectors, either loaded from a file or synthesized by hashing the
/// keyword text into a fixed unit vector.
class EmbeddingTable {
public:
    static constexpr std::size_t default_dimension = 50;

    explicit EmbeddingTable(std::size_t dimension = default_dimension)
        : dimension_(dimension), provider_("table") {}

    static EmbeddingTable hash_fallback(std::size_t dimension = default_dimension) {
        EmbeddingTable t(dimension);
        t.hashed_ = true;
        t.provider_ = "hash-fallback";
        return t;
    }

    /// `keyword<TAB>f1 f2 ... fD`, one line per keyword. The first line fixes D.
    static EmbeddingTable load(std::istream& in, const std::string& provider = "file") {
        EmbeddingTable t(0);
        t.provider_ = provider;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty() || line[0] == '#') continue;
            auto tab = line.find('\t');
            if (tab == std::string::npos) {
                throw DataError("embedding line " + std::to_string(line_no) + ": missing tab");
            }
            std::vector<double> v;
            std::istringstream values(line.substr(tab + 1));
            double x;
            while (values >> x) v.push_back(x);
            if (!values.eof()) {
                throw DataError("embedding line " + std::to_string(line_no) + ": bad number");
            }
            if (t.dimension_ == 0) t.dimension_ = v.size();
            try {
                t.insert(normalize_keyword(line.substr(0, tab)).text(), std::move(v));
            } catch (const DataError& e) {
                throw DataError("embedding line " + std::to_string(line_no) + ": " + e.what());
            }
        }
        return t;
    }

    void insert(const std::string& keyword, std::vector<double> v) {
        if (v.size() != dimension_ || v.empty()) {
            throw DataError("embedding for '" + keyword + "' has dimension " +
                            std::to_string(v.size()) + ", expected " + std::to_string(dimension_));
        }
        if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) {
            throw DataError("embedding for '" + keyword + "' is the zero vector");
        }
        vectors_[keyword] = std::move(v);
    }

    std::optional<std::vector<double>> lookup(const std::string& keyword) const {
        if (hashed_) return hashed_vector(keyword);
        auto it = vectors_.find(keyword);
        if (it == vectors_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t dimension() const noexcept { return dimension_; }
    const std::string& provider() const noexcept { return provider_; }
    bool is_hash_fallback() const noexcept { return hashed_; }

private:
    std::vector<double> hashed_vector(const std::string& keyword) const {
        std::uint64_t state = fnv1a64(keyword);
        auto next_uniform = [&state] {
            state = splitmix64(state);
            return (static_cast<double>(state >> 11) + 0.5) * 0x1.0p-53;
        };
        std::vector<double> v(dimension_);
        double norm = 0.0;
        for (auto& x : v) {
            const double u1 = next_uniform();
            const double u2 = next_uniform();
            x = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
            norm += x * x;
        }
        norm = std::sqrt(norm);
        for (auto& x : v) x /= norm;
        return v;
    }

    std::size_t dimension_;
    bool hashed_ = false;
    std::string provider_;
    std::unordered_map<std::string, std::vector<double>> vectors_;
};

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Cosine of the two keywords' vectors; nothing (and `missing` incremented)
/// when either keyword has no vector.
inline std::optional<double> keyword_sim(const std::string& w1, const std::string& w2,
                                         const EmbeddingTable& table,
                                         std::uint64_t* missing = nullptr) {
    auto v1 = table.lookup(w1);
    auto v2 = table.lookup(w2);
    if (!v1 || !v2) {
        if (missing) ++*missing;
        return std::nullopt;
    }
    return cosine(*v1, *v2);
}

struct KeywordEvent {
    std::string keyword;
    Timestamp timestamp = 0;
};

using KeywordStream = std::vector<KeywordEvent>;

/// Every keyword of every action, in chronological order.
inline KeywordStream keyword_stream(const ActionSequence& seq, const DomainCatalog& catalog) {
    KeywordStream out;
    for (const auto& a : seq.actions) {
        for (const auto& kw : catalog.choice(a.choice).keywords) out.push_back({kw.text(), a.timestamp});
    }
    std::stable_sort(out.begin(), out.end(), [](const KeywordEvent& x, const KeywordEvent& y) {
        return x.timestamp < y.timestamp;
    });
    return out;
}

struct UserRelatedness {
    double sim = 0.0;
    std::uint64_t pairs = 0;
    std::uint64_t missing = 0;
};

/// Mean cosine over every (a, b) with b.timestamp in (a.timestamp, a.timestamp + tau].
/// `b` must be sorted by timestamp.
inline UserRelatedness user_relatedness(const KeywordStream& a, const KeywordStream& b,
                                        const EmbeddingTable& table, Timestamp tau) {
    std::unordered_map<std::string, std::optional<std::vector<double>>> cache;
    auto vec = [&](const std::string& w) -> const std::optional<std::vector<double>>& {
        auto it = cache.find(w);
        if (it == cache.end()) it = cache.emplace(w, table.lookup(w)).first;
        return it->second;
    };
    UserRelatedness r;
    double total = 0.0;
    for (const auto& ea : a) {
        auto lo = std::upper_bound(b.begin(), b.end(), ea.timestamp,
                                   [](Timestamp t, const KeywordEvent& e) { return t < e.timestamp; });
        auto hi = std::upper_bound(lo, b.end(), ea.timestamp + tau,
                                   [](Timestamp t, const KeywordEvent& e) { return t < e.timestamp; });
        const auto& va = vec(ea.keyword);
        for (auto it = lo; it != hi; ++it) {
            const auto& vb = vec(it->keyword);
            if (!va || !vb) {
                ++r.missing;
                continue;
            }
            total += cosine(*va, *vb);
            ++r.pairs;
        }
    }
    if (r.pairs > 0) r.sim = total / static_cast<double>(r.pairs);
    return r;
}

struct UserStreams {
    std::string user_id;
    KeywordStream a;
    KeywordStream b;
};

struct RelatednessReport {
    struct PerUser {
        double sim_ab = 0.0;
        double sim_ba = 0.0;
        std::uint64_t pairs_ab = 0;
        std::uint64_t pairs_ba = 0;
    };
    std::map<std::string, PerUser> per_user;
    double sim_ab = 0.0;
    double sim_ba = 0.0;
    std::size_t users_with_pairs_ab = 0;
    std::size_t users_with_pairs_ba = 0;
    std::size_t user_count = 0;
    std::uint64_t missing = 0;
    Timestamp tau = 0;
    std::string provider;
};

/// Both directions per user; aggregates are unweighted means over users
/// that have at least one pair in that direction.
inline RelatednessReport domain_relatedness(const std::vector<UserStreams>& users,
                                            const EmbeddingTable& table, Timestamp tau) {
    RelatednessReport rep;
    rep.tau = tau;
    rep.provider = table.provider();
    rep.user_count = users.size();
    double sum_ab = 0.0, sum_ba = 0.0;
    for (const auto& u : users) {
        const auto ab = user_relatedness(u.a, u.b, table, tau);
        const auto ba = user_relatedness(u.b, u.a, table, tau);
        rep.per_user[u.user_id] = {ab.sim, ba.sim, ab.pairs, ba.pairs};
        rep.missing += ab.missing + ba.missing;
        if (ab.pairs > 0) {
            sum_ab += ab.sim;
            ++rep.users_with_pairs_ab;
        }
        if (ba.pairs > 0) {
            sum_ba += ba.sim;
            ++rep.users_with_pairs_ba;
        }
    }
    if (rep.users_with_pairs_ab) rep.sim_ab = sum_ab / static_cast<double>(rep.users_with_pairs_ab);
    if (rep.users_with_pairs_ba) rep.sim_ba = sum_ba / static_cast<double>(rep.users_with_pairs_ba);
    return rep;
}

enum class Direction { a_to_b, b_to_a };

/// Users whose chosen direction strictly beats the reverse.
inline std::set<std::string> select_transfer_users(const RelatednessReport& report, Direction d) {
    std::set<std::string> out;
    for (const auto& [user, v] : report.per_user) {
        const bool pick = d == Direction::a_to_b ? v.sim_ab > v.sim_ba : v.sim_ba > v.sim_ab;
        if (pick) out.insert(user);
    }
    return out;
}

}  // namespace cdnst

#endif
