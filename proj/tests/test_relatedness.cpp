#include <gtest/gtest.h>

#include <sstream>

#include "cdnst/relatedness.hpp"
#include "oracles.hpp"

using namespace cdnst;

namespace {

EmbeddingTable two_d_table() {
    EmbeddingTable t(2);
    t.insert("x", {1.0, 0.0});
    t.insert("y", {0.0, 1.0});
    t.insert("xy", {1.0, 1.0});
    return t;
}

KeywordStream stream(std::vector<std::pair<std::string, Timestamp>> v) {
    KeywordStream s;
    for (auto& [k, t] : v) s.push_back({k, t});
    return s;
}

}  // namespace

TEST(EmbeddingTable, LoadParsesAndNormalizesKeys) {
    std::istringstream in("# comment\nWill Smith\t1 0 0\nx\t0 1 0\n");
    const auto t = EmbeddingTable::load(in);
    EXPECT_EQ(t.dimension(), 3u);
    EXPECT_TRUE(t.lookup("will_smith").has_value());
    EXPECT_FALSE(t.lookup("nope").has_value());
}

TEST(EmbeddingTable, LoadRejectsMalformedLines) {
    std::istringstream no_tab("x 1 2\n");
    EXPECT_THROW(EmbeddingTable::load(no_tab), DataError);
    std::istringstream bad_number("x\t1 abc\n");
    EXPECT_THROW(EmbeddingTable::load(bad_number), DataError);
    std::istringstream ragged("x\t1 2\ny\t1 2 3\n");
    EXPECT_THROW(EmbeddingTable::load(ragged), DataError);
    std::istringstream zero("x\t0 0\n");
    EXPECT_THROW(EmbeddingTable::load(zero), DataError);
}

TEST(EmbeddingTable, HashFallbackDeterministicUnitVectors) {
    const auto t = EmbeddingTable::hash_fallback();
    const auto a = t.lookup("science_fiction");
    const auto b = t.lookup("science_fiction");
    ASSERT_TRUE(a && b);
    EXPECT_EQ(*a, *b);
    EXPECT_EQ(a->size(), 50u);
    double n = 0.0;
    for (double x : *a) n += x * x;
    EXPECT_NEAR(n, 1.0, 1e-12);
    EXPECT_NEAR(cosine(*a, *a), 1.0, 1e-12);
    EXPECT_LT(std::abs(cosine(*a, *t.lookup("drama"))), 0.6);
}

TEST(KeywordSim, CosineAndMissingCount) {
    const auto t = two_d_table();
    EXPECT_NEAR(*keyword_sim("x", "xy", t), std::sqrt(0.5), 1e-15);
    EXPECT_NEAR(*keyword_sim("x", "y", t), 0.0, 1e-15);
    std::uint64_t missing = 0;
    EXPECT_FALSE(keyword_sim("x", "nope", t, &missing).has_value());
    EXPECT_EQ(missing, 1u);
}

TEST(KeywordStream, ExpandsKeywordsChronologically) {
    const auto cat = oracle::catalog_of("d", {{"a", "b"}, {"c"}});
    ActionSequence seq{"u", "d", {{1, 5}, {0, 9}}};
    const auto s = keyword_stream(seq, cat);
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(s[0].keyword, "c");
    EXPECT_EQ(s[1].keyword, "a");
    EXPECT_EQ(s[2].timestamp, 9);
}

TEST(UserRelatedness, HalfOpenWindow) {
    const auto t = two_d_table();
    const auto a = stream({{"x", 10}});
    // same time excluded, t + tau included, beyond excluded
    const auto b = stream({{"y", 10}, {"x", 15}, {"xy", 20}, {"y", 21}});
    const auto r = user_relatedness(a, b, t, 10);
    EXPECT_EQ(r.pairs, 2u);
    EXPECT_NEAR(r.sim, (1.0 + std::sqrt(0.5)) / 2, 1e-15);
}

TEST(UserRelatedness, NoPairsGivesZero) {
    const auto t = two_d_table();
    const auto r = user_relatedness(stream({{"x", 100}}), stream({{"x", 50}}), t, 10);
    EXPECT_EQ(r.pairs, 0u);
    EXPECT_EQ(r.sim, 0.0);
}

TEST(UserRelatedness, MatchesBruteForceLoop) {
    const auto t = EmbeddingTable::hash_fallback(8);
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        KeywordStream a, b;
        for (int i = 0; i < 20; ++i) a.push_back({"k" + std::to_string(rng() % 6), static_cast<Timestamp>(rng() % 100)});
        for (int i = 0; i < 20; ++i) b.push_back({"k" + std::to_string(rng() % 6), static_cast<Timestamp>(rng() % 100)});
        std::stable_sort(b.begin(), b.end(), [](auto& x, auto& y) { return x.timestamp < y.timestamp; });
        double total = 0.0;
        std::uint64_t n = 0;
        for (const auto& ea : a) {
            for (const auto& eb : b) {
                if (eb.timestamp > ea.timestamp && eb.timestamp <= ea.timestamp + 15) {
                    total += cosine(*t.lookup(ea.keyword), *t.lookup(eb.keyword));
                    ++n;
                }
            }
        }
        const auto r = user_relatedness(a, b, t, 15);
        EXPECT_EQ(r.pairs, n);
        if (n) {
            EXPECT_NEAR(r.sim, total / n, 1e-12);
        }
    }
}

TEST(UserRelatedness, MissingVectorsCountedAndSkipped) {
    const auto t = two_d_table();
    const auto r = user_relatedness(stream({{"x", 0}}), stream({{"nope", 1}, {"y", 2}}), t, 5);
    EXPECT_EQ(r.pairs, 1u);
    EXPECT_EQ(r.missing, 1u);
}

TEST(DomainRelatedness, AveragesOverUsersWithPairs) {
    const auto t = two_d_table();
    std::vector<UserStreams> users{
        {"u1", stream({{"x", 0}}), stream({{"x", 1}})},
        {"u2", stream({{"x", 0}}), stream({{"y", 1}})},
        {"u3", stream({{"x", 0}}), stream({{"y", 100}})},
    };
    const auto rep = domain_relatedness(users, t, 10);
    EXPECT_EQ(rep.users_with_pairs_ab, 2u);
    EXPECT_NEAR(rep.sim_ab, 0.5, 1e-15);
    EXPECT_EQ(rep.users_with_pairs_ba, 0u);
    EXPECT_EQ(rep.sim_ba, 0.0);
    EXPECT_EQ(rep.user_count, 3u);
    EXPECT_EQ(rep.tau, 10);
}

TEST(SelectTransferUsers, StrictComparison) {
    RelatednessReport rep;
    rep.per_user["a"] = {0.5, 0.2, 1, 1};
    rep.per_user["b"] = {0.1, 0.3, 1, 1};
    rep.per_user["c"] = {0.4, 0.4, 1, 1};
    EXPECT_EQ(select_transfer_users(rep, Direction::a_to_b), (std::set<std::string>{"a"}));
    EXPECT_EQ(select_transfer_users(rep, Direction::b_to_a), (std::set<std::string>{"b"}));
}
