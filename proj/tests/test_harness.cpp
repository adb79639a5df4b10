#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "cdnst/harness.hpp"
#include "oracles.hpp"

using namespace cdnst;

namespace {

ActionSequence seq(const std::string& user, const std::string& domain, std::vector<ChoiceIndex> choices,
                   Timestamp start = 0, Timestamp step = 10) {
    ActionSequence s{user, domain, {}};
    for (std::size_t i = 0; i < choices.size(); ++i) {
        s.actions.push_back({choices[i], start + static_cast<Timestamp>(i) * step});
    }
    return s;
}

Population toy_population(std::vector<std::vector<ChoiceIndex>> targets, std::size_t M = 3) {
    std::vector<std::vector<std::string>> kws;
    for (std::size_t j = 0; j < M; ++j) kws.push_back({"k" + std::to_string(j)});
    Population pop{oracle::catalog_of("A", kws), oracle::catalog_of("B", kws), {}, {}};
    for (std::size_t u = 0; u < targets.size(); ++u) {
        const std::string id = "u" + std::to_string(u);
        pop.users.push_back({id, seq(id, "A", {0, 1, 2}), seq(id, "B", targets[u])});
    }
    return pop;
}

EvalProtocol protocol(std::size_t holdout) {
    EvalProtocol p;
    p.holdout_len = holdout;
    return p;
}

PopulationSpec small_spec() {
    PopulationSpec s;
    s.users = 6;
    s.M_s = 10;
    s.M_t = 10;
    s.N_s = 30;
    s.N_t = 12;
    s.K = 4;
    s.vocabulary = 12;
    return s;
}

SamplerConfig quick_cfg() {
    SamplerConfig c;
    c.burn_in = 10;
    c.samples = 10;
    return c;
}

}  // namespace

TEST(Evaluate, MethodsNeverSeeHeldOutActions) {
    auto pop = toy_population({{0, 1, 2, 0, 1, 2, 0, 1}, {2, 2, 1, 1, 0, 0, 2}});
    std::vector<std::size_t> train_sizes, revealed_sizes;
    const Method canary{"canary", [&](const UserSplit& s) -> UserScorer {
                            train_sizes.push_back(s.train.size());
                            const auto& full = pop.users[s.user_index].target.actions;
                            for (std::size_t i = 0; i < s.train.size(); ++i) EXPECT_EQ(s.train.actions[i], full[i]);
                            return [&](std::span<const Action> revealed) {
                                revealed_sizes.push_back(revealed.size());
                                return std::vector<double>(3, 0.0);
                            };
                        }};
    evaluate_next_item(pop, {canary}, protocol(3));
    EXPECT_EQ(train_sizes, (std::vector<std::size_t>{5, 4}));
    EXPECT_EQ(revealed_sizes, (std::vector<std::size_t>{5, 6, 7, 4, 5, 6}));
}

TEST(Evaluate, OccurrenceFrequencyHandComputed) {
    // u0: prefix {0,0,1,2} -> counts 2,1,1; next 0 ranks first
    // u1: prefix {1,2,2,0} -> counts 1,1,2; next 1 ranks third (ties by index)
    // u2: prefix {2,2,2,1} -> next 1 ranks second
    auto pop = toy_population({{0, 0, 1, 2, 0}, {1, 2, 2, 0, 1}, {2, 2, 2, 1, 1}, {0, 1}, {1, 2}});
    const auto rep = evaluate_next_item(pop, {of_method()}, protocol(1));
    EXPECT_EQ(rep.skipped_users, 2u);
    const auto* row = rep.find("of");
    ASSERT_NE(row, nullptr);
    EXPECT_EQ(row->users, 3u);
    EXPECT_NEAR(row->mrr, (1.0 + 1.0 / 3 + 0.5) / 3, 1e-15);
    EXPECT_NEAR(row->ndcg, (1.0 + 0.5 + 1.0 / std::log2(3.0)) / 3, 1e-15);
    EXPECT_NEAR(row->prec_standard, 1.0 / 3, 1e-15);
    EXPECT_NEAR(row->prec_literal, (1.0 + 1.0 / 3 + 0.5) / 3, 1e-15);
    EXPECT_EQ(row->dataset, "A->B");
}

TEST(Evaluate, RandomScorerMeetsExpectedReciprocalRank) {
    const std::size_t M = 20;
    std::vector<std::vector<ChoiceIndex>> targets;
    Rng rng(2);
    for (int u = 0; u < 300; ++u) {
        std::vector<ChoiceIndex> t(10);
        for (auto& c : t) c = static_cast<ChoiceIndex>(rng() % M);
        targets.push_back(t);
    }
    auto pop = toy_population(targets, M);
    const auto rep = evaluate_next_item(pop, {random_method(9)}, protocol(5));
    double harmonic = 0.0;
    for (std::size_t p = 1; p <= M; ++p) harmonic += 1.0 / p;
    EXPECT_NEAR(rep.find("random")->mrr, harmonic / M, 0.02);
}

TEST(Evaluate, OracleIsPerfectUnderBothScopes) {
    auto pop = synth_population(small_spec(), 3);
    EvalProtocol p = protocol(4);
    auto rep = evaluate_next_item(pop, {oracle_method(&pop)}, p);
    EXPECT_DOUBLE_EQ(rep.find("oracle")->mrr, 1.0);
    EXPECT_DOUBLE_EQ(rep.find("oracle")->ndcg, 1.0);
    p.scope = {CandidateScope::Kind::sampled, 5};
    rep = evaluate_next_item(pop, {oracle_method(&pop)}, p);
    EXPECT_DOUBLE_EQ(rep.find("oracle")->mrr, 1.0);
    EXPECT_EQ(rep.config.at("candidates"), "sampled(5)");
}

TEST(Evaluate, SampledCandidatesContainTruthAndAreDistinct) {
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const ChoiceIndex truth = static_cast<ChoiceIndex>(rng() % 30);
        const auto c = detail::candidate_set({CandidateScope::Kind::sampled, 7}, 30, truth, rng);
        ASSERT_EQ(c.size(), 8u);
        EXPECT_EQ(c.back(), truth);
        EXPECT_EQ(std::set<ChoiceIndex>(c.begin(), c.end()).size(), 8u);
    }
    const auto all = detail::candidate_set({CandidateScope::Kind::sampled, 100}, 30, 3, rng);
    EXPECT_EQ(all.size(), 30u);
}

TEST(Evaluate, ThrowingMethodCountsAsFailureOnly) {
    auto pop = toy_population({{0, 1, 2, 0}, {1, 1, 2, 0}});
    const Method flaky{"flaky", [](const UserSplit& s) -> UserScorer {
                           if (s.user_id == "u1") throw DataError("boom");
                           return [](std::span<const Action>) { return std::vector<double>(3, 1.0); };
                       }};
    const auto rep = evaluate_next_item(pop, {flaky, of_method()}, protocol(1));
    EXPECT_EQ(rep.failures.at("flaky"), 1u);
    EXPECT_EQ(rep.find("flaky")->users, 1u);
    EXPECT_EQ(rep.find("of")->users, 2u);
}

TEST(Evaluate, ParallelMatchesSerial) {
    auto pop = synth_population(small_spec(), 8);
    const auto hp = population_hyperparams(pop, 4);
    const std::vector<Method> methods{of_method(), mc_u_method(), model_method(ModelKind::cdnst, hp, quick_cfg())};
    EvalProtocol p = protocol(3);
    const auto serial = evaluate_next_item(pop, methods, p);
    p.jobs = 3;
    const auto parallel = evaluate_next_item(pop, methods, p);
    ASSERT_EQ(serial.per_user.size(), parallel.per_user.size());
    for (std::size_t i = 0; i < serial.per_user.size(); ++i) {
        EXPECT_EQ(serial.per_user[i].mrr, parallel.per_user[i].mrr);
        EXPECT_EQ(serial.per_user[i].ndcg, parallel.per_user[i].ndcg);
    }
}

TEST(Aggregate, MacroAverageInRequestedOrder) {
    std::vector<UserMetrics> pu{{"d", "b", "u1", 1.0, 0.5, 0.2, 0.1}, {"d", "a", "u1", 0.2, 0.2, 0.0, 0.0},
                                {"d", "b", "u2", 0.0, 0.1, 0.0, 0.3}};
    const auto rows = aggregate_rows(pu, {{"d", "b"}, {"d", "a"}, {"d", "z"}});
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0].method, "b");
    EXPECT_EQ(rows[0].users, 2u);
    EXPECT_DOUBLE_EQ(rows[0].mrr, 0.5);
    EXPECT_DOUBLE_EQ(rows[0].prec_literal, 0.2);
    EXPECT_TRUE(rows[2].empty);
}

TEST(FitPopulation, SkipsShortUsersAndFeedsFittedMethod) {
    auto pop = toy_population({{0, 1, 2, 0, 1, 2}, {1, 2}});
    const auto hp = population_hyperparams(pop, 3);
    const auto fits = fit_population(pop, ModelKind::cdnst, hp, quick_cfg(), 3, 1);
    EXPECT_EQ(fits.fits.size(), 1u);
    EXPECT_EQ(fits.skipped, (std::vector<std::string>{"u1"}));
    // identical to fitting inside the evaluation loop
    const auto inline_fit = fit_user(ModelKind::cdnst, &pop.users[0].source,
                                     std::span<const Action>(pop.users[0].target.actions.data(), 3),
                                     pop.source_catalog, pop.target_catalog, hp, quick_cfg(), 0);
    EXPECT_EQ(fits.fits.at("u0").theta, inline_fit.fit.theta);
    const auto a = evaluate_next_item(pop, {fitted_method("cdnst", ModelKind::cdnst, &fits.fits)}, protocol(3));
    const auto b = evaluate_next_item(pop, {model_method(ModelKind::cdnst, hp, quick_cfg())}, protocol(3));
    EXPECT_EQ(a.find("cdnst")->mrr, b.find("cdnst")->mrr);
}

TEST(RefitMethod, FitsOnEveryRevealedPrefix) {
    auto pop = toy_population({{0, 1, 2, 0, 1, 2, 1}});
    const auto hp = population_hyperparams(pop, 3);
    const auto cfg = quick_cfg();
    const auto rep = evaluate_next_item(pop, {refit_method(ModelKind::cdnst, hp, cfg, "step")}, protocol(2));
    ASSERT_EQ(rep.find("step")->users, 1u);
    // second held-out step: the refit sees six actions
    UserSplit split;
    split.user_id = "u0";
    split.source = &pop.users[0].source;
    split.source_catalog = &pop.source_catalog;
    split.target_catalog = &pop.target_catalog;
    const auto scorer = refit_method(ModelKind::cdnst, hp, cfg).prepare(split);
    const auto revealed = std::span<const Action>(pop.users[0].target.actions.data(), 6);
    SamplerConfig step = cfg;
    step.seed = derive_seed(cfg.seed, 6);
    const auto uf = fit_user(ModelKind::cdnst, &pop.users[0].source, revealed, pop.source_catalog,
                             pop.target_catalog, hp, step, 0);
    EXPECT_EQ(scorer(revealed), score_next(detail::choices_of(revealed), pop.target_catalog, uf.fit.theta,
                                           uf.fit.phi_t));
}

TEST(FitUser, CdnstWithoutUsableSourceEqualsNsm) {
    auto pop = toy_population({{0, 1, 2, 0, 1}});
    const ActionSequence lone = seq("u0", "A", {1});
    const auto hp = population_hyperparams(pop, 3);
    const auto t = std::span<const Action>(pop.users[0].target.actions);
    const auto c = fit_user(ModelKind::cdnst, &lone, t, pop.source_catalog, pop.target_catalog, hp, quick_cfg(), 2);
    const auto n = fit_user(ModelKind::nsm, &lone, t, pop.source_catalog, pop.target_catalog, hp, quick_cfg(), 2);
    EXPECT_EQ(c.fit.theta, n.fit.theta);
    EXPECT_TRUE(c.fit.phi_s.empty());
    EXPECT_THROW(parse_model_kind("lstm"), UsageError);
}

TEST(PooledScorer, IgnoresLaterSourceActions) {
    auto pop = toy_population({{0, 1, 2, 0, 1}});
    pop.users[0].source = seq("u0", "A", {2, 2, 2}, 1000);
    UserSplit split;
    split.source = &pop.users[0].source;
    split.source_catalog = &pop.source_catalog;
    split.target_catalog = &pop.target_catalog;
    const std::vector<double> theta{0.3, 0.3, 0.4}, phi{0.2, 0.3, 0.5};
    const auto scorer = pooled_scorer(split, theta, phi);
    const auto& t = pop.users[0].target.actions;
    const auto got = scorer(std::span<const Action>(t.data(), 3));
    const auto plain = score_next(std::vector<ChoiceIndex>{0, 1, 2}, pop.target_catalog, theta, phi);
    EXPECT_EQ(got, plain);
}

TEST(Population, SwapAndRestrict) {
    auto pop = synth_population(small_spec(), 5);
    const auto sw = swap_domains(pop);
    EXPECT_EQ(sw.label(), "B->A");
    EXPECT_EQ(sw.users[2].source, pop.users[2].target);
    EXPECT_EQ(sw.truth[2].theta_source, pop.truth[2].theta_target);
    const auto sub = restrict_users(pop, {"u1", "u4", "nobody"});
    ASSERT_EQ(sub.users.size(), 2u);
    EXPECT_EQ(sub.users[1].user_id, "u4");
    EXPECT_EQ(sub.truth[1].z_t, pop.truth[4].z_t);
}

TEST(Shift, MovesSourceEarlierOnly) {
    auto pop = toy_population({{0, 1, 2}});
    const auto shifted = shift_source_timestamps(pop, 25);
    EXPECT_EQ(shifted.users[0].source.actions[0].timestamp, -25);
    EXPECT_EQ(shifted.users[0].source.actions[2].timestamp, -5);
    EXPECT_EQ(shifted.users[0].target, pop.users[0].target);
    EXPECT_THROW(shift_source_timestamps(pop, 0), UsageError);
    EXPECT_THROW(shift_source_timestamps(pop, -3), UsageError);
}

TEST(Shift, RaisesReverseDirectionRelatedness) {
    auto spec = small_spec();
    spec.echo = 1.0;
    spec.M_t = spec.M_s;
    spec.spacing_days = 60;
    spec.lag_days = 30;
    auto pop = synth_population(spec, 6);
    const auto table = EmbeddingTable::hash_fallback();
    const Timestamp tau = 60 * seconds_per_day;
    const auto before = population_relatedness(pop, table, tau);
    EXPECT_GT(before.sim_ab, before.sim_ba);
    const auto rev = shift_source_timestamps(swap_domains(pop), tau);
    const auto after = population_relatedness(rev, table, tau);
    EXPECT_GT(after.sim_ab, before.sim_ba);
}

TEST(RunPersonalized, SplitsUsersByPreferredDirection) {
    auto pop = synth_population(small_spec(), 7);
    RelatednessReport rep;
    rep.per_user["u0"] = {0.9, 0.1, 1, 1};
    rep.per_user["u1"] = {0.9, 0.1, 1, 1};
    rep.per_user["u2"] = {0.1, 0.9, 1, 1};
    rep.per_user["u3"] = {0.5, 0.5, 1, 1};
    const auto hp = population_hyperparams(pop, 4);
    const auto out = run_personalized(pop, rep, hp, quick_cfg(), protocol(3));
    ASSERT_EQ(out.rows.size(), 2u);
    EXPECT_EQ(out.rows[0].dataset, "A->B");
    EXPECT_EQ(out.rows[0].method, "cdnst_p");
    EXPECT_EQ(out.rows[0].users, 2u);
    EXPECT_EQ(out.rows[1].dataset, "B->A");
    EXPECT_EQ(out.rows[1].users, 1u);
    for (const auto& m : out.per_user) EXPECT_NE(m.user_id, "u3");
}

TEST(PooledNsm, DriftsFromTargetTraitWhenDomainsDisagree) {
    PopulationSpec spec;
    spec.users = 30;
    spec.M_s = 20;
    spec.M_t = 20;
    spec.N_s = 150;
    spec.N_t = 20;
    spec.overlap = 1.0;
    spec.theta_regime = ThetaRegime::independent;
    const auto pop = synth_population(spec, 8201);
    const auto hp = population_hyperparams(pop, 9);
    SamplerConfig cfg;
    cfg.burn_in = 200;
    cfg.samples = 100;
    const auto pooled = fit_population(pop, ModelKind::nsm_u, hp, cfg, 0, 1);
    const auto plain = fit_population(pop, ModelKind::nsm, hp, cfg, 0, 1);
    double err_pooled = 0.0, err_plain = 0.0;
    for (std::size_t u = 0; u < pop.users.size(); ++u) {
        const double truth = nst(pop.truth[u].theta_target).nst;
        err_pooled += std::abs(pooled.fits.at(pop.users[u].user_id).nst_estimate - truth);
        err_plain += std::abs(plain.fits.at(pop.users[u].user_id).nst_estimate - truth);
    }
    EXPECT_TRUE(pooled.fell_back.empty());
    EXPECT_GT(err_pooled, err_plain);
}

TEST(RunPersonalized, DirectionalSelectionDoesNotHurt) {
    // half the users: shared trait, source leads; other half: unrelated
    // traits, target leads. Same catalogs since they depend on the seed only.
    PopulationSpec spec;
    spec.users = 50;
    spec.M_s = 30;
    spec.M_t = 30;
    spec.N_s = 100;
    spec.N_t = 30;
    spec.echo = 0.5;
    spec.spacing_days = 60;
    spec.lag_days = 30;
    spec.user_prefix = "f";
    const auto fwd = synth_population(spec, 8101);
    spec.theta_regime = ThetaRegime::independent;
    spec.lag_days = -30;
    spec.user_prefix = "r";
    const auto rev = synth_population(spec, 8101);
    Population pop{fwd.source_catalog, fwd.target_catalog, {}, {}};
    for (std::size_t u = 0; u < 50; ++u) {
        const auto& from = u < 25 ? fwd : rev;
        pop.users.push_back(from.users[u]);
        pop.truth.push_back(from.truth[u]);
    }
    const auto rel = population_relatedness(pop, EmbeddingTable::hash_fallback(), 60 * seconds_per_day);
    const auto chosen = select_transfer_users(rel, Direction::a_to_b);
    EXPECT_EQ(chosen.size(), 25u);
    for (const auto& id : chosen) EXPECT_EQ(id[0], 'f') << id;

    const auto hp = population_hyperparams(pop, 9);
    SamplerConfig cfg;
    cfg.burn_in = 200;
    cfg.samples = 100;
    const auto fits = fit_population(pop, ModelKind::cdnst, hp, cfg, 5, 1);
    const auto method = fitted_method("cdnst", ModelKind::cdnst, &fits.fits);
    const double all = evaluate_next_item(pop, {method}, protocol(5)).find("cdnst")->mrr;
    const double personal = evaluate_next_item(restrict_users(pop, chosen), {method}, protocol(5)).find("cdnst")->mrr;
    EXPECT_GE(personal, all);
}

TEST(LongTail, FractionAboveThresholds) {
    auto pop = toy_population({{0, 1, 0, 1}, {0, 1, 2, 0}, {2}});
    const auto t = long_tail_stats(pop, {0, 1, 2});
    EXPECT_EQ(t.domains, (std::vector<std::string>{"A", "B"}));
    // target distinct pairs: 2, 3, 0
    EXPECT_NEAR(t.fractions[1][0], 2.0 / 3, 1e-15);
    EXPECT_NEAR(t.fractions[1][1], 2.0 / 3, 1e-15);
    EXPECT_NEAR(t.fractions[1][2], 1.0 / 3, 1e-15);
    // every source is {0,1,2}: 2 pairs
    EXPECT_EQ(t.fractions[0], (std::vector<double>{1.0, 1.0, 0.0}));
    EXPECT_EQ(distinct_transitions(pop.users[1].target), oracle::distinct_pairs({0, 1, 2, 0}));
}

TEST(Synth, DeterministicAndWellFormed) {
    const auto spec = small_spec();
    const auto a = synth_population(spec, 11);
    const auto b = synth_population(spec, 11);
    ASSERT_EQ(a.users.size(), 6u);
    for (std::size_t u = 0; u < a.users.size(); ++u) {
        EXPECT_EQ(a.users[u].source, b.users[u].source);
        EXPECT_EQ(a.users[u].target, b.users[u].target);
        EXPECT_EQ(a.users[u].source.size(), spec.N_s);
        EXPECT_EQ(a.users[u].target.size(), spec.N_t);
        EXPECT_EQ(a.truth[u].z_t.size(), spec.N_t);
    }
    EXPECT_EQ(a.users[0].user_id, "u0");
    EXPECT_EQ(a.source_catalog.choice(3).id, "s3");
    EXPECT_EQ(a.target_catalog.choice(3).id, "t3");
    EXPECT_NE(synth_population(spec, 12).users[0].source, a.users[0].source);
}

TEST(Synth, ZeroOverlapSharesNoKeywords) {
    auto spec = small_spec();
    spec.overlap = 0.0;
    const auto pop = synth_population(spec, 1);
    std::set<std::string> src;
    for (std::size_t j = 0; j < pop.source_catalog.size(); ++j) {
        for (const auto& k : pop.source_catalog.choice(j).keywords) src.insert(k.text());
    }
    for (std::size_t j = 0; j < pop.target_catalog.size(); ++j) {
        for (const auto& k : pop.target_catalog.choice(j).keywords) EXPECT_FALSE(src.count(k.text()));
    }
}

TEST(Synth, IndependentRegimeDecouplesTraits) {
    auto spec = small_spec();
    spec.users = 300;
    spec.N_s = 2;
    spec.N_t = 2;
    spec.theta_regime = ThetaRegime::independent;
    const auto pop = synth_population(spec, 4);
    std::vector<double> a, b;
    for (const auto& t : pop.truth) {
        a.push_back(nst(t.theta_source).nst);
        b.push_back(nst(t.theta_target).nst);
    }
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / a.size();
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / b.size();
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    EXPECT_LT(std::abs(sab / std::sqrt(saa * sbb)), 0.2);
    spec.theta_regime = ThetaRegime::shared;
    const auto shared = synth_population(spec, 4);
    for (const auto& t : shared.truth) EXPECT_EQ(t.theta_source, t.theta_target);
}

TEST(Synth, RejectsBadSpecs) {
    auto spec = small_spec();
    spec.overlap = 1.5;
    EXPECT_THROW(synth_population(spec, 1), UsageError);
    spec = small_spec();
    spec.M_t = 1;
    EXPECT_THROW(synth_population(spec, 1), std::exception);
    EXPECT_THROW(parse_theta_regime("coupled"), UsageError);
}
