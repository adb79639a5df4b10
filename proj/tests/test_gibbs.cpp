#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "cdnst/gibbs.hpp"
#include "oracles.hpp"

using namespace cdnst;

namespace {

struct Fixture {
    DomainCatalog cat;
    std::vector<ChoiceIndex> choices;
    DcnMatrix dcn;

    Fixture(DomainCatalog c, std::vector<ChoiceIndex> x)
        : cat(std::move(c)), choices(std::move(x)), dcn(build_dcn(choices, cat)) {}
    DomainObservations obs() const { return {choices, &dcn}; }
};

Fixture small_fixture() {
    return Fixture(oracle::catalog_of("d", {{"a"}, {"b"}, {"a", "c"}}), {0, 0, 1, 2, 0, 1});
}

Hyperparams hp_for(int K, std::size_t M_s, std::size_t M_t, double alpha = 0.1) {
    return Hyperparams::symmetric(K, M_s, M_t, alpha);
}

struct GeneratedPair {
    DomainCatalog cs, ct;
    GeneratedUser user;
    std::vector<ChoiceIndex> xs, xt;
    DcnMatrix ds, dt;
};

GeneratedPair generated_pair(std::uint64_t seed, std::size_t n_s, std::size_t n_t, int K = 5) {
    Rng rng(seed);
    auto cs = oracle::random_catalog("A", 12, 10, 3, rng);
    auto ct = oracle::random_catalog("B", 12, 10, 3, rng);
    auto hp = hp_for(K, cs.size(), ct.size());
    auto g = generate(cs, ct, hp, n_s, n_t, seed);
    auto xs = g.source.choices();
    auto xt = g.target.choices();
    auto ds = build_dcn(xs, cs);
    auto dt = build_dcn(xt, ct);
    return {std::move(cs), std::move(ct), std::move(g), std::move(xs), std::move(xt), std::move(ds), std::move(dt)};
}

}  // namespace

TEST(ZConditional, SingleLevelIsCertain) {
    const auto fx = small_fixture();
    const std::vector<double> theta{1.0}, phi{0.2, 0.5, 0.3};
    for (std::size_t i = 0; i < fx.choices.size(); ++i) {
        for (auto mode : {ZMode::exact, ZMode::paper_faithful}) {
            const auto w = z_conditional(i, fx.obs(), theta, phi, mode);
            ASSERT_EQ(w.size(), 1u);
            EXPECT_DOUBLE_EQ(w[0], 1.0);
        }
    }
}

TEST(ZConditional, ExactModeIsNormalizedLikelihoodTimesTheta) {
    const auto fx = small_fixture();
    const std::vector<double> theta{0.1, 0.2, 0.3, 0.4}, phi{0.2, 0.5, 0.3};
    const auto ref = oracle::brute_dcn(fx.cat, fx.choices);
    for (std::size_t i = 1; i < fx.choices.size(); ++i) {
        std::vector<double> expect(4);
        double total = 0.0;
        for (int z = 1; z <= 4; ++z) {
            total += expect[z - 1] = theta[z - 1] * oracle::likelihood(ref[i], phi, z, 4, fx.choices[i]);
        }
        const auto w = z_conditional(i, fx.obs(), theta, phi, ZMode::exact);
        for (int z = 0; z < 4; ++z) EXPECT_NEAR(w[z], expect[z] / total, 1e-12) << "pos " << i;
    }
}

TEST(ZConditional, FirstPositionFollowsTheta) {
    const auto fx = small_fixture();
    const std::vector<double> theta{0.1, 0.2, 0.3, 0.4}, phi{0.2, 0.5, 0.3};
    const auto w = z_conditional(0, fx.obs(), theta, phi, ZMode::exact);
    for (int z = 0; z < 4; ++z) EXPECT_NEAR(w[z], theta[z], 1e-12);
}

TEST(ZConditional, FaithfulModeOmitsRowNormalizer) {
    const auto fx = small_fixture();
    const std::vector<double> theta(3, 1.0 / 3), phi{0.2, 0.5, 0.3};
    const auto ref = oracle::brute_dcn(fx.cat, fx.choices);
    const std::size_t i = 4;
    const auto faithful = z_conditional(i, fx.obs(), theta, phi, ZMode::paper_faithful);
    const auto exact = z_conditional(i, fx.obs(), theta, phi, ZMode::exact);
    // faithful/exact is proportional to D(z) = sum_j phi_j f(z, rank_j)
    std::vector<double> D(3, 0.0);
    const double rmax = *std::max_element(ref[i].begin(), ref[i].end());
    for (int z = 1; z <= 3; ++z) {
        for (std::size_t j = 0; j < phi.size(); ++j) D[z - 1] += phi[j] * oracle::f(z, ref[i][j], rmax, 3);
    }
    for (int z = 1; z < 3; ++z) {
        EXPECT_NEAR((faithful[z] / exact[z]) / (faithful[0] / exact[0]), D[z] / D[0], 1e-10);
    }
}

TEST(ThetaPosterior, ConcentrationCountsBothDomains) {
    const std::vector<double> beta(3, 1.0);
    const std::vector<int> zs{1, 3}, zt{1};
    EXPECT_EQ(theta_posterior_concentration(zs, zt, beta), (std::vector<double>{3, 1, 2}));
    EXPECT_EQ(theta_posterior_concentration({}, zt, beta), (std::vector<double>{2, 1, 1}));
}

TEST(ThetaPosterior, DrawMeanMatchesDirichletMean) {
    const std::vector<double> beta(3, 1.0);
    const std::vector<int> zs{1, 1, 3}, zt;
    Rng rng(17);
    std::vector<double> mean(3, 0.0);
    const int n = 50000;
    for (int s = 0; s < n; ++s) {
        const auto th = sample_theta(zs, zt, beta, rng);
        for (int k = 0; k < 3; ++k) mean[k] += th[k] / n;
    }
    EXPECT_NEAR(mean[0], 0.5, 0.01);
    EXPECT_NEAR(mean[1], 1.0 / 6, 0.01);
    EXPECT_NEAR(mean[2], 1.0 / 3, 0.01);
}

TEST(PhiDirichletKernel, IdentityMoveHasZeroLogRatio) {
    const auto fx = small_fixture();
    DomainLikelihood lik(fx.obs(), 3);
    const std::vector<int> z{1, 2, 3, 1, 2, 3};
    const std::vector<double> alpha(3, 0.5);
    const std::vector<double> lp{std::log(0.2), std::log(0.5), std::log(0.3)};
    EXPECT_NEAR(phi_mh_log_ratio(lik, lp, lp, z, alpha, 1500.0), 0.0, 1e-9);
}

TEST(PhiDirichletKernel, ForwardAndReverseRatiosCancel) {
    const auto fx = small_fixture();
    DomainLikelihood lik(fx.obs(), 3);
    const std::vector<int> z{1, 2, 3, 1, 2, 3};
    const std::vector<double> alpha(3, 0.5);
    Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = sample_dirichlet_log(std::vector<double>(3, 2.0), rng);
        const auto b = sample_dirichlet_log(std::vector<double>(3, 2.0), rng);
        const double r = phi_mh_log_ratio(lik, a, b, z, alpha, 50.0) + phi_mh_log_ratio(lik, b, a, z, alpha, 50.0);
        EXPECT_NEAR(std::exp(r), 1.0, 1e-9);
    }
}

namespace {

/// Posterior mean of phi_0 for M = 2, K = 1 by quadrature over phi_0.
double grid_posterior_mean(const Fixture& fx, const std::vector<double>& alpha) {
    const auto ref = oracle::brute_dcn(fx.cat, fx.choices);
    const int n = 20000;
    double num = 0.0, den = 0.0;
    for (int g = 0; g < n; ++g) {
        const double p = (g + 0.5) / n;
        const std::vector<double> phi{p, 1.0 - p};
        double w = std::pow(p, alpha[0] - 1) * std::pow(1 - p, alpha[1] - 1);
        for (std::size_t i = 1; i < fx.choices.size(); ++i) w *= oracle::likelihood(ref[i], phi, 1, 1, fx.choices[i]);
        num += p * w;
        den += w;
    }
    return num / den;
}

}  // namespace

class PhiGridOracle : public ::testing::TestWithParam<PhiKernel> {};

TEST_P(PhiGridOracle, PosteriorMeanMatchesQuadrature) {
    const Fixture fx(oracle::catalog_of("d", {{"a"}, {"b"}}), {0, 1, 1});
    auto hp = hp_for(1, 2, 2, 1.0);
    const double expect = grid_posterior_mean(fx, hp.alpha_t);
    SamplerConfig cfg;
    cfg.burn_in = 500;
    cfg.samples = 40000;
    cfg.thin = 1;
    cfg.phi_kernel = GetParam();
    cfg.seed = 5;
    const auto res = fit(std::nullopt, fx.obs(), hp, cfg);
    EXPECT_NEAR(res.phi_t[0], expect, 0.02);
}

INSTANTIATE_TEST_SUITE_P(Kernels, PhiGridOracle, ::testing::Values(PhiKernel::gamma_walk, PhiKernel::dirichlet),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(GibbsSampler, LevelMarginalsMatchEnumeration) {
    const Fixture fx(oracle::catalog_of("d", {{"a"}, {"b"}}), {0, 1, 1});
    const int K = 2;
    const std::vector<double> phi{0.35, 0.65};
    auto hp = hp_for(K, 2, 2);
    const auto expect = oracle::enumerate_z_marginals(fx.cat, fx.choices, phi, hp.beta);
    SamplerConfig cfg;
    cfg.update_phi = false;
    cfg.seed = 77;
    GibbsSampler sampler(std::nullopt, fx.obs(), hp, cfg);
    sampler.set_phi_target(phi);
    const int sweeps = 20000;
    std::vector<std::vector<double>> got(3, std::vector<double>(K, 0.0));
    for (int s = 0; s < sweeps; ++s) {
        sampler.sweep();
        const auto st = sampler.state();
        for (std::size_t i = 0; i < 3; ++i) got[i][st.z_t[i] - 1] += 1.0 / sweeps;
    }
    for (std::size_t i = 0; i < 3; ++i) {
        for (int k = 0; k < K; ++k) EXPECT_NEAR(got[i][k], expect[i][k], 0.03) << "pos " << i << " level " << k + 1;
    }
}

TEST(GibbsSampler, DeterministicForSeed) {
    const auto p = generated_pair(3, 40, 15);
    const auto hp = hp_for(5, p.cs.size(), p.ct.size());
    SamplerConfig cfg;
    cfg.burn_in = 30;
    cfg.samples = 20;
    cfg.seed = 42;
    const auto a = fit(DomainObservations{p.xs, &p.ds}, {p.xt, &p.dt}, hp, cfg);
    const auto b = fit(DomainObservations{p.xs, &p.ds}, {p.xt, &p.dt}, hp, cfg);
    EXPECT_EQ(a.theta, b.theta);
    EXPECT_EQ(a.phi_s, b.phi_s);
    EXPECT_EQ(a.phi_t, b.phi_t);
    cfg.seed = 43;
    const auto c = fit(DomainObservations{p.xs, &p.ds}, {p.xt, &p.dt}, hp, cfg);
    EXPECT_NE(a.theta, c.theta);
}

TEST(GibbsSampler, RetainedStatesAreValid) {
    const auto p = generated_pair(4, 30, 12);
    const auto hp = hp_for(5, p.cs.size(), p.ct.size());
    SamplerConfig cfg;
    cfg.burn_in = 20;
    cfg.samples = 15;
    cfg.thin = 3;
    cfg.keep_states = true;
    const auto res = fit(DomainObservations{p.xs, &p.ds}, {p.xt, &p.dt}, hp, cfg);
    ASSERT_EQ(res.retained_states.size(), 15u);
    for (const auto& st : res.retained_states) {
        EXPECT_TRUE(st.valid());
        EXPECT_EQ(st.z_s.size(), p.xs.size());
        EXPECT_EQ(st.z_t.size(), p.xt.size());
    }
    EXPECT_NEAR(std::accumulate(res.theta.begin(), res.theta.end(), 0.0), 1.0, 1e-12);
    EXPECT_NEAR(std::accumulate(res.phi_t.begin(), res.phi_t.end(), 0.0), 1.0, 1e-12);
    EXPECT_NEAR(res.nst_estimate, nst(res.theta).nst, 1e-12);
    EXPECT_GE(res.nst_estimate, 1.0);
    EXPECT_LE(res.nst_estimate, 5.0);
    EXPECT_EQ(res.diagnostics.log_joint.size(), 20u + 15u * 3u);
    for (double lj : res.diagnostics.log_joint) EXPECT_TRUE(std::isfinite(lj));
}

TEST(GibbsSampler, GammaWalkAcceptanceInsideUnitInterval) {
    const auto p = generated_pair(5, 60, 20);
    const auto hp = hp_for(5, p.cs.size(), p.ct.size());
    SamplerConfig cfg;
    cfg.burn_in = 50;
    cfg.samples = 50;
    const auto res = fit(DomainObservations{p.xs, &p.ds}, {p.xt, &p.dt}, hp, cfg);
    EXPECT_GT(res.diagnostics.acceptance_t(), 0.0);
    EXPECT_LT(res.diagnostics.acceptance_t(), 1.0);
    EXPECT_GT(res.diagnostics.acceptance_s(), 0.0);
    EXPECT_LT(res.diagnostics.acceptance_s(), 1.0);
    // one proposal per component per sweep
    EXPECT_EQ(res.diagnostics.phi_proposals_t, 150u * p.ct.size());
}

TEST(GibbsSampler, DirichletKernelProposesOncePerSweep) {
    const auto p = generated_pair(5, 60, 20);
    const auto hp = hp_for(5, p.cs.size(), p.ct.size());
    SamplerConfig cfg;
    cfg.burn_in = 50;
    cfg.samples = 50;
    cfg.phi_kernel = PhiKernel::dirichlet;
    const auto res = fit(DomainObservations{p.xs, &p.ds}, {p.xt, &p.dt}, hp, cfg);
    EXPECT_EQ(res.diagnostics.phi_proposals_t, 150u);
    EXPECT_EQ(res.diagnostics.phi_proposals_s, 150u);
    EXPECT_LE(res.diagnostics.acceptance_t(), 1.0);
}

TEST(GibbsSampler, WithoutSourceIsSingleDomainModel) {
    const auto p = generated_pair(6, 30, 20);
    const auto hp = hp_for(5, p.cs.size(), p.ct.size());
    SamplerConfig cfg;
    cfg.burn_in = 20;
    cfg.samples = 10;
    cfg.keep_states = true;
    const auto res = fit(std::nullopt, {p.xt, &p.dt}, hp, cfg);
    EXPECT_TRUE(res.phi_s.empty());
    EXPECT_EQ(res.theta.size(), 5u);
    EXPECT_EQ(res.diagnostics.phi_proposals_s, 0u);
    for (const auto& st : res.retained_states) EXPECT_TRUE(st.z_s.empty());
}

TEST(GibbsSampler, SourceActionsTightenThetaPosterior) {
    const auto p = generated_pair(7, 300, 15);
    const auto hp = hp_for(5, p.cs.size(), p.ct.size());
    SamplerConfig cfg;
    cfg.burn_in = 200;
    cfg.samples = 200;
    cfg.keep_states = true;
    auto spread = [](const FitResult& r) {
        double m = 0.0, v = 0.0;
        for (const auto& st : r.retained_states) m += nst(st.theta).nst / r.retained_states.size();
        for (const auto& st : r.retained_states) v += std::pow(nst(st.theta).nst - m, 2) / r.retained_states.size();
        return v;
    };
    const auto cross = fit(DomainObservations{p.xs, &p.ds}, {p.xt, &p.dt}, hp, cfg);
    const auto single = fit(std::nullopt, {p.xt, &p.dt}, hp, cfg);
    EXPECT_LT(spread(cross), spread(single));
}

TEST(GibbsSampler, RejectsBadInputs) {
    const auto fx = small_fixture();
    const auto hp = hp_for(3, 3, 3);
    SamplerConfig cfg;
    const std::vector<ChoiceIndex> one{0};
    const auto d1 = build_dcn(one, fx.cat);
    EXPECT_THROW(GibbsSampler(std::nullopt, {one, &d1}, hp, cfg), DataError);
    EXPECT_THROW(GibbsSampler(DomainObservations{one, &d1}, fx.obs(), hp, cfg), DataError);
    const auto wrong = hp_for(3, 3, 4);
    EXPECT_THROW(GibbsSampler(std::nullopt, fx.obs(), wrong, cfg), UsageError);
    cfg.thin = 0;
    EXPECT_THROW(GibbsSampler(std::nullopt, fx.obs(), hp, cfg), UsageError);
    EXPECT_THROW(parse_zmode("fast"), UsageError);
    EXPECT_EQ(parse_phi_kernel("dirichlet"), PhiKernel::dirichlet);
}
