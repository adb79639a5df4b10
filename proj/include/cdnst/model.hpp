#ifndef CDNST_MODEL_HPP
#define CDNST_MODEL_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdnst/dcn.hpp"
#include "cdnst/domain.hpp"
#include "cdnst/random.hpp"

namespace cdnst {

/// Gaussian-shaped agreement between a novelty-seeking level and a choice's
/// normalized novelty rank: exp(-(z - rank/row_max * K)^2).
inline double action_function(int z, std::uint32_t rank, std::uint32_t row_max, int K) {
    const double target = static_cast<double>(rank) / static_cast<double>(row_max) * K;
    const double d = static_cast<double>(z) - target;
    return std::exp(-d * d);
}

/// P(x = o | z, phi, row) for every candidate o. Sums to one.
inline std::vector<double> choice_probabilities(int z, std::span<const double> phi,
                                                std::span<const std::uint32_t> ranks,
                                                std::uint32_t row_max, int K) {
    std::vector<double> p(phi.size());
    double total = 0.0;
    for (std::size_t j = 0; j < phi.size(); ++j) {
        total += p[j] = phi[j] * action_function(z, ranks[j], row_max, K);
    }
    for (double& x : p) x /= total;
    return p;
}

inline double action_likelihood(ChoiceIndex cand, int z, std::span<const double> phi,
                                std::span<const std::uint32_t> ranks, std::uint32_t row_max,
                                int K) {
    double total = 0.0;
    for (std::size_t j = 0; j < phi.size(); ++j) {
        total += phi[j] * action_function(z, ranks[j], row_max, K);
    }
    return phi[cand] * action_function(z, ranks[cand], row_max, K) / total;
}

/// Latent state of one user. Levels are stored 1-based.
struct UserModelState {
    std::vector<double> theta;
    std::vector<double> phi_s;
    std::vector<double> phi_t;
    std::vector<int> z_s;
    std::vector<int> z_t;

    int K() const noexcept { return static_cast<int>(theta.size()); }

    bool valid(double tol = 1e-9) const {
        auto simplex = [tol](const std::vector<double>& v) {
            if (v.empty()) return true;
            double s = 0.0;
            for (double x : v) {
                if (!(x >= 0.0)) return false;
                s += x;
            }
            return std::abs(s - 1.0) <= tol;
        };
        auto levels = [this](const std::vector<int>& z) {
            for (int v : z) {
                if (v < 1 || v > K()) return false;
            }
            return true;
        };
        return !theta.empty() && simplex(theta) && simplex(phi_s) && simplex(phi_t) &&
               levels(z_s) && levels(z_t);
    }
};

struct NstSummary {
    double nst = 1.0;
};

/// Mean level of theta, in [1, K].
inline NstSummary nst(std::span<const double> theta) {
    double m = 0.0;
    for (std::size_t k = 0; k < theta.size(); ++k) m += static_cast<double>(k + 1) * theta[k];
    return {m};
}

struct GenerateOptions {
    std::optional<std::vector<double>> theta;         // fixed shared/source theta instead of a Dirichlet draw
    bool independent_theta = false;                   // target draws its own theta
    Timestamp base_time = 1'500'000'000;
    Timestamp spacing = seconds_per_day;
    Timestamp target_offset = 0;
    double echo_probability = 0.0;                    // copy source action i into target position i
    std::vector<std::optional<ChoiceIndex>> echo_map; // source choice -> target choice
};

struct GeneratedUser {
    ActionSequence source;
    ActionSequence target;
    UserModelState truth;               // truth.theta drives the source domain
    std::vector<double> target_theta;   // equals truth.theta unless independent
};

namespace detail {

inline void generate_domain(const DomainCatalog& catalog, std::span<const double> theta,
                            std::span<const double> phi, int K, std::size_t n,
                            ActionSequence& seq, std::vector<int>& z, Timestamp t0,
                            Timestamp spacing, Rng& rng,
                            const std::vector<ChoiceIndex>* echo_source = nullptr,
                            double echo_probability = 0.0,
                            const std::vector<std::optional<ChoiceIndex>>* echo_map = nullptr) {
    DcnBuilder builder(catalog);
    for (std::size_t i = 0; i < n; ++i) {
        const int level = static_cast<int>(sample_categorical(theta, rng)) + 1;
        ChoiceIndex x = 0;
        bool echoed = false;
        if (echo_source && i < echo_source->size() && echo_probability > 0.0 &&
            uniform01(rng) < echo_probability) {
            const auto& mapped = (*echo_map)[(*echo_source)[i]];
            if (mapped) {
                x = *mapped;
                echoed = true;
            }
        }
        if (!echoed) {
            auto row = builder.current_row();
            auto probs = choice_probabilities(level, phi, row.ranks, row.row_max, K);
            x = static_cast<ChoiceIndex>(sample_categorical(probs, rng));
        }
        builder.push(x);
        z.push_back(level);
        seq.actions.push_back({x, t0 + static_cast<Timestamp>(i) * spacing});
    }
}

}  // namespace detail

/// Forward run of the generative process: theta once, then each domain's
/// utility vector and its level/choice sequence.
inline GeneratedUser generate(const DomainCatalog& catalog_s, const DomainCatalog& catalog_t,
                              const Hyperparams& hp, std::size_t n_s, std::size_t n_t,
                              std::uint64_t seed, const GenerateOptions& opt = {},
                              const std::string& user_id = "u0") {
    hp.validate();
    if (hp.alpha_s.size() != catalog_s.size() || hp.alpha_t.size() != catalog_t.size()) {
        throw UsageError("alpha lengths must match catalog sizes");
    }
    if (opt.echo_probability > 0.0 && opt.echo_map.size() != catalog_s.size()) {
        throw UsageError("echo map must cover every source choice");
    }
    Rng rng(seed);
    GeneratedUser out;
    auto& st = out.truth;
    st.theta = opt.theta ? *opt.theta : sample_dirichlet(hp.beta, rng);
    if (st.theta.size() != static_cast<std::size_t>(hp.K)) {
        throw UsageError("fixed theta must have length K");
    }

    out.source.user_id = out.target.user_id = user_id;
    out.source.domain_id = catalog_s.domain_id();
    out.target.domain_id = catalog_t.domain_id();

    st.phi_s = sample_dirichlet(hp.alpha_s, rng);
    detail::generate_domain(catalog_s, st.theta, st.phi_s, hp.K, n_s, out.source, st.z_s,
                            opt.base_time, opt.spacing, rng);

    out.target_theta = opt.independent_theta ? sample_dirichlet(hp.beta, rng) : st.theta;
    st.phi_t = sample_dirichlet(hp.alpha_t, rng);
    auto src_choices = out.source.choices();
    detail::generate_domain(catalog_t, out.target_theta, st.phi_t, hp.K, n_t, out.target,
                            st.z_t, opt.base_time + opt.target_offset, opt.spacing, rng,
                            &src_choices, opt.echo_probability, &opt.echo_map);
    return out;
}

/// Next-choice distribution after `history`, marginalizing the level under theta.
inline std::vector<double> score_next(std::span<const ChoiceIndex> history,
                                      const DomainCatalog& catalog, std::span<const double> theta,
                                      std::span<const double> phi) {
    if (history.empty()) throw UsageError("score_next: no context (empty history)");
    if (phi.size() != catalog.size()) throw UsageError("score_next: phi length != catalog size");
    const int K = static_cast<int>(theta.size());
    auto row = next_dcn_row(history, catalog);
    std::vector<double> scores(catalog.size(), 0.0);
    for (int z = 1; z <= K; ++z) {
        const double w = theta[static_cast<std::size_t>(z - 1)];
        if (w == 0.0) continue;
        auto p = choice_probabilities(z, phi, row.ranks, row.row_max, K);
        for (std::size_t j = 0; j < p.size(); ++j) scores[j] += w * p[j];
    }
    return scores;
}

}  // namespace cdnst

#endif
