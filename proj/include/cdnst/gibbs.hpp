#ifndef CDNST_GIBBS_HPP
#define CDNST_GIBBS_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdnst/dcn.hpp"
#include "cdnst/domain.hpp"
#include "cdnst/model.hpp"
#include "cdnst/random.hpp"

namespace cdnst {

/// How the per-position level conditional is formed.
///   paper_faithful: theta_z * phi_x * f(z, rank_x)
///   exact:          the same divided by the row normalizer sum_j phi_j f(z, rank_j)
enum class ZMode { paper_faithful, exact };

inline const char* to_string(ZMode m) { return m == ZMode::exact ? "exact" : "paper_faithful"; }
inline ZMode parse_zmode(const std::string& s) {
    if (s == "exact") return ZMode::exact;
    if (s == "paper_faithful") return ZMode::paper_faithful;
    throw UsageError("unknown z conditional mode '" + s + "'");
}

inline constexpr double phi_proposal_floor = 1e-3;

/// Metropolis kernel for the utility vector.
///   gamma_walk: per-component Gaussian random walk on log g, where phi = g / sum(g)
///               and g_j ~ Gamma(alpha_j) reproduces the Dirichlet prior exactly.
///   dirichlet:  one joint proposal phi' ~ Dirichlet(c * phi + floor).
enum class PhiKernel { gamma_walk, dirichlet };

inline const char* to_string(PhiKernel k) { return k == PhiKernel::dirichlet ? "dirichlet" : "gamma_walk"; }
inline PhiKernel parse_phi_kernel(const std::string& s) {
    if (s == "dirichlet") return PhiKernel::dirichlet;
    if (s == "gamma_walk") return PhiKernel::gamma_walk;
    throw UsageError("unknown phi kernel '" + s + "'");
}

struct SamplerConfig {
    int burn_in = 500;
    int samples = 200;
    int thin = 2;
    std::optional<double> phi_proposal_concentration;  // unset: 500 * M
    ZMode z_mode = ZMode::exact;
    PhiKernel phi_kernel = PhiKernel::gamma_walk;
    std::uint64_t seed = 1;
    bool keep_states = false;
    bool update_phi = true;

    void validate() const {
        if (burn_in < 0) throw UsageError("burn_in must be >= 0");
        if (samples < 1) throw UsageError("samples must be >= 1");
        if (thin < 1) throw UsageError("thin must be >= 1");
        if (phi_proposal_concentration && !(*phi_proposal_concentration > 0.0)) {
            throw UsageError("phi proposal concentration must be > 0");
        }
    }
    double proposal_concentration(std::size_t M) const {
        return phi_proposal_concentration ? *phi_proposal_concentration
                                          : 500.0 * static_cast<double>(M);
    }
};

struct FitDiagnostics {
    std::uint64_t phi_proposals_s = 0, phi_accepted_s = 0;
    std::uint64_t phi_proposals_t = 0, phi_accepted_t = 0;
    std::vector<double> log_joint;  // one entry per sweep

    double acceptance_s() const {
        return phi_proposals_s ? static_cast<double>(phi_accepted_s) / phi_proposals_s : 0.0;
    }
    double acceptance_t() const {
        return phi_proposals_t ? static_cast<double>(phi_accepted_t) / phi_proposals_t : 0.0;
    }
};

struct FitResult {
    std::vector<double> theta;
    std::vector<double> phi_s;  // empty when fitted without a source domain
    std::vector<double> phi_t;
    double nst_estimate = 1.0;
    std::vector<UserModelState> retained_states;
    FitDiagnostics diagnostics;
};

/// One domain's observations: the chosen indices and their DCN.
struct DomainObservations {
    std::span<const ChoiceIndex> choices;
    const DcnMatrix* dcn = nullptr;
};

/// Likelihood pieces for one domain with the action function tabulated per
/// row over (level, rank). Row normalizers D_i(z) = sum_j phi_j f(z, rank_ij)
/// are obtained from per-rank utility sums.
class DomainLikelihood {
public:
    DomainLikelihood(DomainObservations obs, int K) : obs_(obs), K_(K) {
        const auto& dcn = *obs.dcn;
        if (dcn.rows() != obs.choices.size()) {
            throw UsageError("DCN rows do not match sequence length");
        }
        offsets_.resize(dcn.rows() + 1, 0);
        for (std::size_t i = 0; i < dcn.rows(); ++i) offsets_[i + 1] = offsets_[i] + dcn.row_max(i);
        ftab_.resize(offsets_.back() * static_cast<std::size_t>(K));
        for (std::size_t i = 0; i < dcn.rows(); ++i) {
            const auto rmax = dcn.row_max(i);
            for (int z = 1; z <= K; ++z) {
                for (std::uint32_t r = 1; r <= rmax; ++r) {
                    ftab_[tab_index(i, z, r)] = action_function(z, r, rmax, K);
                }
            }
        }
    }

    std::size_t length() const noexcept { return obs_.choices.size(); }
    std::size_t choices_count() const noexcept { return obs_.dcn->cols(); }
    ChoiceIndex chosen(std::size_t i) const { return obs_.choices[i]; }
    int K() const noexcept { return K_; }

    std::uint32_t rank(std::size_t i, ChoiceIndex j) const { return obs_.dcn->rank(i, j); }
    double f(std::size_t i, int z, std::uint32_t rank) const { return ftab_[tab_index(i, z, rank)]; }
    double f_chosen(std::size_t i, int z) const { return f(i, z, obs_.dcn->rank(i, chosen(i))); }

    /// Per-row, per-rank sums of phi (flat, indexed by offsets).
    std::vector<double> rank_sums(std::span<const double> phi) const {
        std::vector<double> g(offsets_.back(), 0.0);
        const auto& dcn = *obs_.dcn;
        for (std::size_t i = 0; i < dcn.rows(); ++i) {
            auto row = dcn.row(i);
            double* gi = g.data() + offsets_[i];
            for (std::size_t j = 0; j < row.size(); ++j) gi[row[j] - 1] += phi[j];
        }
        return g;
    }

    double normalizer(std::size_t i, int z, std::span<const double> sums) const {
        double d = 0.0;
        const auto rmax = obs_.dcn->row_max(i);
        const double* gi = sums.data() + offsets_[i];
        for (std::uint32_t r = 1; r <= rmax; ++r) d += ftab_[tab_index(i, z, r)] * gi[r - 1];
        return d;
    }

    /// Unnormalized level weights at position i.
    std::vector<double> z_weights(std::size_t i, std::span<const double> theta,
                                  std::span<const double> sums, ZMode mode) const {
        // phi_x is constant in z and dropped; it may underflow to zero
        std::vector<double> w(static_cast<std::size_t>(K_));
        for (int z = 1; z <= K_; ++z) {
            double v = theta[static_cast<std::size_t>(z - 1)] * f_chosen(i, z);
            if (mode == ZMode::exact) v /= normalizer(i, z, sums);
            w[static_cast<std::size_t>(z - 1)] = v;
        }
        return w;
    }

    /// log of prod_{i>=2} phi_x f / D_i(z_i) * Dirichlet(phi | alpha).
    double phi_log_target(std::span<const double> log_phi, std::span<const double> sums,
                          std::span<const int> z, std::span<const double> alpha) const {
        double lp = dirichlet_log_pdf(log_phi, alpha);
        for (std::size_t i = 1; i < length(); ++i) {
            const int zi = z[i];
            lp += log_phi[chosen(i)] + std::log(f_chosen(i, zi)) -
                  std::log(normalizer(i, zi, sums));
        }
        return lp;
    }

    /// sum_{i>=2} log P(x_i | z_i, phi).
    double log_likelihood(std::span<const double> log_phi, std::span<const double> sums,
                          std::span<const int> z) const {
        double ll = 0.0;
        for (std::size_t i = 1; i < length(); ++i) {
            ll += log_phi[chosen(i)] + std::log(f_chosen(i, z[i])) -
                  std::log(normalizer(i, z[i], sums));
        }
        return ll;
    }

private:
    std::size_t tab_index(std::size_t i, int z, std::uint32_t r) const {
        return offsets_[i] * static_cast<std::size_t>(K_) +
               static_cast<std::size_t>(z - 1) * obs_.dcn->row_max(i) + (r - 1);
    }

    DomainObservations obs_;
    int K_;
    std::vector<std::size_t> offsets_;
    std::vector<double> ftab_;
};

/// Normalized conditional over levels 1..K for position `pos`.
inline std::vector<double> z_conditional(std::size_t pos, DomainObservations obs,
                                         std::span<const double> theta,
                                         std::span<const double> phi, ZMode mode) {
    DomainLikelihood lik(obs, static_cast<int>(theta.size()));
    auto sums = lik.rank_sums(phi);
    auto w = lik.z_weights(pos, theta, sums, mode);
    double total = 0.0;
    for (double x : w) total += x;
    for (double& x : w) x /= total;
    return w;
}

inline int sample_z(std::size_t pos, DomainObservations obs, std::span<const double> theta,
                    std::span<const double> phi, ZMode mode, Rng& rng) {
    auto w = z_conditional(pos, obs, theta, phi, mode);
    return static_cast<int>(sample_categorical(w, rng)) + 1;
}

/// beta' = beta + level counts pooled over both domains.
inline std::vector<double> theta_posterior_concentration(std::span<const int> z_s,
                                                         std::span<const int> z_t,
                                                         std::span<const double> beta) {
    std::vector<double> b(beta.begin(), beta.end());
    for (int z : z_s) b[static_cast<std::size_t>(z - 1)] += 1.0;
    for (int z : z_t) b[static_cast<std::size_t>(z - 1)] += 1.0;
    return b;
}

inline std::vector<double> sample_theta(std::span<const int> z_s, std::span<const int> z_t,
                                        std::span<const double> beta, Rng& rng) {
    auto b = theta_posterior_concentration(z_s, z_t, beta);
    return sample_dirichlet(b, rng);
}

inline std::vector<double> phi_proposal_concentration(std::span<const double> phi, double c) {
    std::vector<double> a(phi.size());
    for (std::size_t j = 0; j < phi.size(); ++j) a[j] = c * phi[j] + phi_proposal_floor;
    return a;
}

/// log MH acceptance ratio for moving from `cur` to `prop` (both given as
/// log-coordinates), including the Dirichlet proposal asymmetry.
inline double phi_mh_log_ratio(const DomainLikelihood& lik, std::span<const double> log_cur,
                               std::span<const double> log_prop, std::span<const int> z,
                               std::span<const double> alpha, double c) {
    std::vector<double> cur(log_cur.size()), prop(log_prop.size());
    for (std::size_t j = 0; j < cur.size(); ++j) {
        cur[j] = std::exp(log_cur[j]);
        prop[j] = std::exp(log_prop[j]);
    }
    const auto sums_cur = lik.rank_sums(cur);
    const auto sums_prop = lik.rank_sums(prop);
    const double target = lik.phi_log_target(log_prop, sums_prop, z, alpha) -
                          lik.phi_log_target(log_cur, sums_cur, z, alpha);
    const double q_back = dirichlet_log_pdf(log_cur, phi_proposal_concentration(prop, c));
    const double q_fwd = dirichlet_log_pdf(log_prop, phi_proposal_concentration(cur, c));
    return target + q_back - q_fwd;
}

struct PhiStep {
    std::vector<double> log_phi;
    bool accepted = false;
};

/// One Metropolis-Hastings move on the utility vector.
inline PhiStep sample_phi(const DomainLikelihood& lik, std::span<const double> log_phi,
                          std::span<const int> z, std::span<const double> alpha, double c,
                          Rng& rng) {
    std::vector<double> phi(log_phi.size());
    for (std::size_t j = 0; j < phi.size(); ++j) phi[j] = std::exp(log_phi[j]);
    auto log_prop = sample_dirichlet_log(phi_proposal_concentration(phi, c), rng);
    const double log_ratio = phi_mh_log_ratio(lik, log_phi, log_prop, z, alpha, c);
    const double u = uniform01(rng);
    if (std::isfinite(log_ratio) && std::log(u) < log_ratio) return {std::move(log_prop), true};
    return {std::vector<double>(log_phi.begin(), log_phi.end()), false};
}

/// Componentwise Metropolis sweep over y = log g (phi = softmax(y)). The
/// prior on each y_j is the log of a Gamma(alpha_j, 1) variable; the
/// likelihood only sees the normalized vector. Proposal scale for component j
/// is 2/sqrt(alpha_j + n_j) with n_j its count among scored positions.
/// Returns the number of accepted component moves.
inline std::size_t sample_phi_gamma_walk(const DomainLikelihood& lik, std::vector<double>& log_g,
                                         std::span<const int> z, std::span<const double> alpha,
                                         Rng& rng) {
    const std::size_t M = log_g.size();
    const std::size_t N = lik.length();
    std::vector<double> g(M);
    for (std::size_t j = 0; j < M; ++j) g[j] = std::exp(log_g[j]);
    const auto sums = lik.rank_sums(g);
    std::vector<double> denom(N);
    std::vector<double> counts(M, 0.0);
    for (std::size_t i = 1; i < N; ++i) {
        denom[i] = lik.normalizer(i, z[i], sums);
        counts[lik.chosen(i)] += 1.0;
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    std::size_t accepted = 0;
    for (std::size_t j = 0; j < M; ++j) {
        const double step = 2.0 / std::sqrt(alpha[j] + counts[j]);
        const double y_new = log_g[j] + step * normal(rng);
        const double g_new = std::exp(y_new);
        const double delta = g_new - g[j];
        double log_ratio = (alpha[j] + counts[j]) * (y_new - log_g[j]) - delta;
        for (std::size_t i = 1; i < N; ++i) {
            const double d = denom[i] + delta * lik.f(i, z[i], lik.rank(i, static_cast<ChoiceIndex>(j)));
            log_ratio -= std::log(d) - std::log(denom[i]);
        }
        if (std::isfinite(log_ratio) && std::log(uniform01(rng)) < log_ratio) {
            for (std::size_t i = 1; i < N; ++i) {
                denom[i] += delta * lik.f(i, z[i], lik.rank(i, static_cast<ChoiceIndex>(j)));
            }
            log_g[j] = y_new;
            g[j] = g_new;
            ++accepted;
        }
    }
    return accepted;
}

/// Pointwise Gibbs sampler over one user's levels, shared theta and
/// per-domain utilities. The target domain is mandatory; without a source it
/// is the single-domain model.
class GibbsSampler {
public:
    GibbsSampler(std::optional<DomainObservations> source, DomainObservations target,
                 const Hyperparams& hp, const SamplerConfig& cfg)
        : hp_(hp), cfg_(cfg), rng_(cfg.seed) {
        hp.validate();
        cfg.validate();
        if (target.choices.size() < 2) throw DataError("unfittable target sequence (N < 2)");
        if (source && source->choices.size() < 2) {
            throw DataError("unfittable source sequence (N < 2)");
        }
        if (target.dcn == nullptr || target.dcn->cols() != hp.alpha_t.size()) {
            throw UsageError("target DCN width must equal alpha_t length");
        }
        target_.emplace(target, hp.K);
        if (source) {
            if (source->dcn == nullptr || source->dcn->cols() != hp.alpha_s.size()) {
                throw UsageError("source DCN width must equal alpha_s length");
            }
            source_.emplace(*source, hp.K);
        }

        set_log_theta(sample_dirichlet_log(hp.beta, rng_));
        if (source_) source_->init(hp.alpha_s, hp.K, rng_);
        target_->init(hp.alpha_t, hp.K, rng_);
    }

    void sweep() {
        if (source_) {
            sweep_levels(*source_);
            draw_theta();
            if (cfg_.update_phi) step_phi(*source_, hp_.alpha_s, diag_.phi_proposals_s, diag_.phi_accepted_s);
        }
        sweep_levels(*target_);
        draw_theta();
        if (cfg_.update_phi) step_phi(*target_, hp_.alpha_t, diag_.phi_proposals_t, diag_.phi_accepted_t);
        diag_.log_joint.push_back(log_joint());
    }

    FitResult run() {
        const int total = cfg_.burn_in + cfg_.samples * cfg_.thin;
        FitResult res;
        std::vector<double> theta_sum(theta_.size(), 0.0);
        std::vector<double> phi_s_sum(source_ ? source_->phi.size() : 0, 0.0);
        std::vector<double> phi_t_sum(target_->phi.size(), 0.0);
        int retained = 0;
        for (int s = 0; s < total; ++s) {
            sweep();
            if (!std::isfinite(diag_.log_joint.back())) {
                throw NumericalError("log joint became non-finite at sweep " + std::to_string(s));
            }
            if (s < cfg_.burn_in || (s - cfg_.burn_in + 1) % cfg_.thin != 0) continue;
            ++retained;
            add_into(theta_sum, theta_);
            if (source_) add_into(phi_s_sum, source_->phi);
            add_into(phi_t_sum, target_->phi);
            if (cfg_.keep_states) res.retained_states.push_back(state());
        }
        res.theta = normalized_mean(theta_sum, retained);
        if (source_) res.phi_s = normalized_mean(phi_s_sum, retained);
        res.phi_t = normalized_mean(phi_t_sum, retained);
        res.nst_estimate = nst(res.theta).nst;
        res.diagnostics = diag_;
        return res;
    }

    UserModelState state() const {
        UserModelState st;
        st.theta = theta_;
        st.phi_t = target_->phi;
        st.z_t = target_->z;
        if (source_) {
            st.phi_s = source_->phi;
            st.z_s = source_->z;
        }
        return st;
    }

    void set_phi_source(std::span<const double> phi) { source_.value().set_phi(phi); }
    void set_phi_target(std::span<const double> phi) { target_->set_phi(phi); }
    void set_theta(std::span<const double> theta) {
        std::vector<double> lt(theta.size());
        for (std::size_t k = 0; k < theta.size(); ++k) lt[k] = std::log(theta[k]);
        set_log_theta(std::move(lt));
    }

    double log_joint() const {
        double lj = dirichlet_log_pdf(log_theta_, hp_.beta);
        if (source_) lj += source_->log_joint(log_theta_, hp_.alpha_s);
        lj += target_->log_joint(log_theta_, hp_.alpha_t);
        return lj;
    }

    const FitDiagnostics& diagnostics() const noexcept { return diag_; }

private:
    struct Chain {
        DomainLikelihood lik;
        std::vector<double> log_g;  // unnormalized log utilities
        std::vector<double> log_phi;
        std::vector<double> phi;
        std::vector<double> sums;
        std::vector<int> z;

        Chain(DomainObservations obs, int K) : lik(obs, K) {}

        void init(std::span<const double> alpha, int K, Rng& rng) {
            std::vector<double> lg(alpha.size());
            for (std::size_t j = 0; j < alpha.size(); ++j) lg[j] = sample_log_gamma(alpha[j], rng);
            set_log_g(std::move(lg));
            z.resize(lik.length());
            for (auto& v : z) {
                v = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(K));
            }
        }
        void set_log_g(std::vector<double> lg) {
            log_g = std::move(lg);
            const double norm = log_sum_exp(log_g);
            log_phi.resize(log_g.size());
            for (std::size_t j = 0; j < log_g.size(); ++j) log_phi[j] = log_g[j] - norm;
            refresh_phi();
        }
        void set_log_phi(std::vector<double> lp) {
            log_g = lp;
            log_phi = std::move(lp);
            refresh_phi();
        }
        void refresh_phi() {
            phi.resize(log_phi.size());
            double total = 0.0;
            for (std::size_t j = 0; j < phi.size(); ++j) total += phi[j] = std::exp(log_phi[j]);
            for (double& x : phi) x /= total;
            sums = lik.rank_sums(phi);
        }
        void set_phi(std::span<const double> p) {
            std::vector<double> lp(p.size());
            for (std::size_t j = 0; j < p.size(); ++j) lp[j] = std::log(p[j]);
            set_log_phi(std::move(lp));
        }
        double log_joint(std::span<const double> log_theta, std::span<const double> alpha) const {
            double lj = dirichlet_log_pdf(log_phi, alpha);
            for (int v : z) lj += log_theta[static_cast<std::size_t>(v - 1)];
            return lj + lik.log_likelihood(log_phi, sums, z);
        }
    };

    void sweep_levels(Chain& c) {
        for (std::size_t i = 0; i < c.lik.length(); ++i) {
            auto w = c.lik.z_weights(i, theta_, c.sums, cfg_.z_mode);
            c.z[i] = static_cast<int>(sample_categorical(w, rng_)) + 1;
        }
    }

    void draw_theta() {
        std::span<const int> zs;
        if (source_) zs = source_->z;
        auto b = theta_posterior_concentration(zs, target_->z, hp_.beta);
        set_log_theta(sample_dirichlet_log(b, rng_));
    }

    void set_log_theta(std::vector<double> lt) {
        log_theta_ = std::move(lt);
        theta_.resize(log_theta_.size());
        double total = 0.0;
        for (std::size_t k = 0; k < theta_.size(); ++k) total += theta_[k] = std::exp(log_theta_[k]);
        for (double& x : theta_) x /= total;
    }

    void step_phi(Chain& c, std::span<const double> alpha, std::uint64_t& proposals,
                  std::uint64_t& accepted) {
        if (cfg_.phi_kernel == PhiKernel::gamma_walk) {
            auto lg = c.log_g;
            const auto moved = sample_phi_gamma_walk(c.lik, lg, c.z, alpha, rng_);
            proposals += lg.size();
            accepted += moved;
            if (moved) c.set_log_g(std::move(lg));
            return;
        }
        const double conc = cfg_.proposal_concentration(c.phi.size());
        auto step = sample_phi(c.lik, c.log_phi, c.z, alpha, conc, rng_);
        ++proposals;
        if (step.accepted) {
            ++accepted;
            c.set_log_phi(std::move(step.log_phi));
        }
    }

    static void add_into(std::vector<double>& acc, std::span<const double> v) {
        for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += v[k];
    }
    static std::vector<double> normalized_mean(std::vector<double> sum, int n) {
        double total = 0.0;
        for (double& x : sum) total += x /= n;
        for (double& x : sum) x /= total;
        return sum;
    }

    Hyperparams hp_;
    SamplerConfig cfg_;
    Rng rng_;
    std::vector<double> theta_;
    std::vector<double> log_theta_;
    std::optional<Chain> source_;
    std::optional<Chain> target_;
    FitDiagnostics diag_;
};

/// Fits one user. `source` absent gives the single-domain model.
inline FitResult fit(std::optional<DomainObservations> source, DomainObservations target,
                     const Hyperparams& hp, const SamplerConfig& cfg) {
    GibbsSampler sampler(source, target, hp, cfg);
    return sampler.run();
}

}  // namespace cdnst

#endif
