#ifndef CDNST_HARNESS_HPP
#define CDNST_HARNESS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cdnst/baselines.hpp"
#include "cdnst/dcn.hpp"
#include "cdnst/domain.hpp"
#include "cdnst/gibbs.hpp"
#include "cdnst/metrics.hpp"
#include "cdnst/model.hpp"
#include "cdnst/parallel.hpp"
#include "cdnst/random.hpp"
#include "cdnst/relatedness.hpp"

namespace cdnst {

struct UserData {
    std::string user_id;
    ActionSequence source;
    ActionSequence target;
};

struct GroundTruth {
    std::vector<double> theta_source;
    std::vector<double> theta_target;
    std::vector<double> phi_s;
    std::vector<double> phi_t;
    std::vector<int> z_s;
    std::vector<int> z_t;
};

/// Users with coupled source/target sequences over two catalogs. `truth` is
/// either empty or parallel to `users`.
struct Population {
    DomainCatalog source_catalog;
    DomainCatalog target_catalog;
    std::vector<UserData> users;
    std::vector<GroundTruth> truth;

    std::string label() const {
        return source_catalog.domain_id() + "->" + target_catalog.domain_id();
    }
};

inline Hyperparams population_hyperparams(const Population& pop, int K = 9, double alpha = 0.1,
                                          double beta = 1.0,
                                          Timestamp tau = 60 * seconds_per_day) {
    return Hyperparams::symmetric(K, pop.source_catalog.size(), pop.target_catalog.size(), alpha,
                                  beta, tau);
}

/// Source and target exchanged, for evaluating the reverse transfer direction.
inline Population swap_domains(const Population& pop) {
    Population out;
    out.source_catalog = pop.target_catalog;
    out.target_catalog = pop.source_catalog;
    out.users.reserve(pop.users.size());
    for (const auto& u : pop.users) out.users.push_back({u.user_id, u.target, u.source});
    for (const auto& t : pop.truth) {
        out.truth.push_back({t.theta_target, t.theta_source, t.phi_t, t.phi_s, t.z_t, t.z_s});
    }
    return out;
}

inline Population restrict_users(const Population& pop, const std::set<std::string>& keep) {
    Population out;
    out.source_catalog = pop.source_catalog;
    out.target_catalog = pop.target_catalog;
    for (std::size_t i = 0; i < pop.users.size(); ++i) {
        if (!keep.count(pop.users[i].user_id)) continue;
        out.users.push_back(pop.users[i]);
        if (!pop.truth.empty()) out.truth.push_back(pop.truth[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation

struct CandidateScope {
    enum class Kind { full_catalog, sampled };
    Kind kind = Kind::full_catalog;
    std::size_t negatives = 100;

    std::string describe() const {
        return kind == Kind::full_catalog ? "full" : "sampled(" + std::to_string(negatives) + ")";
    }
};

struct EvalProtocol {
    std::size_t holdout_len = 5;
    CandidateScope scope;
    std::uint64_t seed = 1;
    std::size_t k_ndcg = 15;
    std::size_t k_prec = 3;
    PrecisionMode precision_mode = PrecisionMode::standard;
    std::size_t jobs = 1;

    void validate() const {
        if (holdout_len < 1) throw UsageError("holdout length must be >= 1");
        if (k_ndcg < 1 || k_prec < 1) throw UsageError("metric cutoffs must be >= 1");
    }
};

/// What a method may see when preparing for one user: the full source
/// sequence and the target prefix before the held-out tail.
struct UserSplit {
    std::size_t user_index = 0;
    std::string user_id;
    const ActionSequence* source = nullptr;
    ActionSequence train;
    const DomainCatalog* source_catalog = nullptr;
    const DomainCatalog* target_catalog = nullptr;
};

/// Scores every target choice given the revealed target history.
using UserScorer = std::function<std::vector<double>(std::span<const Action> revealed)>;

struct Method {
    std::string name;
    std::function<UserScorer(const UserSplit&)> prepare;
};

struct UserMetrics {
    std::string dataset;
    std::string method;
    std::string user_id;
    double mrr = 0.0;
    double ndcg = 0.0;
    double prec_standard = 0.0;
    double prec_literal = 0.0;
};

struct ExperimentReport {
    struct Row {
        std::string dataset;
        std::string method;
        std::size_t users = 0;
        double mrr = 0.0;
        double ndcg = 0.0;
        double prec_standard = 0.0;
        double prec_literal = 0.0;
        bool empty = true;
    };
    std::vector<Row> rows;
    std::vector<UserMetrics> per_user;
    std::size_t skipped_users = 0;
    std::map<std::string, std::size_t> failures;  // method -> users it failed on
    std::map<std::string, std::string> config;

    const Row* find(const std::string& dataset, const std::string& method) const {
        for (const auto& r : rows) {
            if (r.dataset == dataset && r.method == method) return &r;
        }
        return nullptr;
    }
    const Row* find(const std::string& method) const {
        for (const auto& r : rows) {
            if (r.method == method) return &r;
        }
        return nullptr;
    }

    void append(const ExperimentReport& other) {
        rows.insert(rows.end(), other.rows.begin(), other.rows.end());
        per_user.insert(per_user.end(), other.per_user.begin(), other.per_user.end());
        skipped_users += other.skipped_users;
        for (const auto& [m, n] : other.failures) failures[m] += n;
    }
};

/// Macro-averages per (dataset, method) in the given order.
inline std::vector<ExperimentReport::Row> aggregate_rows(
    const std::vector<UserMetrics>& per_user,
    const std::vector<std::pair<std::string, std::string>>& order) {
    std::vector<ExperimentReport::Row> rows;
    for (const auto& [dataset, method] : order) {
        ExperimentReport::Row row{dataset, method};
        for (const auto& m : per_user) {
            if (m.dataset != dataset || m.method != method) continue;
            ++row.users;
            row.mrr += m.mrr;
            row.ndcg += m.ndcg;
            row.prec_standard += m.prec_standard;
            row.prec_literal += m.prec_literal;
        }
        if (row.users > 0) {
            const double n = static_cast<double>(row.users);
            row.mrr /= n;
            row.ndcg /= n;
            row.prec_standard /= n;
            row.prec_literal /= n;
            row.empty = false;
        }
        rows.push_back(row);
    }
    return rows;
}

namespace detail {

inline std::vector<ChoiceIndex> choices_of(std::span<const Action> actions) {
    std::vector<ChoiceIndex> out;
    out.reserve(actions.size());
    for (const auto& a : actions) out.push_back(a.choice);
    return out;
}

inline std::vector<ChoiceIndex> candidate_set(const CandidateScope& scope, std::size_t M,
                                              ChoiceIndex truth, Rng& rng) {
    std::vector<ChoiceIndex> all(M);
    std::iota(all.begin(), all.end(), 0u);
    if (scope.kind == CandidateScope::Kind::full_catalog || scope.negatives + 1 >= M) return all;
    std::swap(all[truth], all[M - 1]);
    // partial Fisher-Yates over the M-1 negatives
    for (std::size_t i = 0; i < scope.negatives; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng() % (M - 1 - i));
        std::swap(all[i], all[j]);
    }
    std::vector<ChoiceIndex> out(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(scope.negatives));
    out.push_back(truth);
    return out;
}

}  // namespace detail

/// Leave-last-n next-item evaluation. Each method is prepared once per user on
/// the pre-holdout prefix, then scores the n held-out steps with the revealed
/// history growing one action at a time.
inline ExperimentReport evaluate_next_item(const Population& pop, const std::vector<Method>& methods,
                                           const EvalProtocol& protocol,
                                           const std::string& dataset = "") {
    protocol.validate();
    const std::string label = dataset.empty() ? pop.label() : dataset;
    const std::size_t n_users = pop.users.size();
    const std::size_t n_methods = methods.size();
    std::vector<std::vector<std::optional<UserMetrics>>> results(
        n_users, std::vector<std::optional<UserMetrics>>(n_methods));
    std::vector<char> skipped(n_users, 0);

    parallel_for(n_users, protocol.jobs, [&](std::size_t u) {
        const auto& user = pop.users[u];
        const auto& target = user.target.actions;
        if (target.size() <= protocol.holdout_len + 1) {
            skipped[u] = 1;
            return;
        }
        const std::size_t n_train = target.size() - protocol.holdout_len;
        UserSplit split;
        split.user_index = u;
        split.user_id = user.user_id;
        split.source = &user.source;
        split.train.user_id = user.user_id;
        split.train.domain_id = user.target.domain_id;
        split.train.actions.assign(target.begin(), target.begin() + static_cast<std::ptrdiff_t>(n_train));
        split.source_catalog = &pop.source_catalog;
        split.target_catalog = &pop.target_catalog;

        for (std::size_t m = 0; m < n_methods; ++m) {
            try {
                auto scorer = methods[m].prepare(split);
                UserMetrics acc{label, methods[m].name, user.user_id};
                for (std::size_t h = 0; h < protocol.holdout_len; ++h) {
                    std::span<const Action> revealed(target.data(), n_train + h);
                    const ChoiceIndex truth = target[n_train + h].choice;
                    const auto scores = scorer(revealed);
                    if (scores.size() != pop.target_catalog.size()) {
                        throw NumericalError("scorer returned wrong length");
                    }
                    Rng rng(derive_seed(derive_seed(protocol.seed, u), h));
                    const auto cands =
                        detail::candidate_set(protocol.scope, pop.target_catalog.size(), truth, rng);
                    const auto list = rank_candidates(scores, cands, truth);
                    acc.mrr += mrr(list);
                    acc.ndcg += ndcg_at_k(list, protocol.k_ndcg).value;
                    acc.prec_standard += precision_at_k(list, protocol.k_prec, PrecisionMode::standard);
                    acc.prec_literal += precision_at_k(list, protocol.k_prec, PrecisionMode::paper_literal);
                }
                const double n = static_cast<double>(protocol.holdout_len);
                acc.mrr /= n;
                acc.ndcg /= n;
                acc.prec_standard /= n;
                acc.prec_literal /= n;
                results[u][m] = acc;
            } catch (const std::exception&) {
                results[u][m].reset();
            }
        }
    });

    ExperimentReport rep;
    std::vector<std::pair<std::string, std::string>> order;
    for (const auto& m : methods) order.emplace_back(label, m.name);
    for (std::size_t u = 0; u < n_users; ++u) {
        if (skipped[u]) {
            ++rep.skipped_users;
            continue;
        }
        for (std::size_t m = 0; m < n_methods; ++m) {
            if (results[u][m]) {
                rep.per_user.push_back(*results[u][m]);
            } else {
                ++rep.failures[methods[m].name];
            }
        }
    }
    rep.rows = aggregate_rows(rep.per_user, order);
    rep.config["holdout"] = std::to_string(protocol.holdout_len);
    rep.config["candidates"] = protocol.scope.describe();
    rep.config["k_ndcg"] = std::to_string(protocol.k_ndcg);
    rep.config["k_prec"] = std::to_string(protocol.k_prec);
    rep.config["precision_mode"] = to_string(protocol.precision_mode);
    rep.config["seed"] = std::to_string(protocol.seed);
    return rep;
}

// ---------------------------------------------------------------------------
// Methods

inline Method of_method() {
    return {"of", [](const UserSplit& s) -> UserScorer {
                const std::size_t M = s.target_catalog->size();
                return [M](std::span<const Action> revealed) {
                    return of_scores(detail::choices_of(revealed), M);
                };
            }};
}

inline Method of_u_method() {
    return {"of_u", [](const UserSplit& s) -> UserScorer {
                auto source = s.source ? s.source->choices() : std::vector<ChoiceIndex>{};
                return [source = std::move(source), tc = s.target_catalog,
                        sc = s.source_catalog](std::span<const Action> revealed) {
                    return of_u_scores(detail::choices_of(revealed), *tc, source, *sc);
                };
            }};
}

inline Method mc_method() {
    return {"mc", [](const UserSplit& s) -> UserScorer {
                const std::size_t M = s.target_catalog->size();
                return [M](std::span<const Action> revealed) {
                    const auto h = detail::choices_of(revealed);
                    return mc_scores(mc_fit(h), h.back(), M);
                };
            }};
}

inline Method mc_u_method() {
    return {"mc_u", [](const UserSplit& s) -> UserScorer {
                const ActionSequence* source = s.source;
                return [source, tc = s.target_catalog,
                        sc = s.source_catalog](std::span<const Action> revealed) {
                    std::span<const Action> src;
                    if (source) src = source->actions;
                    const auto pooled = mc_u_fit(revealed, *tc, src, *sc);
                    return mc_u_scores(pooled, revealed.back().choice, *tc);
                };
            }};
}

/// Scorer from fitted parameters: score_next under theta and the target utility.
inline UserScorer fitted_scorer(const DomainCatalog& catalog, std::vector<double> theta,
                                std::vector<double> phi_t) {
    return [&catalog, theta = std::move(theta), phi = std::move(phi_t)](std::span<const Action> revealed) {
        return score_next(detail::choices_of(revealed), catalog, theta, phi);
    };
}

enum class ModelKind { nsm, cdnst, nsm_u };

inline const char* to_string(ModelKind k) {
    switch (k) {
        case ModelKind::nsm: return "nsm";
        case ModelKind::cdnst: return "cdnst";
        case ModelKind::nsm_u: return "nsm_u";
    }
    return "?";
}
inline ModelKind parse_model_kind(const std::string& s) {
    if (s == "nsm") return ModelKind::nsm;
    if (s == "cdnst") return ModelKind::cdnst;
    if (s == "nsm_u") return ModelKind::nsm_u;
    throw UsageError("unknown model method '" + s + "'");
}

struct UserFit {
    FitResult fit;
    bool pooled_fell_back = false;
};

/// Fits one user's model on the given target prefix. A source with fewer than
/// two actions is ignored (cdnst then equals nsm for that user).
inline UserFit fit_user(ModelKind kind, const ActionSequence* source, std::span<const Action> target,
                        const DomainCatalog& source_catalog, const DomainCatalog& target_catalog,
                        const Hyperparams& hp, SamplerConfig cfg, std::size_t user_index) {
    cfg.seed = derive_seed(cfg.seed, user_index);
    const auto target_choices = detail::choices_of(target);
    if (target_choices.size() < 2) throw DataError("unfittable target sequence (N < 2)");
    UserFit out;
    if (kind == ModelKind::nsm_u) {
        std::span<const Action> src;
        if (source) src = source->actions;
        auto pooled = pooled_nsm_fit(src, source_catalog, target, target_catalog, hp, cfg);
        out.fit = std::move(pooled.fit);
        out.pooled_fell_back = pooled.fell_back;
        return out;
    }
    const auto dcn_t = build_dcn(target_choices, target_catalog);
    if (kind == ModelKind::cdnst && source && source->fittable()) {
        const auto source_choices = source->choices();
        const auto dcn_s = build_dcn(source_choices, source_catalog);
        out.fit = fit(DomainObservations{source_choices, &dcn_s},
                      DomainObservations{target_choices, &dcn_t}, hp, cfg);
    } else {
        out.fit = fit(std::nullopt, DomainObservations{target_choices, &dcn_t}, hp, cfg);
    }
    return out;
}

/// NSM_U scoring: the revealed target history merged with every mapped source
/// action up to the last revealed timestamp, as in fitting.
inline UserScorer pooled_scorer(const UserSplit& s, std::vector<double> theta, std::vector<double> phi_t) {
    return [source = s.source, sc = s.source_catalog, tc = s.target_catalog, theta = std::move(theta),
            phi = std::move(phi_t)](std::span<const Action> revealed) {
        std::vector<Action> earlier;
        if (source && !revealed.empty()) {
            const Timestamp now = revealed.back().timestamp;
            for (const auto& a : source->actions) {
                if (a.timestamp <= now) earlier.push_back(a);
            }
        }
        const auto pooled = pool_into_target(earlier, *sc, revealed, *tc);
        return score_next(detail::choices_of(pooled.actions), *tc, theta, phi);
    };
}

inline UserScorer model_scorer(ModelKind kind, const UserSplit& s, std::vector<double> theta,
                               std::vector<double> phi_t) {
    if (kind == ModelKind::nsm_u) return pooled_scorer(s, std::move(theta), std::move(phi_t));
    return fitted_scorer(*s.target_catalog, std::move(theta), std::move(phi_t));
}

inline Method model_method(ModelKind kind, Hyperparams hp, SamplerConfig cfg,
                           std::string name = "") {
    if (name.empty()) name = to_string(kind);
    return {name, [kind, hp = std::move(hp), cfg](const UserSplit& s) -> UserScorer {
                auto uf = fit_user(kind, s.source, s.train.actions, *s.source_catalog,
                                   *s.target_catalog, hp, cfg, s.user_index);
                return model_scorer(kind, s, std::move(uf.fit.theta), std::move(uf.fit.phi_t));
            }};
}

/// Refits on the whole revealed history before every prediction. Slow; the
/// default protocol fits once on the prefix.
inline Method refit_method(ModelKind kind, Hyperparams hp, SamplerConfig cfg, std::string name = "") {
    if (name.empty()) name = to_string(kind);
    return {name, [kind, hp = std::move(hp), cfg](const UserSplit& s) -> UserScorer {
                return [kind, hp, cfg, s](std::span<const Action> revealed) {
                    SamplerConfig step = cfg;
                    step.seed = derive_seed(cfg.seed, revealed.size());
                    auto uf = fit_user(kind, s.source, revealed, *s.source_catalog, *s.target_catalog, hp, step,
                                       s.user_index);
                    return model_scorer(kind, s, std::move(uf.fit.theta), std::move(uf.fit.phi_t))(revealed);
                };
            }};
}

/// Scores from previously fitted parameters keyed by user id.
inline Method fitted_method(std::string name, ModelKind kind, const std::map<std::string, FitResult>* fits) {
    return {std::move(name), [kind, fits](const UserSplit& s) -> UserScorer {
                auto it = fits->find(s.user_id);
                if (it == fits->end()) throw DataError("no fitted model for user " + s.user_id);
                return model_scorer(kind, s, it->second.theta, it->second.phi_t);
            }};
}

/// Ranks the true next item first. For ceiling checks only: it reads the
/// population directly.
inline Method oracle_method(const Population* pop) {
    return {"oracle", [pop](const UserSplit& s) -> UserScorer {
                const auto& target = pop->users.at(s.user_index).target.actions;
                const std::size_t M = pop->target_catalog.size();
                return [&target, M](std::span<const Action> revealed) {
                    std::vector<double> scores(M, 0.0);
                    scores[target.at(revealed.size()).choice] = 1.0;
                    return scores;
                };
            }};
}

inline Method random_method(std::uint64_t seed) {
    return {"random", [seed](const UserSplit& s) -> UserScorer {
                const std::size_t M = s.target_catalog->size();
                const std::uint64_t user_seed = derive_seed(seed, s.user_index);
                return [M, user_seed](std::span<const Action> revealed) {
                    Rng rng(derive_seed(user_seed, revealed.size()));
                    std::vector<double> scores(M);
                    for (auto& x : scores) x = uniform01(rng);
                    return scores;
                };
            }};
}

// ---------------------------------------------------------------------------
// Population fitting

struct PopulationFit {
    std::map<std::string, FitResult> fits;
    std::vector<std::string> skipped;       // unfittable users
    std::vector<std::string> fell_back;     // nsm_u users without keyword overlap
};

/// Fits every user on its target prefix (all but the last `holdout` actions).
inline PopulationFit fit_population(const Population& pop, ModelKind kind, const Hyperparams& hp,
                                    const SamplerConfig& cfg, std::size_t holdout, std::size_t jobs) {
    const std::size_t n = pop.users.size();
    std::vector<std::optional<UserFit>> out(n);
    parallel_for(n, jobs, [&](std::size_t u) {
        const auto& user = pop.users[u];
        const auto& t = user.target.actions;
        if (t.size() < holdout + 2) return;
        std::span<const Action> prefix(t.data(), t.size() - holdout);
        out[u] = fit_user(kind, &user.source, prefix, pop.source_catalog, pop.target_catalog, hp, cfg, u);
    });
    PopulationFit res;
    for (std::size_t u = 0; u < n; ++u) {
        const auto& id = pop.users[u].user_id;
        if (!out[u]) {
            res.skipped.push_back(id);
            continue;
        }
        if (out[u]->pooled_fell_back) res.fell_back.push_back(id);
        res.fits.emplace(id, std::move(out[u]->fit));
    }
    return res;
}

// ---------------------------------------------------------------------------
// Temporal machinery

inline std::vector<UserStreams> relatedness_streams(const Population& pop) {
    std::vector<UserStreams> out;
    out.reserve(pop.users.size());
    for (const auto& u : pop.users) {
        out.push_back({u.user_id, keyword_stream(u.source, pop.source_catalog),
                       keyword_stream(u.target, pop.target_catalog)});
    }
    return out;
}

inline RelatednessReport population_relatedness(const Population& pop, const EmbeddingTable& table,
                                                Timestamp tau) {
    return domain_relatedness(relatedness_streams(pop), table, tau);
}

/// Moves every source action `advance` seconds earlier.
inline Population shift_source_timestamps(Population pop, Timestamp advance) {
    if (advance <= 0) throw UsageError("shift advance must be positive");
    for (auto& u : pop.users) {
        for (auto& a : u.source.actions) a.timestamp -= advance;
        u.source = validate_sequence(std::move(u.source), pop.source_catalog);
    }
    return pop;
}

/// CDNST restricted, per direction, to users whose relatedness favors it.
inline ExperimentReport run_personalized(const Population& pop, const RelatednessReport& report,
                                         const Hyperparams& hp, const SamplerConfig& cfg,
                                         const EvalProtocol& protocol) {
    ExperimentReport out;
    const Population reversed = swap_domains(pop);
    const Hyperparams hp_rev = [&] {
        Hyperparams h = hp;
        std::swap(h.alpha_s, h.alpha_t);
        return h;
    }();
    struct Leg {
        const Population* pop;
        const Hyperparams* hp;
        Direction dir;
    };
    for (const Leg& leg : {Leg{&pop, &hp, Direction::a_to_b}, Leg{&reversed, &hp_rev, Direction::b_to_a}}) {
        const auto users = select_transfer_users(report, leg.dir);
        const auto sub = restrict_users(*leg.pop, users);
        const auto method = model_method(ModelKind::cdnst, *leg.hp, cfg, "cdnst_p");
        auto rep = evaluate_next_item(sub, {method}, protocol, leg.pop->label());
        out.append(rep);
        out.config = rep.config;
    }
    return out;
}

struct LongTailTable {
    std::vector<std::size_t> thresholds;
    std::vector<std::string> domains;
    std::vector<std::vector<double>> fractions;  // [domain][threshold]
};

inline std::size_t distinct_transitions(const ActionSequence& seq) {
    std::set<std::pair<ChoiceIndex, ChoiceIndex>> pairs;
    for (std::size_t i = 1; i < seq.actions.size(); ++i) {
        pairs.emplace(seq.actions[i - 1].choice, seq.actions[i].choice);
    }
    return pairs.size();
}

/// Per domain and threshold t, the fraction of users with more than t distinct
/// transition pairs.
inline LongTailTable long_tail_stats(const Population& pop,
                                     std::vector<std::size_t> thresholds = {0, 1, 2, 5, 10, 20, 50, 100}) {
    LongTailTable table;
    table.thresholds = std::move(thresholds);
    table.domains = {pop.source_catalog.domain_id(), pop.target_catalog.domain_id()};
    for (int d = 0; d < 2; ++d) {
        std::vector<std::size_t> counts;
        for (const auto& u : pop.users) counts.push_back(distinct_transitions(d == 0 ? u.source : u.target));
        std::vector<double> row;
        for (std::size_t t : table.thresholds) {
            const auto above = std::count_if(counts.begin(), counts.end(), [t](std::size_t c) { return c > t; });
            row.push_back(counts.empty() ? 0.0 : static_cast<double>(above) / static_cast<double>(counts.size()));
        }
        table.fractions.push_back(std::move(row));
    }
    return table;
}

// ---------------------------------------------------------------------------
// Synthetic populations

enum class ThetaRegime { shared, independent };

inline const char* to_string(ThetaRegime r) { return r == ThetaRegime::shared ? "shared" : "independent"; }
inline ThetaRegime parse_theta_regime(const std::string& s) {
    if (s == "shared") return ThetaRegime::shared;
    if (s == "independent") return ThetaRegime::independent;
    throw UsageError("unknown theta regime '" + s + "'");
}

struct PopulationSpec {
    std::size_t users = 50;
    std::size_t M_s = 50;
    std::size_t M_t = 50;
    std::size_t N_s = 200;
    std::size_t N_t = 30;
    int K = 9;
    ThetaRegime theta_regime = ThetaRegime::shared;
    double overlap = 0.5;          // share of the target vocabulary taken from the source vocabulary
    std::size_t vocabulary = 30;   // keywords per domain
    std::size_t max_keywords = 3;  // per choice
    double lag_days = 0.0;         // target timeline offset
    double spacing_days = 1.0;     // gap between consecutive actions
    double echo = 0.0;             // probability target action i mirrors source action i
    double alpha = 0.1;
    double beta = 1.0;
    std::optional<std::vector<double>> generation_beta;  // Dirichlet for the true theta
    std::string source_domain = "A";
    std::string target_domain = "B";
    std::string user_prefix = "u";

    void validate() const {
        if (M_s < 2 || M_t < 2) throw UsageError("catalogs need at least 2 choices");
        if (users > 0 && (N_s < 2 || N_t < 2)) throw UsageError("sequence lengths must be >= 2");
        if (overlap < 0.0 || overlap > 1.0) throw UsageError("overlap must be in [0, 1]");
        if (echo < 0.0 || echo > 1.0) throw UsageError("echo must be in [0, 1]");
        if (vocabulary < 1 || max_keywords < 1) throw UsageError("vocabulary and max_keywords must be >= 1");
        if (spacing_days <= 0.0) throw UsageError("spacing must be positive");
        if (K < 1) throw UsageError("K must be >= 1");
    }
};

namespace detail {

inline std::vector<Keyword> draw_keywords(const std::vector<std::string>& vocab, std::size_t max_kw, Rng& rng) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng() % max_kw);
    std::vector<Keyword> out;
    for (std::size_t k = 0; k < n; ++k) out.push_back(normalize_keyword(vocab[rng() % vocab.size()]));
    return out;
}

}  // namespace detail

/// Per-user coupled sequences from the generative process over two random
/// catalogs. With echo > 0 the target catalog mirrors the source catalog's
/// keyword sets so echoed actions carry identical keywords.
inline Population synth_population(const PopulationSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng cat_rng(derive_seed(seed, 0xCA7A1060ULL));
    std::vector<std::string> src_vocab, tgt_vocab;
    const auto shared = static_cast<std::size_t>(std::llround(spec.overlap * static_cast<double>(spec.vocabulary)));
    for (std::size_t i = 0; i < spec.vocabulary; ++i) {
        src_vocab.push_back("kw" + std::to_string(i));
        tgt_vocab.push_back(i < shared ? "kw" + std::to_string(i) : "tkw" + std::to_string(i));
    }
    std::vector<Choice> src_choices, tgt_choices;
    for (std::size_t j = 0; j < spec.M_s; ++j) {
        src_choices.push_back({"s" + std::to_string(j), detail::draw_keywords(src_vocab, spec.max_keywords, cat_rng)});
    }
    for (std::size_t j = 0; j < spec.M_t; ++j) {
        if (spec.echo > 0.0 && j < spec.M_s) {
            tgt_choices.push_back({"t" + std::to_string(j), src_choices[j].keywords});
        } else {
            tgt_choices.push_back({"t" + std::to_string(j), detail::draw_keywords(tgt_vocab, spec.max_keywords, cat_rng)});
        }
    }
    Population pop;
    pop.source_catalog = DomainCatalog(spec.source_domain, std::move(src_choices));
    pop.target_catalog = DomainCatalog(spec.target_domain, std::move(tgt_choices));

    Hyperparams gen = Hyperparams::symmetric(spec.K, spec.M_s, spec.M_t, spec.alpha, spec.beta);
    if (spec.generation_beta) {
        gen.beta = *spec.generation_beta;
        gen.validate();
    }
    GenerateOptions opt;
    opt.independent_theta = spec.theta_regime == ThetaRegime::independent;
    opt.spacing = static_cast<Timestamp>(std::llround(spec.spacing_days * seconds_per_day));
    opt.target_offset = static_cast<Timestamp>(std::llround(spec.lag_days * seconds_per_day));
    opt.echo_probability = spec.echo;
    if (spec.echo > 0.0) {
        opt.echo_map.resize(spec.M_s);
        for (std::size_t j = 0; j < spec.M_s && j < spec.M_t; ++j) opt.echo_map[j] = static_cast<ChoiceIndex>(j);
    }
    const std::size_t width = std::to_string(spec.users).size();
    for (std::size_t u = 0; u < spec.users; ++u) {
        std::string id = std::to_string(u);
        id = spec.user_prefix + std::string(width - id.size(), '0') + id;
        auto g = generate(pop.source_catalog, pop.target_catalog, gen, spec.N_s, spec.N_t,
                          derive_seed(seed, u), opt, id);
        pop.users.push_back({id, std::move(g.source), std::move(g.target)});
        pop.truth.push_back({g.truth.theta, g.target_theta, g.truth.phi_s, g.truth.phi_t, g.truth.z_s, g.truth.z_t});
    }
    return pop;
}

}  // namespace cdnst

#endif
