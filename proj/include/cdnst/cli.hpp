#ifndef CDNST_CLI_HPP
#define CDNST_CLI_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cdnst/harness.hpp"
#include "cdnst/io.hpp"
#include "cdnst/parallel.hpp"

namespace cdnst::cli {

enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_data = 2, exit_numerical = 3 };

/// Arguments as recorded in manifests: without --jobs, which never changes
/// results.
inline std::vector<std::string> canonical_argv(const std::vector<std::string>& args) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--jobs") {
            ++i;
            continue;
        }
        if (args[i].rfind("--jobs=", 0) == 0) continue;
        out.push_back(args[i]);
    }
    return out;
}

inline std::uint64_t derive_run_seed(const std::vector<std::string>& argv,
                                     const std::map<std::string, std::string>& inputs) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& a : argv) h = fnv1a64(a + '\x1f', h);
    for (const auto& [path, digest] : inputs) h = fnv1a64(path + '\x1e' + digest, h);
    return splitmix64(h);
}

struct Run {
    std::ostream& out;
    std::ostream& err;
    RunManifest manifest;
    std::size_t jobs = 1;

    /// The given seed, or one derived from the canonical arguments and input
    /// digests; a derived seed is printed and appended to the manifest argv.
    std::uint64_t seed(std::optional<std::uint64_t> given, const std::string& name = "seed") {
        std::uint64_t s;
        if (given) {
            s = *given;
        } else {
            s = derive_run_seed(manifest.argv, manifest.inputs);
            out << "seed: " << s << " (derived)\n";
            manifest.argv.push_back("--seed");
            manifest.argv.push_back(std::to_string(s));
        }
        manifest.seeds[name] = s;
        return s;
    }

    void add_store_input(const fs::path& store) {
        manifest.inputs[store.string()] = hex64(store_digest(store));
    }
    void add_file_input(const fs::path& file) { manifest.inputs[file.string()] = hex64(digest_file(file)); }

    void finish(const fs::path& path) {
        write_manifest(path, manifest);
        out << "manifest: " << path.string() << '\n';
    }
};

inline CandidateScope parse_candidates(const std::string& s) {
    CandidateScope scope;
    if (s == "full" || s == "full_catalog") return scope;
    scope.kind = CandidateScope::Kind::sampled;
    if (s == "sampled") return scope;
    std::string n;
    if (s.rfind("sampled:", 0) == 0) {
        n = s.substr(8);
    } else if (s.rfind("sampled(", 0) == 0 && s.back() == ')') {
        n = s.substr(8, s.size() - 9);
    } else {
        throw UsageError("--candidates must be full, sampled or sampled:N");
    }
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(n, &pos);
        if (pos != n.size() || v < 1) throw std::invalid_argument("n");
        scope.negatives = static_cast<std::size_t>(v);
    } catch (const std::logic_error&) {
        throw UsageError("--candidates sample size must be a positive integer");
    }
    return scope;
}

inline Timestamp days_to_seconds(double days) {
    return static_cast<Timestamp>(std::llround(days * static_cast<double>(seconds_per_day)));
}

// ---------------------------------------------------------------------------
// Commands

struct IngestArgs {
    std::string log;
    std::string out;
};

inline void cmd_ingest(const IngestArgs& a, Run& run) {
    run.add_file_input(a.log);
    auto in = open_input(a.log);
    const auto parsed = parse_log(in);
    if (parsed.duplicates) {
        run.err << "warning: dropped " << parsed.duplicates << " duplicate (user, domain, timestamp, choice) rows\n";
    }
    const auto store = build_store(parsed);
    write_store(store, a.out);
    write_summary(run.out, summarize(store));
    run.out << "store: " << a.out << "  digest: " << hex64(store_digest(a.out)) << '\n';
    run.manifest.outputs = {a.out};
    run.finish(fs::path(a.out) / "manifest.ingest.json");
}

struct FitArgs {
    std::string store;
    std::string method;
    std::string source_domain;
    std::string target_domain;
    int k = 9;
    double alpha = 0.1;
    double beta = 1.0;
    int burn_in = 500;
    int samples = 200;
    int thin = 2;
    std::optional<std::uint64_t> seed;
    std::size_t holdout = 5;
    std::string z_mode = "exact";
    std::string phi_kernel = "gamma_walk";
    std::string out;
};

inline void cmd_fit(const FitArgs& a, Run& run) {
    const auto kind = parse_model_kind(a.method);
    SamplerConfig cfg;
    cfg.burn_in = a.burn_in;
    cfg.samples = a.samples;
    cfg.thin = a.thin;
    cfg.z_mode = parse_zmode(a.z_mode);
    cfg.phi_kernel = parse_phi_kernel(a.phi_kernel);
    cfg.validate();
    if (a.k < 1) throw UsageError("--k must be >= 1");
    if (!(a.alpha > 0.0) || !(a.beta > 0.0)) throw UsageError("--alpha and --beta must be positive");

    run.add_store_input(a.store);
    const auto store = read_store(a.store);
    const auto [s, t] = store.resolve_pair(a.source_domain, a.target_domain);
    const auto pop = store.population(s, t);
    const auto hp = Hyperparams::symmetric(a.k, pop.source_catalog.size(), pop.target_catalog.size(), a.alpha, a.beta);
    cfg.seed = run.seed(a.seed);

    const auto res = fit_population(pop, kind, hp, cfg, a.holdout, run.jobs);
    ModelFile mf{a.method, s, t, a.holdout, config_json(hp, cfg), res.fits};
    const fs::path dir = a.out.empty() ? fs::path(a.store) / "models" : fs::path(a.out);
    const fs::path path = dir / model_filename(a.method, s, t);
    {
        auto out = open_output(path);
        write_model_file(out, mf);
    }
    double mean_nst = 0.0;
    for (const auto& [u, f] : res.fits) mean_nst += f.nst_estimate;
    if (!res.fits.empty()) mean_nst /= static_cast<double>(res.fits.size());
    run.out << a.method << " " << s << "->" << t << ": fitted " << res.fits.size() << " users, skipped "
            << res.skipped.size() << " (fewer than " << a.holdout + 2 << " target actions)\n";
    if (!res.fell_back.empty()) {
        run.out << "pooled fit fell back to target-only for " << res.fell_back.size() << " users\n";
    }
    run.out << "mean NST: " << std::fixed << std::setprecision(4) << mean_nst << std::defaultfloat << '\n';
    run.out << "model: " << path.string() << '\n';
    run.manifest.outputs = {path.string()};
    run.finish(dir / ("manifest.fit_" + a.method + "_" + s + "_" + t + ".json"));
}

struct EvaluateArgs {
    std::string store;
    std::string models;
    std::vector<std::string> methods;
    std::size_t holdout = 5;
    std::string candidates = "full";
    std::size_t k_ndcg = 15;
    std::size_t k_prec = 3;
    std::string precision_mode = "standard";
    std::optional<std::uint64_t> seed;
    std::string source_domain;
    std::string target_domain;
    std::string embeddings;
    bool hash_fallback = false;
    double tau_days = 60.0;
    bool refit_each_step = false;
    std::string out;
};

inline const std::set<std::string>& evaluate_method_names() {
    static const std::set<std::string> names{"of", "of_u", "mc", "mc_u", "nsm", "nsm_u", "cdnst", "cdnst_p", "oracle"};
    return names;
}

inline void cmd_evaluate(const EvaluateArgs& a, Run& run) {
    if (a.methods.empty()) throw UsageError("--methods needs at least one method");
    for (const auto& m : a.methods) {
        if (!evaluate_method_names().count(m)) throw UsageError("unknown method '" + m + "'");
    }
    EvalProtocol protocol;
    protocol.holdout_len = a.holdout;
    protocol.scope = parse_candidates(a.candidates);
    protocol.k_ndcg = a.k_ndcg;
    protocol.k_prec = a.k_prec;
    protocol.precision_mode = parse_precision_mode(a.precision_mode);
    protocol.jobs = run.jobs;
    protocol.validate();
    if (!(a.tau_days > 0.0)) throw UsageError("--tau-days must be positive");

    run.add_store_input(a.store);
    const auto store = read_store(a.store);
    const auto [s, t] = store.resolve_pair(a.source_domain, a.target_domain);
    const auto pop = store.population(s, t);
    const fs::path models_dir = a.models.empty() ? fs::path(a.store) / "models" : fs::path(a.models);

    // model files, loaded once per model kind
    std::map<std::string, ModelFile> models;
    auto need_model = [&](const std::string& method, const std::string& kind) -> const ModelFile& {
        if (auto it = models.find(kind); it != models.end()) return it->second;
        const fs::path path = models_dir / model_filename(kind, s, t);
        if (!fs::exists(path)) {
            throw DataError("missing model for method '" + method + "': " + path.string() + " (run fit --method " +
                            kind + ")");
        }
        run.add_file_input(path);
        auto in = open_input(path);
        auto mf = read_model_file(in);
        if (mf.source_domain != s || mf.target_domain != t) {
            throw DataError("model " + path.string() + " was fitted for " + mf.source_domain + "->" + mf.target_domain);
        }
        if (mf.holdout != a.holdout) {
            throw DataError("model " + path.string() + " was fitted with holdout " + std::to_string(mf.holdout) +
                            ", evaluation uses " + std::to_string(a.holdout));
        }
        return models.emplace(kind, std::move(mf)).first->second;
    };
    for (const auto& m : a.methods) {
        if (m == "nsm" || m == "cdnst" || m == "nsm_u") need_model(m, m);
        if (m == "cdnst_p") need_model(m, "cdnst");
    }
    std::optional<EmbeddingTable> table;
    if (std::count(a.methods.begin(), a.methods.end(), "cdnst_p")) {
        if (!a.embeddings.empty()) {
            run.add_file_input(a.embeddings);
            table = load_embeddings(a.embeddings);
        } else {
            table = EmbeddingTable::hash_fallback();
        }
    }
    protocol.seed = run.seed(a.seed);

    const std::string dataset = s + "->" + t;
    auto model_for = [&](const std::string& name, const std::string& kind) {
        const auto& mf = models.at(kind);
        if (!a.refit_each_step) return fitted_method(name, parse_model_kind(kind), &mf.fits);
        const auto [hp, cfg] = settings_from_config(mf.config, pop.source_catalog.size(), pop.target_catalog.size());
        return refit_method(parse_model_kind(kind), hp, cfg, name);
    };
    std::vector<Method> methods;
    for (const auto& m : a.methods) {
        if (m == "of") methods.push_back(of_method());
        if (m == "of_u") methods.push_back(of_u_method());
        if (m == "mc") methods.push_back(mc_method());
        if (m == "mc_u") methods.push_back(mc_u_method());
        if (m == "nsm" || m == "cdnst" || m == "nsm_u") methods.push_back(model_for(m, m));
        if (m == "oracle") methods.push_back(oracle_method(&pop));
    }
    auto rep = evaluate_next_item(pop, methods, protocol, dataset);
    if (table) {
        const auto rel = population_relatedness(pop, *table, days_to_seconds(a.tau_days));
        const auto sub = restrict_users(pop, select_transfer_users(rel, Direction::a_to_b));
        const auto p = evaluate_next_item(
            sub, {model_for("cdnst_p", "cdnst")}, protocol, dataset);
        rep.rows.insert(rep.rows.end(), p.rows.begin(), p.rows.end());
        rep.per_user.insert(rep.per_user.end(), p.per_user.begin(), p.per_user.end());
        for (const auto& [m, n] : p.failures) rep.failures[m] += n;
        rep.config["cdnst_p_users"] = std::to_string(sub.users.size());
        rep.config["embeddings"] = table->provider();
    }
    // requested order
    std::stable_sort(rep.rows.begin(), rep.rows.end(), [&](const auto& x, const auto& y) {
        auto pos = [&](const std::string& m) { return std::find(a.methods.begin(), a.methods.end(), m) - a.methods.begin(); };
        return pos(x.method) < pos(y.method);
    });
    rep.config["users"] = std::to_string(pop.users.size());
    rep.config["model_fitting"] = a.refit_each_step ? "every_step" : "prefix_once";

    const fs::path dir = a.out.empty() ? fs::path(a.store) / "reports" : fs::path(a.out);
    const std::string stem = s + "_" + t;
    const fs::path txt = dir / ("report_" + stem + ".txt");
    const fs::path tsv = dir / ("report_" + stem + ".tsv");
    const fs::path per_user = dir / ("per_user_" + stem + ".tsv");
    {
        auto o = open_output(txt);
        write_report_table(o, rep);
    }
    {
        auto o = open_output(tsv);
        write_report_tsv(o, rep);
    }
    {
        auto o = open_output(per_user);
        write_per_user_tsv(o, rep);
    }
    write_report_table(run.out, rep);
    run.manifest.outputs = {txt.string(), tsv.string(), per_user.string()};
    run.finish(dir / ("manifest.evaluate_" + stem + ".json"));
}

struct RelatednessArgs {
    std::string store;
    std::string embeddings;
    bool hash_fallback = false;
    double tau_days = 60.0;
    bool per_user = false;
    std::string source_domain;
    std::string target_domain;
    std::string out;
};

inline void cmd_relatedness(const RelatednessArgs& a, Run& run) {
    if (!(a.tau_days > 0.0)) throw UsageError("--tau-days must be positive");
    if (a.embeddings.empty() && !a.hash_fallback) {
        throw UsageError("relatedness needs --embeddings FILE or --hash-fallback");
    }
    run.add_store_input(a.store);
    EmbeddingTable table = EmbeddingTable::hash_fallback();
    if (!a.embeddings.empty()) {
        if (!fs::exists(a.embeddings)) throw DataError("embedding file not found: " + a.embeddings);
        run.add_file_input(a.embeddings);
        table = load_embeddings(a.embeddings);
    }
    const auto store = read_store(a.store);
    const auto [s, t] = store.resolve_pair(a.source_domain, a.target_domain);
    const auto pop = store.population(s, t);
    const auto rep = population_relatedness(pop, table, days_to_seconds(a.tau_days));

    const fs::path dir = a.out.empty() ? fs::path(a.store) / "reports" : fs::path(a.out);
    const std::string stem = s + "_" + t;
    const fs::path txt = dir / ("relatedness_" + stem + ".txt");
    const fs::path tsv = dir / ("relatedness_" + stem + ".tsv");
    {
        auto o = open_output(txt);
        write_relatedness_table(o, rep, s, t);
    }
    {
        auto o = open_output(tsv);
        write_relatedness_tsv(o, rep, s, t, a.per_user);
    }
    write_relatedness_table(run.out, rep, s, t);
    run.manifest.outputs = {txt.string(), tsv.string()};
    run.finish(dir / ("manifest.relatedness_" + stem + ".json"));
}

struct ShiftArgs {
    std::string store;
    double advance_days = 60.0;
    std::string source_domain;
    std::string target_domain;
    std::string out;
};

inline void cmd_shift(const ShiftArgs& a, Run& run) {
    const Timestamp advance = days_to_seconds(a.advance_days);
    if (advance <= 0) throw UsageError("--advance-days must be positive");
    run.add_store_input(a.store);
    auto store = read_store(a.store);
    const auto [s, t] = store.resolve_pair(a.source_domain, a.target_domain);
    auto pop = shift_source_timestamps(store.population(s, t), advance);
    // users without target actions are not in the population; shift them directly
    auto& src = store.sequences[s];
    std::set<std::string> done;
    for (const auto& u : pop.users) {
        if (!u.source.actions.empty()) src[u.user_id] = u.source;
        done.insert(u.user_id);
    }
    for (auto& [user, seq] : src) {
        if (done.count(user)) continue;
        for (auto& act : seq.actions) act.timestamp -= advance;
    }
    write_store(store, a.out);
    run.out << "shifted " << s << " by " << advance << " s; target " << t << " untouched\n";
    run.out << "store: " << a.out << "  digest: " << hex64(store_digest(a.out)) << '\n';
    run.manifest.outputs = {a.out};
    run.finish(fs::path(a.out) / "manifest.shift.json");
}

struct SynthArgs {
    PopulationSpec spec;
    std::string theta_regime = "shared";
    std::optional<std::uint64_t> seed;
    std::string out;
};

inline void cmd_synth(SynthArgs a, Run& run) {
    a.spec.theta_regime = parse_theta_regime(a.theta_regime);
    a.spec.validate();
    const auto seed = run.seed(a.seed);
    const auto pop = synth_population(a.spec, seed);
    const auto store = store_from_population(pop);
    write_store(store, a.out);
    write_summary(run.out, summarize(store));
    run.out << "store: " << a.out << "  digest: " << hex64(store_digest(a.out)) << '\n';
    run.manifest.outputs = {a.out};
    run.finish(fs::path(a.out) / "manifest.synth.json");
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

inline int cmd_replay(const std::string& manifest_path, std::optional<std::size_t> jobs, std::ostream& out,
                      std::ostream& err) {
    const auto m = read_manifest(manifest_path);
    if (m.argv.empty() || m.argv[0] == "replay") throw DataError("manifest has no replayable command");
    std::vector<std::string> argv = m.argv;
    // only the parallel commands take a worker count
    if (jobs && (m.command == "fit" || m.command == "evaluate")) {
        argv.push_back("--jobs");
        argv.push_back(std::to_string(*jobs));
    }
    out << "replaying: " << m.command << '\n';
    return run_cli(argv, out, err);
}

// ---------------------------------------------------------------------------
// Entry point

/// `args` excludes the program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Novelty-seeking cross-domain recommendation toolkit", "cdnst"};
    app.require_subcommand(1);
    app.set_version_flag("--version", tool_version);
    std::size_t jobs = default_jobs();

    auto add_jobs = [&](CLI::App* sub) {
        sub->add_option("--jobs", jobs, "Worker threads (default: logical cores)")->check(CLI::PositiveNumber);
    };
    auto add_seed = [](CLI::App* sub, std::optional<std::uint64_t>& seed) {
        sub->add_option_function<std::uint64_t>("--seed", [&seed](const std::uint64_t& v) { seed = v; },
                                                "Master seed (derived from the run when absent)");
    };
    auto add_pair = [](CLI::App* sub, std::string& s, std::string& t) {
        sub->add_option("--source-domain", s, "Source domain id");
        sub->add_option("--target-domain", t, "Target domain id");
    };

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Parse an action log into a store");
    c_ingest->add_option("--log", ingest.log, "Tab-separated action log")->required();
    c_ingest->add_option("--out", ingest.out, "Store directory")->required();

    FitArgs fit;
    auto* c_fit = app.add_subcommand("fit", "Fit a novelty-seeking model per user");
    c_fit->add_option("--store", fit.store, "Store directory")->required();
    c_fit->add_option("--method", fit.method, "nsm | cdnst | nsm_u")->required();
    add_pair(c_fit, fit.source_domain, fit.target_domain);
    c_fit->add_option("--k", fit.k, "Number of novelty-seeking levels");
    c_fit->add_option("--alpha", fit.alpha, "Symmetric utility concentration");
    c_fit->add_option("--beta", fit.beta, "Symmetric level concentration");
    c_fit->add_option("--burn-in", fit.burn_in, "Burn-in sweeps");
    c_fit->add_option("--samples", fit.samples, "Retained samples");
    c_fit->add_option("--thin", fit.thin, "Sweeps between retained samples");
    add_seed(c_fit, fit.seed);
    add_jobs(c_fit);
    c_fit->add_option("--holdout", fit.holdout, "Trailing target actions excluded from fitting");
    c_fit->add_option("--z-mode", fit.z_mode, "exact | paper_faithful");
    c_fit->add_option("--phi-kernel", fit.phi_kernel, "gamma_walk | dirichlet");
    c_fit->add_option("--out", fit.out, "Model directory (default STORE/models)");

    EvaluateArgs ev;
    auto* c_eval = app.add_subcommand("evaluate", "Leave-last-n next-item evaluation");
    c_eval->add_option("--store", ev.store, "Store directory")->required();
    c_eval->add_option("--models", ev.models, "Model directory (default STORE/models)");
    c_eval->add_option("--methods", ev.methods, "Comma-separated methods")->delimiter(',')->required();
    c_eval->add_option("--holdout", ev.holdout, "Held-out trailing target actions");
    c_eval->add_option("--candidates", ev.candidates, "full | sampled | sampled:N");
    c_eval->add_option("--k-ndcg", ev.k_ndcg, "nDCG cutoff");
    c_eval->add_option("--k-prec", ev.k_prec, "Precision cutoff");
    c_eval->add_option("--precision-mode", ev.precision_mode, "standard | paper_literal");
    add_seed(c_eval, ev.seed);
    add_pair(c_eval, ev.source_domain, ev.target_domain);
    auto* ev_emb = c_eval->add_option("--embeddings", ev.embeddings, "Keyword vectors for cdnst_p");
    auto* ev_hash = c_eval->add_flag("--hash-fallback", ev.hash_fallback, "Hashed keyword vectors for cdnst_p");
    ev_emb->excludes(ev_hash);
    c_eval->add_option("--tau-days", ev.tau_days, "Relatedness window for cdnst_p");
    c_eval->add_flag("--refit-each-step", ev.refit_each_step,
                     "Refit model methods before every held-out step, with the settings stored in the model files");
    c_eval->add_option("--out", ev.out, "Report directory (default STORE/reports)");
    add_jobs(c_eval);

    RelatednessArgs rel;
    auto* c_rel = app.add_subcommand("relatedness", "Directed keyword relatedness between two domains");
    c_rel->add_option("--store", rel.store, "Store directory")->required();
    auto* rel_emb = c_rel->add_option("--embeddings", rel.embeddings, "Keyword vector file");
    auto* rel_hash = c_rel->add_flag("--hash-fallback", rel.hash_fallback, "Use hashed keyword vectors");
    rel_emb->excludes(rel_hash);
    c_rel->add_option("--tau-days", rel.tau_days, "Window length in days");
    c_rel->add_flag("--per-user", rel.per_user, "Include per-user values");
    add_pair(c_rel, rel.source_domain, rel.target_domain);
    c_rel->add_option("--out", rel.out, "Report directory (default STORE/reports)");

    ShiftArgs shift;
    auto* c_shift = app.add_subcommand("shift", "Move source timestamps earlier");
    c_shift->add_option("--store", shift.store, "Store directory")->required();
    c_shift->add_option("--advance-days", shift.advance_days, "Days to move source actions earlier");
    c_shift->add_option("--out", shift.out, "New store directory")->required();
    add_pair(c_shift, shift.source_domain, shift.target_domain);

    SynthArgs synth;
    auto* c_synth = app.add_subcommand("synth", "Generate a synthetic two-domain population");
    c_synth->add_option("--users", synth.spec.users, "Number of users");
    c_synth->add_option("--ms", synth.spec.M_s, "Source catalog size");
    c_synth->add_option("--mt", synth.spec.M_t, "Target catalog size");
    c_synth->add_option("--ns", synth.spec.N_s, "Source actions per user");
    c_synth->add_option("--nt", synth.spec.N_t, "Target actions per user");
    c_synth->add_option("--theta-regime", synth.theta_regime, "shared | independent");
    c_synth->add_option("--overlap", synth.spec.overlap, "Share of target keywords drawn from the source vocabulary");
    c_synth->add_option("--lag-days", synth.spec.lag_days, "Target timeline offset in days");
    add_seed(c_synth, synth.seed);
    c_synth->add_option("--out", synth.out, "Store directory")->required();
    c_synth->add_option("--spacing-days", synth.spec.spacing_days, "Days between consecutive actions");
    c_synth->add_option("--echo", synth.spec.echo, "Probability a target action mirrors the source action");
    c_synth->add_option("--k", synth.spec.K, "Number of novelty-seeking levels");
    c_synth->add_option("--alpha", synth.spec.alpha, "Utility concentration");
    c_synth->add_option("--beta", synth.spec.beta, "Level concentration");
    c_synth->add_option("--vocabulary", synth.spec.vocabulary, "Keywords per domain");
    c_synth->add_option("--max-keywords", synth.spec.max_keywords, "Keywords per choice, at most");

    std::string manifest_path;
    std::optional<std::size_t> replay_jobs;
    auto* c_replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
    c_replay->add_option("--manifest", manifest_path, "Manifest JSON")->required();
    c_replay->add_option_function<std::size_t>("--jobs", [&](const std::size_t& v) { replay_jobs = v; },
                                               "Worker threads");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::CallForVersion&) {
        out << tool_version << '\n';
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return exit_usage;
    }

    Run run{out, err, {}, jobs};
    run.manifest.argv = canonical_argv(args);
    try {
        if (c_replay->parsed()) return cmd_replay(manifest_path, replay_jobs, out, err);
        if (c_ingest->parsed()) {
            run.manifest.command = "ingest";
            cmd_ingest(ingest, run);
        } else if (c_fit->parsed()) {
            run.manifest.command = "fit";
            cmd_fit(fit, run);
        } else if (c_eval->parsed()) {
            run.manifest.command = "evaluate";
            cmd_evaluate(ev, run);
        } else if (c_rel->parsed()) {
            run.manifest.command = "relatedness";
            cmd_relatedness(rel, run);
        } else if (c_shift->parsed()) {
            run.manifest.command = "shift";
            cmd_shift(shift, run);
        } else if (c_synth->parsed()) {
            run.manifest.command = "synth";
            cmd_synth(synth, run);
        }
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return exit_usage;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return exit_numerical;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return exit_data;
    } catch (const std::exception& e) {
        err << "data error: " << e.what() << '\n';
        return exit_data;
    }
    return exit_ok;
}

}  // namespace cdnst::cli

#endif
