#ifndef CDNST_IO_HPP
#define CDNST_IO_HPP

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cdnst/dcn.hpp"
#include "cdnst/domain.hpp"
#include "cdnst/gibbs.hpp"
#include "cdnst/harness.hpp"
#include "cdnst/random.hpp"
#include "cdnst/relatedness.hpp"

namespace cdnst {

namespace fs = std::filesystem;
using Json = nlohmann::json;

inline constexpr const char* tool_version = "cdnst 1.0.0";

// ---------------------------------------------------------------------------
// Text helpers

inline std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) return out;
        start = pos + 1;
    }
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

/// Integer epoch seconds, or YYYY-MM-DD read as midnight UTC.
inline std::optional<Timestamp> parse_timestamp(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    Timestamp v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && p == s.data() + s.size()) return v;
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    int y = 0;
    unsigned m = 0, d = 0;
    auto num = [&](std::size_t off, std::size_t len, auto& out) {
        auto r = std::from_chars(s.data() + off, s.data() + off + len, out);
        return r.ec == std::errc() && r.ptr == s.data() + off + len;
    };
    if (!num(0, 4, y) || !num(5, 2, m) || !num(8, 2, d)) return std::nullopt;
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) return std::nullopt;
    return static_cast<Timestamp>(std::chrono::sys_days{ymd}.time_since_epoch().count()) * seconds_per_day;
}

inline std::uint64_t digest_stream(std::istream& in, std::uint64_t h = 0xcbf29ce484222325ULL) {
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return fnv1a64(buf, h);
}

inline std::uint64_t digest_file(const fs::path& path, std::uint64_t h = 0xcbf29ce484222325ULL) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    return digest_stream(in, h);
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

inline std::ofstream open_output(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

inline std::ifstream open_input(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    return in;
}

// ---------------------------------------------------------------------------
// Action logs

struct LogRow {
    std::string user_id;
    std::string domain_id;
    std::string choice_id;
    Timestamp timestamp = 0;
};

struct ParsedLog {
    std::vector<LogRow> rows;
    // domain -> choice id -> keywords (union over rows, first-seen order)
    std::map<std::string, std::map<std::string, std::vector<Keyword>>> keywords;
    std::size_t duplicates = 0;
};

/// Tab-separated `user domain choice timestamp kw;kw;...`. Blank lines, `#`
/// comments and a leading `user_id` header are ignored.
inline ParsedLog parse_log(std::istream& in) {
    ParsedLog log;
    std::set<std::tuple<std::string, std::string, Timestamp, std::string>> seen;
    std::string line;
    std::size_t line_no = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty() || line[0] == '#') continue;
        auto fields = split(line, '\t');
        if (first) {
            first = false;
            if (trim(fields[0]) == "user_id") continue;
        }
        auto fail = [&](const std::string& what) {
            return DataError("log line " + std::to_string(line_no) + ": " + what);
        };
        if (fields.size() != 5) {
            throw fail("expected 5 tab-separated fields, got " + std::to_string(fields.size()));
        }
        LogRow row{std::string(trim(fields[0])), std::string(trim(fields[1])), std::string(trim(fields[2])), 0};
        if (row.user_id.empty() || row.domain_id.empty() || row.choice_id.empty()) {
            throw fail("empty user, domain or choice id");
        }
        if (row.domain_id.find_first_of("/\\") != std::string::npos) throw fail("domain id contains a path separator");
        auto ts = parse_timestamp(fields[3]);
        if (!ts) throw fail("malformed timestamp '" + fields[3] + "'");
        row.timestamp = *ts;
        std::vector<Keyword> kws;
        for (const auto& raw : split(fields[4], ';')) {
            if (trim(raw).empty()) continue;
            try {
                kws.push_back(normalize_keyword(raw));
            } catch (const DataError& e) {
                throw fail(e.what());
            }
        }
        if (kws.empty()) throw fail("choice '" + row.choice_id + "' has no keywords");
        auto& known = log.keywords[row.domain_id][row.choice_id];
        for (auto& kw : kws) {
            if (std::find(known.begin(), known.end(), kw) == known.end()) known.push_back(std::move(kw));
        }
        if (!seen.emplace(row.user_id, row.domain_id, row.timestamp, row.choice_id).second) {
            ++log.duplicates;
            continue;
        }
        log.rows.push_back(std::move(row));
    }
    return log;
}

// ---------------------------------------------------------------------------
// Store: index.tsv + catalog_<domain>.tsv + actions_<domain>.tsv (+ truth.jsonl)

struct Store {
    std::map<std::string, DomainCatalog> catalogs;
    std::map<std::string, std::map<std::string, ActionSequence>> sequences;  // domain -> user -> seq
    std::optional<std::pair<std::string, std::string>> truth_domains;
    std::map<std::string, GroundTruth> truth;

    std::vector<std::string> domains() const {
        std::vector<std::string> out;
        for (const auto& [d, c] : catalogs) out.push_back(d);
        return out;
    }

    std::set<std::string> users() const {
        std::set<std::string> out;
        for (const auto& [d, m] : sequences) {
            for (const auto& [u, s] : m) out.insert(u);
        }
        return out;
    }

    const DomainCatalog& catalog(const std::string& domain) const {
        auto it = catalogs.find(domain);
        if (it == catalogs.end()) throw DataError("store has no domain '" + domain + "'");
        return it->second;
    }

    /// Users with at least one target action, in id order; a missing source
    /// sequence is empty.
    Population population(const std::string& source, const std::string& target) const {
        if (source == target) throw UsageError("source and target domains must differ");
        Population pop;
        pop.source_catalog = catalog(source);
        pop.target_catalog = catalog(target);
        const auto& src = sequences.count(source) ? sequences.at(source) : std::map<std::string, ActionSequence>{};
        const auto& tgt = sequences.count(target) ? sequences.at(target) : std::map<std::string, ActionSequence>{};
        for (const auto& [user, seq] : tgt) {
            UserData u{user, ActionSequence{user, source, {}}, seq};
            if (auto it = src.find(user); it != src.end()) u.source = it->second;
            pop.users.push_back(std::move(u));
        }
        const bool same = truth_domains && *truth_domains == std::make_pair(source, target);
        const bool swapped = truth_domains && *truth_domains == std::make_pair(target, source);
        const bool complete = std::all_of(pop.users.begin(), pop.users.end(),
                                          [&](const UserData& u) { return truth.count(u.user_id) != 0; });
        if ((same || swapped) && complete) {
            for (const auto& u : pop.users) {
                const auto& t = truth.at(u.user_id);
                pop.truth.push_back(same ? t : GroundTruth{t.theta_target, t.theta_source, t.phi_t, t.phi_s, t.z_t, t.z_s});
            }
        }
        return pop;
    }

    /// Default pair: the two domains in id order when exactly two exist.
    std::pair<std::string, std::string> resolve_pair(const std::string& source, const std::string& target) const {
        if (!source.empty() && !target.empty()) return {source, target};
        const auto d = domains();
        if (d.size() != 2) {
            throw UsageError("store has " + std::to_string(d.size()) +
                             " domains; pass --source-domain and --target-domain");
        }
        if (source.empty() && target.empty()) return {d[0], d[1]};
        if (source.empty()) return {target == d[0] ? d[1] : d[0], target};
        return {source, source == d[0] ? d[1] : d[0]};
    }
};

/// Catalogs with choices sorted by id and sequences validated per user.
inline Store build_store(const ParsedLog& log) {
    Store store;
    for (const auto& [domain, choices] : log.keywords) {
        std::vector<Choice> cs;
        for (const auto& [id, kws] : choices) cs.push_back({id, kws});
        store.catalogs.emplace(domain, DomainCatalog(domain, std::move(cs)));
    }
    for (const auto& row : log.rows) {
        const auto& cat = store.catalogs.at(row.domain_id);
        auto& seq = store.sequences[row.domain_id][row.user_id];
        seq.user_id = row.user_id;
        seq.domain_id = row.domain_id;
        seq.actions.push_back({cat.index_of(row.choice_id), row.timestamp});
    }
    for (auto& [domain, users] : store.sequences) {
        for (auto& [user, seq] : users) seq = validate_sequence(std::move(seq), store.catalogs.at(domain));
    }
    return store;
}

/// Store holding one population's two domains and, when present, its truth.
inline Store store_from_population(const Population& pop) {
    Store store;
    const auto& s = pop.source_catalog.domain_id();
    const auto& t = pop.target_catalog.domain_id();
    store.catalogs.emplace(s, pop.source_catalog);
    store.catalogs.emplace(t, pop.target_catalog);
    store.sequences[s];
    store.sequences[t];
    for (std::size_t i = 0; i < pop.users.size(); ++i) {
        const auto& u = pop.users[i];
        if (!u.source.actions.empty()) store.sequences[s][u.user_id] = u.source;
        if (!u.target.actions.empty()) store.sequences[t][u.user_id] = u.target;
        if (!pop.truth.empty()) store.truth[u.user_id] = pop.truth[i];
    }
    if (!pop.truth.empty() || pop.users.empty()) store.truth_domains = {s, t};
    return store;
}

inline Json truth_json(const std::string& user, const GroundTruth& t) {
    return Json{{"user", user},          {"theta_source", t.theta_source}, {"theta_target", t.theta_target},
                {"phi_s", t.phi_s},      {"phi_t", t.phi_t},               {"z_s", t.z_s},
                {"z_t", t.z_t},          {"nst_source", nst(t.theta_source).nst},
                {"nst_target", nst(t.theta_target).nst}};
}

inline void write_truth(std::ostream& out, const Store& store) {
    out << Json{{"source", store.truth_domains->first}, {"target", store.truth_domains->second}}.dump() << '\n';
    for (const auto& [user, t] : store.truth) out << truth_json(user, t).dump() << '\n';
}

inline void write_store(const Store& store, const fs::path& dir) {
    fs::create_directories(dir);
    auto index = open_output(dir / "index.tsv");
    index << "# cdnst store v1\n";
    index << "domain\tcatalog\tactions\tchoices\tusers\tevents\n";
    for (const auto& [domain, cat] : store.catalogs) {
        const std::string cat_file = "catalog_" + domain + ".tsv";
        const std::string act_file = "actions_" + domain + ".tsv";
        auto cout_ = open_output(dir / cat_file);
        cout_ << "choice_id\tkeywords\n";
        for (const auto& ch : cat.choices()) {
            cout_ << ch.id << '\t';
            for (std::size_t k = 0; k < ch.keywords.size(); ++k) cout_ << (k ? ";" : "") << ch.keywords[k].text();
            cout_ << '\n';
        }
        auto aout = open_output(dir / act_file);
        aout << "user_id\tchoice_id\ttimestamp\n";
        std::size_t users = 0, events = 0;
        if (auto it = store.sequences.find(domain); it != store.sequences.end()) {
            for (const auto& [user, seq] : it->second) {
                ++users;
                for (const auto& a : seq.actions) {
                    aout << user << '\t' << cat.choice(a.choice).id << '\t' << a.timestamp << '\n';
                    ++events;
                }
            }
        }
        index << domain << '\t' << cat_file << '\t' << act_file << '\t' << cat.size() << '\t' << users << '\t'
              << events << '\n';
    }
    if (store.truth_domains) {
        auto tout = open_output(dir / "truth.jsonl");
        write_truth(tout, store);
    } else if (fs::exists(dir / "truth.jsonl")) {
        fs::remove(dir / "truth.jsonl");
    }
}

namespace detail {

template <class Fn>
void read_tsv(const fs::path& path, std::size_t fields, Fn&& fn) {
    auto in = open_input(path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 || line.empty() || line[0] == '#') continue;  // header
        auto f = split(line, '\t');
        if (f.size() != fields) {
            throw DataError(path.filename().string() + " line " + std::to_string(line_no) + ": expected " +
                            std::to_string(fields) + " fields");
        }
        fn(f, line_no);
    }
}

}  // namespace detail

/// Files listed in index.tsv, in index order.
inline std::vector<fs::path> store_files(const fs::path& dir) {
    std::vector<fs::path> files{dir / "index.tsv"};
    auto in = open_input(dir / "index.tsv");
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("domain\t", 0) == 0) continue;
        auto f = split(line, '\t');
        if (f.size() != 6) throw DataError("index.tsv: malformed line");
        files.push_back(dir / f[1]);
        files.push_back(dir / f[2]);
    }
    if (fs::exists(dir / "truth.jsonl")) files.push_back(dir / "truth.jsonl");
    return files;
}

inline std::uint64_t store_digest(const fs::path& dir) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& f : store_files(dir)) {
        h = fnv1a64(f.filename().string(), h);
        h = digest_file(f, h);
    }
    return h;
}

inline Store read_store(const fs::path& dir) {
    if (!fs::exists(dir / "index.tsv")) throw DataError("not a store: " + dir.string() + " (no index.tsv)");
    Store store;
    std::vector<std::array<std::string, 3>> entries;
    {
        auto in = open_input(dir / "index.tsv");
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#' || line.rfind("domain\t", 0) == 0) continue;
            auto f = split(line, '\t');
            if (f.size() != 6) throw DataError("index.tsv: malformed line");
            entries.push_back({f[0], f[1], f[2]});
        }
    }
    for (const auto& [domain, cat_file, act_file] : entries) {
        std::vector<Choice> choices;
        detail::read_tsv(dir / cat_file, 2, [&](const std::vector<std::string>& f, std::size_t) {
            Choice ch{f[0], {}};
            for (const auto& kw : split(f[1], ';')) ch.keywords.push_back(normalize_keyword(kw));
            choices.push_back(std::move(ch));
        });
        auto [it, ok] = store.catalogs.emplace(domain, DomainCatalog(domain, std::move(choices)));
        const auto& cat = it->second;
        auto& seqs = store.sequences[domain];
        detail::read_tsv(dir / act_file, 3, [&](const std::vector<std::string>& f, std::size_t line_no) {
            auto ts = parse_timestamp(f[2]);
            if (!ts) throw DataError(act_file + " line " + std::to_string(line_no) + ": bad timestamp");
            auto& seq = seqs[f[0]];
            seq.user_id = f[0];
            seq.domain_id = domain;
            seq.actions.push_back({cat.index_of(f[1]), *ts});
        });
        for (auto& [user, seq] : seqs) seq = validate_sequence(std::move(seq), cat);
    }
    if (fs::exists(dir / "truth.jsonl")) {
        auto in = open_input(dir / "truth.jsonl");
        std::string line;
        bool header = true;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto j = Json::parse(line);
            if (header) {
                store.truth_domains = {j.at("source").get<std::string>(), j.at("target").get<std::string>()};
                header = false;
                continue;
            }
            GroundTruth t;
            j.at("theta_source").get_to(t.theta_source);
            j.at("theta_target").get_to(t.theta_target);
            j.at("phi_s").get_to(t.phi_s);
            j.at("phi_t").get_to(t.phi_t);
            j.at("z_s").get_to(t.z_s);
            j.at("z_t").get_to(t.z_t);
            store.truth[j.at("user").get<std::string>()] = std::move(t);
        }
    }
    return store;
}

struct StoreSummary {
    std::size_t users = 0;
    struct PerDomain {
        std::string domain;
        std::size_t choices = 0;
        std::size_t users = 0;
        std::size_t events = 0;
        double mean_actions_per_user = 0.0;
        double mean_keywords_per_choice = 0.0;
        std::size_t vocabulary = 0;
    };
    std::vector<PerDomain> domains;
};

inline StoreSummary summarize(const Store& store) {
    StoreSummary s;
    s.users = store.users().size();
    for (const auto& [domain, cat] : store.catalogs) {
        StoreSummary::PerDomain d{domain, cat.size()};
        if (auto it = store.sequences.find(domain); it != store.sequences.end()) {
            d.users = it->second.size();
            for (const auto& [u, seq] : it->second) d.events += seq.size();
        }
        if (d.users) d.mean_actions_per_user = static_cast<double>(d.events) / static_cast<double>(d.users);
        std::size_t kws = 0;
        for (const auto& ch : cat.choices()) kws += ch.keywords.size();
        d.mean_keywords_per_choice = static_cast<double>(kws) / static_cast<double>(cat.size());
        d.vocabulary = cat.vocabulary_size();
        s.domains.push_back(d);
    }
    return s;
}

inline void write_summary(std::ostream& out, const StoreSummary& s) {
    out << "users\t" << s.users << '\n';
    out << "domain\tchoices\tusers\tactions\tactions_per_user\tkeywords_per_choice\tvocabulary\n";
    for (const auto& d : s.domains) {
        out << d.domain << '\t' << d.choices << '\t' << d.users << '\t' << d.events << '\t' << std::fixed
            << std::setprecision(2) << d.mean_actions_per_user << '\t' << d.mean_keywords_per_choice << '\t'
            << std::defaultfloat << d.vocabulary << '\n';
    }
}

// ---------------------------------------------------------------------------
// Fitted models

struct ModelFile {
    std::string method;
    std::string source_domain;
    std::string target_domain;
    std::size_t holdout = 0;
    Json config;
    std::map<std::string, FitResult> fits;
};

inline std::string model_filename(const std::string& method, const std::string& source, const std::string& target) {
    return "fit_" + method + "_" + source + "_" + target + ".jsonl";
}

inline Json config_json(const Hyperparams& hp, const SamplerConfig& cfg) {
    return Json{{"K", hp.K},
                {"alpha_s", hp.alpha_s.empty() ? 0.0 : hp.alpha_s[0]},
                {"alpha_t", hp.alpha_t.empty() ? 0.0 : hp.alpha_t[0]},
                {"beta", hp.beta.empty() ? 0.0 : hp.beta[0]},
                {"burn_in", cfg.burn_in},
                {"samples", cfg.samples},
                {"thin", cfg.thin},
                {"seed", cfg.seed},
                {"z_mode", to_string(cfg.z_mode)},
                {"phi_kernel", to_string(cfg.phi_kernel)}};
}

/// Inverse of config_json, sized for the given catalogs.
inline std::pair<Hyperparams, SamplerConfig> settings_from_config(const Json& j, std::size_t M_s, std::size_t M_t) {
    try {
        auto hp = Hyperparams::symmetric(j.at("K").get<int>(), M_s, M_t, j.at("alpha_s").get<double>(),
                                         j.at("beta").get<double>());
        hp.alpha_t.assign(M_t, j.at("alpha_t").get<double>());
        SamplerConfig cfg;
        cfg.burn_in = j.at("burn_in").get<int>();
        cfg.samples = j.at("samples").get<int>();
        cfg.thin = j.at("thin").get<int>();
        cfg.seed = j.at("seed").get<std::uint64_t>();
        cfg.z_mode = parse_zmode(j.at("z_mode").get<std::string>());
        cfg.phi_kernel = parse_phi_kernel(j.at("phi_kernel").get<std::string>());
        hp.validate();
        cfg.validate();
        return {hp, cfg};
    } catch (const Json::exception& e) {
        throw DataError(std::string("bad model config: ") + e.what());
    } catch (const UsageError& e) {
        throw DataError(std::string("bad model config: ") + e.what());
    }
}

inline void write_model_file(std::ostream& out, const ModelFile& mf) {
    out << Json{{"method", mf.method},
                {"source", mf.source_domain},
                {"target", mf.target_domain},
                {"holdout", mf.holdout},
                {"config", mf.config},
                {"users", mf.fits.size()}}
               .dump()
        << '\n';
    for (const auto& [user, f] : mf.fits) {
        out << Json{{"user", user},
                    {"nst", f.nst_estimate},
                    {"theta", f.theta},
                    {"phi_s", f.phi_s},
                    {"phi_t", f.phi_t},
                    {"acceptance_s", f.diagnostics.acceptance_s()},
                    {"acceptance_t", f.diagnostics.acceptance_t()}}
                   .dump()
            << '\n';
    }
}

inline ModelFile read_model_file(std::istream& in) {
    ModelFile mf;
    std::string line;
    bool header = true;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::exception& e) {
            throw DataError("model file line " + std::to_string(line_no) + ": " + e.what());
        }
        if (header) {
            mf.method = j.at("method").get<std::string>();
            mf.source_domain = j.at("source").get<std::string>();
            mf.target_domain = j.at("target").get<std::string>();
            mf.holdout = j.at("holdout").get<std::size_t>();
            mf.config = j.at("config");
            header = false;
            continue;
        }
        FitResult f;
        f.nst_estimate = j.at("nst").get<double>();
        j.at("theta").get_to(f.theta);
        j.at("phi_s").get_to(f.phi_s);
        j.at("phi_t").get_to(f.phi_t);
        mf.fits[j.at("user").get<std::string>()] = std::move(f);
    }
    if (header) throw DataError("model file is empty");
    return mf;
}

// ---------------------------------------------------------------------------
// Reports

inline void write_report_table(std::ostream& out, const ExperimentReport& rep) {
    const std::string kn = rep.config.count("k_ndcg") ? rep.config.at("k_ndcg") : "k";
    const std::string kp = rep.config.count("k_prec") ? rep.config.at("k_prec") : "k";
    const std::string pm = rep.config.count("precision_mode") ? rep.config.at("precision_mode") : "standard";
    std::string dataset;
    for (const auto& r : rep.rows) {
        if (r.dataset != dataset) {
            dataset = r.dataset;
            out << "\n" << dataset << "\n";
            out << std::left << std::setw(12) << "method" << std::right << std::setw(10) << "MRR" << std::setw(12)
                << ("nDCG@" + kn) << std::setw(10) << ("P@" + kp) << std::setw(8) << "users" << '\n';
        }
        out << std::left << std::setw(12) << r.method << std::right;
        if (r.empty) {
            out << std::setw(10) << "-" << std::setw(12) << "-" << std::setw(10) << "-" << std::setw(8) << 0
                << "  (empty)\n";
            continue;
        }
        const double p = pm == "paper_literal" ? r.prec_literal : r.prec_standard;
        out << std::fixed << std::setprecision(4) << std::setw(10) << r.mrr << std::setw(12) << r.ndcg
            << std::setw(10) << p << std::setw(8) << r.users << '\n'
            << std::defaultfloat;
    }
    out << "\n";
    for (const auto& [k, v] : rep.config) out << k << ": " << v << '\n';
    out << "skipped_users: " << rep.skipped_users << '\n';
    for (const auto& [m, n] : rep.failures) out << "failures[" << m << "]: " << n << '\n';
}

/// One row per (method, dataset, metric, value).
inline void write_report_tsv(std::ostream& out, const ExperimentReport& rep) {
    const std::string kn = rep.config.count("k_ndcg") ? rep.config.at("k_ndcg") : "15";
    const std::string kp = rep.config.count("k_prec") ? rep.config.at("k_prec") : "3";
    out << "method\tdataset\tmetric\tvalue\n";
    for (const auto& r : rep.rows) {
        auto row = [&](const std::string& metric, const std::string& value) {
            out << r.method << '\t' << r.dataset << '\t' << metric << '\t' << value << '\n';
        };
        row("users", std::to_string(r.users));
        if (r.empty) continue;
        row("mrr", format_double(r.mrr));
        row("ndcg@" + kn, format_double(r.ndcg));
        row("precision@" + kp, format_double(r.prec_standard));
        row("precision_literal@" + kp, format_double(r.prec_literal));
    }
}

inline void write_per_user_tsv(std::ostream& out, const ExperimentReport& rep) {
    out << "dataset\tmethod\tuser\tmrr\tndcg\tprecision\tprecision_literal\n";
    for (const auto& m : rep.per_user) {
        out << m.dataset << '\t' << m.method << '\t' << m.user_id << '\t' << format_double(m.mrr) << '\t'
            << format_double(m.ndcg) << '\t' << format_double(m.prec_standard) << '\t'
            << format_double(m.prec_literal) << '\n';
    }
}

inline std::vector<UserMetrics> read_per_user_tsv(std::istream& in) {
    std::vector<UserMetrics> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        if (++line_no == 1 || line.empty()) continue;
        auto f = split(line, '\t');
        if (f.size() != 7) throw DataError("per-user line " + std::to_string(line_no) + ": expected 7 fields");
        out.push_back({f[0], f[1], f[2], std::stod(f[3]), std::stod(f[4]), std::stod(f[5]), std::stod(f[6])});
    }
    return out;
}

inline void write_relatedness_table(std::ostream& out, const RelatednessReport& r, const std::string& a,
                                    const std::string& b) {
    out << "pair\tSim(" << a << "->" << b << ")\tSim(" << b << "->" << a << ")\n";
    out << a << '-' << b << '\t' << std::fixed << std::setprecision(4) << r.sim_ab << '\t' << r.sim_ba << '\n'
        << std::defaultfloat;
    out << "users: " << r.user_count << "  with pairs " << a << "->" << b << ": " << r.users_with_pairs_ab << "  "
        << b << "->" << a << ": " << r.users_with_pairs_ba << '\n';
    out << "tau_seconds: " << r.tau << "  embeddings: " << r.provider << "  missing_pairs: " << r.missing << '\n';
}

inline void write_relatedness_tsv(std::ostream& out, const RelatednessReport& r, const std::string& a,
                                  const std::string& b, bool per_user) {
    out << "scope\tdirection\tsim\tpairs_or_users\n";
    out << "aggregate\t" << a << "->" << b << '\t' << format_double(r.sim_ab) << '\t' << r.users_with_pairs_ab << '\n';
    out << "aggregate\t" << b << "->" << a << '\t' << format_double(r.sim_ba) << '\t' << r.users_with_pairs_ba << '\n';
    if (!per_user) return;
    for (const auto& [user, v] : r.per_user) {
        out << user << '\t' << a << "->" << b << '\t' << format_double(v.sim_ab) << '\t' << v.pairs_ab << '\n';
        out << user << '\t' << b << "->" << a << '\t' << format_double(v.sim_ba) << '\t' << v.pairs_ba << '\n';
    }
}

inline void write_long_tail(std::ostream& out, const LongTailTable& t) {
    out << "domain";
    for (auto th : t.thresholds) out << "\t>" << th;
    out << '\n';
    for (std::size_t d = 0; d < t.domains.size(); ++d) {
        out << t.domains[d];
        for (double f : t.fractions[d]) out << '\t' << format_double(f);
        out << '\n';
    }
}

inline EmbeddingTable load_embeddings(const fs::path& path) {
    auto in = open_input(path);
    return EmbeddingTable::load(in, path.filename().string());
}

// ---------------------------------------------------------------------------
// Run manifests

struct RunManifest {
    std::string command;
    std::vector<std::string> argv;  // canonical: without --jobs, with the resolved seed
    std::map<std::string, std::uint64_t> seeds;
    std::map<std::string, std::string> inputs;  // path -> digest
    std::vector<std::string> outputs;
    std::string version = tool_version;

    Json to_json() const {
        Json in = Json::object();
        for (const auto& [p, d] : inputs) in[p] = d;
        return Json{{"command", command}, {"argv", argv},       {"seeds", seeds},
                    {"inputs", in},       {"outputs", outputs}, {"version", version}};
    }

    static RunManifest from_json(const Json& j) {
        RunManifest m;
        m.command = j.at("command").get<std::string>();
        j.at("argv").get_to(m.argv);
        if (j.contains("seeds")) j.at("seeds").get_to(m.seeds);
        if (j.contains("inputs")) {
            for (const auto& [k, v] : j.at("inputs").items()) m.inputs[k] = v.get<std::string>();
        }
        if (j.contains("outputs")) j.at("outputs").get_to(m.outputs);
        if (j.contains("version")) m.version = j.at("version").get<std::string>();
        return m;
    }
};

inline void write_manifest(const fs::path& path, const RunManifest& m) {
    auto out = open_output(path);
    out << m.to_json().dump(2) << '\n';
}

inline RunManifest read_manifest(const fs::path& path) {
    auto in = open_input(path);
    try {
        return RunManifest::from_json(Json::parse(in));
    } catch (const Json::exception& e) {
        throw DataError("manifest " + path.string() + ": " + e.what());
    }
}

}  // namespace cdnst

#endif
