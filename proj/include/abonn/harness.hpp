#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "abonn/error.hpp"
#include "abonn/io.hpp"
#include "abonn/network.hpp"
#include "abonn/oracle.hpp"
#include "abonn/search.hpp"
#include "abonn/specification.hpp"

namespace abonn {

// ---------------------------------------------------------------------------
// Names

inline Strategy parse_strategy(const std::string& s) {
    if (s == "mcts") return Strategy::mcts;
    if (s == "bfs") return Strategy::bfs;
    if (s == "greedy") return Strategy::greedy;
    throw PreconditionError("unknown strategy '" + s + "'");
}

inline Heuristic parse_heuristic(const std::string& s) {
    if (s == "relax_area") return Heuristic::relax_area;
    if (s == "widest") return Heuristic::widest;
    if (s == "sequential") return Heuristic::sequential;
    throw PreconditionError("unknown heuristic '" + s + "'");
}

inline Domain parse_domain(const std::string& s) {
    if (s == "interval") return Domain::interval;
    if (s == "linrelax") return Domain::linrelax;
    throw PreconditionError("unknown domain '" + s + "'");
}

inline PminMode parse_pmin_mode(const std::string& s) {
    if (s == "frozen_root") return PminMode::frozen_root;
    if (s == "running_min") return PminMode::running_min;
    throw PreconditionError("unknown p_min mode '" + s + "'");
}

inline LeafMode parse_leaf_mode(const std::string& s) {
    if (s == "exact_lp") return LeafMode::exact_lp;
    if (s == "unknown") return LeafMode::unknown;
    throw PreconditionError("unknown leaf mode '" + s + "'");
}

inline Outcome parse_outcome(const std::string& s) {
    if (s == "verified_true") return Outcome::verified_true;
    if (s == "violated_false") return Outcome::violated_false;
    if (s == "timeout") return Outcome::timeout;
    throw ParseError("unknown outcome '" + s + "'");
}

enum class GenProfile { violated_rich, mixed, certified_rich };

inline GenProfile parse_profile(const std::string& s) {
    if (s == "violated_rich") return GenProfile::violated_rich;
    if (s == "mixed") return GenProfile::mixed;
    if (s == "certified_rich") return GenProfile::certified_rich;
    throw PreconditionError("unknown profile '" + s + "'");
}

inline const char* to_string(GenProfile p) {
    switch (p) {
        case GenProfile::violated_rich: return "violated_rich";
        case GenProfile::mixed: return "mixed";
        case GenProfile::certified_rich: return "certified_rich";
    }
    return "?";
}

/// Deterministic portable draws on top of mt19937_64 (whose sequence is fixed
/// by the standard, unlike the std distributions).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }
    std::size_t between(std::size_t lo, std::size_t hi) { return lo + below(hi - lo + 1); }

private:
    std::mt19937_64 gen_;
};

// ---------------------------------------------------------------------------
// Problems and manifests

struct ProblemDescriptor {
    std::string id;
    std::string model_path;            // resolved against the manifest directory
    std::optional<std::string> spec_path;
    std::optional<json> inline_spec;   // used when spec_path is absent
    std::optional<Outcome> expected;   // oracle ground truth
    std::size_t ambiguous = 0;
};

struct Manifest {
    std::vector<ProblemDescriptor> problems;
    std::uint64_t seed = 0;
    std::string profile;
};

struct LoadedProblem {
    Network net;
    Specification spec;
};

inline LoadedProblem load_problem(const ProblemDescriptor& d) {
    LoadedProblem p;
    p.net = load_network_file(d.model_path);
    try {
        if (d.spec_path) p.spec = load_spec(read_text_file(*d.spec_path), p.net.output_dim());
        else if (d.inline_spec) p.spec = spec_from_json(*d.inline_spec, p.net.output_dim());
        else throw ParseError("problem has no specification");
    } catch (const ParseError& e) {
        throw ParseError((d.spec_path ? *d.spec_path : d.id) + ": " + e.what());
    }
    try {
        check_dimensions(p.net, p.spec);
    } catch (const DimensionError& e) {
        throw DimensionError(d.id + ": " + e.what());
    }
    return p;
}

inline Manifest load_manifest(const std::string& path) {
    const json j = detail::parse_json_text(read_text_file(path));
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return (fp.is_absolute() ? fp : base / fp).string();
    };
    Manifest m;
    if (j.contains("seed")) m.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("profile")) m.profile = j.at("profile").get<std::string>();
    const json& probs = detail::field(j, "problems", path);
    if (!probs.is_array()) throw ParseError(path + ": 'problems' must be an array");
    for (const auto& pj : probs) {
        ProblemDescriptor d;
        d.id = detail::field(pj, "id", path).get<std::string>();
        d.model_path = resolve(detail::field(pj, "model", path).get<std::string>());
        const json& sj = detail::field(pj, "spec", path);
        if (sj.is_string()) d.spec_path = resolve(sj.get<std::string>());
        else d.inline_spec = sj;
        if (pj.contains("expected") && pj.at("expected").is_string())
            d.expected = parse_outcome(pj.at("expected").get<std::string>());
        if (pj.contains("ambiguous")) d.ambiguous = pj.at("ambiguous").get<std::size_t>();
        m.problems.push_back(std::move(d));
    }
    return m;
}

// ---------------------------------------------------------------------------
// Suite generation

namespace detail {

inline std::size_t argmax(const Vector& y) {
    return static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
}

inline Network random_network(Rng& rng, std::size_t inputs, std::size_t outputs) {
    const std::size_t hidden = rng.between(1, 3);
    std::vector<Layer> layers;
    std::size_t fan_in = inputs;
    for (std::size_t h = 0; h <= hidden; ++h) {
        const bool last = h == hidden;
        const std::size_t width = last ? outputs : rng.between(4, 32);
        const double a = std::sqrt(6.0 / static_cast<double>(fan_in));
        Layer l{Matrix(width, fan_in), Vector(width), last ? Activation::identity : Activation::relu};
        for (std::size_t r = 0; r < width; ++r) {
            for (std::size_t c = 0; c < fan_in; ++c) l.weights(r, c) = rng.uniform(-a, a);
            l.bias[r] = rng.uniform(-0.1, 0.1);
        }
        layers.push_back(std::move(l));
        fan_in = width;
    }
    return Network(std::move(layers));
}

struct GeneratedProblem {
    Network net;
    Vector center;
    double epsilon = 0.0;
    std::size_t label = 0;
    Specification spec;
    std::size_t ambiguous = 0;
};

/// Places the center at a random L-inf distance d from a decision boundary
/// found along a random ray and sets epsilon = kappa * d; the profile picks
/// the kappa range (kappa > 1 guarantees a violation). Instances the root
/// analysis already decides are rejected.
inline std::optional<GeneratedProblem> try_generate(Rng& rng, GenProfile profile, std::size_t max_ambiguous) {
    const std::size_t inputs = rng.between(2, 5);
    const std::size_t outputs = rng.between(2, 4);
    Network net = random_network(rng, inputs, outputs);

    Vector x0(inputs);
    for (double& v : x0) v = rng.uniform(0.2, 0.8);
    const std::size_t label0 = argmax(forward(net, x0));

    Vector dir(inputs);
    double norm = 0.0;
    for (double& v : dir) {
        v = rng.uniform(-1.0, 1.0);
        norm = std::max(norm, std::fabs(v));
    }
    if (norm < 1e-6) return std::nullopt;
    for (double& v : dir) v /= norm;

    // Largest step keeping x0 + t*dir inside [0, 1]^n.
    double t_max = 1.0;
    for (std::size_t i = 0; i < inputs; ++i) {
        if (dir[i] > 0) t_max = std::min(t_max, (1.0 - x0[i]) / dir[i]);
        if (dir[i] < 0) t_max = std::min(t_max, -x0[i] / dir[i]);
    }
    auto point = [&](double t) {
        Vector p(inputs);
        for (std::size_t i = 0; i < inputs; ++i) p[i] = std::clamp(x0[i] + t * dir[i], 0.0, 1.0);
        return p;
    };
    double lo = 0.0, hi = -1.0;
    for (double t = 0.01; t <= t_max; t += 0.01) {
        if (argmax(forward(net, point(t))) != label0) {
            hi = t;
            break;
        }
        lo = t;
    }
    if (hi < 0.0) return std::nullopt;
    for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        (argmax(forward(net, point(mid))) != label0 ? hi : lo) = mid;
    }

    const double dist = hi * rng.uniform(0.2, 0.8);
    double kappa = 1.0;
    switch (profile) {
        case GenProfile::violated_rich: kappa = rng.uniform(1.05, 1.6); break;
        case GenProfile::mixed: kappa = rng.uniform(0.3, 1.3); break;
        case GenProfile::certified_rich: kappa = rng.uniform(0.2, 0.9); break;
    }
    GeneratedProblem g;
    g.center = point(hi - dist);
    g.epsilon = kappa * dist;
    g.label = argmax(forward(net, g.center));
    g.spec = robustness_spec(g.center, g.epsilon, g.label, 0.0, 1.0, outputs);
    g.ambiguous = root_ambiguous_neurons(net, g.spec.region).size();
    if (g.ambiguous == 0 || g.ambiguous > max_ambiguous) return std::nullopt;
    // Keep only instances that need branching: the root must be a false alarm.
    const BoundResult root = linrelax_analyze(net, g.spec.region, ConstraintSeq{}, g.spec.property);
    if (root.infeasible || root.p_hat >= 0.0) return std::nullopt;
    if (root.candidate && is_counterexample(net, g.spec, *root.candidate)) return std::nullopt;
    g.net = std::move(net);
    return g;
}

inline json robustness_json(const GeneratedProblem& g) {
    return {{"center", g.center}, {"epsilon", g.epsilon}, {"label", g.label}, {"domain", {0.0, 1.0}}};
}

inline std::string problem_id(std::size_t i) {
    std::ostringstream s;
    s << "p" << std::setw(3) << std::setfill('0') << i;
    return s.str();
}

}  // namespace detail

inline constexpr std::size_t max_generated_ambiguous = 12;

/// Writes `count` random problems plus manifest.json under out_dir; ground
/// truth comes from the exhaustive oracle. Deterministic in (seed, count, profile).
inline Manifest gen_suite(std::uint64_t seed, std::size_t count, GenProfile profile, const std::string& out_dir) {
    detail::require(count >= 1, "gen: count must be at least 1");
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "models");
    fs::create_directories(fs::path(out_dir) / "specs");

    Rng rng(seed);
    Manifest m;
    m.seed = seed;
    m.profile = to_string(profile);
    json problems = json::array();
    for (std::size_t i = 0; i < count; ++i) {
        std::optional<detail::GeneratedProblem> g;
        while (!g) g = detail::try_generate(rng, profile, max_generated_ambiguous);
        const OracleVerdict truth = enumerate_verdict(g->net, g->spec, max_generated_ambiguous);
        const std::string id = detail::problem_id(i);
        const std::string model_rel = "models/" + id + ".json";
        const std::string spec_rel = "specs/" + id + ".json";
        write_text_file((fs::path(out_dir) / model_rel).string(), network_to_json(g->net).dump() + "\n");
        write_text_file((fs::path(out_dir) / spec_rel).string(), detail::robustness_json(*g).dump() + "\n");
        const Outcome expected = truth.verified ? Outcome::verified_true : Outcome::violated_false;
        problems.push_back({{"id", id},
                            {"model", model_rel},
                            {"spec", spec_rel},
                            {"expected", to_string(expected)},
                            {"ambiguous", g->ambiguous}});
        ProblemDescriptor d;
        d.id = id;
        d.model_path = (fs::path(out_dir) / model_rel).string();
        d.spec_path = (fs::path(out_dir) / spec_rel).string();
        d.expected = expected;
        d.ambiguous = g->ambiguous;
        m.problems.push_back(std::move(d));
    }
    const json manifest = {{"seed", seed}, {"profile", to_string(profile)}, {"count", count}, {"problems", problems}};
    write_text_file((fs::path(out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
    return m;
}

// ---------------------------------------------------------------------------
// Crosscheck

enum class CrosscheckResult { confirmed, refuted, inconclusive };

inline const char* to_string(CrosscheckResult r) {
    switch (r) {
        case CrosscheckResult::confirmed: return "confirmed";
        case CrosscheckResult::refuted: return "refuted";
        case CrosscheckResult::inconclusive: return "inconclusive";
    }
    return "?";
}

inline constexpr std::size_t crosscheck_samples = 10000;

/// Independent audit of a verdict. A counterexample is re-validated exactly;
/// a verified claim is probed with uniform samples (plus every box corner up
/// to 10 inputs) and stays `inconclusive` unless a violation turns up.
inline CrosscheckResult crosscheck(const Network& net, const Specification& s, Outcome outcome,
                                   const std::optional<Vector>& counterexample, std::uint64_t seed = 0x5eed) {
    if (outcome == Outcome::violated_false) {
        if (!counterexample || counterexample->size() != net.input_dim()) return CrosscheckResult::refuted;
        return is_counterexample(net, s, *counterexample) ? CrosscheckResult::confirmed : CrosscheckResult::refuted;
    }
    if (outcome != Outcome::verified_true) return CrosscheckResult::inconclusive;
    const std::size_t n = net.input_dim();
    Vector x(n);
    if (n <= 10) {
        for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
            for (std::size_t i = 0; i < n; ++i) x[i] = (mask >> i) & 1 ? s.region.upper[i] : s.region.lower[i];
            if (is_counterexample(net, s, x)) return CrosscheckResult::refuted;
        }
    }
    Rng rng(seed);
    for (std::size_t k = 0; k < crosscheck_samples; ++k) {
        for (std::size_t i = 0; i < n; ++i) x[i] = rng.uniform(s.region.lower[i], s.region.upper[i]);
        if (is_counterexample(net, s, x)) return CrosscheckResult::refuted;
    }
    return CrosscheckResult::inconclusive;
}

// ---------------------------------------------------------------------------
// Runs and reports

struct RunRecord {
    std::string problem;
    Strategy strategy = Strategy::mcts;
    double lambda = 0.5;
    double c = 0.2;
    std::optional<Outcome> outcome;  // absent when the run failed
    std::optional<Outcome> expected;
    std::optional<Vector> counterexample;
    SearchStats stats;
    std::optional<double> speedup_vs_bfs;
    std::optional<double> appver_ratio_vs_bfs;
    std::optional<CrosscheckResult> check;
    std::string error;

    bool solved() const { return outcome && *outcome != Outcome::timeout; }
    bool agrees() const { return !expected || !solved() || *outcome == *expected; }
};

struct SingleRun {
    RunRecord record;
    std::optional<BabTree> tree;
    std::optional<LoadedProblem> problem;
};

/// Loads one problem and runs cfg.strategy on it. Load and solver errors are
/// captured in record.error; invariant breaches propagate.
inline SingleRun run_single(const ProblemDescriptor& d, const SearchConfig& cfg, bool audit = true) {
    SingleRun out;
    RunRecord& r = out.record;
    r.problem = d.id;
    r.strategy = cfg.strategy;
    r.lambda = cfg.lambda;
    r.c = cfg.strategy == Strategy::greedy ? 0.0 : cfg.c;
    r.expected = d.expected;
    try {
        out.problem = load_problem(d);
        SearchRun run = run_search(out.problem->net, out.problem->spec, cfg);
        r.outcome = run.verdict.outcome;
        r.counterexample = run.verdict.counterexample;
        r.stats = std::move(run.verdict.stats);
        out.tree = std::move(run.tree);
        if (audit) r.check = crosscheck(out.problem->net, out.problem->spec, *r.outcome, r.counterexample);
    } catch (const InvariantError&) {
        throw;
    } catch (const Error& e) {
        r.error = e.what();
    }
    return out;
}

namespace detail {

/// Runs fn(i) for i in [0, n) on up to `jobs` threads.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < jobs; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mu);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

inline double safe_ratio(double num, double den) { return num / std::max(den, 1e-9); }

inline double median(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

inline std::string fmt_double(double v) {
    if (std::isnan(v)) return "";
    std::ostringstream s;
    s << std::setprecision(10) << v;
    return s.str();
}

inline std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_double(*v) : ""; }

}  // namespace detail

struct StrategySummary {
    Strategy strategy = Strategy::mcts;
    std::size_t total = 0;
    std::size_t solved = 0;
    double mean_time_solved = std::nan("");
    double mean_time_all = std::nan("");
};

struct SuiteReport {
    std::vector<RunRecord> records;  // problem-major, strategies in the requested order
    std::vector<StrategySummary> summaries;
};

/// Fills speedup_vs_bfs / appver_ratio_vs_bfs on every non-bfs record whose
/// problem also has a finished bfs run.
inline void attach_speedups(std::vector<RunRecord>& records) {
    std::map<std::string, const RunRecord*> bfs;
    for (const auto& r : records)
        if (r.strategy == Strategy::bfs && r.solved()) bfs[r.problem] = &r;
    for (auto& r : records) {
        if (r.strategy == Strategy::bfs || !r.solved()) continue;
        auto it = bfs.find(r.problem);
        if (it == bfs.end()) continue;
        r.speedup_vs_bfs = detail::safe_ratio(it->second->stats.wall_time, r.stats.wall_time);
        r.appver_ratio_vs_bfs = detail::safe_ratio(static_cast<double>(it->second->stats.appver_calls),
                                                   static_cast<double>(r.stats.appver_calls));
    }
}

inline std::vector<StrategySummary> summarize(const std::vector<RunRecord>& records,
                                              const std::vector<Strategy>& strategies) {
    std::vector<StrategySummary> out;
    for (Strategy s : strategies) {
        StrategySummary sum;
        sum.strategy = s;
        double t_solved = 0.0, t_all = 0.0;
        for (const auto& r : records) {
            if (r.strategy != s) continue;
            ++sum.total;
            t_all += r.stats.wall_time;
            if (r.solved()) {
                ++sum.solved;
                t_solved += r.stats.wall_time;
            }
        }
        if (sum.solved) sum.mean_time_solved = t_solved / static_cast<double>(sum.solved);
        if (sum.total) sum.mean_time_all = t_all / static_cast<double>(sum.total);
        out.push_back(sum);
    }
    return out;
}

inline SuiteReport run_suite(const Manifest& m, const SearchConfig& cfg, const std::vector<Strategy>& strategies,
                             std::size_t jobs = 1) {
    detail::require(!strategies.empty(), "suite: at least one strategy required");
    SuiteReport rep;
    rep.records.resize(m.problems.size() * strategies.size());
    detail::parallel_for(rep.records.size(), jobs, [&](std::size_t i) {
        SearchConfig c = cfg;
        c.strategy = strategies[i % strategies.size()];
        rep.records[i] = run_single(m.problems[i / strategies.size()], c).record;
    });
    attach_speedups(rep.records);
    rep.summaries = summarize(rep.records, strategies);
    return rep;
}

inline const char* suite_csv_header() {
    return "problem,strategy,lambda,c,outcome,expected,agree,wall_time,nodes_expanded,appver_calls,lp_calls,"
           "peak_tree_size,speedup_vs_bfs,appver_ratio_vs_bfs,crosscheck,error";
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

inline std::string csv_row(const RunRecord& r) {
    std::ostringstream s;
    s << r.problem << ',' << to_string(r.strategy) << ',' << detail::fmt_double(r.lambda) << ','
      << detail::fmt_double(r.c) << ',' << (r.outcome ? to_string(*r.outcome) : "error") << ','
      << (r.expected ? to_string(*r.expected) : "") << ',' << (r.agrees() ? 1 : 0) << ','
      << detail::fmt_double(r.stats.wall_time) << ',' << r.stats.nodes_expanded << ',' << r.stats.appver_calls << ','
      << r.stats.lp_calls << ',' << r.stats.peak_tree_size << ',' << detail::fmt_opt(r.speedup_vs_bfs) << ','
      << detail::fmt_opt(r.appver_ratio_vs_bfs) << ',' << (r.check ? to_string(*r.check) : "") << ','
      << csv_escape(r.error);
    return s.str();
}

/// Data rows, then one "#summary" line per strategy.
inline std::string suite_csv(const SuiteReport& rep) {
    std::ostringstream s;
    s << suite_csv_header() << '\n';
    for (const auto& r : rep.records) s << csv_row(r) << '\n';
    for (const auto& sum : rep.summaries)
        s << "#summary," << to_string(sum.strategy) << ",solved=" << sum.solved << ",total=" << sum.total
          << ",mean_time_solved=" << detail::fmt_double(sum.mean_time_solved)
          << ",mean_time_all=" << detail::fmt_double(sum.mean_time_all) << '\n';
    return s.str();
}

/// Per-problem mcts-vs-bfs comparison (scatter data); empty unless both ran.
inline std::string speedup_csv(const std::vector<RunRecord>& records) {
    std::map<std::string, std::pair<const RunRecord*, const RunRecord*>> pairs;  // (bfs, mcts)
    std::vector<std::string> order;
    for (const auto& r : records) {
        if (r.strategy != Strategy::bfs && r.strategy != Strategy::mcts) continue;
        if (!pairs.count(r.problem)) order.push_back(r.problem);
        auto& p = pairs[r.problem];
        (r.strategy == Strategy::bfs ? p.first : p.second) = &r;
    }
    std::ostringstream s;
    s << "problem,expected,bfs_outcome,mcts_outcome,bfs_time,mcts_time,speedup,bfs_appver,mcts_appver,appver_ratio\n";
    for (const auto& id : order) {
        const auto [b, m] = pairs[id];
        if (!b || !m) continue;
        s << id << ',' << (m->expected ? to_string(*m->expected) : "") << ','
          << (b->outcome ? to_string(*b->outcome) : "error") << ',' << (m->outcome ? to_string(*m->outcome) : "error")
          << ',' << detail::fmt_double(b->stats.wall_time) << ',' << detail::fmt_double(m->stats.wall_time) << ','
          << detail::fmt_opt(m->speedup_vs_bfs) << ',' << b->stats.appver_calls << ',' << m->stats.appver_calls << ','
          << detail::fmt_opt(m->appver_ratio_vs_bfs) << '\n';
    }
    return s.str();
}

// ---------------------------------------------------------------------------
// Hyperparameter sweep

struct SweepCell {
    double lambda = 0.0;
    double c = 0.0;
    std::size_t solved = 0;
    std::size_t total = 0;
    double mean_time = std::nan("");     // over solved runs
    double mean_speedup = std::nan("");  // bfs time / mcts time, problems both solved
    double mean_appver = std::nan("");
    double median_appver_ratio = std::nan("");
};

struct SweepReport {
    std::vector<double> lambdas, cs;
    std::vector<SweepCell> cells;        // lambda-major
    std::vector<RunRecord> runs;         // mcts runs, cell-major then problem
    std::vector<RunRecord> greedy_runs;  // one greedy run per (lambda, problem)
    std::vector<RunRecord> bfs_runs;     // baseline, one per problem
};

inline SweepReport sweep(const Manifest& m, const std::vector<double>& lambdas, const std::vector<double>& cs,
                         const SearchConfig& base, std::size_t jobs = 1) {
    detail::require(!lambdas.empty() && !cs.empty(), "sweep: lambda and c lists must be non-empty");
    const std::size_t np = m.problems.size();
    SweepReport rep;
    rep.lambdas = lambdas;
    rep.cs = cs;

    rep.bfs_runs.resize(np);
    detail::parallel_for(np, jobs, [&](std::size_t i) {
        SearchConfig c = base;
        c.strategy = Strategy::bfs;
        rep.bfs_runs[i] = run_single(m.problems[i], c, false).record;
    });

    rep.runs.resize(lambdas.size() * cs.size() * np);
    detail::parallel_for(rep.runs.size(), jobs, [&](std::size_t i) {
        const std::size_t cell = i / np, p = i % np;
        SearchConfig c = base;
        c.strategy = Strategy::mcts;
        c.lambda = lambdas[cell / cs.size()];
        c.c = cs[cell % cs.size()];
        rep.runs[i] = run_single(m.problems[p], c, false).record;
    });

    rep.greedy_runs.resize(lambdas.size() * np);
    detail::parallel_for(rep.greedy_runs.size(), jobs, [&](std::size_t i) {
        SearchConfig c = base;
        c.strategy = Strategy::greedy;
        c.lambda = lambdas[i / np];
        rep.greedy_runs[i] = run_single(m.problems[i % np], c, false).record;
    });

    for (std::size_t cell = 0; cell < lambdas.size() * cs.size(); ++cell) {
        SweepCell sc;
        sc.lambda = lambdas[cell / cs.size()];
        sc.c = cs[cell % cs.size()];
        double t = 0.0, sp = 0.0, av = 0.0;
        std::size_t nsp = 0;
        std::vector<double> ratios;
        for (std::size_t p = 0; p < np; ++p) {
            const RunRecord& r = rep.runs[cell * np + p];
            const RunRecord& b = rep.bfs_runs[p];
            ++sc.total;
            av += static_cast<double>(r.stats.appver_calls);
            if (!r.solved()) continue;
            ++sc.solved;
            t += r.stats.wall_time;
            if (b.solved()) {
                sp += detail::safe_ratio(b.stats.wall_time, r.stats.wall_time);
                ++nsp;
                ratios.push_back(detail::safe_ratio(static_cast<double>(b.stats.appver_calls),
                                                    static_cast<double>(r.stats.appver_calls)));
            }
        }
        if (sc.solved) sc.mean_time = t / static_cast<double>(sc.solved);
        if (nsp) sc.mean_speedup = sp / static_cast<double>(nsp);
        if (sc.total) sc.mean_appver = av / static_cast<double>(sc.total);
        sc.median_appver_ratio = detail::median(ratios);
        rep.cells.push_back(sc);
    }
    return rep;
}

inline std::string sweep_grid_csv(const SweepReport& rep) {
    std::ostringstream s;
    s << "lambda,c,solved,total,mean_time,mean_speedup,mean_appver,median_appver_ratio\n";
    for (const auto& c : rep.cells)
        s << detail::fmt_double(c.lambda) << ',' << detail::fmt_double(c.c) << ',' << c.solved << ',' << c.total << ','
          << detail::fmt_double(c.mean_time) << ',' << detail::fmt_double(c.mean_speedup) << ','
          << detail::fmt_double(c.mean_appver) << ',' << detail::fmt_double(c.median_appver_ratio) << '\n';
    return s.str();
}

/// One heatmap matrix: rows are lambda values, columns c values.
inline std::string sweep_matrix_csv(const SweepReport& rep, const std::function<double(const SweepCell&)>& metric) {
    std::ostringstream s;
    s << "lambda\\c";
    for (double c : rep.cs) s << ',' << detail::fmt_double(c);
    s << '\n';
    for (std::size_t li = 0; li < rep.lambdas.size(); ++li) {
        s << detail::fmt_double(rep.lambdas[li]);
        for (std::size_t ci = 0; ci < rep.cs.size(); ++ci) s << ',' << detail::fmt_double(metric(rep.cells[li * rep.cs.size() + ci]));
        s << '\n';
    }
    return s.str();
}

inline std::string sweep_runs_csv(const SweepReport& rep) {
    std::ostringstream s;
    s << suite_csv_header() << '\n';
    for (const auto& r : rep.bfs_runs) s << csv_row(r) << '\n';
    for (const auto& r : rep.runs) s << csv_row(r) << '\n';
    for (const auto& r : rep.greedy_runs) s << csv_row(r) << '\n';
    return s.str();
}

/// Writes <out> (long grid) plus <stem>.time.csv, <stem>.speedup.csv,
/// <stem>.solved.csv heatmaps and <stem>.runs.csv.
inline void write_sweep(const SweepReport& rep, const std::string& out) {
    std::string stem = out;
    if (stem.size() > 4 && stem.compare(stem.size() - 4, 4, ".csv") == 0) stem.resize(stem.size() - 4);
    write_text_file(out, sweep_grid_csv(rep));
    write_text_file(stem + ".time.csv", sweep_matrix_csv(rep, [](const SweepCell& c) { return c.mean_time; }));
    write_text_file(stem + ".speedup.csv", sweep_matrix_csv(rep, [](const SweepCell& c) { return c.mean_speedup; }));
    write_text_file(stem + ".solved.csv",
                    sweep_matrix_csv(rep, [](const SweepCell& c) { return static_cast<double>(c.solved); }));
    write_text_file(stem + ".runs.csv", sweep_runs_csv(rep));
}

// ---------------------------------------------------------------------------
// Run record files (verify --out / crosscheck --record)

inline json record_to_json(const RunRecord& r, const std::string& model_path, const Specification& spec,
                           const SearchConfig& cfg) {
    json stats = {{"nodes_expanded", r.stats.nodes_expanded}, {"appver_calls", r.stats.appver_calls},
                  {"lp_calls", r.stats.lp_calls},           {"exact_leaves", r.stats.exact_leaves},
                  {"wall_time", r.stats.wall_time},         {"peak_tree_size", r.stats.peak_tree_size}};
    if (cfg.record_trace) stats["trace"] = r.stats.trace;
    return {{"id", r.problem},
            {"model", model_path},
            {"spec", spec_to_json(spec)},
            {"strategy", to_string(r.strategy)},
            {"lambda", r.lambda},
            {"c", r.c},
            {"domain", to_string(cfg.domain)},
            {"heuristic", to_string(cfg.heuristic)},
            {"outcome", r.outcome ? to_string(*r.outcome) : "error"},
            {"counterexample", r.counterexample ? json(*r.counterexample) : json(nullptr)},
            {"crosscheck", r.check ? json(to_string(*r.check)) : json(nullptr)},
            {"stats", stats}};
}

struct RecordFile {
    std::string model_path;
    Specification spec;
    Outcome outcome = Outcome::timeout;
    std::optional<Vector> counterexample;
};

inline RecordFile load_record(const std::string& path) {
    const json j = detail::parse_json_text(read_text_file(path));
    RecordFile rf;
    std::filesystem::path mp(detail::field(j, "model", path).get<std::string>());
    rf.model_path = mp.is_absolute() ? mp.string() : (std::filesystem::path(path).parent_path() / mp).string();
    if (!std::filesystem::exists(rf.model_path)) rf.model_path = mp.string();
    const Network net = load_network_file(rf.model_path);
    rf.spec = spec_from_json(detail::field(j, "spec", path), net.output_dim());
    rf.outcome = parse_outcome(detail::field(j, "outcome", path).get<std::string>());
    if (j.contains("counterexample") && j.at("counterexample").is_array())
        rf.counterexample = detail::number_array(j.at("counterexample"), "counterexample");
    return rf;
}

}  // namespace abonn
