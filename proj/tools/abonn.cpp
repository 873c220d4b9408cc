// abonn: command-line front end for the verifier and the benchmark harness.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "abonn/abonn.hpp"

namespace {

using namespace abonn;

constexpr int exit_ok = 0;
constexpr int exit_usage = 1;
constexpr int exit_internal = 2;

double default_timeout(double fallback) {
    if (const char* env = std::getenv("ABONN_TIMEOUT")) {
        try {
            return std::stod(env);
        } catch (const std::exception&) {
            throw PreconditionError(std::string("ABONN_TIMEOUT is not a number: ") + env);
        }
    }
    return fallback;
}

struct ConfigFlags {
    std::string strategy = "mcts";
    double lambda = 0.5;
    double c = 0.2;
    std::optional<double> timeout;
    std::string domain = "linrelax";
    std::string heuristic = "relax_area";
    std::optional<std::size_t> max_nodes;
    std::string pmin_mode = "frozen_root";
    std::string leaf_mode = "exact_lp";

    void add_to(CLI::App& app, bool with_strategy) {
        if (with_strategy)
            app.add_option("--strategy", strategy, "mcts, bfs or greedy")->check(CLI::IsMember({"mcts", "bfs", "greedy"}));
        app.add_option("--lambda", lambda, "depth vs bound weight in [0, 1]");
        app.add_option("--c", c, "UCB1 exploration constant");
        app.add_option("--timeout", timeout, "seconds per run (default from ABONN_TIMEOUT)");
        app.add_option("--domain", domain, "interval or linrelax")->check(CLI::IsMember({"interval", "linrelax"}));
        app.add_option("--heuristic", heuristic, "relax_area, widest or sequential")
            ->check(CLI::IsMember({"relax_area", "widest", "sequential"}));
        app.add_option("--max-nodes", max_nodes, "stop with timeout once the tree reaches this size");
        app.add_option("--pmin-mode", pmin_mode, "frozen_root or running_min")
            ->check(CLI::IsMember({"frozen_root", "running_min"}));
        app.add_option("--leaf-mode", leaf_mode, "exact_lp or unknown")->check(CLI::IsMember({"exact_lp", "unknown"}));
    }

    SearchConfig build(double fallback_timeout) const {
        SearchConfig cfg;
        cfg.strategy = parse_strategy(strategy);
        cfg.lambda = lambda;
        cfg.c = c;
        cfg.timeout_seconds = timeout ? *timeout : default_timeout(fallback_timeout);
        cfg.domain = parse_domain(domain);
        cfg.heuristic = parse_heuristic(heuristic);
        cfg.max_nodes = max_nodes;
        cfg.pmin_mode = parse_pmin_mode(pmin_mode);
        cfg.leaf_mode = parse_leaf_mode(leaf_mode);
        cfg.validate();
        return cfg;
    }
};

std::string join(const Vector& v) {
    std::ostringstream s;
    s.precision(17);
    for (std::size_t i = 0; i < v.size(); ++i) s << (i ? " " : "") << v[i];
    return s.str();
}

std::string fmt_ext(double v) {
    if (v == pos_inf) return "+inf";
    if (v == neg_inf) return "-inf";
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<Strategy> parse_strategies(const std::vector<std::string>& names) {
    std::vector<Strategy> out;
    for (const auto& n : names) out.push_back(parse_strategy(n));
    return out;
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
    std::string model;
    std::string spec;
    std::vector<double> center;
    std::optional<double> epsilon;
    std::optional<std::size_t> label;
    std::vector<double> input_domain{0.0, 1.0};
    bool normalize = false;
    std::string dump_tree;
    std::string out;
    bool trace = false;
    ConfigFlags flags;
};

int run_verify(VerifyArgs& a) {
    SearchConfig cfg = a.flags.build(1000.0);
    cfg.record_trace = a.trace;

    const Network net = load_network_file(a.model, NnetOptions{a.normalize});
    Specification spec;
    if (!a.spec.empty()) {
        try {
            spec = load_spec(read_text_file(a.spec), net.output_dim());
        } catch (const ParseError& e) {
            throw ParseError(a.spec + ": " + e.what());
        }
    } else {
        if (a.center.empty() || !a.epsilon || !a.label)
            throw PreconditionError("verify needs --spec or all of --center, --epsilon, --label");
        spec = robustness_spec(a.center, *a.epsilon, *a.label, a.input_domain[0], a.input_domain[1], net.output_dim());
    }
    check_dimensions(net, spec);

    SearchRun run = run_search(net, spec, cfg);
    const Verdict& v = run.verdict;
    std::cout << "outcome: " << to_string(v.outcome) << '\n';
    if (v.counterexample) std::cout << "counterexample: " << join(*v.counterexample) << '\n';
    std::cout << "strategy: " << to_string(cfg.strategy) << '\n'
              << "wall_time: " << v.stats.wall_time << '\n'
              << "nodes_expanded: " << v.stats.nodes_expanded << '\n'
              << "appver_calls: " << v.stats.appver_calls << '\n'
              << "lp_calls: " << v.stats.lp_calls << '\n'
              << "exact_leaves: " << v.stats.exact_leaves << '\n'
              << "peak_tree_size: " << v.stats.peak_tree_size << '\n';
    if (a.trace && run.tree) {
        for (std::size_t i = 0; i < v.stats.trace.size(); ++i) {
            const BabNode& n = run.tree->node(v.stats.trace[i]);
            std::cout << "trace " << i << ": node " << n.id << " depth " << n.depth;
            if (n.edge)
                std::cout << " edge r" << (n.edge->sign == PhaseSign::positive ? "+" : "-") << "(" << n.edge->neuron.layer
                          << "," << n.edge->neuron.unit << ")";
            std::cout << " p_hat " << fmt_ext(n.p_hat) << " status " << to_string(n.status) << '\n';
        }
    }
    if (!a.dump_tree.empty()) {
        if (!run.tree) {
            std::cerr << "note: root resolved the problem; tree dump holds no nodes\n";
            write_text_file(a.dump_tree, ends_with(a.dump_tree, ".dot") ? "digraph bab {\n}\n" : "[]\n");
        } else {
            write_text_file(a.dump_tree, ends_with(a.dump_tree, ".dot") ? tree_to_dot(*run.tree)
                                                                        : tree_to_json(*run.tree).dump(2) + "\n");
        }
    }
    if (!a.out.empty()) {
        RunRecord r;
        r.problem = std::filesystem::path(a.model).stem().string();
        r.strategy = cfg.strategy;
        r.lambda = cfg.lambda;
        r.c = cfg.strategy == Strategy::greedy ? 0.0 : cfg.c;
        r.outcome = v.outcome;
        r.counterexample = v.counterexample;
        r.stats = v.stats;
        r.check = crosscheck(net, spec, v.outcome, v.counterexample);
        const std::string model_abs = std::filesystem::absolute(a.model).string();
        write_text_file(a.out, record_to_json(r, model_abs, spec, cfg).dump(2) + "\n");
    }
    return exit_ok;
}

struct SuiteArgs {
    std::string manifest;
    std::string out;
    std::vector<std::string> strategies{"mcts", "bfs"};
    std::size_t jobs = 1;
    ConfigFlags flags;
};

int run_suite_cmd(SuiteArgs& a) {
    const SearchConfig cfg = a.flags.build(10.0);
    const Manifest m = load_manifest(a.manifest);
    const SuiteReport rep = run_suite(m, cfg, parse_strategies(a.strategies), a.jobs);
    write_text_file(a.out, suite_csv(rep));
    std::string stem = a.out;
    if (ends_with(stem, ".csv")) stem.resize(stem.size() - 4);
    write_text_file(stem + ".speedup.csv", speedup_csv(rep.records));

    std::size_t disagree = 0, refuted = 0, errors = 0;
    for (const auto& r : rep.records) {
        disagree += !r.agrees();
        refuted += r.check == CrosscheckResult::refuted;
        errors += !r.error.empty();
    }
    for (const auto& s : rep.summaries)
        std::cout << to_string(s.strategy) << ": solved " << s.solved << "/" << s.total << ", mean time (solved) "
                  << s.mean_time_solved << " s\n";
    std::cout << "oracle disagreements: " << disagree << ", refuted verdicts: " << refuted << ", errors: " << errors
              << '\n';
    if (disagree || refuted) {
        std::cerr << "error: suite produced verdicts that contradict the oracle or the crosscheck\n";
        return exit_internal;
    }
    return exit_ok;
}

struct SweepArgs {
    std::string manifest;
    std::string out;
    std::vector<double> lambdas{0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<double> cs{0.0, 0.2, 0.5, 1.0};
    std::size_t jobs = 1;
    ConfigFlags flags;
};

int run_sweep_cmd(SweepArgs& a) {
    const SearchConfig cfg = a.flags.build(10.0);
    const Manifest m = load_manifest(a.manifest);
    const SweepReport rep = sweep(m, a.lambdas, a.cs, cfg, a.jobs);
    write_sweep(rep, a.out);
    for (const auto& c : rep.cells)
        std::cout << "lambda " << c.lambda << " c " << c.c << ": solved " << c.solved << "/" << c.total
                  << ", mean speedup " << c.mean_speedup << '\n';
    return exit_ok;
}

struct GenArgs {
    std::uint64_t seed = 0;
    std::size_t count = 100;
    std::string profile = "mixed";
    std::string out;
};

int run_gen_cmd(const GenArgs& a) {
    const Manifest m = gen_suite(a.seed, a.count, parse_profile(a.profile), a.out);
    std::size_t violated = 0;
    for (const auto& p : m.problems) violated += p.expected == Outcome::violated_false;
    std::cout << "generated " << m.problems.size() << " problems in " << a.out << " (" << violated
              << " violated by the oracle)\n";
    return exit_ok;
}

int run_crosscheck_cmd(const std::string& record) {
    const RecordFile rf = load_record(record);
    const Network net = load_network_file(rf.model_path);
    check_dimensions(net, rf.spec);
    const CrosscheckResult r = crosscheck(net, rf.spec, rf.outcome, rf.counterexample);
    std::cout << "outcome: " << to_string(rf.outcome) << '\n' << "crosscheck: " << to_string(r) << '\n';
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Branch-and-bound neural network verifier with MCTS-guided exploration"};
    app.require_subcommand(1);

    VerifyArgs va;
    CLI::App* verify_cmd = app.add_subcommand("verify", "verify one problem");
    verify_cmd->add_option("--model", va.model, ".nnet or .json network")->required();
    auto* spec_opt = verify_cmd->add_option("--spec", va.spec, "specification JSON");
    auto* center_opt = verify_cmd->add_option("--center", va.center, "robustness center");
    verify_cmd->add_option("--epsilon", va.epsilon, "L-inf radius");
    verify_cmd->add_option("--label", va.label, "expected class");
    verify_cmd->add_option("--input-domain", va.input_domain, "input clip bounds LO HI")->expected(2);
    verify_cmd->add_flag("--normalize", va.normalize, "fold NNet normalization constants into the network");
    verify_cmd->add_option("--dump-tree", va.dump_tree, "write the final tree (.dot for DOT, else JSON)");
    verify_cmd->add_option("--out", va.out, "write a run record JSON");
    verify_cmd->add_flag("--trace", va.trace, "print the node processed at every step");
    spec_opt->excludes(center_opt);
    va.flags.add_to(*verify_cmd, true);

    SuiteArgs sa;
    CLI::App* suite_cmd = app.add_subcommand("suite", "run strategies over a manifest");
    suite_cmd->add_option("--manifest", sa.manifest, "manifest.json")->required();
    suite_cmd->add_option("--out", sa.out, "CSV report path")->required();
    suite_cmd->add_option("--strategies", sa.strategies, "strategies to run")
        ->check(CLI::IsMember({"mcts", "bfs", "greedy"}));
    suite_cmd->add_option("--jobs", sa.jobs, "worker threads");
    sa.flags.add_to(*suite_cmd, false);

    SweepArgs wa;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "grid over lambda and c");
    sweep_cmd->add_option("--manifest", wa.manifest, "manifest.json")->required();
    sweep_cmd->add_option("--out", wa.out, "grid CSV path")->required();
    sweep_cmd->add_option("--lambdas", wa.lambdas, "lambda values");
    sweep_cmd->add_option("--cs", wa.cs, "c values");
    sweep_cmd->add_option("--jobs", wa.jobs, "worker threads");
    wa.flags.add_to(*sweep_cmd, false);

    GenArgs ga;
    CLI::App* gen_cmd = app.add_subcommand("gen", "generate a random benchmark suite");
    gen_cmd->add_option("--seed", ga.seed, "RNG seed")->required();
    gen_cmd->add_option("--count", ga.count, "number of problems")->required();
    gen_cmd->add_option("--profile", ga.profile, "violated_rich, mixed or certified_rich")
        ->check(CLI::IsMember({"violated_rich", "mixed", "certified_rich"}));
    gen_cmd->add_option("--out", ga.out, "output directory")->required();

    std::string record;
    CLI::App* cross_cmd = app.add_subcommand("crosscheck", "audit a recorded verdict");
    cross_cmd->add_option("--record", record, "run record JSON from verify --out")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        if (*verify_cmd) return run_verify(va);
        if (*suite_cmd) return run_suite_cmd(sa);
        if (*sweep_cmd) return run_sweep_cmd(wa);
        if (*gen_cmd) return run_gen_cmd(ga);
        if (*cross_cmd) return run_crosscheck_cmd(record);
    } catch (const InvariantError& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return exit_internal;
    } catch (const SolverFailure& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return exit_internal;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    }
    return exit_usage;
}
