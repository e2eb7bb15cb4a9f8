#include <atomic>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <singmis/singmis.hpp>

namespace fs = std::filesystem;
using namespace singmis;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

int worker_count() {
    if (const char* env = std::getenv("SINGMIS_WORKERS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return 1;
}

template <typename Fn>
void parallel_for(int count, Fn&& fn) {
    const int workers = std::min(worker_count(), count);
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
        });
    for (auto& t : pool) t.join();
}

struct CommonOpts {
    std::string variant = "singing";
    std::string hearing;  // empty -> variant default
    bool unsafe_pairing = false;
    std::string engine = "sync";
    std::string graph_file;
    std::string gen_spec;
    std::string script_file;
    std::uint64_t seed = 1;
    int trials = 1;
    int rounds = 0;
    long long horizon = 0;
    long long tmin = 0, tmax = 0, dmax = 0;
    std::string out_dir = "out";
    bool experimental_dynamic_async = false;
};

Variant parse_variant(const std::string& s) {
    if (s == "singing") return Variant::Singing;
    if (s == "sj" || s == "self-jamming" || s == "selfjamming") return Variant::SelfJamming;
    throw CLI::ValidationError("--variant", "expected singing or sj");
}

HearingMode parse_hearing(const std::string& s, Variant v) {
    if (s.empty()) return default_hearing(v);
    if (s == "plain") return HearingMode::Plain;
    if (s == "selfjam" || s == "self-jamming") return HearingMode::SelfJamming;
    throw CLI::ValidationError("--hearing", "expected plain or selfjam");
}

Network load_graph(const CommonOpts& o) {
    if (!o.graph_file.empty() && !o.gen_spec.empty())
        throw CLI::ValidationError("--graph/--gen", "give exactly one network source");
    if (!o.graph_file.empty()) return load_edge_list(o.graph_file);
    if (!o.gen_spec.empty()) return generate(o.gen_spec, o.seed);
    throw CLI::ValidationError("--graph/--gen", "a network source is required");
}

void add_common(CLI::App* cmd, CommonOpts& o, bool engine_opts = true) {
    cmd->add_option("--variant", o.variant, "Protocol variant: singing | sj");
    cmd->add_option("--hearing", o.hearing, "Hearing mode: plain | selfjam (default per variant)");
    cmd->add_flag("--unsafe-pairing", o.unsafe_pairing,
                  "Allow a variant/hearing pairing that is known not to work");
    cmd->add_option("--graph", o.graph_file, "Edge-list file");
    cmd->add_option("--gen", o.gen_spec, "Generator spec, e.g. gnp:256,0.05 or ring:100");
    cmd->add_option("--seed", o.seed, "Base seed");
    cmd->add_option("--trials", o.trials, "Trial count")->check(CLI::PositiveNumber);
    cmd->add_option("--rounds", o.rounds, "Round budget (sync; 0 = auto)");
    cmd->add_option("--out", o.out_dir, "Output directory");
    if (engine_opts) {
        cmd->add_option("--engine", o.engine, "Engine: sync | async");
        cmd->add_option("--script", o.script_file, "Change-script file (sync engine)");
        cmd->add_option("--horizon", o.horizon, "Tick budget (async)");
        cmd->add_option("--tmin", o.tmin, "Minimum round duration in ticks (async)");
        cmd->add_option("--tmax", o.tmax, "Maximum round duration in ticks (async)");
        cmd->add_option("--dmax", o.dmax, "Maximum transmission delay in ticks (async)");
        cmd->add_flag("--experimental-dynamic-async", o.experimental_dynamic_async,
                      "Permit change scripts under the async engine (unverified mode)");
    }
}

void write_resolved_config(const CLI::App& app, const fs::path& dir) {
    std::ofstream os(dir / "config.resolved.ini");
    os << app.config_to_str(true, true);
}

TimingParams timing_from(const CommonOpts& o) {
    TimingParams tp;
    if (o.tmin == 0 && o.tmax == 0 && o.dmax == 0) return tp;  // defaults 4/8/2
    if (o.tmin == 0 || o.tmax == 0 || o.dmax == 0)
        throw CLI::ValidationError("--tmin/--tmax/--dmax", "give all three or none");
    tp.t_min = o.tmin;
    tp.t_max = o.tmax;
    tp.delta_max = o.dmax;
    return tp;
}

int cmd_run(const CLI::App& app, const CommonOpts& o) {
    const Variant variant = parse_variant(o.variant);
    const HearingMode hearing = parse_hearing(o.hearing, variant);
    const bool async = o.engine == "async";
    if (!async && o.engine != "sync")
        throw CLI::ValidationError("--engine", "expected sync or async");
    if (async && o.horizon == 0)
        throw CLI::ValidationError("--horizon", "the async engine needs a tick budget");
    if (async && !o.script_file.empty() && !o.experimental_dynamic_async)
        throw CLI::ValidationError(
            "--script", "change scripts under async need --experimental-dynamic-async");

    const Network net = load_graph(o);
    ChangeScript script;
    if (!o.script_file.empty()) script = load_change_script(o.script_file);
    if (async && !script.empty())
        std::cerr << "warning: dynamic+async is experimental; no guarantee is checked\n";
    const TimingParams tp = timing_from(o);

    fs::create_directories(o.out_dir);
    write_resolved_config(app, o.out_dir);

    struct Row {
        std::uint64_t seed;
        bool converged;
        long long rounds_or_ticks;
        long long final_e;
        bool mis_valid;
    };
    std::vector<Row> rows(o.trials);
    parallel_for(o.trials, [&](int t) {
        const std::uint64_t seed = o.seed + static_cast<std::uint64_t>(t);
        std::ostringstream name;
        name << "trace_" << seed << ".csv";
        std::ofstream trace_os(fs::path(o.out_dir) / name.str());
        Row row{seed, false, 0, 0, false};
        if (!async) {
            SyncConfig cfg;
            cfg.variant = variant;
            cfg.hearing = hearing;
            cfg.allow_unsafe_pairing = o.unsafe_pairing;
            cfg.seed = seed;
            cfg.max_rounds = o.rounds;
            Trace tr = run_sync(net, all_un(net), script, cfg);
            write_trace_csv(trace_os, tr);
            std::ofstream sum_os(fs::path(o.out_dir) / ("summary_" + std::to_string(seed) + ".csv"));
            write_summary_csv(sum_os, tr);
            row.converged = tr.stop == StopReason::Converged;
            row.rounds_or_ticks = tr.rounds_run;
            row.final_e = classify(tr.final_net, tr.final_states).active_edges;
            row.mis_valid = is_mis(tr.final_net, tr.final_states);
        } else {
            AsyncConfig cfg;
            cfg.variant = variant;
            cfg.hearing = hearing;
            cfg.allow_unsafe_pairing = o.unsafe_pairing;
            cfg.seed = seed;
            cfg.horizon = o.horizon;
            AsyncTrace tr = run_async(net, all_un(net), tp, SchedulePolicy{}, cfg);
            write_async_trace_csv(trace_os, tr);
            row.converged = tr.quiesced;
            row.rounds_or_ticks = tr.last_tick;
            row.final_e = classify(tr.net, tr.final_states).active_edges;
            row.mis_valid = is_mis(tr.net, tr.final_states);
        }
        rows[t] = row;
    });

    std::ofstream sum(fs::path(o.out_dir) / "summary.csv");
    sum << "seed,converged,rounds_or_ticks,final_e,mis_valid\n";
    int ok = 0;
    for (const Row& r : rows) {
        sum << r.seed << ',' << r.converged << ',' << r.rounds_or_ticks << ',' << r.final_e << ','
            << r.mis_valid << '\n';
        if (r.mis_valid) ++ok;
    }
    std::cout << ok << "/" << o.trials << " trials reached a valid MIS; outputs in " << o.out_dir
              << "\n";
    return kExitPass;
}

int cmd_sweep(const CLI::App& app, const CommonOpts& o, const std::vector<long long>& n_list,
              double avg_deg) {
    const Variant variant = parse_variant(o.variant);
    fs::create_directories(o.out_dir);
    write_resolved_config(app, o.out_dir);
    std::ofstream csv(fs::path(o.out_dir) / "sweep.csv");
    csv << "n,log2_n,median_rounds,p95_rounds\n";
    for (long long n : n_list) {
        const double p = std::min(1.0, avg_deg / static_cast<double>(n));
        std::vector<int> rounds(o.trials);
        parallel_for(o.trials, [&](int t) {
            const std::uint64_t seed = o.seed + 1000003ull * n + t;
            Network net = gen_gnp(n, p, seed);
            SyncConfig cfg;
            cfg.variant = variant;
            cfg.hearing = default_hearing(variant);
            cfg.seed = seed;
            cfg.record_rounds = false;
            Trace tr = run_sync(net, all_un(net), {}, cfg);
            rounds[t] = tr.stop == StopReason::Converged ? tr.rounds_run : -1;
        });
        std::sort(rounds.begin(), rounds.end());
        const int median = rounds[rounds.size() / 2];
        const int p95 = rounds[static_cast<std::size_t>(rounds.size() * 95 / 100)];
        csv << n << ',' << std::log2(static_cast<double>(n)) << ',' << median << ',' << p95
            << '\n';
        std::cout << "n=" << n << " median=" << median << " p95=" << p95 << "\n";
    }
    std::cout << "wrote " << (fs::path(o.out_dir) / "sweep.csv").string() << "\n";
    return kExitPass;
}

// Independent transcription of the two listings, used as the oracle for the
// transitions suite.
AgentState oracle_transition(AgentState s, Ell ell, const HeardNotes& heard, Variant v) {
    const bool h0 = heard.has(0);
    if (v == Variant::Singing) {
        const bool hell = heard.has(ell);
        if (s == AgentState::In) return h0 ? AgentState::Un : AgentState::In;
        if (s == AgentState::Un) {
            if (h0) return AgentState::Out;
            if (hell) return AgentState::Un;
            return AgentState::In;
        }
        return h0 ? AgentState::Out : AgentState::Un;
    }
    const bool h2l = heard.has(2 * ell);
    const bool h2l1 = heard.has(2 * ell + 1);
    if (s == AgentState::In) return h2l ? AgentState::Un : AgentState::In;
    if (s == AgentState::Un) {
        if (h0) return AgentState::Out;
        if (h2l1) return AgentState::Un;
        return AgentState::In;
    }
    return h0 ? AgentState::Out : AgentState::Un;
}

int verify_transitions() {
    long long mismatches = 0, cases = 0;
    for (Variant v : {Variant::Singing, Variant::SelfJamming})
        for (AgentState s : {AgentState::Out, AgentState::In, AgentState::Un})
            for (Ell ell = 1; ell <= 8; ++ell) {
                const ListenSet ls = listen_set(s, ell, v);
                for (int mask = 0; mask < (1 << ls.count); ++mask) {
                    HeardNotes heard;
                    for (int k = 0; k < ls.count; ++k)
                        if (mask & (1 << k)) heard.add(ls.notes[k]);
                    ++cases;
                    if (transition(s, ell, heard, v) != oracle_transition(s, ell, heard, v))
                        ++mismatches;
                }
            }
    std::cout << "transitions: " << cases << " cases, " << mismatches << " mismatches\n";
    return mismatches == 0 ? kExitPass : kExitFail;
}

int verify_static_contraction(std::uint64_t seed, int branches) {
    bool all_ok = true;
    for (int round_i : {1, 2, 3}) {
        auto rep = check_static_contraction(gen_gnp(64, 0.1, seed), seed, round_i, branches);
        std::cout << "static-contraction i=" << round_i << ": mean=" << rep.mean
                  << " bound=" << rep.bound << " sigma=" << rep.stderr_ << " samples="
                  << rep.samples << (rep.samples == 0 ? " (skipped: " + rep.detail + ")" : "")
                  << (rep.samples && !rep.pass ? " FAIL" : " ok") << "\n";
        if (rep.samples && !rep.pass) all_ok = false;
    }
    return all_ok ? kExitPass : kExitFail;
}

int verify_dynamic_locality(std::uint64_t seed, double churn_q, int rounds, int n) {
    long long violations = 0;
    for (Variant variant : {Variant::Singing, Variant::SelfJamming}) {
        Network net = gen_gnp(n, 8.0 / n, seed);
        ChangeScript script = make_churn_script(net, rounds, churn_q, seed + 1);
        SyncConfig cfg;
        cfg.variant = variant;
        cfg.hearing = default_hearing(variant);
        cfg.seed = seed + 2;
        cfg.max_rounds = rounds;
        Trace tr = run_sync(net, all_un(net), script, cfg);
        for (std::size_t r = 0; r + 1 < tr.rounds.size(); ++r) {
            auto c0 = classify(tr.rounds[r].net, round_states(tr.rounds[r]));
            auto c1 = classify(tr.rounds[r + 1].net, round_states(tr.rounds[r + 1]));
            for (const auto& [e, active] : c0.edge_active) {
                if (active) continue;
                if (!tr.rounds[r + 1].net.has_edge(e.a, e.b)) continue;
                if (tr.rounds[r + 1].affected.count(e)) continue;
                if (c1.edge_active.at(e)) ++violations;
            }
        }
    }
    std::cout << "dynamic-locality: " << violations << " eliminated-edge reactivations outside A"
              << "\n";
    return violations == 0 ? kExitPass : kExitFail;
}

int verify_dynamic_contraction(std::uint64_t seed, int branches) {
    bool ok = true;
    Network net = gen_gnp(64, 0.1, seed);
    ChangeScript script = make_churn_script(net, 16, 0.02, seed + 1);
    for (Variant v : {Variant::Singing, Variant::SelfJamming}) {
        auto rep = check_dynamic_contraction(net, script, v, seed + 2, 4, branches);
        std::cout << "dynamic-contraction " << (v == Variant::Singing ? "singing" : "sj")
                  << ": mean=" << rep.mean << " bound=" << rep.bound << " sigma=" << rep.stderr_
                  << (rep.pass ? " ok" : " FAIL") << "\n";
        ok = ok && rep.pass;
    }
    return ok ? kExitPass : kExitFail;
}

int verify_async_lemmas(std::uint64_t seed, int traces) {
    TimingParams tp;
    long long lem_time = 0, in_in = 0, stable = 0;
    for (int t = 0; t < traces; ++t) {
        Network net = gen_gnp(10, 0.3, seed + t);
        AsyncConfig cfg;
        cfg.seed = seed + 100 + t;
        cfg.horizon = 240;
        AsyncTrace tr = run_async(net, all_un(net), tp, SchedulePolicy{}, cfg);
        lem_time += lem_time_violations(tr);
        in_in += async_in_in_violations(tr);
        AsyncConfig sj = cfg;
        sj.variant = Variant::SelfJamming;
        sj.hearing = HearingMode::SelfJamming;
        AsyncTrace tr2 = run_async(net, all_un(net), tp, SchedulePolicy{}, sj);
        lem_time += lem_time_violations(tr2);
        stable += stable_in_violations(tr2);
    }
    std::cout << "async-lemmas: lem_time=" << lem_time << " adjacent_in_in=" << in_in
              << " stable_in=" << stable << " over " << traces << " trace pairs\n";
    return (lem_time == 0 && in_in == 0 && stable == 0) ? kExitPass : kExitFail;
}

int verify_coin(const std::string& d_range, const std::string& p_list, int trials,
                std::uint64_t seed) {
    int d_lo = 1, d_hi = 16;
    if (auto dots = d_range.find(".."); dots != std::string::npos) {
        d_lo = std::stoi(d_range.substr(0, dots));
        d_hi = std::stoi(d_range.substr(dots + 2));
    } else if (!d_range.empty()) {
        d_lo = d_hi = std::stoi(d_range);
    }
    std::vector<double> ps;
    std::stringstream ss(p_list);
    for (std::string tok; std::getline(ss, tok, ',');) ps.push_back(std::stod(tok));
    if (ps.empty()) ps = {0.25, 0.5, 0.75};

    bool ok = true;
    for (double p : ps)
        for (int d = d_lo; d <= d_hi; ++d) {
            auto e = estimate_coin_bounds(d, p, trials, seed + d);
            const bool y_ok = e.y_hat >= e.bound - 3.0 * e.y_sigma;
            const bool x_ok = std::abs(e.x_hat - 1.0 / d) <= 3.0 * e.x_sigma;
            std::cout << "coin d=" << d << " p=" << p << " y=" << e.y_hat << " bound=" << e.bound
                      << " x=" << e.x_hat << (y_ok && x_ok ? " ok" : " FAIL") << "\n";
            ok = ok && y_ok && x_ok;
        }
    return ok ? kExitPass : kExitFail;
}

int verify_sj_eligibility(std::uint64_t seed, int branches) {
    bool ok = true;
    for (int round_i : {0, 1, 2}) {
        auto rep = check_eligibility(gen_gnp(16, 0.3, seed), seed + round_i, round_i, branches);
        std::cout << "sj-eligibility i=" << round_i << ": agents=" << rep.agents_checked
                  << " violations=" << rep.violations << " worst_margin=" << rep.worst_margin
                  << (rep.pass ? " ok" : " FAIL") << "\n";
        ok = ok && rep.pass;
    }
    return ok ? kExitPass : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation harness for singing-model MIS protocols"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Key-value config file; flags override it");

    CommonOpts run_o;
    auto* run_cmd = app.add_subcommand("run", "Execute seeded trials and write trace CSVs");
    add_common(run_cmd, run_o);

    CommonOpts sweep_o;
    std::vector<long long> sweep_n;
    double sweep_deg = 8.0;
    auto* sweep_cmd = app.add_subcommand("sweep", "Convergence-round scaling over n");
    add_common(sweep_cmd, sweep_o, false);
    sweep_cmd->add_option("--n", sweep_n, "List of network sizes")->required();
    sweep_cmd->add_option("--avg-deg", sweep_deg, "Gnp average degree (p = deg/n)");

    std::string suite;
    std::uint64_t verify_seed = 1;
    int verify_trials = 100000;
    int verify_branches = 2000;
    double churn_q = 0.02;
    int churn_rounds = 200, churn_n = 128;
    std::string coin_d = "1..16", coin_p = "0.25,0.5,0.75";
    int async_traces = 20;
    auto* verify_cmd = app.add_subcommand("verify", "Run a named invariant/bound suite");
    verify_cmd->add_option("suite", suite,
                           "transitions | static-contraction | dynamic-locality | "
                           "dynamic-contraction | async-lemmas | coin | sj-eligibility")
        ->required();
    verify_cmd->add_option("--seed", verify_seed, "Base seed");
    verify_cmd->add_option("--trials", verify_trials, "Monte Carlo trials (coin)");
    verify_cmd->add_option("--branches", verify_branches, "Restart branches (contraction suites)");
    verify_cmd->add_option("--churn", churn_q, "Per-round edge churn probability");
    verify_cmd->add_option("--churn-rounds", churn_rounds, "Churn run length");
    verify_cmd->add_option("--churn-n", churn_n, "Churn network size");
    verify_cmd->add_option("--d", coin_d, "Competition sizes, e.g. 1..16");
    verify_cmd->add_option("--p", coin_p, "Comma-separated coin biases");
    verify_cmd->add_option("--traces", async_traces, "Trace count (async-lemmas)");

    int coin_d_single = 3;
    double coin_p_single = 0.5;
    int coin_trials = 1000000;
    std::uint64_t coin_seed = 1;
    auto* coin_cmd = app.add_subcommand("coin", "Estimate coin-competition win probabilities");
    coin_cmd->add_option("--d", coin_d_single, "Number of competitors")->check(CLI::PositiveNumber);
    coin_cmd->add_option("--p", coin_p_single, "Coin bias");
    coin_cmd->add_option("--trials", coin_trials, "Trials")->check(CLI::PositiveNumber);
    coin_cmd->add_option("--seed", coin_seed, "Seed");

    std::string gen_spec, gen_out;
    std::uint64_t gen_seed = 1;
    auto* gen_cmd = app.add_subcommand("gen", "Generate a network edge-list file");
    gen_cmd->add_option("--spec", gen_spec, "Generator spec, e.g. grid:16,16")->required();
    gen_cmd->add_option("--seed", gen_seed, "Seed (gnp only)");
    gen_cmd->add_option("--out", gen_out, "Output file (default stdout)");

    try {
        app.parse(argc, argv);

        if (*run_cmd) return cmd_run(app, run_o);
        if (*sweep_cmd) return cmd_sweep(app, sweep_o, sweep_n, sweep_deg);
        if (*verify_cmd) {
            if (suite == "transitions") return verify_transitions();
            if (suite == "static-contraction")
                return verify_static_contraction(verify_seed, verify_branches);
            if (suite == "dynamic-locality")
                return verify_dynamic_locality(verify_seed, churn_q, churn_rounds, churn_n);
            if (suite == "dynamic-contraction")
                return verify_dynamic_contraction(verify_seed, verify_branches);
            if (suite == "async-lemmas") return verify_async_lemmas(verify_seed, async_traces);
            if (suite == "coin") return verify_coin(coin_d, coin_p, verify_trials, verify_seed);
            if (suite == "sj-eligibility")
                return verify_sj_eligibility(verify_seed, verify_branches);
            std::cerr << "unknown suite: " << suite << "\n";
            return kExitUsage;
        }
        if (*coin_cmd) {
            auto e = estimate_coin_bounds(coin_d_single, coin_p_single, coin_trials, coin_seed);
            std::cout << "d,p,y_hat,x_hat,bound\n"
                      << coin_d_single << ',' << coin_p_single << ',' << e.y_hat << ',' << e.x_hat
                      << ',' << e.bound << "\n";
            return kExitPass;
        }
        if (*gen_cmd) {
            Network net = generate(gen_spec, gen_seed);
            if (gen_out.empty()) {
                write_edge_list(std::cout, net);
            } else {
                std::ofstream os(gen_out);
                write_edge_list(os, net);
            }
            return kExitPass;
        }
        return kExitUsage;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}
