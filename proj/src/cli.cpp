#include "greenbtc/cli.hpp"

#include "greenbtc/pds_guard.hpp"
#include "greenbtc/simnet.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>
#include <unistd.h>

namespace greenbtc::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

class CommandError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

/// Staging directory that replaces the destination only on commit().
class OutputDir {
public:
    explicit OutputDir(const std::string& path) : final_(fs::absolute(path).lexically_normal()) {
        if (final_.filename().empty()) final_ = final_.parent_path();
        fs::create_directories(final_.parent_path());
        staging_ = final_.parent_path() /
                   ("." + final_.filename().string() + ".staging-" + std::to_string(::getpid()));
        fs::remove_all(staging_);
        fs::create_directory(staging_);
    }
    OutputDir(const OutputDir&) = delete;
    OutputDir& operator=(const OutputDir&) = delete;
    ~OutputDir() {
        std::error_code ec;
        if (!committed_) fs::remove_all(staging_, ec);
    }

    void write(const std::string& name, const std::string& content) {
        std::ofstream f(staging_ / name, std::ios::binary);
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!f) throw CommandError("cannot write " + (staging_ / name).string());
        const auto digest = crypto::hash(
            {reinterpret_cast<const std::uint8_t*>(content.data()), content.size()});
        files_.push_back({{"file", name}, {"sha256", digest.hex()}, {"bytes", content.size()}});
    }

    /// Writes summary.json (with `extra` merged in) and moves the directory
    /// into place.
    void commit(json extra) {
        extra["outputs"] = files_;
        const std::string text = extra.dump(2) + "\n";
        std::ofstream(staging_ / "summary.json", std::ios::binary) << text;
        if (fs::exists(final_)) {
            const fs::path old = final_.parent_path() / ("." + final_.filename().string() + ".old-" +
                                                         std::to_string(::getpid()));
            fs::rename(final_, old);
            fs::rename(staging_, final_);
            fs::remove_all(old);
        } else {
            fs::rename(staging_, final_);
        }
        committed_ = true;
    }

    const fs::path& path() const { return final_; }

private:
    fs::path final_;
    fs::path staging_;
    json files_ = json::array();
    bool committed_ = false;
};

template <typename Fn>
void parallel_for(std::size_t count, std::uint32_t jobs, Fn fn) {
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(jobs, count));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < count; i += workers) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw CommandError(flag + ": cannot parse '" + item + "' as a number");
        }
    }
    if (out.empty()) throw CommandError(flag + ": expected a comma-separated list");
    return out;
}

std::vector<std::string> split(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

struct CommonFlags {
    std::string config;
    std::string seed;
    std::string out;
    std::uint32_t jobs = 1;
    std::string mode;
    bool verbose = false;
};

simnet::ScenarioConfig load_config(const CommonFlags& f) {
    simnet::ScenarioConfig cfg = simnet::load_scenario(f.config);
    cfg.seed = resolve_seed(cfg.seed, f.seed);
    if (f.mode == "abstract") cfg.mode = simnet::MiningMode::kAbstract;
    if (f.mode == "concrete") cfg.mode = simnet::MiningMode::kConcrete;
    cfg.validate();
    return cfg;
}

int cmd_run(const CommonFlags& f, std::ostream& out) {
    const auto cfg = load_config(f);
    simnet::RunOptions opt;
    opt.record_events = f.verbose;
    const auto metrics = simnet::run(cfg, opt);

    OutputDir dir(f.out);
    dir.write("metrics.csv", simnet::metrics_csv(metrics));
    dir.write("config.json", simnet::scenario_to_json(cfg));
    if (f.verbose) {
        std::string log;
        for (const auto& e : metrics.events) log += e + "\n";
        dir.write("events.log", log);
    }
    json summary = {{"command", "run"}, {"seed", cfg.seed}};
    for (const auto& [k, v] : simnet::summary_metrics(metrics)) summary["metrics"][k] = v;
    dir.commit(summary);
    out << "blocks=" << metrics.blocks.size() << " mean_interval_s=" << num(metrics.mean_interval_s())
        << " out=" << dir.path().string() << "\n";
    return 0;
}

int cmd_export_chain(const CommonFlags& f, std::ostream& out) {
    const auto cfg = load_config(f);
    const auto metrics = simnet::run(cfg);
    OutputDir dir(f.out);
    dir.write("chain.txt", chain::export_chain(metrics.chain));
    dir.commit({{"command", "export-chain"}, {"seed", cfg.seed}, {"blocks", metrics.chain.size()}});
    out << "exported " << metrics.chain.size() << " blocks to " << dir.path().string() << "\n";
    return 0;
}

struct CalibrateFlags {
    std::uint64_t batch = 20'000;
    std::uint64_t min_hits = 200;
    std::uint64_t max_samples = 20'000'000;
};

int cmd_calibrate(const CommonFlags& f, const CalibrateFlags& c, std::ostream& out) {
    std::vector<eccpow::CodeParams> levels;
    std::uint64_t seed = 1;
    if (!f.config.empty()) {
        const auto cfg = load_config(f);
        seed = cfg.seed;
        for (const auto& e : cfg.difficulty_table().levels()) levels.push_back(e.params);
    } else {
        seed = resolve_seed(seed, f.seed);
        levels = difficulty::default_params();
    }
    if (c.batch == 0) throw CommandError("--batch must be positive");

    std::vector<eccpow::SolveProbability> results(levels.size());
    parallel_for(levels.size(), f.jobs, [&](std::size_t level) {
        eccpow::SolveProbability acc;
        for (std::uint64_t b = 0; acc.successes < c.min_hits && acc.samples < c.max_samples; ++b) {
            const std::uint64_t batch_seed = seed * 1'000'003ull + level * 65'537ull + b;
            const auto r = eccpow::estimate_solve_prob(levels[level], c.batch, batch_seed);
            acc.samples += r.samples;
            acc.successes += r.successes;
        }
        acc.p = static_cast<double>(acc.successes) / static_cast<double>(acc.samples);
        acc.std_err = std::sqrt(acc.p * (1.0 - acc.p) / static_cast<double>(acc.samples));
        results[level] = acc;
    });

    std::string csv = "level,n,wc,wr,max_iter,p_hat,std_err,samples,successes\n";
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const auto& p = levels[i];
        const auto& r = results[i];
        csv += std::to_string(i) + "," + std::to_string(p.n) + "," + std::to_string(p.wc) + "," +
               std::to_string(p.wr) + "," + std::to_string(p.max_iter) + "," + num(r.p) + "," +
               num(r.std_err) + "," + std::to_string(r.samples) + "," + std::to_string(r.successes) +
               "\n";
    }
    OutputDir dir(f.out);
    dir.write("calibration.csv", csv);
    dir.commit({{"command", "calibrate"}, {"seed", seed}, {"levels", levels.size()}});
    out << csv;
    return 0;
}

int cmd_ece(const CommonFlags& f, const std::string& pp_list, std::ostream& out) {
    const auto cfg = load_config(f);
    std::vector<vct::PassProbability> pps;
    for (const auto& item : split(pp_list)) {
        try {
            pps.push_back(vct::PassProbability::from_decimal(item));
        } catch (const std::invalid_argument& e) {
            throw CommandError("--pp: " + std::string(e.what()));
        }
    }
    if (pps.empty()) throw CommandError("--pp: expected a comma-separated list");
    std::vector<simnet::EceResult> results(pps.size());
    parallel_for(pps.size(), f.jobs, [&](std::size_t i) { results[i] = simnet::measure_ece(cfg, pps[i]); });

    std::string csv = "pp,ece,ci_low,ci_high,attempts_per_block,attempts_per_block_full,blocks,blocks_full\n";
    for (std::size_t i = 0; i < pps.size(); ++i) {
        const auto& r = results[i];
        csv += num(pps[i].as_double()) + "," + num(r.ece) + "," + num(r.ci_low) + "," + num(r.ci_high) +
               "," + num(r.attempts_per_block) + "," + num(r.attempts_per_block_full) + "," +
               std::to_string(r.blocks) + "," + std::to_string(r.blocks_full) + "\n";
    }
    OutputDir dir(f.out);
    dir.write("ece.csv", csv);
    dir.commit({{"command", "ece"}, {"seed", cfg.seed}});
    out << csv;
    return 0;
}

struct AttackFlags {
    std::string fractions = "0.1,0.2,0.3";
    int z = -1;
    std::uint32_t trials = 10'000;
    std::uint64_t horizon = 10'000;
    std::uint32_t give_up = 64;
};

int cmd_attack(const CommonFlags& f, const AttackFlags& a, std::ostream& out) {
    const auto cfg = load_config(f);
    const auto fractions = parse_list(a.fractions, "--fractions");
    const std::uint32_t z = a.z >= 0 ? static_cast<std::uint32_t>(a.z) : cfg.adversary.confirmations;
    simnet::AttackOptions opt;
    opt.trials = a.trials;
    opt.horizon_blocks = a.horizon;
    opt.give_up_deficit = a.give_up;
    opt.jobs = f.jobs;

    std::string csv = "fraction,z,trials,successes,rate,ci_low,ci_high,analytic_exact,analytic_nakamoto\n";
    for (double q : fractions) {
        if (!(q >= 0.0 && q <= 1.0)) throw CommandError("--fractions: values must lie in [0, 1]");
        const auto r = simnet::attack_experiment(cfg, q, z, opt);
        // The analytic models take the attacker's share of elected nodes.
        const double share = static_cast<double>(std::llround(q * cfg.node_count)) / cfg.node_count;
        csv += num(q) + "," + std::to_string(z) + "," + std::to_string(r.trials) + "," +
               std::to_string(r.successes) + "," + num(r.rate) + "," + num(r.ci_low) + "," +
               num(r.ci_high) + "," +
               num(pds::double_spend_success_prob(share, z, pds::RaceModel::kExact)) + "," +
               num(pds::double_spend_success_prob(share, z, pds::RaceModel::kNakamoto)) + "\n";
    }
    OutputDir dir(f.out);
    dir.write("attack.csv", csv);
    dir.commit({{"command", "attack"}, {"seed", cfg.seed}});
    out << csv;
    return 0;
}

struct PdsFlags {
    double q = 0.0;
    double value = 0.0;
    double cost = 0.0;
    double reward = 0.0;
    std::uint32_t max_z = 100;
    std::uint32_t horizon = 100;
    std::string model = "nakamoto";
};

int cmd_pds(const CommonFlags& f, const PdsFlags& p, std::ostream& out) {
    pds::PdsParams params;
    params.attacker_share = p.q;
    params.tx_value = p.value;
    params.rental_cost_per_block = p.cost;
    params.block_reward = p.reward;
    params.max_z = p.max_z;
    params.horizon_blocks = p.horizon;
    try {
        params.model = pds::parse_model(p.model);
        params.validate();
    } catch (const std::invalid_argument& e) {
        throw CommandError(e.what());
    }
    const auto z = pds::required_confirmations(params);
    json doc = {{"q", p.q},
                {"tx_value", p.value},
                {"rental_cost_per_block", p.cost},
                {"block_reward", p.reward},
                {"model", std::string(pds::model_name(params.model))},
                {"verdict", z ? "safe" : "unsafe"},
                {"required_confirmations", z ? json(*z) : json(nullptr)}};
    json curve = json::array();
    if (p.q < 0.5) {
        for (const auto& b : pds::profit_curve(params)) {
            curve.push_back({{"z", b.z},
                             {"success_prob", b.success_prob},
                             {"revenue", b.revenue},
                             {"expected_duration_blocks", b.expected_duration_blocks},
                             {"cost", b.cost},
                             {"profit", b.profit}});
        }
    }
    doc["curve"] = curve;
    const std::string text = doc.dump(2) + "\n";
    if (!f.out.empty()) {
        OutputDir dir(f.out);
        dir.write("pds.json", text);
        dir.commit({{"command", "pds"}});
    }
    out << "verdict=" << (z ? "safe" : "unsafe");
    if (z) out << " required_confirmations=" << *z;
    out << "\n";
    return 0;
}

void add_common(CLI::App* sub, CommonFlags& f, bool needs_config, bool needs_out) {
    auto* config = sub->add_option("--config", f.config, "Scenario JSON file");
    if (needs_config) config->required();
    sub->add_option("--seed", f.seed, "RNG seed (GREENBTC_SEED overrides)");
    auto* out = sub->add_option("--out", f.out, "Output directory");
    if (needs_out) out->required();
    sub->add_option("--jobs", f.jobs, "Parallel workers")->check(CLI::PositiveNumber);
    sub->add_option("--mode", f.mode, "Mining fidelity")->check(CLI::IsMember({"concrete", "abstract"}));
    sub->add_flag("--verbose", f.verbose, "Export the event log");
}

}  // namespace

std::uint64_t resolve_seed(std::uint64_t config_seed, const std::string& flag_value) {
    auto parse = [](const std::string& text, const char* what) {
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            if (!text.empty() && text[0] == '-') throw std::invalid_argument(text);
            v = std::stoull(text, &used, 10);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != text.size()) {
            throw CommandError(std::string(what) + ": expected a non-negative integer, got '" + text + "'");
        }
        return static_cast<std::uint64_t>(v);
    };
    if (const char* env = std::getenv("GREENBTC_SEED"); env && *env) return parse(env, "GREENBTC_SEED");
    if (!flag_value.empty()) return parse(flag_value, "--seed");
    return config_seed;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Green Bitcoin consensus simulator"};
    app.require_subcommand(1);

    CommonFlags f;
    CalibrateFlags cal;
    AttackFlags atk;
    PdsFlags pdsf;
    std::string pp_list = "0.1,0.25,0.5,1";

    auto* run = app.add_subcommand("run", "Simulate a scenario and write metrics");
    add_common(run, f, true, true);
    auto* calibrate = app.add_subcommand("calibrate", "Monte Carlo solve probability per level");
    add_common(calibrate, f, false, true);
    calibrate->add_option("--batch", cal.batch, "Samples per batch");
    calibrate->add_option("--min-hits", cal.min_hits, "Stop a level after this many solves");
    calibrate->add_option("--max-samples", cal.max_samples, "Sample cap per level");
    auto* ece = app.add_subcommand("ece", "Energy consumption efficiency per pass probability");
    add_common(ece, f, true, true);
    ece->add_option("--pp", pp_list, "Comma-separated pass probabilities");
    auto* attack = app.add_subcommand("attack", "Double-spend race experiments");
    add_common(attack, f, true, true);
    attack->add_option("--fractions", atk.fractions, "Comma-separated adversary fractions");
    attack->add_option("--z", atk.z, "Confirmations (default: scenario value)");
    attack->add_option("--trials", atk.trials, "Trials per fraction")->check(CLI::PositiveNumber);
    attack->add_option("--horizon", atk.horizon, "Block horizon per trial")->check(CLI::PositiveNumber);
    attack->add_option("--give-up", atk.give_up, "Abandon when trailing by more (0 = never)");
    auto* pdscmd = app.add_subcommand("pds", "Profitable double-spend safeguard");
    add_common(pdscmd, f, false, false);
    pdscmd->add_option("--q", pdsf.q, "Attacker share")->required();
    pdscmd->add_option("--value", pdsf.value, "Transaction value");
    pdscmd->add_option("--cost", pdsf.cost, "Rental cost per block interval");
    pdscmd->add_option("--reward", pdsf.reward, "Block reward");
    pdscmd->add_option("--max-z", pdsf.max_z, "Largest confirmation count considered");
    pdscmd->add_option("--horizon", pdsf.horizon, "Attack duration cap in blocks");
    pdscmd->add_option("--model", pdsf.model, "Race model")->check(CLI::IsMember({"nakamoto", "exact"}));
    auto* export_chain = app.add_subcommand("export-chain", "Simulate and export the main chain");
    add_common(export_chain, f, true, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (run->parsed()) return cmd_run(f, out);
        if (calibrate->parsed()) return cmd_calibrate(f, cal, out);
        if (ece->parsed()) return cmd_ece(f, pp_list, out);
        if (attack->parsed()) return cmd_attack(f, atk, out);
        if (pdscmd->parsed()) return cmd_pds(f, pdsf, out);
        if (export_chain->parsed()) return cmd_export_chain(f, out);
    } catch (const simnet::ConfigError& e) {
        err << "error: invalid config: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv;
    argv.push_back("greenbtc");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace greenbtc::cli
