#pragma once

// Discrete-event simulation of a network of mining nodes.
//
// Every node tosses its coin once per parent it adopts. Only nodes whose toss
// passed spend solve attempts on that parent, either by running the real
// puzzle (concrete mode) or by drawing successes from the calibrated solve
// probability (abstract mode). Blocks propagate over a full mesh under the
// configured latency and partition schedule; receivers validate and move to
// the chain with the most accumulated work.

#include "greenbtc/chain.hpp"
#include "greenbtc/scenario.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace greenbtc::simnet {

class SimError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EnergyCounters {
    std::uint64_t vct_tosses = 0;
    std::uint64_t solve_attempts = 0;
    std::uint64_t decode_iterations = 0;  ///< concrete mode only
    std::uint64_t verify_count = 0;

    EnergyCounters& operator+=(const EnergyCounters& o);
    bool operator==(const EnergyCounters&) const = default;
};

/// One main-chain block, genesis excluded.
struct BlockRecord {
    std::uint64_t height = 0;
    crypto::Digest256 hash;
    double found_time_s = 0.0;
    std::uint64_t timestamp = 0;
    double interval_s = 0.0;  ///< found time minus the parent's found time
    std::uint32_t level = 0;
    std::uint32_t miner = 0;
    bool adversarial = false;
    /// Tosses that passed on this block's parent, and how many of them
    /// belonged to adversarial nodes.
    std::uint32_t committee_size = 0;
    std::uint32_t adversary_passes = 0;
};

struct AttackTrial {
    double start_s = 0.0;
    double end_s = 0.0;
    bool success = false;
    std::uint64_t private_length = 0;
    std::uint64_t honest_length = 0;
};

struct Metrics {
    std::vector<BlockRecord> blocks;
    std::uint64_t blocks_produced = 0;  ///< every block mined, released or not
    std::uint64_t stale_blocks = 0;     ///< released blocks off the main chain
    std::uint64_t fork_events = 0;      ///< released blocks with an earlier released sibling
    std::vector<EnergyCounters> node_energy;
    EnergyCounters total_energy;
    std::vector<AttackTrial> attacks;
    /// Solve attempts charged to a parent whose toss had failed; always 0.
    std::uint64_t gating_violations = 0;
    /// Filled when RunOptions::record_events is set.
    std::vector<std::string> events;
    /// Main chain including genesis, oldest first.
    std::vector<std::shared_ptr<const chain::Block>> chain;

    double mean_interval_s() const;
};

struct RunOptions {
    bool record_events = false;
};

/// Throws ConfigError for an invalid scenario before any event runs.
Metrics run(const ScenarioConfig& scenario, const RunOptions& options = {});

/// One row per main-chain block, one per node energy counter and one per
/// summary metric, with fixed-precision formatting.
std::string metrics_csv(const Metrics& m);
/// Summary metrics by name, in a stable order.
std::map<std::string, double> summary_metrics(const Metrics& m);

struct EceResult {
    double ece = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double attempts_per_block = 0.0;       ///< at the requested pass probability
    double attempts_per_block_full = 0.0;  ///< twin run at pass probability 1
    std::uint64_t blocks = 0;
    std::uint64_t blocks_full = 0;
};

/// Runs the scenario at `pp` and a twin at pass probability 1 whose solve
/// probability is scaled by pp so both target the same block interval.
/// ECE = 1 - (attempts per main-chain block at pp) / (same for the twin).
/// Requires abstract mode. Throws SimError if either run produced no block.
EceResult measure_ece(const ScenarioConfig& scenario, const vct::PassProbability& pp);

struct CommitteeResult {
    /// Adversary share among passed nodes per round; rounds where nobody
    /// passed are skipped and counted in empty_rounds.
    std::vector<double> shares;
    std::uint32_t empty_rounds = 0;
    double mean_share = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::uint64_t total_passes = 0;
    std::uint64_t adversary_passes = 0;
    /// Share expected from the adversary's pass probabilities.
    double expected_share = 0.0;
    /// Exact two-sided binomial test of adversary_passes out of total_passes
    /// against expected_share.
    double binomial_p_value = 1.0;
};

/// Real coin tosses by every node of the scenario on `rounds` distinct
/// parent headers. The lowest round(fraction * node_count) nodes are
/// adversarial.
CommitteeResult committee_proportion(const ScenarioConfig& scenario, double adversary_fraction,
                                     std::uint32_t rounds);

struct AttackOptions {
    std::uint32_t trials = 10'000;
    /// A trial fails once this many blocks were found in total.
    std::uint64_t horizon_blocks = 10'000;
    /// A trial fails once the attacker trails by more than this; 0 disables.
    std::uint32_t give_up_deficit = 64;
    std::uint32_t jobs = 1;
};

struct AttackResult {
    std::uint32_t trials = 0;
    std::uint32_t successes = 0;
    double rate = 0.0;
    double ci_low = 0.0;   ///< Wilson 95% interval
    double ci_high = 0.0;
    double mean_blocks = 0.0;  ///< blocks per trial until the outcome
};

/// Private-chain double spend races. Each trial starts with honest and
/// attacker branches at the block before the target transaction; every time
/// a branch grows, the nodes on that branch toss again, and the next block
/// goes to a branch in proportion to its number of passed nodes. Toss
/// outcomes are drawn as Bernoulli(pass probability) per node. The attacker
/// wins when it is strictly ahead after the honest branch has z blocks.
AttackResult attack_experiment(const ScenarioConfig& scenario, double adversary_fraction,
                               std::uint32_t z_confirmations, const AttackOptions& options);

}  // namespace greenbtc::simnet
