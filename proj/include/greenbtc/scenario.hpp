#pragma once

// Scenario description for the network simulator and its JSON encoding.
//
// Parsing is strict: unknown fields, wrong types and out-of-range values are
// reported as ConfigError with the dotted path of the offending field.

#include "greenbtc/difficulty.hpp"
#include "greenbtc/vct.hpp"

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace greenbtc::simnet {

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& message)
        : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

enum class MiningMode { kAbstract, kConcrete };
enum class Strategy { kHonest, kDoubleSpend };

struct LatencyModel {
    enum class Kind { kConstant, kUniform, kMatrix };
    Kind kind = Kind::kConstant;
    double constant_ms = 100.0;
    double min_ms = 0.0;
    double max_ms = 0.0;
    /// matrix_ms[from][to]; node_count x node_count.
    std::vector<std::vector<double>> matrix_ms;
};

/// While active, nodes in different groups cannot exchange messages; held
/// messages are delivered after `end_s`. Nodes not listed in any group form
/// one extra group.
struct Partition {
    double start_s = 0.0;
    double end_s = 0.0;
    std::vector<std::vector<std::uint32_t>> groups;
};

struct AdversarySpec {
    double fraction = 0.0;
    Strategy strategy = Strategy::kHonest;
    /// Confirmations the merchant waits for before the attacker may release.
    std::uint32_t confirmations = 6;
    /// The attacker abandons a trial once it trails by more than this many blocks.
    std::uint32_t give_up_deficit = 20;
};

/// From `at_s` on, every node's attempt rate is multiplied by `multiplier`
/// (relative to the configured rate, not cumulative).
struct RateStep {
    double at_s = 0.0;
    double multiplier = 1.0;
};

struct ScenarioConfig {
    std::uint32_t node_count = 10;
    double attempt_rate = 1.0;  ///< attempts per second per node
    vct::PassProbability pass_probability = vct::PassProbability::one();
    std::uint32_t level = 0;     ///< fixed level, or the genesis level under auto control
    bool auto_difficulty = false;
    std::uint32_t retarget_window = 24;
    double target_interval_s = 600.0;
    LatencyModel latency;
    std::vector<Partition> partitions;
    AdversarySpec adversary;
    MiningMode mode = MiningMode::kAbstract;
    std::uint64_t seed = 1;
    double duration_s = 86'400.0;
    /// Optional, one entry per node; enables stake-weighted pass probability.
    std::vector<std::uint64_t> stakes;
    std::vector<RateStep> rate_schedule;
    /// Multiplies every calibrated p_hat in abstract mode.
    double solve_probability_scale = 1.0;
    std::shared_ptr<const difficulty::DifficultyTable> table;

    /// Throws ConfigError.
    void validate() const;
    const difficulty::DifficultyTable& difficulty_table() const;
    /// Number of adversarial nodes: round(fraction * node_count). They are
    /// the lowest-numbered nodes.
    std::uint32_t adversary_count() const;
};

/// Throws ConfigError on any schema violation (including invalid JSON).
ScenarioConfig parse_scenario(std::string_view json_text);
/// Throws ConfigError (field "config") if the file cannot be read.
ScenarioConfig load_scenario(const std::string& path);
/// Effective configuration with all defaults written out. Round-trips
/// through parse_scenario.
std::string scenario_to_json(const ScenarioConfig& cfg);

std::string_view mode_name(MiningMode m);

}  // namespace greenbtc::simnet
