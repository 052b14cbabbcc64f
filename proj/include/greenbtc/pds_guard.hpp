#pragma once

// Profitable double-spending safeguard: attacker success probability as a
// function of confirmations, expected attack profit under rented hash power,
// and the confirmation depth that makes an attack unprofitable.
//
// Two race models are available:
//  * kNakamoto: attacker progress while the merchant waits for z blocks is
//    Poisson with mean z*q/p and the attacker wins by catching up
//    (reaching a tie). This is the classic closed form.
//  * kExact: attacker progress is negative binomial (the honest side needs
//    exactly z successes in a Bernoulli(q) block sequence) and the attacker
//    wins only by getting strictly ahead, which is what a first-seen fork
//    choice requires. The network simulator reproduces this model.

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace greenbtc::pds {

enum class RaceModel { kNakamoto, kExact };

std::string_view model_name(RaceModel m);
/// "nakamoto" or "exact"; throws std::invalid_argument otherwise.
RaceModel parse_model(std::string_view name);

/// Probability that an attacker with block share q eventually replaces a
/// transaction buried under z confirmations. 1 for q >= 1/2, 0 for q == 0.
/// Throws std::invalid_argument for q outside [0, 1].
double double_spend_success_prob(double q, std::uint32_t z,
                                 RaceModel model = RaceModel::kNakamoto);

struct PdsParams {
    double tx_value = 0.0;
    double attacker_share = 0.0;  ///< q
    double rental_cost_per_block = 0.0;
    double block_reward = 0.0;
    std::uint32_t max_z = 100;
    /// Attack duration is capped at this many block intervals.
    std::uint32_t horizon_blocks = 100;
    RaceModel model = RaceModel::kNakamoto;

    /// Throws std::invalid_argument on negative amounts or q outside [0, 1].
    void validate() const;
};

struct ProfitBreakdown {
    std::uint32_t z = 0;
    double success_prob = 0.0;
    double revenue = 0.0;                   ///< success_prob * (tx_value + z * reward)
    double expected_duration_blocks = 0.0;  ///< E[min(duration, horizon)]
    double cost = 0.0;                      ///< duration * rental cost
    double profit = 0.0;                    ///< revenue - cost
};

/// Expected attack length in block intervals, capped at the horizon. One
/// block interval is the mean time for the whole network (honest plus
/// rented power) to find a block.
double expected_attack_duration(double q, std::uint32_t z, std::uint32_t horizon_blocks,
                                RaceModel model);

ProfitBreakdown attack_profit(const PdsParams& params, std::uint32_t z);

/// Smallest z <= max_z with non-positive expected profit, or nullopt
/// ("unsafe") when none exists. q >= 1/2 is always unsafe.
std::optional<std::uint32_t> required_confirmations(const PdsParams& params);

/// attack_profit for z = 0..max_z.
std::vector<ProfitBreakdown> profit_curve(const PdsParams& params);

}  // namespace greenbtc::pds
