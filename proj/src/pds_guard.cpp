#include "greenbtc/pds_guard.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace greenbtc::pds {

namespace {

void check_share(double q) {
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("attacker share must lie in [0, 1]");
}

double nakamoto_prob(double q, std::uint32_t z) {
    const double p = 1.0 - q;
    const double ratio = q / p;
    const double lambda = z * ratio;
    double poisson = std::exp(-lambda);
    double sum = 0.0;
    for (std::uint32_t k = 0; k <= z; ++k) {
        if (k > 0) poisson *= lambda / k;
        sum += poisson * (1.0 - std::pow(ratio, static_cast<double>(z - k)));
    }
    return std::max(0.0, 1.0 - sum);
}

double exact_prob(double q, std::uint32_t z) {
    const double p = 1.0 - q;
    const double ratio = q / p;
    // P(attacker has k blocks when the honest side finds its z-th) is
    // C(k+z-1, k) p^z q^k; from a deficit d it then needs d+1 net steps.
    double nb = std::pow(p, static_cast<double>(z));
    double sum = 0.0;
    for (std::uint32_t k = 0; k <= z; ++k) {
        if (k > 0) nb *= (static_cast<double>(z + k) - 1.0) / k * q;
        sum += nb * (1.0 - std::pow(ratio, static_cast<double>(z - k + 1)));
    }
    return std::max(0.0, 1.0 - sum);
}

/// E[min(T, cap)] for T = hitting time of deficit 0 (tie) in a walk that
/// moves -1 w.p. q and +1 w.p. 1-q, starting from the mixture `mass`
/// (indexed by deficit; mass[0] is already finished).
double capped_hitting_time(std::vector<double> mass, double q, double cap) {
    if (cap <= 0.0) return 0.0;
    const double p = 1.0 - q;
    const auto whole = static_cast<std::size_t>(std::floor(cap));
    const double frac = cap - static_cast<double>(whole);
    mass.resize(mass.size() + whole + 2, 0.0);
    mass[0] = 0.0;
    double expected = 0.0;
    for (std::size_t t = 0;; ++t) {
        double alive = 0.0;
        for (std::size_t d = 1; d < mass.size(); ++d) alive += mass[d];
        if (t == whole) {
            expected += frac * alive;
            break;
        }
        expected += alive;
        std::vector<double> next(mass.size(), 0.0);
        for (std::size_t d = 1; d < mass.size(); ++d) {
            if (mass[d] == 0.0) continue;
            next[d - 1] += mass[d] * q;
            if (d + 1 < mass.size()) next[d + 1] += mass[d] * p;
        }
        next[0] = 0.0;
        mass = std::move(next);
    }
    return expected;
}

double nakamoto_duration(double q, std::uint32_t z, std::uint32_t horizon) {
    const double p = 1.0 - q;
    const double cap = static_cast<double>(horizon);
    if (q == 0.0) return cap;
    const double premine = z / p;
    if (premine >= cap) return cap;
    const double lambda = z * q / p;
    std::vector<double> mass(z + 1, 0.0);
    double poisson = std::exp(-lambda);
    for (std::uint32_t k = 0; k < z; ++k) {
        if (k > 0) poisson *= lambda / k;
        mass[z - k] = poisson;
    }
    return premine + capped_hitting_time(std::move(mass), q, cap - premine);
}

double exact_duration(double q, std::uint32_t z, std::uint32_t horizon) {
    if (q == 0.0) return horizon;
    const double p = 1.0 - q;
    // State: honest blocks capped at z, and lead = attacker - honest blocks.
    const std::size_t span = 2 * static_cast<std::size_t>(horizon) + 1;
    const std::size_t offset = horizon;
    const std::size_t hs = z + 1;
    std::vector<double> mass(hs * span, 0.0);
    mass[offset] = 1.0;
    auto finished = [&](std::size_t h, std::size_t lead_idx) {
        return h == z && lead_idx >= offset + 1;
    };
    double expected = 0.0;
    for (std::uint32_t t = 0; t < horizon; ++t) {
        double alive = 0.0;
        for (double m : mass) alive += m;
        expected += alive;
        std::vector<double> next(mass.size(), 0.0);
        for (std::size_t h = 0; h < hs; ++h) {
            for (std::size_t l = 0; l < span; ++l) {
                const double m = mass[h * span + l];
                if (m == 0.0) continue;
                // honest block
                if (l > 0) {
                    const std::size_t h2 = std::min<std::size_t>(h + 1, z);
                    if (!finished(h2, l - 1)) next[h2 * span + l - 1] += m * p;
                }
                // attacker block
                if (l + 1 < span) {
                    if (!finished(h, l + 1)) next[h * span + l + 1] += m * q;
                }
            }
        }
        mass = std::move(next);
    }
    return expected;
}

}  // namespace

std::string_view model_name(RaceModel m) {
    return m == RaceModel::kNakamoto ? "nakamoto" : "exact";
}

RaceModel parse_model(std::string_view name) {
    if (name == "nakamoto") return RaceModel::kNakamoto;
    if (name == "exact") return RaceModel::kExact;
    throw std::invalid_argument("unknown race model '" + std::string(name) + "'");
}

double double_spend_success_prob(double q, std::uint32_t z, RaceModel model) {
    check_share(q);
    if (q == 0.0) return 0.0;
    if (q >= 0.5) return 1.0;
    return model == RaceModel::kNakamoto ? nakamoto_prob(q, z) : exact_prob(q, z);
}

void PdsParams::validate() const {
    check_share(attacker_share);
    if (!(tx_value >= 0.0)) throw std::invalid_argument("tx_value must be non-negative");
    if (!(rental_cost_per_block >= 0.0)) {
        throw std::invalid_argument("rental_cost_per_block must be non-negative");
    }
    if (!(block_reward >= 0.0)) throw std::invalid_argument("block_reward must be non-negative");
}

double expected_attack_duration(double q, std::uint32_t z, std::uint32_t horizon_blocks,
                                RaceModel model) {
    check_share(q);
    return model == RaceModel::kNakamoto ? nakamoto_duration(q, z, horizon_blocks)
                                         : exact_duration(q, z, horizon_blocks);
}

ProfitBreakdown attack_profit(const PdsParams& params, std::uint32_t z) {
    params.validate();
    ProfitBreakdown b;
    b.z = z;
    b.success_prob = double_spend_success_prob(params.attacker_share, z, params.model);
    b.revenue = b.success_prob * (params.tx_value + z * params.block_reward);
    b.expected_duration_blocks =
        expected_attack_duration(params.attacker_share, z, params.horizon_blocks, params.model);
    b.cost = b.expected_duration_blocks * params.rental_cost_per_block;
    b.profit = b.revenue - b.cost;
    return b;
}

std::optional<std::uint32_t> required_confirmations(const PdsParams& params) {
    params.validate();
    if (params.attacker_share >= 0.5) return std::nullopt;
    for (std::uint32_t z = 0; z <= params.max_z; ++z) {
        if (attack_profit(params, z).profit <= 0.0) return z;
    }
    return std::nullopt;
}

std::vector<ProfitBreakdown> profit_curve(const PdsParams& params) {
    std::vector<ProfitBreakdown> out;
    out.reserve(params.max_z + 1);
    for (std::uint32_t z = 0; z <= params.max_z; ++z) out.push_back(attack_profit(params, z));
    return out;
}

}  // namespace greenbtc::pds
