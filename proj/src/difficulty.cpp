#include "greenbtc/difficulty.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace greenbtc::difficulty {

DifficultyTable::DifficultyTable(std::vector<LevelEntry> levels) : levels_(std::move(levels)) {
    if (levels_.empty()) throw std::invalid_argument("difficulty table is empty");
    for (std::size_t i = 0; i < levels_.size(); ++i) {
        levels_[i].params.validate();
        const double p = levels_[i].p_hat;
        if (!(p > 0.0 && p <= 1.0)) {
            throw std::invalid_argument("difficulty level " + std::to_string(i) +
                                        ": p_hat must lie in (0, 1]");
        }
    }
}

const LevelEntry& DifficultyTable::at(std::uint32_t level) const {
    if (!contains(level)) {
        throw std::out_of_range("unknown difficulty level " + std::to_string(level));
    }
    return levels_[level];
}

std::vector<eccpow::CodeParams> default_params() {
    std::vector<eccpow::CodeParams> out;
    out.push_back({16, 2, 4, 20});
    for (std::uint32_t n : {24u, 30u, 36u, 42u, 48u, 54u, 60u, 66u, 72u}) {
        out.push_back({n, 3, 6, 20});
    }
    return out;
}

const DifficultyTable& default_table() {
    // Frozen estimate_solve_prob results, rng seed 1000 + level.
    struct Frozen {
        double p_hat;
        double std_err;
        std::uint64_t samples;
    };
    static constexpr Frozen kCalibration[] = {
        {0.247395, 0.000965, 200000},  // n=16
        {0.034165, 0.000406, 200000},  // n=24
        {0.01898, 0.000305, 200000},  // n=30
        {0.009665, 0.000219, 200000},  // n=36
        {0.00428, 0.000146, 200000},  // n=42
        {0.0019625, 7e-05, 400000},  // n=48
        {0.000805, 3.66e-05, 600000},  // n=54
        {0.000334, 1.49e-05, 1500000},  // n=60
        {0.000125, 6.45e-06, 3000000},  // n=66
        {4.68333e-05, 2.79e-06, 6000000},  // n=72
    };
    static const DifficultyTable table = [] {
        const auto params = default_params();
        std::vector<LevelEntry> levels;
        for (std::size_t i = 0; i < params.size(); ++i) {
            levels.push_back({params[i], kCalibration[i].p_hat, kCalibration[i].std_err,
                              kCalibration[i].samples});
        }
        return DifficultyTable(std::move(levels));
    }();
    return table;
}

std::uint64_t work(const DifficultyTable& table, std::uint32_t level) {
    return static_cast<std::uint64_t>(std::llround(1.0 / table.at(level).p_hat));
}

std::uint32_t difficulty_control(std::span<const BlockStamp> recent, std::uint32_t current_level,
                                 double target_interval_s, std::uint32_t window,
                                 std::uint32_t max_level) {
    if (recent.size() < 2 || window == 0) return current_level;
    const std::size_t intervals = std::min<std::size_t>(window, recent.size() - 1);
    const auto& last = recent.back();
    const auto& first = recent[recent.size() - 1 - intervals];
    const double span = static_cast<double>(last.timestamp) - static_cast<double>(first.timestamp);
    const double mean = span / static_cast<double>(intervals);
    if (mean < target_interval_s / 2.0) {
        return current_level < max_level ? current_level + 1 : current_level;
    }
    if (mean > 2.0 * target_interval_s) {
        return current_level == 0 ? 0 : current_level - 1;
    }
    return current_level;
}

}  // namespace greenbtc::difficulty
