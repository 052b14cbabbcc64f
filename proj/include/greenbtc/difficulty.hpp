#pragma once

// Difficulty levels: a table of code parameters ordered by decreasing solve
// probability, the work credited per level, and the retarget rule.

#include "greenbtc/eccpow.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace greenbtc::difficulty {

struct LevelEntry {
    eccpow::CodeParams params;
    double p_hat = 0.0;          ///< calibrated solve probability per attempt
    double std_err = 0.0;
    std::uint64_t samples = 0;
};

class DifficultyTable {
public:
    DifficultyTable() = default;
    /// Throws std::invalid_argument if a level has invalid params or a
    /// p_hat outside (0, 1].
    explicit DifficultyTable(std::vector<LevelEntry> levels);

    std::size_t size() const { return levels_.size(); }
    std::uint32_t max_level() const { return static_cast<std::uint32_t>(levels_.size() - 1); }
    bool contains(std::uint32_t level) const { return level < levels_.size(); }

    /// Throws std::out_of_range for an unknown level.
    const LevelEntry& at(std::uint32_t level) const;
    const std::vector<LevelEntry>& levels() const { return levels_; }

private:
    std::vector<LevelEntry> levels_;
};

/// Levels 0..9 with frozen Monte Carlo calibration.
const DifficultyTable& default_table();

/// Code parameters of the shipped table, without calibration data.
std::vector<eccpow::CodeParams> default_params();

/// round(1 / p_hat). Throws std::out_of_range for an unknown level.
std::uint64_t work(const DifficultyTable& table, std::uint32_t level);

struct BlockStamp {
    std::uint64_t timestamp = 0;
    std::uint32_t level = 0;
};

/// Mean spacing a of the last `window` intervals in `recent` (oldest first).
/// a < target/2 raises the level by one, a > 2*target lowers it by one
/// (never below zero), otherwise the level is unchanged. With fewer than two
/// stamps the current level is returned. `max_level` caps upward moves.
std::uint32_t difficulty_control(std::span<const BlockStamp> recent, std::uint32_t current_level,
                                 double target_interval_s, std::uint32_t window,
                                 std::uint32_t max_level = UINT32_MAX);

}  // namespace greenbtc::difficulty
