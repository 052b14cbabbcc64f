#include "greenbtc/difficulty.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace greenbtc;
using namespace greenbtc::difficulty;

namespace {

std::vector<BlockStamp> evenly_spaced(std::size_t count, std::uint64_t spacing, std::uint32_t level = 3) {
    std::vector<BlockStamp> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back({1000 + i * spacing, level});
    return out;
}

}  // namespace

TEST(Work, InverseOfSolveProbability) {
    const DifficultyTable table({{{16, 2, 4, 20}, 1.0, 0.0, 1}, {{24, 3, 6, 20}, 0.01, 0.001, 100}});
    EXPECT_EQ(work(table, 0), 1u);
    EXPECT_EQ(work(table, 1), 100u);
    EXPECT_THROW(work(table, 2), std::out_of_range);
}

TEST(Table, RejectsBadEntries) {
    EXPECT_THROW(DifficultyTable({{{16, 2, 4, 20}, 0.0, 0.0, 1}}), std::invalid_argument);
    EXPECT_THROW(DifficultyTable({{{16, 2, 4, 20}, 1.5, 0.0, 1}}), std::invalid_argument);
    EXPECT_THROW(DifficultyTable({{{17, 2, 4, 20}, 0.5, 0.0, 1}}), std::invalid_argument);
}

TEST(Table, ShippedLevelsAreStrictlyHarder) {
    const auto& t = default_table();
    ASSERT_EQ(t.size(), 10u);
    EXPECT_EQ(default_params().size(), t.size());
    for (std::uint32_t l = 1; l < t.size(); ++l) {
        const auto& easier = t.at(l - 1);
        const auto& harder = t.at(l);
        EXPECT_LT(harder.p_hat, easier.p_hat) << l;
        // 99% intervals must not overlap.
        EXPECT_LT(harder.p_hat + 2.576 * harder.std_err, easier.p_hat - 2.576 * easier.std_err) << l;
        EXPECT_GT(work(t, l), work(t, l - 1));
        EXPECT_EQ(default_params()[l], harder.params);
    }
}

TEST(Control, DeadBandRules) {
    const double target = 600.0;
    EXPECT_EQ(difficulty_control(evenly_spaced(25, 100), 3, target, 24), 4u);
    EXPECT_EQ(difficulty_control(evenly_spaced(25, 2000), 3, target, 24), 2u);
    EXPECT_EQ(difficulty_control(evenly_spaced(25, 600), 3, target, 24), 3u);
    EXPECT_EQ(difficulty_control(evenly_spaced(25, 301), 3, target, 24), 3u);
    EXPECT_EQ(difficulty_control(evenly_spaced(25, 1199), 3, target, 24), 3u);
    EXPECT_EQ(difficulty_control(evenly_spaced(25, 2000), 0, target, 24), 0u);
    EXPECT_EQ(difficulty_control(evenly_spaced(25, 100), 9, target, 24, 9), 9u);
    EXPECT_EQ(difficulty_control(evenly_spaced(1, 100), 3, target, 24), 3u);
    EXPECT_EQ(difficulty_control({}, 3, target, 24), 3u);
}

TEST(Control, UsesOnlyTheLastWindow) {
    // Fast blocks long ago, target spacing recently.
    auto stamps = evenly_spaced(50, 10);
    const std::uint64_t start = stamps.back().timestamp;
    for (std::size_t i = 1; i <= 24; ++i) stamps.push_back({start + i * 600, 3});
    EXPECT_EQ(difficulty_control(stamps, 3, 600.0, 24), 3u);
    EXPECT_EQ(difficulty_control(stamps, 3, 600.0, 60), 4u);
}

TEST(Control, ClosedLoopTracksFourfoldRateStep) {
    // Synthetic network: block intervals Exp(rate * p_hat(level)); epoch
    // retargets every 24 blocks; the attempt rate quadruples half way.
    const auto& t = default_table();
    const double target = 600.0;
    const double base_rate = 1.0 / (target * t.at(6).p_hat);
    std::mt19937_64 rng(99);
    std::vector<BlockStamp> chain{{0, 0}};
    double now = 0.0;
    const std::size_t blocks = 6000;
    std::vector<double> intervals;
    std::uint32_t level_before_step = 0;
    for (std::size_t h = 1; h <= blocks; ++h) {
        std::uint32_t level = chain.back().level;
        if (h % 24 == 0) {
            const std::span<const BlockStamp> recent(chain.data() + (chain.size() - std::min<std::size_t>(25, chain.size())),
                                                     std::min<std::size_t>(25, chain.size()));
            level = difficulty_control(recent, level, target, 24, t.max_level());
        }
        const double rate = (h > blocks / 2 ? 4.0 : 1.0) * base_rate;
        std::exponential_distribution<double> gap(rate * t.at(level).p_hat);
        const double dt = gap(rng);
        now += dt;
        chain.push_back({static_cast<std::uint64_t>(now), level});
        intervals.push_back(dt);
        if (h == blocks / 2) level_before_step = level;
    }
    auto mean_of = [&](std::size_t from, std::size_t to) {
        double s = 0.0;
        for (std::size_t i = from; i < to; ++i) s += intervals[i];
        return s / static_cast<double>(to - from);
    };
    const double settled_before = mean_of(blocks / 4, blocks / 2);
    const double settled_after = mean_of(3 * blocks / 4, blocks);
    EXPECT_GT(settled_before, target / 2);
    EXPECT_LT(settled_before, 2 * target);
    EXPECT_GT(settled_after, target / 2);
    EXPECT_LT(settled_after, 2 * target);
    EXPECT_GT(chain.back().level, level_before_step);
}
