#include "greenbtc/vct.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include <array>
#include <string>

using namespace greenbtc;
using namespace greenbtc::vct;

namespace {

Threshold::Int from_hex_int(const std::string& hex) { return Threshold::Int("0x" + hex); }

crypto::KeyPair key(std::uint64_t i) { return crypto::keygen(crypto::derive_seed(42, i)); }

crypto::Bytes message(std::uint64_t i) {
    crypto::Bytes m(40, 0xa5);
    for (int b = 0; b < 8; ++b) m[b] = static_cast<std::uint8_t>(i >> (8 * b));
    return m;
}

}  // namespace

TEST(PassProbability, ParsesDecimals) {
    EXPECT_EQ(PassProbability::from_decimal("0.1"), PassProbability(1, 10));
    EXPECT_EQ(PassProbability::from_decimal("1"), PassProbability::one());
    EXPECT_EQ(PassProbability::from_decimal("1.000"), PassProbability::one());
    EXPECT_EQ(PassProbability::from_decimal("0.250"), PassProbability(1, 4));
    EXPECT_EQ(PassProbability::from_decimal("0"), PassProbability::zero());
    EXPECT_EQ(PassProbability::from_decimal(".5"), PassProbability(1, 2));
    EXPECT_EQ(PassProbability::from_decimal("0.123456789"), PassProbability(123456789, 1000000000));
    for (const char* bad : {"", ".", "1.5", "2", "-0.1", "abc", "0.1234567890", "0.1x", "1e-1"}) {
        EXPECT_THROW(PassProbability::from_decimal(bad), std::invalid_argument) << bad;
    }
}

TEST(PassProbability, ReducesAndOrders) {
    const PassProbability p(20, 200);
    EXPECT_EQ(p.numerator(), 1u);
    EXPECT_EQ(p.denominator(), 10u);
    EXPECT_EQ(PassProbability(0, 7).denominator(), 1u);
    EXPECT_LT(PassProbability(1, 10), PassProbability(1, 4));
    EXPECT_LE(PassProbability(1, 4), PassProbability(2, 8));
    EXPECT_EQ(p.to_string(), "1/10");
    EXPECT_THROW(PassProbability(1, 0), std::invalid_argument);
    EXPECT_THROW(PassProbability(3, 2), std::invalid_argument);
}

TEST(Threshold, ExactValues) {
    EXPECT_EQ(threshold_for(PassProbability::one()).value(), 0);
    const Threshold never = threshold_for(PassProbability::zero());
    EXPECT_EQ(never.value(), two_pow_256());
    EXPECT_TRUE(never.never_passes());
    EXPECT_EQ(threshold_for(PassProbability(1, 2)).value(), Threshold::Int(1) << 255);
    // ceil(9 * 2^256 / 10), computed independently with Python integers.
    EXPECT_EQ(threshold_for(PassProbability(1, 10)).value(),
              from_hex_int("e666666666666666666666666666666666666666666666666666666666666667"));
}

TEST(Threshold, PassesComparesBigEndian) {
    const Threshold half = threshold_for(PassProbability(1, 2));
    Digest256 d{};
    EXPECT_FALSE(half.passes(d));
    d.bytes[0] = 0x80;
    EXPECT_TRUE(half.passes(d));
    d.bytes[0] = 0x7f;
    d.bytes.back() = 0xff;
    EXPECT_FALSE(half.passes(d));
    EXPECT_TRUE(threshold_for(PassProbability::one()).passes(Digest256{}));
    Digest256 all_ones;
    all_ones.bytes.fill(0xff);
    EXPECT_FALSE(threshold_for(PassProbability::zero()).passes(all_ones));
    EXPECT_EQ(digest_to_int(all_ones), two_pow_256() - 1);
}

TEST(Threshold, MonotoneInPassProbability) {
    const std::array<PassProbability, 7> grid = {
        PassProbability::zero(), PassProbability(1, 100), PassProbability(1, 10), PassProbability(1, 4),
        PassProbability(1, 2),   PassProbability(9, 10),  PassProbability::one()};
    for (std::size_t i = 1; i < grid.size(); ++i) {
        EXPECT_GT(threshold_for(grid[i - 1]).value(), threshold_for(grid[i]).value());
    }
    for (std::uint64_t k = 0; k < 200; ++k) {
        const auto out = vrf_eval(key(k % 5).secret_key, message(k));
        for (std::size_t i = 1; i < grid.size(); ++i) {
            if (threshold_for(grid[i - 1]).passes(out.value)) {
                EXPECT_TRUE(threshold_for(grid[i]).passes(out.value));
            }
        }
    }
}

TEST(Vrf, DeterministicAndVerifiable) {
    const auto kp = key(1);
    const auto m = message(7);
    const auto a = vrf_eval(kp.secret_key, m);
    EXPECT_EQ(a, vrf_eval(kp.secret_key, m));
    EXPECT_EQ(a.value, crypto::hash(a.proof.bytes));
    EXPECT_TRUE(vrf_verify(kp.public_key, m, a));

    VrfOutput wrong_value = a;
    wrong_value.value = crypto::hash(m);
    EXPECT_FALSE(vrf_verify(kp.public_key, m, wrong_value));

    const auto other = vrf_eval(kp.secret_key, message(8));
    EXPECT_FALSE(vrf_verify(kp.public_key, m, other));
    EXPECT_FALSE(vrf_verify(key(2).public_key, m, a));
}

TEST(VctToss, ExtremeProbabilities) {
    for (std::uint64_t i = 0; i < 50; ++i) {
        EXPECT_TRUE(vct_toss(key(i).secret_key, message(1), PassProbability::one()).pass);
        EXPECT_FALSE(vct_toss(key(i).secret_key, message(1), PassProbability::zero()).pass);
    }
}

TEST(VctToss, OutcomeIsConstantForKeyAndMessage) {
    const auto kp = key(3);
    const auto first = vct_toss(kp.secret_key, message(4), PassProbability(1, 3));
    for (int i = 0; i < 10; ++i) {
        const auto again = vct_toss(kp.secret_key, message(4), PassProbability(1, 3));
        EXPECT_EQ(again.pass, first.pass);
        EXPECT_EQ(again.out, first.out);
    }
}

TEST(VctVerify, AcceptsExactlyHonestPasses) {
    const PassProbability pp(1, 3);
    int passes = 0;
    int fails = 0;
    for (std::uint64_t i = 0; i < 120; ++i) {
        const auto kp = key(i);
        const auto m = message(i * 3 + 1);
        const auto t = vct_toss(kp.secret_key, m, pp);
        EXPECT_EQ(vct_verify(kp.public_key, m, t.out, pp), t.pass);
        if (t.pass) {
            ++passes;
            // A stricter probability whose threshold exceeds the value must reject.
            for (PassProbability stricter : {PassProbability(1, 10), PassProbability(1, 100)}) {
                if (!threshold_for(stricter).passes(t.out.value)) {
                    EXPECT_FALSE(vct_verify(kp.public_key, m, t.out, stricter));
                }
            }
            VrfOutput tampered = t.out;
            tampered.proof.bytes[5] ^= 1;
            EXPECT_FALSE(vct_verify(kp.public_key, m, tampered, pp));
            EXPECT_FALSE(vct_verify(kp.public_key, message(9999), t.out, pp));
        } else {
            ++fails;
        }
    }
    EXPECT_GT(passes, 0);
    EXPECT_GT(fails, 0);
}

TEST(VctToss, TopByteUniformAndPassRate) {
    // 1,000 keys x 100 messages = 100,000 distinct evaluations.
    std::array<std::uint64_t, 256> counts{};
    std::uint64_t passes = 0;
    const PassProbability pp(1, 10);
    const Threshold t = threshold_for(pp);
    std::uint64_t total = 0;
    for (std::uint64_t k = 0; k < 1000; ++k) {
        const auto kp = key(1000 + k);
        for (std::uint64_t j = 0; j < 100; ++j) {
            const auto out = vrf_eval(kp.secret_key, message(j));
            ++counts[out.value.bytes[0]];
            passes += t.passes(out.value) ? 1 : 0;
            ++total;
        }
    }
    const double expected = static_cast<double>(total) / 256.0;
    double chi2 = 0.0;
    for (auto c : counts) chi2 += (c - expected) * (c - expected) / expected;
    const double critical = boost::math::quantile(boost::math::chi_squared(255.0), 0.999);
    EXPECT_LT(chi2, critical);
    EXPECT_NEAR(static_cast<double>(passes) / static_cast<double>(total), 0.1, 0.005);
}

TEST(WeightedPass, Examples) {
    const PassProbability base(1, 10);
    EXPECT_EQ(weighted_pass_probability(base, 10, 1000, 100), base);
    EXPECT_EQ(weighted_pass_probability(base, 0, 1000, 100), PassProbability::zero());
    EXPECT_EQ(weighted_pass_probability(base, 20, 1000, 100), PassProbability(1, 5));
    EXPECT_EQ(weighted_pass_probability(base, 500, 1000, 100), PassProbability::one());
    EXPECT_EQ(weighted_pass_probability(PassProbability(1, 3), 1, 3, 3), PassProbability(1, 3));
    EXPECT_THROW(weighted_pass_probability(base, 1, 0, 10), std::invalid_argument);
    EXPECT_THROW(weighted_pass_probability(base, 1, 10, 0), std::invalid_argument);
    EXPECT_THROW(weighted_pass_probability(base, 11, 10, 10), std::invalid_argument);
}

TEST(WeightedPass, LinearBelowCapPreservesMean) {
    // Stakes 1..4 of 10 over four nodes: pp_i = 0.1 * 4 * s_i / 10 = s_i / 25,
    // whose mean is the base probability.
    const PassProbability base(1, 10);
    for (std::uint64_t s = 1; s <= 4; ++s) {
        EXPECT_EQ(weighted_pass_probability(base, s, 10, 4), PassProbability(s, 25));
    }
}
