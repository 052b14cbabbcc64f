#pragma once

// Verifiable coin toss: a VRF built from a deterministic signature, and a
// threshold test on its output that elects a node for one block.
//
// The VRF input is the canonical serialization of the previous block header,
// so each key gets exactly one toss per parent. The output value is read as
// a 256-bit big-endian integer; a toss passes when value >= threshold.

#include "greenbtc/crypto.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <string>
#include <string_view>

namespace greenbtc::vct {

using crypto::ByteView;
using crypto::Digest256;

struct VrfOutput {
    crypto::Signature proof;
    Digest256 value;
    bool operator==(const VrfOutput&) const = default;
};

/// Exact rational probability numerator/denominator, 0 <= p <= 1.
class PassProbability {
public:
    /// Throws std::invalid_argument unless 0 <= num <= den and den > 0.
    PassProbability(std::uint64_t numerator, std::uint64_t denominator);

    static PassProbability one() { return {1, 1}; }
    static PassProbability zero() { return {0, 1}; }

    /// Parses a decimal such as "0.1", "1", "0.25" or "1.000" into a reduced
    /// fraction. At most nine fractional digits. Throws std::invalid_argument.
    static PassProbability from_decimal(std::string_view text);

    std::uint64_t numerator() const { return num_; }
    std::uint64_t denominator() const { return den_; }
    double as_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }
    std::string to_string() const;

    friend bool operator==(const PassProbability& a, const PassProbability& b) {
        return a.num_ == b.num_ && a.den_ == b.den_;
    }
    friend bool operator<(const PassProbability& a, const PassProbability& b);
    friend bool operator<=(const PassProbability& a, const PassProbability& b) {
        return !(b < a);
    }

private:
    std::uint64_t num_;
    std::uint64_t den_;
};

/// Pass threshold in [0, 2^256]. 0 always passes; 2^256 never passes.
class Threshold {
public:
    using Int = boost::multiprecision::cpp_int;

    explicit Threshold(Int t);

    const Int& value() const { return t_; }
    bool never_passes() const { return never_; }
    bool passes(const Digest256& vrf_value) const;

    friend bool operator==(const Threshold& a, const Threshold& b) { return a.t_ == b.t_; }

private:
    Int t_;
    bool never_ = false;
    Digest256 be_{};  // valid when !never_
};

Threshold::Int two_pow_256();
Threshold::Int digest_to_int(const Digest256& d);

VrfOutput vrf_eval(const crypto::SecretKey& sk, ByteView message);
bool vrf_verify(const crypto::PublicKey& pk, ByteView message, const VrfOutput& out) noexcept;

/// t = ceil((1 - pp) * 2^256), so that P(value >= t) = pp for uniform values.
Threshold threshold_for(const PassProbability& pp);

struct TossResult {
    bool pass = false;
    VrfOutput out;
};

TossResult vct_toss(const crypto::SecretKey& sk, ByteView prev_header_bytes,
                    const PassProbability& pp);
bool vct_verify(const crypto::PublicKey& pk, ByteView prev_header_bytes, const VrfOutput& out,
                const PassProbability& pp) noexcept;

/// min(1, pp_base * node_count * stake / total_stake), reduced.
/// Throws std::invalid_argument when total_stake or node_count is zero or
/// stake exceeds total_stake.
PassProbability weighted_pass_probability(const PassProbability& pp_base, std::uint64_t stake,
                                          std::uint64_t total_stake, std::uint64_t node_count);

}  // namespace greenbtc::vct
