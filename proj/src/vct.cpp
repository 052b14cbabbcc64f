#include "greenbtc/vct.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <stdexcept>

namespace greenbtc::vct {

namespace {

using u128 = unsigned __int128;

std::uint64_t narrow_or_throw(u128 v, const char* what) {
    if (v > std::numeric_limits<std::uint64_t>::max()) {
        throw std::invalid_argument(std::string(what) + ": value does not fit 64 bits");
    }
    return static_cast<std::uint64_t>(v);
}

u128 gcd128(u128 a, u128 b) {
    while (b != 0) {
        const u128 t = a % b;
        a = b;
        b = t;
    }
    return a;
}

}  // namespace

PassProbability::PassProbability(std::uint64_t numerator, std::uint64_t denominator)
    : num_(numerator), den_(denominator) {
    if (den_ == 0) throw std::invalid_argument("pass probability: zero denominator");
    if (num_ > den_) throw std::invalid_argument("pass probability: exceeds 1");
    const std::uint64_t g = std::gcd(num_, den_);
    if (g > 1) {
        num_ /= g;
        den_ /= g;
    }
    if (num_ == 0) den_ = 1;
}

PassProbability PassProbability::from_decimal(std::string_view text) {
    if (text.empty()) throw std::invalid_argument("pass probability: empty string");
    const auto dot = text.find('.');
    const std::string_view whole = text.substr(0, dot);
    const std::string_view frac = dot == std::string_view::npos ? std::string_view{}
                                                                : text.substr(dot + 1);
    if (whole.empty() && frac.empty()) {
        throw std::invalid_argument("pass probability: no digits in '" + std::string(text) + "'");
    }
    if (frac.size() > 9) {
        throw std::invalid_argument("pass probability: more than 9 fractional digits");
    }
    auto all_digits = [](std::string_view s) {
        return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
    };
    if (!all_digits(whole) || !all_digits(frac) || whole.size() > 9) {
        throw std::invalid_argument("pass probability: malformed decimal '" +
                                    std::string(text) + "'");
    }
    std::uint64_t den = 1;
    std::uint64_t num = 0;
    for (char c : whole) num = num * 10 + static_cast<std::uint64_t>(c - '0');
    for (char c : frac) {
        num = num * 10 + static_cast<std::uint64_t>(c - '0');
        den *= 10;
    }
    if (num > den) {
        throw std::invalid_argument("pass probability: '" + std::string(text) + "' exceeds 1");
    }
    return {num, den};
}

std::string PassProbability::to_string() const {
    return std::to_string(num_) + "/" + std::to_string(den_);
}

bool operator<(const PassProbability& a, const PassProbability& b) {
    return static_cast<u128>(a.num_) * b.den_ < static_cast<u128>(b.num_) * a.den_;
}

Threshold::Int two_pow_256() {
    static const Threshold::Int v = Threshold::Int(1) << 256;
    return v;
}

Threshold::Int digest_to_int(const Digest256& d) {
    Threshold::Int v;
    import_bits(v, d.bytes.begin(), d.bytes.end(), 8, true);
    return v;
}

Threshold::Threshold(Int t) : t_(std::move(t)) {
    if (t_ < 0 || t_ > two_pow_256()) {
        throw std::invalid_argument("threshold out of range [0, 2^256]");
    }
    never_ = t_ == two_pow_256();
    if (!never_) {
        std::vector<std::uint8_t> raw;
        export_bits(t_, std::back_inserter(raw), 8, true);
        std::copy(raw.begin(), raw.end(), be_.bytes.end() - static_cast<std::ptrdiff_t>(raw.size()));
    }
}

bool Threshold::passes(const Digest256& vrf_value) const {
    if (never_) return false;
    // Both operands are 32-byte big-endian, so lexicographic order is numeric order.
    return vrf_value.bytes >= be_.bytes;
}

VrfOutput vrf_eval(const crypto::SecretKey& sk, ByteView message) {
    VrfOutput out;
    out.proof = crypto::sign(sk, message);
    out.value = crypto::hash(out.proof.bytes);
    return out;
}

bool vrf_verify(const crypto::PublicKey& pk, ByteView message, const VrfOutput& out) noexcept {
    if (crypto::hash(out.proof.bytes) != out.value) return false;
    return crypto::verify(pk, message, out.proof);
}

Threshold threshold_for(const PassProbability& pp) {
    const Threshold::Int den = pp.denominator();
    const Threshold::Int fail = Threshold::Int(pp.denominator() - pp.numerator());
    const Threshold::Int scaled = fail * two_pow_256();
    Threshold::Int t = scaled / den;
    if (t * den != scaled) t += 1;
    return Threshold(std::move(t));
}

TossResult vct_toss(const crypto::SecretKey& sk, ByteView prev_header_bytes,
                    const PassProbability& pp) {
    TossResult r;
    r.out = vrf_eval(sk, prev_header_bytes);
    r.pass = threshold_for(pp).passes(r.out.value);
    return r;
}

bool vct_verify(const crypto::PublicKey& pk, ByteView prev_header_bytes, const VrfOutput& out,
                const PassProbability& pp) noexcept {
    try {
        if (!threshold_for(pp).passes(out.value)) return false;
    } catch (...) {
        return false;
    }
    return vrf_verify(pk, prev_header_bytes, out);
}

PassProbability weighted_pass_probability(const PassProbability& pp_base, std::uint64_t stake,
                                          std::uint64_t total_stake, std::uint64_t node_count) {
    if (total_stake == 0) throw std::invalid_argument("weighted pass probability: zero total stake");
    if (node_count == 0) throw std::invalid_argument("weighted pass probability: zero node count");
    if (stake > total_stake) {
        throw std::invalid_argument("weighted pass probability: stake exceeds total");
    }
    // num/den = (pp.num * N * stake) / (pp.den * total); reduce in two steps to stay in 128 bits.
    u128 a = static_cast<u128>(pp_base.numerator()) * node_count;
    u128 b = static_cast<u128>(pp_base.denominator()) * total_stake;
    u128 g = gcd128(a, b);
    if (g > 1) {
        a /= g;
        b /= g;
    }
    const u128 g2 = gcd128(stake, b);
    const u128 s = stake / (g2 == 0 ? 1 : g2);
    if (g2 > 1) b /= g2;
    if (a != 0 && s > std::numeric_limits<u128>::max() / a) {
        return PassProbability::one();
    }
    const u128 num = a * s;
    if (num >= b) return PassProbability::one();
    return {narrow_or_throw(num, "weighted pass probability"),
            narrow_or_throw(b, "weighted pass probability")};
}

}  // namespace greenbtc::vct
