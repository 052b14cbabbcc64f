#pragma once

// Hashing and the deterministic signature interface shared by the coin-toss
// election and the pool-resistant puzzle.
//
// Every signature scheme plugged in behind SignatureScheme must be
// deterministic: sign(sk, m) yields the same bytes on every call. A
// randomized scheme would let a node grind its election ticket or its
// puzzle input, so it cannot be used here.

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace greenbtc::crypto {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

class CryptoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Digest256 {
    std::array<std::uint8_t, 32> bytes{};

    auto operator<=>(const Digest256&) const = default;

    ByteView view() const { return bytes; }
    std::string hex() const;
    static Digest256 from_hex(std::string_view hex);
};

struct SecretKey {
    Bytes bytes;
    bool operator==(const SecretKey&) const = default;
};

struct PublicKey {
    Bytes bytes;
    bool operator==(const PublicKey&) const = default;
};

struct Signature {
    Bytes bytes;
    bool operator==(const Signature&) const = default;
};

struct KeyPair {
    SecretKey secret_key;
    PublicKey public_key;
    bool operator==(const KeyPair&) const = default;
};

/// Incremental SHA-256.
class Sha256 {
public:
    Sha256();
    Sha256& update(ByteView data);
    Sha256& update_u32_be(std::uint32_t v);
    Digest256 finalize();

private:
    alignas(64) std::array<std::uint8_t, 128> state_{};
};

Digest256 hash(ByteView data);

/// Pluggable deterministic signature scheme.
class SignatureScheme {
public:
    virtual ~SignatureScheme() = default;

    virtual std::string_view name() const = 0;
    virtual std::size_t seed_size() const = 0;

    /// Throws CryptoError when the seed has the wrong length.
    virtual KeyPair keygen(ByteView seed) const = 0;
    virtual PublicKey derive_public(const SecretKey& sk) const = 0;
    /// Throws CryptoError on a malformed secret key.
    virtual Signature sign(const SecretKey& sk, ByteView message) const = 0;
    /// Never throws; malformed inputs verify as false.
    virtual bool verify(const PublicKey& pk, ByteView message,
                        const Signature& sig) const noexcept = 0;
};

/// Ed25519 (RFC 8032). Deterministic by construction.
const SignatureScheme& ed25519();

/// The scheme used by consensus code.
const SignatureScheme& default_scheme();

KeyPair keygen(ByteView seed);
PublicKey derive_public(const SecretKey& sk);
Signature sign(const SecretKey& sk, ByteView message);
bool verify(const PublicKey& pk, ByteView message, const Signature& sig) noexcept;

/// 32-byte seed derived from a simulation seed and an index, for reproducible
/// key generation.
std::array<std::uint8_t, 32> derive_seed(std::uint64_t base_seed, std::uint64_t index);

std::string to_hex(ByteView data);
/// Lowercase or uppercase accepted; throws std::invalid_argument otherwise.
Bytes from_hex(std::string_view hex);

}  // namespace greenbtc::crypto
