#include "greenbtc/crypto.hpp"

#include <sodium.h>

#include <cstring>

namespace greenbtc::crypto {

namespace {

void ensure_sodium() {
    static const bool ready = [] {
        if (sodium_init() < 0) {
            throw CryptoError("libsodium initialisation failed");
        }
        return true;
    }();
    (void)ready;
}

crypto_hash_sha256_state* as_state(std::array<std::uint8_t, 128>& raw) {
    static_assert(sizeof(crypto_hash_sha256_state) <= 128);
    return reinterpret_cast<crypto_hash_sha256_state*>(raw.data());
}

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

class Ed25519Scheme final : public SignatureScheme {
public:
    std::string_view name() const override { return "ed25519"; }
    std::size_t seed_size() const override { return crypto_sign_SEEDBYTES; }

    KeyPair keygen(ByteView seed) const override {
        ensure_sodium();
        if (seed.size() != crypto_sign_SEEDBYTES) {
            throw CryptoError("keygen: seed must be 32 bytes, got " +
                              std::to_string(seed.size()));
        }
        KeyPair kp;
        kp.public_key.bytes.resize(crypto_sign_PUBLICKEYBYTES);
        kp.secret_key.bytes.resize(crypto_sign_SECRETKEYBYTES);
        crypto_sign_seed_keypair(kp.public_key.bytes.data(), kp.secret_key.bytes.data(),
                                 seed.data());
        return kp;
    }

    PublicKey derive_public(const SecretKey& sk) const override {
        ensure_sodium();
        if (sk.bytes.size() != crypto_sign_SECRETKEYBYTES) {
            throw CryptoError("derive_public: malformed secret key");
        }
        // The first half of a libsodium secret key is the seed.
        return keygen(ByteView(sk.bytes.data(), crypto_sign_SEEDBYTES)).public_key;
    }

    Signature sign(const SecretKey& sk, ByteView message) const override {
        ensure_sodium();
        if (sk.bytes.size() != crypto_sign_SECRETKEYBYTES) {
            throw CryptoError("sign: malformed secret key");
        }
        Signature sig;
        sig.bytes.resize(crypto_sign_BYTES);
        crypto_sign_detached(sig.bytes.data(), nullptr, message.data(), message.size(),
                             sk.bytes.data());
        return sig;
    }

    bool verify(const PublicKey& pk, ByteView message,
                const Signature& sig) const noexcept override {
        if (pk.bytes.size() != crypto_sign_PUBLICKEYBYTES ||
            sig.bytes.size() != crypto_sign_BYTES) {
            return false;
        }
        try {
            ensure_sodium();
        } catch (...) {
            return false;
        }
        return crypto_sign_verify_detached(sig.bytes.data(), message.data(), message.size(),
                                           pk.bytes.data()) == 0;
    }
};

}  // namespace

std::string Digest256::hex() const { return to_hex(bytes); }

Digest256 Digest256::from_hex(std::string_view hex) {
    Bytes raw = crypto::from_hex(hex);
    if (raw.size() != 32) {
        throw std::invalid_argument("digest hex must encode 32 bytes");
    }
    Digest256 d;
    std::memcpy(d.bytes.data(), raw.data(), 32);
    return d;
}

Sha256::Sha256() {
    ensure_sodium();
    crypto_hash_sha256_init(as_state(state_));
}

Sha256& Sha256::update(ByteView data) {
    crypto_hash_sha256_update(as_state(state_), data.data(), data.size());
    return *this;
}

Sha256& Sha256::update_u32_be(std::uint32_t v) {
    const std::uint8_t be[4] = {static_cast<std::uint8_t>(v >> 24),
                                static_cast<std::uint8_t>(v >> 16),
                                static_cast<std::uint8_t>(v >> 8),
                                static_cast<std::uint8_t>(v)};
    return update(be);
}

Digest256 Sha256::finalize() {
    Digest256 d;
    crypto_hash_sha256_final(as_state(state_), d.bytes.data());
    return d;
}

Digest256 hash(ByteView data) {
    ensure_sodium();
    Digest256 d;
    crypto_hash_sha256(d.bytes.data(), data.data(), data.size());
    return d;
}

const SignatureScheme& ed25519() {
    static const Ed25519Scheme scheme;
    return scheme;
}

const SignatureScheme& default_scheme() { return ed25519(); }

KeyPair keygen(ByteView seed) { return default_scheme().keygen(seed); }

PublicKey derive_public(const SecretKey& sk) { return default_scheme().derive_public(sk); }

Signature sign(const SecretKey& sk, ByteView message) {
    return default_scheme().sign(sk, message);
}

bool verify(const PublicKey& pk, ByteView message, const Signature& sig) noexcept {
    return default_scheme().verify(pk, message, sig);
}

std::array<std::uint8_t, 32> derive_seed(std::uint64_t base_seed, std::uint64_t index) {
    static constexpr std::string_view kTag = "greenbtc/keyseed";
    std::uint8_t buf[16];
    for (int i = 0; i < 8; ++i) {
        buf[i] = static_cast<std::uint8_t>(base_seed >> (56 - 8 * i));
        buf[8 + i] = static_cast<std::uint8_t>(index >> (56 - 8 * i));
    }
    Sha256 h;
    h.update(ByteView(reinterpret_cast<const std::uint8_t*>(kTag.data()), kTag.size()));
    h.update(buf);
    return h.finalize().bytes;
}

std::string to_hex(ByteView data) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.resize(data.size() * 2);
    for (std::size_t i = 0; i < data.size(); ++i) {
        out[2 * i] = kDigits[data[i] >> 4];
        out[2 * i + 1] = kDigits[data[i] & 0x0f];
    }
    return out;
}

Bytes from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) {
        throw std::invalid_argument("hex string has odd length");
    }
    Bytes out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const int hi = hex_value(hex[2 * i]);
        const int lo = hex_value(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) {
            throw std::invalid_argument("invalid hex digit");
        }
        out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return out;
}

}  // namespace greenbtc::crypto
