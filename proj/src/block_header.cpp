#include "greenbtc/block_header.hpp"

#include <limits>

namespace greenbtc {

crypto::Bytes pack_bits(const BitVector& bits) {
    crypto::Bytes out((bits.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i]) out[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
    }
    return out;
}

BitVector unpack_bits(crypto::ByteView packed, std::size_t n_bits) {
    BitVector bits(n_bits);
    for (std::size_t i = 0; i < n_bits; ++i) {
        bits[i] = (packed[i / 8] >> (7 - i % 8)) & 1u;
    }
    return bits;
}

}  // namespace greenbtc

namespace greenbtc::chain {

void put_u16(crypto::Bytes& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32(crypto::Bytes& out, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_u64(crypto::Bytes& out, std::uint64_t v) {
    for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_bytes(crypto::Bytes& out, crypto::ByteView v) { out.insert(out.end(), v.begin(), v.end()); }

void ByteReader::need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw ParseError("unexpected end of input");
}

std::uint8_t ByteReader::u8() {
    need(1);
    return data_[pos_++];
}

std::uint16_t ByteReader::u16() {
    need(2);
    const std::uint16_t v = static_cast<std::uint16_t>((data_[pos_] << 8) | data_[pos_ + 1]);
    pos_ += 2;
    return v;
}

std::uint32_t ByteReader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_++];
    return v;
}

std::uint64_t ByteReader::u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | data_[pos_++];
    return v;
}

crypto::Digest256 ByteReader::digest() {
    need(32);
    crypto::Digest256 d;
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(pos_), 32, d.bytes.begin());
    pos_ += 32;
    return d;
}

crypto::Bytes ByteReader::bytes(std::size_t n) {
    need(n);
    crypto::Bytes out(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
                      data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return out;
}

namespace {

void put_signature(crypto::Bytes& out, const crypto::Signature& sig) {
    if (sig.bytes.size() > std::numeric_limits<std::uint16_t>::max()) {
        throw std::length_error("signature longer than 65535 bytes");
    }
    put_u16(out, static_cast<std::uint16_t>(sig.bytes.size()));
    put_bytes(out, sig.bytes);
}

crypto::Signature read_signature(ByteReader& r) {
    const std::uint16_t len = r.u16();
    return crypto::Signature{r.bytes(len)};
}

}  // namespace

crypto::Bytes serialize_header(const BlockHeader& h, bool include_poc) {
    crypto::Bytes out;
    out.reserve(256 + h.vct_proof.bytes.size() + h.poc_signature.bytes.size() +
                h.poc_codeword.size() / 8);
    put_u32(out, h.version);
    put_bytes(out, h.prev_hash.view());
    put_bytes(out, h.merkle_root.view());
    put_u64(out, h.timestamp);
    put_u32(out, h.level);
    put_u64(out, h.nonce);
    put_bytes(out, h.coinbase_pubkey_hash.view());
    put_bytes(out, h.vct_value.view());
    put_signature(out, h.vct_proof);
    if (include_poc) {
        put_signature(out, h.poc_signature);
        put_u32(out, static_cast<std::uint32_t>(h.poc_codeword.size()));
        put_bytes(out, pack_bits(h.poc_codeword));
    }
    return out;
}

BlockHeader parse_header(crypto::ByteView bytes, bool include_poc) {
    ByteReader r(bytes);
    BlockHeader h;
    h.version = r.u32();
    h.prev_hash = r.digest();
    h.merkle_root = r.digest();
    h.timestamp = r.u64();
    h.level = r.u32();
    h.nonce = r.u64();
    h.coinbase_pubkey_hash = r.digest();
    h.vct_value = r.digest();
    h.vct_proof = read_signature(r);
    if (include_poc) {
        h.poc_signature = read_signature(r);
        const std::uint32_t n_bits = r.u32();
        const crypto::Bytes packed = r.bytes((static_cast<std::size_t>(n_bits) + 7) / 8);
        h.poc_codeword = unpack_bits(packed, n_bits);
        if (pack_bits(h.poc_codeword) != packed) throw ParseError("nonzero codeword padding bits");
    }
    if (!r.done()) throw ParseError("trailing bytes after header");
    return h;
}

crypto::Digest256 header_hash(const BlockHeader& h) {
    return crypto::hash(serialize_header(h, true));
}

}  // namespace greenbtc::chain
