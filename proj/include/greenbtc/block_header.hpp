#pragma once

// Block header and its canonical byte encoding.
//
// Layout (all integers big-endian):
//   version u32 | prev_hash 32 | merkle_root 32 | timestamp u64 | level u32 |
//   nonce u64 | coinbase_pubkey_hash 32 | vct_value 32 |
//   vct_proof (u16 length + bytes)
// and, when the PoC section is included:
//   poc_signature (u16 length + bytes) | poc_codeword (u32 bit count + packed bits, MSB first)
//
// The encoding without the PoC section is the message signed by the
// coinbase key while mining. The full encoding is what gets hashed into the
// block id and what the next block's coin toss consumes.

#include "greenbtc/crypto.hpp"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace greenbtc {

/// One bit per element, each 0 or 1.
using BitVector = std::vector<std::uint8_t>;

crypto::Bytes pack_bits(const BitVector& bits);
BitVector unpack_bits(crypto::ByteView packed, std::size_t n_bits);

}  // namespace greenbtc

namespace greenbtc::chain {

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BlockHeader {
    std::uint32_t version = 1;
    crypto::Digest256 prev_hash;
    crypto::Digest256 merkle_root;
    std::uint64_t timestamp = 0;
    std::uint32_t level = 0;
    std::uint64_t nonce = 0;
    crypto::Digest256 coinbase_pubkey_hash;
    crypto::Digest256 vct_value;
    crypto::Signature vct_proof;
    crypto::Signature poc_signature;
    BitVector poc_codeword;

    bool operator==(const BlockHeader&) const = default;
};

crypto::Bytes serialize_header(const BlockHeader& h, bool include_poc);

/// Inverse of serialize_header. Throws ParseError on truncated input,
/// trailing bytes or non-binary padding.
BlockHeader parse_header(crypto::ByteView bytes, bool include_poc = true);

/// hash(serialize_header(h, true)).
crypto::Digest256 header_hash(const BlockHeader& h);

/// Cursor-based reader used by header and block parsing.
class ByteReader {
public:
    explicit ByteReader(crypto::ByteView data) : data_(data) {}

    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    crypto::Digest256 digest();
    crypto::Bytes bytes(std::size_t n);
    bool done() const { return pos_ == data_.size(); }
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    void need(std::size_t n) const;

    crypto::ByteView data_;
    std::size_t pos_ = 0;
};

void put_u16(crypto::Bytes& out, std::uint16_t v);
void put_u32(crypto::Bytes& out, std::uint32_t v);
void put_u64(crypto::Bytes& out, std::uint64_t v);
void put_bytes(crypto::Bytes& out, crypto::ByteView v);

}  // namespace greenbtc::chain
