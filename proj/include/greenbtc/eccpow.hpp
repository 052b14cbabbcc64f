#pragma once

// Error-correction-code proof of computation.
//
// A puzzle instance is a Gallager (wc, wr)-regular LDPC parity-check matrix
// regenerated from the previous block hash. Mining signs the header with the
// coinbase key, hashes the signature, expands the hash into an n-bit word
// and runs a hard-decision bit-flipping decoder on it. An attempt succeeds
// when the decoder converges to a codeword.

#include "greenbtc/block_header.hpp"
#include "greenbtc/crypto.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace greenbtc::eccpow {

using crypto::Digest256;

struct CodeParams {
    std::uint32_t n = 0;         ///< codeword length in bits
    std::uint32_t wc = 0;        ///< column weight
    std::uint32_t wr = 0;        ///< row weight
    std::uint32_t max_iter = 0;  ///< decoder iteration cap

    /// m = n * wc / wr.
    std::uint32_t rows() const { return n * wc / wr; }

    /// Throws std::invalid_argument describing the first violated constraint.
    void validate() const;

    bool operator==(const CodeParams&) const = default;
};

class ParityCheckMatrix {
public:
    /// `row_support` holds rows() * wr column indices, row after row.
    ParityCheckMatrix(const Digest256& seed, const CodeParams& params,
                      std::vector<std::uint32_t> row_support);

    const CodeParams& params() const { return params_; }
    const Digest256& seed() const { return seed_; }
    std::uint32_t rows() const { return params_.rows(); }
    std::uint32_t cols() const { return params_.n; }

    /// Column indices of the ones in `row`, ascending.
    std::span<const std::uint32_t> row_support(std::uint32_t row) const {
        return {row_support_.data() + static_cast<std::size_t>(row) * params_.wr, params_.wr};
    }
    /// Row indices of the ones in `col`, ascending.
    std::span<const std::uint32_t> col_support(std::uint32_t col) const {
        return {col_support_.data() + static_cast<std::size_t>(col) * params_.wc, params_.wc};
    }

    bool at(std::uint32_t row, std::uint32_t col) const;
    /// H * word mod 2. Throws std::invalid_argument on a length mismatch.
    BitVector syndrome(const BitVector& word) const;
    bool is_codeword(const BitVector& word) const;

    bool operator==(const ParityCheckMatrix& o) const {
        return params_ == o.params_ && seed_ == o.seed_ && row_support_ == o.row_support_;
    }

private:
    Digest256 seed_;
    CodeParams params_;
    std::vector<std::uint32_t> row_support_;
    std::vector<std::uint32_t> col_support_;
};

/// Gallager construction: wc bands of n/wr rows. Band 0 puts wr consecutive
/// ones in each row; band b > 0 is a column permutation of band 0 drawn by a
/// Fisher-Yates shuffle over the stream hash(hash(seed || b) || counter).
ParityCheckMatrix gen_matrix(const Digest256& seed, const CodeParams& params);

/// hash(out || 0) || hash(out || 1) || ... truncated to n bits, MSB first;
/// the counter is a 4-byte big-endian integer.
BitVector expand_hash(const Digest256& out, std::size_t n);

struct DecoderResult {
    bool converged = false;
    BitVector word;
    std::uint32_t iterations = 0;
};

/// Gallager-B bit flipping: each iteration flips every bit with more than
/// wc/2 unsatisfied checks. Stops on a zero syndrome or after max_iter
/// iterations. A non-converged result always reports max_iter iterations.
DecoderResult decode(const ParityCheckMatrix& h, const BitVector& received,
                     std::uint32_t max_iter);

struct PocProof {
    std::uint64_t nonce = 0;
    crypto::Signature header_signature;
    BitVector codeword;
    bool operator==(const PocProof&) const = default;
};

/// Copies the proof into the header's nonce and PoC fields.
void attach_proof(chain::BlockHeader& header, const PocProof& proof);
PocProof proof_from_header(const chain::BlockHeader& header);

struct SolveStats {
    std::uint64_t attempts = 0;
    std::uint64_t decode_iterations = 0;
};

/// Tries nonces in [nonce_start, nonce_limit). The puzzle matrix is
/// gen_matrix(header_template.prev_hash, params). Returns the first proof
/// found, or nullopt when the range is exhausted.
std::optional<PocProof> solve(const chain::BlockHeader& header_template,
                              const crypto::SecretKey& sk, const CodeParams& params,
                              std::uint64_t nonce_start, std::uint64_t nonce_limit,
                              SolveStats* stats = nullptr);

/// Same as solve() but reuses an already generated matrix.
std::optional<PocProof> solve_with(const ParityCheckMatrix& h,
                                   const chain::BlockHeader& header_template,
                                   const crypto::SecretKey& sk, std::uint64_t nonce_start,
                                   std::uint64_t nonce_limit, SolveStats* stats = nullptr);

/// All of: the signature verifies under the coinbase key over the header
/// preimage with proof.nonce; re-running the decoder on the expanded
/// signature hash converges to exactly proof.codeword; and the codeword is in
/// the kernel of H. Never throws.
bool verify_poc(const chain::BlockHeader& header, const crypto::PublicKey& coinbase_pk,
                const PocProof& proof, const CodeParams& params) noexcept;

bool verify_poc_with(const ParityCheckMatrix& h, const chain::BlockHeader& header,
                     const crypto::PublicKey& coinbase_pk, const PocProof& proof) noexcept;

struct SolveProbability {
    double p = 0.0;
    double std_err = 0.0;
    std::uint64_t samples = 0;
    std::uint64_t successes = 0;
};

/// Monte Carlo over uniformly random (matrix seed, OUT) pairs drawn from a
/// generator seeded with `rng_seed`. Throws std::invalid_argument if samples == 0.
SolveProbability estimate_solve_prob(const CodeParams& params, std::uint64_t samples,
                                     std::uint64_t rng_seed);

}  // namespace greenbtc::eccpow
