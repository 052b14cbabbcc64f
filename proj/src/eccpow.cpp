#include "greenbtc/eccpow.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace greenbtc::eccpow {

namespace {

/// Counter-mode byte stream over SHA-256 keyed by a digest.
class HashStream {
public:
    explicit HashStream(const Digest256& key) : key_(key) {}

    std::uint32_t next_u32() {
        if (pos_ + 4 > block_.bytes.size() || !filled_) refill();
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | block_.bytes[pos_++];
        return v;
    }

    /// Uniform in [0, bound) by rejection.
    std::uint32_t below(std::uint32_t bound) {
        const std::uint64_t range = std::uint64_t{1} << 32;
        const std::uint64_t limit = range - range % bound;
        for (;;) {
            const std::uint32_t x = next_u32();
            if (x < limit) return x % bound;
        }
    }

private:
    void refill() {
        block_ = crypto::Sha256().update(key_.view()).update_u32_be(counter_++).finalize();
        pos_ = 0;
        filled_ = true;
    }

    Digest256 key_;
    Digest256 block_;
    std::uint32_t counter_ = 0;
    std::size_t pos_ = 0;
    bool filled_ = false;
};

}  // namespace

void CodeParams::validate() const {
    auto fail = [](const std::string& what) {
        throw std::invalid_argument("code params: " + what);
    };
    if (n == 0) fail("n must be positive");
    if (wc < 2) fail("wc must be at least 2");
    if (wr <= wc) fail("wr must exceed wc");
    if ((static_cast<std::uint64_t>(n) * wc) % wr != 0) fail("n*wc must be divisible by wr");
    if (n % wr != 0) fail("n must be divisible by wr for the banded construction");
    if (rows() < 1) fail("matrix must have at least one row");
    if (max_iter < 1) fail("max_iter must be at least 1");
}

ParityCheckMatrix::ParityCheckMatrix(const Digest256& seed, const CodeParams& params,
                                     std::vector<std::uint32_t> row_support)
    : seed_(seed), params_(params), row_support_(std::move(row_support)) {
    params_.validate();
    const std::uint32_t m = params_.rows();
    if (row_support_.size() != static_cast<std::size_t>(m) * params_.wr) {
        throw std::invalid_argument("parity-check support has the wrong size");
    }
    std::vector<std::uint32_t> fill(params_.n, 0);
    col_support_.assign(static_cast<std::size_t>(params_.n) * params_.wc, 0);
    for (std::uint32_t r = 0; r < m; ++r) {
        auto first = row_support_.begin() + static_cast<std::ptrdiff_t>(r) * params_.wr;
        std::sort(first, first + params_.wr);
        for (auto it = first; it != first + params_.wr; ++it) {
            const std::uint32_t c = *it;
            if (c >= params_.n || fill[c] == params_.wc) {
                throw std::invalid_argument("parity-check support is not (wc, wr)-regular");
            }
            col_support_[static_cast<std::size_t>(c) * params_.wc + fill[c]++] = r;
        }
    }
}

bool ParityCheckMatrix::at(std::uint32_t row, std::uint32_t col) const {
    if (row >= rows()) throw std::out_of_range("parity-check row out of range");
    const auto s = row_support(row);
    return std::binary_search(s.begin(), s.end(), col);
}

BitVector ParityCheckMatrix::syndrome(const BitVector& word) const {
    if (word.size() != params_.n) {
        throw std::invalid_argument("syndrome: word length " + std::to_string(word.size()) +
                                    " != n " + std::to_string(params_.n));
    }
    const std::uint32_t m = rows();
    BitVector s(m, 0);
    for (std::uint32_t r = 0; r < m; ++r) {
        std::uint8_t acc = 0;
        for (std::uint32_t c : row_support(r)) acc ^= word[c];
        s[r] = acc;
    }
    return s;
}

bool ParityCheckMatrix::is_codeword(const BitVector& word) const {
    if (word.size() != params_.n) return false;
    const BitVector s = syndrome(word);
    return std::none_of(s.begin(), s.end(), [](std::uint8_t b) { return b != 0; });
}

ParityCheckMatrix gen_matrix(const Digest256& seed, const CodeParams& params) {
    params.validate();
    const std::uint32_t band_rows = params.n / params.wr;
    std::vector<std::uint32_t> rows;
    rows.reserve(static_cast<std::size_t>(params.rows()) * params.wr);

    std::vector<std::uint32_t> perm(params.n);
    for (std::uint32_t band = 0; band < params.wc; ++band) {
        std::iota(perm.begin(), perm.end(), 0u);
        if (band > 0) {
            HashStream stream(crypto::Sha256().update(seed.view()).update_u32_be(band).finalize());
            for (std::uint32_t i = params.n - 1; i > 0; --i) {
                std::swap(perm[i], perm[stream.below(i + 1)]);
            }
        }
        rows.insert(rows.end(), perm.begin(), perm.begin() + band_rows * params.wr);
    }
    return ParityCheckMatrix(seed, params, std::move(rows));
}

BitVector expand_hash(const Digest256& out, std::size_t n) {
    BitVector bits(n);
    std::uint32_t counter = 0;
    for (std::size_t base = 0; base < n; base += 256) {
        const Digest256 block = crypto::Sha256().update(out.view()).update_u32_be(counter++).finalize();
        const std::size_t take = std::min<std::size_t>(256, n - base);
        for (std::size_t i = 0; i < take; ++i) {
            bits[base + i] = (block.bytes[i / 8] >> (7 - i % 8)) & 1u;
        }
    }
    return bits;
}

DecoderResult decode(const ParityCheckMatrix& h, const BitVector& received,
                     std::uint32_t max_iter) {
    const std::uint32_t n = h.cols();
    if (received.size() != n) {
        throw std::invalid_argument("decode: received word has length " +
                                    std::to_string(received.size()) + ", expected " +
                                    std::to_string(n));
    }
    DecoderResult res;
    res.word = received;
    BitVector syn = h.syndrome(res.word);
    std::uint32_t unsatisfied =
        static_cast<std::uint32_t>(std::count(syn.begin(), syn.end(), std::uint8_t{1}));
    const std::uint32_t wc = h.params().wc;

    std::vector<std::uint32_t> flips;
    flips.reserve(n);
    for (std::uint32_t it = 0;; ++it) {
        if (unsatisfied == 0) {
            res.converged = true;
            res.iterations = it;
            return res;
        }
        if (it == max_iter) break;

        flips.clear();
        for (std::uint32_t v = 0; v < n; ++v) {
            std::uint32_t count = 0;
            for (std::uint32_t c : h.col_support(v)) count += syn[c];
            if (2 * count > wc) flips.push_back(v);
        }
        // No bit qualifies: the word is a fixed point and the remaining
        // iterations cannot change it.
        if (flips.empty()) break;

        for (std::uint32_t v : flips) {
            res.word[v] ^= 1u;
            for (std::uint32_t c : h.col_support(v)) {
                syn[c] ^= 1u;
                if (syn[c]) {
                    ++unsatisfied;
                } else {
                    --unsatisfied;
                }
            }
        }
    }
    res.converged = false;
    res.iterations = max_iter;
    return res;
}

void attach_proof(chain::BlockHeader& header, const PocProof& proof) {
    header.nonce = proof.nonce;
    header.poc_signature = proof.header_signature;
    header.poc_codeword = proof.codeword;
}

PocProof proof_from_header(const chain::BlockHeader& header) {
    return PocProof{header.nonce, header.poc_signature, header.poc_codeword};
}

std::optional<PocProof> solve_with(const ParityCheckMatrix& h,
                                   const chain::BlockHeader& header_template,
                                   const crypto::SecretKey& sk, std::uint64_t nonce_start,
                                   std::uint64_t nonce_limit, SolveStats* stats) {
    chain::BlockHeader work = header_template;
    const CodeParams& params = h.params();
    for (std::uint64_t nonce = nonce_start; nonce < nonce_limit; ++nonce) {
        work.nonce = nonce;
        crypto::Signature sig = crypto::sign(sk, chain::serialize_header(work, false));
        const Digest256 out = crypto::hash(sig.bytes);
        DecoderResult d = decode(h, expand_hash(out, params.n), params.max_iter);
        if (stats) {
            ++stats->attempts;
            stats->decode_iterations += d.iterations;
        }
        if (d.converged) {
            return PocProof{nonce, std::move(sig), std::move(d.word)};
        }
    }
    return std::nullopt;
}

std::optional<PocProof> solve(const chain::BlockHeader& header_template,
                              const crypto::SecretKey& sk, const CodeParams& params,
                              std::uint64_t nonce_start, std::uint64_t nonce_limit,
                              SolveStats* stats) {
    if (nonce_start >= nonce_limit) return std::nullopt;
    const ParityCheckMatrix h = gen_matrix(header_template.prev_hash, params);
    return solve_with(h, header_template, sk, nonce_start, nonce_limit, stats);
}

bool verify_poc_with(const ParityCheckMatrix& h, const chain::BlockHeader& header,
                     const crypto::PublicKey& coinbase_pk, const PocProof& proof) noexcept {
    try {
        const CodeParams& params = h.params();
        if (proof.codeword.size() != params.n) return false;
        // (b) the deterministic decoder reproduces exactly this codeword
        const Digest256 out = crypto::hash(proof.header_signature.bytes);
        const DecoderResult d = decode(h, expand_hash(out, params.n), params.max_iter);
        if (!d.converged || d.word != proof.codeword) return false;
        // (c) the codeword satisfies every parity check
        if (!h.is_codeword(proof.codeword)) return false;
        // (a) the signature covers this header with this nonce
        chain::BlockHeader preimage = header;
        preimage.nonce = proof.nonce;
        return crypto::verify(coinbase_pk, chain::serialize_header(preimage, false),
                              proof.header_signature);
    } catch (...) {
        return false;
    }
}

bool verify_poc(const chain::BlockHeader& header, const crypto::PublicKey& coinbase_pk,
                const PocProof& proof, const CodeParams& params) noexcept {
    try {
        const ParityCheckMatrix h = gen_matrix(header.prev_hash, params);
        return verify_poc_with(h, header, coinbase_pk, proof);
    } catch (...) {
        return false;
    }
}

SolveProbability estimate_solve_prob(const CodeParams& params, std::uint64_t samples,
                                     std::uint64_t rng_seed) {
    if (samples == 0) throw std::invalid_argument("estimate_solve_prob: samples must be >= 1");
    params.validate();
    std::mt19937_64 rng(rng_seed);
    auto random_digest = [&rng] {
        Digest256 d;
        for (std::size_t i = 0; i < 32; i += 8) {
            const std::uint64_t w = rng();
            for (std::size_t j = 0; j < 8; ++j) d.bytes[i + j] = static_cast<std::uint8_t>(w >> (8 * j));
        }
        return d;
    };
    SolveProbability res;
    res.samples = samples;
    for (std::uint64_t s = 0; s < samples; ++s) {
        const Digest256 seed = random_digest();
        const Digest256 out = random_digest();
        const ParityCheckMatrix h = gen_matrix(seed, params);
        if (decode(h, expand_hash(out, params.n), params.max_iter).converged) ++res.successes;
    }
    res.p = static_cast<double>(res.successes) / static_cast<double>(samples);
    res.std_err = std::sqrt(res.p * (1.0 - res.p) / static_cast<double>(samples));
    return res;
}

}  // namespace greenbtc::eccpow
