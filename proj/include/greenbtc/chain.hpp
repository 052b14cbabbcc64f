#pragma once

// Blocks, full validation and energy-weighted fork choice.

#include "greenbtc/block_header.hpp"
#include "greenbtc/difficulty.hpp"
#include "greenbtc/vct.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace greenbtc::chain {

using crypto::Digest256;

inline constexpr std::uint64_t kCoin = 100'000'000;
inline constexpr std::size_t kMaxBlockSize = 1'000'000;
inline constexpr std::uint64_t kMaxFutureDriftS = 7200;
inline constexpr std::uint64_t kHalvingInterval = 210'000;

/// Opaque value-carrying record. The first transaction of a block is the
/// coinbase: its payload is the miner's public key and its value the reward.
struct Transaction {
    std::uint64_t value = 0;
    crypto::Bytes payload;
    bool operator==(const Transaction&) const = default;
};

crypto::Bytes serialize_transaction(const Transaction& tx);
Transaction parse_transaction(crypto::ByteView bytes);
Digest256 transaction_id(const Transaction& tx);

/// Pairwise SHA-256 tree over transaction ids; an odd last node is paired
/// with itself. The root of an empty list is the zero digest.
Digest256 merkle_root(const std::vector<Transaction>& txs);

struct Block {
    BlockHeader header;
    std::vector<Transaction> transactions;
    bool operator==(const Block&) const = default;
};

crypto::Bytes serialize_block(const Block& b);
Block parse_block(crypto::ByteView bytes);

/// Block subsidy in base units: 50 coins halving every 210,000 blocks.
std::uint64_t emission(std::uint64_t height);

struct ChainEntry {
    std::shared_ptr<const Block> block;
    Digest256 hash;
    crypto::Bytes header_bytes;  ///< serialize_header(header, true)
    std::uint64_t height = 0;
    std::uint64_t accumulated_work = 0;
    std::uint64_t arrival_seq = 0;
};

/// Block tree rooted at a genesis block. Not internally synchronized: one
/// writer at a time.
class ChainStore {
public:
    ChainStore(std::shared_ptr<const Block> genesis,
               std::shared_ptr<const difficulty::DifficultyTable> table);

    bool contains(const Digest256& hash) const { return entries_.count(hash) != 0; }
    /// nullptr when absent.
    const ChainEntry* find(const Digest256& hash) const;
    /// Throws std::out_of_range when absent.
    const ChainEntry& at(const Digest256& hash) const;

    const Digest256& genesis_hash() const { return genesis_; }
    const Digest256& tip() const { return tip_; }
    const ChainEntry& tip_entry() const { return at(tip_); }
    std::size_t size() const { return entries_.size(); }

    /// Adds a block whose parent is present. Returns the stored entry; a
    /// block already present is returned unchanged. Throws
    /// std::invalid_argument when the parent is unknown. The tip moves only
    /// when the new leaf carries strictly more accumulated work.
    const ChainEntry& insert(std::shared_ptr<const Block> block);

    const std::vector<Digest256>& children(const Digest256& hash) const;
    std::vector<Digest256> leaves() const;
    std::vector<const ChainEntry*> entries() const;

    /// Stamps of up to `count` blocks ending at `hash`, oldest first.
    std::vector<difficulty::BlockStamp> recent_stamps(const Digest256& hash,
                                                      std::size_t count) const;
    /// Hashes from genesis to `hash` inclusive.
    std::vector<Digest256> path_from_genesis(const Digest256& hash) const;

    const difficulty::DifficultyTable& table() const { return *table_; }

private:
    struct DigestHasher {
        std::size_t operator()(const Digest256& d) const noexcept {
            std::size_t h = 0;
            for (int i = 0; i < 8; ++i) h = (h << 8) | d.bytes[i];
            return h;
        }
    };

    std::shared_ptr<const difficulty::DifficultyTable> table_;
    std::unordered_map<Digest256, ChainEntry, DigestHasher> entries_;
    std::unordered_map<Digest256, std::vector<Digest256>, DigestHasher> children_;
    Digest256 genesis_;
    Digest256 tip_;
    std::uint64_t next_seq_ = 0;
};

/// Leaf with maximal accumulated work; ties go to the earliest arrival, then
/// to the lexicographically smaller hash. Recomputed from scratch.
Digest256 fork_choice(const ChainStore& store);

struct ConsensusParams {
    std::shared_ptr<const difficulty::DifficultyTable> table;
    vct::PassProbability pass_probability = vct::PassProbability::one();
    /// Per-miner pass probability keyed by coinbase public-key hash; miners
    /// not listed use pass_probability.
    std::map<Digest256, vct::PassProbability> weighted_pass;
    double target_interval_s = 600.0;
    bool auto_difficulty = false;
    /// Retarget happens at heights that are multiples of this window.
    std::uint32_t retarget_window = 24;
    /// When false the PoC section is not checked (abstract mining).
    bool check_poc = true;
    std::uint64_t max_future_drift_s = kMaxFutureDriftS;
    std::size_t max_block_size = kMaxBlockSize;

    const vct::PassProbability& pass_for(const Digest256& coinbase_pubkey_hash) const;
};

/// Level required for a child of `parent_hash`.
std::uint32_t expected_level(const ChainStore& store, const Digest256& parent_hash,
                             const ConsensusParams& params);

enum class RejectReason {
    kUnknownParent,
    kBadGenesis,
    kTimestampNotIncreasing,
    kTimestampTooFar,
    kBadLevel,
    kBadCoinbase,
    kVctFail,
    kPocFail,
    kBadMerkle,
    kOversize,
    kBadReward,
};

std::string_view reason_code(RejectReason r);

struct Verdict {
    std::optional<RejectReason> reject;
    bool accepted() const { return !reject.has_value(); }
    static Verdict accept() { return {}; }
    static Verdict rejected(RejectReason r) { return {r}; }
};

/// Full block check against its ancestors. The genesis of `store` is
/// accepted by definition. Deterministic in (block, ancestors, params, clock).
Verdict validate_block(const Block& block, const ChainStore& store, const ConsensusParams& params,
                       std::uint64_t local_clock_s);

/// Genesis block with a single zero-value coinbase.
Block make_genesis(std::uint32_t level, std::uint64_t timestamp, std::string_view tag);

/// One line per block, lowercase hex of serialize_block, genesis first.
std::string export_chain(const std::vector<std::shared_ptr<const Block>>& blocks);
/// Inverse of export_chain. Blank lines are skipped. Throws ParseError.
std::vector<Block> import_chain(std::string_view text);

}  // namespace greenbtc::chain
