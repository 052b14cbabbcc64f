#include "greenbtc/chain.hpp"

#include "greenbtc/eccpow.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace greenbtc::chain {

crypto::Bytes serialize_transaction(const Transaction& tx) {
    crypto::Bytes out;
    out.reserve(12 + tx.payload.size());
    put_u64(out, tx.value);
    put_u32(out, static_cast<std::uint32_t>(tx.payload.size()));
    put_bytes(out, tx.payload);
    return out;
}

Transaction parse_transaction(crypto::ByteView bytes) {
    ByteReader r(bytes);
    Transaction tx;
    tx.value = r.u64();
    tx.payload = r.bytes(r.u32());
    if (!r.done()) throw ParseError("trailing bytes after transaction");
    return tx;
}

Digest256 transaction_id(const Transaction& tx) { return crypto::hash(serialize_transaction(tx)); }

Digest256 merkle_root(const std::vector<Transaction>& txs) {
    if (txs.empty()) return Digest256{};
    std::vector<Digest256> level;
    level.reserve(txs.size());
    for (const auto& tx : txs) level.push_back(transaction_id(tx));
    while (level.size() > 1) {
        std::vector<Digest256> next;
        next.reserve((level.size() + 1) / 2);
        for (std::size_t i = 0; i < level.size(); i += 2) {
            const Digest256& left = level[i];
            const Digest256& right = i + 1 < level.size() ? level[i + 1] : level[i];
            next.push_back(crypto::Sha256().update(left.view()).update(right.view()).finalize());
        }
        level = std::move(next);
    }
    return level.front();
}

crypto::Bytes serialize_block(const Block& b) {
    crypto::Bytes out;
    const crypto::Bytes header = serialize_header(b.header, true);
    put_u32(out, static_cast<std::uint32_t>(header.size()));
    put_bytes(out, header);
    put_u32(out, static_cast<std::uint32_t>(b.transactions.size()));
    for (const auto& tx : b.transactions) {
        const crypto::Bytes raw = serialize_transaction(tx);
        put_u32(out, static_cast<std::uint32_t>(raw.size()));
        put_bytes(out, raw);
    }
    return out;
}

Block parse_block(crypto::ByteView bytes) {
    ByteReader r(bytes);
    Block b;
    const crypto::Bytes header = r.bytes(r.u32());
    b.header = parse_header(header, true);
    const std::uint32_t count = r.u32();
    // Each transaction occupies at least 16 bytes; reject absurd counts early.
    if (count > r.remaining() / 16) throw ParseError("transaction count exceeds input");
    b.transactions.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const crypto::Bytes raw = r.bytes(r.u32());
        b.transactions.push_back(parse_transaction(raw));
    }
    if (!r.done()) throw ParseError("trailing bytes after block");
    return b;
}

std::uint64_t emission(std::uint64_t height) {
    const std::uint64_t halvings = height / kHalvingInterval;
    if (halvings >= 64) return 0;
    return (50 * kCoin) >> halvings;
}

ChainStore::ChainStore(std::shared_ptr<const Block> genesis,
                       std::shared_ptr<const difficulty::DifficultyTable> table)
    : table_(std::move(table)) {
    if (!genesis || !table_) throw std::invalid_argument("chain store needs a genesis and a table");
    ChainEntry e;
    e.header_bytes = serialize_header(genesis->header, true);
    e.hash = crypto::hash(e.header_bytes);
    e.height = 0;
    e.accumulated_work = difficulty::work(*table_, genesis->header.level);
    e.arrival_seq = next_seq_++;
    e.block = std::move(genesis);
    genesis_ = e.hash;
    tip_ = e.hash;
    children_[e.hash];
    entries_.emplace(e.hash, std::move(e));
}

const ChainEntry* ChainStore::find(const Digest256& hash) const {
    const auto it = entries_.find(hash);
    return it == entries_.end() ? nullptr : &it->second;
}

const ChainEntry& ChainStore::at(const Digest256& hash) const {
    const ChainEntry* e = find(hash);
    if (!e) throw std::out_of_range("block " + hash.hex() + " not in store");
    return *e;
}

const ChainEntry& ChainStore::insert(std::shared_ptr<const Block> block) {
    crypto::Bytes header_bytes = serialize_header(block->header, true);
    const Digest256 hash = crypto::hash(header_bytes);
    if (const ChainEntry* existing = find(hash)) return *existing;
    const ChainEntry* parent = find(block->header.prev_hash);
    if (!parent) throw std::invalid_argument("insert: parent " + block->header.prev_hash.hex() +
                                             " unknown");
    ChainEntry e;
    e.hash = hash;
    e.header_bytes = std::move(header_bytes);
    e.height = parent->height + 1;
    e.accumulated_work = parent->accumulated_work + difficulty::work(*table_, block->header.level);
    e.arrival_seq = next_seq_++;
    e.block = std::move(block);
    children_[e.block->header.prev_hash].push_back(hash);
    children_[hash];
    const auto [it, inserted] = entries_.emplace(hash, std::move(e));
    (void)inserted;
    if (it->second.accumulated_work > at(tip_).accumulated_work) tip_ = hash;
    return it->second;
}

const std::vector<Digest256>& ChainStore::children(const Digest256& hash) const {
    const auto it = children_.find(hash);
    if (it == children_.end()) throw std::out_of_range("block " + hash.hex() + " not in store");
    return it->second;
}

std::vector<Digest256> ChainStore::leaves() const {
    std::vector<Digest256> out;
    for (const auto& [hash, kids] : children_) {
        if (kids.empty()) out.push_back(hash);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<const ChainEntry*> ChainStore::entries() const {
    std::vector<const ChainEntry*> out;
    out.reserve(entries_.size());
    for (const auto& [hash, e] : entries_) out.push_back(&e);
    std::sort(out.begin(), out.end(),
              [](const ChainEntry* a, const ChainEntry* b) { return a->arrival_seq < b->arrival_seq; });
    return out;
}

std::vector<difficulty::BlockStamp> ChainStore::recent_stamps(const Digest256& hash,
                                                              std::size_t count) const {
    std::vector<difficulty::BlockStamp> out;
    const ChainEntry* e = &at(hash);
    while (e && out.size() < count) {
        out.push_back({e->block->header.timestamp, e->block->header.level});
        e = e->height == 0 ? nullptr : find(e->block->header.prev_hash);
    }
    std::reverse(out.begin(), out.end());
    return out;
}

std::vector<Digest256> ChainStore::path_from_genesis(const Digest256& hash) const {
    std::vector<Digest256> out;
    const ChainEntry* e = &at(hash);
    for (;;) {
        out.push_back(e->hash);
        if (e->height == 0) break;
        e = &at(e->block->header.prev_hash);
    }
    std::reverse(out.begin(), out.end());
    return out;
}

Digest256 fork_choice(const ChainStore& store) {
    const ChainEntry* best = nullptr;
    for (const Digest256& leaf : store.leaves()) {
        const ChainEntry& e = store.at(leaf);
        if (!best) {
            best = &e;
            continue;
        }
        if (e.accumulated_work != best->accumulated_work) {
            if (e.accumulated_work > best->accumulated_work) best = &e;
        } else if (e.arrival_seq != best->arrival_seq) {
            if (e.arrival_seq < best->arrival_seq) best = &e;
        } else if (e.hash < best->hash) {
            best = &e;
        }
    }
    return best->hash;
}

const vct::PassProbability& ConsensusParams::pass_for(const Digest256& coinbase_pubkey_hash) const {
    const auto it = weighted_pass.find(coinbase_pubkey_hash);
    return it == weighted_pass.end() ? pass_probability : it->second;
}

std::uint32_t expected_level(const ChainStore& store, const Digest256& parent_hash,
                             const ConsensusParams& params) {
    const ChainEntry& parent = store.at(parent_hash);
    const std::uint32_t parent_level = parent.block->header.level;
    if (!params.auto_difficulty || params.retarget_window == 0) return parent_level;
    const std::uint64_t height = parent.height + 1;
    if (height % params.retarget_window != 0) return parent_level;
    const auto stamps = store.recent_stamps(parent_hash, params.retarget_window + 1);
    return difficulty::difficulty_control(stamps, parent_level, params.target_interval_s,
                                          params.retarget_window, params.table->max_level());
}

std::string_view reason_code(RejectReason r) {
    switch (r) {
        case RejectReason::kUnknownParent: return "UNKNOWN_PARENT";
        case RejectReason::kBadGenesis: return "BAD_GENESIS";
        case RejectReason::kTimestampNotIncreasing: return "TIMESTAMP_NOT_INCREASING";
        case RejectReason::kTimestampTooFar: return "TIMESTAMP_TOO_FAR";
        case RejectReason::kBadLevel: return "BAD_LEVEL";
        case RejectReason::kBadCoinbase: return "BAD_COINBASE";
        case RejectReason::kVctFail: return "VCT_FAIL";
        case RejectReason::kPocFail: return "POC_FAIL";
        case RejectReason::kBadMerkle: return "BAD_MERKLE";
        case RejectReason::kOversize: return "OVERSIZE";
        case RejectReason::kBadReward: return "BAD_REWARD";
    }
    return "UNKNOWN";
}

Verdict validate_block(const Block& block, const ChainStore& store, const ConsensusParams& params,
                       std::uint64_t local_clock_s) {
    const BlockHeader& h = block.header;
    if (h.prev_hash == Digest256{}) {
        return header_hash(h) == store.genesis_hash() ? Verdict::accept()
                                                      : Verdict::rejected(RejectReason::kBadGenesis);
    }
    const ChainEntry* parent = store.find(h.prev_hash);
    if (!parent) return Verdict::rejected(RejectReason::kUnknownParent);

    if (serialize_block(block).size() > params.max_block_size) {
        return Verdict::rejected(RejectReason::kOversize);
    }
    if (merkle_root(block.transactions) != h.merkle_root) {
        return Verdict::rejected(RejectReason::kBadMerkle);
    }
    if (block.transactions.empty() ||
        crypto::hash(block.transactions.front().payload) != h.coinbase_pubkey_hash) {
        return Verdict::rejected(RejectReason::kBadCoinbase);
    }
    if (block.transactions.front().value != emission(parent->height + 1)) {
        return Verdict::rejected(RejectReason::kBadReward);
    }
    if (h.timestamp <= parent->block->header.timestamp) {
        return Verdict::rejected(RejectReason::kTimestampNotIncreasing);
    }
    if (h.timestamp > local_clock_s + params.max_future_drift_s) {
        return Verdict::rejected(RejectReason::kTimestampTooFar);
    }
    if (!params.table->contains(h.level) || h.level != expected_level(store, h.prev_hash, params)) {
        return Verdict::rejected(RejectReason::kBadLevel);
    }

    const crypto::PublicKey coinbase_pk{block.transactions.front().payload};
    const vct::VrfOutput toss{h.vct_proof, h.vct_value};
    if (!vct::vct_verify(coinbase_pk, parent->header_bytes, toss,
                         params.pass_for(h.coinbase_pubkey_hash))) {
        return Verdict::rejected(RejectReason::kVctFail);
    }
    if (params.check_poc &&
        !eccpow::verify_poc(h, coinbase_pk, eccpow::proof_from_header(h),
                            params.table->at(h.level).params)) {
        return Verdict::rejected(RejectReason::kPocFail);
    }
    return Verdict::accept();
}

Block make_genesis(std::uint32_t level, std::uint64_t timestamp, std::string_view tag) {
    Block b;
    Transaction coinbase;
    coinbase.payload.assign(tag.begin(), tag.end());
    b.transactions.push_back(std::move(coinbase));
    b.header.level = level;
    b.header.timestamp = timestamp;
    b.header.merkle_root = merkle_root(b.transactions);
    b.header.coinbase_pubkey_hash = crypto::hash(b.transactions.front().payload);
    return b;
}

std::string export_chain(const std::vector<std::shared_ptr<const Block>>& blocks) {
    std::string out;
    for (const auto& b : blocks) {
        out += crypto::to_hex(serialize_block(*b));
        out += '\n';
    }
    return out;
}

std::vector<Block> import_chain(std::string_view text) {
    std::vector<Block> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) {
            try {
                out.push_back(parse_block(crypto::from_hex(line)));
            } catch (const std::invalid_argument& e) {
                throw ParseError(std::string("chain import: ") + e.what());
            }
        }
        pos = end + 1;
    }
    return out;
}

}  // namespace greenbtc::chain
