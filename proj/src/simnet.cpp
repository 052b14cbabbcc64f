#include "greenbtc/simnet.hpp"

#include "greenbtc/eccpow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <limits>
#include <queue>
#include <random>
#include <thread>
#include <unordered_map>

namespace greenbtc::simnet {

namespace {

constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
constexpr std::uint64_t kGenesisTime = 1'600'000'000;

std::string format(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
std::string format(const char* fmt, ...) {
    char buf[512];
    va_list args;
    va_start(args, fmt);
    const int n = std::vsnprintf(buf, sizeof buf, fmt, args);
    va_end(args);
    return std::string(buf, static_cast<std::size_t>(std::clamp(n, 0, static_cast<int>(sizeof buf) - 1)));
}

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t stream) : eng_(make_engine(seed, stream)) {}

    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }
    std::uint64_t poisson(double mean) {
        if (!(mean > 0.0)) return 0;
        std::poisson_distribution<std::uint64_t> d(mean);
        return d(eng_);
    }
    std::uint32_t binomial(std::uint32_t n, double p) {
        if (n == 0 || p <= 0.0) return 0;
        if (p >= 1.0) return n;
        std::binomial_distribution<std::uint32_t> d(n, p);
        return d(eng_);
    }

private:
    std::mt19937_64 eng_;
};

std::shared_ptr<const difficulty::DifficultyTable> table_ptr(const ScenarioConfig& cfg) {
    if (cfg.table) return cfg.table;
    // Non-owning handle to the static default table.
    return {std::shared_ptr<void>(), &difficulty::default_table()};
}

crypto::KeyPair node_keys(std::uint64_t seed, std::uint32_t id) {
    const auto s = crypto::derive_seed(seed, id);
    return crypto::keygen(s);
}

std::vector<vct::PassProbability> node_pass_probabilities(const ScenarioConfig& cfg) {
    std::vector<vct::PassProbability> out(cfg.node_count, cfg.pass_probability);
    if (cfg.stakes.empty()) return out;
    std::uint64_t total = 0;
    for (std::uint64_t s : cfg.stakes) total += s;
    for (std::uint32_t i = 0; i < cfg.node_count; ++i) {
        out[i] = vct::weighted_pass_probability(cfg.pass_probability, cfg.stakes[i], total,
                                                cfg.node_count);
    }
    return out;
}

enum class EventKind : std::uint8_t { kMined, kAttempt, kDeliver, kRateChange };

struct Event {
    double time;
    std::uint64_t seq;
    EventKind kind;
    std::uint32_t node;
    std::uint32_t block;
    std::uint64_t token;

    bool operator>(const Event& o) const {
        return time != o.time ? time > o.time : seq > o.seq;
    }
};

class Simulation {
public:
    Simulation(const ScenarioConfig& cfg, const RunOptions& opt)
        : cfg_(cfg), opt_(opt), rng_(cfg.seed, 1), table_(table_ptr(cfg)) {
        params_.table = table_;
        params_.pass_probability = cfg.pass_probability;
        params_.target_interval_s = cfg.target_interval_s;
        params_.auto_difficulty = cfg.auto_difficulty;
        params_.retarget_window = cfg.retarget_window;
        params_.check_poc = cfg.mode == MiningMode::kConcrete;

        auto genesis = std::make_shared<const chain::Block>(
            chain::make_genesis(cfg.level, kGenesisTime, "greenbtc-simnet"));
        store_ = std::make_unique<chain::ChainStore>(genesis, table_);
        BlockInfo g;
        g.block = genesis;
        g.entry = &store_->tip_entry();
        g.released = true;
        blocks_.push_back(std::move(g));

        const auto pps = node_pass_probabilities(cfg);
        const std::uint32_t adversaries = cfg.adversary_count();
        for (std::uint32_t i = 0; i < cfg.node_count; ++i) {
            Node n;
            n.id = i;
            n.keys = node_keys(cfg.seed, i);
            n.pk_hash = crypto::hash(n.keys.public_key.bytes);
            n.adversarial = i < adversaries;
            n.pp = pps[i];
            n.known.assign(1, 1);
            n.tip = 0;
            if (!cfg.stakes.empty()) params_.weighted_pass.emplace(n.pk_hash, n.pp);
            nodes_.push_back(std::move(n));
            if (i < adversaries) coalition_.members.push_back(i);
        }
        attacking_ = cfg.adversary.strategy == Strategy::kDoubleSpend && adversaries > 0;

        for (const auto& p : cfg.partitions) {
            std::vector<int> groups(cfg.node_count, -1);
            for (std::size_t g = 0; g < p.groups.size(); ++g) {
                for (std::uint32_t id : p.groups[g]) groups[id] = static_cast<int>(g);
            }
            partition_groups_.push_back(std::move(groups));
        }
    }

    Metrics run() {
        for (std::size_t i = 0; i < cfg_.rate_schedule.size(); ++i) {
            push(cfg_.rate_schedule[i].at_s, EventKind::kRateChange, 0, static_cast<std::uint32_t>(i), 0);
        }
        for (auto& n : nodes_) {
            if (!(attacking_ && n.adversarial)) mine_on(n, 0);
        }
        if (attacking_) begin_trial();

        while (!queue_.empty()) {
            const Event ev = queue_.top();
            if (ev.time > cfg_.duration_s) break;
            queue_.pop();
            now_ = ev.time;
            switch (ev.kind) {
                case EventKind::kMined: on_mined(nodes_[ev.node], ev.token); break;
                case EventKind::kAttempt: on_attempt(nodes_[ev.node], ev.token); break;
                case EventKind::kDeliver: receive(nodes_[ev.node], ev.block); break;
                case EventKind::kRateChange: on_rate_change(ev.block); break;
            }
        }
        now_ = cfg_.duration_s;
        for (auto& n : nodes_) stop(n);
        return collect();
    }

private:
    struct BlockInfo {
        std::shared_ptr<const chain::Block> block;
        const chain::ChainEntry* entry = nullptr;
        std::uint32_t parent = kNone;
        std::uint32_t miner = kNone;
        bool adversarial = false;
        bool released = false;
        double found_time = 0.0;
        std::uint32_t released_children = 0;
        std::uint32_t passes = 0;
        std::uint32_t adversary_passes = 0;
        std::optional<std::uint32_t> child_level;
        std::shared_ptr<const eccpow::ParityCheckMatrix> child_matrix;
    };

    struct TossRecord {
        bool pass = false;
        std::optional<vct::VrfOutput> out;
    };

    struct Node {
        std::uint32_t id = 0;
        crypto::KeyPair keys;
        crypto::Digest256 pk_hash;
        bool adversarial = false;
        vct::PassProbability pp = vct::PassProbability::one();
        std::vector<std::uint8_t> known;
        std::uint32_t tip = 0;

        std::uint32_t parent = kNone;  // parent currently tossed on
        TossRecord toss;
        bool mining = false;
        std::uint64_t token = 0;
        double since = 0.0;
        double p_hat = 0.0;
        std::uint32_t level = 0;
        std::uint64_t next_nonce = 0;

        std::unordered_map<std::uint32_t, std::vector<std::uint32_t>> orphans;
        // Adversarial nodes may return to a parent they already tossed on.
        std::unordered_map<std::uint32_t, TossRecord> past_tosses;
        EnergyCounters energy;
    };

    struct Coalition {
        std::vector<std::uint32_t> members;
        std::uint32_t fork = kNone;
        std::uint32_t private_tip = kNone;
        double start = 0.0;
    };

    void push(double t, EventKind kind, std::uint32_t node, std::uint32_t block, std::uint64_t token) {
        queue_.push(Event{t, next_seq_++, kind, node, block, token});
    }

    template <typename... Args>
    void log(const char* fmt, Args... args) {
        if (opt_.record_events) events_.push_back(format(fmt, now_, args...));
    }

    bool knows(const Node& n, std::uint32_t idx) const {
        return idx < n.known.size() && n.known[idx] != 0;
    }
    void learn(Node& n, std::uint32_t idx) {
        if (n.known.size() <= idx) n.known.resize(blocks_.size(), 0);
        n.known[idx] = 1;
    }

    std::uint64_t work(std::uint32_t idx) const { return blocks_[idx].entry->accumulated_work; }
    std::uint64_t height(std::uint32_t idx) const { return blocks_[idx].entry->height; }

    double rate() const { return cfg_.attempt_rate * rate_multiplier_; }

    std::uint32_t child_level(std::uint32_t parent) {
        auto& b = blocks_[parent];
        if (!b.child_level) b.child_level = chain::expected_level(*store_, b.entry->hash, params_);
        return *b.child_level;
    }

    const eccpow::ParityCheckMatrix& child_matrix(std::uint32_t parent) {
        auto& b = blocks_[parent];
        if (!b.child_matrix) {
            b.child_matrix = std::make_shared<const eccpow::ParityCheckMatrix>(
                eccpow::gen_matrix(b.entry->hash, table_->at(child_level(parent)).params));
        }
        return *b.child_matrix;
    }

    TossRecord toss(Node& n, std::uint32_t parent) {
        if (n.adversarial) {
            if (auto it = n.past_tosses.find(parent); it != n.past_tosses.end()) return it->second;
        }
        TossRecord r;
        ++n.energy.vct_tosses;
        if (n.pp == vct::PassProbability::one()) {
            r.pass = true;  // proof computed only if a block is found
        } else if (n.pp.numerator() != 0) {
            auto t = vct::vct_toss(n.keys.secret_key, blocks_[parent].entry->header_bytes, n.pp);
            r.pass = t.pass;
            r.out = std::move(t.out);
        }
        if (r.pass) {
            ++blocks_[parent].passes;
            if (n.adversarial) ++blocks_[parent].adversary_passes;
        }
        log("%.6f toss node=%u parent=%u pass=%d", n.id, parent, r.pass ? 1 : 0);
        if (n.adversarial) n.past_tosses.emplace(parent, r);
        return r;
    }

    void mine_on(Node& n, std::uint32_t parent) {
        if (n.parent == parent) return;
        stop(n);
        n.parent = parent;
        n.toss = toss(n, parent);
        if (!n.toss.pass) return;
        n.level = child_level(parent);
        n.p_hat = table_->at(n.level).p_hat * cfg_.solve_probability_scale;
        resume(n);
    }

    void resume(Node& n) {
        n.mining = true;
        n.since = now_;
        ++n.token;
        if (cfg_.mode == MiningMode::kAbstract) {
            push(now_ + rng_.exponential(rate() * n.p_hat), EventKind::kMined, n.id, 0, n.token);
        } else {
            push(now_ + rng_.exponential(rate()), EventKind::kAttempt, n.id, 0, n.token);
        }
    }

    void charge(Node& n, std::uint64_t attempts, std::uint64_t iterations) {
        if (attempts == 0 && iterations == 0) return;
        if (!n.toss.pass) ++gating_violations_;
        n.energy.solve_attempts += attempts;
        n.energy.decode_iterations += iterations;
        log("%.6f attempts node=%u parent=%u count=%llu", n.id, n.parent,
            static_cast<unsigned long long>(attempts));
    }

    /// Failed attempts since `since` under the current rate (abstract mode).
    std::uint64_t failures_so_far(const Node& n) {
        return rng_.poisson(rate() * (1.0 - n.p_hat) * (now_ - n.since));
    }

    void stop(Node& n) {
        if (!n.mining) return;
        if (cfg_.mode == MiningMode::kAbstract) charge(n, failures_so_far(n), 0);
        n.mining = false;
        ++n.token;
    }

    chain::Block make_template(Node& n) {
        const auto& parent = blocks_[n.parent];
        chain::Block b;
        chain::Transaction coinbase;
        coinbase.value = chain::emission(parent.entry->height + 1);
        coinbase.payload.assign(n.keys.public_key.bytes.begin(), n.keys.public_key.bytes.end());
        b.transactions.push_back(std::move(coinbase));
        auto& h = b.header;
        h.prev_hash = parent.entry->hash;
        h.merkle_root = chain::merkle_root(b.transactions);
        h.timestamp = std::max(parent.block->header.timestamp + 1, chain_clock());
        h.level = n.level;
        h.coinbase_pubkey_hash = n.pk_hash;
        if (!n.toss.out) n.toss.out = vct::vrf_eval(n.keys.secret_key, parent.entry->header_bytes);
        h.vct_value = n.toss.out->value;
        h.vct_proof = n.toss.out->proof;
        return b;
    }

    std::uint64_t chain_clock() const { return kGenesisTime + static_cast<std::uint64_t>(std::floor(now_)); }

    void on_mined(Node& n, std::uint64_t token) {
        if (!n.mining || token != n.token) return;
        charge(n, 1 + failures_so_far(n), 0);
        n.mining = false;
        ++n.token;
        publish(n, make_template(n));
    }

    void on_attempt(Node& n, std::uint64_t token) {
        if (!n.mining || token != n.token) return;
        chain::Block b = make_template(n);
        eccpow::SolveStats stats;
        const std::uint64_t nonce = n.next_nonce++;
        auto proof = eccpow::solve_with(child_matrix(n.parent), b.header, n.keys.secret_key, nonce, nonce + 1,
                                        &stats);
        charge(n, stats.attempts, stats.decode_iterations);
        if (!proof) {
            push(now_ + rng_.exponential(rate()), EventKind::kAttempt, n.id, 0, n.token);
            return;
        }
        eccpow::attach_proof(b.header, *proof);
        n.mining = false;
        ++n.token;
        publish(n, std::move(b));
    }

    void publish(Node& n, chain::Block block) {
        auto blk = std::make_shared<const chain::Block>(std::move(block));
        // Validation is deterministic in the block and its ancestors, so the
        // verdict is computed once and shared by every receiving node.
        const auto verdict = chain::validate_block(*blk, *store_, params_, chain_clock());
        if (!verdict.accepted()) {
            throw std::logic_error("simulator built an invalid block: " +
                                   std::string(chain::reason_code(*verdict.reject)));
        }
        const auto idx = static_cast<std::uint32_t>(blocks_.size());
        BlockInfo info;
        info.block = blk;
        info.entry = &store_->insert(blk);
        info.parent = n.parent;
        info.miner = n.id;
        info.adversarial = n.adversarial;
        info.found_time = now_;
        blocks_.push_back(std::move(info));
        ++blocks_produced_;
        learn(n, idx);
        log("%.6f block id=%u node=%u parent=%u height=%llu level=%u", idx, n.id, n.parent,
            static_cast<unsigned long long>(height(idx)), blocks_[idx].block->header.level);

        if (attacking_ && n.adversarial) {
            coalition_.private_tip = idx;
            for (std::uint32_t m : coalition_.members) {
                learn(nodes_[m], idx);
                mine_on(nodes_[m], idx);
            }
            check_attack();
            return;
        }
        release(idx);
        n.tip = idx;
        mine_on(n, idx);
    }

    void release(std::uint32_t idx) {
        auto& b = blocks_[idx];
        b.released = true;
        ++blocks_[b.parent].released_children;
        for (auto& m : nodes_) {
            if (m.id != b.miner) push(deliver_time(b.miner, m.id), EventKind::kDeliver, m.id, idx, 0);
        }
    }

    double latency_s(std::uint32_t from, std::uint32_t to) {
        const auto& l = cfg_.latency;
        switch (l.kind) {
            case LatencyModel::Kind::kConstant: return l.constant_ms / 1000.0;
            case LatencyModel::Kind::kUniform:
                return (l.min_ms + (l.max_ms - l.min_ms) * rng_.uniform()) / 1000.0;
            case LatencyModel::Kind::kMatrix: return l.matrix_ms[from][to] / 1000.0;
        }
        return 0.0;
    }

    double deliver_time(std::uint32_t from, std::uint32_t to) {
        double t = now_;
        for (bool held = true; held;) {
            held = false;
            for (std::size_t i = 0; i < cfg_.partitions.size(); ++i) {
                const auto& p = cfg_.partitions[i];
                if (t >= p.start_s && t < p.end_s &&
                    partition_groups_[i][from] != partition_groups_[i][to]) {
                    t = p.end_s;
                    held = true;
                }
            }
        }
        return t + latency_s(from, to);
    }

    void receive(Node& n, std::uint32_t idx) {
        if (knows(n, idx)) return;
        const std::uint32_t parent = blocks_[idx].parent;
        if (!knows(n, parent)) {
            n.orphans[parent].push_back(idx);
            return;
        }
        std::vector<std::uint32_t> work_list{idx};
        while (!work_list.empty()) {
            const std::uint32_t b = work_list.back();
            work_list.pop_back();
            if (knows(n, b)) continue;
            accept(n, b);
            if (auto it = n.orphans.find(b); it != n.orphans.end()) {
                for (std::uint32_t c : it->second) work_list.push_back(c);
                n.orphans.erase(it);
            }
        }
    }

    void accept(Node& n, std::uint32_t idx) {
        ++n.energy.verify_count;
        learn(n, idx);
        log("%.6f accept node=%u block=%u", n.id, idx);
        if (work(idx) <= work(n.tip)) return;
        n.tip = idx;
        if (attacking_ && n.adversarial) {
            check_attack();
        } else {
            mine_on(n, idx);
        }
    }

    void on_rate_change(std::uint32_t step) {
        std::vector<std::uint32_t> paused;
        for (auto& n : nodes_) {
            if (n.mining) {
                stop(n);
                paused.push_back(n.id);
            }
        }
        rate_multiplier_ = cfg_.rate_schedule[step].multiplier;
        log("%.6f rate multiplier=%.6f", rate_multiplier_);
        for (std::uint32_t id : paused) resume(nodes_[id]);
    }

    std::uint32_t coalition_public_tip() const {
        std::uint32_t best = kNone;
        for (std::uint32_t m : coalition_.members) {
            const std::uint32_t t = nodes_[m].tip;
            if (best == kNone || work(t) > work(best)) best = t;
        }
        return best;
    }

    void begin_trial() {
        coalition_.fork = coalition_public_tip();
        coalition_.private_tip = coalition_.fork;
        coalition_.start = now_;
        log("%.6f trial_start fork=%u", coalition_.fork);
        for (std::uint32_t m : coalition_.members) mine_on(nodes_[m], coalition_.fork);
    }

    void end_trial(bool success, std::uint64_t honest_len, std::uint64_t private_len) {
        attacks_.push_back({coalition_.start, now_, success, private_len, honest_len});
        log("%.6f trial_end success=%d honest=%llu private=%llu", success ? 1 : 0,
            static_cast<unsigned long long>(honest_len), static_cast<unsigned long long>(private_len));
    }

    void check_attack() {
        const std::uint32_t pub = coalition_public_tip();
        const std::uint32_t priv = coalition_.private_tip;
        const std::uint64_t base = height(coalition_.fork);
        const std::uint64_t honest_len = height(pub) > base ? height(pub) - base : 0;
        const std::uint64_t private_len = height(priv) - base;
        if (honest_len >= cfg_.adversary.confirmations && work(priv) > work(pub)) {
            std::vector<std::uint32_t> chain;
            for (std::uint32_t b = priv; b != coalition_.fork; b = blocks_[b].parent) chain.push_back(b);
            for (auto it = chain.rbegin(); it != chain.rend(); ++it) release(*it);
            for (std::uint32_t m : coalition_.members) nodes_[m].tip = priv;
            end_trial(true, honest_len, private_len);
            begin_trial();
        } else if (honest_len > private_len + cfg_.adversary.give_up_deficit) {
            end_trial(false, honest_len, private_len);
            begin_trial();
        }
    }

    std::uint32_t main_tip() const {
        std::uint32_t best = kNone;
        for (const auto& n : nodes_) {
            if (attacking_ && n.adversarial && nodes_.size() > coalition_.members.size()) continue;
            if (best == kNone || work(n.tip) > work(best) ||
                (work(n.tip) == work(best) &&
                 blocks_[n.tip].entry->arrival_seq < blocks_[best].entry->arrival_seq)) {
                best = n.tip;
            }
        }
        return best;
    }

    Metrics collect() {
        Metrics m;
        std::vector<std::uint32_t> path;
        for (std::uint32_t b = main_tip(); b != kNone; b = blocks_[b].parent) path.push_back(b);
        std::reverse(path.begin(), path.end());
        std::vector<std::uint8_t> on_main(blocks_.size(), 0);
        for (std::uint32_t b : path) {
            on_main[b] = 1;
            m.chain.push_back(blocks_[b].block);
            if (b == 0) continue;
            const auto& info = blocks_[b];
            const auto& parent = blocks_[info.parent];
            BlockRecord r;
            r.height = info.entry->height;
            r.hash = info.entry->hash;
            r.found_time_s = info.found_time;
            r.timestamp = info.block->header.timestamp;
            r.interval_s = info.found_time - parent.found_time;
            r.level = info.block->header.level;
            r.miner = info.miner;
            r.adversarial = info.adversarial;
            r.committee_size = parent.passes;
            r.adversary_passes = parent.adversary_passes;
            m.blocks.push_back(r);
        }
        for (std::size_t b = 1; b < blocks_.size(); ++b) {
            if (blocks_[b].released && !on_main[b]) ++m.stale_blocks;
        }
        for (const auto& b : blocks_) {
            if (b.released_children > 1) m.fork_events += b.released_children - 1;
        }
        m.blocks_produced = blocks_produced_;
        for (const auto& n : nodes_) {
            m.node_energy.push_back(n.energy);
            m.total_energy += n.energy;
        }
        m.attacks = attacks_;
        m.gating_violations = gating_violations_;
        m.events = std::move(events_);
        return m;
    }

    const ScenarioConfig& cfg_;
    const RunOptions& opt_;
    Rng rng_;
    std::shared_ptr<const difficulty::DifficultyTable> table_;
    chain::ConsensusParams params_;
    std::unique_ptr<chain::ChainStore> store_;
    std::vector<BlockInfo> blocks_;
    std::vector<Node> nodes_;
    std::vector<std::vector<int>> partition_groups_;
    Coalition coalition_;
    bool attacking_ = false;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
    std::uint64_t next_seq_ = 0;
    double now_ = 0.0;
    double rate_multiplier_ = 1.0;
    std::uint64_t blocks_produced_ = 0;
    std::uint64_t gating_violations_ = 0;
    std::vector<AttackTrial> attacks_;
    std::vector<std::string> events_;
};

double wilson_half(double successes, double n, double z, double* centre) {
    const double phat = successes / n;
    const double denom = 1.0 + z * z / n;
    *centre = (phat + z * z / (2.0 * n)) / denom;
    return z * std::sqrt(phat * (1.0 - phat) / n + z * z / (4.0 * n * n)) / denom;
}

/// Exact two-sided binomial test: total probability of outcomes no more
/// likely than the observed one.
double binomial_two_sided(std::uint64_t k, std::uint64_t n, double p) {
    if (n == 0) return 1.0;
    if (p <= 0.0) return k == 0 ? 1.0 : 0.0;
    if (p >= 1.0) return k == n ? 1.0 : 0.0;
    const double lp = std::log(p);
    const double lq = std::log1p(-p);
    const double lnf = std::lgamma(static_cast<double>(n) + 1.0);
    auto log_pmf = [&](std::uint64_t i) {
        const double x = static_cast<double>(i);
        return lnf - std::lgamma(x + 1.0) - std::lgamma(static_cast<double>(n - i) + 1.0) + x * lp +
               static_cast<double>(n - i) * lq;
    };
    const double cutoff = log_pmf(k) + std::log1p(1e-7);
    double total = 0.0;
    for (std::uint64_t i = 0; i <= n; ++i) {
        const double l = log_pmf(i);
        if (l <= cutoff) total += std::exp(l);
    }
    return std::min(1.0, total);
}

std::string fixed(double v, int digits = 6) { return format("%.*f", digits, v); }

}  // namespace

EnergyCounters& EnergyCounters::operator+=(const EnergyCounters& o) {
    vct_tosses += o.vct_tosses;
    solve_attempts += o.solve_attempts;
    decode_iterations += o.decode_iterations;
    verify_count += o.verify_count;
    return *this;
}

double Metrics::mean_interval_s() const {
    if (blocks.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& b : blocks) sum += b.interval_s;
    return sum / static_cast<double>(blocks.size());
}

Metrics run(const ScenarioConfig& scenario, const RunOptions& options) {
    scenario.validate();
    Simulation sim(scenario, options);
    return sim.run();
}

std::map<std::string, double> summary_metrics(const Metrics& m) {
    std::map<std::string, double> s;
    s["blocks"] = static_cast<double>(m.blocks.size());
    s["mean_interval_s"] = m.mean_interval_s();
    s["blocks_produced"] = static_cast<double>(m.blocks_produced);
    s["stale_blocks"] = static_cast<double>(m.stale_blocks);
    s["fork_events"] = static_cast<double>(m.fork_events);
    s["total_vct_tosses"] = static_cast<double>(m.total_energy.vct_tosses);
    s["total_solve_attempts"] = static_cast<double>(m.total_energy.solve_attempts);
    s["total_decode_iterations"] = static_cast<double>(m.total_energy.decode_iterations);
    s["total_verify_count"] = static_cast<double>(m.total_energy.verify_count);
    s["solve_attempts_per_block"] =
        m.blocks.empty() ? 0.0
                         : static_cast<double>(m.total_energy.solve_attempts) /
                               static_cast<double>(m.blocks.size());
    std::uint64_t successes = 0;
    for (const auto& a : m.attacks) successes += a.success ? 1 : 0;
    s["attack_trials"] = static_cast<double>(m.attacks.size());
    s["attack_successes"] = static_cast<double>(successes);
    s["gating_violations"] = static_cast<double>(m.gating_violations);
    return s;
}

std::string metrics_csv(const Metrics& m) {
    std::string out =
        "kind,height,hash,found_time_s,timestamp,interval_s,level,miner,adversarial,committee_size,"
        "adversary_passes,metric,value\n";
    for (const auto& b : m.blocks) {
        out += format("block,%llu,%s,%s,%llu,%s,%u,%u,%d,%u,%u,,\n",
                      static_cast<unsigned long long>(b.height), b.hash.hex().c_str(),
                      fixed(b.found_time_s).c_str(), static_cast<unsigned long long>(b.timestamp),
                      fixed(b.interval_s).c_str(), b.level, b.miner, b.adversarial ? 1 : 0,
                      b.committee_size, b.adversary_passes);
    }
    for (std::size_t i = 0; i < m.node_energy.size(); ++i) {
        const auto& e = m.node_energy[i];
        const std::pair<const char*, std::uint64_t> rows[] = {
            {"vct_tosses", e.vct_tosses},
            {"solve_attempts", e.solve_attempts},
            {"decode_iterations", e.decode_iterations},
            {"verify_count", e.verify_count},
        };
        for (const auto& [name, v] : rows) {
            out += format("node,,,,,,,%zu,,,,%s,%llu\n", i, name, static_cast<unsigned long long>(v));
        }
    }
    for (const auto& [name, v] : summary_metrics(m)) {
        out += format("summary,,,,,,,,,,,%s,%s\n", name.c_str(), fixed(v).c_str());
    }
    return out;
}

EceResult measure_ece(const ScenarioConfig& scenario, const vct::PassProbability& pp) {
    if (scenario.mode != MiningMode::kAbstract) {
        throw ConfigError("mode", "ECE measurement requires abstract mining");
    }
    ScenarioConfig at_pp = scenario;
    at_pp.pass_probability = pp;
    ScenarioConfig full = scenario;
    full.pass_probability = vct::PassProbability::one();
    full.stakes.clear();
    full.solve_probability_scale = scenario.solve_probability_scale * pp.as_double();
    at_pp.validate();
    full.validate();

    const Metrics m = run(at_pp);
    const Metrics f = pp == vct::PassProbability::one() ? m : run(full);
    if (m.blocks.empty() || f.blocks.empty()) {
        throw SimError("ECE needs at least one block in both runs");
    }
    EceResult r;
    r.blocks = m.blocks.size();
    r.blocks_full = f.blocks.size();
    r.attempts_per_block =
        static_cast<double>(m.total_energy.solve_attempts) / static_cast<double>(r.blocks);
    r.attempts_per_block_full =
        static_cast<double>(f.total_energy.solve_attempts) / static_cast<double>(r.blocks_full);
    const double ratio = r.attempts_per_block / r.attempts_per_block_full;
    r.ece = 1.0 - ratio;
    if (&f == &m) {
        r.ci_low = r.ci_high = r.ece;
    } else {
        // Block counts are the dominant noise: var(log ratio) ~ 1/B + 1/B_full.
        const double se = std::sqrt(1.0 / r.blocks + 1.0 / r.blocks_full);
        r.ci_low = 1.0 - ratio * std::exp(1.96 * se);
        r.ci_high = 1.0 - ratio * std::exp(-1.96 * se);
    }
    return r;
}

CommitteeResult committee_proportion(const ScenarioConfig& scenario, double adversary_fraction,
                                     std::uint32_t rounds) {
    if (rounds == 0) throw std::invalid_argument("rounds must be at least 1");
    ScenarioConfig cfg = scenario;
    cfg.adversary.fraction = adversary_fraction;
    cfg.validate();
    const std::uint32_t adversaries = cfg.adversary_count();
    const auto pps = node_pass_probabilities(cfg);
    std::vector<crypto::KeyPair> keys;
    keys.reserve(cfg.node_count);
    for (std::uint32_t i = 0; i < cfg.node_count; ++i) keys.push_back(node_keys(cfg.seed, i));

    CommitteeResult r;
    double expected_adv = 0.0;
    double expected_all = 0.0;
    for (std::uint32_t i = 0; i < cfg.node_count; ++i) {
        expected_all += pps[i].as_double();
        if (i < adversaries) expected_adv += pps[i].as_double();
    }
    r.expected_share = expected_all > 0.0 ? expected_adv / expected_all : 0.0;

    for (std::uint32_t round = 0; round < rounds; ++round) {
        chain::BlockHeader parent;
        crypto::Sha256 h;
        static constexpr std::string_view kTag = "greenbtc/committee-round";
        h.update({reinterpret_cast<const std::uint8_t*>(kTag.data()), kTag.size()});
        h.update_u32_be(static_cast<std::uint32_t>(cfg.seed >> 32));
        h.update_u32_be(static_cast<std::uint32_t>(cfg.seed));
        h.update_u32_be(round);
        parent.prev_hash = h.finalize();
        parent.timestamp = kGenesisTime + 600ull * round;
        const auto message = chain::serialize_header(parent, true);

        std::uint64_t passes = 0;
        std::uint64_t adv = 0;
        for (std::uint32_t i = 0; i < cfg.node_count; ++i) {
            if (vct::vct_toss(keys[i].secret_key, message, pps[i]).pass) {
                ++passes;
                if (i < adversaries) ++adv;
            }
        }
        r.total_passes += passes;
        r.adversary_passes += adv;
        if (passes == 0) {
            ++r.empty_rounds;
        } else {
            r.shares.push_back(static_cast<double>(adv) / static_cast<double>(passes));
        }
    }
    if (!r.shares.empty()) {
        double sum = 0.0;
        for (double s : r.shares) sum += s;
        const double k = static_cast<double>(r.shares.size());
        r.mean_share = sum / k;
        double ss = 0.0;
        for (double s : r.shares) ss += (s - r.mean_share) * (s - r.mean_share);
        const double sd = r.shares.size() > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
        r.ci_low = r.mean_share - 1.96 * sd / std::sqrt(k);
        r.ci_high = r.mean_share + 1.96 * sd / std::sqrt(k);
    }
    r.binomial_p_value = binomial_two_sided(r.adversary_passes, r.total_passes, r.expected_share);
    return r;
}

AttackResult attack_experiment(const ScenarioConfig& scenario, double adversary_fraction,
                               std::uint32_t z, const AttackOptions& options) {
    if (options.trials == 0) throw std::invalid_argument("trials must be at least 1");
    if (options.horizon_blocks == 0) throw std::invalid_argument("horizon_blocks must be at least 1");
    ScenarioConfig cfg = scenario;
    cfg.adversary.fraction = adversary_fraction;
    cfg.validate();
    if (!cfg.stakes.empty()) throw ConfigError("stakes", "not supported by attack experiments");

    const std::uint32_t attackers = cfg.adversary_count();
    const std::uint32_t honest = cfg.node_count - attackers;
    const double pp = cfg.pass_probability.as_double();

    struct Outcome {
        bool success = false;
        std::uint64_t blocks = 0;
    };
    std::vector<Outcome> outcomes(options.trials);

    auto run_trial = [&](std::uint32_t trial) {
        Rng rng(cfg.seed, 0x5eed0000ull + trial);
        Outcome o;
        if (attackers == 0) return o;
        std::uint64_t h = 0;
        std::uint64_t a = 0;
        std::uint32_t hc = rng.binomial(honest, pp);
        std::uint32_t ac = rng.binomial(attackers, pp);
        while (o.blocks < options.horizon_blocks) {
            if (options.give_up_deficit != 0 && h > a + options.give_up_deficit) break;
            if (hc == 0 && h < z) break;  // the merchant never sees z confirmations
            const std::uint64_t total = std::uint64_t{hc} + ac;
            if (total == 0) break;
            ++o.blocks;
            if (rng.uniform() * static_cast<double>(total) < hc) {
                ++h;
                hc = rng.binomial(honest, pp);
            } else {
                ++a;
                ac = rng.binomial(attackers, pp);
            }
            if (h >= z && a > h) {
                o.success = true;
                break;
            }
        }
        return o;
    };

    const std::uint32_t jobs = std::max<std::uint32_t>(1, std::min(options.jobs, options.trials));
    if (jobs == 1) {
        for (std::uint32_t t = 0; t < options.trials; ++t) outcomes[t] = run_trial(t);
    } else {
        std::vector<std::thread> workers;
        for (std::uint32_t j = 0; j < jobs; ++j) {
            workers.emplace_back([&, j] {
                for (std::uint32_t t = j; t < options.trials; t += jobs) outcomes[t] = run_trial(t);
            });
        }
        for (auto& w : workers) w.join();
    }

    AttackResult r;
    r.trials = options.trials;
    double blocks = 0.0;
    for (const auto& o : outcomes) {
        r.successes += o.success ? 1 : 0;
        blocks += static_cast<double>(o.blocks);
    }
    const double n = static_cast<double>(r.trials);
    r.rate = r.successes / n;
    r.mean_blocks = blocks / n;
    double centre = 0.0;
    const double half = wilson_half(r.successes, n, 1.96, &centre);
    r.ci_low = std::max(0.0, centre - half);
    r.ci_high = std::min(1.0, centre + half);
    return r;
}

}  // namespace greenbtc::simnet
