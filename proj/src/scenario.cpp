#include "greenbtc/scenario.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace greenbtc::simnet {

using json = nlohmann::json;

namespace {

std::string join(const std::string& path, std::string_view key) {
    return path.empty() ? std::string(key) : path + "." + std::string(key);
}

std::string index_path(const std::string& path, std::size_t i) {
    return path + "[" + std::to_string(i) + "]";
}

/// Reads one JSON object, remembering which keys were consumed so that
/// anything left over can be reported.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_.empty() ? "config" : path_, "expected an object");
    }

    const json* get(std::string_view key) {
        seen_.insert(std::string(key));
        auto it = j_.find(std::string(key));
        return it == j_.end() ? nullptr : &*it;
    }

    std::string path(std::string_view key) const { return join(path_, key); }

    double number(std::string_view key, double fallback) {
        const json* v = get(key);
        if (!v) return fallback;
        return as_number(*v, path(key));
    }

    std::uint64_t integer(std::string_view key, std::uint64_t fallback) {
        const json* v = get(key);
        if (!v) return fallback;
        return as_integer(*v, path(key));
    }

    std::uint32_t integer32(std::string_view key, std::uint32_t fallback) {
        const std::uint64_t v = integer(key, fallback);
        if (v > std::numeric_limits<std::uint32_t>::max()) throw ConfigError(path(key), "value too large");
        return static_cast<std::uint32_t>(v);
    }

    bool boolean(std::string_view key, bool fallback) {
        const json* v = get(key);
        if (!v) return fallback;
        if (!v->is_boolean()) throw ConfigError(path(key), "expected true or false");
        return v->get<bool>();
    }

    std::string string(std::string_view key, std::string fallback) {
        const json* v = get(key);
        if (!v) return fallback;
        if (!v->is_string()) throw ConfigError(path(key), "expected a string");
        return v->get<std::string>();
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) throw ConfigError(join(path_, it.key()), "unknown field");
        }
    }

    static double as_number(const json& v, const std::string& path) {
        if (!v.is_number()) throw ConfigError(path, "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw ConfigError(path, "expected a finite number");
        return d;
    }

    static std::uint64_t as_integer(const json& v, const std::string& path) {
        if (v.is_number_unsigned()) return v.get<std::uint64_t>();
        if (v.is_number_integer()) {
            if (v.get<std::int64_t>() < 0) throw ConfigError(path, "expected a non-negative integer");
            return static_cast<std::uint64_t>(v.get<std::int64_t>());
        }
        throw ConfigError(path, "expected a non-negative integer");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

const json& require_array(const json* v, const std::string& path) {
    if (!v->is_array()) throw ConfigError(path, "expected an array");
    return *v;
}

LatencyModel parse_latency(const json& j, const std::string& path) {
    ObjectReader r(j, path);
    LatencyModel m;
    const std::string model = r.string("model", "constant");
    if (model == "constant") {
        m.kind = LatencyModel::Kind::kConstant;
        m.constant_ms = r.number("ms", m.constant_ms);
    } else if (model == "uniform") {
        m.kind = LatencyModel::Kind::kUniform;
        if (!r.get("min_ms")) throw ConfigError(r.path("min_ms"), "required for the uniform model");
        if (!r.get("max_ms")) throw ConfigError(r.path("max_ms"), "required for the uniform model");
        m.min_ms = r.number("min_ms", 0.0);
        m.max_ms = r.number("max_ms", 0.0);
    } else if (model == "matrix") {
        m.kind = LatencyModel::Kind::kMatrix;
        const json* rows = r.get("ms");
        if (!rows) throw ConfigError(r.path("ms"), "required for the matrix model");
        const std::string rows_path = r.path("ms");
        for (std::size_t i = 0; i < require_array(rows, rows_path).size(); ++i) {
            const std::string row_path = index_path(rows_path, i);
            const json& row = require_array(&(*rows)[i], row_path);
            std::vector<double> out;
            for (std::size_t k = 0; k < row.size(); ++k) {
                out.push_back(ObjectReader::as_number(row[k], index_path(row_path, k)));
            }
            m.matrix_ms.push_back(std::move(out));
        }
    } else {
        throw ConfigError(r.path("model"), "expected constant, uniform or matrix");
    }
    r.finish();
    return m;
}

std::vector<std::uint32_t> parse_id_list(const json& j, const std::string& path) {
    require_array(&j, path);
    std::vector<std::uint32_t> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::uint64_t id = ObjectReader::as_integer(j[i], index_path(path, i));
        if (id > std::numeric_limits<std::uint32_t>::max()) {
            throw ConfigError(index_path(path, i), "node id too large");
        }
        out.push_back(static_cast<std::uint32_t>(id));
    }
    return out;
}

std::shared_ptr<const difficulty::DifficultyTable> parse_table(const json& j,
                                                               const std::string& path) {
    require_array(&j, path);
    std::vector<difficulty::LevelEntry> levels;
    for (std::size_t i = 0; i < j.size(); ++i) {
        ObjectReader r(j[i], index_path(path, i));
        difficulty::LevelEntry e;
        if (!r.get("n")) throw ConfigError(r.path("n"), "required");
        if (!r.get("p_hat")) throw ConfigError(r.path("p_hat"), "required");
        e.params.n = r.integer32("n", 0);
        e.params.wc = r.integer32("wc", 3);
        e.params.wr = r.integer32("wr", 6);
        e.params.max_iter = r.integer32("max_iter", 20);
        e.p_hat = r.number("p_hat", 0.0);
        e.std_err = r.number("std_err", 0.0);
        e.samples = r.integer("samples", 0);
        r.finish();
        levels.push_back(e);
    }
    try {
        return std::make_shared<const difficulty::DifficultyTable>(std::move(levels));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
    }
}

}  // namespace

std::string_view mode_name(MiningMode m) {
    return m == MiningMode::kAbstract ? "abstract" : "concrete";
}

const difficulty::DifficultyTable& ScenarioConfig::difficulty_table() const {
    return table ? *table : difficulty::default_table();
}

std::uint32_t ScenarioConfig::adversary_count() const {
    return static_cast<std::uint32_t>(std::llround(adversary.fraction * node_count));
}

void ScenarioConfig::validate() const {
    if (node_count == 0) throw ConfigError("node_count", "must be at least 1");
    if (!(attempt_rate > 0.0) || !std::isfinite(attempt_rate)) {
        throw ConfigError("attempt_rate", "must be positive");
    }
    if (!(duration_s > 0.0) || !std::isfinite(duration_s)) {
        throw ConfigError("duration_s", "must be positive");
    }
    if (!(target_interval_s > 0.0)) throw ConfigError("target_interval_s", "must be positive");
    const auto& tbl = difficulty_table();
    if (tbl.size() == 0) throw ConfigError("difficulty_table", "must not be empty");
    if (!tbl.contains(level)) throw ConfigError("difficulty.level", "not in the difficulty table");
    if (auto_difficulty && retarget_window < 1) {
        throw ConfigError("difficulty.window", "must be at least 1");
    }
    if (!(adversary.fraction >= 0.0 && adversary.fraction <= 1.0)) {
        throw ConfigError("adversary.fraction", "must lie in [0, 1]");
    }
    if (!(solve_probability_scale > 0.0 && solve_probability_scale <= 1.0)) {
        throw ConfigError("solve_probability_scale", "must lie in (0, 1]");
    }
    if (mode == MiningMode::kConcrete) {
        if (node_count > 10) throw ConfigError("mode", "concrete mining supports at most 10 nodes");
        if (solve_probability_scale != 1.0) {
            throw ConfigError("solve_probability_scale", "must be 1 in concrete mode");
        }
    }
    switch (latency.kind) {
        case LatencyModel::Kind::kConstant:
            if (!(latency.constant_ms >= 0.0)) throw ConfigError("latency.ms", "must be non-negative");
            break;
        case LatencyModel::Kind::kUniform:
            if (!(latency.min_ms >= 0.0)) throw ConfigError("latency.min_ms", "must be non-negative");
            if (!(latency.max_ms >= latency.min_ms)) {
                throw ConfigError("latency.max_ms", "must be at least min_ms");
            }
            break;
        case LatencyModel::Kind::kMatrix:
            if (latency.matrix_ms.size() != node_count) {
                throw ConfigError("latency.ms", "needs one row per node");
            }
            for (std::size_t i = 0; i < node_count; ++i) {
                if (latency.matrix_ms[i].size() != node_count) {
                    throw ConfigError(index_path("latency.ms", i), "needs one entry per node");
                }
                for (double v : latency.matrix_ms[i]) {
                    if (!(v >= 0.0)) {
                        throw ConfigError(index_path("latency.ms", i), "must be non-negative");
                    }
                }
            }
            break;
    }
    for (std::size_t i = 0; i < partitions.size(); ++i) {
        const auto& p = partitions[i];
        const std::string path = index_path("partitions", i);
        if (!(p.start_s >= 0.0 && p.end_s > p.start_s)) {
            throw ConfigError(path, "needs 0 <= start_s < end_s");
        }
        std::set<std::uint32_t> seen;
        for (const auto& g : p.groups) {
            for (std::uint32_t id : g) {
                if (id >= node_count) throw ConfigError(path + ".groups", "node id out of range");
                if (!seen.insert(id).second) {
                    throw ConfigError(path + ".groups", "node listed twice");
                }
            }
        }
    }
    if (!stakes.empty()) {
        if (stakes.size() != node_count) throw ConfigError("stakes", "needs one entry per node");
        std::uint64_t total = 0;
        for (std::uint64_t s : stakes) {
            if (s > std::numeric_limits<std::uint64_t>::max() - total) {
                throw ConfigError("stakes", "total overflows");
            }
            total += s;
        }
        if (total == 0) throw ConfigError("stakes", "total stake must be positive");
    }
    for (std::size_t i = 0; i < rate_schedule.size(); ++i) {
        const auto& s = rate_schedule[i];
        const std::string path = index_path("rate_schedule", i);
        if (!(s.at_s >= 0.0)) throw ConfigError(path + ".at_s", "must be non-negative");
        if (!(s.multiplier > 0.0) || !std::isfinite(s.multiplier)) {
            throw ConfigError(path + ".multiplier", "must be positive");
        }
        if (i > 0 && !(s.at_s > rate_schedule[i - 1].at_s)) {
            throw ConfigError(path + ".at_s", "steps must be strictly increasing in time");
        }
    }
}

ScenarioConfig parse_scenario(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config", std::string("invalid JSON: ") + e.what());
    }
    ScenarioConfig c;
    ObjectReader r(j, "");
    c.node_count = r.integer32("node_count", c.node_count);
    c.attempt_rate = r.number("attempt_rate", c.attempt_rate);
    if (const json* pp = r.get("pass_probability")) {
        std::string text;
        if (pp->is_string()) {
            text = pp->get<std::string>();
        } else if (pp->is_number_integer() || pp->is_number_unsigned()) {
            text = pp->dump();
        } else {
            throw ConfigError("pass_probability", "expected a decimal string such as \"0.1\"");
        }
        try {
            c.pass_probability = vct::PassProbability::from_decimal(text);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("pass_probability", e.what());
        }
    }
    if (const json* d = r.get("difficulty")) {
        ObjectReader dr(*d, "difficulty");
        c.level = dr.integer32("level", c.level);
        c.auto_difficulty = dr.boolean("auto", c.auto_difficulty);
        c.retarget_window = dr.integer32("window", c.retarget_window);
        dr.finish();
    }
    c.target_interval_s = r.number("target_interval_s", c.target_interval_s);
    if (const json* l = r.get("latency")) c.latency = parse_latency(*l, "latency");
    if (const json* ps = r.get("partitions")) {
        require_array(ps, "partitions");
        for (std::size_t i = 0; i < ps->size(); ++i) {
            const std::string path = index_path("partitions", i);
            ObjectReader pr((*ps)[i], path);
            Partition p;
            p.start_s = pr.number("start_s", 0.0);
            if (!pr.get("end_s")) throw ConfigError(pr.path("end_s"), "required");
            p.end_s = pr.number("end_s", 0.0);
            const json* groups = pr.get("groups");
            if (!groups) throw ConfigError(pr.path("groups"), "required");
            require_array(groups, pr.path("groups"));
            for (std::size_t g = 0; g < groups->size(); ++g) {
                p.groups.push_back(parse_id_list((*groups)[g], index_path(pr.path("groups"), g)));
            }
            pr.finish();
            c.partitions.push_back(std::move(p));
        }
    }
    if (const json* a = r.get("adversary")) {
        ObjectReader ar(*a, "adversary");
        c.adversary.fraction = ar.number("fraction", c.adversary.fraction);
        const std::string strategy = ar.string("strategy", "honest");
        if (strategy == "honest") {
            c.adversary.strategy = Strategy::kHonest;
        } else if (strategy == "double_spend") {
            c.adversary.strategy = Strategy::kDoubleSpend;
        } else {
            throw ConfigError("adversary.strategy", "expected honest or double_spend");
        }
        c.adversary.confirmations = ar.integer32("confirmations", c.adversary.confirmations);
        c.adversary.give_up_deficit = ar.integer32("give_up_deficit", c.adversary.give_up_deficit);
        ar.finish();
    }
    const std::string mode = r.string("mode", "abstract");
    if (mode == "abstract") {
        c.mode = MiningMode::kAbstract;
    } else if (mode == "concrete") {
        c.mode = MiningMode::kConcrete;
    } else {
        throw ConfigError("mode", "expected abstract or concrete");
    }
    c.seed = r.integer("seed", c.seed);
    c.duration_s = r.number("duration_s", c.duration_s);
    if (const json* s = r.get("stakes")) {
        require_array(s, "stakes");
        for (std::size_t i = 0; i < s->size(); ++i) {
            c.stakes.push_back(ObjectReader::as_integer((*s)[i], index_path("stakes", i)));
        }
    }
    if (const json* rs = r.get("rate_schedule")) {
        require_array(rs, "rate_schedule");
        for (std::size_t i = 0; i < rs->size(); ++i) {
            ObjectReader sr((*rs)[i], index_path("rate_schedule", i));
            RateStep step;
            if (!sr.get("at_s")) throw ConfigError(sr.path("at_s"), "required");
            if (!sr.get("multiplier")) throw ConfigError(sr.path("multiplier"), "required");
            step.at_s = sr.number("at_s", 0.0);
            step.multiplier = sr.number("multiplier", 1.0);
            sr.finish();
            c.rate_schedule.push_back(step);
        }
    }
    c.solve_probability_scale = r.number("solve_probability_scale", c.solve_probability_scale);
    if (const json* t = r.get("difficulty_table")) c.table = parse_table(*t, "difficulty_table");
    r.finish();
    c.validate();
    return c;
}

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config", "cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

std::string scenario_to_json(const ScenarioConfig& c) {
    json j = json::object();
    j["node_count"] = c.node_count;
    j["attempt_rate"] = c.attempt_rate;
    j["pass_probability"] = [&] {
        // Exact decimal: the denominator always divides a power of ten.
        std::uint64_t num = c.pass_probability.numerator();
        std::uint64_t den = c.pass_probability.denominator();
        if (num == den) return std::string("1");
        std::string digits;
        for (int i = 0; i < 18 && num != 0; ++i) {
            num *= 10;
            digits += static_cast<char>('0' + num / den);
            num %= den;
        }
        return digits.empty() ? std::string("0") : "0." + digits;
    }();
    j["difficulty"] = {{"level", c.level}, {"auto", c.auto_difficulty}, {"window", c.retarget_window}};
    j["target_interval_s"] = c.target_interval_s;
    json lat = json::object();
    switch (c.latency.kind) {
        case LatencyModel::Kind::kConstant:
            lat["model"] = "constant";
            lat["ms"] = c.latency.constant_ms;
            break;
        case LatencyModel::Kind::kUniform:
            lat["model"] = "uniform";
            lat["min_ms"] = c.latency.min_ms;
            lat["max_ms"] = c.latency.max_ms;
            break;
        case LatencyModel::Kind::kMatrix:
            lat["model"] = "matrix";
            lat["ms"] = c.latency.matrix_ms;
            break;
    }
    j["latency"] = lat;
    json parts = json::array();
    for (const auto& p : c.partitions) {
        parts.push_back({{"start_s", p.start_s}, {"end_s", p.end_s}, {"groups", p.groups}});
    }
    j["partitions"] = parts;
    j["adversary"] = {
        {"fraction", c.adversary.fraction},
        {"strategy", c.adversary.strategy == Strategy::kHonest ? "honest" : "double_spend"},
        {"confirmations", c.adversary.confirmations},
        {"give_up_deficit", c.adversary.give_up_deficit},
    };
    j["mode"] = std::string(mode_name(c.mode));
    j["seed"] = c.seed;
    j["duration_s"] = c.duration_s;
    j["stakes"] = c.stakes;
    json steps = json::array();
    for (const auto& s : c.rate_schedule) steps.push_back({{"at_s", s.at_s}, {"multiplier", s.multiplier}});
    j["rate_schedule"] = steps;
    j["solve_probability_scale"] = c.solve_probability_scale;
    json table = json::array();
    for (const auto& e : c.difficulty_table().levels()) {
        table.push_back({{"n", e.params.n},
                         {"wc", e.params.wc},
                         {"wr", e.params.wr},
                         {"max_iter", e.params.max_iter},
                         {"p_hat", e.p_hat},
                         {"std_err", e.std_err},
                         {"samples", e.samples}});
    }
    j["difficulty_table"] = table;
    return j.dump(2) + "\n";
}

}  // namespace greenbtc::simnet
