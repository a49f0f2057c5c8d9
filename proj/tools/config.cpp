#include "config.hpp"

#include "compcg/errors.hpp"

#include <charconv>
#include <fstream>
#include <functional>

namespace compcg::cli {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

template <class Int>
Int parse_int(const std::string& key, const std::string& text) {
    Int value{};
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end || text.empty()) {
        throw ConfigError(key, "expected an integer, got '" + text + "'");
    }
    return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ConfigError(key, "expected true or false, got '" + text + "'");
}

UpdateMode parse_mode(const std::string& key, const std::string& text) {
    if (text == "always") return UpdateMode::Always;
    if (text == "high-iterations") return UpdateMode::OnHighIterations;
    if (text == "every-j") return UpdateMode::EveryJth;
    if (text == "never") return UpdateMode::Never;
    throw ConfigError(key, "expected always, high-iterations, every-j or never, got '" + text + "'");
}

using Setter = std::function<void(Settings&, const std::string&, const std::string&)>;

const std::vector<std::pair<std::string, Setter>>& setters() {
    static const std::vector<std::pair<std::string, Setter>> table = {
        {"d", [](Settings& s, const auto& k, const auto& v) { s.sim.d = parse_int<Index>(k, v); }},
        {"d_param", [](Settings& s, const auto& k, const auto& v) { s.sim.d_param = parse_int<Index>(k, v); }},
        {"n_systems", [](Settings& s, const auto& k, const auto& v) { s.sim.n_systems = parse_int<int>(k, v); }},
        {"n_runs", [](Settings& s, const auto& k, const auto& v) { s.sim.n_runs = parse_int<int>(k, v); }},
        {"kernel",
         [](Settings&, const auto& k, const auto& v) {
             if (v != "matern32") throw ConfigError(k, "only matern32 is available, got '" + v + "'");
         }},
        {"lengthscale", [](Settings& s, const auto& k, const auto& v) { s.sim.kernel.lengthscale = parse_double(k, v); }},
        {"data_lengthscale",
         [](Settings& s, const auto& k, const auto& v) {
             if (v == "auto") {
                 s.sim.data_lengthscale.reset();
             } else {
                 s.sim.data_lengthscale = parse_double(k, v);
             }
         }},
        {"amplitude", [](Settings& s, const auto& k, const auto& v) { s.sim.kernel.amplitude = parse_double(k, v); }},
        {"m",
         [](Settings& s, const auto& k, const auto& v) {
             if (v == "auto") {
                 s.sim.m.reset();
             } else {
                 s.sim.m = parse_int<Index>(k, v);
             }
         }},
        {"alpha", [](Settings& s, const auto& k, const auto& v) { s.sim.alpha = parse_double(k, v); }},
        {"tol_rel", [](Settings& s, const auto& k, const auto& v) { s.sim.tol_rel = parse_double(k, v); }},
        {"maxit", [](Settings& s, const auto& k, const auto& v) { s.sim.maxit = parse_int<int>(k, v); }},
        {"seed", [](Settings& s, const auto& k, const auto& v) { s.sim.seed = parse_int<std::uint64_t>(k, v); }},
        {"method",
         [](Settings& s, const auto& k, const auto& v) {
             try {
                 s.sim.method = parse_method(v);
             } catch (const InputError& e) {
                 throw ConfigError(k, e.what());
             }
         }},
        {"update_mode", [](Settings& s, const auto& k, const auto& v) { s.sim.policy.mode = parse_mode(k, v); }},
        {"iteration_threshold",
         [](Settings& s, const auto& k, const auto& v) { s.sim.policy.iteration_threshold = parse_int<int>(k, v); }},
        {"reset_jump_factor",
         [](Settings& s, const auto& k, const auto& v) { s.sim.policy.reset_jump_factor = parse_double(k, v); }},
        {"max_records",
         [](Settings& s, const auto& k, const auto& v) {
             s.sim.policy.max_records = v == "none" ? std::numeric_limits<std::size_t>::max()
                                                    : parse_int<std::size_t>(k, v);
         }},
        {"every_j", [](Settings& s, const auto& k, const auto& v) { s.sim.policy.every_j = parse_int<int>(k, v); }},
        {"trailing_window",
         [](Settings& s, const auto& k, const auto& v) { s.sim.policy.trailing_window = parse_int<std::size_t>(k, v); }},
        {"min_history",
         [](Settings& s, const auto& k, const auto& v) { s.sim.policy.min_history = parse_int<std::size_t>(k, v); }},
        {"jitter", [](Settings& s, const auto& k, const auto& v) { s.sim.jitter = parse_double(k, v); }},
        {"eig_low", [](Settings& s, const auto& k, const auto& v) { s.sim.eig_low = parse_double(k, v); }},
        {"eig_high", [](Settings& s, const auto& k, const auto& v) { s.sim.eig_high = parse_double(k, v); }},
        {"step_scale", [](Settings& s, const auto& k, const auto& v) { s.sim.step_scale = parse_double(k, v); }},
        {"timing", [](Settings& s, const auto& k, const auto& v) { s.sim.timing = parse_bool(k, v); }},
        {"subset_embedding",
         [](Settings& s, const auto& k, const auto& v) {
             if (v == "domain") {
                 s.sim.subset_embedding = SubsetEmbedding::Domain;
             } else if (v == "raw") {
                 s.sim.subset_embedding = SubsetEmbedding::Raw;
             } else {
                 throw ConfigError(k, "expected domain or raw, got '" + v + "'");
             }
         }},
        {"jobs",
         [](Settings& s, const auto& k, const auto& v) {
             s.jobs = parse_int<int>(k, v);
             if (s.jobs < 1) throw ConfigError(k, "must be at least 1");
         }},
        {"methods", [](Settings& s, const auto&, const auto& v) { s.methods = split_list(v); }},
        {"values",
         [](Settings& s, const auto& k, const auto& v) {
             s.values.clear();
             for (const auto& item : split_list(v)) s.values.push_back(parse_double(k, item));
         }},
    };
    return table;
}

}  // namespace

double parse_double(const std::string& key, const std::string& text) {
    double value = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end || text.empty()) {
        throw ConfigError(key, "expected a number, got '" + text + "'");
    }
    return value;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto item = trim(text.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (!item.empty()) out.push_back(item);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

KeyValue split_assignment(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError("", "expected key=value, got '" + text + "'");
    auto key = trim(text.substr(0, eq));
    if (key.empty()) throw ConfigError("", "missing key in '" + text + "'");
    return {key, trim(text.substr(eq + 1))};
}

std::vector<KeyValue> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file " + path);
    std::vector<KeyValue> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        try {
            out.push_back(split_assignment(line));
        } catch (const ConfigError& e) {
            throw ConfigError("", path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void apply_setting(Settings& settings, const std::string& key, const std::string& value) {
    for (const auto& [name, setter] : setters()) {
        if (name == key) {
            setter(settings, key, value);
            return;
        }
    }
    throw ConfigError(key, "unknown configuration key");
}

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> out;
        for (const auto& entry : setters()) out.push_back(entry.first);
        return out;
    }();
    return keys;
}

}  // namespace compcg::cli
