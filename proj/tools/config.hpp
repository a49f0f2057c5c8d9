#pragma once

#include "compcg/harness.hpp"

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace compcg::cli {

/// Bad configuration input. `key` names the offending setting when there is one.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& message)
        : std::runtime_error(key.empty() ? message : key + ": " + message), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// Everything a subcommand needs: the simulation config plus CLI-level settings.
struct Settings {
    SimConfig sim;
    int jobs = 1;
    std::vector<std::string> methods;  // compare
    std::vector<double> values;        // sweeps
};

using KeyValue = std::pair<std::string, std::string>;

/// Parses a flat `key = value` file; `#` starts a comment. Keys are not checked here.
std::vector<KeyValue> read_config_file(const std::string& path);

/// Splits "key=value". Throws ConfigError when there is no '='.
KeyValue split_assignment(const std::string& text);

/// Applies one setting. Throws ConfigError for unknown keys and unparsable values.
void apply_setting(Settings& settings, const std::string& key, const std::string& value);

/// All recognised keys, in documentation order.
const std::vector<std::string>& known_keys();

std::vector<std::string> split_list(const std::string& text);
double parse_double(const std::string& key, const std::string& text);

}  // namespace compcg::cli
