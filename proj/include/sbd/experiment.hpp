#ifndef SBD_EXPERIMENT_HPP
#define SBD_EXPERIMENT_HPP

#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "sbd/gibbs.hpp"

namespace sbd {

inline constexpr const char* version_tag = "0.1.0";

// Config problems are reported all at once: the message lists every
// violated field, one per line.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One experiment description.  Two surface syntaxes parse to the same JSON
// document: plain JSON, or an indentation-free key-value format where
// `key { ... }` opens a nested block and leaf values are JSON literals
// (numbers, strings, arrays) or bare words.
struct ExperimentConfig {
    nlohmann::json doc;

    static ExperimentConfig from_file(const std::string& path);
    static ExperimentConfig from_text(const std::string& text);

    std::string kind() const;
    void validate() const; // throws ConfigError enumerating every violation
};

struct RunResult {
    int exit_code = 0; // 0 pass, 1 a statistical check failed
    std::string verdict;
    std::vector<std::string> files; // artifact names, relative to out_dir
};

// Runs the experiment and writes its artifacts under out_dir:
// report.json (results + resolved config + version tag), CSV tables where
// the experiment produces series, and meta.json (timestamps only, the one
// file allowed to differ between identical runs).
RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir, int jobs = 1);

// Exposed for tests.
nlohmann::json parse_block_config(const std::string& text);
GibbsModel model_from_config(const nlohmann::json& doc, std::vector<std::string>& violations);

} // namespace sbd

#endif
