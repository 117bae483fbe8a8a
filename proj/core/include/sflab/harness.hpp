#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sflab/report.hpp"

namespace sflab::harness {

/// Flat key/value experiment configuration. Values are strings as parsed
/// from the config file; typed getters fall back to the registry defaults.
class ExperimentConfig {
public:
    std::string id;
    std::map<std::string, std::string> kv;

    bool has(const std::string& key) const { return kv.count(key) > 0; }
    std::string get_string(const std::string& key, const std::string& dflt = "") const;
    double get_double(const std::string& key, double dflt) const;
    int get_int(const std::string& key, int dflt) const;
    std::uint64_t get_seed() const { return static_cast<std::uint64_t>(get_int("seed", 1)); }
};

/// "key = value" lines, '#' comments.
std::map<std::string, std::string> parse_config_file(const std::filesystem::path& path);

using Runner =
    std::function<EstimateReport(const ExperimentConfig&, const std::filesystem::path& outdir)>;

struct ExperimentEntry {
    std::string id;
    std::string module;      // owning module of the operation under test
    std::string description; // one line
    std::string anchor;      // the mathematical identity or bound exercised
    std::map<std::string, std::string> defaults;
    Runner run;
};

const std::vector<ExperimentEntry>& registry();
const ExperimentEntry* find_experiment(const std::string& id);

struct RunManifest {
    std::string id;
    Verdict verdict = Verdict::inconclusive;
    double seconds = 0.0;
    std::uint64_t seed = 0;
    std::string timestamp;
    std::string version;
    std::map<std::string, std::string> config_echo;
    std::string summary;
    std::string error;  // nonempty when the run aborted

    void write(const std::filesystem::path& path) const;  // atomic (tmp + rename)
};

/// Executes one experiment: validates the config, runs the mapped operation
/// chain, writes report.csv and manifest.txt under out_dir/<id>/.
RunManifest run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// Runs the given ids (or all) on a worker pool; manifests are aggregated in
/// id order. Returns true when every verdict is pass.
bool run_many(const std::vector<std::string>& ids, const std::filesystem::path& out_dir,
              const std::map<std::string, std::string>& overrides, std::ostream& log);

std::string list_experiments(const std::string& module_filter = "");

/// Tidy long-format CSV for one plot view ("holder", "mlevel", "picard",
/// "cauchy") over the manifests found under the given directories.
void emit_plot_data(const std::vector<std::filesystem::path>& manifest_dirs,
                    const std::string& view, std::ostream& os);

inline constexpr const char* kVersion = "0.1.0";

} // namespace sflab::harness
