#include "sflab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "sflab/errors.hpp"
#include "sflab/parallel.hpp"

namespace sflab::harness {

std::string ExperimentConfig::get_string(const std::string& key, const std::string& dflt) const {
    auto it = kv.find(key);
    return it == kv.end() ? dflt : it->second;
}

double ExperimentConfig::get_double(const std::string& key, double dflt) const {
    auto it = kv.find(key);
    if (it == kv.end()) return dflt;
    try {
        return std::stod(it->second);
    } catch (...) {
        throw ConfigError("config key '" + key + "': not a number: " + it->second);
    }
}

int ExperimentConfig::get_int(const std::string& key, int dflt) const {
    auto it = kv.find(key);
    if (it == kv.end()) return dflt;
    try {
        return std::stoi(it->second);
    } catch (...) {
        throw ConfigError("config key '" + key + "': not an integer: " + it->second);
    }
}

std::map<std::string, std::string> parse_config_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(is, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return (a == std::string::npos) ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (!key.empty()) kv[key] = val;
    }
    return kv;
}

const ExperimentEntry* find_experiment(const std::string& id) {
    for (const auto& e : registry())
        if (e.id == id) return &e;
    return nullptr;
}

namespace {

std::string now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char buf[64];
    std::tm tm_utc;
    gmtime_r(&tt, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

} // namespace

void RunManifest::write(const std::filesystem::path& path) const {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp);
        os << "id = " << id << "\n";
        os << "verdict = " << verdict_label(verdict) << "\n";
        os << "seconds = " << format_double(seconds) << "\n";
        os << "seed = " << seed << "\n";
        os << "timestamp = " << timestamp << "\n";
        os << "version = " << version << "\n";
        for (const auto& [k, v] : config_echo) os << "config." << k << " = " << v << "\n";
        if (!error.empty()) os << "error = " << error << "\n";
        std::istringstream ss(summary);
        std::string line;
        while (std::getline(ss, line)) os << "summary = " << line << "\n";
    }
    std::filesystem::rename(tmp, path);
}

RunManifest run_experiment(const ExperimentConfig& cfg_in, const std::filesystem::path& out_dir) {
    const ExperimentEntry* entry = find_experiment(cfg_in.id);
    if (!entry) throw ConfigError("unknown experiment id '" + cfg_in.id + "'");

    ExperimentConfig cfg;
    cfg.id = cfg_in.id;
    cfg.kv = entry->defaults;
    for (const auto& [k, v] : cfg_in.kv) cfg.kv[k] = v;

    const std::filesystem::path dir = out_dir / cfg.id;
    std::filesystem::create_directories(dir);

    RunManifest man;
    man.id = cfg.id;
    man.seed = cfg.get_seed();
    man.version = kVersion;
    man.timestamp = now_iso8601();
    man.config_echo = cfg.kv;

    const auto t0 = std::chrono::steady_clock::now();
    EstimateReport rep;
    try {
        rep = entry->run(cfg, dir);
    } catch (const std::exception& e) {
        man.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        man.verdict = Verdict::fail;
        man.error = e.what();
        man.write(dir / "manifest.txt");
        return man;
    }
    man.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    man.verdict = rep.verdict;
    man.summary = rep.summary();

    {
        std::ofstream os(dir / "report.csv");
        rep.write_csv(os);
    }
    man.write(dir / "manifest.txt");
    return man;
}

bool run_many(const std::vector<std::string>& ids_in, const std::filesystem::path& out_dir,
              const std::map<std::string, std::string>& overrides, std::ostream& log) {
    std::vector<std::string> ids = ids_in;
    if (ids.size() == 1 && ids[0] == "all") {
        ids.clear();
        for (const auto& e : registry()) ids.push_back(e.id);
    }
    for (const auto& id : ids)
        if (!find_experiment(id)) throw ConfigError("unknown experiment id '" + id + "'");

    std::filesystem::create_directories(out_dir);
    std::vector<RunManifest> manifests(ids.size());
    std::atomic<std::size_t> cursor{0};
    std::mutex log_mutex;

    const int workers = std::min<int>(worker_count(), static_cast<int>(ids.size()));
    auto worker = [&] {
        while (true) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= ids.size()) break;
            ExperimentConfig cfg;
            cfg.id = ids[i];
            cfg.kv = overrides;
            manifests[i] = run_experiment(cfg, out_dir);
            std::lock_guard<std::mutex> lock(log_mutex);
            log << "[" << verdict_label(manifests[i].verdict) << "] " << ids[i] << "  ("
                << format_double(manifests[i].seconds) << " s)";
            if (!manifests[i].error.empty()) log << "  error: " << manifests[i].error;
            log << "\n";
        }
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    // aggregate in id order
    std::vector<std::size_t> order(ids.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
    std::ofstream agg(out_dir / "manifest.txt");
    bool all_pass = true;
    for (std::size_t i : order) {
        agg << ids[i] << " = " << verdict_label(manifests[i].verdict) << "\n";
        if (manifests[i].verdict != Verdict::pass) all_pass = false;
    }
    return all_pass;
}

std::string list_experiments(const std::string& module_filter) {
    std::ostringstream os;
    for (const auto& e : registry()) {
        if (!module_filter.empty() && e.module != module_filter) continue;
        os << e.id;
        for (std::size_t pad = e.id.size(); pad < 28; ++pad) os << ' ';
        os << " [" << e.module << "] " << e.description << "  {" << e.anchor << "}\n";
    }
    return os.str();
}

// ---- plot views -----------------------------------------------------------------

namespace {

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("plot view: cannot open " + path.string());
    CsvTable t;
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::string tok;
        std::stringstream ss(s);
        while (std::getline(ss, tok, ',')) out.push_back(tok);
        if (!s.empty() && s.back() == ',') out.push_back("");
        return out;
    };
    if (std::getline(is, line)) t.columns = split(line);
    while (std::getline(is, line))
        if (!line.empty()) t.rows.push_back(split(line));
    return t;
}

struct ViewSpec {
    std::string row_name;
    std::vector<std::string> axis_columns;
};

const std::map<std::string, ViewSpec>& view_specs() {
    static const std::map<std::string, ViewSpec> specs = {
        {"holder", {"moment", {"increment"}}},
        {"mlevel", {"", {"m"}}},          // any row carrying an m axis
        {"picard", {"residual", {"iteration"}}},
        {"cauchy", {"distance", {"pair"}}},
    };
    return specs;
}

} // namespace

void emit_plot_data(const std::vector<std::filesystem::path>& manifest_dirs,
                    const std::string& view, std::ostream& os) {
    auto it = view_specs().find(view);
    if (it == view_specs().end()) throw ConfigError("unknown plot view '" + view + "'");
    const ViewSpec& spec = it->second;

    os << "experiment,seed";
    for (const auto& a : spec.axis_columns) os << "," << a;
    os << ",name,value,se\n";

    // gather experiment subdirectories (a dir is itself a run when it holds
    // a report.csv)
    std::vector<std::filesystem::path> runs;
    for (const auto& dir : manifest_dirs) {
        if (std::filesystem::exists(dir / "report.csv")) {
            runs.push_back(dir);
            continue;
        }
        if (!std::filesystem::is_directory(dir)) continue;
        std::vector<std::filesystem::path> subs;
        for (const auto& e : std::filesystem::directory_iterator(dir))
            if (e.is_directory() && std::filesystem::exists(e.path() / "report.csv"))
                subs.push_back(e.path());
        std::sort(subs.begin(), subs.end());
        runs.insert(runs.end(), subs.begin(), subs.end());
    }

    for (const auto& run : runs) {
        std::string id = run.filename().string();
        std::string seed = "";
        if (std::filesystem::exists(run / "manifest.txt")) {
            const auto kv = parse_config_file(run / "manifest.txt");
            if (kv.count("id")) id = kv.at("id");
            if (kv.count("seed")) seed = kv.at("seed");
        }
        const CsvTable t = read_csv(run / "report.csv");
        std::map<std::string, std::size_t> col;
        for (std::size_t i = 0; i < t.columns.size(); ++i) col[t.columns[i]] = i;
        if (!col.count("name") || !col.count("value"))
            throw ConfigError("plot view: report.csv missing name/value columns in " +
                              run.string());
        bool any_axis = true;
        for (const auto& a : spec.axis_columns) any_axis = any_axis && col.count(a);
        if (!any_axis) continue;  // this run does not carry the view's columns

        for (const auto& row : t.rows) {
            const std::string& name = row[col["name"]];
            if (!spec.row_name.empty() && name != spec.row_name) continue;
            bool axes_present = true;
            for (const auto& a : spec.axis_columns)
                if (row[col[a]].empty()) axes_present = false;
            if (!axes_present) continue;
            os << id << "," << seed;
            for (const auto& a : spec.axis_columns) os << "," << row[col[a]];
            os << "," << name << "," << row[col["value"]] << ","
               << (col.count("se") ? row[col["se"]] : "");
            os << "\n";
        }
    }
}

} // namespace sflab::harness
