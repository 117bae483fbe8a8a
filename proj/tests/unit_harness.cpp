#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "sflab/errors.hpp"
#include "sflab/field_io.hpp"
#include "sflab/harness.hpp"
#include "sflab/flow.hpp"
#include "sflab/drift.hpp"
#include "sflab/estimators.hpp"

using namespace sflab;
using namespace sflab::harness;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("sflab_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

} // namespace

TEST_CASE("config file parsing") {
    fs::path dir = temp_dir("cfg");
    {
        std::ofstream os(dir / "a.cfg");
        os << "# comment line\n";
        os << "drift = singular\n";
        os << "gamma = 0.5   # trailing comment\n";
        os << "  paths =  250\n";
        os << "\n";
        os << "novalue\n";
    }
    auto kv = parse_config_file(dir / "a.cfg");
    CHECK(kv.at("drift") == "singular");
    CHECK(kv.at("gamma") == "0.5");
    CHECK(kv.at("paths") == "250");
    CHECK(kv.size() == 3);
    CHECK_THROWS_AS(parse_config_file(dir / "missing.cfg"), ConfigError);

    ExperimentConfig cfg;
    cfg.kv = kv;
    CHECK(cfg.get_double("gamma", 0.0) == 0.5);
    CHECK(cfg.get_int("paths", 0) == 250);
    CHECK(cfg.get_string("drift") == "singular");
    CHECK(cfg.get_int("absent", 7) == 7);
    cfg.kv["paths"] = "abc";
    CHECK_THROWS_AS(cfg.get_int("paths", 0), ConfigError);
}

TEST_CASE("registry metadata") {
    const auto& reg = registry();
    CHECK(reg.size() >= 18);
    std::set<std::string> modules, ids;
    for (const auto& e : reg) {
        CHECK(!e.description.empty());
        CHECK(!e.anchor.empty());
        CHECK(ids.insert(e.id).second);  // unique ids
        modules.insert(e.module);
    }
    for (const char* m : {"norms_and_drifts", "flow_sim", "kolmogorov_pde", "estimator_suite",
                          "lagrangian_ns"})
        CHECK(modules.count(m) == 1);

    // module filter lists only that module
    std::istringstream list(list_experiments("lagrangian_ns"));
    std::string line;
    int count = 0;
    while (std::getline(list, line)) {
        CHECK(line.find("[lagrangian_ns]") != std::string::npos);
        ++count;
    }
    CHECK(count >= 5);
}

TEST_CASE("run_experiment: unknown id and malformed config") {
    fs::path dir = temp_dir("run_err");
    ExperimentConfig bad;
    bad.id = "does.not.exist";
    CHECK_THROWS_AS(run_experiment(bad, dir), ConfigError);

    // dt that does not divide the window: config error before outputs
    ExperimentConfig cfg;
    cfg.id = "pde.heat_mode";
    cfg.kv["dt"] = "0.3";
    cfg.kv["window"] = "0.5";
    RunManifest man = run_experiment(cfg, dir);
    CHECK(man.verdict == Verdict::fail);
    CHECK(!man.error.empty());
    CHECK_FALSE(fs::exists(dir / "pde.heat_mode" / "report.csv"));
    CHECK(fs::exists(dir / "pde.heat_mode" / "manifest.txt"));
}

TEST_CASE("run_experiment writes report and manifest") {
    fs::path dir = temp_dir("run_ok");
    ExperimentConfig cfg;
    cfg.id = "lps.classify";
    RunManifest man = run_experiment(cfg, dir);
    CHECK(man.verdict == Verdict::pass);
    CHECK(fs::exists(dir / "lps.classify" / "report.csv"));
    auto kv = parse_config_file(dir / "lps.classify" / "manifest.txt");
    CHECK(kv.at("id") == "lps.classify");
    CHECK(kv.at("verdict") == "pass");
    CHECK(kv.at("version") == std::string(kVersion));
}

TEST_CASE("reproducibility: identical config gives identical csv bytes") {
    fs::path d1 = temp_dir("rep1"), d2 = temp_dir("rep2");
    ExperimentConfig cfg;
    cfg.id = "flow.composition";
    cfg.kv["paths"] = "64";
    setenv("SFLAB_WORKERS", "1", 1);
    run_experiment(cfg, d1);
    setenv("SFLAB_WORKERS", "3", 1);
    run_experiment(cfg, d2);
    setenv("SFLAB_WORKERS", "1", 1);
    std::ifstream a(d1 / "flow.composition" / "report.csv", std::ios::binary);
    std::ifstream b(d2 / "flow.composition" / "report.csv", std::ios::binary);
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    CHECK(sa.str() == sb.str());
    CHECK(!sa.str().empty());
}

TEST_CASE("plot views on synthetic manifests") {
    fs::path dir = temp_dir("plot");
    auto make_run = [&](const std::string& id, int seed, const std::string& csv) {
        fs::create_directories(dir / id);
        std::ofstream(dir / id / "report.csv") << csv;
        std::ofstream(dir / id / "manifest.txt")
            << "id = " << id << "\nseed = " << seed << "\nverdict = pass\n";
    };
    make_run("holder.a", 1,
             "name,increment,value,se\n"
             "moment,0.016,1e-4,1e-6\n"
             "moment,0.032,4e-4,1e-6\n"
             "moment,0.064,1.6e-3,1e-6\n"
             "moment,0.128,6.4e-3,1e-6\n"
             "moment,0.256,2.5e-2,1e-6\n");
    make_run("holder.b", 2,
             "name,increment,value,se\n"
             "moment,0.016,2e-4,1e-6\n"
             "moment,0.032,8e-4,1e-6\n");

    std::ostringstream os;
    emit_plot_data({dir}, "holder", os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "experiment,seed,increment,name,value,se");
    int rows = 0, seed1 = 0, seed2 = 0;
    while (std::getline(is, line)) {
        ++rows;
        if (line.rfind("holder.a,1", 0) == 0) ++seed1;
        if (line.rfind("holder.b,2", 0) == 0) ++seed2;
    }
    CHECK(rows == 7);
    CHECK(seed1 == 5);
    CHECK(seed2 == 2);

    // empty manifest set: header only
    std::ostringstream empty;
    emit_plot_data({}, "holder", empty);
    CHECK(empty.str() == "experiment,seed,increment,name,value,se\n");

    CHECK_THROWS_AS(emit_plot_data({dir}, "nope", empty), ConfigError);
}

TEST_CASE("binary field io round trip") {
    fs::path dir = temp_dir("io");
    TorusGrid g(3, 8);
    SpaceTimeField f;
    for (int i = 0; i < 3; ++i) {
        f.times.push_back(0.125 * i);
        f.frames.push_back(PeriodicField::sample_vector(g, [i](const Vec& x) {
            return Vec{std::sin(x[0] + i), std::cos(2 * x[1]), x[2] > 3.0 ? 1.0 : -0.5};
        }));
    }
    io::write_field(dir / "f.sfld", f);
    SpaceTimeField back = io::read_field(dir / "f.sfld");
    REQUIRE(back.times.size() == 3);
    CHECK(back.times[1] == f.times[1]);
    for (int t = 0; t < 3; ++t)
        for (std::size_t i = 0; i < g.size(); ++i)
            for (int c = 0; c < 3; ++c)
                CHECK(back.frames[t].value(i, c) == f.frames[t].value(i, c));

    CHECK_THROWS_AS(io::read_field(dir / "missing.sfld"), DataError);
}

TEST_CASE("ensemble export helpers") {
    flow::FlowConfig fc;
    fc.t = 0.25;
    fc.dt = 1.25e-2;
    fc.n_paths = 32;
    fc.points = estimators::torus_point_grid(3, 2);
    fc.checkpoints = {0.125, 0.25};
    flow::FlowEnsemble ens(norms::ou_drift(3), fc);

    std::ostringstream os;
    io::write_ensemble_csv(os, ens);
    std::istringstream is(os.str());
    std::string header;
    std::getline(is, header);
    CHECK(header.rfind("checkpoint,time,mean0", 0) == 0);
    int rows = 0;
    std::string line;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 2);

    SpaceTimeField mf = io::ensemble_mean_field(ens, 2);
    CHECK(mf.times.size() == 2);
    CHECK(mf.frames[0].components() == 3);
}
