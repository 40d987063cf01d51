#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "ipsavg/experiments.hpp"
#include "ipsavg/io.hpp"
#include "ipsavg/sparse.hpp"

using namespace ips;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir(const std::string& name) {
        path = fs::temp_directory_path() / name;
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

ExperimentConfig minimal(ExperimentKind kind) {
    ExperimentConfig cfg;
    cfg.experiment = kind;
    cfg.seed = 7;
    return cfg;
}

}  // namespace

TEST_CASE("config round-trips through JSON with a stable hash") {
    ExperimentConfig cfg = minimal(ExperimentKind::averaging_sweep);
    cfg.model.delta = 0.1;
    cfg.epsilons = {1.0, 0.5};
    const std::string dumped = cfg.canonical_json();
    const ExperimentConfig back = parse_config(dumped);
    CHECK(back.canonical_json() == dumped);
    CHECK(back.hash() == cfg.hash());

    ExperimentConfig other = cfg;
    other.seed = 8;
    CHECK(other.hash() != cfg.hash());
}

TEST_CASE("validation rules") {
    SUBCASE("default configs are clean") {
        for (ExperimentKind k :
             {ExperimentKind::ibp_test, ExperimentKind::averaging_sweep,
              ExperimentKind::delta_sweep, ExperimentKind::lyapunov}) {
            ExperimentConfig cfg = minimal(k);
            cfg.model.delta = 0.1;
            for (const auto& v : validate(cfg)) REQUIRE(v.warning);
        }
    }
    SUBCASE("N > M names truncation.N") {
        ExperimentConfig cfg = minimal(ExperimentKind::averaging_sweep);
        cfg.truncation.M = 3;
        cfg.truncation.N = 5;
        bool found = false;
        for (const auto& v : validate(cfg))
            if (!v.warning && v.path == "truncation.N") found = true;
        CHECK(found);
    }
    SUBCASE("epsilon must be positive") {
        ExperimentConfig cfg = minimal(ExperimentKind::mc_compare);
        cfg.env.epsilon = 0.0;
        bool found = false;
        for (const auto& v : validate(cfg))
            if (!v.warning && v.path == "env.epsilon" &&
                v.message == "epsilon must be positive")
                found = true;
        CHECK(found);
    }
    SUBCASE("dispersal kernel must be a probability density") {
        ExperimentConfig cfg = minimal(ExperimentKind::averaging_sweep);
        cfg.model.a_plus.amplitude = 2.0;
        bool found = false;
        for (const auto& v : validate(cfg))
            if (!v.warning && v.path == "model.a_plus") found = true;
        CHECK(found);
    }
    SUBCASE("wide kernels only warn") {
        ExperimentConfig cfg = minimal(ExperimentKind::averaging_sweep);
        cfg.model.kappa.range = 0.7;
        bool warned = false;
        for (const auto& v : validate(cfg))
            if (v.warning && v.path == "model.kappa.range") warned = true;
        CHECK(warned);
    }
}

TEST_CASE("run_experiment writes hashed artifacts and a summary") {
    TempDir tmp("ipsavg_test_run");
    ExperimentConfig cfg = minimal(ExperimentKind::ibp_test);
    cfg.samples = 4000;  // small but plenty for a smoke pass
    const RunResult res = run_experiment(cfg, tmp.path.string());
    CHECK(res.exit_code == 0);
    CHECK(res.pass);
    REQUIRE(res.artifacts.size() == 1);
    const auto stanza = read_csv_stanza(res.artifacts[0]);
    CHECK(stanza.at("config_hash") == cfg.hash());
    CHECK(stanza.at("experiment") == "ibp-test");
    CHECK(stanza.at("seed") == "7");

    std::string detail;
    CHECK(verify_artifacts(cfg, tmp.path.string(), detail));
    ExperimentConfig tampered = cfg;
    tampered.samples = 4001;
    CHECK_FALSE(verify_artifacts(tampered, tmp.path.string(), detail));
}

TEST_CASE("identical (config, seed) runs are byte-identical") {
    TempDir a("ipsavg_test_rep_a"), b("ipsavg_test_rep_b");
    ExperimentConfig cfg = minimal(ExperimentKind::delta_sweep);
    cfg.model.m0 = 0.1;
    cfg.model.lambda0 = 0.2;
    cfg.model.a_minus.amplitude = 0.05;
    cfg.model.kappa.amplitude = 0.1;
    cfg.model.psi.amplitude = 0.05;
    cfg.initial_population = 1;
    cfg.deltas = {0.3, 0.1};
    const RunResult ra = run_experiment(cfg, a.path.string(), Exec::parallel);
    const RunResult rb = run_experiment(cfg, b.path.string(), Exec::serial);
    REQUIRE(ra.artifacts.size() == rb.artifacts.size());
    for (std::size_t i = 0; i < ra.artifacts.size(); ++i)
        REQUIRE(read_file(ra.artifacts[i]) == read_file(rb.artifacts[i]));
}

TEST_CASE("numeric failure surfaces as exit code 3") {
    TempDir tmp("ipsavg_test_err");
    ExperimentConfig cfg = minimal(ExperimentKind::mc_compare);
    cfg.truncation.M = 4;        // smaller than the initial population
    cfg.initial_population = 8;
    cfg.replicas = 10;
    const RunResult res = run_experiment(cfg, tmp.path.string());
    CHECK(res.exit_code == 3);
    CHECK(res.summary_json.find("error") != std::string::npos);
}

TEST_CASE("generator triplet CSV export") {
    TempDir tmp("ipsavg_test_triplets");
    const SparseGenerator g = SparseGenerator::from_triplets(
        2, Orientation::rates, {Triplet{1, 0, 0.25}}, true);
    const std::string path = (tmp.path / "gen.csv").string();
    g.write_triplet_csv(path, {{"experiment", "unit"}});
    const std::string text = read_file(path);
    CHECK(text == "# experiment=unit\nrow,col,rate\n1,0,0.25\n1,1,-0.25\n");
}

TEST_CASE("experiment names round-trip") {
    for (const char* name :
         {"ibp-test", "lyapunov", "averaging-sweep", "delta-sweep",
          "mc-compare", "moment-bound", "resolvent-check",
          "stochasticity-probe"}) {
        CHECK(to_string(experiment_kind_from_string(name)) == name);
    }
    CHECK_THROWS(experiment_kind_from_string("nope"));
}
