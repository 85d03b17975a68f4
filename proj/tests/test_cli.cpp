// End-to-end tests that drive the ionspin executable.
#include "ionspin/config.hpp"
#include "ionspin/io.hpp"
#include "ionspin/pipeline.hpp"

#include "json.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <sys/wait.h>

using namespace ionspin;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path work = fs::temp_directory_path() / "ionspin_cli_tests";

int run_cli(const std::string& args, const fs::path& stdout_file = {})
{
    std::string cmd = std::string("\"") + IONSPIN_CLI + "\" " + args;
    cmd += stdout_file.empty() ? " > /dev/null" : " > \"" + stdout_file.string() + "\"";
    cmd += " 2> \"" + (work / "stderr.txt").string() + "\"";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const std::string& name, const json& j)
{
    fs::create_directories(work);
    const fs::path p = work / (name + ".json");
    std::ofstream(p) << j.dump(2);
    return p;
}

json base_config(const std::string& out)
{
    return json{{"seed", 5},
                {"trap", {{"n_ions", 6}, {"omega_com_hz", 5e6}, {"axial", {{"omega_z_hz", 900e3}}}}},
                {"graph", {{"generator", "chain_nn"}, {"n", 6}, {"j0_hz", 10.0}}},
                {"f_s", 0.1},
                {"solver", {{"n_starts", 2}}},
                {"epsilon", 1e-5},
                {"outputs", out}};
}

std::map<std::string, std::string> snapshot(const fs::path& dir)
{
    std::map<std::string, std::string> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file())
            files[e.path().filename().string()] = io::read_text(e.path());
    return files;
}

} // namespace

TEST_CASE("design run writes every artifact and reruns byte-identically", "[cli]")
{
    const fs::path cfg = write_config("base", base_config("out_base"));
    REQUIRE(run_cli("solve --config " + cfg.string()) == 0);
    const fs::path out = work / "out_base";
    for (const char* f : {"positions.csv", "modes.csv", "schedule.csv", "omega.csv", "j_attained.csv", "residual.txt",
                          "validity.txt", "errors.txt", "manifest.json"})
        CHECK(fs::exists(out / f));
    const auto first = snapshot(out);
    REQUIRE(run_cli("run --config " + cfg.string()) == 0);
    CHECK(snapshot(out) == first);

    const json manifest = json::parse(first.at("manifest.json"));
    CHECK(manifest["software"]["version"] == version);
    CHECK(manifest["seed"] == 5);

    // verify recomputes from omega.csv
    CHECK(run_cli("verify --config " + cfg.string()) == 0);
    CHECK(run_cli("verify --config " + cfg.string() + " --tol 1e-300") == 2);
}

TEST_CASE("every config field reaches the manifest or an artifact", "[cli]")
{
    const fs::path base_cfg = write_config("p_base", base_config("p_base"));
    REQUIRE(run_cli("solve --config " + base_cfg.string()) == 0);
    const auto base = snapshot(work / "p_base");
    const json base_resolved = json::parse(base.at("manifest.json"))["resolved"];

    // field path -> perturbed value
    const std::vector<std::pair<json::json_pointer, json>> edits{
        {json::json_pointer("/seed"), 6},
        {json::json_pointer("/trap/omega_com_hz"), 4.9e6},
        {json::json_pointer("/trap/axial/omega_z_hz"), 850e3},
        {json::json_pointer("/trap/ion_mass_amu"), 40.0},
        {json::json_pointer("/trap/delta_k_per_m"), 3e7},
        {json::json_pointer("/trap/qubit_freq_hz"), 12.6e9},
        {json::json_pointer("/graph/j0_hz"), 11.0},
        {json::json_pointer("/graph/n"), 7},
        {json::json_pointer("/f_s"), 0.2},
        {json::json_pointer("/budget_hz"), 1e6},
        {json::json_pointer("/solver/n_starts"), 3},
        {json::json_pointer("/solver/residual_tol"), 1e-9},
        {json::json_pointer("/solver/max_iter"), 200},
        {json::json_pointer("/solver/stage_iter"), 10},
        {json::json_pointer("/epsilon"), 2e-5},
        {json::json_pointer("/sensitivity"), json{{"delta", 1e-4}, {"trials", 100}}},
    };
    int k = 0;
    for (const auto& [ptr, value] : edits) {
        json cfg = base_config("p_" + std::to_string(k));
        cfg[ptr] = value;
        if (ptr.to_string() == "/graph/n")
            cfg["trap"]["n_ions"] = 7;
        const fs::path path = write_config("p_" + std::to_string(k), cfg);
        INFO(ptr.to_string());
        REQUIRE(run_cli("solve --config " + path.string()) == 0);
        const auto files = snapshot(work / ("p_" + std::to_string(k)));
        const json resolved = json::parse(files.at("manifest.json"))["resolved"];
        CHECK(resolved != base_resolved);
        ++k;
    }
    // outputs only moves the artifacts; the resolved parameters are unchanged
    json moved = base_config("p_moved");
    REQUIRE(run_cli("solve --config " + write_config("p_moved", moved).string()) == 0);
    const auto moved_files = snapshot(work / "p_moved");
    CHECK(json::parse(moved_files.at("manifest.json"))["resolved"] == base_resolved);
    CHECK(moved_files.at("omega.csv") == base.at("omega.csv"));
}

TEST_CASE("empty graph gives a zero design", "[cli]")
{
    json cfg = base_config("out_empty");
    cfg["graph"]["j0_hz"] = 0.0;
    REQUIRE(run_cli("solve --config " + write_config("empty", cfg).string()) == 0);
    const Eigen::MatrixXd omega = io::read_square_csv(work / "out_empty" / "omega.csv");
    CHECK(omega.cwiseAbs().maxCoeff() == 0.0);
    CHECK(io::read_text(work / "out_empty" / "residual.txt").find("\nrelative_residual 0\n") != std::string::npos);
}

TEST_CASE("validation failures exit with 1 before any work", "[cli]")
{
    json bad = base_config("out_bad");
    bad["f_s"] = 1.5;
    CHECK(run_cli("solve --config " + write_config("bad_fs", bad).string()) == 1);
    CHECK_FALSE(fs::exists(work / "out_bad"));
    json typo = base_config("out_bad");
    typo["solver"]["n_start"] = 3;
    CHECK(run_cli("solve --config " + write_config("bad_key", typo).string()) == 1);
    CHECK(io::read_text(work / "stderr.txt").find("n_start") != std::string::npos);
    json mismatch = base_config("out_bad");
    mismatch["graph"]["n"] = 5;
    CHECK(run_cli("solve --config " + write_config("bad_n", mismatch).string()) == 1);
    CHECK(io::read_text(work / "stderr.txt").find("stage graph") != std::string::npos);
    CHECK(run_cli("modes") == 1);
    CHECK(run_cli("bogus") == 1);
    CHECK(run_cli("graph --type hexagon --n 4") == 1);
}

TEST_CASE("numerical failures exit with 2 and name the stage", "[cli]")
{
    json cfg = base_config("out_num");
    cfg["trap"]["axial"] = {{"omega_z_hz", 4.9e6}}; // zigzag
    CHECK(run_cli("solve --config " + write_config("zigzag", cfg).string()) == 2);
    CHECK(io::read_text(work / "stderr.txt").find("stage modes") != std::string::npos);
}

TEST_CASE("standalone subcommands", "[cli]")
{
    fs::create_directories(work);
    REQUIRE(run_cli("modes --n 10", work / "modes.csv") == 0);
    CHECK(io::read_matrix_csv(work / "modes.csv").rows() == 10);

    REQUIRE(run_cli("graph --type square --rows 3 --cols 3 --j0-hz 2 --out " + (work / "sq").string()) == 0);
    const TargetGraph g = io::graph_from_file(work / "sq.csv");
    CHECK(g.n == 9);
    CHECK(g.edge_count() == 18);

    std::ofstream(work / "tri.csv") << "0,1,1\n1,0,1\n1,1,0\n";
    REQUIRE(run_cli("groundstate --j " + (work / "tri.csv").string(), work / "gs.txt") == 0);
    CHECK(io::read_text(work / "gs.txt").find("degeneracy 6") != std::string::npos);

    std::ofstream(work / "pair.csv") << "0,100\n100,0\n";
    REQUIRE(run_cli("dynamics --j " + (work / "pair.csv").string() + " --t 1e-3 --steps 8 --observable sz --pair 0",
                    work / "dyn.csv") == 0);
    std::string text = io::read_text(work / "dyn.csv");
    const Eigen::MatrixXd series = io::parse_matrix_csv(text.substr(text.find('\n') + 1));
    REQUIRE(series.rows() == 9);
    for (Eigen::Index r = 0; r < series.rows(); ++r)
        CHECK_THAT(series(r, 1), Catch::Matchers::WithinAbs(std::cos(2.0 * two_pi * 100.0 * series(r, 0)), 1e-12));
}

TEST_CASE("plot data mirrors the artifacts", "[cli]")
{
    const fs::path cfg = write_config("plot", base_config("out_plot"));
    REQUIRE(run_cli("solve --config " + cfg.string()) == 0);
    const fs::path out = work / "out_plot";
    REQUIRE(run_cli("plotdata --dir " + out.string()) == 0);
    const Eigen::MatrixXd omega = io::read_square_csv(out / "omega.csv");
    std::string heat = io::read_text(out / "plot" / "omega_heatmap.csv");
    const Eigen::MatrixXd h = io::parse_matrix_csv(heat.substr(heat.find('\n') + 1));
    REQUIRE(h.rows() == omega.size());
    for (Eigen::Index r = 0; r < h.rows(); ++r)
        CHECK(h(r, 2) == omega(static_cast<Eigen::Index>(h(r, 0)), static_cast<Eigen::Index>(h(r, 1))));
    std::string spec = io::read_text(out / "plot" / "spectrum.csv");
    CHECK(io::parse_matrix_csv(spec.substr(spec.find('\n') + 1)).rows() == 6);
    CHECK(run_cli("plotdata --dir " + work.string()) == 1);
}

TEST_CASE("scaling runs from a config", "[cli]")
{
    json cfg = base_config("out_scaling");
    cfg["budget_hz"] = 1e6;
    cfg["scaling"] = {{"family", "chain"}, {"n_min", 3}, {"n_max", 5}};
    const fs::path path = write_config("scaling", cfg);
    REQUIRE(run_cli("run --scaling --config " + path.string()) == 0);
    const fs::path out = work / "out_scaling";
    const std::string first = io::read_text(out / "scaling.csv");
    REQUIRE(run_cli("run --scaling --config " + path.string()) == 0);
    CHECK(io::read_text(out / "scaling.csv") == first);
    REQUIRE(run_cli("plotdata --dir " + out.string()) == 0);
    std::string ll = io::read_text(out / "plot" / "scaling_loglog.csv");
    const Eigen::MatrixXd m = io::parse_matrix_csv(ll.substr(ll.find('\n') + 1));
    REQUIRE(m.rows() == 3);
    for (Eigen::Index r = 0; r < 3; ++r) {
        CHECK_THAT(m(r, 2), Catch::Matchers::WithinAbs(std::log10(m(r, 0)), 1e-15));
        CHECK_THAT(m(r, 3), Catch::Matchers::WithinAbs(std::log10(m(r, 1)), 1e-15));
    }

    cfg["scaling"]["n_max"] = 3;
    cfg["outputs"] = "out_scaling1";
    REQUIRE(run_cli("run --scaling --config " + write_config("scaling1", cfg).string()) == 0);
    CHECK(io::read_text(work / "out_scaling1" / "slope.txt").find("slope none") != std::string::npos);
}
