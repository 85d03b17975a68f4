#include "ionspin/graphs.hpp"
#include "ionspin/io.hpp"

#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <set>

using namespace ionspin;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("ionspin_graphs_" + name);
    fs::create_directories(p);
    return p;
}

} // namespace

TEST_CASE("square lattice with wraparound: degree 4, 2N edges", "[graphs]")
{
    const TargetGraph g = square_lattice_pbc(5, 5, 2.0);
    CHECK(g.n == 25);
    CHECK(g.edge_count() == 50);
    for (int i = 0; i < 25; ++i)
        CHECK(g.degree(i) == 4);
    CHECK(g.j_target(0, 1) == 2.0);
    CHECK(g.j_target(0, 5) == 2.0);
    CHECK(g.j_target(0, 4) == 2.0);  // wrap in the row
    CHECK(g.j_target(0, 20) == 2.0); // wrap in the column
    CHECK(g.j_target(0, 6) == 0.0);
    CHECK((g.j_target - g.j_target.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("2-wide square lattice merges duplicate wrap bonds", "[graphs]")
{
    const TargetGraph g = square_lattice_pbc(2, 3, 1.0);
    CHECK(g.j_target(0, 3) == 2.0); // up and down neighbour coincide
    CHECK(g.j_target(0, 1) == 1.0);
}

TEST_CASE("kagome: degree 4, two triangles per cell, frustrated", "[graphs]")
{
    const TargetGraph g = kagome_pbc(4, 3, 1.0);
    CHECK(g.n == 36);
    CHECK(g.edge_count() == 72);
    for (int i = 0; i < 36; ++i)
        CHECK(g.degree(i) == 4);
    // every edge joins sites at unit distance in the embedding (up to the wrap)
    const auto& xy = *g.embedding;
    int short_edges = 0;
    for (int a = 0; a < 36; ++a)
        for (int b = a + 1; b < 36; ++b)
            if (g.j_target(a, b) != 0.0 && std::hypot(xy[a][0] - xy[b][0], xy[a][1] - xy[b][1]) < 1.0 + 1e-9)
                ++short_edges;
    CHECK(short_edges > 36);
    // count triangles: each edge lies in exactly one triangle
    int triangles = 0;
    for (int a = 0; a < 36; ++a)
        for (int b = a + 1; b < 36; ++b)
            for (int c = b + 1; c < 36; ++c)
                if (g.j_target(a, b) != 0.0 && g.j_target(b, c) != 0.0 && g.j_target(a, c) != 0.0)
                    ++triangles;
    CHECK(triangles == 24);
}

TEST_CASE("chain and uniform generators", "[graphs]")
{
    const TargetGraph c = chain_nn(6, 1.5);
    CHECK(c.edge_count() == 5);
    CHECK(c.degree(0) == 1);
    CHECK(c.degree(3) == 2);
    CHECK(chain_nn(6, 1.0, true).edge_count() == 6);
    CHECK(chain_nn(2, 1.0, true).j_target(0, 1) == 1.0);
    const TargetGraph u = uniform_full(5, -1.0);
    CHECK(u.edge_count() == 10);
    CHECK(u.j_target.diagonal().cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(chain_nn(1, 1.0), ValidationError);
    CHECK_THROWS_AS(square_lattice_pbc(1, 4, 1.0), ValidationError);
}

TEST_CASE("user matrices must be symmetric with zero diagonal", "[graphs]")
{
    Eigen::MatrixXd m = oracle::random_symmetric(5, 1);
    CHECK_NOTHROW(graph_from_matrix(m));
    Eigen::MatrixXd bad = m;
    bad(1, 1) = 0.1;
    CHECK_THROWS_AS(graph_from_matrix(bad), ValidationError);
    bad = m;
    bad(0, 3) += 1e-3;
    CHECK_THROWS_AS(graph_from_matrix(bad), ValidationError);
    bad = m;
    bad(0, 3) += 1e-13;
    CHECK_NOTHROW(graph_from_matrix(bad));
}

TEST_CASE("CSV round trip is exact at 17 digits", "[graphs][io]")
{
    const fs::path dir = scratch("csv");
    TargetGraph g = graph_from_matrix(oracle::random_symmetric(7, 4, hz_to_rad(123.456)), "rand");
    g.embedding = std::vector<std::array<double, 2>>(7, {0.5, -1.0});
    io::write_graph(dir / "rand", g);
    const TargetGraph back = io::graph_from_file(dir / "rand.csv");
    CHECK(back.name == "rand");
    CHECK(back.embedding.has_value());
    // Hz on disk: exact decimal round trip of j/2pi, then times 2pi
    CHECK((back.j_target - g.j_target).cwiseAbs().maxCoeff() <= 4e-16 * g.j_target.cwiseAbs().maxCoeff());
    const Eigen::MatrixXd raw = io::read_square_csv(dir / "rand.csv");
    CHECK((raw - g.j_target * (1.0 / two_pi)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("malformed CSV is rejected with a location", "[io]")
{
    CHECK_THROWS_AS(io::parse_matrix_csv("1,2\n3\n"), ValidationError);
    CHECK_THROWS_AS(io::parse_matrix_csv("1,x\n"), ValidationError);
    CHECK_THROWS_AS(io::parse_matrix_csv("# only a comment\n"), ValidationError);
    const Eigen::MatrixXd m = io::parse_matrix_csv("# header\n1,2\n\n3,4\r\n");
    CHECK(m.rows() == 2);
    CHECK(m(1, 1) == 4.0);
    try {
        io::parse_matrix_csv("1,2\n3,oops\n", "f.csv");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("f.csv:2") != std::string::npos);
    }
}
