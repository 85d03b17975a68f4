#ifndef IONSPIN_GRAPHS_HPP
#define IONSPIN_GRAPHS_HPP

#include "ionspin/common.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace ionspin {

/// Desired coupling graph on the ion chain. Positive weights are antiferromagnetic.
struct TargetGraph {
    std::string name;
    int n = 0;
    Eigen::MatrixXd j_target; // rad/s, symmetric, zero diagonal
    std::optional<std::vector<std::array<double, 2>>> embedding;
    std::string index_map = "identity";
    std::string sign_convention = "J > 0 antiferromagnetic (H = sum_{i<j} J_ij sx_i sx_j)";

    int edge_count(double tol = 0.0) const
    {
        int count = 0;
        for (int b = 0; b < n; ++b)
            for (int a = b + 1; a < n; ++a)
                if (std::abs(j_target(a, b)) > tol)
                    ++count;
        return count;
    }

    int degree(int i, double tol = 0.0) const
    {
        int d = 0;
        for (int k = 0; k < n; ++k)
            if (k != i && std::abs(j_target(i, k)) > tol)
                ++d;
        return d;
    }
};

namespace detail {

inline void add_edge(Eigen::MatrixXd& j, int a, int b, double w)
{
    if (a == b)
        return;
    j(a, b) += w;
    j(b, a) += w;
}

} // namespace detail

/// rows x cols square lattice with wraparound, row-major ion index row * cols + col.
/// Wraparound duplicates on 2-wide directions are merged by summing weights.
inline TargetGraph square_lattice_pbc(int rows, int cols, double j0)
{
    require(rows >= 2 && cols >= 2, "square_lattice_pbc: rows and cols must be >= 2");
    TargetGraph g;
    g.n = rows * cols;
    g.name = "square_pbc_" + std::to_string(rows) + "x" + std::to_string(cols);
    g.index_map = "row-major: ion = row * cols + col";
    g.j_target = Eigen::MatrixXd::Zero(g.n, g.n);
    std::vector<std::array<double, 2>> xy(g.n);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const int i = r * cols + c;
            xy[i] = {static_cast<double>(c), static_cast<double>(r)};
            detail::add_edge(g.j_target, i, r * cols + (c + 1) % cols, j0);
            detail::add_edge(g.j_target, i, ((r + 1) % rows) * cols + c, j0);
        }
    }
    g.embedding = std::move(xy);
    return g;
}

/// Kagome lattice: 3-site basis (one up-triangle per cell) on a triangular Bravais
/// lattice with primitive vectors a1 = (2, 0), a2 = (1, sqrt 3) and wraparound.
/// Ion index = 3 * (cy * cells_x + cx) + sublattice, sublattices at 0, a1/2, a2/2.
inline TargetGraph kagome_pbc(int cells_x, int cells_y, double j0)
{
    require(cells_x >= 2 && cells_y >= 2, "kagome_pbc: cells_x and cells_y must be >= 2");
    TargetGraph g;
    g.n = 3 * cells_x * cells_y;
    g.name = "kagome_pbc_" + std::to_string(cells_x) + "x" + std::to_string(cells_y);
    g.index_map = "ion = 3 * (cy * cells_x + cx) + s, s in {A, B, C}";
    g.j_target = Eigen::MatrixXd::Zero(g.n, g.n);
    auto site = [&](int cx, int cy, int s) {
        cx = ((cx % cells_x) + cells_x) % cells_x;
        cy = ((cy % cells_y) + cells_y) % cells_y;
        return 3 * (cy * cells_x + cx) + s;
    };
    const double s3 = std::sqrt(3.0);
    std::vector<std::array<double, 2>> xy(g.n);
    for (int cy = 0; cy < cells_y; ++cy) {
        for (int cx = 0; cx < cells_x; ++cx) {
            const double ox = 2.0 * cx + cy;
            const double oy = s3 * cy;
            xy[site(cx, cy, 0)] = {ox, oy};
            xy[site(cx, cy, 1)] = {ox + 1.0, oy};
            xy[site(cx, cy, 2)] = {ox + 0.5, oy + 0.5 * s3};
            const int a = site(cx, cy, 0);
            const int b = site(cx, cy, 1);
            const int c = site(cx, cy, 2);
            // up triangle
            detail::add_edge(g.j_target, a, b, j0);
            detail::add_edge(g.j_target, b, c, j0);
            detail::add_edge(g.j_target, c, a, j0);
            // down triangle {B(R), A(R + a1), C(R + a1 - a2)}
            const int a_right = site(cx + 1, cy, 0);
            const int c_below = site(cx + 1, cy - 1, 2);
            detail::add_edge(g.j_target, b, a_right, j0);
            detail::add_edge(g.j_target, a_right, c_below, j0);
            detail::add_edge(g.j_target, c_below, b, j0);
        }
    }
    g.embedding = std::move(xy);
    return g;
}

inline TargetGraph chain_nn(int n, double j0, bool periodic = false)
{
    require(n >= 2, "chain_nn: n must be >= 2");
    TargetGraph g;
    g.n = n;
    g.name = std::string("chain_") + (periodic ? "pbc_" : "") + std::to_string(n);
    g.j_target = Eigen::MatrixXd::Zero(n, n);
    std::vector<std::array<double, 2>> xy(n);
    for (int i = 0; i < n; ++i) {
        xy[i] = {static_cast<double>(i), 0.0};
        if (i + 1 < n)
            detail::add_edge(g.j_target, i, i + 1, j0);
    }
    // n == 2 would duplicate the only bond
    if (periodic && n > 2)
        detail::add_edge(g.j_target, n - 1, 0, j0);
    g.embedding = std::move(xy);
    return g;
}

inline TargetGraph uniform_full(int n, double j0)
{
    require(n >= 2, "uniform_full: n must be >= 2");
    TargetGraph g;
    g.n = n;
    g.name = "uniform_" + std::to_string(n);
    g.j_target = Eigen::MatrixXd::Constant(n, n, j0);
    g.j_target.diagonal().setZero();
    return g;
}

/// Wraps a user matrix: symmetry within 1e-9 (relative to the largest entry),
/// exactly zero diagonal; the stored matrix is the symmetrized average.
inline TargetGraph graph_from_matrix(const Eigen::MatrixXd& m, std::string name = "user")
{
    require(m.rows() == m.cols() && m.rows() >= 1, "graph: matrix must be square and non-empty");
    const int n = static_cast<int>(m.rows());
    require(m.allFinite(), "graph: matrix contains non-finite entries");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    for (int i = 0; i < n; ++i) {
        require(m(i, i) == 0.0, "graph: nonzero diagonal entry at " + std::to_string(i));
        for (int k = i + 1; k < n; ++k)
            require(std::abs(m(i, k) - m(k, i)) <= 1e-9 * scale,
                    "graph: matrix is not symmetric at (" + std::to_string(i) + "," + std::to_string(k) + ")");
    }
    TargetGraph g;
    g.n = n;
    g.name = std::move(name);
    g.j_target = 0.5 * (m + m.transpose());
    return g;
}

} // namespace ionspin

#endif // IONSPIN_GRAPHS_HPP
