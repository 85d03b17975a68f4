#ifndef IONSPIN_IO_HPP
#define IONSPIN_IO_HPP

#include "ionspin/common.hpp"
#include "ionspin/graphs.hpp"

#include <Eigen/Dense>
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace ionspin::io {

inline constexpr int csv_precision = 17;

inline std::string format_double(double v)
{
    std::ostringstream os;
    os << std::setprecision(csv_precision) << v;
    return os.str();
}

inline void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& m, double scale = 1.0)
{
    os << std::setprecision(csv_precision);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c)
                os << ',';
            os << m(r, c) * scale;
        }
        os << '\n';
    }
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw ValidationError("cannot open " + path.string() + " for writing");
    f << text;
}

inline void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m, double scale = 1.0)
{
    std::ostringstream os;
    write_matrix_csv(os, m, scale);
    write_text(path, os.str());
}

inline std::string read_text(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw ValidationError("cannot open " + path.string());
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

/// Parses a rectangular numeric CSV. Blank lines and lines starting with '#' are skipped.
inline Eigen::MatrixXd parse_matrix_csv(const std::string& text, const std::string& origin = "csv")
{
    std::vector<std::vector<double>> rows;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos || line[line.find_first_not_of(" \t")] == '#')
            continue;
        std::vector<double> row;
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (cell.find_first_not_of(" \t", used) != std::string::npos)
                    throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw ValidationError(origin + ":" + std::to_string(line_no) + ": cannot parse '" + cell + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ValidationError(origin + ":" + std::to_string(line_no) + ": expected " +
                                  std::to_string(rows.front().size()) + " columns, found " + std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw ValidationError(origin + ": no data");
    Eigen::MatrixXd m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return m;
}

inline Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path)
{
    return parse_matrix_csv(read_text(path), path.string());
}

inline Eigen::MatrixXd read_square_csv(const std::filesystem::path& path)
{
    Eigen::MatrixXd m = read_matrix_csv(path);
    if (m.rows() != m.cols())
        throw ValidationError(path.string() + ": expected a square matrix, got " + std::to_string(m.rows()) + " rows x " +
                              std::to_string(m.cols()) + " columns");
    return m;
}

/// Sidecar metadata written next to a graph CSV.
inline nlohmann::json graph_metadata(const TargetGraph& g)
{
    nlohmann::json meta;
    meta["name"] = g.name;
    meta["n"] = g.n;
    meta["units"] = "Hz";
    meta["index_map"] = g.index_map;
    meta["sign_convention"] = g.sign_convention;
    meta["edges"] = g.edge_count();
    if (g.embedding) {
        nlohmann::json coords = nlohmann::json::array();
        for (const auto& p : *g.embedding)
            coords.push_back({p[0], p[1]});
        meta["embedding"] = coords;
    }
    return meta;
}

/// Writes `<stem>.csv` (Hz) and `<stem>.meta.json`.
inline void write_graph(const std::filesystem::path& stem, const TargetGraph& g)
{
    write_matrix_csv(std::filesystem::path(stem.string() + ".csv"), g.j_target, 1.0 / two_pi);
    write_text(std::filesystem::path(stem.string() + ".meta.json"), graph_metadata(g).dump(2) + "\n");
}

/// Loads a graph CSV in Hz. A sidecar `<stem>.meta.json` next to it, if present,
/// supplies the name and embedding.
inline TargetGraph graph_from_file(const std::filesystem::path& path)
{
    TargetGraph g = graph_from_matrix(read_square_csv(path) * two_pi, path.stem().string());
    std::filesystem::path meta_path = path;
    meta_path.replace_extension(".meta.json");
    if (std::filesystem::exists(meta_path)) {
        nlohmann::json meta;
        try {
            meta = nlohmann::json::parse(read_text(meta_path));
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(meta_path.string() + ": " + e.what());
        }
        g.name = meta.value("name", g.name);
        g.index_map = meta.value("index_map", g.index_map);
        if (meta.contains("embedding")) {
            std::vector<std::array<double, 2>> xy;
            for (const auto& p : meta["embedding"])
                xy.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
            require(static_cast<int>(xy.size()) == g.n, meta_path.string() + ": embedding size mismatch");
            g.embedding = std::move(xy);
        }
    }
    return g;
}

} // namespace ionspin::io

#endif // IONSPIN_IO_HPP
