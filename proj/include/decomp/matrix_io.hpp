#pragma once

#include "decomp/linalg.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace decomp {

class IoError : public Error {
  public:
    using Error::Error;
};

// Text format: a "rows cols" header line, then one line per row with
// space-separated decimal entries. Values are written with 17 significant
// digits so a write/read cycle reproduces every double exactly.

inline void write_matrix(std::ostream &os, const Matrix &m) {
    os << m.rows() << ' ' << m.cols() << '\n';
    char buf[40];
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
            if (j)
                os << ' ';
            os << buf;
        }
        os << '\n';
    }
}

inline Matrix read_matrix(std::istream &is) {
    long long rows = 0, cols = 0;
    if (!(is >> rows >> cols) || rows <= 0 || cols <= 0)
        throw IoError("read_matrix: malformed header, expected \"rows cols\"");
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) {
            std::string token;
            if (!(is >> token))
                throw IoError("read_matrix: expected " + std::to_string(rows * cols) +
                              " entries, input ended at row " + std::to_string(i));
            std::size_t used = 0;
            double v;
            try {
                v = std::stod(token, &used);
            } catch (const std::exception &) {
                used = 0;
            }
            if (used != token.size())
                throw IoError("read_matrix: invalid number '" + token + "'");
            m(i, j) = v;
        }
    std::string extra;
    if (is >> extra)
        throw IoError("read_matrix: trailing data after " + std::to_string(rows * cols) +
                      " entries");
    require_finite(m, "read_matrix");
    return m;
}

inline void save_matrix(const std::filesystem::path &path, const Matrix &m) {
    std::ofstream os(path);
    if (!os)
        throw IoError("cannot open '" + path.string() + "' for writing");
    write_matrix(os, m);
    if (!os)
        throw IoError("failed writing '" + path.string() + "'");
}

inline Matrix load_matrix(const std::filesystem::path &path) {
    std::ifstream is(path);
    if (!is)
        throw IoError("cannot open '" + path.string() + "' for reading");
    try {
        return read_matrix(is);
    } catch (const IoError &e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

} // namespace decomp
