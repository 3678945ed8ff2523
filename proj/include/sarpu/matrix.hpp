#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

namespace sarpu {

// Dense row-major matrix. Datasets at desk scale are small and dense.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), values(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

    std::span<const double> row(std::size_t r) const {
        return {values.data() + r * cols, cols};
    }
    std::span<double> row(std::size_t r) {
        return {values.data() + r * cols, cols};
    }

    static Matrix from_rows(const std::vector<std::vector<double>>& data) {
        Matrix m;
        m.rows = data.size();
        m.cols = data.empty() ? 0 : data.front().size();
        m.values.reserve(m.rows * m.cols);
        for (const auto& r : data) {
            if (r.size() != m.cols) {
                throw std::invalid_argument("Matrix::from_rows: ragged rows");
            }
            m.values.insert(m.values.end(), r.begin(), r.end());
        }
        return m;
    }

    Matrix select_rows(std::span<const std::size_t> idx) const {
        Matrix out(idx.size(), cols);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            auto src = row(idx[i]);
            std::copy(src.begin(), src.end(), out.row(i).begin());
        }
        return out;
    }

    Matrix select_cols(std::span<const std::size_t> idx) const {
        Matrix out(rows, idx.size());
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < idx.size(); ++j) {
                out(r, j) = (*this)(r, idx[j]);
            }
        }
        return out;
    }

    // Appends one column; returns its index.
    std::size_t append_column(std::span<const double> col) {
        if (col.size() != rows) {
            throw std::invalid_argument("Matrix::append_column: size mismatch");
        }
        std::vector<double> next;
        next.reserve(rows * (cols + 1));
        for (std::size_t r = 0; r < rows; ++r) {
            auto src = row(r);
            next.insert(next.end(), src.begin(), src.end());
            next.push_back(col[r]);
        }
        values = std::move(next);
        ++cols;
        return cols - 1;
    }

    bool operator==(const Matrix&) const = default;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Free-function forms, used where the matrix is one operand among several.
inline Matrix from_rows(const std::vector<std::vector<double>>& data) {
    return Matrix::from_rows(data);
}

inline Matrix select_rows(const Matrix& m, std::span<const std::size_t> idx) {
    return m.select_rows(idx);
}

inline Matrix select_cols(const Matrix& m, std::span<const std::size_t> idx) {
    return m.select_cols(idx);
}

inline std::size_t append_column(Matrix& m, std::span<const double> col) {
    return m.append_column(col);
}

}  // namespace sarpu
