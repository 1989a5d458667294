#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <span>
#include <vector>

namespace clickbait {

/// Dense row-major matrix of doubles; one row per sample.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

    void append_row(std::span<const double> values) {
        if (rows == 0 && cols == 0) {
            cols = values.size();
        }
        if (values.size() != cols) {
            throw std::invalid_argument("row length does not match matrix width");
        }
        data.insert(data.end(), values.begin(), values.end());
        ++rows;
    }

    /// Rows at `indices`, in that order.
    Matrix select_rows(std::span<const std::size_t> indices) const {
        Matrix out(indices.size(), cols);
        for (std::size_t k = 0; k < indices.size(); ++k) {
            auto src = row(indices[k]);
            std::copy(src.begin(), src.end(), out.row(k).begin());
        }
        return out;
    }
};

} // namespace clickbait
