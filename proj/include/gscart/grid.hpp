// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gsc {

/// Dense row-major 2-D grid of power-spectral-density values.
///
/// This is the latent signal of the whole library: ground-truth maps,
/// diffusion states and reconstructions all use this type. Values are
/// stored as double; persisted datasets use float32 (see tensor_io).
class SpectrumMap {
  public:
    SpectrumMap() = default;

    SpectrumMap(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), values_(check_shape(rows, cols), fill) {}

    static SpectrumMap from_values(int rows, int cols, std::vector<double> values)
    {
        SpectrumMap m;
        if ((std::size_t)check_shape(rows, cols) != values.size())
            throw std::invalid_argument("SpectrumMap: value count does not match rows*cols");
        m.rows_ = rows;
        m.cols_ = cols;
        m.values_ = std::move(values);
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int size() const { return rows_ * cols_; }

    double& operator()(int r, int c) { return values_[(std::size_t)r * cols_ + c]; }
    double operator()(int r, int c) const { return values_[(std::size_t)r * cols_ + c]; }

    double& operator[](int i) { return values_[(std::size_t)i]; }
    double operator[](int i) const { return values_[(std::size_t)i]; }

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    bool same_shape(const SpectrumMap& other) const
    {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    double min_value() const { return *std::min_element(values_.begin(), values_.end()); }
    double max_value() const { return *std::max_element(values_.begin(), values_.end()); }

    double mean_value() const
    {
        double s = 0.0;
        for (double v : values_)
            s += v;
        return s / (double)values_.size();
    }

    bool all_finite() const
    {
        for (double v : values_)
            if (!std::isfinite(v))
                return false;
        return true;
    }

    /// Throws when `other` has a different shape; `what` names the offending input.
    void require_same_shape(const SpectrumMap& other, const char* what) const
    {
        if (!same_shape(other))
            throw std::invalid_argument(std::string(what) + ": shape mismatch (" +
                                        std::to_string(rows_) + "x" + std::to_string(cols_) +
                                        " vs " + std::to_string(other.rows_) + "x" +
                                        std::to_string(other.cols_) + ")");
    }

  private:
    static int check_shape(int rows, int cols)
    {
        if (rows < 1 || cols < 1)
            throw std::invalid_argument("SpectrumMap: rows and cols must be >= 1");
        return rows * cols;
    }

    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> values_;
};

} // namespace gsc
