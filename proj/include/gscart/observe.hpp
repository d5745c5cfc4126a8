// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <vector>

#include "gscart/grid.hpp"
#include "gscart/json_util.hpp"
#include "gscart/rng.hpp"

namespace gsc {

/// Pixel-selection mask: the subset of grid cells where measurements exist.
/// Indices are linear (row * cols + col), unique and strictly increasing.
struct ObservationMask {
    int rows = 0;
    int cols = 0;
    std::vector<int> observed;

    int size() const { return (int)observed.size(); }
    bool fits(const SpectrumMap& m) const { return m.rows() == rows && m.cols() == cols; }

    /// One flag per grid cell, 1 where observed.
    std::vector<std::uint8_t> flags() const;

    void validate() const;
};

/// Uniform scalar quantizer with 2^bits levels over [x_min, x_max] and
/// unbounded outer intervals. Level k covers (lower(k), upper(k)]; a value
/// exactly on a threshold belongs to the lower level.
struct QuantizerSpec {
    int bits = 1;
    double x_min = 0.0;
    double x_max = 1.0;

    int levels() const { return 1 << bits; }
    double step() const { return (x_max - x_min) / levels(); }

    /// k-th finite threshold, k in [0, levels()-2].
    double threshold(int k) const;
    /// Interval bounds of level k; lower(0) = -inf, upper(levels-1) = +inf.
    double lower(int level) const;
    double upper(int level) const;
    /// Interval midpoint; outer levels use the adjacent threshold +- step/2.
    double representative(int level) const;

    int quantize(double r) const;
    double dequantize(int level) const { return representative(level); }

    void validate() const;
};

/// One measurement campaign: where we measured, what we read out, how noisy
/// the sensor is, and (if the readout was coarse) which quantizer produced it.
/// In the quantized case `values` holds integer level indices.
struct Observation {
    ObservationMask mask;
    std::vector<double> values;
    double noise_sigma = 0.0;
    std::optional<QuantizerSpec> quantizer;

    bool is_quantized() const { return quantizer.has_value(); }
    int level_at(int i) const;

    void validate() const;
    json to_json() const;
    static Observation from_json(const json& j);
};

/// Uniformly random mask observing round(ratio * rows * cols) distinct pixels.
ObservationMask random_mask(int rows, int cols, double ratio, Rng& rng);

/// Mask covering every pixel.
ObservationMask full_mask(int rows, int cols);

/// Reads x at the mask and adds N(0, sigma_y^2) noise per sample.
Observation observe_linear(const SpectrumMap& x, const ObservationMask& mask, double sigma_y,
                           Rng& rng);

QuantizerSpec build_quantizer(int bits, double x_min, double x_max);

/// Reads x at the mask, adds noise, then quantizes (noise before quantizer).
Observation observe_quantized(const SpectrumMap& x, const ObservationMask& mask, double sigma,
                              const QuantizerSpec& q, Rng& rng);

/// Union of two campaigns over the same grid with the same sensor model.
/// The masks must be disjoint.
Observation merge_observations(const Observation& a, const Observation& b);

} // namespace gsc
