// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gscart/grid.hpp"
#include "gscart/observe.hpp"

namespace gsc {

/// Inverse-distance-weighting interpolation parameters.
struct IdwConfig {
    double power = 2.0;    // distance exponent
    double epsilon = 1e-9; // guards zero distances

    void validate() const;
};

/// Convex spatial interpolation: each unobserved pixel is the
/// 1/(distance^p + epsilon)-weighted mean of all measurements; observed
/// pixels keep their measured values. Quantized observations are dequantized
/// to interval representatives first.
SpectrumMap idw_reconstruct(const Observation& obs, const IdwConfig& cfg = {});

} // namespace gsc
