// SPDX-License-Identifier: Apache-2.0

#include "gscart/baseline.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace gsc {

void IdwConfig::validate() const
{
    if (!(power > 0.0))
        throw std::invalid_argument("IdwConfig: power must be > 0");
    if (!(epsilon > 0.0))
        throw std::invalid_argument("IdwConfig: epsilon must be > 0");
}

SpectrumMap idw_reconstruct(const Observation& obs, const IdwConfig& cfg)
{
    cfg.validate();
    obs.validate();
    if (obs.mask.size() == 0)
        throw std::invalid_argument("idw_reconstruct: observation is empty");

    int rows = obs.mask.rows, cols = obs.mask.cols;
    int m = obs.mask.size();
    std::vector<double> vr(m), vc(m), vy(m);
    for (int i = 0; i < m; ++i) {
        int idx = obs.mask.observed[(std::size_t)i];
        vr[(std::size_t)i] = idx / cols;
        vc[(std::size_t)i] = idx % cols;
        vy[(std::size_t)i] = obs.is_quantized() ? obs.quantizer->dequantize(obs.level_at(i))
                                                : obs.values[(std::size_t)i];
    }

    SpectrumMap out(rows, cols);
    std::vector<std::uint8_t> seen = obs.mask.flags();
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            int idx = r * cols + c;
            if (seen[(std::size_t)idx])
                continue; // filled below from the measurements directly
            double wsum = 0.0, vsum = 0.0;
            for (int i = 0; i < m; ++i) {
                double dr = r - vr[(std::size_t)i], dc = c - vc[(std::size_t)i];
                double d = std::sqrt(dr * dr + dc * dc);
                double w = 1.0 / (std::pow(d, cfg.power) + cfg.epsilon);
                wsum += w;
                vsum += w * vy[(std::size_t)i];
            }
            out(r, c) = vsum / wsum;
        }
    for (int i = 0; i < m; ++i)
        out[obs.mask.observed[(std::size_t)i]] = vy[(std::size_t)i];
    return out;
}

} // namespace gsc
