#pragma once

#include <span>
#include <vector>

#include "sarpu/glm.hpp"
#include "sarpu/types.hpp"

namespace sarpu {

// Default floor on estimated propensities inside the expansion. Bounds the
// 1/e weights so the negative mass cannot overwhelm the optimizer; set to 0
// to disable for exact-theory checks.
inline constexpr double kDefaultPropensityFloor = 0.05;

// The negative-weight data expansion. Every labeled row is emitted twice:
// once as a positive with weight 1/e and once as a negative with weight
// 1 - 1/e; unlabeled rows stay negatives with unit weight. The pair's
// weights sum to 1, so total weight equals the row count. Order-preserving.
inline std::vector<WeightedExample> expand(const PUDataset& pu,
                                           std::span<const double> e_hat,
                                           double e_floor = kDefaultPropensityFloor) {
    if (e_hat.size() != pu.size()) {
        throw std::invalid_argument("expand: propensity length mismatch");
    }
    if (!(e_floor >= 0.0 && e_floor < 1.0)) {
        throw std::invalid_argument("expand: e_floor must be in [0, 1)");
    }
    for (double e : e_hat) {
        if (!(e > 0.0 && e <= 1.0)) {
            throw std::invalid_argument("expand: propensity must be in (0, 1] before flooring");
        }
    }
    std::vector<WeightedExample> out;
    out.reserve(pu.size() + pu.labeled_count());
    for (std::size_t i = 0; i < pu.size(); ++i) {
        const auto row = pu.features.row(i);
        if (pu.observed[i] == 1) {
            const double e = std::max(e_hat[i], e_floor);
            const double inv = 1.0 / e;
            out.push_back({row, 1, inv});
            out.push_back({row, 0, 1.0 - inv});
        } else {
            out.push_back({row, 0, 1.0});
        }
    }
    return out;
}

// Propensity-weighted empirical risk minimization: classifier fitted on the
// expanded example set.
inline LinearModel train_pw_classifier(const PUDataset& pu, std::span<const double> e_hat,
                                       const TrainConfig& cfg,
                                       double e_floor = kDefaultPropensityFloor) {
    const auto examples = expand(pu, e_hat, e_floor);
    return fit_weighted(examples, cfg);
}

}  // namespace sarpu
