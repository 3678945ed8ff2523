#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "sarpu/common.hpp"
#include "sarpu/matrix.hpp"

namespace sarpu {

// Binary labels are {0,1} ints so they plug straight into the risk formulas.

// Fully labeled data: ground truth for simulation and for supervised baselines.
struct LabeledDataset {
    Matrix features;          // values scaled to [-1, 1] after preprocessing
    std::vector<int> classes; // y in {0,1}

    std::size_t size() const { return features.rows; }
};

// Positive-unlabeled data. `observed` is the selection label s; only positive
// instances can carry s=1. Hidden classes and true propensities travel along
// when the data comes from a simulator, so methods can be scored afterwards.
struct PUDataset {
    Matrix features;
    std::vector<int> observed;                            // s in {0,1}
    std::optional<std::vector<int>> hidden_classes;       // y, evaluation only
    std::optional<std::vector<double>> true_propensity;   // e in (0,1], evaluation only
    std::vector<std::size_t> propensity_attr_indices;     // columns x_e

    std::size_t size() const { return features.rows; }
    std::size_t labeled_count() const {
        return static_cast<std::size_t>(
            std::count(observed.begin(), observed.end(), 1));
    }
};

// Sigmoid probability model over a fixed feature dimensionality. Serves as
// both the classifier f and the propensity model e.
struct LinearModel {
    std::vector<double> weights;
    double intercept = 0.0;

    double score(std::span<const double> x) const {
        return dot(weights, x) + intercept;
    }
    std::size_t dim() const { return weights.size(); }

    bool operator==(const LinearModel&) const = default;
};

enum class Cost { Mae, Mse, LogLoss };

inline const char* cost_name(Cost c) {
    switch (c) {
        case Cost::Mae: return "mae";
        case Cost::Mse: return "mse";
        default: return "logloss";
    }
}

// A cost pair (delta_0, delta_1) plus the clipping that keeps log loss finite.
// delta_max for log loss depends on the clip and is reported as such.
struct CostSpec {
    Cost kind = Cost::Mse;
    double clip_epsilon = 1e-12;

    static CostSpec mae() { return {Cost::Mae, 1e-12}; }
    static CostSpec mse() { return {Cost::Mse, 1e-12}; }
    static CostSpec log_loss(double eps = 1e-12) { return {Cost::LogLoss, eps}; }

    double delta_max() const {
        return kind == Cost::LogLoss ? -std::log(clip_epsilon) : 1.0;
    }

    void validate() const {
        if (!(clip_epsilon > 0.0 && clip_epsilon < 0.5)) {
            throw std::invalid_argument("CostSpec: clip_epsilon must be in (0, 0.5)");
        }
    }
};

// Inputs of the Hoeffding-style bounds: confidence, hypothesis count, sample size.
struct BoundSpec {
    double eta = 0.05;
    std::uint64_t hypothesis_count = 1;
    std::uint64_t sample_size = 1;

    void validate() const {
        if (!(eta > 0.0 && eta < 1.0)) {
            throw std::invalid_argument("BoundSpec: eta must be in (0, 1)");
        }
        if (hypothesis_count < 1) {
            throw std::invalid_argument("BoundSpec: hypothesis_count must be >= 1");
        }
        if (sample_size < 1) {
            throw std::invalid_argument("BoundSpec: sample_size must be >= 1");
        }
    }
};

// Report-style invariant check; an empty result means the dataset is valid.
inline std::vector<std::string> validate_pu(const PUDataset& d) {
    std::vector<std::string> report;
    const std::size_t n = d.size();
    if (d.observed.size() != n) {
        report.push_back("observed length does not match feature row count");
    }
    for (std::size_t i = 0; i < d.observed.size(); ++i) {
        if (d.observed[i] != 0 && d.observed[i] != 1) {
            report.push_back("observed labels must be 0 or 1");
            break;
        }
    }
    if (d.hidden_classes) {
        if (d.hidden_classes->size() != n) {
            report.push_back("hidden_classes length does not match feature row count");
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                if (d.observed[i] == 1 && (*d.hidden_classes)[i] != 1) {
                    report.push_back("positive-only labeling violated: s=1 with y=0");
                    break;
                }
            }
        }
    }
    if (d.true_propensity) {
        if (d.true_propensity->size() != n) {
            report.push_back("true_propensity length does not match feature row count");
        } else {
            for (double e : *d.true_propensity) {
                if (!(e > 0.0)) {
                    report.push_back("propensity must be > 0");
                    break;
                }
            }
            for (double e : *d.true_propensity) {
                if (e > 1.0) {
                    report.push_back("propensity must be <= 1");
                    break;
                }
            }
        }
    }
    std::set<std::size_t> seen;
    for (std::size_t idx : d.propensity_attr_indices) {
        if (idx >= d.features.cols) {
            report.push_back("propensity attribute index out of range");
            break;
        }
        if (!seen.insert(idx).second) {
            report.push_back("propensity attribute indices must be distinct");
            break;
        }
    }
    return report;
}

// Gathers the propensity-attribute columns x_e into their own matrix.
inline Matrix propensity_features(const PUDataset& d) {
    return d.features.select_cols(d.propensity_attr_indices);
}

inline PUDataset select_rows(const PUDataset& d, std::span<const std::size_t> idx) {
    PUDataset out;
    out.features = d.features.select_rows(idx);
    out.observed.reserve(idx.size());
    for (std::size_t i : idx) out.observed.push_back(d.observed[i]);
    if (d.hidden_classes) {
        std::vector<int> y;
        y.reserve(idx.size());
        for (std::size_t i : idx) y.push_back((*d.hidden_classes)[i]);
        out.hidden_classes = std::move(y);
    }
    if (d.true_propensity) {
        std::vector<double> e;
        e.reserve(idx.size());
        for (std::size_t i : idx) e.push_back((*d.true_propensity)[i]);
        out.true_propensity = std::move(e);
    }
    out.propensity_attr_indices = d.propensity_attr_indices;
    return out;
}

}  // namespace sarpu
