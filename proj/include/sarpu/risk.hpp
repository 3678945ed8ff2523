#pragma once

#include <cmath>
#include <span>
#include <stdexcept>

#include "sarpu/types.hpp"

namespace sarpu {

enum class EstimatorKind { True, PropensityWeighted, Expected };

struct RiskReport {
    double value = 0.0;
    EstimatorKind kind = EstimatorKind::True;
    CostSpec cost;
    std::size_t n = 0;
};

// Cost of predicting yhat when the class is y.
inline double delta(const CostSpec& cost, int y, double yhat) {
    if (!(yhat > 0.0 && yhat < 1.0)) {
        throw std::invalid_argument("delta: yhat must lie strictly in (0, 1)");
    }
    if (y != 0 && y != 1) {
        throw std::invalid_argument("delta: y must be 0 or 1");
    }
    switch (cost.kind) {
        case Cost::Mae: return std::abs(static_cast<double>(y) - yhat);
        case Cost::Mse: {
            const double d = static_cast<double>(y) - yhat;
            return d * d;
        }
        default: return y == 1 ? -std::log(yhat) : -std::log(1.0 - yhat);
    }
}

namespace detail {
inline void require_same_length(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw std::invalid_argument(std::string(what) + ": length mismatch");
    if (a == 0) throw std::invalid_argument(std::string(what) + ": empty input");
}
inline void require_propensity(std::span<const double> e, const char* what) {
    for (double v : e) {
        if (!(v > 0.0 && v <= 1.0)) {
            throw std::invalid_argument(std::string(what) + ": propensity must be in (0, 1]");
        }
    }
}
}  // namespace detail

// Mean per-example cost against the true labels.
inline RiskReport true_risk(std::span<const double> yhat, std::span<const int> y,
                            const CostSpec& cost) {
    detail::require_same_length(yhat.size(), y.size(), "true_risk");
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        acc += y[i] == 1 ? delta(cost, 1, yhat[i]) : delta(cost, 0, yhat[i]);
    }
    return {acc / static_cast<double>(y.size()), EstimatorKind::True, cost, y.size()};
}

// Propensity-weighted estimator of the true risk from PU labels. Each
// labeled example contributes 1/e as a positive and 1 - 1/e as a negative,
// so the value may legitimately be negative; it is not clamped.
inline RiskReport pw_risk(std::span<const double> yhat, std::span<const int> s,
                          std::span<const double> e, const CostSpec& cost) {
    detail::require_same_length(yhat.size(), s.size(), "pw_risk");
    detail::require_same_length(yhat.size(), e.size(), "pw_risk");
    detail::require_propensity(e, "pw_risk");
    double acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double d0 = delta(cost, 0, yhat[i]);
        if (s[i] == 1) {
            const double inv = 1.0 / e[i];
            acc += inv * delta(cost, 1, yhat[i]) + (1.0 - inv) * d0;
        } else {
            acc += d0;
        }
    }
    return {acc / static_cast<double>(s.size()), EstimatorKind::PropensityWeighted, cost,
            s.size()};
}

// Conditional-expectation risk estimator. Biased: the all-positive
// hypothesis drives it to zero, which is why it is unusable as a training
// objective. Kept for demonstration and for the degeneracy tests.
inline RiskReport expected_risk(std::span<const double> yhat, std::span<const int> s,
                                std::span<const double> e, const CostSpec& cost) {
    detail::require_same_length(yhat.size(), s.size(), "expected_risk");
    detail::require_same_length(yhat.size(), e.size(), "expected_risk");
    detail::require_propensity(e, "expected_risk");
    double acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double d1 = delta(cost, 1, yhat[i]);
        const double d0 = delta(cost, 0, yhat[i]);
        const double denom = 1.0 - yhat[i] * e[i];
        if (denom == 0.0) {
            throw std::invalid_argument("expected_risk: yhat*e == 1");
        }
        if (s[i] == 1) {
            acc += d1;
        } else {
            acc += (yhat[i] * (1.0 - e[i]) / denom) * d1 + ((1.0 - yhat[i]) / denom) * d0;
        }
    }
    return {acc / static_cast<double>(s.size()), EstimatorKind::Expected, cost, s.size()};
}

// Closed-form bias of the propensity-weighted estimator when it is fed
// estimated propensities e_hat while selection follows e_true. Sign
// convention: true risk minus the estimator's expectation, so exact
// propensities give zero and it vanishes on all-negative data.
inline double pw_bias(std::span<const double> yhat, std::span<const int> y,
                      std::span<const double> e_true, std::span<const double> e_hat,
                      const CostSpec& cost) {
    detail::require_same_length(yhat.size(), y.size(), "pw_bias");
    detail::require_same_length(yhat.size(), e_true.size(), "pw_bias");
    detail::require_same_length(yhat.size(), e_hat.size(), "pw_bias");
    detail::require_propensity(e_true, "pw_bias");
    detail::require_propensity(e_hat, "pw_bias");
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] != 1) continue;
        acc += (1.0 - e_true[i] / e_hat[i]) *
               (delta(cost, 1, yhat[i]) - delta(cost, 0, yhat[i]));
    }
    return acc / static_cast<double>(y.size());
}

// Hoeffding deviation bound for the estimator at confidence 1 - eta.
inline double estimator_bound(const CostSpec& cost, const BoundSpec& spec) {
    spec.validate();
    const double dm = cost.delta_max();
    return std::sqrt(dm * dm * std::log(2.0 / spec.eta) /
                     (2.0 * static_cast<double>(spec.sample_size)));
}

// Generalization bound for the empirical risk minimizer over a finite
// hypothesis space.
inline double erm_bound(const CostSpec& cost, const BoundSpec& spec) {
    spec.validate();
    const double dm = cost.delta_max();
    return std::sqrt(dm * dm *
                     std::log(static_cast<double>(spec.hypothesis_count) / spec.eta) /
                     (2.0 * static_cast<double>(spec.sample_size)));
}

// Exact expectation of pw_risk over the selection distribution
// s_i ~ Bernoulli(y_i * e_true_i), with the estimator evaluated at e_used.
// The expectation is linear, so it reduces to a per-row closed form; the
// literal pattern enumeration lives in the test oracles.
inline double brute_force_expected_pw_risk(std::span<const double> yhat,
                                           std::span<const int> y,
                                           std::span<const double> e_true,
                                           std::span<const double> e_used,
                                           const CostSpec& cost) {
    detail::require_same_length(yhat.size(), y.size(), "brute_force_expected_pw_risk");
    detail::require_same_length(yhat.size(), e_true.size(), "brute_force_expected_pw_risk");
    detail::require_same_length(yhat.size(), e_used.size(), "brute_force_expected_pw_risk");
    detail::require_propensity(e_true, "brute_force_expected_pw_risk");
    detail::require_propensity(e_used, "brute_force_expected_pw_risk");
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d1 = delta(cost, 1, yhat[i]);
        const double d0 = delta(cost, 0, yhat[i]);
        const double pe = static_cast<double>(y[i]) * e_true[i];
        const double inv = 1.0 / e_used[i];
        acc += pe * (inv * d1 + (1.0 - inv) * d0) + (1.0 - pe) * d0;
    }
    return acc / static_cast<double>(y.size());
}

}  // namespace sarpu
