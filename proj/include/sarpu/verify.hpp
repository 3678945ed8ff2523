#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sarpu/glm.hpp"
#include "sarpu/risk.hpp"
#include "sarpu/sar_em.hpp"
#include "sarpu/simulate.hpp"

namespace sarpu {

// Brute-force and Monte-Carlo checks of the estimator theory. These run in
// the unit tests, the acceptance suite, and the `verify` CLI command; the
// tolerances are pinned here so every caller checks the same thing.
struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

using PwEstimator = std::function<double(
    std::span<const double> yhat, std::span<const int> s, std::span<const double> e,
    const CostSpec& cost)>;

inline double default_pw_estimator(std::span<const double> yhat, std::span<const int> s,
                                   std::span<const double> e, const CostSpec& cost) {
    return pw_risk(yhat, s, e, cost).value;
}

namespace detail {

struct RiskInstance {
    std::vector<int> y;
    std::vector<double> yhat;
    std::vector<double> e_true;
    std::vector<double> e_hat;
};

inline RiskInstance random_risk_instance(std::mt19937_64& rng, std::size_t max_n,
                                         bool distinct_e_hat) {
    std::uniform_int_distribution<std::size_t> size_dist(1, max_n);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> e_dist(0.1, 0.95);
    std::uniform_real_distribution<double> p_dist(0.02, 0.98);
    RiskInstance inst;
    const std::size_t n = size_dist(rng);
    inst.y.resize(n);
    inst.yhat.resize(n);
    inst.e_true.resize(n);
    inst.e_hat.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        inst.y[i] = unit(rng) < 0.5 ? 1 : 0;
        inst.yhat[i] = p_dist(rng);
        inst.e_true[i] = e_dist(rng);
        inst.e_hat[i] = distinct_e_hat ? e_dist(rng) : inst.e_true[i];
        if (distinct_e_hat && std::abs(inst.e_hat[i] - inst.e_true[i]) < 1e-3) {
            inst.e_hat[i] = clip(inst.e_true[i] + 0.1, 0.1, 0.95);
        }
    }
    return inst;
}

// Exact expectation over the selection distribution s_i ~ Bernoulli(y_i e_i)
// by enumerating every selection pattern of the positive rows.
inline long double enumerate_expectation(
    std::span<const int> y, std::span<const double> e_true,
    const std::function<double(std::span<const int>)>& value_of_pattern) {
    std::vector<std::size_t> pos;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] == 1) pos.push_back(i);
    }
    std::vector<int> s(y.size(), 0);
    long double acc = 0.0L;
    const std::size_t patterns = std::size_t{1} << pos.size();
    for (std::size_t mask = 0; mask < patterns; ++mask) {
        long double prob = 1.0L;
        for (std::size_t b = 0; b < pos.size(); ++b) {
            const bool labeled = (mask >> b) & 1u;
            s[pos[b]] = labeled ? 1 : 0;
            prob *= labeled ? static_cast<long double>(e_true[pos[b]])
                            : 1.0L - static_cast<long double>(e_true[pos[b]]);
        }
        acc += prob * static_cast<long double>(value_of_pattern(s));
    }
    return acc;
}

inline std::vector<CostSpec> all_costs() {
    return {CostSpec::mae(), CostSpec::mse(), CostSpec::log_loss()};
}

}  // namespace detail

// Exhaustive unbiasedness check: E[estimator] over all selection patterns
// equals the true risk. The estimator is pluggable so a deliberately broken
// estimator demonstrably fails the check.
inline CheckResult verify_unbiasedness(int n_instances, std::size_t max_n, std::uint64_t seed,
                                       double tol = 1e-12,
                                       const PwEstimator& estimator = default_pw_estimator) {
    auto rng = make_rng(substream(seed, 0x756e6269));
    long double worst = 0.0L;
    int worst_instance = -1;
    for (int k = 0; k < n_instances; ++k) {
        const auto inst = detail::random_risk_instance(rng, max_n, false);
        for (const auto& cost : detail::all_costs()) {
            const long double expectation = detail::enumerate_expectation(
                inst.y, inst.e_true, [&](std::span<const int> s) {
                    return estimator(inst.yhat, s, inst.e_true, cost);
                });
            const double truth = true_risk(inst.yhat, inst.y, cost).value;
            const long double diff = std::fabs(expectation - static_cast<long double>(truth));
            if (diff > worst) {
                worst = diff;
                worst_instance = k;
            }
        }
    }
    CheckResult r;
    r.name = "unbiasedness";
    r.passed = worst <= static_cast<long double>(tol);
    std::ostringstream os;
    os << "max |E[estimate] - true risk| = " << static_cast<double>(worst) << " over "
       << n_instances << " instances (worst at " << worst_instance << "), tolerance " << tol;
    r.detail = os.str();
    return r;
}

// Bias check against two independent references: the enumerated expectation
// of the estimator at mismatched propensities, and the closed-form
// expectation. Both must satisfy true - expectation = pw_bias.
inline CheckResult verify_bias(int n_instances, std::size_t max_n, std::uint64_t seed,
                               double tol = 1e-12) {
    auto rng = make_rng(substream(seed, 0x62696173));
    long double worst = 0.0L;
    for (int k = 0; k < n_instances; ++k) {
        const auto inst = detail::random_risk_instance(rng, max_n, true);
        for (const auto& cost : detail::all_costs()) {
            const double truth = true_risk(inst.yhat, inst.y, cost).value;
            const double bias = pw_bias(inst.yhat, inst.y, inst.e_true, inst.e_hat, cost);
            const double closed =
                brute_force_expected_pw_risk(inst.yhat, inst.y, inst.e_true, inst.e_hat, cost);
            const long double enumerated = detail::enumerate_expectation(
                inst.y, inst.e_true, [&](std::span<const int> s) {
                    return pw_risk(inst.yhat, s, inst.e_hat, cost).value;
                });
            worst = std::max(worst, std::fabs(static_cast<long double>(closed) - enumerated));
            worst = std::max(
                worst, std::fabs(static_cast<long double>(truth - closed - bias)));
        }
    }
    CheckResult r;
    r.name = "bias";
    r.passed = worst <= static_cast<long double>(tol);
    std::ostringstream os;
    os << "max deviation between enumerated / closed-form expectation and bias identity = "
       << static_cast<double>(worst) << " over " << n_instances << " instances, tolerance "
       << tol;
    r.detail = os.str();
    return r;
}

// Monte-Carlo coverage of the deviation bound: the empirical probability of
// |estimate - truth| exceeding the bound at confidence 1 - eta must be at
// most eta.
inline CheckResult verify_bound_coverage(std::size_t n, int n_mc,
                                         const std::vector<double>& etas, std::uint64_t seed) {
    auto rng = make_rng(substream(seed, 0x626f756e));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> e_dist(0.2, 0.8);
    std::uniform_real_distribution<double> p_dist(0.02, 0.98);

    std::vector<int> y(n);
    std::vector<double> yhat(n), e(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = unit(rng) < 0.5 ? 1 : 0;
        yhat[i] = p_dist(rng);
        e[i] = e_dist(rng);
    }
    const CostSpec cost = CostSpec::mse();
    const double truth = true_risk(yhat, y, cost).value;

    std::vector<double> bounds;
    bounds.reserve(etas.size());
    for (double eta : etas) {
        bounds.push_back(estimator_bound(cost, BoundSpec{eta, 1, n}));
    }
    std::vector<int> exceed(etas.size(), 0);
    std::vector<int> s(n);
    for (int rep = 0; rep < n_mc; ++rep) {
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = (y[i] == 1 && unit(rng) < e[i]) ? 1 : 0;
        }
        const double est = pw_risk(yhat, s, e, cost).value;
        const double dev = std::abs(est - truth);
        for (std::size_t k = 0; k < etas.size(); ++k) {
            if (dev > bounds[k]) ++exceed[k];
        }
    }
    CheckResult r;
    r.name = "bound-coverage";
    r.passed = true;
    std::ostringstream os;
    for (std::size_t k = 0; k < etas.size(); ++k) {
        const double rate = static_cast<double>(exceed[k]) / static_cast<double>(n_mc);
        if (rate > etas[k]) r.passed = false;
        if (k) os << "; ";
        os << "eta=" << etas[k] << ": bound=" << bounds[k] << ", exceedance rate=" << rate;
    }
    r.detail = os.str();
    return r;
}

// ERM bound check over a finite grid of linear hypotheses on one feature:
// the true risk of each labeling's empirical minimizer should exceed its
// estimated risk plus the uniform bound in at most an eta fraction of
// labelings.
inline CheckResult verify_erm_bound(std::size_t n, std::size_t grid_side, int n_labelings,
                                    double eta, std::uint64_t seed) {
    const std::size_t n_hyp = grid_side * grid_side;
    auto rng = make_rng(substream(seed, 0x65726d62));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> x_dist(-1.0, 1.0);
    std::uniform_real_distribution<double> e_dist(0.2, 0.8);

    // data from a noisy 1-d logistic ground truth
    std::vector<double> x(n), e(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = x_dist(rng);
        y[i] = unit(rng) < sigmoid(2.5 * x[i]) ? 1 : 0;
        e[i] = e_dist(rng);
    }

    // hypothesis grid: slope x intercept
    std::vector<double> slopes(grid_side), intercepts(grid_side);
    for (std::size_t g = 0; g < grid_side; ++g) {
        const double t = grid_side == 1
                             ? 0.0
                             : -4.0 + 8.0 * static_cast<double>(g) /
                                          static_cast<double>(grid_side - 1);
        slopes[g] = t;
        intercepts[g] = t / 2.0;
    }
    const CostSpec cost = CostSpec::mse();
    // per-hypothesis per-row costs, precomputed once
    std::vector<std::vector<double>> d1(n_hyp, std::vector<double>(n));
    std::vector<std::vector<double>> d0(n_hyp, std::vector<double>(n));
    std::vector<double> true_risks(n_hyp, 0.0);
    for (std::size_t h = 0; h < n_hyp; ++h) {
        const double w = slopes[h / grid_side];
        const double b = intercepts[h % grid_side];
        for (std::size_t i = 0; i < n; ++i) {
            const double p = clip(sigmoid(w * x[i] + b), 1e-6, 1.0 - 1e-6);
            d1[h][i] = delta(cost, 1, p);
            d0[h][i] = delta(cost, 0, p);
            true_risks[h] += y[i] == 1 ? d1[h][i] : d0[h][i];
        }
        true_risks[h] /= static_cast<double>(n);
    }

    const double bound = erm_bound(cost, BoundSpec{eta, n_hyp, n});
    int violations = 0;
    std::vector<int> s(n);
    for (int rep = 0; rep < n_labelings; ++rep) {
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = (y[i] == 1 && unit(rng) < e[i]) ? 1 : 0;
        }
        std::size_t best = 0;
        double best_risk = std::numeric_limits<double>::infinity();
        for (std::size_t h = 0; h < n_hyp; ++h) {
            double est = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                est += s[i] == 1 ? d1[h][i] / e[i] + (1.0 - 1.0 / e[i]) * d0[h][i]
                                 : d0[h][i];
            }
            est /= static_cast<double>(n);
            if (est < best_risk) {
                best_risk = est;
                best = h;
            }
        }
        if (true_risks[best] > best_risk + bound) ++violations;
    }
    const double rate = static_cast<double>(violations) / static_cast<double>(n_labelings);
    CheckResult r;
    r.name = "erm-bound";
    r.passed = rate <= eta;
    std::ostringstream os;
    os << "|H|=" << n_hyp << ", bound=" << bound << ", violation rate=" << rate
       << " (allowed " << eta << ")";
    r.detail = os.str();
    return r;
}

// The E-step must agree with the posterior computed from the joint
// probability table Pr(y, s | x) on fully enumerable discrete domains.
inline CheckResult verify_estep_bayes(std::uint64_t seed, double tol = 1e-12) {
    auto rng = make_rng(substream(seed, 0x65737465));
    std::uniform_real_distribution<double> w_dist(-2.0, 2.0);
    const double prob_clip = 1e-6;

    long double worst = 0.0L;
    for (int k_attrs = 1; k_attrs <= 3; ++k_attrs) {
        const std::size_t n_cfg = std::size_t{1} << k_attrs;  // at most 8
        Matrix features(2 * n_cfg, static_cast<std::size_t>(k_attrs));
        std::vector<int> s(2 * n_cfg);
        for (std::size_t cfg = 0; cfg < n_cfg; ++cfg) {
            for (int rep = 0; rep < 2; ++rep) {
                const std::size_t row = 2 * cfg + static_cast<std::size_t>(rep);
                for (int a = 0; a < k_attrs; ++a) {
                    features(row, static_cast<std::size_t>(a)) =
                        static_cast<double>((cfg >> a) & 1u);
                }
                s[row] = rep;  // each configuration appears labeled and unlabeled
            }
        }
        PUDataset pu;
        pu.features = features;
        pu.observed = s;
        for (int a = 0; a < k_attrs; ++a) {
            pu.propensity_attr_indices.push_back(static_cast<std::size_t>(a));
        }

        for (int trial = 0; trial < 8; ++trial) {
            LinearModel f, e;
            f.weights.resize(static_cast<std::size_t>(k_attrs));
            e.weights.resize(static_cast<std::size_t>(k_attrs));
            for (auto& w : f.weights) w = w_dist(rng);
            for (auto& w : e.weights) w = w_dist(rng);
            f.intercept = w_dist(rng);
            e.intercept = w_dist(rng);

            const auto yhat = e_step(f, e, pu, prob_clip);
            const auto f_prob = predict_proba(f, pu.features, prob_clip);
            const auto e_prob = predict_proba(e, propensity_features(pu), prob_clip);
            for (std::size_t i = 0; i < pu.size(); ++i) {
                // joint table: Pr(y=1,s=1)=fe, Pr(y=1,s=0)=f(1-e), Pr(y=0,s=0)=1-f
                const long double fp = f_prob[i];
                const long double ep = e_prob[i];
                long double posterior;
                if (s[i] == 1) {
                    posterior = (fp * ep) / (fp * ep);  // only y=1 can be labeled
                } else {
                    posterior = fp * (1.0L - ep) / (fp * (1.0L - ep) + (1.0L - fp));
                }
                worst = std::max(worst,
                                 std::fabs(posterior - static_cast<long double>(yhat[i])));
            }
        }
    }
    CheckResult r;
    r.name = "estep-bayes";
    r.passed = worst <= static_cast<long double>(tol);
    std::ostringstream os;
    os << "max |e_step - joint-table posterior| = " << static_cast<double>(worst)
       << ", tolerance " << tol;
    r.detail = os.str();
    return r;
}

// The all-positive hypothesis drives the conditional-expectation estimator
// to zero while its actual risk stays bounded away from zero.
inline CheckResult verify_expected_risk_degeneracy(std::uint64_t seed, double tol = 1e-9) {
    auto rng = make_rng(substream(seed, 0x64656765));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> e_dist(0.2, 0.8);
    const std::size_t n = 400;
    std::vector<int> y(n), s(n);
    std::vector<double> e(n);
    std::size_t n_neg = 0;
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = unit(rng) < 0.5 ? 1 : 0;
        n_neg += y[i] == 0 ? 1 : 0;
        e[i] = e_dist(rng);
        s[i] = (y[i] == 1 && unit(rng) < e[i]) ? 1 : 0;
    }
    const CostSpec cost = CostSpec::mae();
    const double clip_hi = 1.0 - 1e-12;
    const std::vector<double> all_pos(n, clip_hi);
    const double expected = expected_risk(all_pos, s, e, cost).value;
    const double pw = pw_risk(all_pos, s, e, cost).value;
    const double truth = true_risk(all_pos, y, cost).value;
    const double floor = 0.5 * static_cast<double>(n_neg) / static_cast<double>(n);

    CheckResult r;
    r.name = "expected-risk-degeneracy";
    r.passed = expected <= tol && pw > floor && truth > floor;
    std::ostringstream os;
    os << "expected_risk=" << expected << " (tolerance " << tol << "), pw_risk=" << pw
       << ", true_risk=" << truth << ", required floor " << floor;
    r.detail = os.str();
    return r;
}

// Analytic gradient of the weighted objective against central finite
// differences, at random points and with negative weights present.
inline CheckResult verify_gradients(int n_points, std::uint64_t seed, double tol = 1e-5) {
    auto rng = make_rng(substream(seed, 0x67726164));
    std::uniform_real_distribution<double> x_dist(-1.0, 1.0);
    std::uniform_real_distribution<double> w_dist(-2.0, 2.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    double worst = 0.0;
    for (int p = 0; p < n_points; ++p) {
        const std::size_t n = 8 + (p % 5);
        const std::size_t d = 2 + (p % 3);
        Matrix features(n, d);
        std::vector<int> targets(n);
        std::vector<double> weights(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) features(i, j) = x_dist(rng);
            targets[i] = unit(rng) < 0.5 ? 1 : 0;
            // mix of plain and negative weights, like the expanded PU data
            weights[i] = unit(rng) < 0.4 ? -unit(rng) : 0.2 + 2.0 * unit(rng);
        }
        double pos_mass = 0.0;
        for (double w : weights) pos_mass += std::max(w, 0.0);
        if (pos_mass <= 0.0) weights[0] = 1.0;

        std::vector<WeightedExample> examples;
        for (std::size_t i = 0; i < n; ++i) {
            examples.push_back({features.row(i), targets[i], weights[i]});
        }
        TrainConfig cfg;
        cfg.l2_strength = p % 2 == 0 ? 0.0 : 0.05;
        LinearModel point;
        point.weights.resize(d);
        for (auto& w : point.weights) w = w_dist(rng);
        point.intercept = w_dist(rng);

        const LossGrad lg = weighted_log_loss_grad(point, examples, cfg);
        const double h = 1e-6;
        auto loss_at = [&](const LinearModel& m) {
            return weighted_log_loss(m, examples, cfg);
        };
        auto check = [&](double analytic, double* slot) {
            const double orig = *slot;
            *slot = orig + h;
            const double up = loss_at(point);
            *slot = orig - h;
            const double down = loss_at(point);
            *slot = orig;
            const double fd = (up - down) / (2.0 * h);
            const double scale = std::max({std::abs(analytic), std::abs(fd), 1.0});
            worst = std::max(worst, std::abs(analytic - fd) / scale);
        };
        for (std::size_t j = 0; j < d; ++j) check(lg.grad_weights[j], &point.weights[j]);
        check(lg.grad_intercept, &point.intercept);
    }
    CheckResult r;
    r.name = "gradient-fd";
    r.passed = worst <= tol;
    std::ostringstream os;
    os << "max relative error vs central differences = " << worst << " at " << n_points
       << " points, tolerance " << tol;
    r.detail = os.str();
    return r;
}

// EM sanity on a simulated instance: the observed-data log likelihood is
// non-decreasing along the trace, and the converged state is a fixed point
// (one extra iteration moves the log likelihood by a vanishing amount).
inline CheckResult verify_em_fixed_point(std::uint64_t seed) {
    SimulationConfig sim;
    sim.seed = seed;
    sim.n_splits = 1;
    sim.n_labelings = 1;
    const LabeledDataset blobs = make_blobs(600, 3, 6.0, seed);
    const ExperimentSet set = make_experiment_instances(blobs, sim);
    const PUDataset& pu = set.instances.front().train;

    EMConfig cfg;
    cfg.max_iters = 60;
    cfg.retrain_after = false;  // keep the raw EM classifier for the fixed-point probe
    const EMResult res = run_em(pu, cfg);

    double worst_drop = 0.0;
    for (std::size_t i = 1; i < res.trace.size(); ++i) {
        worst_drop = std::max(worst_drop, res.trace[i - 1].loglik - res.trace[i].loglik);
    }

    // one extra EM iteration from the converged models
    const auto yh = e_step(res.classifier, res.propensity, pu, cfg.inner.prob_clip);
    const auto [f2, e2] = m_step(yh, pu, cfg, res.classifier, res.propensity);
    const double before = loglikelihood(res.classifier, res.propensity, pu, cfg.inner.prob_clip);
    const double after = loglikelihood(f2, e2, pu, cfg.inner.prob_clip);
    const double extra_gain = (after - before) / std::max(1.0, std::abs(before));

    CheckResult r;
    r.name = "em-fixed-point";
    r.passed = worst_drop <= 1e-9 && extra_gain >= -1e-12 && extra_gain < 1e-4;
    std::ostringstream os;
    os << "max per-step log-likelihood drop = " << worst_drop
       << " (allowed 1e-9); relative gain of one extra iteration after convergence = "
       << extra_gain << " (must be in [-1e-12, 1e-4))";
    r.detail = os.str();
    return r;
}

}  // namespace sarpu
