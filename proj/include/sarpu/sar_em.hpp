#pragma once

#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sarpu/glm.hpp"
#include "sarpu/types.hpp"
#include "sarpu/weighting.hpp"

namespace sarpu {

// Expectation-maximization that jointly fits the classifier f (all
// attributes) and the propensity model e (propensity attributes only).
//
// Convergence needs both the log likelihood and the propensity model to
// settle: the likelihood ratio test alone can trigger while the propensity
// predictions are still drifting. The propensity drift statistic is the
// mean absolute least-squares slope of each example's propensity prediction
// over the last slope_window iterations.
struct EMConfig {
    int max_iters = 500;
    double loglik_rel_tol = 1e-6;
    int slope_window = 10;
    double slope_tol = 1e-4;
    // M-step fits run unpenalized: each M step then maximizes the exact
    // expected log likelihood and the observed-data log likelihood is
    // monotone. Probability clipping keeps the fits bounded.
    TrainConfig inner = make_inner_defaults();
    bool warm_start = true;   // cold start available for ablation
    bool retrain_after = true;
    double e_floor = kDefaultPropensityFloor;  // used by the retrain step

    static TrainConfig make_inner_defaults() {
        TrainConfig c;
        c.l2_strength = 0.0;   // the M-step objective must match the Q-function exactly
        c.max_epochs = 200;
        // With no penalty the optimum can sit at infinity on separable data,
        // so a tight gradient tolerance would burn max_epochs every M-step.
        c.grad_tolerance = 1e-4;
        return c;
    }

    void validate() const {
        inner.validate();
        if (max_iters < 1) throw std::invalid_argument("EMConfig: max_iters must be >= 1");
        if (!(loglik_rel_tol > 0.0)) {
            throw std::invalid_argument("EMConfig: loglik_rel_tol must be > 0");
        }
        if (slope_window < 2) throw std::invalid_argument("EMConfig: slope_window must be >= 2");
        if (!(slope_tol > 0.0)) throw std::invalid_argument("EMConfig: slope_tol must be > 0");
    }
};

struct EMState {
    LinearModel classifier;        // f, over all attributes
    LinearModel propensity;        // e, over propensity attributes only
    std::vector<double> yhat;      // expected positive-class probabilities
    double loglik = -std::numeric_limits<double>::infinity();
    int iteration = 0;
    std::deque<std::vector<double>> propensity_history;  // last slope_window prediction vectors
};

struct EMTraceRow {
    int iteration = 0;
    double loglik = 0.0;
    double mean_yhat = 0.0;
    double mean_ehat = 0.0;
    double slope_stat = std::numeric_limits<double>::quiet_NaN();
};

struct EMResult {
    LinearModel classifier;
    LinearModel propensity;
    std::vector<double> e_hat_train;  // propensity predictions on the training rows
    std::vector<EMTraceRow> trace;
    bool converged = false;
    int iterations = 0;
};

namespace detail {

inline double mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// E-step on already computed probability vectors.
inline std::vector<double> estep_values(std::span<const double> f_prob,
                                        std::span<const double> e_prob,
                                        std::span<const int> s) {
    std::vector<double> yhat(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == 1) {
            yhat[i] = 1.0;
        } else {
            yhat[i] = f_prob[i] * (1.0 - e_prob[i]) / (1.0 - f_prob[i] * e_prob[i]);
        }
    }
    return yhat;
}

inline double loglik_values(std::span<const double> f_prob, std::span<const double> e_prob,
                            std::span<const int> s) {
    double ll = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double p = f_prob[i] * e_prob[i];
        ll += s[i] == 1 ? std::log(p) : std::log(1.0 - p);
    }
    return ll;
}

// Mean absolute least-squares slope over the prediction history; the x axis
// is the iteration index within the window.
inline double mean_abs_slope(const std::deque<std::vector<double>>& history) {
    const std::size_t w = history.size();
    const std::size_t n = history.front().size();
    const double tbar = (static_cast<double>(w) - 1.0) / 2.0;
    double sxx = 0.0;
    for (std::size_t k = 0; k < w; ++k) {
        const double d = static_cast<double>(k) - tbar;
        sxx += d * d;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double sxy = 0.0;
        for (std::size_t k = 0; k < w; ++k) {
            sxy += (static_cast<double>(k) - tbar) * history[k][i];
        }
        acc += std::abs(sxy / sxx);
    }
    return acc / static_cast<double>(n);
}

}  // namespace detail

// Expected probability of the positive class given the current models.
// Labeled rows are positive by definition; unlabeled rows get the posterior
// f(x)(1 - e(x_e)) / (1 - f(x) e(x_e)).
inline std::vector<double> e_step(const LinearModel& f, const LinearModel& e,
                                  const PUDataset& pu, double prob_clip = 1e-6) {
    const Matrix xe = propensity_features(pu);
    const auto f_prob = predict_proba(f, pu.features, prob_clip);
    const auto e_prob = predict_proba(e, xe, prob_clip);
    return detail::estep_values(f_prob, e_prob, pu.observed);
}

// Refit both models against the expected labels. The classifier sees every
// example twice, as a positive weighted yhat and a negative weighted
// 1 - yhat; the propensity model sees each example once with target s and
// weight yhat (negatives carry no propensity information).
inline std::pair<LinearModel, LinearModel> m_step(
    std::span<const double> yhat, const PUDataset& pu, const EMConfig& cfg,
    const std::optional<LinearModel>& warm_f = std::nullopt,
    const std::optional<LinearModel>& warm_e = std::nullopt) {
    cfg.validate();
    if (yhat.size() != pu.size()) {
        throw std::invalid_argument("m_step: yhat length mismatch");
    }
    double total = 0.0;
    for (double v : yhat) total += v;
    if (!(total > 0.0)) {
        throw std::invalid_argument("m_step: all-zero yhat, cannot fit propensity model");
    }

    std::vector<WeightedExample> f_examples;
    f_examples.reserve(2 * pu.size());
    for (std::size_t i = 0; i < pu.size(); ++i) {
        const auto row = pu.features.row(i);
        f_examples.push_back({row, 1, yhat[i]});
        f_examples.push_back({row, 0, 1.0 - yhat[i]});
    }
    LinearModel f = fit_weighted(f_examples, cfg.inner, warm_f);

    const Matrix xe = propensity_features(pu);
    std::vector<WeightedExample> e_examples;
    e_examples.reserve(pu.size());
    for (std::size_t i = 0; i < pu.size(); ++i) {
        e_examples.push_back({xe.row(i), pu.observed[i], yhat[i]});
    }
    LinearModel e = fit_weighted(e_examples, cfg.inner, warm_e);
    return {std::move(f), std::move(e)};
}

// Observed-data log likelihood: Pr(s=1|x) = f(x) e(x_e) under the joint model.
inline double loglikelihood(const LinearModel& f, const LinearModel& e, const PUDataset& pu,
                            double prob_clip = 1e-6) {
    const Matrix xe = propensity_features(pu);
    const auto f_prob = predict_proba(f, pu.features, prob_clip);
    const auto e_prob = predict_proba(e, xe, prob_clip);
    return detail::loglik_values(f_prob, e_prob, pu.observed);
}

// Starting point: a balanced fit that treats unlabeled rows as negative,
// its predictions reused as initial class-probability estimates, and a
// propensity model fitted against those.
inline EMState initialize(const PUDataset& pu, const EMConfig& cfg) {
    cfg.validate();
    EMState st;
    st.classifier = balanced_fit(pu.features, pu.observed, cfg.inner);
    const auto f_prob = predict_proba(st.classifier, pu.features, cfg.inner.prob_clip);
    st.yhat.resize(pu.size());
    for (std::size_t i = 0; i < pu.size(); ++i) {
        st.yhat[i] = pu.observed[i] == 1 ? 1.0 : f_prob[i];
    }
    const Matrix xe = propensity_features(pu);
    std::vector<WeightedExample> e_examples;
    e_examples.reserve(pu.size());
    for (std::size_t i = 0; i < pu.size(); ++i) {
        e_examples.push_back({xe.row(i), pu.observed[i], st.yhat[i]});
    }
    st.propensity = fit_weighted(e_examples, cfg.inner);
    st.loglik = loglikelihood(st.classifier, st.propensity, pu, cfg.inner.prob_clip);
    st.iteration = 0;
    return st;
}

// Full EM loop. Stops when the relative log-likelihood improvement falls
// under loglik_rel_tol AND the propensity drift statistic falls under
// slope_tol, or at max_iters (reported in the trace, not an error). When
// retrain_after is set the final classifier is re-fit by propensity-weighted
// ERM against the learned propensities, which is the better classifier when
// the classes are not separable.
inline EMResult run_em(const PUDataset& pu, const EMConfig& cfg) {
    cfg.validate();
    EMState st = initialize(pu, cfg);
    const double clip = cfg.inner.prob_clip;
    const Matrix xe = propensity_features(pu);

    EMResult result;
    auto record = [&](double slope_stat) {
        const auto e_prob = predict_proba(st.propensity, xe, clip);
        EMTraceRow row;
        row.iteration = st.iteration;
        row.loglik = st.loglik;
        row.mean_yhat = detail::mean(st.yhat);
        row.mean_ehat = detail::mean(e_prob);
        row.slope_stat = slope_stat;
        result.trace.push_back(row);
        st.propensity_history.push_back(e_prob);
        if (st.propensity_history.size() >
            static_cast<std::size_t>(cfg.slope_window)) {
            st.propensity_history.pop_front();
        }
    };
    record(std::numeric_limits<double>::quiet_NaN());

    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        const auto f_prob = predict_proba(st.classifier, pu.features, clip);
        const auto e_prob = predict_proba(st.propensity, xe, clip);
        st.yhat = detail::estep_values(f_prob, e_prob, pu.observed);

        const std::optional<LinearModel> warm_f =
            cfg.warm_start ? std::optional<LinearModel>(st.classifier) : std::nullopt;
        const std::optional<LinearModel> warm_e =
            cfg.warm_start ? std::optional<LinearModel>(st.propensity) : std::nullopt;
        auto [f, e] = m_step(st.yhat, pu, cfg, warm_f, warm_e);
        st.classifier = std::move(f);
        st.propensity = std::move(e);

        const double prev = st.loglik;
        st.loglik = loglikelihood(st.classifier, st.propensity, pu, clip);
        st.iteration = iter;

        double slope_stat = std::numeric_limits<double>::quiet_NaN();
        record(slope_stat);
        if (st.propensity_history.size() ==
            static_cast<std::size_t>(cfg.slope_window)) {
            slope_stat = detail::mean_abs_slope(st.propensity_history);
            result.trace.back().slope_stat = slope_stat;
        }

        const double rel =
            std::abs(st.loglik - prev) / std::max(1.0, std::abs(prev));
        if (rel < cfg.loglik_rel_tol && !std::isnan(slope_stat) &&
            slope_stat < cfg.slope_tol) {
            result.converged = true;
            break;
        }
    }

    result.iterations = st.iteration;
    result.e_hat_train = predict_proba(st.propensity, xe, clip);
    result.propensity = st.propensity;
    if (cfg.retrain_after) {
        result.classifier =
            train_pw_classifier(pu, result.e_hat_train, cfg.inner, cfg.e_floor);
    } else {
        result.classifier = st.classifier;
    }
    return result;
}

inline std::string em_trace_header() {
    return "iteration\tloglik\tmean_yhat\tmean_ehat\tslope";
}

inline std::string em_trace_line(const EMTraceRow& r) {
    std::ostringstream os;
    os << r.iteration << "\t" << format_double(r.loglik) << "\t"
       << format_double(r.mean_yhat) << "\t" << format_double(r.mean_ehat) << "\t"
       << (std::isnan(r.slope_stat) ? std::string("na") : format_double(r.slope_stat));
    return os.str();
}

}  // namespace sarpu
