#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <vector>

#include "sarpu/common.hpp"
#include "sarpu/matrix.hpp"
#include "sarpu/types.hpp"

namespace sarpu {

// l2_strength sentinel: resolve to 1/n at fit time.
inline constexpr double kAutoL2 = -1.0;

struct TrainConfig {
    double l2_strength = kAutoL2;  // penalty on weights only, never the intercept
    double learning_rate = 1.0;    // initial line-search step
    int max_epochs = 500;
    double grad_tolerance = 1e-6;  // stop on gradient max-norm
    double prob_clip = 1e-6;

    void validate() const {
        if (l2_strength != kAutoL2 && !(l2_strength >= 0.0)) {
            throw std::invalid_argument("TrainConfig: l2_strength must be >= 0");
        }
        if (!(learning_rate > 0.0)) {
            throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
        }
        if (max_epochs < 1) {
            throw std::invalid_argument("TrainConfig: max_epochs must be >= 1");
        }
        if (!(grad_tolerance > 0.0)) {
            throw std::invalid_argument("TrainConfig: grad_tolerance must be > 0");
        }
        if (!(prob_clip > 0.0 && prob_clip < 0.5)) {
            throw std::invalid_argument("TrainConfig: prob_clip must be in (0, 0.5)");
        }
    }

    double resolve_l2(std::size_t n) const {
        return l2_strength == kAutoL2 ? 1.0 / static_cast<double>(n) : l2_strength;
    }
};

// One training row. Weights may be negative (the propensity-weighted
// expansion produces them); the view must outlive the fit.
struct WeightedExample {
    std::span<const double> features;
    int target = 0;   // t in {0,1}
    double weight = 1.0;
};

struct FitTrace {
    std::vector<double> losses;  // one entry per epoch, before the step
    double final_grad_norm = std::numeric_limits<double>::infinity();
    int epochs = 0;
    bool converged = false;
};

inline double predict_one(const LinearModel& m, std::span<const double> x,
                          double prob_clip = 1e-6) {
    if (x.size() != m.dim()) {
        throw std::invalid_argument("predict: feature dimensionality mismatch");
    }
    return clip(sigmoid(m.score(x)), prob_clip, 1.0 - prob_clip);
}

inline std::vector<double> predict_proba(const LinearModel& m, const Matrix& features,
                                         double prob_clip = 1e-6) {
    if (features.cols != m.dim()) {
        throw std::invalid_argument("predict_proba: feature dimensionality mismatch");
    }
    std::vector<double> out(features.rows);
    for (std::size_t i = 0; i < features.rows; ++i) {
        out[i] = clip(sigmoid(m.score(features.row(i))), prob_clip, 1.0 - prob_clip);
    }
    return out;
}

namespace detail {

// Loss bookkeeping shared by the public loss/gradient entry points and the
// optimizer. The per-example log loss is evaluated on the clipped
// probability, so the loss stays bounded for negative weights; inside the
// clipped region the derivative w.r.t. the score is exactly zero.
struct ObjectiveParts {
    double positive_weight = 0.0;  // sum of max(w, 0)
    double abs_weight = 0.0;       // sum of |w|
};

inline ObjectiveParts weight_totals(std::span<const WeightedExample> examples) {
    ObjectiveParts p;
    for (const auto& ex : examples) {
        p.positive_weight += std::max(ex.weight, 0.0);
        p.abs_weight += std::abs(ex.weight);
    }
    return p;
}

inline void check_examples(std::span<const WeightedExample> examples, std::size_t dim) {
    if (examples.empty()) {
        throw std::invalid_argument("weighted fit: empty example list");
    }
    for (const auto& ex : examples) {
        if (ex.features.size() != dim) {
            throw std::invalid_argument("weighted fit: feature dimensionality mismatch");
        }
        if (!std::isfinite(ex.weight)) {
            throw std::invalid_argument("weighted fit: non-finite weight");
        }
        if (ex.target != 0 && ex.target != 1) {
            throw std::invalid_argument("weighted fit: target must be 0 or 1");
        }
    }
}

inline double example_loss(double z, int t, double eps) {
    const double p = clip(sigmoid(z), eps, 1.0 - eps);
    return t == 1 ? -std::log(p) : -std::log(1.0 - p);
}

// d(loss)/dz; zero once the raw probability leaves the clipped interval.
inline double example_dloss(double z, int t, double eps) {
    const double raw = sigmoid(z);
    if (raw <= eps || raw >= 1.0 - eps) return 0.0;
    return raw - static_cast<double>(t);
}

// Canonical example order: sort by content so that the floating-point sums,
// and therefore the fitted parameters, do not depend on presentation order.
inline std::vector<std::size_t> canonical_order(std::span<const WeightedExample> examples) {
    std::vector<std::size_t> idx(examples.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto key_less = [&](std::size_t a, std::size_t b) {
        const auto& ea = examples[a];
        const auto& eb = examples[b];
        if (ea.target != eb.target) return ea.target < eb.target;
        const auto wa = std::bit_cast<std::uint64_t>(ea.weight);
        const auto wb = std::bit_cast<std::uint64_t>(eb.weight);
        if (wa != wb) return wa < wb;
        for (std::size_t j = 0; j < ea.features.size(); ++j) {
            const auto fa = std::bit_cast<std::uint64_t>(ea.features[j]);
            const auto fb = std::bit_cast<std::uint64_t>(eb.features[j]);
            if (fa != fb) return fa < fb;
        }
        return false;
    };
    std::stable_sort(idx.begin(), idx.end(), key_less);
    return idx;
}

}  // namespace detail

struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad_weights;
    double grad_intercept = 0.0;

    double grad_max_norm() const {
        double m = std::abs(grad_intercept);
        for (double g : grad_weights) m = std::max(m, std::abs(g));
        return m;
    }
    double grad_sq_norm() const {
        double s = grad_intercept * grad_intercept;
        for (double g : grad_weights) s += g * g;
        return s;
    }
};

// Normalized weighted log loss: sum_i w_i * logloss_i / sum_i max(w_i, 0),
// plus 0.5 * l2 * |w|^2 on the weights. Negative weights are allowed; the
// normalizer counts positive mass only.
inline double weighted_log_loss(const LinearModel& m,
                                std::span<const WeightedExample> examples,
                                const TrainConfig& cfg) {
    cfg.validate();
    detail::check_examples(examples, m.dim());
    const auto totals = detail::weight_totals(examples);
    if (!(totals.positive_weight > 0.0)) {
        throw std::invalid_argument("weighted_log_loss: total positive weight must be > 0");
    }
    double acc = 0.0;
    for (const auto& ex : examples) {
        acc += ex.weight * detail::example_loss(m.score(ex.features), ex.target, cfg.prob_clip);
    }
    const double l2 = cfg.resolve_l2(examples.size());
    double reg = 0.0;
    for (double w : m.weights) reg += w * w;
    return acc / totals.positive_weight + 0.5 * l2 * reg;
}

// Loss and its analytic gradient, evaluated together.
inline LossGrad weighted_log_loss_grad(const LinearModel& m,
                                       std::span<const WeightedExample> examples,
                                       const TrainConfig& cfg) {
    cfg.validate();
    detail::check_examples(examples, m.dim());
    const auto totals = detail::weight_totals(examples);
    if (!(totals.positive_weight > 0.0)) {
        throw std::invalid_argument("weighted_log_loss_grad: total positive weight must be > 0");
    }
    LossGrad out;
    out.grad_weights.assign(m.dim(), 0.0);
    double acc = 0.0;
    for (const auto& ex : examples) {
        const double z = m.score(ex.features);
        acc += ex.weight * detail::example_loss(z, ex.target, cfg.prob_clip);
        const double g = ex.weight * detail::example_dloss(z, ex.target, cfg.prob_clip);
        for (std::size_t j = 0; j < m.dim(); ++j) {
            out.grad_weights[j] += g * ex.features[j];
        }
        out.grad_intercept += g;
    }
    const double wp = totals.positive_weight;
    const double l2 = cfg.resolve_l2(examples.size());
    double reg = 0.0;
    for (std::size_t j = 0; j < m.dim(); ++j) {
        reg += m.weights[j] * m.weights[j];
        out.grad_weights[j] = out.grad_weights[j] / wp + l2 * m.weights[j];
    }
    out.grad_intercept /= wp;
    out.loss = acc / wp + 0.5 * l2 * reg;
    return out;
}

// Full-batch gradient descent with backtracking line search. Deterministic:
// zero initialization (unless `init` is given), canonical example order, no
// randomness. Accepts negative example weights; a divergence guard aborts if
// the loss escapes the range the clipped per-example costs allow.
inline LinearModel fit_weighted(std::span<const WeightedExample> examples,
                                const TrainConfig& cfg,
                                const std::optional<LinearModel>& init = std::nullopt,
                                FitTrace* trace = nullptr) {
    cfg.validate();
    if (examples.empty()) {
        throw std::invalid_argument("fit_weighted: empty example list");
    }
    const std::size_t dim = examples.front().features.size();
    detail::check_examples(examples, dim);
    const auto totals = detail::weight_totals(examples);
    if (!(totals.positive_weight > 0.0)) {
        throw std::invalid_argument("fit_weighted: need at least one positive-weight example");
    }

    const auto order = detail::canonical_order(examples);
    std::vector<WeightedExample> ordered;
    ordered.reserve(examples.size());
    for (std::size_t i : order) ordered.push_back(examples[i]);

    LinearModel model;
    if (init) {
        if (init->dim() != dim) {
            throw std::invalid_argument("fit_weighted: init dimensionality mismatch");
        }
        model = *init;
    } else {
        model.weights.assign(dim, 0.0);
    }

    const double delta_max = -std::log(cfg.prob_clip);
    const double loss_floor = -(delta_max * totals.abs_weight / totals.positive_weight) - 1.0;
    auto guard = [&](double loss) {
        if (!std::isfinite(loss) || loss < loss_floor) {
            throw DivergenceError("fit_weighted: loss diverged (weight/feature pathology)");
        }
    };

    auto loss_at = [&](const LinearModel& m) {
        return weighted_log_loss(m, ordered, cfg);
    };

    LossGrad lg = weighted_log_loss_grad(model, ordered, cfg);
    guard(lg.loss);
    double step = cfg.learning_rate;
    int epoch = 0;
    bool converged = false;

    for (; epoch < cfg.max_epochs; ++epoch) {
        if (trace) trace->losses.push_back(lg.loss);
        if (lg.grad_max_norm() <= cfg.grad_tolerance) {
            converged = true;
            break;
        }
        const double g2 = lg.grad_sq_norm();
        double alpha = step;
        bool accepted = false;
        LinearModel cand = model;
        while (alpha >= 1e-20) {
            for (std::size_t j = 0; j < dim; ++j) {
                cand.weights[j] = model.weights[j] - alpha * lg.grad_weights[j];
            }
            cand.intercept = model.intercept - alpha * lg.grad_intercept;
            const double cl = loss_at(cand);
            guard(cl);
            if (cl <= lg.loss - 1e-4 * alpha * g2) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break;  // stalled at numeric precision
        model = cand;
        step = alpha * 2.0;
        lg = weighted_log_loss_grad(model, ordered, cfg);
        guard(lg.loss);
    }

    if (trace) {
        trace->final_grad_norm = lg.grad_max_norm();
        trace->epochs = epoch;
        trace->converged = converged;
    }
    return model;
}

// Supervised fit with class-balancing weights w = n / (2 * n_t).
inline LinearModel balanced_fit(const Matrix& features, std::span<const int> targets,
                                const TrainConfig& cfg) {
    if (features.rows != targets.size()) {
        throw std::invalid_argument("balanced_fit: length mismatch");
    }
    const std::size_t n = targets.size();
    std::size_t n1 = 0;
    for (int t : targets) {
        if (t != 0 && t != 1) throw std::invalid_argument("balanced_fit: targets must be 0/1");
        n1 += static_cast<std::size_t>(t);
    }
    if (n1 == 0 || n1 == n) {
        throw std::invalid_argument("balanced_fit: single-class input");
    }
    const double w1 = static_cast<double>(n) / (2.0 * static_cast<double>(n1));
    const double w0 = static_cast<double>(n) / (2.0 * static_cast<double>(n - n1));
    std::vector<WeightedExample> examples;
    examples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        examples.push_back({features.row(i), targets[i], targets[i] == 1 ? w1 : w0});
    }
    return fit_weighted(examples, cfg);
}

// Plain supervised fit, unit weights.
inline LinearModel fit_plain(const Matrix& features, std::span<const int> targets,
                             const TrainConfig& cfg) {
    if (features.rows != targets.size()) {
        throw std::invalid_argument("fit_plain: length mismatch");
    }
    std::vector<WeightedExample> examples;
    examples.reserve(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        examples.push_back({features.row(i), targets[i], 1.0});
    }
    return fit_weighted(examples, cfg);
}

inline std::string model_to_string(const LinearModel& m) {
    std::ostringstream os;
    os << "SARPU-MODEL v1\n";
    os << "dim " << m.dim() << "\n";
    os << "weights";
    for (double w : m.weights) os << " " << format_double(w);
    os << "\n";
    os << "intercept " << format_double(m.intercept) << "\n";
    return os.str();
}

inline LinearModel model_from_string(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line != "SARPU-MODEL v1") {
        throw DataError("model: bad or missing header");
    }
    std::string tag;
    std::size_t dim = 0;
    is >> tag >> dim;
    if (tag != "dim") throw DataError("model: expected dim record");
    is >> tag;
    if (tag != "weights") throw DataError("model: expected weights record");
    LinearModel m;
    m.weights.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        if (!(is >> m.weights[i])) throw DataError("model: truncated weights");
    }
    is >> tag >> m.intercept;
    if (tag != "intercept" || is.fail()) throw DataError("model: expected intercept record");
    return m;
}

inline void save_model(const std::string& path, const LinearModel& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << model_to_string(m);
}

inline LinearModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open for reading: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return model_from_string(buf.str());
}

}  // namespace sarpu
