#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "sarpu/glm.hpp"
#include "sarpu/sar_em.hpp"
#include "sarpu/scar.hpp"
#include "sarpu/simulate.hpp"

namespace sarpu {

inline double mse_prob(std::span<const double> yhat, std::span<const int> y) {
    if (yhat.size() != y.size()) throw std::invalid_argument("mse_prob: length mismatch");
    if (yhat.empty()) throw std::invalid_argument("mse_prob: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = yhat[i] - static_cast<double>(y[i]);
        s += d * d;
    }
    return s / static_cast<double>(y.size());
}

// Midrank Mann-Whitney: Pr(score of random positive > score of random
// negative), ties counted half.
inline double roc_auc(std::span<const double> scores, std::span<const int> y) {
    if (scores.size() != y.size()) throw std::invalid_argument("roc_auc: length mismatch");
    const std::size_t n = y.size();
    std::size_t n_pos = 0;
    for (int v : y) {
        if (v != 0 && v != 1) throw std::invalid_argument("roc_auc: labels must be 0/1");
        n_pos += static_cast<std::size_t>(v);
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("roc_auc: single-class labels");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // midranks over tie groups; 1-based ranks
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) {
            if (y[order[k]] == 1) rank_sum_pos += midrank;
        }
        i = j + 1;
    }
    const double np = static_cast<double>(n_pos);
    const double nn = static_cast<double>(n_neg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

// Propensity-model MSE over the rows whose hidden class is positive; the
// estimator bias depends on e only through the positives.
inline double mse_propensity(std::span<const double> e_hat, std::span<const double> e_true,
                             std::span<const int> y) {
    if (e_hat.size() != e_true.size() || e_hat.size() != y.size()) {
        throw std::invalid_argument("mse_propensity: length mismatch");
    }
    double s = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] != 1) continue;
        const double d = e_hat[i] - e_true[i];
        s += d * d;
        ++n_pos;
    }
    if (n_pos == 0) throw std::invalid_argument("mse_propensity: no positive rows");
    return s / static_cast<double>(n_pos);
}

enum class Method { Naive, ScarEn, SarStrat, SarEm, SarTrueE, Supervised };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::Naive: return "naive";
        case Method::ScarEn: return "scar-en";
        case Method::SarStrat: return "sar-strat";
        case Method::SarEm: return "sar-em";
        case Method::SarTrueE: return "sar-true-e";
        case Method::Supervised: return "supervised";
    }
    throw std::logic_error("method_name: unreachable");
}

inline Method parse_method(const std::string& name) {
    if (name == "naive") return Method::Naive;
    if (name == "scar-en") return Method::ScarEn;
    if (name == "sar-strat" || name == "sar-scar-strat") return Method::SarStrat;
    if (name == "sar-em") return Method::SarEm;
    if (name == "sar-true-e") return Method::SarTrueE;
    if (name == "supervised") return Method::Supervised;
    throw std::invalid_argument("unknown method: " + name);
}

inline std::vector<Method> all_methods() {
    return {Method::Naive,  Method::ScarEn,   Method::SarStrat,
            Method::SarEm,  Method::SarTrueE, Method::Supervised};
}

// A trained method: a classifier plus whatever propensity representation the
// method produces (nothing, a constant c, a per-stratum table, or a model).
struct TrainedMethod {
    Method method = Method::Naive;
    LinearModel classifier;
    enum class EKind { None, Constant, Stratified, Model, TrueE } ekind = EKind::None;
    double e_constant = 1.0;
    std::optional<Stratification> strat;
    std::optional<LinearModel> e_model;

    // propensity estimate for rows of an evaluation matrix
    std::vector<double> propensity_on(const Matrix& features,
                                      std::span<const std::size_t> prop_idx,
                                      std::span<const double> true_e,
                                      double prob_clip = 1e-6) const {
        const std::size_t n = features.rows;
        std::vector<double> out(n, e_constant);
        switch (ekind) {
            case EKind::None:
            case EKind::Constant:
                return out;
            case EKind::TrueE:
                return {true_e.begin(), true_e.end()};
            case EKind::Stratified: {
                std::vector<long long> key(prop_idx.size());
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t j = 0; j < prop_idx.size(); ++j) {
                        key[j] = static_cast<long long>(std::llround(features(i, prop_idx[j])));
                    }
                    out[i] = strat->c_for(key);
                }
                return out;
            }
            case EKind::Model: {
                const Matrix xe = select_cols(features, prop_idx);
                return predict_proba(*e_model, xe, prob_clip);
            }
        }
        throw std::logic_error("propensity_on: unreachable");
    }

    bool has_propensity() const { return ekind != EKind::None; }
};

struct MethodOptions {
    TrainConfig train;       // baselines and supervised
    EMConfig em;             // sar-em
    double e_floor = kDefaultPropensityFloor;
};

inline TrainedMethod train_method(Method method, const PUDataset& pu,
                                  const MethodOptions& opt = MethodOptions{}) {
    TrainedMethod out;
    out.method = method;
    switch (method) {
        case Method::Naive: {
            out.classifier = train_naive(pu, opt.train);
            out.ekind = TrainedMethod::EKind::None;
            break;
        }
        case Method::ScarEn: {
            const LinearModel s_model = train_naive(pu, opt.train);
            const ScarEstimate est = estimate_c(pu, s_model, opt.train.prob_clip);
            out.classifier = train_scar(pu, est.c, opt.train, opt.e_floor);
            out.ekind = TrainedMethod::EKind::Constant;
            out.e_constant = est.c;
            break;
        }
        case Method::SarStrat: {
            auto [strat, model] = reduce_sar_to_scar(pu, opt.train, opt.e_floor);
            out.classifier = std::move(model);
            out.strat = std::move(strat);
            out.ekind = TrainedMethod::EKind::Stratified;
            break;
        }
        case Method::SarEm: {
            const EMResult em = run_em(pu, opt.em);
            out.classifier = em.classifier;
            out.e_model = em.propensity;
            out.ekind = TrainedMethod::EKind::Model;
            break;
        }
        case Method::SarTrueE: {
            if (!pu.true_propensity) {
                throw std::invalid_argument("sar-true-e: instance lacks true propensities");
            }
            out.classifier = train_pw_classifier(pu, *pu.true_propensity, opt.train, opt.e_floor);
            out.ekind = TrainedMethod::EKind::TrueE;
            break;
        }
        case Method::Supervised: {
            if (!pu.hidden_classes) {
                throw std::invalid_argument("supervised: instance lacks hidden classes");
            }
            out.classifier = fit_plain(pu.features, *pu.hidden_classes, opt.train);
            out.ekind = TrainedMethod::EKind::None;
            break;
        }
    }
    return out;
}

struct MetricSummary {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double ci_halfwidth = std::numeric_limits<double>::quiet_NaN();
    std::size_t n = 0;
    bool degenerate = false;  // fewer than 2 values: CI undefined
};

inline MetricSummary summarize(std::span<const double> values) {
    MetricSummary out;
    out.n = values.size();
    if (values.empty()) {
        out.degenerate = true;
        return out;
    }
    double sum = 0.0;
    for (double v : values) sum += v;
    out.mean = sum / static_cast<double>(values.size());
    if (values.size() < 2) {
        out.degenerate = true;
        return out;
    }
    double ss = 0.0;
    for (double v : values) {
        const double d = v - out.mean;
        ss += d * d;
    }
    const double var = ss / static_cast<double>(values.size() - 1);
    if (var == 0.0) {
        out.ci_halfwidth = 0.0;
        return out;
    }
    const boost::math::students_t dist(static_cast<double>(values.size() - 1));
    const double t = boost::math::quantile(dist, 0.975);
    out.ci_halfwidth = t * std::sqrt(var / static_cast<double>(values.size()));
    return out;
}

struct InstanceRecord {
    int split = 0;
    int labeling = 0;
    bool failed = false;
    std::string failure;
    double mse_f = std::numeric_limits<double>::quiet_NaN();
    double auc_f = std::numeric_limits<double>::quiet_NaN();
    double mse_e = std::numeric_limits<double>::quiet_NaN();  // NaN when method has no e
};

struct MethodResult {
    Method method = Method::Naive;
    std::vector<InstanceRecord> instances;
    std::size_t failures = 0;
    MetricSummary mse_f;
    MetricSummary auc_f;
    MetricSummary mse_e;
    bool reports_propensity = false;
};

struct BenchmarkOptions {
    MethodOptions method_options;
    bool propensity_mse_on_train = false;  // default: test positives
    int jobs = 1;
};

namespace detail {

inline InstanceRecord evaluate_instance(Method method, const ExperimentInstance& inst,
                                        const BenchmarkOptions& opt, bool* reports_e) {
    InstanceRecord rec;
    rec.split = inst.split;
    rec.labeling = inst.labeling;
    try {
        const TrainedMethod tm = train_method(method, inst.train, opt.method_options);
        const double clip_p = opt.method_options.train.prob_clip;
        const auto yhat = predict_proba(tm.classifier, inst.test.features, clip_p);
        rec.mse_f = mse_prob(yhat, inst.test.classes);
        rec.auc_f = roc_auc(yhat, inst.test.classes);
        if (tm.has_propensity()) {
            *reports_e = true;
            if (opt.propensity_mse_on_train) {
                if (!inst.train.true_propensity || !inst.train.hidden_classes) {
                    throw std::invalid_argument(
                        "train-side propensity MSE needs hidden y and true e");
                }
                const auto e_hat = tm.propensity_on(
                    inst.train.features, inst.train.propensity_attr_indices,
                    *inst.train.true_propensity, clip_p);
                rec.mse_e = mse_propensity(e_hat, *inst.train.true_propensity,
                                           *inst.train.hidden_classes);
            } else {
                const auto e_hat = tm.propensity_on(inst.test.features,
                                                    inst.test.propensity_attr_indices,
                                                    inst.test.true_propensity, clip_p);
                rec.mse_e = mse_propensity(e_hat, inst.test.true_propensity, inst.test.classes);
            }
        }
    } catch (const std::exception& ex) {
        rec.failed = true;
        rec.failure = ex.what();
    }
    return rec;
}

}  // namespace detail

// Train and evaluate each method on each instance. Failures are recorded and
// excluded from the aggregates. With jobs > 1 the (instance, method) units
// run on a thread pool; results are reduced in deterministic order.
inline std::vector<MethodResult> run_benchmark(const ExperimentSet& experiments,
                                               const std::vector<Method>& methods,
                                               const BenchmarkOptions& opt = BenchmarkOptions{}) {
    if (methods.empty()) throw std::invalid_argument("run_benchmark: no methods");
    const std::size_t n_inst = experiments.instances.size();
    const std::size_t n_units = n_inst * methods.size();
    std::vector<InstanceRecord> records(n_units);
    std::vector<char> reports_e(n_units, 0);

    auto run_unit = [&](std::size_t u) {
        const std::size_t m = u / n_inst;
        const std::size_t i = u % n_inst;
        bool re = false;
        records[u] =
            detail::evaluate_instance(methods[m], experiments.instances[i], opt, &re);
        reports_e[u] = re ? 1 : 0;
    };

    const int jobs = std::max(1, opt.jobs);
    if (jobs == 1 || n_units <= 1) {
        for (std::size_t u = 0; u < n_units; ++u) run_unit(u);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (;;) {
                const std::size_t u = next.fetch_add(1);
                if (u >= n_units) return;
                run_unit(u);
            }
        };
        std::vector<std::future<void>> pool;
        const int n_workers = std::min<int>(jobs, static_cast<int>(n_units));
        pool.reserve(static_cast<std::size_t>(n_workers));
        for (int w = 0; w < n_workers; ++w) {
            pool.push_back(std::async(std::launch::async, worker));
        }
        for (auto& f : pool) f.get();
    }

    std::vector<MethodResult> out;
    out.reserve(methods.size());
    for (std::size_t m = 0; m < methods.size(); ++m) {
        MethodResult res;
        res.method = methods[m];
        std::vector<double> v_mse, v_auc, v_e;
        for (std::size_t i = 0; i < n_inst; ++i) {
            const std::size_t u = m * n_inst + i;
            res.instances.push_back(records[u]);
            res.reports_propensity = res.reports_propensity || reports_e[u] != 0;
            if (records[u].failed) {
                ++res.failures;
                continue;
            }
            v_mse.push_back(records[u].mse_f);
            v_auc.push_back(records[u].auc_f);
            if (!std::isnan(records[u].mse_e)) v_e.push_back(records[u].mse_e);
        }
        res.mse_f = summarize(v_mse);
        res.auc_f = summarize(v_auc);
        res.mse_e = summarize(v_e);
        out.push_back(std::move(res));
    }
    return out;
}

namespace detail {

inline std::string summary_value(double v, bool degenerate) {
    return degenerate && std::isnan(v) ? std::string("na") : format_double(v);
}

}  // namespace detail

// dataset, method, metric, mean, ci_halfwidth, n_instances, failures
inline std::string benchmark_summary_table(const std::string& dataset,
                                           const std::vector<MethodResult>& results) {
    std::ostringstream os;
    os << "dataset\tmethod\tmetric\tmean\tci_halfwidth\tn_instances\tfailures\n";
    auto emit = [&](const MethodResult& r, const char* metric, const MetricSummary& s) {
        os << dataset << "\t" << method_name(r.method) << "\t" << metric << "\t"
           << detail::summary_value(s.mean, s.degenerate) << "\t"
           << (s.degenerate ? std::string("na") : format_double(s.ci_halfwidth)) << "\t"
           << s.n << "\t" << r.failures << "\n";
    };
    for (const auto& r : results) {
        emit(r, "mse_f", r.mse_f);
        emit(r, "roc_auc_f", r.auc_f);
        if (r.reports_propensity) emit(r, "mse_e", r.mse_e);
    }
    return os.str();
}

// One row per (method, instance): long-form data for external plotting.
inline std::string benchmark_long_table(const std::string& dataset,
                                        const std::vector<MethodResult>& results) {
    std::ostringstream os;
    os << "dataset\tmethod\tsplit\tlabeling\tstatus\tmse_f\troc_auc_f\tmse_e\n";
    auto cell = [](double v) { return std::isnan(v) ? std::string("na") : format_double(v); };
    for (const auto& r : results) {
        for (const auto& rec : r.instances) {
            os << dataset << "\t" << method_name(r.method) << "\t" << rec.split << "\t"
               << rec.labeling << "\t" << (rec.failed ? "failed" : "ok") << "\t"
               << cell(rec.mse_f) << "\t" << cell(rec.auc_f) << "\t" << cell(rec.mse_e)
               << "\n";
        }
    }
    return os.str();
}

}  // namespace sarpu
