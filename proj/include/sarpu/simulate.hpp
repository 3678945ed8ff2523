#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sarpu/common.hpp"
#include "sarpu/matrix.hpp"
#include "sarpu/types.hpp"

namespace sarpu {

struct SimulationConfig {
    int k_clusters = 5;
    int k_prop_attrs = 2;
    double p_low = 0.2;
    double p_high = 0.8;
    int n_splits = 5;
    int n_labelings = 5;
    double test_fraction = 0.2;
    std::uint64_t seed = 1;

    void validate() const {
        if (k_clusters < 1) throw std::invalid_argument("SimulationConfig: k_clusters >= 1");
        if (k_prop_attrs < 0) throw std::invalid_argument("SimulationConfig: k_prop_attrs >= 0");
        if (!(p_low > 0.0 && p_low <= p_high && p_high < 1.0)) {
            throw std::invalid_argument("SimulationConfig: need 0 < p_low <= p_high < 1");
        }
        if (n_splits < 1 || n_labelings < 1) {
            throw std::invalid_argument("SimulationConfig: n_splits, n_labelings >= 1");
        }
        if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
            throw std::invalid_argument("SimulationConfig: test_fraction in (0,1)");
        }
    }
};

// Geometric-mean propensity: prod_i (p_low^(1-x_i) * p_high^(x_i))^(1/k).
// Always lands in [p_low, p_high], monotone in each coordinate.
inline double propensity_score(std::span<const double> x_e, double p_low, double p_high) {
    const std::size_t k = x_e.size();
    if (k == 0) return p_high;
    double log_acc = 0.0;
    for (double v : x_e) {
        if (v != 0.0 && v != 1.0) {
            throw std::invalid_argument("propensity_score: x_e must be binary");
        }
        log_acc += v == 1.0 ? std::log(p_high) : std::log(p_low);
    }
    return std::exp(log_acc / static_cast<double>(k));
}

// Lloyd's iterations from k-means++ seeding; runs to an assignment fixpoint
// or max_iters. Deterministic given the seed.
inline std::vector<std::size_t> kmeans(const Matrix& features, std::size_t k,
                                       std::uint64_t seed, int max_iters = 100) {
    const std::size_t n = features.rows;
    const std::size_t d = features.cols;
    if (k < 1 || k > n) throw std::invalid_argument("kmeans: need 1 <= k <= n");

    auto rng = make_rng(substream(seed, 0x6b6d6561));  // "kmea"
    auto sq_dist = [&](std::span<const double> a, std::span<const double> b) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.size(); ++j) {
            const double diff = a[j] - b[j];
            s += diff * diff;
        }
        return s;
    };

    // k-means++: first centre uniform, then proportional to squared distance
    std::vector<std::vector<double>> centres;
    centres.reserve(k);
    {
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        const auto first = features.row(pick(rng));
        centres.emplace_back(first.begin(), first.end());
        std::vector<double> dist2(n);
        while (centres.size() < k) {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double best = std::numeric_limits<double>::infinity();
                for (const auto& c : centres) best = std::min(best, sq_dist(features.row(i), c));
                dist2[i] = best;
                total += best;
            }
            std::size_t chosen = 0;
            if (total > 0.0) {
                std::uniform_real_distribution<double> u(0.0, total);
                double target = u(rng), acc = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    acc += dist2[i];
                    if (acc >= target) {
                        chosen = i;
                        break;
                    }
                }
            } else {
                std::uniform_int_distribution<std::size_t> pick2(0, n - 1);
                chosen = pick2(rng);
            }
            const auto row = features.row(chosen);
            centres.emplace_back(row.begin(), row.end());
        }
    }

    std::vector<std::size_t> assign(n, 0);
    for (int iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double dd = sq_dist(features.row(i), centres[c]);
                if (dd < best_d) {
                    best_d = dd;
                    best = c;
                }
            }
            if (assign[i] != best) {
                assign[i] = best;
                changed = true;
            }
        }
        if (!changed && iter > 0) break;

        std::vector<std::vector<double>> sums(k, std::vector<double>(d, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = features.row(i);
            for (std::size_t j = 0; j < d; ++j) sums[assign[i]][j] += row[j];
            ++counts[assign[i]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;  // empty cluster keeps its centre
            for (std::size_t j = 0; j < d; ++j) {
                centres[c][j] = sums[c][j] / static_cast<double>(counts[c]);
            }
        }
    }
    return assign;
}

struct PropensityAttachment {
    LabeledDataset data;                           // original + k binary columns
    std::vector<std::size_t> attr_indices;         // the appended columns
    std::vector<std::size_t> cluster_assignment;
    std::vector<std::vector<double>> theta;        // [cluster][attr] Bernoulli parameter
};

// Cluster the original attributes, draw a Bernoulli parameter per
// (cluster, attribute) pair, and sample the binary propensity attributes.
inline PropensityAttachment attach_propensity_attrs(const LabeledDataset& data,
                                                    const SimulationConfig& cfg,
                                                    std::uint64_t stream) {
    cfg.validate();
    if (data.features.rows == 0) throw std::invalid_argument("attach_propensity_attrs: empty data");
    if (static_cast<std::size_t>(cfg.k_clusters) > data.features.rows) {
        throw std::invalid_argument("attach_propensity_attrs: k_clusters > n");
    }

    PropensityAttachment out;
    out.data = data;
    if (cfg.k_prop_attrs == 0) return out;

    out.cluster_assignment =
        kmeans(data.features, static_cast<std::size_t>(cfg.k_clusters), substream(stream, 1));

    auto rng = make_rng(substream(stream, 2));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    out.theta.assign(static_cast<std::size_t>(cfg.k_clusters),
                     std::vector<double>(static_cast<std::size_t>(cfg.k_prop_attrs), 0.0));
    for (auto& row : out.theta) {
        for (double& t : row) t = unit(rng);
    }

    const std::size_t n = data.features.rows;
    for (int a = 0; a < cfg.k_prop_attrs; ++a) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double t = out.theta[out.cluster_assignment[i]][static_cast<std::size_t>(a)];
            col[i] = unit(rng) < t ? 1.0 : 0.0;
        }
        out.attr_indices.push_back(append_column(out.data.features, col));
    }
    return out;
}

// Draw the observation labels: s_i ~ Bernoulli(y_i * e(x_e,i)). The returned
// dataset keeps the hidden classes and true propensities for evaluation.
inline PUDataset label_pu(const LabeledDataset& data,
                          std::span<const std::size_t> prop_attr_indices,
                          const SimulationConfig& cfg, std::uint64_t stream) {
    cfg.validate();
    PUDataset pu;
    pu.features = data.features;
    pu.hidden_classes = data.classes;
    pu.propensity_attr_indices.assign(prop_attr_indices.begin(), prop_attr_indices.end());

    const std::size_t n = data.features.rows;
    std::vector<double> e(n);
    std::vector<double> xe(prop_attr_indices.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < prop_attr_indices.size(); ++j) {
            xe[j] = data.features(i, prop_attr_indices[j]);
        }
        e[i] = propensity_score(xe, cfg.p_low, cfg.p_high);
    }
    pu.true_propensity = std::move(e);

    auto rng = make_rng(substream(stream, 3));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    pu.observed.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = unit(rng);  // one draw per row regardless of class
        pu.observed[i] =
            (data.classes[i] == 1 && u < (*pu.true_propensity)[i]) ? 1 : 0;
    }
    return pu;
}

// Held-out data for evaluation: true classes plus the true propensity of
// each row, so both the classifier and the propensity model can be scored.
struct EvalDataset {
    Matrix features;
    std::vector<int> classes;
    std::vector<double> true_propensity;
    std::vector<std::size_t> propensity_attr_indices;
};

struct ExperimentInstance {
    int split = 0;
    int labeling = 0;
    PUDataset train;
    EvalDataset test;
};

struct ExperimentSet {
    std::vector<ExperimentInstance> instances;
    PropensityAttachment attachment;  // shared columns and theta table
};

// The full protocol: attach propensity attributes once, then for each of
// n_splits random 80/20 partitions draw n_labelings independent PU
// labelings of the training side. Substreams are keyed on (seed, split,
// labeling) so any instance can be regenerated in isolation.
inline ExperimentSet make_experiment_instances(const LabeledDataset& data,
                                               const SimulationConfig& cfg) {
    cfg.validate();
    ExperimentSet out;
    out.attachment = attach_propensity_attrs(data, cfg, substream(cfg.seed, 0x61747472));

    const LabeledDataset& full = out.attachment.data;
    const std::size_t n = full.features.rows;
    const auto n_test = static_cast<std::size_t>(
        std::llround(cfg.test_fraction * static_cast<double>(n)));
    if (n_test == 0 || n_test >= n) {
        throw std::invalid_argument("make_experiment_instances: degenerate split size");
    }

    std::vector<double> xe(out.attachment.attr_indices.size());
    for (int split = 0; split < cfg.n_splits; ++split) {
        std::vector<std::size_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        auto split_rng = make_rng(substream(cfg.seed, 0x73706c74, split));
        std::shuffle(perm.begin(), perm.end(), split_rng);
        const std::vector<std::size_t> test_idx(perm.begin(),
                                                perm.begin() + static_cast<long>(n_test));
        const std::vector<std::size_t> train_idx(perm.begin() + static_cast<long>(n_test),
                                                 perm.end());

        LabeledDataset train_full;
        train_full.features = select_rows(full.features, train_idx);
        train_full.classes.reserve(train_idx.size());
        for (std::size_t i : train_idx) train_full.classes.push_back(full.classes[i]);

        EvalDataset test;
        test.features = select_rows(full.features, test_idx);
        for (std::size_t i : test_idx) test.classes.push_back(full.classes[i]);
        test.propensity_attr_indices = out.attachment.attr_indices;
        test.true_propensity.resize(test_idx.size());
        for (std::size_t t = 0; t < test_idx.size(); ++t) {
            for (std::size_t j = 0; j < out.attachment.attr_indices.size(); ++j) {
                xe[j] = test.features(t, out.attachment.attr_indices[j]);
            }
            test.true_propensity[t] = propensity_score(xe, cfg.p_low, cfg.p_high);
        }

        for (int labeling = 0; labeling < cfg.n_labelings; ++labeling) {
            ExperimentInstance inst;
            inst.split = split;
            inst.labeling = labeling;
            inst.train = label_pu(train_full, out.attachment.attr_indices, cfg,
                                  substream(cfg.seed, 0x6c61626c, split, labeling));
            inst.test = test;
            out.instances.push_back(std::move(inst));
        }
    }
    return out;
}

// Two Gaussian blobs scaled into [-1,1]; the label is the blob membership.
// `separation` is the distance between the blob centres before scaling.
inline LabeledDataset make_blobs(std::size_t n, std::size_t dims, double separation,
                                 std::uint64_t seed, double positive_fraction = 0.5) {
    if (n < 2 || dims < 1) throw std::invalid_argument("make_blobs: need n >= 2, dims >= 1");
    if (!(positive_fraction > 0.0 && positive_fraction < 1.0)) {
        throw std::invalid_argument("make_blobs: positive_fraction in (0,1)");
    }
    auto rng = make_rng(substream(seed, 0x626c6f62));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Matrix features(n, dims);
    std::vector<int> classes(n);
    const double shift = separation / (2.0 * std::sqrt(static_cast<double>(dims)));
    for (std::size_t i = 0; i < n; ++i) {
        classes[i] = unit(rng) < positive_fraction ? 1 : 0;
        const double centre = classes[i] == 1 ? shift : -shift;
        for (std::size_t j = 0; j < dims; ++j) features(i, j) = centre + gauss(rng);
    }

    // min-max scale each column into [-1,1]
    for (std::size_t j = 0; j < dims; ++j) {
        double lo = features(0, j), hi = features(0, j);
        for (std::size_t i = 1; i < n; ++i) {
            lo = std::min(lo, features(i, j));
            hi = std::max(hi, features(i, j));
        }
        const double span = hi - lo;
        for (std::size_t i = 0; i < n; ++i) {
            features(i, j) = span > 0.0 ? 2.0 * (features(i, j) - lo) / span - 1.0 : 0.0;
        }
    }

    LabeledDataset out;
    out.features = std::move(features);
    out.classes = std::move(classes);
    return out;
}

// Text manifest describing one simulation run.
inline std::string simulation_manifest(const SimulationConfig& cfg,
                                       const PropensityAttachment& att) {
    std::ostringstream os;
    os << "SARPU-MANIFEST v1\n";
    os << "seed " << cfg.seed << "\n";
    os << "k_clusters " << cfg.k_clusters << "\n";
    os << "k_prop_attrs " << cfg.k_prop_attrs << "\n";
    os << "p_low " << format_double(cfg.p_low) << "\n";
    os << "p_high " << format_double(cfg.p_high) << "\n";
    os << "n_splits " << cfg.n_splits << "\n";
    os << "n_labelings " << cfg.n_labelings << "\n";
    os << "test_fraction " << format_double(cfg.test_fraction) << "\n";
    os << "theta";
    for (const auto& row : att.theta) {
        for (double t : row) os << " " << format_double(t);
    }
    os << "\n";
    return os.str();
}

}  // namespace sarpu
