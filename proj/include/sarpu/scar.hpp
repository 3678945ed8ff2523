#pragma once

#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sarpu/glm.hpp"
#include "sarpu/types.hpp"
#include "sarpu/weighting.hpp"

namespace sarpu {

// Label frequency c = Pr(s=1|y=1) and the class prior it implies,
// alpha = Pr(s=1)/c.
struct ScarEstimate {
    double c = 1.0;
    double alpha = 1.0;
};

// Supervised fit with the observation labels as targets: every unlabeled
// example is treated as negative.
inline LinearModel train_naive(const PUDataset& pu, const TrainConfig& cfg = TrainConfig{}) {
    bool has0 = false, has1 = false;
    for (int s : pu.observed) (s == 1 ? has1 : has0) = true;
    if (!has0 || !has1) throw std::invalid_argument("train_naive: s takes a single value");
    return fit_plain(pu.features, pu.observed, cfg);
}

// c estimated as the mean s-model prediction over the labeled rows. With a
// well-calibrated s-model and SCAR labeling, Pr(s=1|x) = c Pr(y=1|x), and
// labeled rows have Pr(y=1|x) near 1. Clipped below at mean(s) so the
// implied prior cannot exceed 1.
inline ScarEstimate estimate_c(const PUDataset& pu, const LinearModel& s_model,
                               double prob_clip = 1e-6) {
    const auto probs = predict_proba(s_model, pu.features, prob_clip);
    double sum_labeled = 0.0;
    std::size_t n_labeled = 0;
    for (std::size_t i = 0; i < pu.size(); ++i) {
        if (pu.observed[i] == 1) {
            sum_labeled += probs[i];
            ++n_labeled;
        }
    }
    if (n_labeled == 0) throw std::invalid_argument("estimate_c: no labeled rows");
    const double mean_s =
        static_cast<double>(n_labeled) / static_cast<double>(pu.size());
    ScarEstimate est;
    est.c = clip(sum_labeled / static_cast<double>(n_labeled), mean_s, 1.0);
    est.c = std::max(est.c, prob_clip);
    est.alpha = mean_s / est.c;
    return est;
}

// SCAR training: the propensity-weighted classifier with a constant
// propensity estimate.
inline LinearModel train_scar(const PUDataset& pu, double c,
                              const TrainConfig& cfg = TrainConfig{},
                              double e_floor = kDefaultPropensityFloor) {
    if (!(c > 0.0 && c <= 1.0)) throw std::invalid_argument("train_scar: c must be in (0,1]");
    const std::vector<double> e_hat(pu.size(), c);
    return train_pw_classifier(pu, e_hat, cfg, e_floor);
}

// One stratum of the SAR-to-SCAR reduction: the rows sharing a
// propensity-attribute configuration, with the SCAR estimate fitted there.
struct StratumInfo {
    std::vector<std::size_t> rows;
    std::size_t labeled = 0;
    ScarEstimate estimate;
    bool used_global_fallback = false;  // too few labeled rows or one-sided s
};

struct Stratification {
    // key = propensity-attribute configuration, rounded to integers
    std::map<std::vector<long long>, StratumInfo> strata;
    ScarEstimate global;
    std::vector<double> e_hat;  // pooled: e_hat[i] = c of row i's stratum

    double c_for(const std::vector<long long>& key) const {
        auto it = strata.find(key);
        return it == strata.end() ? global.c : it->second.estimate.c;
    }
};

namespace detail {

inline std::vector<long long> stratum_key(const PUDataset& pu, std::size_t row) {
    std::vector<long long> key;
    key.reserve(pu.propensity_attr_indices.size());
    for (std::size_t j : pu.propensity_attr_indices) {
        const double v = pu.features(row, j);
        const double r = std::round(v);
        if (std::abs(v - r) > 1e-9) {
            throw std::invalid_argument(
                "reduce_sar_to_scar: propensity attributes must be discrete");
        }
        key.push_back(static_cast<long long>(r));
    }
    return key;
}

}  // namespace detail

// Partition by propensity-attribute configuration; the propensity score is
// constant within a stratum, so each stratum is a SCAR problem. Per-stratum
// c comes from estimate_c on the stratum rows; strata that cannot support
// their own estimate (no labeled rows, or single-valued s so no naive model
// exists) fall back to the global estimate. The pooled e_hat vector assigns
// every row its stratum's c.
inline Stratification stratify(const PUDataset& pu, const TrainConfig& cfg = TrainConfig{}) {
    if (pu.propensity_attr_indices.empty()) {
        throw std::invalid_argument("stratify: no propensity attributes designated");
    }
    Stratification out;
    for (std::size_t i = 0; i < pu.size(); ++i) {
        auto& stratum = out.strata[detail::stratum_key(pu, i)];
        stratum.rows.push_back(i);
        stratum.labeled += pu.observed[i] == 1 ? 1 : 0;
    }

    const LinearModel global_model = train_naive(pu, cfg);
    out.global = estimate_c(pu, global_model, cfg.prob_clip);

    for (auto& [key, stratum] : out.strata) {
        bool ok = stratum.labeled > 0 && stratum.labeled < stratum.rows.size();
        if (ok) {
            const PUDataset sub = select_rows(pu, stratum.rows);
            try {
                const LinearModel m = train_naive(sub, cfg);
                stratum.estimate = estimate_c(sub, m, cfg.prob_clip);
            } catch (const std::exception&) {
                ok = false;
            }
        }
        if (!ok) {
            stratum.estimate = out.global;
            stratum.used_global_fallback = true;
        }
    }

    out.e_hat.resize(pu.size());
    for (const auto& [key, stratum] : out.strata) {
        for (std::size_t i : stratum.rows) out.e_hat[i] = stratum.estimate.c;
    }
    return out;
}

/// Full reduction: stratify, then train one global classifier with the pooled
// per-stratum propensity estimates. A single pooled classifier keeps the
// decision surface smooth across strata, which per-stratum models would not.
inline std::pair<Stratification, LinearModel> reduce_sar_to_scar(
    const PUDataset& pu, const TrainConfig& cfg = TrainConfig{},
    double e_floor = kDefaultPropensityFloor) {
    Stratification strat = stratify(pu, cfg);
    LinearModel model = train_pw_classifier(pu, strat.e_hat, cfg, e_floor);
    return {std::move(strat), std::move(model)};
}

// configuration <TAB> rows <TAB> labeled <TAB> c_hat <TAB> fallback
inline std::string stratification_table(const Stratification& s) {
    std::ostringstream os;
    os << "configuration\trows\tlabeled\tc_hat\tfallback\n";
    for (const auto& [key, stratum] : s.strata) {
        os << "(";
        for (std::size_t j = 0; j < key.size(); ++j) {
            if (j) os << ",";
            os << key[j];
        }
        os << ")\t" << stratum.rows.size() << "\t" << stratum.labeled << "\t"
           << format_double(stratum.estimate.c) << "\t"
           << (stratum.used_global_fallback ? 1 : 0) << "\n";
    }
    return os.str();
}

}  // namespace sarpu
