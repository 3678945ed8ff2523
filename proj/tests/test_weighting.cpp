#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sarpu/simulate.hpp"
#include "sarpu/weighting.hpp"

using namespace sarpu;
using Catch::Matchers::WithinAbs;

namespace {

PUDataset three_row_pu() {
    PUDataset pu;
    pu.features = from_rows({{1.0}, {2.0}, {3.0}});
    pu.observed = {1, 0, 1};
    return pu;
}

}  // namespace

TEST_CASE("expand with exact propensity 1") {
    const PUDataset pu = three_row_pu();
    const auto ex = expand(pu, std::vector<double>{1.0, 1.0, 1.0}, 0.0);
    REQUIRE(ex.size() == 5);  // n + labeled count
    // row 0 labeled: (t=1,w=1) then (t=0,w=0)
    CHECK(ex[0].target == 1);
    CHECK(ex[0].weight == 1.0);
    CHECK(ex[1].target == 0);
    CHECK(ex[1].weight == 0.0);
    // row 1 unlabeled: (t=0,w=1)
    CHECK(ex[2].target == 0);
    CHECK(ex[2].weight == 1.0);
    CHECK(ex[3].target == 1);
    CHECK(ex[4].target == 0);
}

TEST_CASE("expand with propensity 0.5 gives the 2 / -1 pair") {
    PUDataset pu;
    pu.features = from_rows({{1.0}});
    pu.observed = {1};
    const auto ex = expand(pu, std::vector<double>{0.5}, 0.0);
    REQUIRE(ex.size() == 2);
    CHECK(ex[0].target == 1);
    CHECK_THAT(ex[0].weight, WithinAbs(2.0, 1e-15));
    CHECK(ex[1].target == 0);
    CHECK_THAT(ex[1].weight, WithinAbs(-1.0, 1e-15));
}

TEST_CASE("expand applies the propensity floor") {
    PUDataset pu;
    pu.features = from_rows({{1.0}});
    pu.observed = {1};
    const auto ex = expand(pu, std::vector<double>{0.25}, 0.5);
    CHECK_THAT(ex[0].weight, WithinAbs(2.0, 1e-15));
    CHECK_THAT(ex[1].weight, WithinAbs(-1.0, 1e-15));
}

TEST_CASE("expand weight bookkeeping") {
    SimulationConfig sim;
    sim.n_splits = 1;
    sim.n_labelings = 1;
    sim.seed = 77;
    const auto set = make_experiment_instances(make_blobs(200, 2, 4.0, 13), sim);
    const PUDataset& pu = set.instances.front().train;
    const auto ex = expand(pu, *pu.true_propensity, 0.0);

    double total = 0.0;
    double max_mag = 0.0;
    for (const auto& w : ex) {
        total += w.weight;
        max_mag = std::max(max_mag, std::abs(w.weight));
    }
    CHECK_THAT(total, WithinAbs(static_cast<double>(pu.size()), 1e-9));
    CHECK(max_mag <= 1.0 / 0.2 + 1e-12);  // p_low = 0.2 bounds 1/e

    // with a floor, no row exceeds 1/e_floor
    const auto floored = expand(pu, *pu.true_propensity, 0.3);
    for (const auto& w : floored) CHECK(std::abs(w.weight) <= 1.0 / 0.3 + 1e-12);
}

TEST_CASE("expand preserves order and validates inputs") {
    const PUDataset pu = three_row_pu();
    const auto ex = expand(pu, std::vector<double>{0.5, 0.5, 0.5}, 0.0);
    // labeled rows produce adjacent pairs in row order
    CHECK(ex[0].features[0] == 1.0);
    CHECK(ex[1].features[0] == 1.0);
    CHECK(ex[2].features[0] == 2.0);
    CHECK(ex[3].features[0] == 3.0);
    CHECK(ex[4].features[0] == 3.0);

    CHECK_THROWS_AS(expand(pu, std::vector<double>{0.0, 0.5, 0.5}, 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(expand(pu, std::vector<double>{0.5, 0.5}, 0.0), std::invalid_argument);
}

TEST_CASE("fully labeled expansion matches the supervised fit") {
    const LabeledDataset blobs = make_blobs(120, 2, 4.0, 31);
    PUDataset pu;
    pu.features = blobs.features;
    pu.observed = blobs.classes;  // s = y, e = 1
    TrainConfig cfg;
    cfg.l2_strength = 0.01;
    const LinearModel pw =
        train_pw_classifier(pu, std::vector<double>(pu.size(), 1.0), cfg, 0.0);
    const LinearModel plain = fit_plain(blobs.features, blobs.classes, cfg);
    for (std::size_t j = 0; j < plain.dim(); ++j) {
        CHECK_THAT(pw.weights[j], WithinAbs(plain.weights[j], 1e-6));
    }
    CHECK_THAT(pw.intercept, WithinAbs(plain.intercept, 1e-6));
}

TEST_CASE("true-propensity weighting beats naive on SAR blobs") {
    SimulationConfig sim;
    sim.n_splits = 1;
    sim.n_labelings = 1;
    sim.seed = 5;
    sim.k_prop_attrs = 2;
    const auto set = make_experiment_instances(make_blobs(800, 3, 5.0, 41), sim);
    const auto& inst = set.instances.front();

    TrainConfig cfg;
    const LinearModel pw = train_pw_classifier(inst.train, *inst.train.true_propensity, cfg);
    const LinearModel naive = fit_plain(inst.train.features, inst.train.observed, cfg);

    auto mse = [&](const LinearModel& m) {
        const auto p = predict_proba(m, inst.test.features);
        double acc = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double d = p[i] - static_cast<double>(inst.test.classes[i]);
            acc += d * d;
        }
        return acc / static_cast<double>(p.size());
    };
    CHECK(mse(pw) <= mse(naive));
}
