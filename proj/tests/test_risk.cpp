#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "sarpu/common.hpp"
#include "sarpu/risk.hpp"

using namespace sarpu;
using Catch::Matchers::WithinAbs;

TEST_CASE("delta hand values") {
    CHECK_THAT(delta(CostSpec::mse(), 1, 1.0 - 1e-9), WithinAbs(0.0, 1e-15));
    CHECK_THAT(delta(CostSpec::mae(), 0, 0.3), WithinAbs(0.3, 1e-15));
    CHECK_THAT(delta(CostSpec::log_loss(), 1, 0.5), WithinAbs(std::log(2.0), 1e-15));
    CHECK_THROWS_AS(delta(CostSpec::mae(), 0, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(delta(CostSpec::mae(), 0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(delta(CostSpec::mae(), 2, 0.5), std::invalid_argument);
}

TEST_CASE("true_risk hand values") {
    const std::vector<int> y1{1, 0};
    const std::vector<double> half{0.5, 0.5};
    CHECK_THAT(true_risk(half, y1, CostSpec::mae()).value, WithinAbs(0.5, 1e-15));

    const std::vector<int> y2{1, 0, 0};
    const std::vector<double> p2{0.9, 0.2, 0.4};
    CHECK_THAT(true_risk(p2, y2, CostSpec::mse()).value, WithinAbs(0.07, 1e-15));

    const std::vector<double> near{1.0 - 1e-12, 1e-12};
    CHECK(true_risk(near, y1, CostSpec::mse()).value < 1e-20);
    CHECK_THROWS_AS(true_risk(half, y2, CostSpec::mae()), std::invalid_argument);
}

TEST_CASE("pw_risk equals true_risk when fully labeled") {
    const std::vector<int> y{1, 0, 1, 0};
    const std::vector<double> yhat{0.8, 0.3, 0.6, 0.1};
    const std::vector<double> e{1.0, 1.0, 1.0, 1.0};
    for (const auto& cost : {CostSpec::mae(), CostSpec::mse(), CostSpec::log_loss()}) {
        // s = y exactly: every positive is labeled with certainty
        CHECK_THAT(pw_risk(yhat, y, e, cost).value,
                   WithinAbs(true_risk(yhat, y, cost).value, 1e-15));
    }
}

TEST_CASE("pw_risk hand values and negativity") {
    const std::vector<int> s1{1};
    const std::vector<double> e1{0.5};
    const std::vector<double> p1{0.8};
    const double ll = pw_risk(p1, s1, e1, CostSpec::log_loss()).value;
    CHECK_THAT(ll, WithinAbs(2.0 * -std::log(0.8) - std::log(0.2) * -1.0, 1e-12));
    CHECK_THAT(ll, WithinAbs(-1.1631508098056809, 1e-12));
    CHECK(ll < 0.0);  // not clamped

    const std::vector<int> s2{1, 0};
    const std::vector<double> e2{0.5, 0.5};
    const std::vector<double> p2{0.8, 0.3};
    CHECK_THAT(pw_risk(p2, s2, e2, CostSpec::mse()).value, WithinAbs(-0.235, 1e-12));
}

TEST_CASE("pw_risk validates propensities and is permutation invariant") {
    const std::vector<int> s{1, 0};
    const std::vector<double> p{0.8, 0.3};
    CHECK_THROWS_AS(pw_risk(p, s, std::vector<double>{0.0, 0.5}, CostSpec::mae()),
                    std::invalid_argument);

    auto rng = make_rng(substream(77, 0));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t n = 31;
    std::vector<int> sv(n);
    std::vector<double> pv(n), ev(n);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        sv[i] = unit(rng) < 0.4 ? 1 : 0;
        pv[i] = 0.05 + 0.9 * unit(rng);
        ev[i] = 0.2 + 0.7 * unit(rng);
        order[i] = i;
    }
    const double base = pw_risk(pv, sv, ev, CostSpec::log_loss()).value;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> sp(n);
    std::vector<double> pp(n), ep(n);
    for (std::size_t i = 0; i < n; ++i) {
        sp[i] = sv[order[i]];
        pp[i] = pv[order[i]];
        ep[i] = ev[order[i]];
    }
    CHECK_THAT(pw_risk(pp, sp, ep, CostSpec::log_loss()).value, WithinAbs(base, 1e-12));
}

TEST_CASE("expected_risk hand values") {
    // s=1 rows contribute exactly delta_1
    const std::vector<int> s1{1};
    const std::vector<double> e1{0.3};
    const std::vector<double> p1{0.7};
    CHECK_THAT(expected_risk(p1, s1, e1, CostSpec::mae()).value, WithinAbs(0.3, 1e-15));

    // s=0, yhat=0.5, e=0.5 under MAE: (1/3)*0.5 + (2/3)*0.5 = 0.5
    const std::vector<int> s0{0};
    const std::vector<double> e0{0.5};
    const std::vector<double> p0{0.5};
    CHECK_THAT(expected_risk(p0, s0, e0, CostSpec::mae()).value, WithinAbs(0.5, 1e-15));
}

TEST_CASE("expected_risk vanishes for the all-positive hypothesis") {
    const std::vector<int> s{1, 0, 0, 1, 0};
    const std::vector<double> e{0.4, 0.5, 0.3, 0.8, 0.6};
    const std::vector<double> all_pos(5, 1.0 - 1e-12);
    CHECK(expected_risk(all_pos, s, e, CostSpec::mae()).value <= 1e-9);
}

TEST_CASE("pw_bias hand values") {
    const CostSpec mse = CostSpec::mse();
    const std::vector<int> y{1};
    const std::vector<double> yhat{0.9};
    CHECK_THAT(pw_bias(yhat, y, std::vector<double>{0.4}, std::vector<double>{0.8}, mse),
               WithinAbs(-0.4, 1e-12));
    // exact propensities: no bias
    CHECK_THAT(pw_bias(yhat, y, std::vector<double>{0.4}, std::vector<double>{0.4}, mse),
               WithinAbs(0.0, 1e-15));
    // all-negative data: bias formula vanishes
    const std::vector<int> zeros{0, 0};
    const std::vector<double> p2{0.2, 0.9};
    CHECK(pw_bias(p2, zeros, std::vector<double>{0.4, 0.5}, std::vector<double>{0.9, 0.1},
                  mse) == 0.0);
}

TEST_CASE("estimator_bound hand values") {
    // eta = 2/e^2 makes ln(2/eta) = 2, n=1: bound = sqrt(2/2) = 1
    const double eta = 2.0 * std::exp(-2.0);
    CHECK_THAT(estimator_bound(CostSpec::mse(), BoundSpec{eta, 1, 1}), WithinAbs(1.0, 1e-12));
    // 4x the sample size halves the bound
    const double b1 = estimator_bound(CostSpec::mse(), BoundSpec{0.05, 1, 500});
    const double b4 = estimator_bound(CostSpec::mse(), BoundSpec{0.05, 1, 2000});
    CHECK_THAT(b4, WithinAbs(b1 / 2.0, 1e-12));
    CHECK_THAT(estimator_bound(CostSpec::mse(), BoundSpec{0.05, 1, 1000}),
               WithinAbs(std::sqrt(std::log(40.0) / 2000.0), 1e-12));
    CHECK_THAT(estimator_bound(CostSpec::mse(), BoundSpec{0.05, 1, 1000}),
               WithinAbs(0.04294, 1e-4));
}

TEST_CASE("erm_bound hand values") {
    // |H| = 2 coincides with the estimator bound's ln(2/eta)
    CHECK_THAT(erm_bound(CostSpec::mse(), BoundSpec{0.1, 2, 300}),
               WithinAbs(estimator_bound(CostSpec::mse(), BoundSpec{0.1, 1, 300}), 1e-15));
    CHECK(erm_bound(CostSpec::mse(), BoundSpec{1.0 - 1e-12, 1, 10}) < 1e-5);
    CHECK_THAT(erm_bound(CostSpec::mse(), BoundSpec{0.05, 1024, 1000}),
               WithinAbs(std::sqrt(std::log(1024.0 / 0.05) / 2000.0), 1e-12));
    CHECK_THAT(erm_bound(CostSpec::mse(), BoundSpec{0.05, 1024, 1000}),
               WithinAbs(0.0705, 1e-4));
}

TEST_CASE("log-loss bounds scale with the clip") {
    const CostSpec tight = CostSpec::log_loss(1e-12);
    const CostSpec loose = CostSpec::log_loss(1e-3);
    CHECK(estimator_bound(tight, BoundSpec{0.05, 1, 100}) >
          estimator_bound(loose, BoundSpec{0.05, 1, 100}));
}

TEST_CASE("brute_force_expected_pw_risk closed form") {
    const CostSpec mse = CostSpec::mse();
    // e_used = e_true reduces to the true risk
    const std::vector<int> y{1, 0, 1};
    const std::vector<double> yhat{0.7, 0.2, 0.9};
    const std::vector<double> e{0.5, 0.6, 0.3};
    CHECK_THAT(brute_force_expected_pw_risk(yhat, y, e, e, mse),
               WithinAbs(true_risk(yhat, y, mse).value, 1e-12));

    // all-negative rows contribute exactly delta_0
    const std::vector<int> zeros{0};
    const std::vector<double> p{0.3};
    CHECK_THAT(brute_force_expected_pw_risk(p, zeros, std::vector<double>{0.5},
                                            std::vector<double>{0.9}, mse),
               WithinAbs(0.09, 1e-15));

    // the n=1 bias example: true - expectation = -0.4
    const std::vector<int> y1{1};
    const std::vector<double> p1{0.9};
    const double expectation = brute_force_expected_pw_risk(
        p1, y1, std::vector<double>{0.4}, std::vector<double>{0.8}, mse);
    CHECK_THAT(expectation, WithinAbs(0.41, 1e-12));
    CHECK_THAT(true_risk(p1, y1, mse).value - expectation, WithinAbs(-0.4, 1e-12));
}

TEST_CASE("literal enumeration agrees with the closed form") {
    auto rng = make_rng(substream(123, 9));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> size_dist(1, 10);
    for (int rep = 0; rep < 25; ++rep) {
        const std::size_t n = size_dist(rng);
        std::vector<int> y(n);
        std::vector<double> yhat(n), e_true(n), e_hat(n);
        std::vector<std::size_t> positives;
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = unit(rng) < 0.5 ? 1 : 0;
            if (y[i] == 1) positives.push_back(i);
            yhat[i] = 0.05 + 0.9 * unit(rng);
            e_true[i] = 0.15 + 0.8 * unit(rng);
            e_hat[i] = 0.15 + 0.8 * unit(rng);
        }
        for (const auto& cost :
             {CostSpec::mae(), CostSpec::mse(), CostSpec::log_loss()}) {
            long double acc = 0.0L;
            std::vector<int> s(n, 0);
            for (std::size_t mask = 0; mask < (std::size_t{1} << positives.size());
                 ++mask) {
                long double prob = 1.0L;
                for (std::size_t b = 0; b < positives.size(); ++b) {
                    const bool on = (mask >> b) & 1u;
                    s[positives[b]] = on ? 1 : 0;
                    prob *= on ? static_cast<long double>(e_true[positives[b]])
                               : 1.0L - static_cast<long double>(e_true[positives[b]]);
                }
                acc += prob * static_cast<long double>(pw_risk(yhat, s, e_hat, cost).value);
            }
            const double closed = brute_force_expected_pw_risk(yhat, y, e_true, e_hat, cost);
            CHECK_THAT(static_cast<double>(acc), WithinAbs(closed, 1e-12));
            // and the bias identity: true risk minus expectation
            const double bias = pw_bias(yhat, y, e_true, e_hat, cost);
            CHECK_THAT(true_risk(yhat, y, cost).value - closed, WithinAbs(bias, 1e-12));
        }
    }
}
