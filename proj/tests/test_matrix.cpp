#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sarpu/matrix.hpp"

using namespace sarpu;

TEST_CASE("matrix construction and element access") {
    Matrix m(2, 3);
    CHECK(m.rows == 2);
    CHECK(m.cols == 3);
    m(1, 2) = 4.5;
    CHECK(m(1, 2) == 4.5);
    CHECK(m(0, 0) == 0.0);
}

TEST_CASE("from_rows and row spans") {
    const Matrix m = from_rows({{1.0, 2.0}, {3.0, 4.0}});
    CHECK(m.rows == 2);
    CHECK(m.cols == 2);
    const auto r = m.row(1);
    CHECK(r[0] == 3.0);
    CHECK(r[1] == 4.0);
}

TEST_CASE("from_rows rejects ragged input") {
    CHECK_THROWS_AS(from_rows({{1.0}, {1.0, 2.0}}), std::invalid_argument);
}

TEST_CASE("select_rows picks and reorders") {
    const Matrix m = from_rows({{1.0}, {2.0}, {3.0}});
    const std::vector<std::size_t> idx{2, 0};
    const Matrix s = select_rows(m, idx);
    CHECK(s.rows == 2);
    CHECK(s(0, 0) == 3.0);
    CHECK(s(1, 0) == 1.0);
}

TEST_CASE("select_cols keeps requested order") {
    const Matrix m = from_rows({{1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}});
    const std::vector<std::size_t> idx{2, 0};
    const Matrix s = select_cols(m, idx);
    CHECK(s.cols == 2);
    CHECK(s(0, 0) == 3.0);
    CHECK(s(0, 1) == 1.0);
    CHECK(s(1, 0) == 6.0);
}

TEST_CASE("append_column grows width") {
    Matrix m = from_rows({{1.0}, {2.0}});
    const std::size_t idx = append_column(m, std::vector<double>{7.0, 8.0});
    CHECK(idx == 1);
    CHECK(m.cols == 2);
    CHECK(m(0, 1) == 7.0);
    CHECK(m(1, 1) == 8.0);
    CHECK(m(1, 0) == 2.0);
    CHECK_THROWS_AS(append_column(m, std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("dot product") {
    const std::vector<double> a{1.0, 2.0, 3.0};
    const std::vector<double> b{4.0, 5.0, 6.0};
    CHECK(dot(a, b) == 32.0);
}

TEST_CASE("matrix equality is exact") {
    const Matrix a = from_rows({{1.0, 2.0}});
    Matrix b = a;
    CHECK(a == b);
    b(0, 1) = std::nextafter(b(0, 1), 3.0);
    CHECK_FALSE(a == b);
}
