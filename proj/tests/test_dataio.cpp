#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sarpu/dataio.hpp"
#include "sarpu/simulate.hpp"

using namespace sarpu;
using Catch::Matchers::WithinAbs;

namespace {

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() /
            (std::string("sarpu_io_") + name))
        .string();
}

struct FileGuard {
    std::string path;
    explicit FileGuard(std::string p) : path(std::move(p)) {}
    ~FileGuard() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("schema parsing") {
    std::istringstream in(
        "# comment line\n"
        "\n"
        "age : continuous\n"
        "color:categorical\n"
        "sick:label\n");
    const auto schema = parse_schema(in);
    REQUIRE(schema.size() == 3);
    CHECK(schema[0].name == "age");
    CHECK(schema[0].kind == ColumnKind::Continuous);
    CHECK(schema[1].kind == ColumnKind::Categorical);
    CHECK(schema[2].kind == ColumnKind::Label);

    auto parse = [](const std::string& text) {
        std::istringstream s(text);
        return parse_schema(s);
    };
    CHECK_THROWS_AS(parse("age continuous\ny:label\n"), DataError);
    CHECK_THROWS_AS(parse("age:integer\ny:label\n"), DataError);
    CHECK_THROWS_AS(parse("age:continuous\n"), DataError);               // no label
    CHECK_THROWS_AS(parse("a:label\nb:label\n"), DataError);             // two labels
}

namespace {

RawTable toy_table() {
    RawTable t;
    t.header = {"x", "flat", "color", "y"};
    t.rows = {
        {"1.0", "7", "red", "0"},
        {"3.0", "7", "green", "1"},
        {"2.0", "7", "red", "1"},
        {"1.5", "7", "blue", "0"},
    };
    return t;
}

std::vector<ColumnSchema> toy_schema() {
    return {{"x", ColumnKind::Continuous},
            {"flat", ColumnKind::Continuous},
            {"color", ColumnKind::Categorical},
            {"y", ColumnKind::Label}};
}

}  // namespace

TEST_CASE("preprocessor scales, one-hots, and labels") {
    const RawTable t = toy_table();
    const auto prep = fit_preprocessor(t, toy_schema());
    CHECK(prep.output_cols() == 5);
    CHECK(prep.output_names ==
          std::vector<std::string>{"x", "flat", "color=red", "color=green", "color=blue"});

    const auto res = apply_preprocessor(prep, t);
    CHECK(res.unknown_categorical == 0);
    CHECK(res.labels == std::vector<int>{0, 1, 1, 0});

    CHECK_THAT(res.features(0, 0), WithinAbs(-1.0, 1e-15));  // min -> -1
    CHECK_THAT(res.features(1, 0), WithinAbs(1.0, 1e-15));   // max -> +1
    CHECK_THAT(res.features(2, 0), WithinAbs(0.0, 1e-15));   // midpoint -> 0
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(res.features(i, 1) == 0.0);  // constant column
        double onehot = 0.0;
        for (std::size_t j = 2; j < 5; ++j) onehot += res.features(i, j);
        CHECK(onehot == 1.0);
    }
    CHECK(res.features(1, 3) == 1.0);  // green is the second seen category
}

TEST_CASE("unknown categorical values become all-zero rows") {
    const RawTable train = toy_table();
    const auto prep = fit_preprocessor(train, toy_schema());

    RawTable test;
    test.header = train.header;
    test.rows = {{"2.5", "7", "purple", "1"}};
    const auto res = apply_preprocessor(prep, test);
    CHECK(res.unknown_categorical == 1);
    CHECK(res.features(0, 2) == 0.0);
    CHECK(res.features(0, 3) == 0.0);
    CHECK(res.features(0, 4) == 0.0);
}

TEST_CASE("preprocessor rejects bad cells") {
    const auto prep = fit_preprocessor(toy_table(), toy_schema());
    RawTable bad = toy_table();
    bad.rows[1][0] = "not-a-number";
    CHECK_THROWS_AS(apply_preprocessor(prep, bad), DataError);

    RawTable bad_label = toy_table();
    bad_label.rows[0][3] = "2";
    CHECK_THROWS_AS(apply_preprocessor(prep, bad_label), DataError);

    RawTable narrow;
    narrow.header = {"x", "y"};
    narrow.rows = {{"1", "0"}};
    CHECK_THROWS_AS(apply_preprocessor(prep, narrow), DataError);
}

TEST_CASE("inverse_scale undoes the continuous mapping") {
    const auto prep = fit_preprocessor(toy_table(), toy_schema());
    for (double v : {1.0, 1.37, 2.9, 3.0}) {
        const auto [lo, hi] = prep.min_max.at(0);
        const double scaled = 2.0 * (v - lo) / (hi - lo) - 1.0;
        CHECK_THAT(inverse_scale(prep, 0, scaled), WithinAbs(v, 1e-12));
    }
    CHECK(inverse_scale(prep, 1, 0.0) == 7.0);  // constant column maps back to its value
}

TEST_CASE("csv loading end to end") {
    const FileGuard csv(temp_path("toy.csv"));
    const FileGuard schema(temp_path("toy.schema"));
    {
        std::ofstream c(csv.path);
        c << "x,flat,color,y\n1.0,7,red,0\n3.0,7,green,1\n2.0,7,red,1\n";
        std::ofstream s(schema.path);
        s << "x:continuous\nflat:continuous\ncolor:categorical\ny:label\n";
    }
    const CsvDataset ds = load_csv(csv.path, schema.path);
    CHECK(ds.data.features.rows == 3);
    CHECK(ds.data.features.cols == 4);
    CHECK(ds.data.classes == std::vector<int>{0, 1, 1});
    CHECK(ds.unknown_categorical == 0);
    for (double v : ds.data.features.values) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
    CHECK_THROWS_AS(load_csv(temp_path("missing.csv"), schema.path), DataError);
}

TEST_CASE("read_csv validates row widths") {
    const FileGuard csv(temp_path("ragged.csv"));
    {
        std::ofstream c(csv.path);
        c << "a,b\n1,2\n3\n";
    }
    CHECK_THROWS_AS(read_csv(csv.path), DataError);
}

namespace {

PUDataset sample_pu() {
    const LabeledDataset data = make_blobs(40, 2, 5.0, 19);
    SimulationConfig cfg;
    cfg.k_prop_attrs = 1;
    cfg.k_clusters = 2;
    const auto att = attach_propensity_attrs(data, cfg, 21);
    return label_pu(att.data, att.attr_indices, cfg, 22);
}

}  // namespace

TEST_CASE("PU container round-trips byte for byte") {
    const PUDataset pu = sample_pu();
    const std::string text = pu_to_string(pu);
    CHECK(text.rfind("SARPU-DATA v1\n", 0) == 0);
    CHECK(text.find("columns s y e\n") != std::string::npos);

    std::istringstream in(text);
    const PUDataset back = pu_from_stream(in);
    CHECK(pu_to_string(back) == text);
    CHECK(back.features == pu.features);
    CHECK(back.observed == pu.observed);
    REQUIRE(back.hidden_classes.has_value());
    REQUIRE(back.true_propensity.has_value());
    CHECK(*back.hidden_classes == *pu.hidden_classes);
    CHECK(*back.true_propensity == *pu.true_propensity);
    CHECK(back.propensity_attr_indices == pu.propensity_attr_indices);
}

TEST_CASE("PU container preserves absent optional columns") {
    PUDataset pu = sample_pu();
    pu.hidden_classes.reset();
    pu.true_propensity.reset();
    const std::string text = pu_to_string(pu);
    CHECK(text.find("columns s\n") != std::string::npos);
    std::istringstream in(text);
    const PUDataset back = pu_from_stream(in);
    CHECK_FALSE(back.hidden_classes.has_value());
    CHECK_FALSE(back.true_propensity.has_value());
    CHECK(back.observed == pu.observed);
}

TEST_CASE("PU container rejects corrupted input") {
    auto from = [](const std::string& text) {
        std::istringstream in(text);
        return pu_from_stream(in);
    };
    CHECK_THROWS_AS(from("SARPU-EVAL v1\nrows 0 cols 0\n"), DataError);
    CHECK_THROWS_AS(from("SARPU-DATA v2\n"), DataError);
    CHECK_THROWS_AS(from("SARPU-DATA v1\nrows 2 cols 1\nprop_indices 0\ncolumns s\n0.5 1\n"),
                    DataError);  // truncated body
    CHECK_THROWS_AS(from("SARPU-DATA v1\nrows 1 cols 1\nprop_indices 0\ncolumns s q\n0.5 1\n"),
                    DataError);  // unknown column tag
    // body present but s out of range
    CHECK_THROWS_AS(from("SARPU-DATA v1\nrows 1 cols 1\nprop_indices 0\ncolumns s\n0.5 3\n"),
                    DataError);
}

TEST_CASE("PU save and load through files") {
    const PUDataset pu = sample_pu();
    const FileGuard f(temp_path("round.pu"));
    save_pu(f.path, pu);
    const PUDataset back = load_pu(f.path);
    CHECK(pu_to_string(back) == pu_to_string(pu));
    CHECK_THROWS_AS(load_pu(temp_path("nowhere.pu")), DataError);
}

TEST_CASE("eval container round-trips") {
    const LabeledDataset data = make_blobs(30, 3, 5.0, 27);
    SimulationConfig cfg;
    cfg.n_splits = 1;
    cfg.n_labelings = 1;
    cfg.seed = 4;
    const auto set = make_experiment_instances(data, cfg);
    const EvalDataset& ev = set.instances[0].test;

    const std::string text = eval_to_string(ev);
    CHECK(text.rfind("SARPU-EVAL v1\n", 0) == 0);
    std::istringstream in(text);
    const EvalDataset back = eval_from_stream(in);
    CHECK(eval_to_string(back) == text);
    CHECK(back.features == ev.features);
    CHECK(back.classes == ev.classes);
    CHECK(back.true_propensity == ev.true_propensity);
    CHECK(back.propensity_attr_indices == ev.propensity_attr_indices);

    const FileGuard f(temp_path("round.eval"));
    save_eval(f.path, ev);
    CHECK(eval_to_string(load_eval(f.path)) == text);

    std::istringstream bad("SARPU-DATA v1\n");
    CHECK_THROWS_AS(eval_from_stream(bad), DataError);
}
