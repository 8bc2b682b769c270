#include <catch_amalgamated.hpp>

#include "fixtures.hpp"
#include "retistack/dataset.hpp"
#include "retistack/rng.hpp"

using namespace retistack;

TEST_CASE("load_manifest parses a header-driven schema") {
    fixtures::TempDir tmp("manifest");
    const auto path = fixtures::write_text(tmp.file("m.csv"),
                                           "ID,Risk,A,B\n1,1,1,0\n2,0,0,0\n3,1,0,1\n");
    const LabelMatrix m = load_manifest(path, "Risk");
    REQUIRE(m.size() == 3);
    CHECK(m.schema().class_names == std::vector<std::string>{"Risk", "A", "B"});
    CHECK(m.by_id("1").labels == std::vector<std::uint8_t>{1, 1, 0});
    CHECK(m.by_id("2").labels == std::vector<std::uint8_t>{0, 0, 0});
    CHECK(m.by_id("3").labels == std::vector<std::uint8_t>{1, 0, 1});

    const auto counts = label_counts(m);
    CHECK(counts.at("Risk") == 2);
    CHECK(counts.at("A") == 1);
    CHECK(counts.at("B") == 1);
}

TEST_CASE("load_manifest error paths") {
    fixtures::TempDir tmp("manifest_err");

    SECTION("missing file") {
        CHECK_THROWS_WITH(load_manifest(tmp.file("nope.csv")),
                          Catch::Matchers::ContainsSubstring("missing file"));
    }
    SECTION("empty manifest") {
        const auto path = fixtures::write_text(tmp.file("empty.csv"), "");
        CHECK_THROWS_WITH(load_manifest(path),
                          Catch::Matchers::ContainsSubstring("empty manifest"));
    }
    SECTION("non-binary label") {
        const auto path =
            fixtures::write_text(tmp.file("bad.csv"), "ID,Disease_Risk\na,2\n");
        CHECK_THROWS_WITH(load_manifest(path),
                          Catch::Matchers::ContainsSubstring("non-binary label"));
    }
    SECTION("duplicate sample id") {
        const auto path =
            fixtures::write_text(tmp.file("dup.csv"), "ID,Disease_Risk\na,1\na,0\n");
        CHECK_THROWS_WITH(load_manifest(path),
                          Catch::Matchers::ContainsSubstring("duplicate sample_id"));
    }
    SECTION("header missing the disease-risk column") {
        const auto path = fixtures::write_text(tmp.file("norisk.csv"), "ID,A,B\na,1,0\n");
        CHECK_THROWS_WITH(load_manifest(path),
                          Catch::Matchers::ContainsSubstring("disease-risk"));
    }
    SECTION("validation failures carry exit code 2") {
        try {
            load_manifest(tmp.file("nope.csv"));
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.exit_code() == 2);
        }
    }
}

TEST_CASE("manifest CSV round trip is identity") {
    fixtures::TempDir tmp("roundtrip");
    Rng rng(99);
    LabelSchema schema;
    schema.class_names = {"Disease_Risk", "X", "Y", "Z"};
    std::vector<SampleRecord> records;
    for (int i = 0; i < 50; ++i) {
        SampleRecord r;
        r.sample_id = "s" + std::to_string(i);
        for (int c = 0; c < 4; ++c) r.labels.push_back(rng.bernoulli(0.3));
        records.push_back(r);
    }
    const LabelMatrix m(schema, records);
    save_manifest(m, tmp.file("m.csv"));
    const LabelMatrix back = load_manifest(tmp.file("m.csv"));

    REQUIRE(back.size() == m.size());
    CHECK(back.schema().class_names == m.schema().class_names);
    for (std::size_t i = 0; i < m.size(); ++i) {
        CHECK(back.records()[i].sample_id == m.records()[i].sample_id);
        CHECK(back.records()[i].labels == m.records()[i].labels);
    }
    CHECK(manifest_to_csv(back) == manifest_to_csv(m));
}

TEST_CASE("label_counts total equals the number of set cells") {
    Rng rng(7);
    LabelSchema schema;
    schema.class_names = {"Disease_Risk", "a", "b", "c", "d"};
    std::vector<SampleRecord> records;
    std::size_t ones = 0;
    for (int i = 0; i < 200; ++i) {
        SampleRecord r;
        r.sample_id = std::to_string(i);
        for (int c = 0; c < 5; ++c) {
            r.labels.push_back(rng.bernoulli(0.4));
            ones += r.labels.back();
        }
        records.push_back(r);
    }
    const LabelMatrix m(schema, records);
    std::size_t total = 0;
    for (const auto& [name, count] : label_counts(m)) total += count;
    CHECK(total == ones);
}

TEST_CASE("targets split the schema into detector and classifier views") {
    LabelSchema schema;
    schema.class_names = {"A", "Disease_Risk", "B"};
    std::vector<SampleRecord> records;
    for (int i = 0; i < 4; ++i) {
        SampleRecord r;
        r.sample_id = std::to_string(i);
        r.labels = {std::uint8_t(i & 1), std::uint8_t((i >> 1) & 1), 1};
        records.push_back(r);
    }
    const LabelMatrix m(schema, records);

    const TargetMatrix det = targets(m, TargetMode::detector);
    REQUIRE(det.class_names == std::vector<std::string>{"Disease_Risk"});
    REQUIRE(det.values.cols == 1);
    CHECK(det.values(0, 0) == 0.0);
    CHECK(det.values(2, 0) == 1.0);

    const TargetMatrix clf = targets(m, TargetMode::classifier);
    CHECK(clf.class_names == std::vector<std::string>{"A", "B"});
    CHECK(clf.values.cols == 2);

    // detector + classifier views partition the schema
    std::vector<std::string> all = det.class_names;
    all.insert(all.end(), clf.class_names.begin(), clf.class_names.end());
    std::sort(all.begin(), all.end());
    std::vector<std::string> expect = schema.class_names;
    std::sort(expect.begin(), expect.end());
    CHECK(all == expect);
}

TEST_CASE("risk-only schema yields a zero-column classifier view") {
    LabelSchema schema;
    schema.class_names = {"Disease_Risk"};
    std::vector<SampleRecord> records(2);
    records[0] = {"a", "", {1}};
    records[1] = {"b", "", {0}};
    const LabelMatrix m(schema, records);
    const TargetMatrix clf = targets(m, TargetMode::classifier);
    CHECK(clf.class_names.empty());
    CHECK(clf.values.cols == 0);
    CHECK(clf.values.rows == 2);
}

TEST_CASE("fundus-like fixture reproduces the published annotation frequencies") {
    const LabelMatrix m = fixtures::make_fundus_like_manifest();
    REQUIRE(m.size() == 1920);
    const auto counts = label_counts(m);
    CHECK(counts.at("Disease_Risk") == 1519);
    CHECK(counts.at("DR") == 376);
    CHECK(counts.at("ARMD") == 100);
    CHECK(counts.at("TV") == 6);
    CHECK(counts.at("ST") == 5);

    const TargetMatrix det = targets(m, TargetMode::detector);
    CHECK(det.class_names == std::vector<std::string>{"Disease_Risk"});
    const TargetMatrix clf = targets(m, TargetMode::classifier);
    CHECK(clf.class_names.size() == 28);
}
