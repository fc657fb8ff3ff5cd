// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "support/oracles.hpp"
#include "toxpipe/error.hpp"
#include "toxpipe/pipeline/bundle.hpp"
#include "toxpipe/pipeline/config.hpp"
#include "toxpipe/pipeline/dataset.hpp"
#include "toxpipe/pipeline/metrics.hpp"
#include "toxpipe/pipeline/pipeline.hpp"
#include "toxpipe/random.hpp"

using namespace toxpipe;
using namespace toxpipe::pipeline;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::Io;
}

Dataset read(const std::string& text) {
    std::istringstream in(text);
    return read_tox21_csv(in);
}

std::string header() {
    std::string h;
    for (auto a : kAssays) h += std::string(a) + ",";
    return h + "mol_id,smiles\n";
}

PipelineConfig small_config() {
    PipelineConfig c;
    c.network.input_size = 32;
    c.network.block_layers = {2, 2, 2, 2};
    c.training.epochs = 2;
    c.training.batch_size = 16;
    c.ensemble.forest.n_trees = 30;
    c.ensemble.gbm.n_rounds = 40;
    c.augment_runs = 3;
    return c;
}

// One bundle shared by the tests below; training is the slow part.
struct Trained {
    std::vector<DatasetRecord> records;
    ModelBundle bundle;
};

const Trained& trained() {
    static const Trained t = [] {
        Trained out;
        auto data = load_tox21_csv(TOXPIPE_FIXTURE_CSV);
        data.records.resize(80);
        out.records = data.records;
        out.bundle = train_model(out.records, small_config());
        return out;
    }();
    return t;
}

}  // namespace

TEST_CASE("csv: a labelled row and blanks") {
    const auto d = read("smiles,NR-AR,NR-AhR,SR-p53,extra\nCCO,1,0,,x\n");
    REQUIRE(d.records.size() == 1);
    const auto& r = d.records[0];
    CHECK(r.smiles == "CCO");
    CHECK(r.labels[*assay_index("NR-AR")] == 1);
    CHECK(r.labels[*assay_index("NR-AhR")] == 0);
    CHECK(r.labels[*assay_index("SR-p53")] == ensemble::kMissing);
    CHECK(r.labels[*assay_index("NR-ER")] == ensemble::kMissing);
    CHECK(r.labelled_count() == 2);
    CHECK(r.line == 2);
    CHECK(d.assay_present[0]);
    CHECK_FALSE(d.assay_present[3]);
    CHECK(r.molecule.atoms().size() == 3);
}

TEST_CASE("csv: quarantine and conservation") {
    const auto d = read(header() + std::string(12, ',') + "m1,C1CC\n" + "1" + std::string(11, ',') + ",m2,CCN\n" +
                        std::string(12, ',') + "m3,CC\n" + "0" + std::string(11, ',') + ",m4,Xx\n");
    CHECK(d.rows_in == 4);
    CHECK(d.records.size() == 1);
    CHECK(d.records.size() + d.quarantine.size() == d.rows_in);
    REQUIRE(d.quarantine.size() == 3);
    CHECK(d.quarantine[0].code == ErrorCode::UnclosedRing);
    CHECK(d.quarantine[0].line == 2);
    CHECK(d.quarantine[2].code == ErrorCode::UnknownCharacter);

    const auto fixture = load_tox21_csv(TOXPIPE_FIXTURE_CSV);
    CHECK(fixture.records.size() + fixture.quarantine.size() == fixture.rows_in);
    CHECK(fixture.rows_in == 200);
}

TEST_CASE("csv: header-only and malformed input") {
    const auto empty = read(header());
    CHECK(empty.records.empty());
    CHECK(empty.rows_in == 0);
    CHECK(code_of([] { read("mol_id,NR-AR\nx,1\n"); }) == ErrorCode::MissingSmilesColumn);
    CHECK(code_of([] { read("smiles,mol_id\nCC,x\n"); }) == ErrorCode::NoAssayColumns);
    CHECK(code_of([] { read("smiles,NR-AR\nCC,1,2\n"); }) == ErrorCode::MalformedRow);
    CHECK(code_of([] { read("smiles,NR-AR\nCC,maybe\n"); }) == ErrorCode::MalformedRow);
    CHECK(read("smiles,NR-AR\nCC,1.0\n").records[0].labels[0] == 1);
}

TEST_CASE("split: sizes and determinism") {
    CHECK(split_sizes(10, {}) == std::array<std::size_t, 3>{8, 1, 1});
    CHECK(split_sizes(0, {}) == std::array<std::size_t, 3>{0, 0, 0});
    const auto s = split_sizes(7, {});
    CHECK(s[0] + s[1] + s[2] == 7);

    ensemble::LabelMatrix y(10, 2);
    for (std::size_t i = 0; i < 10; ++i) y(i, 0) = static_cast<std::int8_t>(i % 3 == 0);
    const auto a = stratified_split(y, 3);
    CHECK(a.train.size() == 8);
    CHECK(a.validation.size() == 1);
    CHECK(a.test.size() == 1);
    const auto b = stratified_split(y, 3);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);

    CHECK(code_of([&] { stratified_split(y, 1, {0.5, 0.5, 0.5}); }) == ErrorCode::BadFractions);
    CHECK(code_of([&] { stratified_split(y, 1, {1.2, -0.1, -0.1}); }) == ErrorCode::BadFractions);
}

TEST_CASE("split: disjoint, exhaustive and roughly stratified") {
    Rng rng(12);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 1 + rng.below(300);
        ensemble::LabelMatrix y(n, 3);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < 3; ++j) {
                const double u = rng.uniform();
                y(i, j) = u < 0.1 ? 1 : u < 0.8 ? 0 : ensemble::kMissing;
            }
        const auto s = stratified_split(y, rng.next());
        const auto sizes = split_sizes(n, {});
        CHECK(s.train.size() == sizes[0]);
        CHECK(s.validation.size() == sizes[1]);
        CHECK(s.test.size() == sizes[2]);
        std::set<std::size_t> seen;
        for (const auto* part : {&s.train, &s.validation, &s.test}) {
            CHECK(std::is_sorted(part->begin(), part->end()));
            seen.insert(part->begin(), part->end());
        }
        CHECK(seen.size() == n);
        if (n >= 100) {
            // positives of label 0 land in train at close to the train share
            double total = 0, in_train = 0;
            for (std::size_t i = 0; i < n; ++i) total += y(i, 0) == 1;
            for (auto i : s.train) in_train += y(i, 0) == 1;
            if (total >= 10) CHECK(std::abs(in_train / total - 0.8) <= 0.15);
        }
    }
}

TEST_CASE("metrics: auc and accuracy") {
    const std::vector<double> flat(6, 0.3);
    const std::vector<int> labels{0, 1, 0, 1, 1, 0};
    CHECK(roc_auc(flat, labels) == 0.5);
    const std::vector<double> scores{0.1, 0.7, 0.4, 0.4, 0.9, 0.2};
    CHECK(roc_auc(scores, labels) == doctest::Approx(oracle::pairwise_auc(scores, labels)).epsilon(1e-12));
    CHECK(std::isnan(roc_auc(scores, std::vector<int>(6, 1))));

    Rng rng(13);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> s(40);
        std::vector<int> l(40);
        for (std::size_t i = 0; i < 40; ++i) {
            s[i] = static_cast<double>(rng.below(8));  // plenty of ties
            l[i] = static_cast<int>(i % 3 == 0);
        }
        CHECK(roc_auc(s, l) == doctest::Approx(oracle::pairwise_auc(s, l)).epsilon(1e-12));
    }

    const std::vector<int> verdicts{0, 1, 0, 1, 1, 0};
    const std::vector<int> with_missing{0, 1, -1, 1, 1, 0};
    const auto m = assay_metrics("NR-AR", scores, verdicts, with_missing);
    CHECK(m.accuracy == 1.0);
    CHECK(m.balanced_accuracy == 1.0);
    CHECK(m.support == 5);
    CHECK(code_of([&] { assay_metrics("x", scores, verdicts, std::vector<int>(6, -1)); }) ==
          ErrorCode::NoEvaluableRecords);

    const auto report = summarize({m, AssayMetrics{"b", 0.5, 0.5, std::nan(""), 4}});
    CHECK(report.macro.accuracy == 0.75);
    CHECK(report.macro.auc == m.auc);
    const auto csv = metrics_csv(report);
    CHECK(csv.rfind("assay,accuracy,balanced_accuracy,auc,support\n", 0) == 0);
    CHECK(csv.find("\nmacro,") != std::string::npos);
}

TEST_CASE("config: parse, format and errors") {
    const auto c = parse_config("# comment\nseed = 7\nimage_size=64\nblock_layers = 1,2,3,4\nalpha=0.5,0.25,0.25\n\n");
    CHECK(c.seed == 7);
    CHECK(c.network.input_size == 64);
    CHECK(c.network.block_layers == std::vector<std::size_t>{1, 2, 3, 4});
    CHECK(c.ensemble.alpha[0] == 0.5);
    CHECK(c.training.seed != PipelineConfig{}.training.seed);
    const auto again = parse_config(format_config(c));
    CHECK(format_config(again) == format_config(c));
    CHECK(code_of([] { parse_config("nonsense = 1\n"); }) == ErrorCode::BadConfig);
    CHECK(code_of([] { parse_config("epochs = many\n"); }) == ErrorCode::BadConfig);
    CHECK(code_of([] { parse_config("seed\n"); }) == ErrorCode::BadConfig);
}

TEST_CASE("bundle: exact round trip and corruption") {
    const auto& t = trained();
    const auto bytes = serialize_bundle(t.bundle);
    const auto back = deserialize_bundle(bytes);
    CHECK(serialize_bundle(back) == bytes);
    CHECK(back.network.checksum() == t.bundle.network.checksum());
    CHECK(back.ensemble == t.bundle.ensemble);
    CHECK(back.meta == t.bundle.meta);
    CHECK(bundle_checksum(back) == bundle_checksum(t.bundle));

    auto flipped = bytes;
    flipped[flipped.size() / 2] ^= 0x10;
    CHECK(code_of([&] { deserialize_bundle(flipped); }) == ErrorCode::ChecksumMismatch);
    auto magic = bytes;
    magic[0] = 'X';
    CHECK(code_of([&] { deserialize_bundle(magic); }) == ErrorCode::VersionUnsupported);
    const std::span<const std::uint8_t> cut(bytes.data(), bytes.size() / 3);
    CHECK(code_of([&] { deserialize_bundle(cut); }) == ErrorCode::TruncatedFile);
    CHECK(code_of([&] { deserialize_bundle(std::span<const std::uint8_t>(bytes.data(), 3)); }) ==
          ErrorCode::TruncatedFile);
    CHECK(code_of([] { load_bundle("/nonexistent/model.bin"); }) == ErrorCode::Io);
}

TEST_CASE("reports: schema, ranges and determinism") {
    const auto& t = trained();
    Rng rng(14);
    for (int rep = 0; rep < 10; ++rep) {
        const auto smiles = t.records[rng.below(t.records.size())].smiles;
        PredictOptions opts;
        opts.augment_runs = 2;
        const auto r = predict_report(t.bundle, smiles, opts);
        REQUIRE(r.assays.size() == kAssayCount);
        for (std::size_t a = 0; a < kAssayCount; ++a) {
            const auto& e = r.assays[a];
            CHECK(e.assay == kAssays[a]);
            for (double v : {e.probability, e.trust_ml, e.global_confidence}) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
            CHECK((e.verdict == 0 || e.verdict == 1));
        }
        for (double v : {r.trust_densenet, r.trust_ml, r.global_confidence}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        const auto json = nlohmann::json::parse(format_report_line(r));
        CHECK(json.contains("smiles"));
        CHECK(format_report_line(r).find('\n') == std::string::npos);
        CHECK(format_report_text(r) == format_report_text(predict_report(t.bundle, smiles, opts)));
    }
    CHECK(code_of([&] { predict_report(t.bundle, "C1CC"); }) == ErrorCode::ParseFailure);
    CHECK(content_hash("CCO").size() == 16);
    CHECK(content_hash("CCO") != content_hash("OCC"));
}

TEST_CASE("reports: a training molecule is recalled") {
    const auto& t = trained();
    std::size_t checked = 0;
    for (std::size_t i = 0; i < 10; ++i) {
        const auto& rec = t.records[i];
        const auto r = predict_report(t.bundle, rec.smiles, PredictOptions{.augment_runs = 2});
        std::size_t labelled = 0, agree = 0;
        for (std::size_t a = 0; a < kAssayCount; ++a) {
            if (rec.labels[a] == ensemble::kMissing || !r.assays[a].trained) continue;
            ++labelled;
            agree += r.assays[a].verdict == rec.labels[a];
        }
        if (labelled == 0) continue;
        ++checked;
        CHECK(agree + 1 >= labelled);
    }
    CHECK(checked >= 5);
}

TEST_CASE("evaluation and fingerprint baseline run end to end") {
    const auto& t = trained();
    const auto report = evaluate_model(t.bundle, t.records);
    CHECK_FALSE(report.assays.empty());
    CHECK(report.macro.accuracy > 0.5);

    const auto baseline = fit_fingerprint_baseline(t.records, small_config());
    const auto scores = baseline_scores(baseline, t.records);
    CHECK(scores.size() == t.records.size());
    const auto base_report = evaluate_baseline(baseline, t.records);
    CHECK(base_report.macro.accuracy > 0.5);
    const auto features = fingerprint_features(t.records, 2, 64);
    CHECK(features.rows == t.records.size());
    CHECK(features.cols == 64);
}
