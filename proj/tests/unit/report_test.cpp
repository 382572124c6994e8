#include <gtest/gtest.h>
#include <json.hpp>

#include "synthetic.hpp"
#include "test_support.hpp"
#include "zsmad/digest.hpp"
#include "zsmad/errors.hpp"
#include "zsmad/report.hpp"

namespace {

using namespace zsmad;
using zsmad::testing::kFixtures;
using zsmad::testing::slurp;
using zsmad::testing::TempDir;

const auto kGolden = kFixtures / "toy_run" / "golden";

TEST(Csv, Formatting) {
    EXPECT_EQ(format_real(0.1), "0.1");
    EXPECT_EQ(format_real(2.0 / 3.0), "0.6666666667");
    EXPECT_EQ(format_real(0), "0");
    EXPECT_EQ(format_real(1e-12), "1e-12");
    EXPECT_EQ(csv_field("plain"), "plain");
    EXPECT_EQ(csv_field("a, b"), "\"a, b\"");
    EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
}

TEST(Csv, DetCurve) {
    const std::vector<DetPoint> pts = {{0.25, 0.0, 1.0}, {0.5, 0.5, 0.5}};
    EXPECT_EQ(det_to_csv(pts), "threshold,macer,bpcer\n0.25,0,1\n0.5,0.5,0.5\n");
}

TEST(Csv, DegenerateCellsLeaveRatesEmpty) {
    ExperimentResult r;
    r.cells.push_back({"p01", PromptCategory::Long, Generator::Pipe, Medium::PS2, 0, 3, true, {}});
    EXPECT_EQ(cells_to_csv(r),
              "prompt_id,category,generator,medium,n_bonafide,n_morph,degenerate,achieved_macer,bpcer,threshold\n"
              "p01,long,pipe,ps-2,0,3,1,,,\n");
}

TEST(ReportJson, GoldenRoundTripIsByteIdentical) {
    const std::string text = slurp(kGolden / "results.json");
    const RunReport r = report_from_json(text);
    EXPECT_EQ(report_to_json(r), text);
    EXPECT_EQ(r.result.cells.size(), 150u);
    EXPECT_EQ(r.comparison.size(), 12u);
    EXPECT_EQ(r.experiment3.best_prompt, "p07");
    EXPECT_EQ(r.bank, default_prompt_bank());
    EXPECT_EQ(aggregates_to_csv(r.experiment2), slurp(kGolden / "aggregates.csv"));
    EXPECT_EQ(comparison_to_csv(r.comparison), slurp(kGolden / "table1.csv"));
}

TEST(ReportJson, DegenerateCellsSerialiseAsNull) {
    const auto doc = nlohmann::json::parse(slurp(kGolden / "results.json"));
    size_t nulls = 0;
    for (const auto& c : doc.at("per_cell")) {
        if (c.at("degenerate").get<bool>()) {
            EXPECT_TRUE(c.at("bpcer").is_null());
            ++nulls;
        }
    }
    EXPECT_EQ(nulls, 90u);
    EXPECT_EQ(doc.at("skipped").size(), 1u);
    EXPECT_EQ(doc.at("config_digest").get<std::string>().size(), 64u);
}

TEST(ReportJson, SyntheticRoundTrip) {
    const Manifest m = zsmad::testing::full_grid_manifest(3, 2);
    const auto bank = default_prompt_bank();
    const auto run = zsmad::testing::synthetic_run(m, bank, 8);
    auto rows = compare_from_scores(m, bank, run, zsmad::testing::synthetic_baselines(m, 9), 0.2);
    const RunReport r = RunReport::assemble("d", bank, build_cells(m, bank, run, 0.2), rows);
    const RunReport back = report_from_json(report_to_json(r));
    EXPECT_EQ(back.result.cells, r.result.cells);
    EXPECT_EQ(back.comparison, r.comparison);
    EXPECT_EQ(back.experiment2, r.experiment2);
    EXPECT_DOUBLE_EQ(back.result.target_macer, 0.2);
}

TEST(ReportJson, Errors) {
    EXPECT_THROW(report_from_json("{"), ParseError);
    EXPECT_THROW(report_from_json("{}"), SchemaError);
    auto doc = nlohmann::json::parse(slurp(kGolden / "results.json"));
    doc["per_cell"][0]["medium"] = "ps-9";
    EXPECT_THROW(report_from_json(doc.dump()), ParseError);
}

TEST(Report, WritesTables) {
    const RunReport r = report_from_json(slurp(kGolden / "results.json"));
    TempDir dir;
    write_report(r, dir / "out");
    for (const char* f : {"results.json", "cells.csv", "aggregates.csv", "prompts.csv", "table1.csv", "skipped.csv"}) {
        EXPECT_EQ(slurp(dir / "out" / f), slurp(kGolden / f)) << f;
    }
    const std::string table = summary_table(r);
    EXPECT_NE(table.find("BPCER @ MACER = 10%"), std::string::npos);
    EXPECT_NE(table.find("best prompt across cells: p07"), std::string::npos);
}

TEST(Digest, KnownVectors) {
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Digest, LabelledPartsDoNotBlur) {
    EXPECT_NE(DigestBuilder().add("x", "ab").add("y", "c").hex(), DigestBuilder().add("x", "a").add("y", "bc").hex());
    EXPECT_NE(DigestBuilder().add("x", "1").add("y", "2").hex(), DigestBuilder().add("y", "2").add("x", "1").hex());
    EXPECT_EQ(DigestBuilder().add("x", "1").hex(), DigestBuilder().add("x", "1").hex());
}

TEST(Digest, FilesHashContentNotPath) {
    TempDir a, b;
    a.write("f", "same");
    b.write("g", "same");
    EXPECT_EQ(DigestBuilder().add_file("f", a / "f").hex(), DigestBuilder().add_file("f", b / "g").hex());
    EXPECT_THROW(DigestBuilder().add_file("f", a / "missing"), IoError);
}

}  // namespace
