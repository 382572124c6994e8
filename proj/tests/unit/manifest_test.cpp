#include <set>

#include <fmt/format.h>
#include <gtest/gtest.h>

#include "test_support.hpp"
#include "zsmad/errors.hpp"
#include "zsmad/manifest.hpp"

namespace zsmad {
namespace {

using testing::TempDir;

const char* kSixRows =
    "id,path,label,generator,medium,subject_id\n"
    "b1,b1.png,bonafide,-,digital,s01\n"
    "b2,b2.png,bonafide,-,ps-2,s02\n"
    "m1,m1.png,morph,lma-i,digital,\n"
    "m2,m2.png,morph,pipe,digital,\n"
    "m3,m3.png,morph,mordiff,ps-2,\n"
    "b3,b3.png,bonafide,-,ps-1,s03\n";

Manifest six_rows(const TempDir& dir) { return load_manifest(dir.write("six.csv", kSixRows)); }

std::vector<std::string> ids(const Manifest& m) {
    std::vector<std::string> out;
    for (const auto& s : m.samples) out.push_back(s.id);
    return out;
}

TEST(Manifest, LoadsMinimalCsv) {
    TempDir dir;
    const auto m = load_manifest(dir.write("m.csv",
                                           "id,path,label,generator,medium,subject_id\n"
                                           "s1,img1.png,bonafide,-,digital,\n"
                                           "s2,img2.png,morph,lma-i,digital,\n"));
    ASSERT_EQ(m.samples.size(), 2u);
    EXPECT_EQ(m.samples[0].label, Label::BonaFide);
    EXPECT_EQ(m.samples[0].generator, Generator::None);
    EXPECT_EQ(m.samples[1].generator, Generator::LmaI);
    EXPECT_EQ(m.samples[1].subject_id, std::nullopt);
    EXPECT_EQ(m.resolve(m.samples[0]), dir.path() / "img1.png");
    EXPECT_EQ(m.source_tag, "m.csv");
}

TEST(Manifest, ParsesTagsCaseInsensitivelyAndPreservesOrder) {
    TempDir dir;
    const auto m = load_manifest(dir.write("m.csv",
                                           "medium,label,id,generator,path\r\n"
                                           "PS-1,Morph,z,MIPGAN-2,z.png\r\n"
                                           "Digital,BONAFIDE,a,-,a.png\r\n"
                                           "\r\n"));
    EXPECT_EQ(ids(m), (std::vector<std::string>{"z", "a"}));
    EXPECT_EQ(m.samples[0].generator, Generator::Mipgan2);
    EXPECT_EQ(m.samples[0].medium, Medium::PS1);
}

TEST(Manifest, BonaFideWithGeneratorIsConstraintError) {
    TempDir dir;
    const auto p = dir.write("m.csv", "id,path,label,generator,medium\ns3,img3.png,bonafide,lma-i,digital\n");
    EXPECT_THROW(load_manifest(p), ConstraintError);
}

TEST(Manifest, MorphWithoutGeneratorIsConstraintError) {
    TempDir dir;
    EXPECT_THROW(load_manifest(dir.write("m.csv", "id,path,label,generator,medium\ns,a.png,morph,-,digital\n")),
                 ConstraintError);
}

TEST(Manifest, DuplicateIdIsConstraintError) {
    TempDir dir;
    EXPECT_THROW(load_manifest(dir.write("m.csv",
                                         "id,path,label,generator,medium\n"
                                         "s,a.png,bonafide,-,digital\n"
                                         "s,b.png,bonafide,-,digital\n")),
                 ConstraintError);
}

TEST(Manifest, MissingColumnIsSchemaError) {
    TempDir dir;
    EXPECT_THROW(load_manifest(dir.write("m.csv", "id,path,label,medium\ns,a.png,bonafide,digital\n")), SchemaError);
    EXPECT_THROW(load_manifest(dir.write("e.csv", "")), SchemaError);
    EXPECT_THROW(load_manifest(dir.write("m.json", R"([{"id":"s","path":"a.png","label":"bonafide","generator":"-"}])")),
                 SchemaError);
}

TEST(Manifest, MalformedRowReportsLineNumber) {
    TempDir dir;
    const auto p = dir.write("m.csv",
                             "id,path,label,generator,medium\n"
                             "s1,a.png,bonafide,-,digital\n"
                             "s2,b,c.png,morph,lma-i,digital\n");
    try {
        load_manifest(p);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
    EXPECT_THROW(load_manifest(dir.write("u.csv", "id,path,label,generator,medium\ns,a.png,real,-,digital\n")), ParseError);
    EXPECT_THROW(load_manifest(dir.write("g.csv", "id,path,label,generator,medium\ns,a.png,morph,lma-iii,digital\n")),
                 ParseError);
    EXPECT_THROW(load_manifest(dir.write("x.csv", "id,path,label,generator,medium\ns,a.png,morph,pipe,ps-3\n")), ParseError);
    EXPECT_THROW(load_manifest(dir.write("b.json", "[{")), ParseError);
}

TEST(Manifest, MissingFileIsIoError) { EXPECT_THROW(load_manifest("/nonexistent/zsmad/m.csv"), IoError); }

TEST(Manifest, JsonAcceptsNullGenerator) {
    TempDir dir;
    const auto m = load_manifest(dir.write(
        "m.json",
        R"([{"id":"b","path":"b.png","label":"bonafide","generator":null,"medium":"ps-2"},
            {"id":"m","path":"m.png","label":"morph","generator":"MorDiff","medium":"digital","subject_id":"x7"}])"));
    ASSERT_EQ(m.samples.size(), 2u);
    EXPECT_EQ(m.samples[0].generator, Generator::None);
    EXPECT_EQ(m.samples[1].generator, Generator::MorDiff);
    EXPECT_EQ(m.samples[1].subject_id, "x7");
}

TEST(Manifest, CanonicalSpellings) {
    EXPECT_EQ(to_string(Generator::LmaII), "lma-ii");
    EXPECT_EQ(to_string(Generator::Mipgan2), "mipgan-2");
    EXPECT_EQ(to_string(Generator::None), "-");
    EXPECT_EQ(to_string(Medium::PS2), "ps-2");
    EXPECT_EQ(to_string(Label::BonaFide), "bonafide");
    for (auto g : kMorphGenerators) EXPECT_EQ(parse_generator(to_string(g)), g);
    for (auto md : kMediums) EXPECT_EQ(parse_medium(to_string(md)), md);
}

TEST(Manifest, WriteThenLoadIsIdentity) {
    TempDir dir;
    const Manifest m = six_rows(dir);
    for (auto fmt : {ManifestFormat::Csv, ManifestFormat::Json}) {
        const auto p = dir / (fmt == ManifestFormat::Csv ? "six.csv" : "six.json");
        Manifest copy = m;
        copy.source_tag = p.filename().string();
        write_manifest(copy, p, fmt);
        EXPECT_EQ(load_manifest(p, fmt), copy);
    }
}

TEST(Manifest, WriteRejectsCommaInPath) {
    TempDir dir;
    Manifest m;
    m.samples.push_back({"a", "x,y.png", Label::BonaFide, Generator::None, Medium::Digital, std::nullopt});
    EXPECT_THROW(write_manifest(m, dir / "o.csv", ManifestFormat::Csv), ConstraintError);
}

TEST(Slice, WithoutFiltersIsIdentity) {
    TempDir dir;
    const auto m = six_rows(dir);
    EXPECT_EQ(slice(m, std::nullopt, std::nullopt), m);
}

TEST(Slice, SixRowFixtureByHand) {
    TempDir dir;
    const auto m = six_rows(dir);
    // PIPE/PS-2: no matching morphs, the PS-2 bona fide row stays.
    EXPECT_EQ(ids(slice(m, Generator::Pipe, Medium::PS2)), (std::vector<std::string>{"b2"}));
    EXPECT_EQ(ids(slice(m, Generator::Pipe, Medium::Digital)), (std::vector<std::string>{"b1", "m2"}));
    EXPECT_EQ(ids(slice(m, std::nullopt, Medium::PS2)), (std::vector<std::string>{"b2", "m3"}));
    EXPECT_EQ(ids(slice(m, Generator::LmaI, std::nullopt)), (std::vector<std::string>{"b1", "b2", "m1", "b3"}));
}

TEST(Slice, IdempotentAndGeneratorUnionIsExact) {
    TempDir dir;
    const auto m = six_rows(dir);
    for (auto md : kMediums) {
        std::multiset<std::string> seen;
        for (auto g : kMorphGenerators) {
            const auto once = slice(m, g, md);
            EXPECT_EQ(slice(once, g, md), once);
            for (const auto& s : once.samples) {
                if (s.label == Label::Morph) seen.insert(s.id);
            }
        }
        std::multiset<std::string> expected;
        for (const auto& s : m.samples) {
            if (s.label == Label::Morph && s.medium == md) expected.insert(s.id);
        }
        EXPECT_EQ(seen, expected);
    }
}

// The stated census: 1276 bona fide per medium for two mediums and 2526 morphs
// per generator. Only the digital medium carries morphs so that the stated
// total of 12630 morphs and the per-slice count of 2526 both hold.
TEST(Slice, PaperCensusCounts) {
    TempDir dir;
    std::string csv = "id,path,label,generator,medium\n";
    for (auto md : {Medium::Digital, Medium::PS1}) {
        for (int i = 0; i < 1276; ++i) csv += fmt::format("b-{}-{},b.png,bonafide,-,{}\n", to_string(md), i, to_string(md));
    }
    for (auto g : kMorphGenerators) {
        for (int i = 0; i < 2526; ++i) csv += fmt::format("m-{}-{},m.png,morph,{},digital\n", to_string(g), i, to_string(g));
    }
    const auto m = load_manifest(dir.write("census.csv", csv));
    EXPECT_EQ(m.count(Label::BonaFide), 2552u);
    EXPECT_EQ(m.count(Label::Morph), 12630u);
    const auto s = slice(m, Generator::LmaI, Medium::Digital);
    EXPECT_EQ(s.count(Label::BonaFide), 1276u);
    EXPECT_EQ(s.count(Label::Morph), 2526u);
}

}  // namespace
}  // namespace zsmad
