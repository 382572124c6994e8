#include <cmath>
#include <fstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "zsmad/graph/session.hpp"

namespace {

using zsmad::graph::DataType;
using zsmad::graph::Session;
using zsmad::graph::Tensor;

const std::filesystem::path kDir = std::filesystem::path(ZSMAD_FIXTURE_DIR) / "mini_clip";

const nlohmann::json& golden() {
    static const nlohmann::json g = [] {
        std::ifstream in(kDir / "golden.json");
        return nlohmann::json::parse(in);
    }();
    return g;
}

void expect_rows(const Tensor& got, const nlohmann::json& want) {
    ASSERT_EQ(got.rank(), 2);
    ASSERT_EQ(got.dim(0), static_cast<int64_t>(want.size()));
    const int64_t d = got.dim(1);
    for (int64_t r = 0; r < got.dim(0); ++r) {
        for (int64_t c = 0; c < d; ++c) {
            const double e = want[static_cast<size_t>(r)][static_cast<size_t>(c)];
            EXPECT_NEAR(got.at(r * d + c), e, 1e-4 + 1e-4 * std::fabs(e)) << r << "," << c;
        }
    }
}

TEST(MiniClip, ImageGraphMatchesReference) {
    const Session s = Session::load(kDir / "image_encoder.onnx");
    const auto& px = golden().at("pixels");
    const Tensor x = Tensor::floats(px.at("shape").get<std::vector<int64_t>>(), px.at("data").get<std::vector<float>>());
    expect_rows(s.run(std::vector<Tensor>{x})[0], golden().at("image_embeddings"));
}

TEST(MiniClip, TextGraphMatchesReference) {
    const Session s = Session::load(kDir / "text_encoder.onnx");
    std::vector<int64_t> ids;
    const auto& rows = golden().at("input_ids");
    for (const auto& row : rows) for (int64_t v : row) ids.push_back(v);
    const Tensor x = Tensor::ints(DataType::Int64, {static_cast<int64_t>(rows.size()), 77}, ids);
    expect_rows(s.run(std::vector<Tensor>{x})[0], golden().at("text_embeddings"));
}

}  // namespace
