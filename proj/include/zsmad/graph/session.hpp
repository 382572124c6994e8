#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zsmad/graph/tensor.hpp"

namespace zsmad::graph {

struct ValueInfo {
    std::string name;
    DataType dtype = DataType::Float;
    // nullopt marks a symbolic or unknown dimension.
    std::vector<std::optional<int64_t>> dims;
};

// An immutable, loaded computation graph in the ONNX interchange format.
//
// run() allocates all intermediate state per call and never mutates the
// session, so one Session may be used from many threads at once. Copies are
// cheap and share the loaded weights.
class Session {
public:
    static Session load(const std::filesystem::path& path);
    // base_dir resolves tensors stored as external data.
    static Session from_bytes(const std::string& bytes,
                              const std::filesystem::path& base_dir = {});

    const std::vector<ValueInfo>& inputs() const;
    const std::vector<ValueInfo>& outputs() const;
    int64_t opset() const;
    // Distinct op types used by the graph, sorted.
    std::vector<std::string> op_types() const;

    // Feeds are matched to graph inputs by position.
    std::vector<Tensor> run(std::span<const Tensor> feeds) const;
    std::vector<Tensor> run(const std::map<std::string, Tensor>& feeds) const;

    struct Impl;  // internal

private:
    explicit Session(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<const Impl> impl_;
};

// Op types the runtime can execute, sorted.
std::vector<std::string> supported_ops();

}  // namespace zsmad::graph
