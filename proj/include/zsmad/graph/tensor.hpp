#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace zsmad::graph {

using Shape = std::vector<int64_t>;

// Element types the runtime understands. Floating types share float storage,
// integral and boolean types share int64 storage.
enum class DataType { Float, Double, Int64, Int32, Int8, UInt8, Bool };

bool is_floating(DataType t);
std::string to_string(DataType t);

int64_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

class GraphError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Tensor {
public:
    Tensor() = default;

    static Tensor floats(Shape shape, std::vector<float> values);
    static Tensor ints(DataType dtype, Shape shape, std::vector<int64_t> values);
    static Tensor zeros(DataType dtype, Shape shape);
    static Tensor scalar(float v) { return floats({}, {v}); }

    DataType dtype() const { return dtype_; }
    const Shape& shape() const { return shape_; }
    int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
    int64_t dim(int64_t axis) const;
    int64_t size() const { return element_count(shape_); }
    bool empty_value() const { return !valid_; }

    std::span<const float> float_data() const;
    std::span<float> float_data();
    std::span<const int64_t> int_data() const;
    std::span<int64_t> int_data();

    // Element i as double, whatever the storage.
    double at(int64_t i) const;
    std::vector<int64_t> to_int_vector() const;

    Tensor reshaped(Shape shape) const;

private:
    DataType dtype_ = DataType::Float;
    Shape shape_;
    std::vector<float> f_;
    std::vector<int64_t> i_;
    bool valid_ = false;
};

}  // namespace zsmad::graph
