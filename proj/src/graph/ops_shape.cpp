#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "node.hpp"
#include "op_util.hpp"

namespace zsmad::graph::detail {

namespace {

Tensor int64_tensor(Shape shape, std::vector<int64_t> v) {
    return Tensor::ints(DataType::Int64, std::move(shape), std::move(v));
}

// Axes from input `idx` when present (newer opsets), else from attribute "axes".
std::optional<std::vector<int64_t>> axes_from(const Node& node, Inputs in, size_t idx) {
    if (const Tensor* t = optional_input(in, idx)) return t->to_int_vector();
    return node.attr_ints("axes");
}

template <class T>
void copy_block(std::span<const T> src, std::span<T> dst, int64_t src_off, int64_t dst_off, int64_t n) {
    std::copy_n(src.begin() + src_off, n, dst.begin() + dst_off);
}

void copy_elements(const Tensor& src, Tensor& dst, int64_t src_off, int64_t dst_off, int64_t n) {
    if (is_floating(src.dtype())) {
        copy_block<float>(src.float_data(), dst.float_data(), src_off, dst_off, n);
    } else {
        copy_block<int64_t>(src.int_data(), dst.int_data(), src_off, dst_off, n);
    }
}

void op_reshape(const Node& node, Inputs in, std::vector<Tensor>& out) {
    const Tensor& x = input(in, 0, node);
    std::vector<int64_t> target = node.opset >= 5 ? input(in, 1, node).to_int_vector() : node.attr_ints("shape").value_or(std::vector<int64_t>{});
    const bool allow_zero = node.attr_int("allowzero", 0) != 0;
    int64_t known = 1;
    int infer = -1;
    for (size_t d = 0; d < target.size(); ++d) {
        if (target[d] == 0 && !allow_zero) target[d] = x.dim(static_cast<int64_t>(d));
        if (target[d] == -1) {
            if (infer >= 0) throw GraphError("Reshape has more than one -1");
            infer = static_cast<int>(d);
        } else {
            known *= target[d];
        }
    }
    if (infer >= 0) {
        if (known == 0 || x.size() % known != 0) throw GraphError("Reshape cannot infer dimension for " + shape_string(x.shape()));
        target[static_cast<size_t>(infer)] = x.size() / known;
    }
    out[0] = x.reshaped(target);
}

void op_transpose(const Node& node, Inputs in, std::vector<Tensor>& out) {
    const Tensor& x = input(in, 0, node);
    const auto r = static_cast<size_t>(x.rank());
    std::vector<int64_t> perm = node.attr_ints("perm").value_or(std::vector<int64_t>{});
    if (perm.empty()) {
        perm.resize(r);
        std::iota(perm.rbegin(), perm.rend(), 0);
    }
    if (perm.size() != r) throw GraphError("Transpose perm length does not match rank");
    const Shape in_strides = strides_of(x.shape());
    Shape shape(r), strides(r);
    for (size_t d = 0; d < r; ++d) {
        const auto p = static_cast<size_t>(normalize_axis(perm[d], static_cast<int64_t>(r)));
        shape[d] = x.shape()[p];
        strides[d] = in_strides[p];
    }
    out[0] = gather_strided(x, shape, strides, 0);
}

void op_squeeze(const Node& node, Inputs in, std::vector<Tensor>& out) {
    const Tensor& x = input(in, 0, node);
    const auto axes = axes_from(node, in, 1);
    std::set<int64_t> drop;
    if (axes && !axes->empty()) {
        for (int64_t a : *axes) drop.insert(normalize_axis(a, x.rank()));
    } else {
        for (int64_t d = 0; d < x.rank(); ++d) if (x.dim(d) == 1) drop.insert(d);
    }
    Shape shape;
    for (int64_t d = 0; d < x.rank(); ++d) {
        if (drop.count(d)) {
            if (x.dim(d) != 1) throw GraphError("Squeeze on a dimension that is not 1");
            continue;
        }
        shape.push_back(x.dim(d));
    }
    out[0] = x.reshaped(shape);
}

void op_unsqueeze(const Node& node, Inputs in, std::vector<Tensor>& out) {
    const Tensor& x = input(in, 0, node);
    const auto axes = axes_from(node, in, 1);
    if (!axes) throw GraphError("Unsqueeze needs axes");
    const int64_t r = x.rank() + static_cast<int64_t>(axes->size());
    std::set<int64_t> insert;
    for (int64_t a : *axes) insert.insert(normalize_axis(a, r));
    Shape shape;
    int64_t src = 0;
    for (int64_t d = 0; d < r; ++d) shape.push_back(insert.count(d) ? 1 : x.dim(src++));
    out[0] = x.reshaped(shape);
}

void op_flatten(const Node& node, Inputs in, std::vector<Tensor>& out) {
    const Tensor& x = input(in, 0, node);
    int64_t axis = node.attr_int("axis", 1);
    if (axis < 0) axis += x.rank();
    int64_t outer = 1;
    for (int64_t d = 0; d < axis; ++d) outer *= x.dim(d);
    out[0] = x.reshaped({outer, outer == 0 ? 0 : x.size() / outer});
}

void op_concat(const Node& node, Inputs in, std::vector<Tensor>& out) {
    const Tensor& first = input(in, 0, node);
    const int64_t axis = normalize_axis(node.attr_int("axis", 0), first.rank());
    Shape shape = first.shape();
    shape[static_cast<size_t>(axis)] = 0;
    for (size_t k = 0; k < in.size(); ++k) {
        const Tensor& t = input(in, k, node);
        if (t.rank() != first.rank()) throw GraphError("Concat inputs differ in rank");
        shape[static_cast<size_t>(axis)] += t.dim(axis);
    }
    Tensor y = Tensor::zeros(first.dtype(), shape);
    const AxisSplit ys = split_at_axis(shape, axis);
    int64_t offset = 0;
    for (size_t k = 0; k < in.size(); ++k) {
        const Tensor& t = *in[k];
        const AxisSplit ts = split_at_axis(t.shape(), axis);
        const int64_t block = ts.extent * ts.inner;
        for (int64_t o = 0; o < ts.outer; ++o) {
            copy_elements(t, y, o * block, o * ys.extent * ys.inner + offset * ys.inner, block);
        }
        offset += ts.extent;
    }
    out[0] = std::move(y);
}

void op_slice(const Node& node, Inputs in, std::vector<Tensor>& out) {
    const Tensor& x = input(in, 0, node);
    std::vector<int64_t> starts, ends, axes, steps;
    if (node.opset < 10) {
        starts = node.attr_ints("starts").value_or(std::vector<int64_t>{});
        ends = node.attr_ints("ends").value_or(std::vector<int64_t>{});
        axes = node.attr_ints("axes").value_or(std::vector<int64_t>{});
    } else {
        starts = input(in, 1, node).to_int_vector();
        ends = input(in, 2, node).to_int_vector();
        if (const Tensor* t = optional_input(in, 3)) axes = t->to_int_vector();
        if (const Tensor* t = optional_input(in, 4)) steps = t->to_int_vector();
    }
    if (axes.empty()) {
        axes.resize(starts.size());
        std::iota(axes.begin(), axes.end(), 0);
    }
    if (steps.empty()) steps.assign(starts.size(), 1);
    if (ends.size() != starts.size() || axes.size() != starts.size() || steps.size() != starts.size()) {
        throw GraphError("Slice starts/ends/axes/steps lengths differ");
    }
    const Shape in_strides = strides_of(x.shape());
    Shape shape = x.shape();
    Shape strides = in_strides;
    int64_t base = 0;
    for (size_t k = 0; k < starts.size(); ++k) {
        const auto a = static_cast<size_t>(normalize_axis(axes[k], x.rank()));
        const int64_t dim = x.shape()[a];
        const int64_t step = steps[k];
        if (step == 0) throw GraphError("Slice step of 0");
        int64_t s = starts[k];
        int64_t e = ends[k];
        if (s < 0) s += dim;
        if (e < 0 && e > std::numeric_limits<int64_t>::min() / 2) e += dim;
        int64_t count = 0;
        if (step > 0) {
            s = std::clamp<int64_t>(s, 0, dim);
            e = std::clamp<int64_t>(e, 0, dim);
            count = e > s ? (e - s + step - 1) / step : 0;
        } else {
            s = std::clamp<int64_t>(s, 0, dim - 1);
            e = std::clamp<int64_t>(e, -1, dim - 1);
            count = s > e ? (s - e + (-step) - 1) / (-step) : 0;
        }
        shape[a] = count;
        strides[a] = in_strides[a] * step;
        base += s * in_strides[a];
    }
    out[0] = gather_strided(x, shape, strides, element_count(shape) == 0 ? 0 : base);
}

void op_gather(const Node& node, Inputs in, std::vector<Tensor>& out) {
    const Tensor& data = input(in, 0, node);
    const Tensor& indices = input(in, 1, node);
    const int64_t axis = normalize_axis(node.attr_int("axis", 0), data.rank());
    const AxisSplit s = split_at_axis(data.shape(), axis);
    Shape shape(data.shape().begin(), data.shape().begin() + axis);
    shape.insert(shape.end(), indices.shape().begin(), indices.shape().end());
    shape.insert(shape.end(), data.shape().begin() + axis + 1, data.shape().end());
    Tensor y = Tensor::zeros(data.dtype(), shape);
    const std::vector<int64_t> idx = indices.to_int_vector();
    const auto n_idx = static_cast<int64_t>(idx.size());
    for (int64_t o = 0; o < s.outer; ++o) {
        for (int64_t j = 0; j < n_idx; ++j) {
            int64_t k = idx[static_cast<size_t>(j)];
            if (k < 0) k += s.extent;
            if (k < 0 || k >= s.extent) throw GraphError("Gather index out of range");
            copy_elements(data, y, (o * s.extent + k) * s.inner, (o * n_idx + j) * s.inner, s.inner);
        }
    }
    out[0] = std::move(y);
}

void op_gather_elements(const Node& node, Inputs in, std::vector<Tensor>& out) {
    const Tensor& data = input(in, 0, node);
    const Tensor& indices = input(in, 1, node);
    const int64_t axis = normalize_axis(node.attr_int("axis", 0), data.rank());
    const Shape ds = strides_of(data.shape());
    const Shape is = strides_of(indices.shape());
    const std::vector<int64_t> idx = indices.to_int_vector();
    Tensor y = Tensor::zeros(data.dtype(), indices.shape());
    for (int64_t i = 0; i < indices.size(); ++i) {
        int64_t rem = i;
        int64_t off = 0;
        for (size_t d = 0; d < is.size(); ++d) {
            int64_t c = rem / is[d];
            rem %= is[d];
            if (static_cast<int64_t>(d) == axis) {
                c = idx[static_cast<size_t>(i)];
                if (c < 0) c += data.dim(axis);
                if (c < 0 || c >= data.dim(axis)) throw GraphError("GatherElements index out of range");
            }
            off += c * ds[d];
        }
        copy_elements(data, y, off, i, 1);
    }
    out[0] = std::move(y);
}

void op_expand(const Node& node, Inputs in, std::vector<Tensor>& out) {
    const Tensor& x = input(in, 0, node);
    const Shape shape = broadcast_shapes(x.shape(), input(in, 1, node).to_int_vector());
    Tensor y = Tensor::zeros(x.dtype(), shape);
    broadcast_for_each<1>(shape, {&x.shape()}, [&](int64_t i, const std::array<int64_t, 1>& o) {
        copy_elements(x, y, o[0], i, 1);
    });
    out[0] = std::move(y);
}

void op_split(const Node& node, Inputs in, std::vector<Tensor>& out) {
    const Tensor& x = input(in, 0, node);
    const int64_t axis = normalize_axis(node.attr_int("axis", 0), x.rank());
    std::vector<int64_t> sizes;
    if (const Tensor* t = optional_input(in, 1)) sizes = t->to_int_vector();
    else if (auto s = node.attr_ints("split")) sizes = *s;
    const auto n_out = static_cast<int64_t>(out.size());
    if (sizes.empty()) {
        const int64_t dim = x.dim(axis);
        const int64_t chunk = (dim + n_out - 1) / n_out;
        for (int64_t k = 0; k < n_out; ++k) sizes.push_back(std::max<int64_t>(0, std::min(chunk, dim - k * chunk)));
    }
    if (static_cast<int64_t>(sizes.size()) != n_out) throw GraphError("Split sizes do not match output count");
    const Shape in_strides = strides_of(x.shape());
    int64_t start = 0;
    for (int64_t k = 0; k < n_out; ++k) {
        Shape shape = x.shape();
        shape[static_cast<size_t>(axis)] = sizes[static_cast<size_t>(k)];
        out[static_cast<size_t>(k)] = gather_strided(x, shape, in_strides, start * in_strides[static_cast<size_t>(axis)]);
        start += sizes[static_cast<size_t>(k)];
    }
}

void op_tile(const Node& node, Inputs in, std::vector<Tensor>& out) {
    const Tensor& x = input(in, 0, node);
    const std::vector<int64_t> reps = input(in, 1, node).to_int_vector();
    if (static_cast<int64_t>(reps.size()) != x.rank()) throw GraphError("Tile repeats length does not match rank");
    Shape shape = x.shape();
    for (size_t d = 0; d < shape.size(); ++d) shape[d] *= reps[d];
    const Shape ys = strides_of(shape);
    const Shape xs = strides_of(x.shape());
    Tensor y = Tensor::zeros(x.dtype(), shape);
    for (int64_t i = 0; i < y.size(); ++i) {
        int64_t rem = i;
        int64_t off = 0;
        for (size_t d = 0; d < shape.size(); ++d) {
            const int64_t c = rem / ys[d];
            rem %= ys[d];
            off += (c % x.shape()[d]) * xs[d];
        }
        copy_elements(x, y, off, i, 1);
    }
    out[0] = std::move(y);
}

void op_constant(const Node& node, Inputs, std::vector<Tensor>& out) {
    if (const Tensor* t = node.attr_tensor("value")) {
        out[0] = *t;
    } else if (node.has("value_float")) {
        out[0] = Tensor::scalar(node.attr_float("value_float", 0.0f));
    } else if (node.has("value_floats")) {
        const auto& v = node.attrs.at("value_floats").floats;
        out[0] = Tensor::floats({static_cast<int64_t>(v.size())}, v);
    } else if (node.has("value_int")) {
        out[0] = int64_tensor({}, {node.attr_int("value_int", 0)});
    } else if (auto v = node.attr_ints("value_ints")) {
        out[0] = int64_tensor({static_cast<int64_t>(v->size())}, *v);
    } else {
        throw GraphError("Constant has no supported value attribute");
    }
}

void op_constant_of_shape(const Node& node, Inputs in, std::vector<Tensor>& out) {
    const Shape shape = input(in, 0, node).to_int_vector();
    const Tensor* value = node.attr_tensor("value");
    if (value == nullptr) {
        out[0] = Tensor::zeros(DataType::Float, shape);
        return;
    }
    Tensor y = Tensor::zeros(value->dtype(), shape);
    if (is_floating(y.dtype())) std::fill(y.float_data().begin(), y.float_data().end(), value->float_data()[0]);
    else std::fill(y.int_data().begin(), y.int_data().end(), value->int_data()[0]);
    out[0] = std::move(y);
}

void op_range(const Node& node, Inputs in, std::vector<Tensor>& out) {
    const Tensor& start = input(in, 0, node);
    const double s = start.at(0);
    const double limit = input(in, 1, node).at(0);
    const double delta = input(in, 2, node).at(0);
    if (delta == 0.0) throw GraphError("Range delta of 0");
    const auto n = static_cast<int64_t>(std::max(0.0, std::ceil((limit - s) / delta)));
    Tensor y = Tensor::zeros(start.dtype(), {n});
    for (int64_t i = 0; i < n; ++i) {
        if (is_floating(y.dtype())) y.float_data()[static_cast<size_t>(i)] = static_cast<float>(s + static_cast<double>(i) * delta);
        else y.int_data()[static_cast<size_t>(i)] = static_cast<int64_t>(s) + i * static_cast<int64_t>(delta);
    }
    out[0] = std::move(y);
}

void op_shape(const Node& node, Inputs in, std::vector<Tensor>& out) {
    const Tensor& x = input(in, 0, node);
    const int64_t r = x.rank();
    int64_t start = node.attr_int("start", 0);
    int64_t end = node.attr_int("end", r);
    if (start < 0) start += r;
    if (end < 0) end += r;
    start = std::clamp<int64_t>(start, 0, r);
    end = std::clamp<int64_t>(end, 0, r);
    std::vector<int64_t> dims(x.shape().begin() + start, x.shape().begin() + std::max(start, end));
    out[0] = int64_tensor({static_cast<int64_t>(dims.size())}, dims);
}

template <bool IsMax>
void op_arg_extreme(const Node& node, Inputs in, std::vector<Tensor>& out) {
    const Tensor& x = input(in, 0, node);
    const int64_t axis = normalize_axis(node.attr_int("axis", 0), x.rank());
    const bool keep = node.attr_int("keepdims", 1) != 0;
    const bool last = node.attr_int("select_last_index", 0) != 0;
    const AxisSplit s = split_at_axis(x.shape(), axis);
    Shape shape = x.shape();
    if (keep) shape[static_cast<size_t>(axis)] = 1;
    else shape.erase(shape.begin() + axis);
    std::vector<int64_t> result(static_cast<size_t>(s.outer * s.inner));
    for (int64_t o = 0; o < s.outer; ++o) {
        for (int64_t i = 0; i < s.inner; ++i) {
            int64_t best = 0;
            double best_v = x.at(o * s.extent * s.inner + i);
            for (int64_t k = 1; k < s.extent; ++k) {
                const double v = x.at((o * s.extent + k) * s.inner + i);
                const bool better = IsMax ? (last ? v >= best_v : v > best_v) : (last ? v <= best_v : v < best_v);
                if (better) {
                    best = k;
                    best_v = v;
                }
            }
            result[static_cast<size_t>(o * s.inner + i)] = best;
        }
    }
    out[0] = int64_tensor(shape, std::move(result));
}

enum class Reduce { Sum, Mean, Max, Min, Prod, L2, SumSquare };

template <Reduce R>
void op_reduce(const Node& node, Inputs in, std::vector<Tensor>& out) {
    const Tensor& x = input(in, 0, node);
    const bool keep = node.attr_int("keepdims", 1) != 0;
    const bool noop_empty = node.attr_int("noop_with_empty_axes", 0) != 0;
    auto axes = axes_from(node, in, 1);
    std::set<int64_t> reduce;
    if (!axes || axes->empty()) {
        if (noop_empty) {
            out[0] = x;
            return;
        }
        for (int64_t d = 0; d < x.rank(); ++d) reduce.insert(d);
    } else {
        for (int64_t a : *axes) reduce.insert(normalize_axis(a, x.rank()));
    }
    Shape kept = x.shape();
    int64_t count = 1;
    for (int64_t d : reduce) {
        count *= kept[static_cast<size_t>(d)];
        kept[static_cast<size_t>(d)] = 1;
    }
    const auto n_out = static_cast<size_t>(element_count(kept));
    double init = 0.0;
    if constexpr (R == Reduce::Max) init = -std::numeric_limits<double>::infinity();
    if constexpr (R == Reduce::Min) init = std::numeric_limits<double>::infinity();
    if constexpr (R == Reduce::Prod) init = 1.0;
    std::vector<double> acc(n_out, init);
    broadcast_for_each<1>(x.shape(), {&kept}, [&](int64_t i, const std::array<int64_t, 1>& o) {
        const double v = x.at(i);
        double& a = acc[static_cast<size_t>(o[0])];
        if constexpr (R == Reduce::Sum || R == Reduce::Mean) a += v;
        else if constexpr (R == Reduce::Max) a = std::max(a, v);
        else if constexpr (R == Reduce::Min) a = std::min(a, v);
        else if constexpr (R == Reduce::Prod) a *= v;
        else a += v * v;
    });
    for (double& a : acc) {
        if constexpr (R == Reduce::Mean) a /= static_cast<double>(count);
        if constexpr (R == Reduce::L2) a = std::sqrt(a);
    }
    Shape shape;
    for (int64_t d = 0; d < x.rank(); ++d) {
        if (!reduce.count(d)) shape.push_back(x.dim(d));
        else if (keep) shape.push_back(1);
    }
    Tensor y = Tensor::zeros(x.dtype(), shape);
    for (size_t i = 0; i < n_out; ++i) {
        if (is_floating(y.dtype())) y.float_data()[i] = static_cast<float>(acc[i]);
        else y.int_data()[i] = static_cast<int64_t>(acc[i]);
    }
    out[0] = std::move(y);
}

}  // namespace

void register_shape_ops(Registry& r) {
    r["Reshape"] = op_reshape;
    r["Transpose"] = op_transpose;
    r["Squeeze"] = op_squeeze;
    r["Unsqueeze"] = op_unsqueeze;
    r["Flatten"] = op_flatten;
    r["Concat"] = op_concat;
    r["Slice"] = op_slice;
    r["Gather"] = op_gather;
    r["GatherElements"] = op_gather_elements;
    r["Expand"] = op_expand;
    r["Split"] = op_split;
    r["Tile"] = op_tile;
    r["Constant"] = op_constant;
    r["ConstantOfShape"] = op_constant_of_shape;
    r["Range"] = op_range;
    r["Shape"] = op_shape;
    r["Size"] = [](const Node& node, Inputs in, std::vector<Tensor>& out) {
        out[0] = int64_tensor({}, {input(in, 0, node).size()});
    };
    r["ArgMax"] = op_arg_extreme<true>;
    r["ArgMin"] = op_arg_extreme<false>;
    r["ReduceSum"] = op_reduce<Reduce::Sum>;
    r["ReduceMean"] = op_reduce<Reduce::Mean>;
    r["ReduceMax"] = op_reduce<Reduce::Max>;
    r["ReduceMin"] = op_reduce<Reduce::Min>;
    r["ReduceProd"] = op_reduce<Reduce::Prod>;
    r["ReduceL2"] = op_reduce<Reduce::L2>;
    r["ReduceSumSquare"] = op_reduce<Reduce::SumSquare>;
}

}  // namespace zsmad::graph::detail
