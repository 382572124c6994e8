#pragma once

#include <array>
#include <vector>

#include <fmt/format.h>

#include "zsmad/graph/tensor.hpp"

namespace zsmad::graph::detail {

inline int64_t normalize_axis(int64_t axis, int64_t rank) {
    const int64_t a = axis < 0 ? axis + rank : axis;
    if (a < 0 || a >= std::max<int64_t>(rank, 1)) {
        throw GraphError(fmt::format("axis {} out of range for rank {}", axis, rank));
    }
    return a;
}

inline Shape strides_of(const Shape& shape) {
    Shape s(shape.size(), 1);
    for (int64_t d = static_cast<int64_t>(shape.size()) - 2; d >= 0; --d) {
        s[static_cast<size_t>(d)] = s[static_cast<size_t>(d + 1)] * shape[static_cast<size_t>(d + 1)];
    }
    return s;
}

// Multidirectional (numpy-style) broadcast of two shapes.
inline Shape broadcast_shapes(const Shape& a, const Shape& b) {
    const size_t r = std::max(a.size(), b.size());
    Shape out(r, 1);
    for (size_t i = 0; i < r; ++i) {
        const int64_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
        const int64_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
        if (da != db && da != 1 && db != 1) {
            throw GraphError(fmt::format("shapes {} and {} do not broadcast", shape_string(a), shape_string(b)));
        }
        out[i] = da == 1 ? db : da;
    }
    return out;
}

// Calls fn(out_index, offsets) for every element of `out`, where offsets[k]
// is the linear index into input k broadcast to `out`.
template <size_t K, class Fn>
void broadcast_for_each(const Shape& out, const std::array<const Shape*, K>& ins, Fn&& fn) {
    const size_t r = out.size();
    const int64_t total = element_count(out);
    if (total == 0) return;
    if (r == 0) {
        std::array<int64_t, K> zero{};
        fn(int64_t{0}, zero);
        return;
    }
    std::array<std::vector<int64_t>, K> st;
    for (size_t k = 0; k < K; ++k) {
        const Shape& s = *ins[k];
        st[k].assign(r, 0);
        const size_t offset = r - s.size();
        int64_t acc = 1;
        for (int64_t d = static_cast<int64_t>(s.size()) - 1; d >= 0; --d) {
            if (s[static_cast<size_t>(d)] != 1) st[k][static_cast<size_t>(d) + offset] = acc;
            acc *= s[static_cast<size_t>(d)];
        }
    }
    std::vector<int64_t> idx(r, 0);
    std::array<int64_t, K> base{};
    const int64_t inner = out[r - 1];
    std::array<int64_t, K> inner_stride{};
    for (size_t k = 0; k < K; ++k) inner_stride[k] = st[k][r - 1];
    for (int64_t i = 0; i < total; i += inner) {
        std::array<int64_t, K> o = base;
        for (int64_t j = 0; j < inner; ++j) {
            fn(i + j, o);
            for (size_t k = 0; k < K; ++k) o[k] += inner_stride[k];
        }
        for (int64_t d = static_cast<int64_t>(r) - 2; d >= 0; --d) {
            const auto du = static_cast<size_t>(d);
            ++idx[du];
            for (size_t k = 0; k < K; ++k) base[k] += st[k][du];
            if (idx[du] < out[du]) break;
            for (size_t k = 0; k < K; ++k) base[k] -= st[k][du] * out[du];
            idx[du] = 0;
        }
    }
}

// Calls fn(out_index, in_offset) for every element of `out`, where the input
// offset advances by strides[d] along output dimension d.
template <class Fn>
void strided_for_each(const Shape& out, const Shape& strides, int64_t base, Fn&& fn) {
    const size_t r = out.size();
    const int64_t total = element_count(out);
    if (total == 0) return;
    if (r == 0) {
        fn(int64_t{0}, base);
        return;
    }
    std::vector<int64_t> idx(r, 0);
    const int64_t inner = out[r - 1];
    const int64_t inner_stride = strides[r - 1];
    int64_t off = base;
    for (int64_t i = 0; i < total; i += inner) {
        int64_t o = off;
        for (int64_t j = 0; j < inner; ++j, o += inner_stride) fn(i + j, o);
        for (int64_t d = static_cast<int64_t>(r) - 2; d >= 0; --d) {
            const auto du = static_cast<size_t>(d);
            ++idx[du];
            off += strides[du];
            if (idx[du] < out[du]) break;
            off -= strides[du] * out[du];
            idx[du] = 0;
        }
    }
}

// Copies elements of `src` selected by (out shape, strides, base) into a new
// tensor of the same dtype.
inline Tensor gather_strided(const Tensor& src, const Shape& out, const Shape& strides, int64_t base) {
    Tensor y = Tensor::zeros(src.dtype(), out);
    if (is_floating(src.dtype())) {
        auto ps = src.float_data();
        auto py = y.float_data();
        strided_for_each(out, strides, base, [&](int64_t i, int64_t o) { py[static_cast<size_t>(i)] = ps[static_cast<size_t>(o)]; });
    } else {
        auto ps = src.int_data();
        auto py = y.int_data();
        strided_for_each(out, strides, base, [&](int64_t i, int64_t o) { py[static_cast<size_t>(i)] = ps[static_cast<size_t>(o)]; });
    }
    return y;
}

// Splits `shape` around `axis` into (outer, axis extent, inner) counts.
struct AxisSplit {
    int64_t outer = 1;
    int64_t extent = 1;
    int64_t inner = 1;
};

inline AxisSplit split_at_axis(const Shape& shape, int64_t axis) {
    AxisSplit s;
    for (int64_t d = 0; d < static_cast<int64_t>(shape.size()); ++d) {
        const int64_t v = shape[static_cast<size_t>(d)];
        if (d < axis) s.outer *= v;
        else if (d == axis) s.extent = v;
        else s.inner *= v;
    }
    return s;
}

}  // namespace zsmad::graph::detail
