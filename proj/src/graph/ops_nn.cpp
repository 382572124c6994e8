#include <cmath>
#include <limits>

#include <Eigen/Core>

#include "node.hpp"
#include "op_util.hpp"

namespace zsmad::graph::detail {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

void op_matmul(const Node& node, Inputs in, std::vector<Tensor>& out) {
    Tensor a = input(in, 0, node);
    Tensor b = input(in, 1, node);
    const bool a_vec = a.rank() == 1;
    const bool b_vec = b.rank() == 1;
    if (a_vec) a = a.reshaped({1, a.dim(0)});
    if (b_vec) b = b.reshaped({b.dim(0), 1});
    const int64_t m = a.dim(-2);
    const int64_t k = a.dim(-1);
    const int64_t n = b.dim(-1);
    if (b.dim(-2) != k) {
        throw GraphError("MatMul inner dimensions differ: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    }
    const Shape a_batch(a.shape().begin(), a.shape().end() - 2);
    const Shape b_batch(b.shape().begin(), b.shape().end() - 2);
    const Shape batch = broadcast_shapes(a_batch, b_batch);

    Shape shape = batch;
    if (!a_vec) shape.push_back(m);
    if (!b_vec) shape.push_back(n);
    Tensor y = Tensor::zeros(DataType::Float, shape);
    const float* pa = a.float_data().data();
    const float* pb = b.float_data().data();
    float* py = y.float_data().data();
    auto multiply = [&](int64_t yi, int64_t ai, int64_t bi) {
        ConstMap A(pa + ai * m * k, m, k);
        ConstMap B(pb + bi * k * n, k, n);
        MutMap Y(py + yi * m * n, m, n);
        Y.noalias() = A * B;
    };
    if (batch.empty()) {
        multiply(0, 0, 0);
    } else {
        broadcast_for_each<2>(batch, {&a_batch, &b_batch}, [&](int64_t i, const std::array<int64_t, 2>& o) {
            multiply(i, o[0], o[1]);
        });
    }
    out[0] = std::move(y);
}

void op_gemm(const Node& node, Inputs in, std::vector<Tensor>& out) {
    const Tensor& a = input(in, 0, node);
    const Tensor& b = input(in, 1, node);
    const Tensor* c = optional_input(in, 2);
    const float alpha = node.attr_float("alpha", 1.0f);
    const float beta = node.attr_float("beta", 1.0f);
    const bool ta = node.attr_int("transA", 0) != 0;
    const bool tb = node.attr_int("transB", 0) != 0;
    if (a.rank() != 2 || b.rank() != 2) throw GraphError("Gemm expects 2-D operands");
    ConstMap A(a.float_data().data(), a.dim(0), a.dim(1));
    ConstMap B(b.float_data().data(), b.dim(0), b.dim(1));
    const int64_t m = ta ? a.dim(1) : a.dim(0);
    const int64_t n = tb ? b.dim(0) : b.dim(1);
    if ((ta ? a.dim(0) : a.dim(1)) != (tb ? b.dim(1) : b.dim(0))) throw GraphError("Gemm inner dimensions differ");
    Tensor y = Tensor::zeros(DataType::Float, {m, n});
    MutMap Y(y.float_data().data(), m, n);
    if (ta && tb) Y.noalias() = A.transpose() * B.transpose();
    else if (ta) Y.noalias() = A.transpose() * B;
    else if (tb) Y.noalias() = A * B.transpose();
    else Y.noalias() = A * B;
    if (alpha != 1.0f) Y *= alpha;
    if (c != nullptr && beta != 0.0f) {
        const Shape ys = y.shape();
        auto pc = c->float_data();
        auto py = y.float_data();
        broadcast_for_each<1>(ys, {&c->shape()}, [&](int64_t i, const std::array<int64_t, 1>& o) {
            py[static_cast<size_t>(i)] += beta * pc[static_cast<size_t>(o[0])];
        });
    }
    out[0] = std::move(y);
}

struct Window2d {
    int64_t kh = 1, kw = 1;
    int64_t sh = 1, sw = 1;
    int64_t dh = 1, dw = 1;
    int64_t pt = 0, pl = 0, pb = 0, pr = 0;
    int64_t oh = 0, ow = 0;
};

Window2d window(const Node& node, int64_t h, int64_t w, int64_t kh, int64_t kw, bool ceil_mode) {
    Window2d win;
    win.kh = kh;
    win.kw = kw;
    if (auto s = node.attr_ints("strides")) {
        win.sh = (*s)[0];
        win.sw = (*s)[1];
    }
    if (auto d = node.attr_ints("dilations")) {
        win.dh = (*d)[0];
        win.dw = (*d)[1];
    }
    const std::string auto_pad = node.attr_string("auto_pad", "NOTSET");
    const int64_t ekh = (kh - 1) * win.dh + 1;
    const int64_t ekw = (kw - 1) * win.dw + 1;
    if (auto_pad == "SAME_UPPER" || auto_pad == "SAME_LOWER") {
        win.oh = (h + win.sh - 1) / win.sh;
        win.ow = (w + win.sw - 1) / win.sw;
        const int64_t ph = std::max<int64_t>(0, (win.oh - 1) * win.sh + ekh - h);
        const int64_t pw = std::max<int64_t>(0, (win.ow - 1) * win.sw + ekw - w);
        const bool upper = auto_pad == "SAME_UPPER";
        win.pt = upper ? ph / 2 : ph - ph / 2;
        win.pb = ph - win.pt;
        win.pl = upper ? pw / 2 : pw - pw / 2;
        win.pr = pw - win.pl;
        return win;
    }
    if (auto_pad == "NOTSET") {
        if (auto p = node.attr_ints("pads")) {
            win.pt = (*p)[0];
            win.pl = (*p)[1];
            win.pb = (*p)[2];
            win.pr = (*p)[3];
        }
    } else if (auto_pad != "VALID") {
        throw GraphError("unsupported auto_pad " + auto_pad);
    }
    const int64_t span_h = h + win.pt + win.pb - ekh;
    const int64_t span_w = w + win.pl + win.pr - ekw;
    if (ceil_mode) {
        win.oh = (span_h + win.sh - 1) / win.sh + 1;
        win.ow = (span_w + win.sw - 1) / win.sw + 1;
        // The last window must start inside the input or left padding.
        if ((win.oh - 1) * win.sh >= h + win.pt) --win.oh;
        if ((win.ow - 1) * win.sw >= w + win.pl) --win.ow;
    } else {
        win.oh = span_h / win.sh + 1;
        win.ow = span_w / win.sw + 1;
    }
    if (win.oh <= 0 || win.ow <= 0) throw GraphError("window larger than padded input");
    return win;
}

void op_conv(const Node& node, Inputs in, std::vector<Tensor>& out) {
    const Tensor& x = input(in, 0, node);
    const Tensor& w = input(in, 1, node);
    const Tensor* bias = optional_input(in, 2);
    if (x.rank() != 4 || w.rank() != 4) throw GraphError("only 2-D convolution is supported");
    const int64_t batch = x.dim(0), channels = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const int64_t m = w.dim(0), kc = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    const int64_t groups = node.attr_int("group", 1);
    if (kc * groups != channels || m % groups != 0) throw GraphError("Conv channel/group mismatch");
    const Window2d win = window(node, h, wd, kh, kw, false);
    const int64_t m_per_group = m / groups;
    const int64_t patch = kc * kh * kw;
    const int64_t positions = win.oh * win.ow;

    Tensor y = Tensor::zeros(DataType::Float, {batch, m, win.oh, win.ow});
    const float* px = x.float_data().data();
    const float* pw = w.float_data().data();
    float* py = y.float_data().data();
    RowMatrix col(patch, positions);
    for (int64_t b = 0; b < batch; ++b) {
        for (int64_t g = 0; g < groups; ++g) {
            for (int64_t c = 0; c < kc; ++c) {
                const float* plane = px + ((b * channels) + g * kc + c) * h * wd;
                for (int64_t i = 0; i < kh; ++i) {
                    for (int64_t j = 0; j < kw; ++j) {
                        float* row = col.data() + ((c * kh + i) * kw + j) * positions;
                        for (int64_t oy = 0; oy < win.oh; ++oy) {
                            const int64_t iy = oy * win.sh - win.pt + i * win.dh;
                            for (int64_t ox = 0; ox < win.ow; ++ox) {
                                const int64_t ix = ox * win.sw - win.pl + j * win.dw;
                                row[oy * win.ow + ox] = (iy >= 0 && iy < h && ix >= 0 && ix < wd) ? plane[iy * wd + ix] : 0.0f;
                            }
                        }
                    }
                }
            }
            ConstMap W(pw + g * m_per_group * patch, m_per_group, patch);
            MutMap Y(py + (b * m + g * m_per_group) * positions, m_per_group, positions);
            Y.noalias() = W * col;
        }
    }
    if (bias != nullptr) {
        auto pb = bias->float_data();
        for (int64_t b = 0; b < batch; ++b) {
            for (int64_t o = 0; o < m; ++o) {
                float* plane = py + (b * m + o) * positions;
                for (int64_t p = 0; p < positions; ++p) plane[p] += pb[static_cast<size_t>(o)];
            }
        }
    }
    out[0] = std::move(y);
}

template <bool IsMax>
void op_pool(const Node& node, Inputs in, std::vector<Tensor>& out) {
    const Tensor& x = input(in, 0, node);
    if (x.rank() != 4) throw GraphError("only 2-D pooling is supported");
    const auto kernel = node.attr_ints("kernel_shape");
    if (!kernel || kernel->size() != 2) throw GraphError("pooling needs a 2-D kernel_shape");
    const bool ceil_mode = node.attr_int("ceil_mode", 0) != 0;
    const bool include_pad = node.attr_int("count_include_pad", 0) != 0;
    const int64_t batch = x.dim(0), channels = x.dim(1), h = x.dim(2), w = x.dim(3);
    const Window2d win = window(node, h, w, (*kernel)[0], (*kernel)[1], ceil_mode);
    Tensor y = Tensor::zeros(DataType::Float, {batch, channels, win.oh, win.ow});
    const float* px = x.float_data().data();
    float* py = y.float_data().data();
    for (int64_t plane = 0; plane < batch * channels; ++plane) {
        const float* src = px + plane * h * w;
        float* dst = py + plane * win.oh * win.ow;
        for (int64_t oy = 0; oy < win.oh; ++oy) {
            for (int64_t ox = 0; ox < win.ow; ++ox) {
                float acc = IsMax ? -std::numeric_limits<float>::infinity() : 0.0f;
                int64_t count = 0;
                int64_t padded_count = 0;
                for (int64_t i = 0; i < win.kh; ++i) {
                    const int64_t iy = oy * win.sh - win.pt + i * win.dh;
                    for (int64_t j = 0; j < win.kw; ++j) {
                        const int64_t ix = ox * win.sw - win.pl + j * win.dw;
                        const bool inside_padded = iy < h + win.pb && ix < w + win.pr;
                        if (inside_padded) ++padded_count;
                        if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                        const float v = src[iy * w + ix];
                        if constexpr (IsMax) acc = std::max(acc, v);
                        else acc += v;
                        ++count;
                    }
                }
                if constexpr (!IsMax) acc /= static_cast<float>(include_pad ? padded_count : std::max<int64_t>(count, 1));
                dst[oy * win.ow + ox] = acc;
            }
        }
    }
    out[0] = std::move(y);
}

void op_global_average_pool(const Node& node, Inputs in, std::vector<Tensor>& out) {
    const Tensor& x = input(in, 0, node);
    if (x.rank() < 3) throw GraphError("GlobalAveragePool expects rank >= 3");
    const int64_t planes = x.dim(0) * x.dim(1);
    const int64_t area = x.size() / std::max<int64_t>(planes, 1);
    Shape shape(static_cast<size_t>(x.rank()), 1);
    shape[0] = x.dim(0);
    shape[1] = x.dim(1);
    Tensor y = Tensor::zeros(DataType::Float, shape);
    auto px = x.float_data();
    auto py = y.float_data();
    for (int64_t p = 0; p < planes; ++p) {
        double acc = 0.0;
        for (int64_t i = 0; i < area; ++i) acc += px[static_cast<size_t>(p * area + i)];
        py[static_cast<size_t>(p)] = static_cast<float>(acc / static_cast<double>(area));
    }
    out[0] = std::move(y);
}

void op_batch_norm(const Node& node, Inputs in, std::vector<Tensor>& out) {
    const Tensor& x = input(in, 0, node);
    auto scale = input(in, 1, node).float_data();
    auto bias = input(in, 2, node).float_data();
    auto mean = input(in, 3, node).float_data();
    auto var = input(in, 4, node).float_data();
    const float eps = node.attr_float("epsilon", 1e-5f);
    const AxisSplit s = split_at_axis(x.shape(), 1);
    Tensor y = x;
    auto py = y.float_data();
    for (int64_t o = 0; o < s.outer; ++o) {
        for (int64_t c = 0; c < s.extent; ++c) {
            const auto cu = static_cast<size_t>(c);
            const float k = scale[cu] / std::sqrt(var[cu] + eps);
            float* p = py.data() + (o * s.extent + c) * s.inner;
            for (int64_t i = 0; i < s.inner; ++i) p[i] = (p[i] - mean[cu]) * k + bias[cu];
        }
    }
    out[0] = std::move(y);
}

template <bool Log>
void op_softmax(const Node& node, Inputs in, std::vector<Tensor>& out) {
    const Tensor& x = input(in, 0, node);
    Tensor y = x;
    auto py = y.float_data();
    int64_t axis = node.attr_int("axis", node.opset >= 13 ? -1 : 1);
    axis = normalize_axis(axis, x.rank());
    AxisSplit s;
    if (node.opset >= 13) {
        s = split_at_axis(x.shape(), axis);
    } else {
        // Older opsets coerce to 2-D at `axis` and normalize the trailing block.
        for (int64_t d = 0; d < x.rank(); ++d) (d < axis ? s.outer : s.extent) *= x.dim(d);
        s.inner = 1;
    }
    for (int64_t o = 0; o < s.outer; ++o) {
        for (int64_t i = 0; i < s.inner; ++i) {
            float* base = py.data() + o * s.extent * s.inner + i;
            float mx = -std::numeric_limits<float>::infinity();
            for (int64_t k = 0; k < s.extent; ++k) mx = std::max(mx, base[k * s.inner]);
            double sum = 0.0;
            for (int64_t k = 0; k < s.extent; ++k) sum += std::exp(static_cast<double>(base[k * s.inner] - mx));
            for (int64_t k = 0; k < s.extent; ++k) {
                const float z = base[k * s.inner] - mx;
                base[k * s.inner] = Log ? static_cast<float>(z - std::log(sum))
                                        : static_cast<float>(std::exp(static_cast<double>(z)) / sum);
            }
        }
    }
    out[0] = std::move(y);
}

void op_layer_norm(const Node& node, Inputs in, std::vector<Tensor>& out) {
    const Tensor& x = input(in, 0, node);
    const Tensor& scale = input(in, 1, node);
    const Tensor* bias = optional_input(in, 2);
    const int64_t axis = normalize_axis(node.attr_int("axis", -1), x.rank());
    const float eps = node.attr_float("epsilon", 1e-5f);
    int64_t rows = 1;
    for (int64_t d = 0; d < axis; ++d) rows *= x.dim(d);
    const int64_t cols = x.size() / std::max<int64_t>(rows, 1);
    if (scale.size() != cols || (bias != nullptr && bias->size() != cols)) {
        throw GraphError("LayerNormalization scale/bias do not match normalized shape");
    }
    Tensor y = x;
    auto py = y.float_data();
    auto ps = scale.float_data();
    Shape stat_shape = x.shape();
    for (int64_t d = axis; d < x.rank(); ++d) stat_shape[static_cast<size_t>(d)] = 1;
    Tensor mean_t = Tensor::zeros(DataType::Float, stat_shape);
    Tensor inv_t = Tensor::zeros(DataType::Float, stat_shape);
    for (int64_t r = 0; r < rows; ++r) {
        float* row = py.data() + r * cols;
        double mean = 0.0;
        for (int64_t c = 0; c < cols; ++c) mean += row[c];
        mean /= static_cast<double>(cols);
        double var = 0.0;
        for (int64_t c = 0; c < cols; ++c) var += (row[c] - mean) * (row[c] - mean);
        var /= static_cast<double>(cols);
        const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
        for (int64_t c = 0; c < cols; ++c) {
            const auto cu = static_cast<size_t>(c);
            float v = static_cast<float>((row[c] - mean) * inv) * ps[cu];
            if (bias != nullptr) v += bias->float_data()[cu];
            row[c] = v;
        }
        mean_t.float_data()[static_cast<size_t>(r)] = static_cast<float>(mean);
        inv_t.float_data()[static_cast<size_t>(r)] = static_cast<float>(inv);
    }
    out[0] = std::move(y);
    if (out.size() > 1) out[1] = std::move(mean_t);
    if (out.size() > 2) out[2] = std::move(inv_t);
}

}  // namespace

void register_nn_ops(Registry& r) {
    r["MatMul"] = op_matmul;
    r["Gemm"] = op_gemm;
    r["Conv"] = op_conv;
    r["MaxPool"] = op_pool<true>;
    r["AveragePool"] = op_pool<false>;
    r["GlobalAveragePool"] = op_global_average_pool;
    r["BatchNormalization"] = op_batch_norm;
    r["Softmax"] = op_softmax<false>;
    r["LogSoftmax"] = op_softmax<true>;
    r["LayerNormalization"] = op_layer_norm;
}

}  // namespace zsmad::graph::detail
