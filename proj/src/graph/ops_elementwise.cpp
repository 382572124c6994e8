#include <cmath>

#include "node.hpp"
#include "op_util.hpp"
#include "proto_convert.hpp"

namespace zsmad::graph::detail {

namespace {

template <class FloatFn>
OpFn unary_float(FloatFn fn) {
    return [fn](const Node& node, Inputs in, std::vector<Tensor>& out) {
        const Tensor& x = input(in, 0, node);
        Tensor y = x;
        for (float& v : y.float_data()) v = fn(v);
        out[0] = std::move(y);
    };
}

template <class FloatFn, class IntFn>
OpFn unary_numeric(FloatFn ffn, IntFn ifn) {
    return [ffn, ifn](const Node& node, Inputs in, std::vector<Tensor>& out) {
        Tensor y = input(in, 0, node);
        if (is_floating(y.dtype())) {
            for (float& v : y.float_data()) v = ffn(v);
        } else {
            for (int64_t& v : y.int_data()) v = ifn(v);
        }
        out[0] = std::move(y);
    };
}

void require_same_kind(const Tensor& a, const Tensor& b) {
    if (is_floating(a.dtype()) != is_floating(b.dtype())) {
        throw GraphError("operand types differ: " + to_string(a.dtype()) + " vs " + to_string(b.dtype()));
    }
}

template <class FloatFn, class IntFn>
Tensor binary_arith(const Tensor& a, const Tensor& b, FloatFn ffn, IntFn ifn) {
    require_same_kind(a, b);
    const Shape shape = broadcast_shapes(a.shape(), b.shape());
    Tensor y = Tensor::zeros(a.dtype(), shape);
    if (is_floating(a.dtype())) {
        auto pa = a.float_data();
        auto pb = b.float_data();
        auto py = y.float_data();
        if (a.shape() == b.shape()) {
            for (size_t i = 0; i < py.size(); ++i) py[i] = ffn(pa[i], pb[i]);
        } else if (b.size() == 1) {
            const float s = pb[0];
            for (size_t i = 0; i < py.size(); ++i) py[i] = ffn(pa[i], s);
        } else {
            broadcast_for_each<2>(shape, {&a.shape(), &b.shape()}, [&](int64_t i, const std::array<int64_t, 2>& o) {
                py[static_cast<size_t>(i)] = ffn(pa[static_cast<size_t>(o[0])], pb[static_cast<size_t>(o[1])]);
            });
        }
    } else {
        auto pa = a.int_data();
        auto pb = b.int_data();
        auto py = y.int_data();
        broadcast_for_each<2>(shape, {&a.shape(), &b.shape()}, [&](int64_t i, const std::array<int64_t, 2>& o) {
            py[static_cast<size_t>(i)] = ifn(pa[static_cast<size_t>(o[0])], pb[static_cast<size_t>(o[1])]);
        });
    }
    return y;
}

template <class FloatFn, class IntFn>
OpFn binary(FloatFn ffn, IntFn ifn) {
    return [ffn, ifn](const Node& node, Inputs in, std::vector<Tensor>& out) {
        out[0] = binary_arith(input(in, 0, node), input(in, 1, node), ffn, ifn);
    };
}

template <class Cmp>
OpFn compare(Cmp cmp) {
    return [cmp](const Node& node, Inputs in, std::vector<Tensor>& out) {
        const Tensor& a = input(in, 0, node);
        const Tensor& b = input(in, 1, node);
        require_same_kind(a, b);
        const Shape shape = broadcast_shapes(a.shape(), b.shape());
        Tensor y = Tensor::zeros(DataType::Bool, shape);
        auto py = y.int_data();
        broadcast_for_each<2>(shape, {&a.shape(), &b.shape()}, [&](int64_t i, const std::array<int64_t, 2>& o) {
            py[static_cast<size_t>(i)] = cmp(a.at(o[0]), b.at(o[1])) ? 1 : 0;
        });
        out[0] = std::move(y);
    };
}

template <class Fold>
OpFn variadic(Fold fold) {
    return [fold](const Node& node, Inputs in, std::vector<Tensor>& out) {
        Tensor acc = input(in, 0, node);
        for (size_t k = 1; k < in.size(); ++k) {
            acc = binary_arith(acc, input(in, k, node), fold, [&](int64_t x, int64_t y) {
                return static_cast<int64_t>(fold(static_cast<float>(x), static_cast<float>(y)));
            });
        }
        out[0] = std::move(acc);
    };
}

Tensor cast_to(const Tensor& x, DataType to) {
    if (x.dtype() == to) return x;
    Tensor y = Tensor::zeros(to, x.shape());
    const auto n = static_cast<size_t>(x.size());
    if (is_floating(to)) {
        auto py = y.float_data();
        for (size_t i = 0; i < n; ++i) py[i] = static_cast<float>(x.at(static_cast<int64_t>(i)));
        return y;
    }
    auto py = y.int_data();
    for (size_t i = 0; i < n; ++i) {
        const double v = x.at(static_cast<int64_t>(i));
        switch (to) {
            case DataType::Bool: py[i] = v != 0.0 ? 1 : 0; break;
            case DataType::Int32: py[i] = static_cast<int32_t>(static_cast<int64_t>(v)); break;
            case DataType::Int8: py[i] = static_cast<int8_t>(static_cast<int64_t>(v)); break;
            case DataType::UInt8: py[i] = static_cast<uint8_t>(static_cast<int64_t>(v)); break;
            default:
                py[i] = is_floating(x.dtype()) ? static_cast<int64_t>(v) : x.int_data()[i];
                break;
        }
    }
    return y;
}

float erf_gelu(float x) { return 0.5f * x * (1.0f + std::erf(x * 0.70710678118654752f)); }

float tanh_gelu(float x) {
    const float c = 0.7978845608028654f;
    return 0.5f * x * (1.0f + std::tanh(c * (x + 0.044715f * x * x * x)));
}

}  // namespace

void register_elementwise_ops(Registry& r) {
    r["Identity"] = [](const Node& node, Inputs in, std::vector<Tensor>& out) { out[0] = input(in, 0, node); };
    r["Dropout"] = [](const Node& node, Inputs in, std::vector<Tensor>& out) {
        out[0] = input(in, 0, node);
        if (out.size() > 1) out[1] = Tensor::ints(DataType::Bool, out[0].shape(), std::vector<int64_t>(static_cast<size_t>(out[0].size()), 1));
    };

    r["Relu"] = unary_numeric([](float v) { return v > 0.0f ? v : 0.0f; }, [](int64_t v) { return v > 0 ? v : int64_t{0}; });
    r["Neg"] = unary_numeric([](float v) { return -v; }, [](int64_t v) { return -v; });
    r["Abs"] = unary_numeric([](float v) { return std::fabs(v); }, [](int64_t v) { return v < 0 ? -v : v; });
    r["Sigmoid"] = unary_float([](float v) { return 1.0f / (1.0f + std::exp(-v)); });
    r["Tanh"] = unary_float([](float v) { return std::tanh(v); });
    r["Erf"] = unary_float([](float v) { return std::erf(v); });
    r["Sqrt"] = unary_float([](float v) { return std::sqrt(v); });
    r["Exp"] = unary_float([](float v) { return std::exp(v); });
    r["Log"] = unary_float([](float v) { return std::log(v); });
    r["Reciprocal"] = unary_float([](float v) { return 1.0f / v; });
    r["Floor"] = unary_float([](float v) { return std::floor(v); });
    r["Ceil"] = unary_float([](float v) { return std::ceil(v); });
    r["Softplus"] = unary_float([](float v) { return std::log1p(std::exp(v)); });
    r["Not"] = [](const Node& node, Inputs in, std::vector<Tensor>& out) {
        Tensor y = input(in, 0, node);
        for (int64_t& v : y.int_data()) v = v ? 0 : 1;
        out[0] = std::move(y);
    };
    r["LeakyRelu"] = [](const Node& node, Inputs in, std::vector<Tensor>& out) {
        const float alpha = node.attr_float("alpha", 0.01f);
        Tensor y = input(in, 0, node);
        for (float& v : y.float_data()) v = v >= 0.0f ? v : alpha * v;
        out[0] = std::move(y);
    };
    r["Gelu"] = [](const Node& node, Inputs in, std::vector<Tensor>& out) {
        const bool tanh_approx = node.attr_string("approximate", "none") == "tanh";
        Tensor y = input(in, 0, node);
        for (float& v : y.float_data()) v = tanh_approx ? tanh_gelu(v) : erf_gelu(v);
        out[0] = std::move(y);
    };

    r["Add"] = binary([](float a, float b) { return a + b; }, [](int64_t a, int64_t b) { return a + b; });
    r["Sub"] = binary([](float a, float b) { return a - b; }, [](int64_t a, int64_t b) { return a - b; });
    r["Mul"] = binary([](float a, float b) { return a * b; }, [](int64_t a, int64_t b) { return a * b; });
    r["Div"] = binary([](float a, float b) { return a / b; }, [](int64_t a, int64_t b) {
        if (b == 0) throw GraphError("integer division by zero");
        return a / b;
    });
    r["Mod"] = [](const Node& node, Inputs in, std::vector<Tensor>& out) {
        const bool fmod = node.attr_int("fmod", 0) != 0;
        const Tensor& a = input(in, 0, node);
        if (is_floating(a.dtype()) && !fmod) throw GraphError("Mod on floating inputs requires fmod=1");
        out[0] = binary_arith(a, input(in, 1, node), [](float x, float y) { return std::fmod(x, y); },
                              [fmod](int64_t x, int64_t y) {
            if (y == 0) throw GraphError("integer modulo by zero");
            int64_t m = x % y;
            if (!fmod && m != 0 && ((m < 0) != (y < 0))) m += y;
            return m;
        });
    };
    r["Pow"] = [](const Node& node, Inputs in, std::vector<Tensor>& out) {
        const Tensor& base = input(in, 0, node);
        Tensor exponent = input(in, 1, node);
        if (is_floating(base.dtype()) && !is_floating(exponent.dtype())) exponent = cast_to(exponent, DataType::Float);
        out[0] = binary_arith(base, exponent, [](float a, float b) {
            return b == 2.0f ? a * a : static_cast<float>(std::pow(a, b));
        }, [](int64_t a, int64_t b) {
            return static_cast<int64_t>(std::pow(static_cast<double>(a), static_cast<double>(b)));
        });
    };

    r["Equal"] = compare([](double a, double b) { return a == b; });
    r["Less"] = compare([](double a, double b) { return a < b; });
    r["LessOrEqual"] = compare([](double a, double b) { return a <= b; });
    r["Greater"] = compare([](double a, double b) { return a > b; });
    r["GreaterOrEqual"] = compare([](double a, double b) { return a >= b; });
    r["And"] = compare([](double a, double b) { return a != 0.0 && b != 0.0; });
    r["Or"] = compare([](double a, double b) { return a != 0.0 || b != 0.0; });

    r["Max"] = variadic([](float a, float b) { return a > b ? a : b; });
    r["Min"] = variadic([](float a, float b) { return a < b ? a : b; });
    r["Sum"] = variadic([](float a, float b) { return a + b; });

    r["Where"] = [](const Node& node, Inputs in, std::vector<Tensor>& out) {
        const Tensor& c = input(in, 0, node);
        const Tensor& x = input(in, 1, node);
        const Tensor& y = input(in, 2, node);
        require_same_kind(x, y);
        const Shape shape = broadcast_shapes(broadcast_shapes(c.shape(), x.shape()), y.shape());
        Tensor z = Tensor::zeros(x.dtype(), shape);
        auto pc = c.int_data();
        if (is_floating(x.dtype())) {
            auto px = x.float_data();
            auto py = y.float_data();
            auto pz = z.float_data();
            broadcast_for_each<3>(shape, {&c.shape(), &x.shape(), &y.shape()}, [&](int64_t i, const std::array<int64_t, 3>& o) {
                pz[static_cast<size_t>(i)] = pc[static_cast<size_t>(o[0])] ? px[static_cast<size_t>(o[1])] : py[static_cast<size_t>(o[2])];
            });
        } else {
            auto px = x.int_data();
            auto py = y.int_data();
            auto pz = z.int_data();
            broadcast_for_each<3>(shape, {&c.shape(), &x.shape(), &y.shape()}, [&](int64_t i, const std::array<int64_t, 3>& o) {
                pz[static_cast<size_t>(i)] = pc[static_cast<size_t>(o[0])] ? px[static_cast<size_t>(o[1])] : py[static_cast<size_t>(o[2])];
            });
        }
        out[0] = std::move(z);
    };

    r["Clip"] = [](const Node& node, Inputs in, std::vector<Tensor>& out) {
        Tensor y = input(in, 0, node);
        float lo = node.attr_float("min", -std::numeric_limits<float>::infinity());
        float hi = node.attr_float("max", std::numeric_limits<float>::infinity());
        if (const Tensor* t = optional_input(in, 1)) lo = static_cast<float>(t->at(0));
        if (const Tensor* t = optional_input(in, 2)) hi = static_cast<float>(t->at(0));
        if (is_floating(y.dtype())) {
            for (float& v : y.float_data()) v = std::min(std::max(v, lo), hi);
        } else {
            for (int64_t& v : y.int_data()) v = std::min<int64_t>(std::max<int64_t>(v, static_cast<int64_t>(lo)), static_cast<int64_t>(hi));
        }
        out[0] = std::move(y);
    };

    r["Cast"] = [](const Node& node, Inputs in, std::vector<Tensor>& out) {
        out[0] = cast_to(input(in, 0, node), from_onnx_type(static_cast<int32_t>(node.attr_int("to", 1))));
    };
    r["CastLike"] = [](const Node& node, Inputs in, std::vector<Tensor>& out) {
        out[0] = cast_to(input(in, 0, node), input(in, 1, node).dtype());
    };
}

}  // namespace zsmad::graph::detail
