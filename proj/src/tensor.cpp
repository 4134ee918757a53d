#include "graphevo/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

namespace graphevo::ad {

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << 'x';
        out << shape[i];
    }
    out << ']';
    return out.str();
}

const char* op_name(OpKind kind) {
    switch (kind) {
        case OpKind::Leaf: return "leaf";
        case OpKind::Constant: return "constant";
        case OpKind::Detach: return "detach";
        case OpKind::MatMul: return "matmul";
        case OpKind::Transpose: return "transpose";
        case OpKind::Reshape: return "reshape";
        case OpKind::Add: return "add";
        case OpKind::Sub: return "sub";
        case OpKind::Mul: return "mul";
        case OpKind::Div: return "div";
        case OpKind::ScalarMul: return "scalar_mul";
        case OpKind::Abs: return "abs";
        case OpKind::Log: return "log";
        case OpKind::Exp: return "exp";
        case OpKind::Sqrt: return "sqrt";
        case OpKind::Sigmoid: return "sigmoid";
        case OpKind::Tanh: return "tanh";
        case OpKind::LeakyRelu: return "leaky_relu";
        case OpKind::Clamp: return "clamp";
        case OpKind::Mean: return "mean";
        case OpKind::Sum: return "sum";
        case OpKind::Concat: return "concat";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Variable
// ---------------------------------------------------------------------------

Variable::Variable(Shape shape, std::vector<double> value, bool requires_grad)
    : shape_(std::move(shape)), value_(std::move(value)), requires_grad_(requires_grad) {
    if (numel(shape_) != value_.size()) {
        throw DimensionError("Variable: shape " + shape_str(shape_) + " does not match value size " +
                             std::to_string(value_.size()));
    }
    grad_.assign(value_.size(), 0.0);
}

Variable Variable::zeros(Shape shape, bool requires_grad) {
    std::vector<double> v(numel(shape), 0.0);
    return Variable(std::move(shape), std::move(v), requires_grad);
}

Variable Variable::full(Shape shape, double fill, bool requires_grad) {
    std::vector<double> v(numel(shape), fill);
    return Variable(std::move(shape), std::move(v), requires_grad);
}

void Variable::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

// ---------------------------------------------------------------------------
// Tensor handle
// ---------------------------------------------------------------------------

const Shape& Tensor::shape() const { return tape_->shape_of(index_); }
const std::vector<double>& Tensor::value() const { return tape_->value_of(index_); }
const std::vector<double>& Tensor::grad() const { return tape_->grad_of(index_); }
bool Tensor::requires_grad() const { return tape_->requires_grad_of(index_); }
std::size_t Tensor::size() const { return tape_->value_of(index_).size(); }

double Tensor::scalar() const {
    const auto& v = value();
    if (v.size() != 1) {
        throw ContractError("Tensor::scalar: tensor has shape " + shape_str(shape()) + ", expected one element");
    }
    return v[0];
}

// ---------------------------------------------------------------------------
// Tape: node plumbing
// ---------------------------------------------------------------------------

Tensor Tape::push(Node node) {
    if (node.requires_grad) node.grad.assign(node.value.size(), 0.0);
    nodes_.push_back(std::move(node));
    return Tensor(this, nodes_.size() - 1);
}

Tape::Node& Tape::node(Tensor t) {
    check_same_tape(t);
    return nodes_[t.index()];
}

void Tape::check_same_tape(Tensor t) const {
    if (t.tape() != this) throw ContractError("tensor belongs to a different tape");
}

Tensor Tape::leaf(Variable& v) {
    if (freeze_leaves_) return frozen(v);
    Node n;
    n.kind = OpKind::Leaf;
    n.shape = v.shape();
    n.value = v.value();
    n.requires_grad = v.requires_grad();
    n.var = &v;
    return push(std::move(n));
}

Tensor Tape::frozen(const Variable& v) { return constant(v.shape(), v.value()); }

Tensor Tape::constant(Shape shape, std::vector<double> value) {
    if (numel(shape) != value.size()) {
        throw DimensionError("constant: shape " + shape_str(shape) + " does not match value size " +
                             std::to_string(value.size()));
    }
    Node n;
    n.kind = OpKind::Constant;
    n.shape = std::move(shape);
    n.value = std::move(value);
    return push(std::move(n));
}

Tensor Tape::scalar_constant(double value) { return constant({1}, {value}); }

Tensor Tape::detach(Tensor a) {
    check_same_tape(a);
    Node n;
    n.kind = OpKind::Detach;
    n.shape = a.shape();
    n.value = a.value();
    return push(std::move(n));
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

namespace {

// C (p x r) += or = A (p x q) * B (q x r), row-major.
void matmul_into(const double* a, const double* b, double* c, std::size_t p, std::size_t q, std::size_t r,
                 bool accumulate) {
    if (!accumulate) std::memset(c, 0, p * r * sizeof(double));
    for (std::size_t i = 0; i < p; ++i) {
        const double* arow = a + i * q;
        double* crow = c + i * r;
        for (std::size_t k = 0; k < q; ++k) {
            double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b + k * r;
            for (std::size_t j = 0; j < r; ++j) crow[j] += aik * brow[j];
        }
    }
}

void require_2d(const Shape& s, const char* what) {
    if (s.size() != 2) throw DimensionError(std::string(what) + ": expected a 2-D tensor, got " + shape_str(s));
}

} // namespace

Tensor Tape::matmul(Tensor a, Tensor b) {
    check_same_tape(a);
    check_same_tape(b);
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    require_2d(sa, "matmul");
    require_2d(sb, "matmul");
    if (sa[1] != sb[0]) {
        throw DimensionError("matmul: inner dimensions disagree, " + shape_str(sa) + " vs " + shape_str(sb));
    }
    Node n;
    n.kind = OpKind::MatMul;
    n.a = static_cast<int>(a.index());
    n.b = static_cast<int>(b.index());
    n.shape = {sa[0], sb[1]};
    n.value.assign(sa[0] * sb[1], 0.0);
    matmul_into(a.value().data(), b.value().data(), n.value.data(), sa[0], sa[1], sb[1], false);
    n.requires_grad = a.requires_grad() || b.requires_grad();
    return push(std::move(n));
}

Tensor Tape::transpose(Tensor a) {
    check_same_tape(a);
    const Shape& s = a.shape();
    require_2d(s, "transpose");
    Node n;
    n.kind = OpKind::Transpose;
    n.a = static_cast<int>(a.index());
    n.shape = {s[1], s[0]};
    n.value.resize(a.size());
    const auto& av = a.value();
    for (std::size_t i = 0; i < s[0]; ++i)
        for (std::size_t j = 0; j < s[1]; ++j) n.value[j * s[0] + i] = av[i * s[1] + j];
    n.requires_grad = a.requires_grad();
    return push(std::move(n));
}

Tensor Tape::reshape(Tensor a, Shape shape) {
    check_same_tape(a);
    if (numel(shape) != a.size()) {
        throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    }
    Node n;
    n.kind = OpKind::Reshape;
    n.a = static_cast<int>(a.index());
    n.shape = std::move(shape);
    n.value = a.value();
    n.requires_grad = a.requires_grad();
    return push(std::move(n));
}

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

namespace {

enum class BroadcastMode { Equal, ScalarLeft, ScalarRight };

BroadcastMode broadcast_mode(const Shape& a, const Shape& b, const char* what) {
    if (a == b) return BroadcastMode::Equal;
    if (numel(a) == 1) return BroadcastMode::ScalarLeft;
    if (numel(b) == 1) return BroadcastMode::ScalarRight;
    throw DimensionError(std::string(what) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b) +
                         " (only equal shapes or scalar-with-tensor are supported)");
}

} // namespace

Tensor Tape::add(Tensor a, Tensor b) {
    check_same_tape(a);
    check_same_tape(b);
    BroadcastMode mode = broadcast_mode(a.shape(), b.shape(), "add");
    Node n;
    n.kind = OpKind::Add;
    n.a = static_cast<int>(a.index());
    n.b = static_cast<int>(b.index());
    n.shape = mode == BroadcastMode::ScalarLeft ? b.shape() : a.shape();
    const auto& av = a.value();
    const auto& bv = b.value();
    n.value.resize(std::max(av.size(), bv.size()));
    for (std::size_t i = 0; i < n.value.size(); ++i)
        n.value[i] = av[av.size() == 1 ? 0 : i] + bv[bv.size() == 1 ? 0 : i];
    n.requires_grad = a.requires_grad() || b.requires_grad();
    return push(std::move(n));
}

Tensor Tape::sub(Tensor a, Tensor b) {
    check_same_tape(a);
    check_same_tape(b);
    broadcast_mode(a.shape(), b.shape(), "sub");
    Node n;
    n.kind = OpKind::Sub;
    n.a = static_cast<int>(a.index());
    n.b = static_cast<int>(b.index());
    n.shape = a.size() == 1 ? b.shape() : a.shape();
    const auto& av = a.value();
    const auto& bv = b.value();
    n.value.resize(std::max(av.size(), bv.size()));
    for (std::size_t i = 0; i < n.value.size(); ++i)
        n.value[i] = av[av.size() == 1 ? 0 : i] - bv[bv.size() == 1 ? 0 : i];
    n.requires_grad = a.requires_grad() || b.requires_grad();
    return push(std::move(n));
}

Tensor Tape::mul(Tensor a, Tensor b) {
    check_same_tape(a);
    check_same_tape(b);
    broadcast_mode(a.shape(), b.shape(), "mul");
    Node n;
    n.kind = OpKind::Mul;
    n.a = static_cast<int>(a.index());
    n.b = static_cast<int>(b.index());
    n.shape = a.size() == 1 ? b.shape() : a.shape();
    const auto& av = a.value();
    const auto& bv = b.value();
    n.value.resize(std::max(av.size(), bv.size()));
    for (std::size_t i = 0; i < n.value.size(); ++i)
        n.value[i] = av[av.size() == 1 ? 0 : i] * bv[bv.size() == 1 ? 0 : i];
    n.requires_grad = a.requires_grad() || b.requires_grad();
    return push(std::move(n));
}

Tensor Tape::div(Tensor a, Tensor b) {
    check_same_tape(a);
    check_same_tape(b);
    broadcast_mode(a.shape(), b.shape(), "div");
    for (double d : b.value()) {
        if (d == 0.0) throw DomainError("div: division by zero");
    }
    Node n;
    n.kind = OpKind::Div;
    n.a = static_cast<int>(a.index());
    n.b = static_cast<int>(b.index());
    n.shape = a.size() == 1 ? b.shape() : a.shape();
    const auto& av = a.value();
    const auto& bv = b.value();
    n.value.resize(std::max(av.size(), bv.size()));
    for (std::size_t i = 0; i < n.value.size(); ++i)
        n.value[i] = av[av.size() == 1 ? 0 : i] / bv[bv.size() == 1 ? 0 : i];
    n.requires_grad = a.requires_grad() || b.requires_grad();
    return push(std::move(n));
}

Tensor Tape::unary(OpKind kind, Tensor a, const std::function<double(double)>& f, double p0, double p1) {
    check_same_tape(a);
    Node n;
    n.kind = kind;
    n.a = static_cast<int>(a.index());
    n.shape = a.shape();
    n.p0 = p0;
    n.p1 = p1;
    const auto& av = a.value();
    n.value.resize(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) n.value[i] = f(av[i]);
    n.requires_grad = a.requires_grad();
    return push(std::move(n));
}

Tensor Tape::scalar_mul(Tensor a, double factor) {
    return unary(OpKind::ScalarMul, a, [factor](double x) { return factor * x; }, factor);
}

Tensor Tape::abs(Tensor a) {
    return unary(OpKind::Abs, a, [](double x) { return std::fabs(x); });
}

Tensor Tape::log(Tensor a) {
    for (double x : a.value()) {
        if (!(x > 0.0)) throw DomainError("log: input must be strictly positive, got " + std::to_string(x));
    }
    return unary(OpKind::Log, a, [](double x) { return std::log(x); });
}

Tensor Tape::exp(Tensor a) {
    return unary(OpKind::Exp, a, [](double x) { return std::exp(x); });
}

Tensor Tape::sqrt(Tensor a) {
    for (double x : a.value()) {
        if (x < 0.0) throw DomainError("sqrt: input must be non-negative, got " + std::to_string(x));
    }
    return unary(OpKind::Sqrt, a, [](double x) { return std::sqrt(x); });
}

Tensor Tape::sigmoid(Tensor a) {
    return unary(OpKind::Sigmoid, a, [](double x) {
        // numerically stable in both tails
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        double e = std::exp(x);
        return e / (1.0 + e);
    });
}

Tensor Tape::tanh(Tensor a) {
    return unary(OpKind::Tanh, a, [](double x) { return std::tanh(x); });
}

Tensor Tape::leaky_relu(Tensor a, double slope) {
    return unary(OpKind::LeakyRelu, a, [slope](double x) { return x >= 0.0 ? x : slope * x; }, slope);
}

Tensor Tape::clamp(Tensor a, double lo, double hi) {
    if (!(lo <= hi)) throw ContractError("clamp: lo must not exceed hi");
    return unary(OpKind::Clamp, a, [lo, hi](double x) { return std::min(std::max(x, lo), hi); }, lo, hi);
}

Tensor Tape::clamp_min(Tensor a, double lo) {
    return unary(OpKind::Clamp, a, [lo](double x) { return std::max(x, lo); }, lo,
                 std::numeric_limits<double>::infinity());
}

// ---------------------------------------------------------------------------
// Reductions and structure
// ---------------------------------------------------------------------------

Tensor Tape::mean(Tensor a) {
    check_same_tape(a);
    Node n;
    n.kind = OpKind::Mean;
    n.a = static_cast<int>(a.index());
    n.shape = {1};
    double acc = 0.0;
    for (double x : a.value()) acc += x;
    n.value = {acc / static_cast<double>(a.size())};
    n.requires_grad = a.requires_grad();
    return push(std::move(n));
}

Tensor Tape::sum(Tensor a) {
    check_same_tape(a);
    Node n;
    n.kind = OpKind::Sum;
    n.a = static_cast<int>(a.index());
    n.shape = {1};
    double acc = 0.0;
    for (double x : a.value()) acc += x;
    n.value = {acc};
    n.requires_grad = a.requires_grad();
    return push(std::move(n));
}

Tensor Tape::concat(Tensor a, Tensor b, int axis) {
    check_same_tape(a);
    check_same_tape(b);
    Shape sa = a.shape();
    Shape sb = b.shape();
    if (sa.size() != sb.size() || sa.size() < 1 || sa.size() > 2) {
        throw DimensionError("concat: expected two 1-D or two 2-D tensors, got " + shape_str(sa) + " and " +
                             shape_str(sb));
    }
    if (axis < 0 || axis >= static_cast<int>(sa.size())) {
        throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for " + shape_str(sa));
    }
    for (std::size_t d = 0; d < sa.size(); ++d) {
        if (static_cast<int>(d) != axis && sa[d] != sb[d]) {
            throw DimensionError("concat: shapes " + shape_str(sa) + " and " + shape_str(sb) +
                                 " differ off the concat axis");
        }
    }
    Node n;
    n.kind = OpKind::Concat;
    n.a = static_cast<int>(a.index());
    n.b = static_cast<int>(b.index());
    n.axis = axis;
    n.shape = sa;
    n.shape[axis] = sa[axis] + sb[axis];
    n.value.resize(numel(n.shape));
    const auto& av = a.value();
    const auto& bv = b.value();
    if (sa.size() == 1 || axis == 0) {
        std::copy(av.begin(), av.end(), n.value.begin());
        std::copy(bv.begin(), bv.end(), n.value.begin() + av.size());
    } else {
        std::size_t rows = sa[0], ca = sa[1], cb = sb[1];
        for (std::size_t i = 0; i < rows; ++i) {
            std::copy(av.begin() + i * ca, av.begin() + (i + 1) * ca, n.value.begin() + i * (ca + cb));
            std::copy(bv.begin() + i * cb, bv.begin() + (i + 1) * cb, n.value.begin() + i * (ca + cb) + ca);
        }
    }
    n.requires_grad = a.requires_grad() || b.requires_grad();
    return push(std::move(n));
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

namespace {

// dst (possibly scalar) += src, reducing when dst is the broadcast scalar side.
void accumulate(std::vector<double>& dst, const std::vector<double>& src) {
    if (dst.size() == src.size()) {
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
    } else { // dst.size() == 1
        for (double v : src) dst[0] += v;
    }
}

} // namespace

void Tape::zero_adjoints() {
    for (Node& n : nodes_) std::fill(n.grad.begin(), n.grad.end(), 0.0);
}

void Tape::backward(Tensor root) {
    check_same_tape(root);
    Node& r = nodes_[root.index()];
    if (r.value.size() != 1) {
        throw ContractError("backward: root must be scalar, got shape " + shape_str(r.shape));
    }
    if (!r.requires_grad) {
        throw ContractError("backward: root does not require grad");
    }
    r.grad[0] += 1.0;
    for (std::size_t i = root.index() + 1; i-- > 0;) {
        if (!nodes_[i].requires_grad) continue;
        backward_node(i);
    }
}

void Tape::backward_node(std::size_t i) {
    Node& n = nodes_[i];
    const std::vector<double>& g = n.grad;
    auto in = [this](int id) -> Node& { return nodes_[static_cast<std::size_t>(id)]; };
    auto grad_a = [&]() -> std::vector<double>* {
        Node& a = in(n.a);
        return a.requires_grad ? &a.grad : nullptr;
    };
    auto grad_b = [&]() -> std::vector<double>* {
        Node& b = in(n.b);
        return b.requires_grad ? &b.grad : nullptr;
    };

    switch (n.kind) {
        case OpKind::Leaf:
            if (n.var && n.var->requires_grad()) {
                auto& vg = n.var->grad();
                for (std::size_t k = 0; k < g.size(); ++k) vg[k] += g[k];
            }
            return;
        case OpKind::Constant:
        case OpKind::Detach:
            return;
        case OpKind::MatMul: {
            Node& a = in(n.a);
            Node& b = in(n.b);
            std::size_t p = a.shape[0], q = a.shape[1], r = b.shape[1];
            if (a.requires_grad) {
                // dA += dC * B^T
                for (std::size_t ii = 0; ii < p; ++ii)
                    for (std::size_t kk = 0; kk < q; ++kk) {
                        double acc = 0.0;
                        const double* grow = g.data() + ii * r;
                        const double* brow = b.value.data() + kk * r;
                        for (std::size_t jj = 0; jj < r; ++jj) acc += grow[jj] * brow[jj];
                        a.grad[ii * q + kk] += acc;
                    }
            }
            if (b.requires_grad) {
                // dB += A^T * dC
                for (std::size_t kk = 0; kk < q; ++kk) {
                    double* brow = b.grad.data() + kk * r;
                    for (std::size_t ii = 0; ii < p; ++ii) {
                        double aik = a.value[ii * q + kk];
                        if (aik == 0.0) continue;
                        const double* grow = g.data() + ii * r;
                        for (std::size_t jj = 0; jj < r; ++jj) brow[jj] += aik * grow[jj];
                    }
                }
            }
            return;
        }
        case OpKind::Transpose: {
            if (auto* ga = grad_a()) {
                std::size_t rows = n.shape[0], cols = n.shape[1];
                for (std::size_t ii = 0; ii < rows; ++ii)
                    for (std::size_t jj = 0; jj < cols; ++jj) (*ga)[jj * rows + ii] += g[ii * cols + jj];
            }
            return;
        }
        case OpKind::Reshape: {
            if (auto* ga = grad_a()) {
                for (std::size_t k = 0; k < g.size(); ++k) (*ga)[k] += g[k];
            }
            return;
        }
        case OpKind::Add: {
            if (auto* ga = grad_a()) accumulate(*ga, g);
            if (auto* gb = grad_b()) accumulate(*gb, g);
            return;
        }
        case OpKind::Sub: {
            if (auto* ga = grad_a()) accumulate(*ga, g);
            if (auto* gb = grad_b()) {
                if (gb->size() == g.size()) {
                    for (std::size_t k = 0; k < g.size(); ++k) (*gb)[k] -= g[k];
                } else {
                    for (double v : g) (*gb)[0] -= v;
                }
            }
            return;
        }
        case OpKind::Mul: {
            Node& a = in(n.a);
            Node& b = in(n.b);
            if (a.requires_grad) {
                for (std::size_t k = 0; k < g.size(); ++k) {
                    double contrib = g[k] * b.value[b.value.size() == 1 ? 0 : k];
                    a.grad[a.grad.size() == 1 ? 0 : k] += contrib;
                }
            }
            if (b.requires_grad) {
                for (std::size_t k = 0; k < g.size(); ++k) {
                    double contrib = g[k] * a.value[a.value.size() == 1 ? 0 : k];
                    b.grad[b.grad.size() == 1 ? 0 : k] += contrib;
                }
            }
            return;
        }
        case OpKind::Div: {
            Node& a = in(n.a);
            Node& b = in(n.b);
            if (a.requires_grad) {
                for (std::size_t k = 0; k < g.size(); ++k) {
                    double bk = b.value[b.value.size() == 1 ? 0 : k];
                    a.grad[a.grad.size() == 1 ? 0 : k] += g[k] / bk;
                }
            }
            if (b.requires_grad) {
                for (std::size_t k = 0; k < g.size(); ++k) {
                    double bk = b.value[b.value.size() == 1 ? 0 : k];
                    b.grad[b.grad.size() == 1 ? 0 : k] -= g[k] * n.value[k] / bk;
                }
            }
            return;
        }
        case OpKind::ScalarMul: {
            if (auto* ga = grad_a()) {
                for (std::size_t k = 0; k < g.size(); ++k) (*ga)[k] += n.p0 * g[k];
            }
            return;
        }
        case OpKind::Abs: {
            if (auto* ga = grad_a()) {
                const auto& av = in(n.a).value;
                // derivative at exactly 0 defined as 0
                for (std::size_t k = 0; k < g.size(); ++k)
                    (*ga)[k] += g[k] * (av[k] > 0.0 ? 1.0 : (av[k] < 0.0 ? -1.0 : 0.0));
            }
            return;
        }
        case OpKind::Log: {
            if (auto* ga = grad_a()) {
                const auto& av = in(n.a).value;
                for (std::size_t k = 0; k < g.size(); ++k) (*ga)[k] += g[k] / av[k];
            }
            return;
        }
        case OpKind::Exp: {
            if (auto* ga = grad_a()) {
                for (std::size_t k = 0; k < g.size(); ++k) (*ga)[k] += g[k] * n.value[k];
            }
            return;
        }
        case OpKind::Sqrt: {
            if (auto* ga = grad_a()) {
                for (std::size_t k = 0; k < g.size(); ++k) {
                    if (n.value[k] > 0.0) (*ga)[k] += g[k] * 0.5 / n.value[k];
                }
            }
            return;
        }
        case OpKind::Sigmoid: {
            if (auto* ga = grad_a()) {
                for (std::size_t k = 0; k < g.size(); ++k) (*ga)[k] += g[k] * n.value[k] * (1.0 - n.value[k]);
            }
            return;
        }
        case OpKind::Tanh: {
            if (auto* ga = grad_a()) {
                for (std::size_t k = 0; k < g.size(); ++k) (*ga)[k] += g[k] * (1.0 - n.value[k] * n.value[k]);
            }
            return;
        }
        case OpKind::LeakyRelu: {
            if (auto* ga = grad_a()) {
                const auto& av = in(n.a).value;
                for (std::size_t k = 0; k < g.size(); ++k) (*ga)[k] += g[k] * (av[k] >= 0.0 ? 1.0 : n.p0);
            }
            return;
        }
        case OpKind::Clamp: {
            if (auto* ga = grad_a()) {
                const auto& av = in(n.a).value;
                for (std::size_t k = 0; k < g.size(); ++k) {
                    if (av[k] > n.p0 && av[k] < n.p1) (*ga)[k] += g[k];
                }
            }
            return;
        }
        case OpKind::Mean: {
            if (auto* ga = grad_a()) {
                double scale = g[0] / static_cast<double>(ga->size());
                for (double& v : *ga) v += scale;
            }
            return;
        }
        case OpKind::Sum: {
            if (auto* ga = grad_a()) {
                for (double& v : *ga) v += g[0];
            }
            return;
        }
        case OpKind::Concat: {
            Node& a = in(n.a);
            Node& b = in(n.b);
            if (n.shape.size() == 1 || n.axis == 0) {
                if (a.requires_grad)
                    for (std::size_t k = 0; k < a.value.size(); ++k) a.grad[k] += g[k];
                if (b.requires_grad)
                    for (std::size_t k = 0; k < b.value.size(); ++k) b.grad[k] += g[a.value.size() + k];
            } else {
                std::size_t rows = n.shape[0], ca = a.shape[1], cb = b.shape[1];
                for (std::size_t ii = 0; ii < rows; ++ii) {
                    if (a.requires_grad)
                        for (std::size_t jj = 0; jj < ca; ++jj) a.grad[ii * ca + jj] += g[ii * (ca + cb) + jj];
                    if (b.requires_grad)
                        for (std::size_t jj = 0; jj < cb; ++jj) b.grad[ii * cb + jj] += g[ii * (ca + cb) + ca + jj];
                }
            }
            return;
        }
    }
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

GradCheckReport grad_check(const std::function<Tensor(Tape&)>& build, const std::vector<NamedVariable>& params,
                           double h, double tol) {
    if (!(h > 0.0)) throw ContractError("grad_check: step h must be positive");

    auto eval = [&build]() {
        Tape tape;
        Tensor out = build(tape);
        if (out.size() != 1) throw ContractError("grad_check: function must be scalar-valued");
        return out.value()[0];
    };

    // the check is meaningless on a stochastic function
    double v0 = eval();
    double v1 = eval();
    if (std::memcmp(&v0, &v1, sizeof(double)) != 0) {
        throw ContractError("grad_check: function is not deterministic (two evaluations differ)");
    }

    for (const auto& p : params) p.var->zero_grad();
    {
        Tape tape;
        Tensor out = build(tape);
        tape.backward(out);
    }
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const auto& p : params) analytic.push_back(p.var->grad());

    GradCheckReport report;
    report.tol = tol;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Variable& var = *params[pi].var;
        GradCheckEntry entry;
        entry.name = params[pi].name;
        for (std::size_t k = 0; k < var.size(); ++k) {
            double saved = var.value()[k];
            var.value()[k] = saved + h;
            double fp = eval();
            var.value()[k] = saved - h;
            double fm = eval();
            var.value()[k] = saved;
            double numeric = (fp - fm) / (2.0 * h);
            double an = analytic[pi][k];
            double denom = std::max({std::fabs(an), std::fabs(numeric), 1.0});
            entry.max_rel_err = std::max(entry.max_rel_err, std::fabs(an - numeric) / denom);
        }
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.params.push_back(std::move(entry));
    }
    report.pass = report.max_rel_err < tol;
    return report;
}

} // namespace graphevo::ad
