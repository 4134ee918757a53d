#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "graphevo/errors.hpp"

namespace graphevo::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// A differentiable leaf whose value and gradient outlive any single tape:
/// network parameters, or any tensor checked by grad_check. Gradients
/// accumulate into `grad` across backward calls until zero_grad().
class Variable {
public:
    Variable() = default;
    Variable(Shape shape, std::vector<double> value, bool requires_grad = true);
    static Variable zeros(Shape shape, bool requires_grad = true);
    static Variable full(Shape shape, double fill, bool requires_grad = true);

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return value_.size(); }
    std::vector<double>& value() { return value_; }
    const std::vector<double>& value() const { return value_; }
    std::vector<double>& grad() { return grad_; }
    const std::vector<double>& grad() const { return grad_; }
    bool requires_grad() const { return requires_grad_; }

    void zero_grad();

private:
    Shape shape_;
    std::vector<double> value_;
    std::vector<double> grad_;
    bool requires_grad_ = false;
};

enum class OpKind : std::uint8_t {
    Leaf,      // reads a Variable; backward accumulates into Variable::grad
    Constant,  // no gradient
    Detach,    // value copy, gradient stops here
    MatMul,
    Transpose,
    Reshape,
    Add,
    Sub,
    Mul,
    Div,
    ScalarMul, // multiply by a compile-time-known constant
    Abs,
    Log,
    Exp,
    Sqrt,
    Sigmoid,
    Tanh,
    LeakyRelu,
    Clamp,
    Mean,
    Sum,
    Concat,
};

const char* op_name(OpKind kind);

class Tape;

/// Lightweight handle to a node on a Tape. Copyable; valid as long as the
/// tape is alive and not cleared.
class Tensor {
public:
    Tensor() = default;

    const Shape& shape() const;
    const std::vector<double>& value() const;
    /// Gradient of the last backward root w.r.t. this node (zeros before backward).
    const std::vector<double>& grad() const;
    bool requires_grad() const;
    std::size_t size() const;
    /// Value of a tensor with exactly one element.
    double scalar() const;

    Tape* tape() const { return tape_; }
    std::size_t index() const { return index_; }

private:
    friend class Tape;
    Tensor(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

    Tape* tape_ = nullptr;
    std::size_t index_ = 0;
};

/// Append-only record of forward operations, rebuilt every forward pass.
/// Node order is a topological order by construction (inputs are recorded
/// before their consumers), so backward is a single reverse sweep that
/// visits each node exactly once. Single-threaded; independent tapes may
/// live on independent threads.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    // -- leaves ------------------------------------------------------------
    Tensor leaf(Variable& v);
    /// Records the variable's current value without gradient tracking.
    Tensor frozen(const Variable& v);
    /// While set, leaf() behaves like frozen(): parameters recorded under a
    /// freeze are snapshots and receive no gradient. Scoped via FreezeLeaves.
    void set_freeze_leaves(bool freeze) { freeze_leaves_ = freeze; }
    bool freeze_leaves() const { return freeze_leaves_; }
    Tensor constant(Shape shape, std::vector<double> value);
    Tensor scalar_constant(double value);
    Tensor detach(Tensor a);

    // -- linear algebra ----------------------------------------------------
    Tensor matmul(Tensor a, Tensor b);
    Tensor transpose(Tensor a);
    Tensor reshape(Tensor a, Shape shape);

    // -- elementwise -------------------------------------------------------
    // Binary ops accept equal shapes, or a single-element tensor on either
    // side (scalar broadcast). No other broadcasting.
    Tensor add(Tensor a, Tensor b);
    Tensor sub(Tensor a, Tensor b);
    Tensor mul(Tensor a, Tensor b);
    Tensor div(Tensor a, Tensor b);
    Tensor scalar_mul(Tensor a, double factor);
    Tensor abs(Tensor a);
    Tensor log(Tensor a); // requires strictly positive input
    Tensor exp(Tensor a);
    Tensor sqrt(Tensor a); // requires non-negative input; derivative at 0 defined as 0
    Tensor sigmoid(Tensor a);
    Tensor tanh(Tensor a);
    Tensor leaky_relu(Tensor a, double slope = 0.2);
    /// Clamp to [lo, hi]; subgradient 1 strictly inside, 0 at and beyond the boundaries.
    Tensor clamp(Tensor a, double lo, double hi);
    Tensor clamp_min(Tensor a, double lo);

    // -- reductions / structure ---------------------------------------------
    Tensor mean(Tensor a);
    Tensor sum(Tensor a);
    /// Concatenate two 1-D or 2-D tensors along `axis`.
    Tensor concat(Tensor a, Tensor b, int axis);

    /// Reverse sweep from a scalar root. Accumulates into node grads and,
    /// through Leaf nodes, into Variable grads.
    void backward(Tensor root);
    /// Zero the adjoints of every recorded node (not the Variables).
    void zero_adjoints();

    // node accessors used by the Tensor handle
    const Shape& shape_of(std::size_t i) const { return nodes_[i].shape; }
    const std::vector<double>& value_of(std::size_t i) const { return nodes_[i].value; }
    const std::vector<double>& grad_of(std::size_t i) const { return nodes_[i].grad; }
    bool requires_grad_of(std::size_t i) const { return nodes_[i].requires_grad; }

private:
    struct Node {
        OpKind kind;
        int a = -1; // input node ids
        int b = -1;
        Shape shape;
        std::vector<double> value;
        std::vector<double> grad; // adjoint, sized with value when requires_grad
        bool requires_grad = false;
        double p0 = 0.0; // op attribute: scalar factor, slope, clamp lo
        double p1 = 0.0; // clamp hi
        int axis = 0;    // concat axis
        Variable* var = nullptr;
    };

    Tensor push(Node node);
    Tensor unary(OpKind kind, Tensor a, const std::function<double(double)>& f,
                 double p0 = 0.0, double p1 = 0.0);
    void backward_node(std::size_t i);
    Node& node(Tensor t);
    void check_same_tape(Tensor t) const;

    std::vector<Node> nodes_;
    bool freeze_leaves_ = false;
};

/// RAII freeze scope: all leaves recorded while this is alive are
/// gradient-free snapshots of their variables.
class FreezeLeaves {
public:
    explicit FreezeLeaves(Tape& tape) : tape_(tape), prev_(tape.freeze_leaves()) {
        tape_.set_freeze_leaves(true);
    }
    ~FreezeLeaves() { tape_.set_freeze_leaves(prev_); }
    FreezeLeaves(const FreezeLeaves&) = delete;
    FreezeLeaves& operator=(const FreezeLeaves&) = delete;

private:
    Tape& tape_;
    bool prev_;
};

/// One parameter entry in a gradient check report.
struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> params;
    double max_rel_err = 0.0;
    double tol = 0.0;
    bool pass = false;
};

struct NamedVariable {
    std::string name;
    Variable* var;
};

/// Compare analytic gradients of a scalar-valued function against central
/// finite differences, parameter by parameter. `build` must construct the
/// scalar from the variables' *current* values on the given tape and must be
/// deterministic (it is evaluated twice and the values compared bitwise;
/// disable dropout). Relative error uses denominator max(|analytic|,
/// |numeric|, 1), so near-zero gradients are compared absolutely.
GradCheckReport grad_check(const std::function<Tensor(Tape&)>& build,
                           const std::vector<NamedVariable>& params,
                           double h, double tol);

} // namespace graphevo::ad
