#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "shiftlab/core/tensor.hpp"

namespace shiftlab {

template <typename Scalar>
class Tape;

/// Cheap handle to a node on a tape. Ops take and return these.
template <typename Scalar>
struct Var {
    Tape<Scalar>* tape = nullptr;
    int id = -1;

    Tensor<Scalar>& value() const;
    const Shape& shape() const { return value().shape(); }
    bool requires_grad() const;
    /// Gradient of the last backward() w.r.t. this node. Undefined before backward.
    const Tensor<Scalar>& grad() const;
};

/// Record of one forward computation: values, parent edges and backward
/// closures, in construction order (which is a topological order).
template <typename Scalar>
class Tape {
public:
    /// Backward closure; `self` is the id of the node the closure belongs to.
    using BackwardFn = std::function<void(Tape&, int self)>;

    struct Node {
        Tensor<Scalar> value;
        Tensor<Scalar> grad;  // allocated lazily during backward
        bool requires_grad = false;
        bool grad_live = false;
        std::vector<int> parents;
        BackwardFn backward;
    };

    /// Adds an input node (no parents).
    Var<Scalar> leaf(Tensor<Scalar> value, bool requires_grad = false) {
        require_finite(value, "tape leaf");
        nodes_.push_back(Node{std::move(value), {}, requires_grad, false, {}, nullptr});
        return Var<Scalar>{this, static_cast<int>(nodes_.size()) - 1};
    }

    /// Adds an op result. The backward closure is only kept when some parent
    /// needs a gradient; eval-mode forwards record values only.
    Var<Scalar> record(Tensor<Scalar> value, std::vector<int> parents, BackwardFn backward) {
        require_finite(value, "tape record");
        bool needs = false;
        for (int p : parents) needs = needs || nodes_[static_cast<std::size_t>(p)].requires_grad;
        Node node;
        node.value = std::move(value);
        node.requires_grad = needs;
        node.parents = std::move(parents);
        if (needs) node.backward = std::move(backward);
        nodes_.push_back(std::move(node));
        return Var<Scalar>{this, static_cast<int>(nodes_.size()) - 1};
    }

    /// Reverse sweep from a scalar loss. Each node's closure runs at most once.
    void backward(Var<Scalar> loss) {
        if (loss.tape != this) throw Error("backward: variable belongs to a different tape");
        Node& top = node(loss.id);
        if (top.value.numel() != 1)
            throw ShapeError("backward: loss must be scalar, got " + shape_str(top.value.shape()));
        for (Node& n : nodes_) {
            n.grad_live = false;
            n.grad = Tensor<Scalar>();
        }
        accumulate(loss.id, Tensor<Scalar>::full(top.value.shape(), Scalar(1)));
        for (int i = loss.id; i >= 0; --i) {
            Node& n = node(i);
            if (n.grad_live && n.backward) n.backward(*this, i);
            // interior gradients are never read again once the closure ran;
            // dropping them keeps peak memory near the forward footprint
            if (!n.parents.empty() && n.grad_live) {
                n.grad = Tensor<Scalar>();
                n.grad_live = false;
            }
        }
    }

    Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
    const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

    Tensor<Scalar>& value(int id) { return node(id).value; }

    /// Gradient of node `id`; zero tensor if the node never received one.
    const Tensor<Scalar>& grad(int id) {
        Node& n = node(id);
        if (!n.grad_live) {
            n.grad = Tensor<Scalar>(n.value.shape());
            n.grad_live = true;
        }
        return n.grad;
    }

    void accumulate(int id, const Tensor<Scalar>& g) {
        Node& n = node(id);
        if (!n.grad_live) {
            n.grad = g;
            n.grad_live = true;
        } else {
            n.grad.array() += g.array();
        }
    }

    std::size_t size() const { return nodes_.size(); }

private:
    std::vector<Node> nodes_;
};

template <typename Scalar>
Tensor<Scalar>& Var<Scalar>::value() const {
    return tape->value(id);
}

template <typename Scalar>
bool Var<Scalar>::requires_grad() const {
    return tape->node(id).requires_grad;
}

template <typename Scalar>
const Tensor<Scalar>& Var<Scalar>::grad() const {
    return tape->grad(id);
}

}  // namespace shiftlab
