#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "vmtl/error.hpp"
#include "vmtl/tensor.hpp"

namespace vmtl {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    const std::vector<std::size_t>& shape() const;
    bool valid() const { return tape != nullptr; }
};

// Append-only computation record for one forward pass. Nodes are stored in
// topological order by construction; backward() runs the reverse sweep and
// accumulates gradients across fan-out.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, std::size_t self)>;

    Var leaf(Tensor value, bool requires_grad) {
        return push_node(std::move(value), {}, nullptr, requires_grad);
    }

    Var constant(Tensor value) { return leaf(std::move(value), false); }

    // Used by op implementations. The node needs a gradient iff any parent does.
    Var push(Tensor value, std::vector<std::size_t> parents, BackwardFn fn) {
        bool needs = false;
        for (std::size_t p : parents) needs = needs || nodes_[p].needs_grad;
        return push_node(std::move(value), std::move(parents), std::move(fn), needs);
    }

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    const Tensor& value(const Var& v) const { return nodes_[v.id].value; }

    bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

    const std::vector<std::size_t>& parents(std::size_t id) const { return nodes_[id].parents; }

    std::size_t size() const { return nodes_.size(); }

    // Gradient of the last backward() root w.r.t. node v, or nullptr if the
    // node was not reached (structurally zero gradient).
    const Tensor* grad(const Var& v) const { return grad_ptr(v.id); }
    const Tensor* grad_ptr(std::size_t id) const {
        return nodes_[id].has_grad ? &nodes_[id].grad : nullptr;
    }

    // Accumulate a gradient contribution into node `id`.
    void accumulate_grad(std::size_t id, const Tensor& g) {
        Node& n = nodes_[id];
        if (!n.needs_grad) return;
        if (!n.has_grad) {
            if (!g.same_shape(n.value))
                throw DimensionError("gradient shape does not match node value");
            n.grad = g;
            n.has_grad = true;
            return;
        }
        if (!g.same_shape(n.grad))
            throw DimensionError("gradient shape does not match node value");
        double* dst = n.grad.data();
        const double* src = g.data();
        for (std::size_t i = 0; i < n.grad.numel(); ++i) dst[i] += src[i];
    }

    // Mutable gradient slot, allocating zeros on first touch. Lets backward
    // rules scatter without building a temporary.
    Tensor* grad_slot(std::size_t id) {
        Node& n = nodes_[id];
        if (!n.needs_grad) return nullptr;
        if (!n.has_grad) {
            n.grad = Tensor::zeros(n.value.shape());
            n.has_grad = true;
        }
        return &n.grad;
    }

    // Reverse sweep from a scalar root. Every reachable grad-requiring node
    // ends with a populated gradient slot (zeros when contributions cancel).
    void backward(const Var& root) {
        if (root.tape != this) throw ContractError("backward: root from another tape");
        Node& r = nodes_[root.id];
        if (r.value.numel() != 1) throw ContractError("backward: root must be scalar");

        // Mark the subgraph that feeds the root.
        std::vector<char> reachable(nodes_.size(), 0);
        reachable[root.id] = 1;
        for (std::size_t i = root.id + 1; i-- > 0;) {
            if (!reachable[i] || !nodes_[i].needs_grad) continue;
            for (std::size_t p : nodes_[i].parents)
                if (nodes_[p].needs_grad) reachable[p] = 1;
        }
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (reachable[i] && nodes_[i].needs_grad) grad_slot(i);
        }

        if (!r.needs_grad) return; // nothing trainable feeds the root
        r.grad = Tensor::full(r.value.shape(), 1.0);
        for (std::size_t i = root.id + 1; i-- > 0;) {
            if (!reachable[i]) continue;
            Node& n = nodes_[i];
            if (n.backward && n.needs_grad) n.backward(*this, i);
        }
    }

private:
    struct Node {
        Tensor value;
        std::vector<std::size_t> parents;
        BackwardFn backward;
        Tensor grad;
        bool has_grad = false;
        bool needs_grad = false;
    };

    Var push_node(Tensor value, std::vector<std::size_t> parents, BackwardFn fn, bool needs_grad) {
        Node n;
        n.value = std::move(value);
        n.parents = std::move(parents);
        n.backward = std::move(fn);
        n.needs_grad = needs_grad;
        nodes_.push_back(std::move(n));
        return Var{this, nodes_.size() - 1};
    }

    std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape->value(id); }
inline const std::vector<std::size_t>& Var::shape() const { return tape->value(id).shape(); }

} // namespace vmtl
