#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "voxflow/core/tensor.hpp"

namespace voxflow {

// Trainable tensor with gradient and Adam moment buffers.
template <class S>
struct Param {
    Tensor<S> value;
    Tensor<S> grad;
    Tensor<S> adam_m;
    Tensor<S> adam_v;

    void init(Tensor<S> val) {
        value = std::move(val);
        grad = Tensor<S>::zeros(value.shape);
        adam_m = Tensor<S>::zeros(value.shape);
        adam_v = Tensor<S>::zeros(value.shape);
    }

    void zero_grad() {
        for (auto& g : grad.v) g = S(0);
    }
};

template <class S>
using ParamRefs = std::vector<std::pair<std::string, Param<S>*>>;

// Handle to a node on a Tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff tape. Nodes are created in topological order by the
// op builders in ops.hpp; backward() sweeps them in reverse and finally
// flushes leaf gradients into their bound Param buffers.
template <class S>
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor<S> t) {
        nodes_.push_back(Node{std::move(t), {}, false, false, nullptr});
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    // Gradient-requiring leaf whose gradient stays on the node (tests, probes).
    Var leaf(Tensor<S> t) {
        nodes_.push_back(Node{std::move(t), {}, true, false, nullptr});
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    // Leaf bound to a parameter: after backward, the node gradient is added
    // into p.grad. Repeated use of the same parameter reuses one node.
    Var param(Param<S>& p) {
        auto it = param_cache_.find(&p);
        if (it != param_cache_.end()) return Var{it->second};
        Var v = leaf(p.value);
        sinks_.push_back({v.id, &p});
        param_cache_[&p] = v.id;
        return v;
    }

    // Parameter used as a constant: no gradient reaches it (frozen network).
    Var param_frozen(const Param<S>& p) {
        auto it = frozen_cache_.find(&p);
        if (it != frozen_cache_.end()) return Var{it->second};
        Var v = constant(p.value);
        frozen_cache_[&p] = v.id;
        return v;
    }

    const Tensor<S>& val(Var a) const { return nodes_[check(a)].val; }

    // Gradient of a leaf after backward(); zeros if it never received one.
    const Tensor<S>& grad_of(Var a) {
        Node& n = nodes_[check(a)];
        if (!n.grad_alloc) {
            n.grad = Tensor<S>::zeros(n.val.shape);
            n.grad_alloc = true;
        }
        return n.grad;
    }

    bool wants_grad(Var a) const { return nodes_[check(a)].needs; }

    void backward(Var loss) {
        Node& ln = nodes_[check(loss)];
        if (ln.val.numel() != 1) throw Error("backward: loss must be a scalar");
        if (!ln.needs) return;
        add_grad(loss.id, Tensor<S>::scalar(S(1)));
        for (int id = loss.id; id >= 0; --id) {
            Node& n = nodes_[id];
            if (n.needs && n.grad_alloc && n.back) n.back(*this, id);
        }
        for (auto& [id, p] : sinks_) {
            Node& n = nodes_[id];
            if (!n.grad_alloc) continue;
            for (int64_t i = 0; i < n.grad.numel(); ++i) p->grad.v[i] += n.grad.v[i];
        }
    }

    size_t num_nodes() const { return nodes_.size(); }

    // --- op-builder interface ---

    using BackFn = std::function<void(Tape&, int)>;

    Var make(Tensor<S> value, const std::vector<int>& parents, BackFn back) {
        bool needs = false;
        for (int p : parents)
            if (nodes_[p].needs) { needs = true; break; }
        nodes_.push_back(Node{std::move(value), {}, needs, false, needs ? std::move(back) : nullptr});
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    bool node_needs(int id) const { return nodes_[id].needs; }
    const Tensor<S>& node_val(int id) const { return nodes_[id].val; }
    const Tensor<S>& node_grad(int id) const { return nodes_[id].grad; }

    // Accumulation target for a node's gradient; allocated on first touch.
    Tensor<S>& grad_buf(int id) {
        Node& n = nodes_[id];
        if (!n.grad_alloc) {
            n.grad = Tensor<S>::zeros(n.val.shape);
            n.grad_alloc = true;
        }
        return n.grad;
    }

    void add_grad(int id, const Tensor<S>& g) {
        Node& n = nodes_[id];
        if (!n.needs) return;
        Tensor<S>& buf = grad_buf(id);
        for (int64_t i = 0; i < g.numel(); ++i) buf.v[i] += g.v[i];
    }

private:
    struct Node {
        Tensor<S> val;
        Tensor<S> grad;
        bool needs = false;
        bool grad_alloc = false;
        BackFn back;
    };

    int check(Var a) const {
        if (!a.valid() || a.id >= static_cast<int>(nodes_.size())) throw Error("tape: invalid var");
        return a.id;
    }

    std::vector<Node> nodes_;
    std::vector<std::pair<int, Param<S>*>> sinks_;
    std::unordered_map<const Param<S>*, int> param_cache_;
    std::unordered_map<const Param<S>*, int> frozen_cache_;
};

}  // namespace voxflow
