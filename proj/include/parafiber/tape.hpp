#pragma once

// Recorded program of elementary jet operations with a reverse sweep.
// Forward mode carries the input derivatives inside each Jet; the reverse
// sweep propagates one adjoint per jet slot and accumulates d(scalar)/d(param)
// for every network weight and bias touched by an affine-combine node.
// A tape is recorded once and replayed with fresh inputs; replay is strictly
// sequential, so identical inputs give bit-identical values and gradients.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "parafiber/jet.hpp"

namespace parafiber {

class Tape {
 public:
  enum class Op : std::uint8_t { Input, Const, Add, Sub, Mul, Scale, Tanh, Affine, Slot };

  using NodeId = std::int32_t;

  NodeId input() { return push(Node{Op::Input}); }

  NodeId constant(double c) {
    Node n{Op::Const};
    n.k = c;
    return push(n);
  }

  NodeId add(NodeId a, NodeId b) { return binary(Op::Add, a, b); }
  NodeId sub(NodeId a, NodeId b) { return binary(Op::Sub, a, b); }
  NodeId mul(NodeId a, NodeId b) { return binary(Op::Mul, a, b); }

  NodeId scale(NodeId a, double k) {
    check(a);
    Node n{Op::Scale};
    n.a = a;
    n.k = k;
    return push(n);
  }

  NodeId tanh(NodeId a) {
    check(a);
    Node n{Op::Tanh};
    n.a = a;
    return push(n);
  }

  /// sum_i params[w_begin + i] * node(args[i]) + params[bias]; bias < 0 omits it.
  NodeId affine(std::span<const NodeId> args, std::int32_t w_begin, std::int32_t bias) {
    Node n{Op::Affine};
    n.arg_begin = std::int32_t(arg_pool_.size());
    n.arg_count = std::int32_t(args.size());
    for (NodeId a : args) {
      check(a);
      arg_pool_.push_back(a);
    }
    n.w_begin = w_begin;
    n.b = bias;
    return push(n);
  }

  /// Extracts one derivative slot as a plain value (all derivative slots of
  /// the result are zero). Slots: 0 value, 1 d/dt, 2 d2/dt2, 3 d3/dt3, 4 d/dzeta.
  NodeId slot(NodeId a, int s) {
    check(a);
    if (s < 0 || s > 4) throw std::invalid_argument("tape: slot index out of range");
    Node n{Op::Slot};
    n.a = a;
    n.slot = std::uint8_t(s);
    return push(n);
  }

  void set_input(NodeId id, const Jet& seed) {
    if (nodes_.at(std::size_t(id)).op != Op::Input)
      throw std::invalid_argument("tape: set_input on a non-input node");
    vals_[std::size_t(id)] = seed;
  }

  void set_const(NodeId id, double c) {
    if (nodes_.at(std::size_t(id)).op != Op::Const)
      throw std::invalid_argument("tape: set_const on a non-const node");
    nodes_[std::size_t(id)].k = c;
  }

  std::size_t size() const { return nodes_.size(); }

  const Jet& jet(NodeId id) const { return vals_.at(std::size_t(id)); }
  double value(NodeId id) const { return vals_.at(std::size_t(id)).v; }

  void forward(std::span<const double> params) {
    const std::size_t n = nodes_.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Node& nd = nodes_[i];
      Jet& out = vals_[i];
      switch (nd.op) {
        case Op::Input:
          break;  // seeded externally
        case Op::Const:
          out = Jet::constant(nd.k);
          break;
        case Op::Add:
          out = vals_[nd.a] + vals_[nd.b];
          break;
        case Op::Sub:
          out = vals_[nd.a] - vals_[nd.b];
          break;
        case Op::Mul:
          out = vals_[nd.a] * vals_[nd.b];
          break;
        case Op::Scale:
          out = nd.k * vals_[nd.a];
          break;
        case Op::Tanh:
          out = jet_tanh(vals_[nd.a]);
          break;
        case Op::Affine: {
          Jet acc = nd.b >= 0 ? Jet::constant(params[std::size_t(nd.b)]) : Jet{};
          const NodeId* args = arg_pool_.data() + nd.arg_begin;
          const double* w = params.data() + nd.w_begin;
          for (std::int32_t t = 0; t < nd.arg_count; ++t) {
            const Jet& x = vals_[std::size_t(args[t])];
            const double wt = w[t];
            acc.v += wt * x.v;
            acc.dt += wt * x.dt;
            acc.dtt += wt * x.dtt;
            acc.dttt += wt * x.dttt;
            acc.dz += wt * x.dz;
          }
          out = acc;
          break;
        }
        case Op::Slot:
          out = Jet::constant(vals_[nd.a].slot(nd.slot));
          break;
      }
    }
  }

  /// Reverse sweep from `out`, seeding d(loss)/d(out.value) = seed.
  /// Accumulates parameter gradients into `grad` (+=) and returns nothing;
  /// nodes recorded after `out` are ignored.
  void reverse(NodeId out, double seed, std::span<const double> params,
               std::span<double> grad) {
    adj_.assign(nodes_.size(), Jet{});
    adj_[std::size_t(out)].v = seed;

    for (std::int32_t i = out; i >= 0; --i) {
      const Node& nd = nodes_[std::size_t(i)];
      const Jet& a = adj_[std::size_t(i)];
      switch (nd.op) {
        case Op::Input:
        case Op::Const:
          break;
        case Op::Add:
          adj_[nd.a] += a;
          adj_[nd.b] += a;
          break;
        case Op::Sub:
          adj_[nd.a] += a;
          adj_[nd.b] += -1.0 * a;
          break;
        case Op::Mul: {
          // c = x * y with the Leibniz table; the adjoint is its transpose.
          const Jet& x = vals_[nd.a];
          const Jet& y = vals_[nd.b];
          accumulate_mul_adjoint(adj_[nd.a], a, y);
          accumulate_mul_adjoint(adj_[nd.b], a, x);
          break;
        }
        case Op::Scale:
          adj_[nd.a] += nd.k * a;
          break;
        case Op::Tanh: {
          const Jet& x = vals_[nd.a];
          // Rebuild the tanh derivative ladder from the stored output value.
          const double u = vals_[std::size_t(i)].v;
          const double d1 = 1.0 - u * u;
          const double d2 = -2.0 * u * d1;
          const double d3 = -2.0 * d1 * d1 - 2.0 * u * d2;
          const double d4 = -6.0 * d1 * d2 - 2.0 * u * d3;
          Jet& ax = adj_[nd.a];
          // y.v    = f(x.v)
          // y.dt   = d1 x.dt
          // y.dtt  = d2 x.dt^2 + d1 x.dtt
          // y.dttt = d3 x.dt^3 + 3 d2 x.dt x.dtt + d1 x.dttt
          // y.dz   = d1 x.dz
          ax.v += a.v * d1 + a.dt * d2 * x.dt + a.dtt * (d3 * x.dt * x.dt + d2 * x.dtt) +
                  a.dttt * (d4 * x.dt * x.dt * x.dt + 3.0 * d3 * x.dt * x.dtt + d2 * x.dttt) +
                  a.dz * d2 * x.dz;
          ax.dt += a.dt * d1 + a.dtt * 2.0 * d2 * x.dt +
                   a.dttt * (3.0 * d3 * x.dt * x.dt + 3.0 * d2 * x.dtt);
          ax.dtt += a.dtt * d1 + a.dttt * 3.0 * d2 * x.dt;
          ax.dttt += a.dttt * d1;
          ax.dz += a.dz * d1;
          break;
        }
        case Op::Affine: {
          const NodeId* args = arg_pool_.data() + nd.arg_begin;
          const double* w = params.data() + nd.w_begin;
          double* gw = grad.data() + nd.w_begin;
          for (std::int32_t t = 0; t < nd.arg_count; ++t) {
            const Jet& x = vals_[std::size_t(args[t])];
            Jet& ax = adj_[std::size_t(args[t])];
            const double wt = w[t];
            ax.v += wt * a.v;
            ax.dt += wt * a.dt;
            ax.dtt += wt * a.dtt;
            ax.dttt += wt * a.dttt;
            ax.dz += wt * a.dz;
            gw[t] += a.v * x.v + a.dt * x.dt + a.dtt * x.dtt + a.dttt * x.dttt + a.dz * x.dz;
          }
          if (nd.b >= 0) grad[std::size_t(nd.b)] += a.v;
          break;
        }
        case Op::Slot:
          adj_[nd.a].slot(nd.slot) += a.v;
          break;
      }
    }
  }

 private:
  struct Node {
    Op op;
    std::uint8_t slot = 0;
    NodeId a = -1, b = -1;
    double k = 0.0;
    std::int32_t arg_begin = 0, arg_count = 0;
    std::int32_t w_begin = -1;
  };

  NodeId push(const Node& n) {
    nodes_.push_back(n);
    vals_.emplace_back();
    return NodeId(nodes_.size() - 1);
  }

  NodeId binary(Op op, NodeId a, NodeId b) {
    check(a);
    check(b);
    Node n{op};
    n.a = a;
    n.b = b;
    return push(n);
  }

  void check(NodeId a) const {
    if (a < 0 || std::size_t(a) >= nodes_.size())
      throw std::invalid_argument("tape: operand refers to a node not yet recorded");
  }

  // adjoint of c = x*y with respect to x, given other operand o = y:
  // transpose of the Leibniz lower-triangular table.
  static void accumulate_mul_adjoint(Jet& ax, const Jet& ac, const Jet& o) {
    ax.v += ac.v * o.v + ac.dt * o.dt + ac.dtt * o.dtt + ac.dttt * o.dttt + ac.dz * o.dz;
    ax.dt += ac.dt * o.v + 2.0 * ac.dtt * o.dt + 3.0 * ac.dttt * o.dtt;
    ax.dtt += ac.dtt * o.v + 3.0 * ac.dttt * o.dt;
    ax.dttt += ac.dttt * o.v;
    ax.dz += ac.dz * o.v;
  }

  std::vector<Node> nodes_;
  std::vector<NodeId> arg_pool_;
  std::vector<Jet> vals_;
  std::vector<Jet> adj_;
};

}  // namespace parafiber
