#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "deepvar/rng.hpp"
#include "deepvar/tensor.hpp"

namespace deepvar {

// A named tensor with a gradient accumulator of the same shape.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros_like(value)) {}

  void zero_grad() { grad.zero(); }
};

// Handle into a Tape.
struct Var {
  std::size_t id = std::numeric_limits<std::size_t>::max();
  bool valid() const { return id != std::numeric_limits<std::size_t>::max(); }
};

// Reverse-mode computation record. Primitive calls append nodes holding the
// forward value and a backward rule; backward() replays the record once in
// reverse topological order (creation order is already topological) and then
// adds the gradients of bound Parameter nodes into their owners.
//
// One record serves one forward/backward pass and is single-threaded;
// separate records may run concurrently.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t node_id)>;

  Var constant(Tensor value);
  Var param(Parameter& p);  // bind once per tape so gradients pool on one node

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var scale(Var a, double factor);
  Var matmul(Var a, Var b);  // (m,k)x(k,n)->(m,n) or (m,k)x(k)->(m)
  Var concat(const std::vector<Var>& parts);  // rank-1 parts
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var log_sum_exp(Var a);            // rank-1 -> scalar
  Var max_pool_over_time(Var a);     // (n,d) -> (d), ties to first row
  Var dropout(Var a, double rate, bool training, Rng& rng);  // inverted
  Var sum(Var a);                    // any shape -> scalar
  Var stack_rows(const std::vector<Var>& rows);  // n rank-1 (d) -> (n,d)
  Var row(Var matrix, std::size_t index);        // (n,d) -> (d)
  Var reshape(Var a, std::vector<std::size_t> shape);
  Var transpose(Var a);              // rank-2
  Var add_to_rows(Var matrix, Var vec);  // (n,d) + (d) broadcast over rows

  // Appends a node with a caller-supplied value and backward rule; how crf
  // and other modules register primitives with analytic gradients.
  Var custom(Tensor value, std::vector<Var> parents, BackwardFn backward);

  // loss must be scalar; may be called once per tape.
  void backward(Var loss);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  const Tensor& grad(Var v) const { return nodes_[v.id].grad; }
  Tensor& grad_mut(Var v) { return nodes_[v.id].grad; }
  const std::vector<Var>& parents(Var v) const { return nodes_[v.id].parents; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<Var> parents;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  Var append(Tensor value, std::vector<Var> parents, BackwardFn backward,
             Parameter* param = nullptr);

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace deepvar
