#include "deepvar/tape.hpp"

#include <algorithm>
#include <cmath>

#include "deepvar/errors.hpp"

namespace deepvar {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  check_numeric(a.same_shape(b), std::string(op) + ": shape mismatch " +
                                     a.shape_str() + " vs " + b.shape_str());
}

}  // namespace

Var Tape::append(Tensor value, std::vector<Var> parents, BackwardFn backward,
                 Parameter* param) {
  Node node;
  node.value = std::move(value);
  node.grad = Tensor::zeros_like(node.value);
  node.parents = std::move(parents);
  node.backward = std::move(backward);
  node.param = param;
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Tape::constant(Tensor value) { return append(std::move(value), {}, nullptr); }

Var Tape::param(Parameter& p) { return append(p.value, {}, nullptr, &p); }

Var Tape::add(Var a, Var b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  require_same_shape(va, vb, "add");
  Tensor out = va;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += vb[i];
  return append(std::move(out), {a, b}, [a, b](Tape& t, std::size_t id) {
    const Tensor& g = t.nodes_[id].grad;
    Tensor& ga = t.grad_mut(a);
    Tensor& gb = t.grad_mut(b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] += g[i];
    }
  });
}

Var Tape::sub(Var a, Var b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  require_same_shape(va, vb, "sub");
  Tensor out = va;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= vb[i];
  return append(std::move(out), {a, b}, [a, b](Tape& t, std::size_t id) {
    const Tensor& g = t.nodes_[id].grad;
    Tensor& ga = t.grad_mut(a);
    Tensor& gb = t.grad_mut(b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] -= g[i];
    }
  });
}

Var Tape::mul(Var a, Var b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  require_same_shape(va, vb, "mul");
  Tensor out = va;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
  return append(std::move(out), {a, b}, [a, b](Tape& t, std::size_t id) {
    const Tensor& g = t.nodes_[id].grad;
    const Tensor& va = t.value(a);
    const Tensor& vb = t.value(b);
    Tensor& ga = t.grad_mut(a);
    Tensor& gb = t.grad_mut(b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i] * vb[i];
      gb[i] += g[i] * va[i];
    }
  });
}

Var Tape::scale(Var a, double factor) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= factor;
  return append(std::move(out), {a}, [a, factor](Tape& t, std::size_t id) {
    const Tensor& g = t.nodes_[id].grad;
    Tensor& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
  });
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  check_numeric(va.rank() == 2, "matmul: left operand must be rank 2, got " + va.shape_str());
  const std::size_t m = va.rows();
  const std::size_t k = va.cols();
  if (vb.rank() == 1) {
    check_numeric(vb.shape()[0] == k, "matmul: shape mismatch " + va.shape_str() +
                                          " vs " + vb.shape_str());
    Tensor out({m});
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) acc += va.at(i, j) * vb[j];
      out[i] = acc;
    }
    return append(std::move(out), {a, b}, [a, b, m, k](Tape& t, std::size_t id) {
      const Tensor& g = t.nodes_[id].grad;
      const Tensor& va = t.value(a);
      const Tensor& vb = t.value(b);
      Tensor& ga = t.grad_mut(a);
      Tensor& gb = t.grad_mut(b);
      for (std::size_t i = 0; i < m; ++i) {
        const double gi = g[i];
        for (std::size_t j = 0; j < k; ++j) {
          ga.at(i, j) += gi * vb[j];
          gb[j] += gi * va.at(i, j);
        }
      }
    });
  }
  check_numeric(vb.rank() == 2 && vb.rows() == k,
                "matmul: shape mismatch " + va.shape_str() + " vs " + vb.shape_str());
  const std::size_t n = vb.cols();
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double aij = va.at(i, j);
      if (aij == 0.0) continue;
      for (std::size_t c = 0; c < n; ++c) out.at(i, c) += aij * vb.at(j, c);
    }
  }
  return append(std::move(out), {a, b}, [a, b, m, k, n](Tape& t, std::size_t id) {
    const Tensor& g = t.nodes_[id].grad;
    const Tensor& va = t.value(a);
    const Tensor& vb = t.value(b);
    Tensor& ga = t.grad_mut(a);
    Tensor& gb = t.grad_mut(b);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t c = 0; c < n; ++c) {
        const double gic = g.at(i, c);
        if (gic == 0.0) continue;
        for (std::size_t j = 0; j < k; ++j) {
          ga.at(i, j) += gic * vb.at(j, c);
          gb.at(j, c) += gic * va.at(i, j);
        }
      }
    }
  });
}

Var Tape::concat(const std::vector<Var>& parts) {
  check_numeric(!parts.empty(), "concat of zero parts");
  std::size_t total = 0;
  for (Var p : parts) {
    check_numeric(value(p).rank() == 1,
                  "concat: rank-1 operands required, got " + value(p).shape_str());
    total += value(p).size();
  }
  Tensor out({total});
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& v = value(p);
    for (std::size_t i = 0; i < v.size(); ++i) out[off + i] = v[i];
    off += v.size();
  }
  return append(std::move(out), parts, [parts](Tape& t, std::size_t id) {
    const Tensor& g = t.nodes_[id].grad;
    std::size_t off = 0;
    for (Var p : parts) {
      Tensor& gp = t.grad_mut(p);
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[off + i];
      off += gp.size();
    }
  });
}

Var Tape::sigmoid(Var a) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
  return append(std::move(out), {a}, [a](Tape& t, std::size_t id) {
    const Tensor& g = t.nodes_[id].grad;
    const Tensor& y = t.nodes_[id].value;
    Tensor& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var Tape::tanh(Var a) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  return append(std::move(out), {a}, [a](Tape& t, std::size_t id) {
    const Tensor& g = t.nodes_[id].grad;
    const Tensor& y = t.nodes_[id].value;
    Tensor& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var Tape::log_sum_exp(Var a) {
  const Tensor& va = value(a);
  check_numeric(va.rank() == 1 && va.size() > 0,
                "log_sum_exp: non-empty rank-1 input required, got " + va.shape_str());
  const double lse = deepvar::log_sum_exp(std::span<const double>(va.values()));
  return append(Tensor::scalar(lse), {a}, [a](Tape& t, std::size_t id) {
    const double g = t.nodes_[id].grad[0];
    const double lse = t.nodes_[id].value[0];
    const Tensor& va = t.value(a);
    Tensor& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < va.size(); ++i) ga[i] += g * std::exp(va[i] - lse);
  });
}

Var Tape::max_pool_over_time(Var a) {
  const Tensor& va = value(a);
  check_numeric(va.rank() == 2 && va.rows() >= 1,
                "max_pool_over_time: non-empty rank-2 input required, got " + va.shape_str());
  const std::size_t n = va.rows();
  const std::size_t d = va.cols();
  Tensor out({d});
  std::vector<std::size_t> argmax(d, 0);
  for (std::size_t j = 0; j < d; ++j) {
    double best = va.at(0, j);
    for (std::size_t i = 1; i < n; ++i) {
      if (va.at(i, j) > best) {  // strict: ties stay with the first row
        best = va.at(i, j);
        argmax[j] = i;
      }
    }
    out[j] = best;
  }
  return append(std::move(out), {a},
                [a, argmax = std::move(argmax)](Tape& t, std::size_t id) {
                  const Tensor& g = t.nodes_[id].grad;
                  Tensor& ga = t.grad_mut(a);
                  for (std::size_t j = 0; j < g.size(); ++j) {
                    ga.at(argmax[j], j) += g[j];
                  }
                });
}

Var Tape::dropout(Var a, double rate, bool training, Rng& rng) {
  check_numeric(rate >= 0.0 && rate < 1.0,
                "dropout: rate must be in [0, 1), got " + std::to_string(rate));
  if (!training || rate == 0.0) {
    Tensor out = value(a);
    return append(std::move(out), {a}, [a](Tape& t, std::size_t id) {
      const Tensor& g = t.nodes_[id].grad;
      Tensor& ga = t.grad_mut(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }
  const Tensor& va = value(a);
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(va.size());
  for (double& m : mask) m = rng.uniform() < rate ? 0.0 : keep_scale;
  Tensor out = va;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return append(std::move(out), {a},
                [a, mask = std::move(mask)](Tape& t, std::size_t id) {
                  const Tensor& g = t.nodes_[id].grad;
                  Tensor& ga = t.grad_mut(a);
                  for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
                });
}

Var Tape::sum(Var a) {
  const Tensor& va = value(a);
  double acc = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) acc += va[i];
  return append(Tensor::scalar(acc), {a}, [a](Tape& t, std::size_t id) {
    const double g = t.nodes_[id].grad[0];
    Tensor& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
}

Var Tape::stack_rows(const std::vector<Var>& rows) {
  check_numeric(!rows.empty(), "stack_rows of zero rows");
  const std::size_t d = value(rows[0]).size();
  for (Var r : rows) {
    check_numeric(value(r).rank() == 1 && value(r).size() == d,
                  "stack_rows: rows must share rank-1 shape, got " + value(r).shape_str());
  }
  Tensor out({rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Tensor& v = value(rows[i]);
    for (std::size_t j = 0; j < d; ++j) out.at(i, j) = v[j];
  }
  return append(std::move(out), rows, [rows, d](Tape& t, std::size_t id) {
    const Tensor& g = t.nodes_[id].grad;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      Tensor& gr = t.grad_mut(rows[i]);
      for (std::size_t j = 0; j < d; ++j) gr[j] += g.at(i, j);
    }
  });
}

Var Tape::row(Var matrix, std::size_t index) {
  const Tensor& vm = value(matrix);
  check_numeric(vm.rank() == 2, "row: rank-2 input required, got " + vm.shape_str());
  check_numeric(index < vm.rows(), "row: index " + std::to_string(index) +
                                       " out of range for " + vm.shape_str());
  const std::size_t d = vm.cols();
  Tensor out({d});
  for (std::size_t j = 0; j < d; ++j) out[j] = vm.at(index, j);
  return append(std::move(out), {matrix}, [matrix, index, d](Tape& t, std::size_t id) {
    const Tensor& g = t.nodes_[id].grad;
    Tensor& gm = t.grad_mut(matrix);
    for (std::size_t j = 0; j < d; ++j) gm.at(index, j) += g[j];
  });
}

Var Tape::reshape(Var a, std::vector<std::size_t> shape) {
  const Tensor& va = value(a);
  check_numeric(shape_size(shape) == va.size(),
                "reshape: size mismatch " + va.shape_str() + " -> " +
                    Tensor(shape).shape_str());
  Tensor out(shape, va.values());
  return append(std::move(out), {a}, [a](Tape& t, std::size_t id) {
    const Tensor& g = t.nodes_[id].grad;
    Tensor& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var Tape::transpose(Var a) {
  const Tensor& va = value(a);
  check_numeric(va.rank() == 2, "transpose: rank-2 input required, got " + va.shape_str());
  const std::size_t m = va.rows();
  const std::size_t n = va.cols();
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.at(j, i) = va.at(i, j);
  }
  return append(std::move(out), {a}, [a, m, n](Tape& t, std::size_t id) {
    const Tensor& g = t.nodes_[id].grad;
    Tensor& ga = t.grad_mut(a);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) ga.at(i, j) += g.at(j, i);
    }
  });
}

Var Tape::add_to_rows(Var matrix, Var vec) {
  const Tensor& vm = value(matrix);
  const Tensor& vv = value(vec);
  check_numeric(vm.rank() == 2 && vv.rank() == 1 && vm.cols() == vv.size(),
                "add_to_rows: shape mismatch " + vm.shape_str() + " vs " + vv.shape_str());
  Tensor out = vm;
  for (std::size_t i = 0; i < vm.rows(); ++i) {
    for (std::size_t j = 0; j < vm.cols(); ++j) out.at(i, j) += vv[j];
  }
  return append(std::move(out), {matrix, vec}, [matrix, vec](Tape& t, std::size_t id) {
    const Tensor& g = t.nodes_[id].grad;
    Tensor& gm = t.grad_mut(matrix);
    Tensor& gv = t.grad_mut(vec);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (std::size_t j = 0; j < g.cols(); ++j) {
        gm.at(i, j) += g.at(i, j);
        gv[j] += g.at(i, j);
      }
    }
  });
}

Var Tape::custom(Tensor value, std::vector<Var> parents, BackwardFn backward) {
  return append(std::move(value), std::move(parents), std::move(backward));
}

void Tape::backward(Var loss) {
  check_numeric(loss.valid() && loss.id < nodes_.size(), "backward: invalid loss node");
  check_numeric(nodes_[loss.id].value.is_scalar(),
                "backward: loss must be scalar, got " + nodes_[loss.id].value.shape_str());
  check_numeric(!backward_done_, "backward: already run on this tape");
  backward_done_ = true;

  // Mark ancestors of the loss so unrelated nodes are skipped.
  std::vector<char> reachable(nodes_.size(), 0);
  std::vector<std::size_t> stack{loss.id};
  reachable[loss.id] = 1;
  while (!stack.empty()) {
    const std::size_t id = stack.back();
    stack.pop_back();
    for (Var p : nodes_[id].parents) {
      if (!reachable[p.id]) {
        reachable[p.id] = 1;
        stack.push_back(p.id);
      }
    }
  }

  nodes_[loss.id].grad[0] = 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    if (reachable[id] && nodes_[id].backward) nodes_[id].backward(*this, id);
  }

  for (std::size_t id = 0; id <= loss.id; ++id) {
    Node& node = nodes_[id];
    if (!reachable[id] || node.param == nullptr || !node.param->trainable) continue;
    Tensor& g = node.param->grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i];
  }
}

}  // namespace deepvar
