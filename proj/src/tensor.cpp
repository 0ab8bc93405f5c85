#include "fragflow/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace fragflow::neural {

namespace {

void check(bool cond, const char* msg) {
  if (!cond) throw std::logic_error(msg);
}

}  // namespace

Tape::Var Tape::input(Tensor value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return static_cast<Var>(nodes_.size()) - 1;
}

Tape::Var Tape::push(Tensor value, std::vector<Var> parents,
                     std::function<void(Tape&, Node&)> back) {
  Node node;
  node.value = std::move(value);
  node.parents = std::move(parents);
  node.back = std::move(back);
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return static_cast<Var>(nodes_.size()) - 1;
}

void Tape::ensure_grad(Var v) {
  Node& n = nodes_[v];
  if (n.grad.numel() == 0) n.grad = Tensor(n.value.rows, n.value.cols);
}

void Tape::backward(Var loss) {
  check(nodes_[loss].value.numel() == 1, "backward needs a scalar loss");
  for (auto& n : nodes_) n.grad = Tensor();
  ensure_grad(loss);
  nodes_[loss].grad.data[0] = 1.0;
  for (Var v = loss; v >= 0; --v) {
    Node& n = nodes_[v];
    if (!n.back || n.grad.numel() == 0) continue;
    for (Var p : n.parents) ensure_grad(p);
    n.back(*this, n);
  }
  for (auto& n : nodes_)
    for (double g : n.grad.data)
      if (!std::isfinite(g)) throw NonFiniteGradient();
}

void Tape::clear() { nodes_.clear(); }

Tape::Var Tape::add(Var a, Var b) {
  check(val(a).same_shape(val(b)), "add: shape mismatch");
  Tensor out = val(a);
  const Tensor& vb = val(b);
  for (size_t i = 0; i < out.numel(); ++i) out.data[i] += vb.data[i];
  return push(std::move(out), {a, b}, [a, b](Tape& t, Node& n) {
    for (size_t i = 0; i < n.grad.numel(); ++i) {
      t.grad(a).data[i] += n.grad.data[i];
      t.grad(b).data[i] += n.grad.data[i];
    }
  });
}

Tape::Var Tape::sub(Var a, Var b) {
  check(val(a).same_shape(val(b)), "sub: shape mismatch");
  Tensor out = val(a);
  const Tensor& vb = val(b);
  for (size_t i = 0; i < out.numel(); ++i) out.data[i] -= vb.data[i];
  return push(std::move(out), {a, b}, [a, b](Tape& t, Node& n) {
    for (size_t i = 0; i < n.grad.numel(); ++i) {
      t.grad(a).data[i] += n.grad.data[i];
      t.grad(b).data[i] -= n.grad.data[i];
    }
  });
}

Tape::Var Tape::mul(Var a, Var b) {
  check(val(a).same_shape(val(b)), "mul: shape mismatch");
  Tensor out = val(a);
  const Tensor& vb = val(b);
  for (size_t i = 0; i < out.numel(); ++i) out.data[i] *= vb.data[i];
  return push(std::move(out), {a, b}, [a, b](Tape& t, Node& n) {
    const Tensor& va = t.val(a);
    const Tensor& vb2 = t.val(b);
    for (size_t i = 0; i < n.grad.numel(); ++i) {
      t.grad(a).data[i] += n.grad.data[i] * vb2.data[i];
      t.grad(b).data[i] += n.grad.data[i] * va.data[i];
    }
  });
}

Tape::Var Tape::scale(Var a, double c) {
  Tensor out = val(a);
  for (double& v : out.data) v *= c;
  return push(std::move(out), {a}, [a, c](Tape& t, Node& n) {
    for (size_t i = 0; i < n.grad.numel(); ++i)
      t.grad(a).data[i] += n.grad.data[i] * c;
  });
}

Tape::Var Tape::add_const(Var a, double c) {
  Tensor out = val(a);
  for (double& v : out.data) v += c;
  return push(std::move(out), {a}, [a](Tape& t, Node& n) {
    for (size_t i = 0; i < n.grad.numel(); ++i)
      t.grad(a).data[i] += n.grad.data[i];
  });
}

Tape::Var Tape::add_rowvec(Var a, Var bias) {
  const Tensor& va = val(a);
  const Tensor& vb = val(bias);
  check(vb.rows == 1 && vb.cols == va.cols, "add_rowvec: bias shape");
  Tensor out = va;
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j) out.at(i, j) += vb.at(0, j);
  return push(std::move(out), {a, bias}, [a, bias](Tape& t, Node& n) {
    Tensor& ga = t.grad(a);
    Tensor& gb = t.grad(bias);
    for (int i = 0; i < n.grad.rows; ++i)
      for (int j = 0; j < n.grad.cols; ++j) {
        ga.at(i, j) += n.grad.at(i, j);
        gb.at(0, j) += n.grad.at(i, j);
      }
  });
}

Tape::Var Tape::matmul(Var a, Var b) {
  const Tensor& va = val(a);
  const Tensor& vb = val(b);
  check(va.cols == vb.rows, "matmul: inner dims");
  Tensor out(va.rows, vb.cols);
  for (int i = 0; i < va.rows; ++i)
    for (int k = 0; k < va.cols; ++k) {
      double x = va.at(i, k);
      if (x == 0.0) continue;
      const double* brow = &vb.data[static_cast<size_t>(k) * vb.cols];
      double* orow = &out.data[static_cast<size_t>(i) * out.cols];
      for (int j = 0; j < vb.cols; ++j) orow[j] += x * brow[j];
    }
  return push(std::move(out), {a, b}, [a, b](Tape& t, Node& n) {
    const Tensor& va2 = t.val(a);
    const Tensor& vb2 = t.val(b);
    Tensor& ga = t.grad(a);
    Tensor& gb = t.grad(b);
    // dA = dOut * B^T
    for (int i = 0; i < va2.rows; ++i)
      for (int j = 0; j < vb2.cols; ++j) {
        double g = n.grad.at(i, j);
        if (g == 0.0) continue;
        for (int k = 0; k < va2.cols; ++k) ga.at(i, k) += g * vb2.at(k, j);
      }
    // dB = A^T * dOut
    for (int i = 0; i < va2.rows; ++i)
      for (int k = 0; k < va2.cols; ++k) {
        double x = va2.at(i, k);
        if (x == 0.0) continue;
        for (int j = 0; j < vb2.cols; ++j) gb.at(k, j) += x * n.grad.at(i, j);
      }
  });
}

Tape::Var Tape::concat_cols(const std::vector<Var>& parts) {
  check(!parts.empty(), "concat_cols: empty");
  int rows = val(parts[0]).rows;
  int cols = 0;
  for (Var p : parts) {
    check(val(p).rows == rows, "concat_cols: row mismatch");
    cols += val(p).cols;
  }
  Tensor out(rows, cols);
  int off = 0;
  for (Var p : parts) {
    const Tensor& vp = val(p);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < vp.cols; ++j) out.at(i, off + j) = vp.at(i, j);
    off += vp.cols;
  }
  std::vector<Var> parents = parts;
  return push(std::move(out), parents, [parents](Tape& t, Node& n) {
    int off2 = 0;
    for (Var p : parents) {
      Tensor& gp = t.grad(p);
      for (int i = 0; i < gp.rows; ++i)
        for (int j = 0; j < gp.cols; ++j) gp.at(i, j) += n.grad.at(i, off2 + j);
      off2 += gp.cols;
    }
  });
}

Tape::Var Tape::concat_rows(const std::vector<Var>& parts) {
  check(!parts.empty(), "concat_rows: empty");
  int cols = val(parts[0]).cols;
  int rows = 0;
  for (Var p : parts) {
    check(val(p).cols == cols, "concat_rows: col mismatch");
    rows += val(p).rows;
  }
  Tensor out(rows, cols);
  int off = 0;
  for (Var p : parts) {
    const Tensor& vp = val(p);
    for (int i = 0; i < vp.rows; ++i)
      for (int j = 0; j < cols; ++j) out.at(off + i, j) = vp.at(i, j);
    off += vp.rows;
  }
  std::vector<Var> parents = parts;
  return push(std::move(out), parents, [parents](Tape& t, Node& n) {
    int off2 = 0;
    for (Var p : parents) {
      Tensor& gp = t.grad(p);
      for (int i = 0; i < gp.rows; ++i)
        for (int j = 0; j < gp.cols; ++j) gp.at(i, j) += n.grad.at(off2 + i, j);
      off2 += gp.rows;
    }
  });
}

Tape::Var Tape::gather_rows(Var a, std::vector<int> idx) {
  const Tensor& va = val(a);
  Tensor out(static_cast<int>(idx.size()), va.cols);
  for (size_t i = 0; i < idx.size(); ++i)
    for (int j = 0; j < va.cols; ++j) out.at(static_cast<int>(i), j) = va.at(idx[i], j);
  return push(std::move(out), {a}, [a, idx = std::move(idx)](Tape& t, Node& n) {
    Tensor& ga = t.grad(a);
    for (size_t i = 0; i < idx.size(); ++i)
      for (int j = 0; j < ga.cols; ++j)
        ga.at(idx[i], j) += n.grad.at(static_cast<int>(i), j);
  });
}

Tape::Var Tape::segment_sum(Var a, std::vector<int> seg, int n_seg) {
  const Tensor& va = val(a);
  check(static_cast<int>(seg.size()) == va.rows, "segment_sum: seg size");
  Tensor out(n_seg, va.cols);
  for (int i = 0; i < va.rows; ++i)
    for (int j = 0; j < va.cols; ++j) out.at(seg[i], j) += va.at(i, j);
  return push(std::move(out), {a}, [a, seg = std::move(seg)](Tape& t, Node& n) {
    Tensor& ga = t.grad(a);
    for (int i = 0; i < ga.rows; ++i)
      for (int j = 0; j < ga.cols; ++j) ga.at(i, j) += n.grad.at(seg[i], j);
  });
}

Tape::Var Tape::sum_all(Var a) {
  double s = 0.0;
  for (double v : val(a).data) s += v;
  return push(Tensor::scalar(s), {a}, [a](Tape& t, Node& n) {
    double g = n.grad.data[0];
    for (double& v : t.grad(a).data) v += g;
  });
}

Tape::Var Tape::sum_rows(Var a) {
  const Tensor& va = val(a);
  Tensor out(1, va.cols);
  for (int i = 0; i < va.rows; ++i)
    for (int j = 0; j < va.cols; ++j) out.at(0, j) += va.at(i, j);
  return push(std::move(out), {a}, [a](Tape& t, Node& n) {
    Tensor& ga = t.grad(a);
    for (int i = 0; i < ga.rows; ++i)
      for (int j = 0; j < ga.cols; ++j) ga.at(i, j) += n.grad.at(0, j);
  });
}

Tape::Var Tape::mean_rows(Var a) {
  int r = val(a).rows;
  return scale(sum_rows(a), 1.0 / std::max(1, r));
}

Tape::Var Tape::transpose(Var a) {
  const Tensor& va = val(a);
  Tensor out(va.cols, va.rows);
  for (int i = 0; i < va.rows; ++i)
    for (int j = 0; j < va.cols; ++j) out.at(j, i) = va.at(i, j);
  return push(std::move(out), {a}, [a](Tape& t, Node& n) {
    Tensor& ga = t.grad(a);
    for (int i = 0; i < ga.rows; ++i)
      for (int j = 0; j < ga.cols; ++j) ga.at(i, j) += n.grad.at(j, i);
  });
}

Tape::Var Tape::silu(Var a) {
  Tensor out = val(a);
  for (double& v : out.data) {
    double s = 1.0 / (1.0 + std::exp(-v));
    v = v * s;
  }
  return push(std::move(out), {a}, [a](Tape& t, Node& n) {
    const Tensor& va = t.val(a);
    Tensor& ga = t.grad(a);
    for (size_t i = 0; i < va.numel(); ++i) {
      double x = va.data[i];
      double s = 1.0 / (1.0 + std::exp(-x));
      ga.data[i] += n.grad.data[i] * (s + x * s * (1.0 - s));
    }
  });
}

Tape::Var Tape::relu(Var a) {
  Tensor out = val(a);
  for (double& v : out.data) v = v > 0 ? v : 0.0;
  return push(std::move(out), {a}, [a](Tape& t, Node& n) {
    const Tensor& va = t.val(a);
    Tensor& ga = t.grad(a);
    for (size_t i = 0; i < va.numel(); ++i)
      if (va.data[i] > 0) ga.data[i] += n.grad.data[i];
  });
}

Tape::Var Tape::sigmoid(Var a) {
  Tensor out = val(a);
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  return push(std::move(out), {a}, [a](Tape& t, Node& n) {
    Tensor& ga = t.grad(a);
    for (size_t i = 0; i < n.value.numel(); ++i) {
      double y = n.value.data[i];
      ga.data[i] += n.grad.data[i] * y * (1.0 - y);
    }
  });
}

Tape::Var Tape::tanh_(Var a) {
  Tensor out = val(a);
  for (double& v : out.data) v = std::tanh(v);
  return push(std::move(out), {a}, [a](Tape& t, Node& n) {
    Tensor& ga = t.grad(a);
    for (size_t i = 0; i < n.value.numel(); ++i) {
      double y = n.value.data[i];
      ga.data[i] += n.grad.data[i] * (1.0 - y * y);
    }
  });
}

Tape::Var Tape::exp_(Var a) {
  Tensor out = val(a);
  for (double& v : out.data) v = std::exp(v);
  return push(std::move(out), {a}, [a](Tape& t, Node& n) {
    Tensor& ga = t.grad(a);
    for (size_t i = 0; i < n.value.numel(); ++i)
      ga.data[i] += n.grad.data[i] * n.value.data[i];
  });
}

Tape::Var Tape::log_(Var a) {
  Tensor out = val(a);
  for (double& v : out.data) v = std::log(v);
  return push(std::move(out), {a}, [a](Tape& t, Node& n) {
    const Tensor& va = t.val(a);
    Tensor& ga = t.grad(a);
    for (size_t i = 0; i < va.numel(); ++i)
      ga.data[i] += n.grad.data[i] / va.data[i];
  });
}

Tape::Var Tape::square(Var a) {
  Tensor out = val(a);
  for (double& v : out.data) v = v * v;
  return push(std::move(out), {a}, [a](Tape& t, Node& n) {
    const Tensor& va = t.val(a);
    Tensor& ga = t.grad(a);
    for (size_t i = 0; i < va.numel(); ++i)
      ga.data[i] += n.grad.data[i] * 2.0 * va.data[i];
  });
}

Tape::Var Tape::cross_entropy_rows(Var logits, std::vector<int> targets) {
  const Tensor& vl = val(logits);
  check(static_cast<int>(targets.size()) == vl.rows, "cross_entropy_rows: targets");
  double loss = 0.0;
  for (int i = 0; i < vl.rows; ++i) {
    double mx = vl.at(i, 0);
    for (int j = 1; j < vl.cols; ++j) mx = std::max(mx, vl.at(i, j));
    double lse = 0.0;
    for (int j = 0; j < vl.cols; ++j) lse += std::exp(vl.at(i, j) - mx);
    lse = mx + std::log(lse);
    loss += lse - vl.at(i, targets[i]);
  }
  return push(Tensor::scalar(loss), {logits},
              [logits, targets = std::move(targets)](Tape& t, Node& n) {
                const Tensor& vl2 = t.val(logits);
                Tensor& gl = t.grad(logits);
                double g = n.grad.data[0];
                for (int i = 0; i < vl2.rows; ++i) {
                  double mx = vl2.at(i, 0);
                  for (int j = 1; j < vl2.cols; ++j) mx = std::max(mx, vl2.at(i, j));
                  double z = 0.0;
                  for (int j = 0; j < vl2.cols; ++j) z += std::exp(vl2.at(i, j) - mx);
                  for (int j = 0; j < vl2.cols; ++j) {
                    double p = std::exp(vl2.at(i, j) - mx) / z;
                    gl.at(i, j) += g * (p - (j == targets[i] ? 1.0 : 0.0));
                  }
                }
              });
}

Tape::Var Tape::bce_logits_sum(Var logits, Tensor targets) {
  const Tensor& vl = val(logits);
  check(vl.same_shape(targets), "bce_logits_sum: shape mismatch");
  double loss = 0.0;
  for (size_t i = 0; i < vl.numel(); ++i) {
    double x = vl.data[i], t = targets.data[i];
    loss += std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x)));
  }
  return push(Tensor::scalar(loss), {logits},
              [logits, targets = std::move(targets)](Tape& t, Node& n) {
                const Tensor& vl2 = t.val(logits);
                Tensor& gl = t.grad(logits);
                double g = n.grad.data[0];
                for (size_t i = 0; i < vl2.numel(); ++i) {
                  double s = 1.0 / (1.0 + std::exp(-vl2.data[i]));
                  gl.data[i] += g * (s - targets.data[i]);
                }
              });
}

Tape::Var Tape::mse_sum(Var a, Var b) {
  check(val(a).same_shape(val(b)), "mse_sum: shape mismatch");
  const Tensor& va = val(a);
  const Tensor& vb = val(b);
  double loss = 0.0;
  for (size_t i = 0; i < va.numel(); ++i) {
    double d = va.data[i] - vb.data[i];
    loss += d * d;
  }
  return push(Tensor::scalar(loss), {a, b}, [a, b](Tape& t, Node& n) {
    const Tensor& va2 = t.val(a);
    const Tensor& vb2 = t.val(b);
    double g = n.grad.data[0];
    for (size_t i = 0; i < va2.numel(); ++i) {
      double d = 2.0 * (va2.data[i] - vb2.data[i]);
      t.grad(a).data[i] += g * d;
      t.grad(b).data[i] -= g * d;
    }
  });
}

}  // namespace fragflow::neural
