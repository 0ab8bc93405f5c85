#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace fragflow::neural {

// Dense row-major matrix of doubles. Scalars are [1,1], row vectors [1,c].
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}
  static Tensor scalar(double v) {
    Tensor t(1, 1);
    t.data[0] = v;
    return t;
  }
  static Tensor row(const std::vector<double>& v) {
    Tensor t(1, static_cast<int>(v.size()));
    t.data.assign(v.begin(), v.end());
    return t;
  }
  double& at(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
  double at(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }
  size_t numel() const { return data.size(); }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
};

class NonFiniteGradient : public std::runtime_error {
 public:
  NonFiniteGradient() : std::runtime_error("non-finite gradient") {}
};

// Reverse-mode tape. Ops append nodes; backward() runs the recorded closures
// in reverse. The tape is cleared between training steps.
class Tape {
 public:
  using Var = int;

  Var input(Tensor value, bool requires_grad = false);
  const Tensor& val(Var v) const { return nodes_[v].value; }
  Tensor& grad(Var v) { return nodes_[v].grad; }

  // Seeds d(loss)=1 and accumulates gradients. loss must be [1,1].
  void backward(Var loss);
  void clear();
  size_t size() const { return nodes_.size(); }

  // --- ops ---
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);            // elementwise
  Var scale(Var a, double c);
  Var add_const(Var a, double c);
  Var add_rowvec(Var a, Var bias);  // [r,c] + [1,c]
  Var matmul(Var a, Var b);
  Var concat_cols(const std::vector<Var>& parts);
  Var concat_rows(const std::vector<Var>& parts);
  Var gather_rows(Var a, std::vector<int> idx);
  Var segment_sum(Var a, std::vector<int> seg, int n_seg);
  Var sum_all(Var a);
  Var sum_rows(Var a);    // [r,c] -> [1,c]
  Var mean_rows(Var a);   // [r,c] -> [1,c]
  Var transpose(Var a);
  Var silu(Var a);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var tanh_(Var a);
  Var exp_(Var a);
  Var log_(Var a);
  Var square(Var a);
  // sum over rows of -log softmax(row)[target[row]]
  Var cross_entropy_rows(Var logits, std::vector<int> targets);
  // numerically stable sum of BCE-with-logits against 0/1 targets
  Var bce_logits_sum(Var logits, Tensor targets);
  Var mse_sum(Var a, Var b);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<Var> parents;
    std::function<void(Tape&, Node&)> back;
    bool requires_grad = false;
  };
  Var push(Tensor value, std::vector<Var> parents,
           std::function<void(Tape&, Node&)> back);
  void ensure_grad(Var v);
  std::vector<Node> nodes_;

  friend struct NodeAccess;
};

}  // namespace fragflow::neural
