#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "abxi/rng.hpp"
#include "abxi/types.hpp"

// Minimal reverse-mode differentiation over row-major matrices. A graph is
// built implicitly by the ops below; `backward` walks it once in reverse
// topological order and accumulates into `grad` of every node that requires
// it. Parameters are long-lived leaf nodes; intermediate nodes die with the
// last Var referencing them.
namespace abxi::ag {

struct Node {
  Matrix value;
  Matrix grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  void accumulate(const Matrix& g);
  Matrix& grad_buffer();  // zero-initialised on first use
};

using Var = std::shared_ptr<Node>;

Var constant(Matrix value);
Var parameter(Matrix value);

// Disables graph construction within its scope (evaluation).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

// Seeds d(root)/d(root) = 1; root must be 1x1.
void backward(const Var& root);

// Forward-time state shared by stochastic ops.
struct Context {
  bool training = false;
  Rng* rng = nullptr;
};

Var add(const Var& a, const Var& b);
Var sum(std::span<const Var> terms);
Var scale(const Var& a, double s);
Var hadamard(const Var& a, const Var& b);
Var matmul(const Var& a, const Var& b);     // a * b
Var matmul_nt(const Var& a, const Var& b);  // a * b^T
Var add_row(const Var& a, const Var& row);  // broadcast 1 x n over rows
Var linear(const Var& x, const Var& w, const Var& bias);  // x*w (+ bias)
Var gather_rows(const Var& table, std::span<const int> rows);
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps);
Var gelu(const Var& x);
Var swish(const Var& x, double beta);
Var dropout(const Var& x, double p, const Context& ctx);

// Batched multi-head causal self-attention over `batch` sequences of
// `seq_len` rows each (rows laid out sequence-major). Key j is visible to
// query i iff j <= i and key_valid[j]. Queries with no visible key output 0.
struct AttentionLayout {
  int batch = 0;
  int seq_len = 0;
  std::vector<bool> key_valid;  // batch * seq_len
};
Var causal_attention(const Var& q, const Var& k, const Var& v, const AttentionLayout& layout,
                     int n_heads);

// Sum over targets of weight * InfoNCE(h_row, candidates / tau), where the
// first candidate of each target is the positive. Candidate rows index
// `table`. Returns a 1x1 node.
struct InfoNceTarget {
  int row = 0;
  std::vector<int> candidates;
  double weight = 1.0;
};
Var info_nce(const Var& h, const Var& table, std::span<const InfoNceTarget> targets, double tau);

// Elementwise helpers shared by ops and their reference implementations.
double gelu_value(double x);
double swish_value(double x, double beta);

}  // namespace abxi::ag
