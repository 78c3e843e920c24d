#include "abxi/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include <fmt/format.h>

#include "abxi/error.hpp"

namespace abxi::ag {
namespace {

thread_local bool g_grad_enabled = true;

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DataError(fmt::format("{}: shape mismatch {}x{} vs {}x{}", op, a.rows(), a.cols(), b.rows(),
                                b.cols()));
  }
}

Var make(Matrix value, std::vector<Var> parents, std::function<void(Node&)> fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p->requires_grad;
  }
  if (needs) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward_fn = std::move(fn);
  }
  return n;
}

bool wants(const Node& self, std::size_t i) { return self.parents[i]->requires_grad; }

}  // namespace

void Node::accumulate(const Matrix& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Matrix& Node::grad_buffer() {
  if (grad.size() == 0) grad = Matrix::Zero(value.rows(), value.cols());
  return grad;
}

Var constant(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return n;
}

Var parameter(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return n;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

void backward(const Var& root) {
  if (root->value.rows() != 1 || root->value.cols() != 1) {
    throw DataError("backward: root must be a scalar");
  }
  if (!root->requires_grad) return;
  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.size() != 0) n->backward_fn(*n);
  }
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a->value, b->value, "add");
  return make(a->value + b->value, {a, b}, [](Node& self) {
    for (std::size_t i = 0; i < 2; ++i) {
      if (wants(self, i)) self.parents[i]->accumulate(self.grad);
    }
  });
}

Var sum(std::span<const Var> terms) {
  if (terms.empty()) throw DataError("sum: no terms");
  Matrix total = terms[0]->value;
  for (std::size_t i = 1; i < terms.size(); ++i) {
    check_same_shape(total, terms[i]->value, "sum");
    total += terms[i]->value;
  }
  return make(std::move(total), std::vector<Var>(terms.begin(), terms.end()), [](Node& self) {
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      if (wants(self, i)) self.parents[i]->accumulate(self.grad);
    }
  });
}

Var scale(const Var& a, double s) {
  return make(a->value * s, {a}, [s](Node& self) { self.parents[0]->accumulate(self.grad * s); });
}

Var hadamard(const Var& a, const Var& b) {
  check_same_shape(a->value, b->value, "hadamard");
  return make(a->value.cwiseProduct(b->value), {a, b}, [](Node& self) {
    const Matrix& av = self.parents[0]->value;
    const Matrix& bv = self.parents[1]->value;
    if (wants(self, 0)) self.parents[0]->accumulate(self.grad.cwiseProduct(bv));
    if (wants(self, 1)) self.parents[1]->accumulate(self.grad.cwiseProduct(av));
  });
}

Var matmul(const Var& a, const Var& b) {
  if (a->value.cols() != b->value.rows()) {
    throw DataError(fmt::format("matmul: {}x{} * {}x{}", a->value.rows(), a->value.cols(),
                                b->value.rows(), b->value.cols()));
  }
  return make(a->value * b->value, {a, b}, [](Node& self) {
    const Matrix& av = self.parents[0]->value;
    const Matrix& bv = self.parents[1]->value;
    if (wants(self, 0)) self.parents[0]->accumulate(self.grad * bv.transpose());
    if (wants(self, 1)) self.parents[1]->accumulate(av.transpose() * self.grad);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a->value.cols() != b->value.cols()) {
    throw DataError(fmt::format("matmul_nt: {}x{} * ({}x{})^T", a->value.rows(), a->value.cols(),
                                b->value.rows(), b->value.cols()));
  }
  return make(a->value * b->value.transpose(), {a, b}, [](Node& self) {
    const Matrix& av = self.parents[0]->value;
    const Matrix& bv = self.parents[1]->value;
    if (wants(self, 0)) self.parents[0]->accumulate(self.grad * bv);
    if (wants(self, 1)) self.parents[1]->accumulate(self.grad.transpose() * av);
  });
}

Var add_row(const Var& a, const Var& row) {
  if (row->value.rows() != 1 || row->value.cols() != a->value.cols()) {
    throw DataError("add_row: bias must be 1 x cols");
  }
  Matrix out = a->value.rowwise() + row->value.row(0);
  return make(std::move(out), {a, row}, [](Node& self) {
    if (wants(self, 0)) self.parents[0]->accumulate(self.grad);
    if (wants(self, 1)) self.parents[1]->accumulate(self.grad.colwise().sum());
  });
}

Var linear(const Var& x, const Var& w, const Var& bias) {
  Var y = matmul(x, w);
  return bias ? add_row(y, bias) : y;
}

Var gather_rows(const Var& table, std::span<const int> rows) {
  const Matrix& t = table->value;
  Matrix out(static_cast<Eigen::Index>(rows.size()), t.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= t.rows()) {
      throw DataError(fmt::format("gather_rows: index {} out of range [0, {})", rows[i], t.rows()));
    }
    out.row(static_cast<Eigen::Index>(i)) = t.row(rows[i]);
  }
  std::vector<int> idx(rows.begin(), rows.end());
  return make(std::move(out), {table}, [idx = std::move(idx)](Node& self) {
    Matrix& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < idx.size(); ++i) g.row(idx[i]) += self.grad.row(static_cast<Eigen::Index>(i));
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  const Matrix& xv = x->value;
  const Eigen::Index n = xv.rows(), d = xv.cols();
  Matrix xhat(n, d);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mean = xv.row(r).mean();
    const double var = (xv.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mean) * inv_std(r);
  }
  Matrix out = (xhat.array().rowwise() * gain->value.row(0).array()).rowwise() + bias->value.row(0).array();
  return make(std::move(out), {x, gain, bias},
              [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                const Matrix& g = self.grad;
                const Matrix& gain_v = self.parents[1]->value;
                if (wants(self, 0)) {
                  Matrix dxhat = g.array().rowwise() * gain_v.row(0).array();
                  const double inv_d = 1.0 / static_cast<double>(g.cols());
                  Matrix dx(g.rows(), g.cols());
                  for (Eigen::Index r = 0; r < g.rows(); ++r) {
                    const double m1 = dxhat.row(r).sum() * inv_d;
                    const double m2 = dxhat.row(r).dot(xhat.row(r)) * inv_d;
                    dx.row(r) = inv_std(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
                  }
                  self.parents[0]->accumulate(dx);
                }
                if (wants(self, 1)) self.parents[1]->accumulate(g.cwiseProduct(xhat).colwise().sum());
                if (wants(self, 2)) self.parents[2]->accumulate(g.colwise().sum());
              });
}

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double swish_value(double x, double beta) { return x / (1.0 + std::exp(-beta * x)); }

Var gelu(const Var& x) {
  Matrix out = x->value.unaryExpr([](double v) { return gelu_value(v); });
  return make(std::move(out), {x}, [](Node& self) {
    constexpr double kInvSqrt2Pi = 0.3989422804014327;
    const Matrix& xv = self.parents[0]->value;
    Matrix d = xv.unaryExpr([](double v) {
      return 0.5 * (1.0 + std::erf(v / std::sqrt(2.0))) + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
    });
    self.parents[0]->accumulate(self.grad.cwiseProduct(d));
  });
}

Var swish(const Var& x, double beta) {
  Matrix out = x->value.unaryExpr([beta](double v) { return swish_value(v, beta); });
  return make(std::move(out), {x}, [beta](Node& self) {
    const Matrix& xv = self.parents[0]->value;
    Matrix d = xv.unaryExpr([beta](double v) {
      const double s = 1.0 / (1.0 + std::exp(-beta * v));
      return s + beta * v * s * (1.0 - s);
    });
    self.parents[0]->accumulate(self.grad.cwiseProduct(d));
  });
}

Var dropout(const Var& x, double p, const Context& ctx) {
  if (!ctx.training || p <= 0.0) return x;
  if (p >= 1.0) throw ConfigError("dropout rate must be < 1");
  if (ctx.rng == nullptr) throw ConfigError("dropout in training mode needs an RNG stream");
  std::bernoulli_distribution keep(1.0 - p);
  const double s = 1.0 / (1.0 - p);
  Matrix mask(x->value.rows(), x->value.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(*ctx.rng) ? s : 0.0;
  Matrix out = x->value.cwiseProduct(mask);
  return make(std::move(out), {x}, [mask = std::move(mask)](Node& self) {
    self.parents[0]->accumulate(self.grad.cwiseProduct(mask));
  });
}

Var causal_attention(const Var& q, const Var& k, const Var& v, const AttentionLayout& layout,
                     int n_heads) {
  const Eigen::Index rows = q->value.rows(), d = q->value.cols();
  const int T = layout.seq_len;
  if (rows != static_cast<Eigen::Index>(layout.batch) * T ||
      layout.key_valid.size() != static_cast<std::size_t>(rows)) {
    throw DataError("causal_attention: layout does not match input rows");
  }
  check_same_shape(q->value, k->value, "causal_attention");
  check_same_shape(q->value, v->value, "causal_attention");
  if (n_heads <= 0 || d % n_heads != 0) throw ConfigError("d must be divisible by n_heads");
  const Eigen::Index dh = d / n_heads;
  const double scale_f = 1.0 / std::sqrt(static_cast<double>(dh));

  // probs[b * n_heads + h] is the T x T attention matrix (zero where masked).
  auto probs = std::make_shared<std::vector<Matrix>>(static_cast<std::size_t>(layout.batch) * n_heads);
  Matrix out = Matrix::Zero(rows, d);
  for (int b = 0; b < layout.batch; ++b) {
    const Eigen::Index r0 = static_cast<Eigen::Index>(b) * T;
    for (int h = 0; h < n_heads; ++h) {
      const Eigen::Index c0 = h * dh;
      Matrix s = q->value.block(r0, c0, T, dh) * k->value.block(r0, c0, T, dh).transpose() * scale_f;
      Matrix& p = (*probs)[static_cast<std::size_t>(b) * n_heads + h];
      p = Matrix::Zero(T, T);
      for (int i = 0; i < T; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j <= i; ++j) {
          if (layout.key_valid[r0 + j]) mx = std::max(mx, s(i, j));
        }
        if (!std::isfinite(mx)) continue;
        double z = 0.0;
        for (int j = 0; j <= i; ++j) {
          if (layout.key_valid[r0 + j]) z += (p(i, j) = std::exp(s(i, j) - mx));
        }
        p.row(i) /= z;
      }
      out.block(r0, c0, T, dh) = p * v->value.block(r0, c0, T, dh);
    }
  }
  return make(std::move(out), {q, k, v}, [probs, T, dh, n_heads, scale_f, batch = layout.batch](Node& self) {
    const Matrix& qv = self.parents[0]->value;
    const Matrix& kv = self.parents[1]->value;
    const Matrix& vv = self.parents[2]->value;
    Matrix dq = Matrix::Zero(qv.rows(), qv.cols());
    Matrix dk = Matrix::Zero(qv.rows(), qv.cols());
    Matrix dv = Matrix::Zero(qv.rows(), qv.cols());
    for (int b = 0; b < batch; ++b) {
      const Eigen::Index r0 = static_cast<Eigen::Index>(b) * T;
      for (int h = 0; h < n_heads; ++h) {
        const Eigen::Index c0 = h * dh;
        const Matrix& p = (*probs)[static_cast<std::size_t>(b) * n_heads + h];
        const Matrix dout = self.grad.block(r0, c0, T, dh);
        dv.block(r0, c0, T, dh) = p.transpose() * dout;
        const Matrix dp = dout * vv.block(r0, c0, T, dh).transpose();
        const Eigen::VectorXd row_dot = (dp.cwiseProduct(p)).rowwise().sum();
        const Matrix ds = (p.array() * (dp.colwise() - row_dot).array()).matrix() * scale_f;
        dq.block(r0, c0, T, dh) = ds * kv.block(r0, c0, T, dh);
        dk.block(r0, c0, T, dh) = ds.transpose() * qv.block(r0, c0, T, dh);
      }
    }
    if (wants(self, 0)) self.parents[0]->accumulate(dq);
    if (wants(self, 1)) self.parents[1]->accumulate(dk);
    if (wants(self, 2)) self.parents[2]->accumulate(dv);
  });
}

Var info_nce(const Var& h, const Var& table, std::span<const InfoNceTarget> targets, double tau) {
  if (!(tau > 0.0)) throw ConfigError("temperature must be positive");
  const Matrix& hv = h->value;
  const Matrix& ev = table->value;
  if (hv.cols() != ev.cols()) throw DataError("info_nce: representation/table width mismatch");
  std::vector<InfoNceTarget> tg(targets.begin(), targets.end());
  std::vector<Eigen::VectorXd> probs(tg.size());
  double loss = 0.0;
  for (std::size_t t = 0; t < tg.size(); ++t) {
    const auto& target = tg[t];
    if (target.row < 0 || target.row >= hv.rows() || target.candidates.empty()) {
      throw DataError("info_nce: malformed target");
    }
    Eigen::VectorXd s(static_cast<Eigen::Index>(target.candidates.size()));
    for (std::size_t c = 0; c < target.candidates.size(); ++c) {
      const int idx = target.candidates[c];
      if (idx < 0 || idx >= ev.rows()) throw DataError(fmt::format("info_nce: candidate {} out of range", idx));
      s(static_cast<Eigen::Index>(c)) = hv.row(target.row).dot(ev.row(idx)) / tau;
    }
    const double mx = s.maxCoeff();
    Eigen::VectorXd e = (s.array() - mx).exp();
    const double z = e.sum();
    loss += target.weight * (mx + std::log(z) - s(0));
    probs[t] = e / z;
  }
  if (!std::isfinite(loss)) throw NumericalError("info_nce: non-finite loss");
  Matrix out(1, 1);
  out(0, 0) = loss;
  return make(std::move(out), {h, table}, [tg = std::move(tg), probs = std::move(probs), tau](Node& self) {
    const double up = self.grad(0, 0);
    const Matrix& hv = self.parents[0]->value;
    const Matrix& ev = self.parents[1]->value;
    const bool dh_wanted = wants(self, 0), de_wanted = wants(self, 1);
    Matrix* dh = dh_wanted ? &self.parents[0]->grad_buffer() : nullptr;
    Matrix* de = de_wanted ? &self.parents[1]->grad_buffer() : nullptr;
    for (std::size_t t = 0; t < tg.size(); ++t) {
      const auto& target = tg[t];
      for (std::size_t c = 0; c < target.candidates.size(); ++c) {
        const double coeff =
            up * target.weight * (probs[t](static_cast<Eigen::Index>(c)) - (c == 0 ? 1.0 : 0.0)) / tau;
        if (coeff == 0.0) continue;
        const int idx = target.candidates[c];
        if (dh) dh->row(target.row) += coeff * ev.row(idx);
        if (de) de->row(idx) += coeff * hv.row(target.row);
      }
    }
  });
}

}  // namespace abxi::ag
