#pragma once

// Straight-line forward pass over nested vectors for one unpadded sequence
// bundle. Reads parameter values by name and recomputes everything with
// explicit loops; dropout is assumed off.

#include <cmath>
#include <string>
#include <vector>

#include "abxi/alignment.hpp"
#include "abxi/model.hpp"

namespace abxi::reference {

using Mat = std::vector<std::vector<double>>;

inline Mat from(const Matrix& m) {
  Mat out(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  }
  return out;
}

inline Mat param(const AbxiModel& model, const std::string& name) {
  const ag::Var* v = model.find_parameter(name);
  if (v == nullptr) throw std::runtime_error("missing parameter " + name);
  return from((*v)->value);
}

inline bool has(const AbxiModel& model, const std::string& name) { return model.find_parameter(name) != nullptr; }

inline Mat mul(const Mat& a, const Mat& b) {
  Mat out(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < b.size(); ++k) {
      for (std::size_t j = 0; j < b[0].size(); ++j) out[i][j] += a[i][k] * b[k][j];
    }
  }
  return out;
}

inline Mat transpose(const Mat& a) {
  Mat out(a[0].size(), std::vector<double>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[0].size(); ++j) out[j][i] = a[i][j];
  }
  return out;
}

inline Mat plus(const Mat& a, const Mat& b) {
  Mat out = a;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[0].size(); ++j) out[i][j] += b[i][j];
  }
  return out;
}

inline Mat add_bias(const Mat& a, const Mat& bias) {
  Mat out = a;
  for (auto& r : out) {
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias[0][j];
  }
  return out;
}

inline Mat map(const Mat& a, double (*f)(double)) {
  Mat out = a;
  for (auto& r : out) {
    for (auto& v : r) v = f(v);
  }
  return out;
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }
inline double swish1(double x) { return x / (1.0 + std::exp(-x)); }

inline Mat layer_norm(const Mat& x, const Mat& gain, const Mat& bias, double eps) {
  Mat out = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double n = static_cast<double>(x[i].size());
    double mean = 0;
    for (double v : x[i]) mean += v;
    mean /= n;
    double var = 0;
    for (double v : x[i]) var += (v - mean) * (v - mean);
    var /= n;
    for (std::size_t j = 0; j < x[i].size(); ++j) {
      out[i][j] = (x[i][j] - mean) / std::sqrt(var + eps) * gain[0][j] + bias[0][j];
    }
  }
  return out;
}

inline Mat ln(const AbxiModel& m, const std::string& name, const Mat& x) {
  return layer_norm(x, param(m, name + ".gain"), param(m, name + ".bias"), m.config().ln_eps);
}

inline Mat attention(const Mat& q, const Mat& k, const Mat& v, const TokenSeq& seq, int heads) {
  const std::size_t T = q.size(), d = q[0].size(), dh = d / heads;
  Mat out(T, std::vector<double>(d, 0.0));
  for (int h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < T; ++i) {
      std::vector<double> w(T, 0.0);
      double mx = -1e300;
      bool any = false;
      for (std::size_t j = 0; j <= i; ++j) {
        if (seq[j].is_pad()) continue;
        double s = 0;
        for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) s += q[i][c] * k[j][c];
        w[j] = s / std::sqrt(static_cast<double>(dh));
        mx = std::max(mx, w[j]);
        any = true;
      }
      if (!any) continue;
      double z = 0;
      for (std::size_t j = 0; j <= i; ++j) {
        if (seq[j].is_pad()) continue;
        w[j] = std::exp(w[j] - mx);
        z += w[j];
      }
      for (std::size_t j = 0; j <= i; ++j) {
        if (seq[j].is_pad()) continue;
        for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) out[i][c] += w[j] / z * v[j][c];
      }
    }
  }
  return out;
}

inline Mat lora(const AbxiModel& m, const std::string& name, const Mat& x) {
  return mul(mul(x, transpose(param(m, name + ".down"))), transpose(param(m, name + ".up")));
}

inline Mat projector(const AbxiModel& m, const std::string& name, const Mat& x) {
  Mat gate = map(mul(x, param(m, name + ".w1")), swish1);
  const Mat lin = mul(x, param(m, name + ".w2"));
  for (std::size_t i = 0; i < gate.size(); ++i) {
    for (std::size_t j = 0; j < gate[i].size(); ++j) gate[i][j] *= lin[i][j];
  }
  return mul(gate, param(m, name + ".w3"));
}

inline Mat embed(const AbxiModel& m, const TokenSeq& seq, const std::vector<int>& pos) {
  const Mat items = param(m, "item_embedding"), positions = param(m, "position_embedding");
  Mat out;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    std::vector<double> row = items[seq[t].item];
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += positions[pos[t]][j];
    out.push_back(row);
  }
  return out;
}

inline Mat encode(const AbxiModel& m, const Mat& e, const TokenSeq& seq, const char* tag) {
  const bool separate = m.config().variant.domain_adapter == DomainAdapter::kThreeEncoders;
  const std::string enc = separate ? std::string("encoder_") + tag : "encoder";
  Mat x = e;
  for (int l = 0; l < m.config().n_layers; ++l) {
    const std::string p = enc + "." + std::to_string(l) + ".";
    auto lin = [&](const Mat& in, const std::string& w, const std::string& b) {
      return add_bias(mul(in, param(m, p + w)), param(m, p + b));
    };
    const Mat att = lin(attention(lin(x, "attn.wq", "attn.bq"), lin(x, "attn.wk", "attn.bk"),
                                  lin(x, "attn.wv", "attn.bv"), seq, m.config().n_heads),
                        "attn.wo", "attn.bo");
    const Mat h = ln(m, p + "ln_attn", plus(x, att));
    Mat sum = plus(h, lin(map(lin(h, "ffn.w1", "ffn.b1"), gelu), "ffn.w2", "ffn.b2"));
    if (has(m, p + "dlora_" + tag + ".down")) sum = plus(sum, lora(m, p + "dlora_" + tag, h));
    if (has(m, p + "dproj_" + tag + ".w1")) sum = plus(sum, projector(m, p + "dproj_" + tag, h));
    x = ln(m, p + "ln_ffn", sum);
  }
  return x;
}

struct Output {
  Mat rec_a, rec_b;
};

inline Output forward(const AbxiModel& m, const SequenceBundle& b) {
  const Mat hx = encode(m, embed(m, b.seq_x, b.pos_x), b.seq_x, "x");
  const Mat ha = encode(m, embed(m, b.seq_a, b.pos_a), b.seq_a, "a");
  const Mat hb = encode(m, embed(m, b.seq_b, b.pos_b), b.seq_b, "b");
  Output out;
  for (const char* d : {"a", "b"}) {
    const Mat& h = d[0] == 'a' ? ha : hb;
    Mat spec_in = h;
    if (has(m, std::string("proj_") + d + ".w1")) spec_in = plus(h, projector(m, std::string("proj_") + d, h));
    const Mat spec = ln(m, std::string("ln_p_") + d, spec_in);
    Mat inv = hx;
    if (has(m, "proj_i.w1")) inv = plus(inv, projector(m, "proj_i", hx));
    if (has(m, std::string("ilora_") + d + ".down")) inv = plus(inv, lora(m, std::string("ilora_") + d, hx));
    if (has(m, std::string("proj_x2") + d + ".w1")) inv = plus(inv, projector(m, std::string("proj_x2") + d, hx));
    (d[0] == 'a' ? out.rec_a : out.rec_b) = plus(spec, ln(m, std::string("ln_i2") + d, inv));
  }
  return out;
}

}  // namespace abxi::reference
