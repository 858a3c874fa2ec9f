#include "dfir/attention.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dfir/ops.hpp"

namespace dfir {
namespace {

void require_tokens(const Tensor& t, const char* name) {
  if (!t.defined() || t.rank() != 2) {
    throw ShapeError(name, std::string("topk_attention: ") + name + " must be a (N, d) tensor");
  }
}

inline double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

Tensor SparseAttnPlan::dense_weights() const {
  Tensor a({tokens, tokens});
  for (std::size_t i = 0; i < tokens; ++i) {
    auto idx = row_indices(i);
    auto w = row_weights(i);
    for (std::size_t t = 0; t < k; ++t) a[i * tokens + idx[t]] = w[t];
  }
  return a;
}

std::vector<std::uint32_t> topk_indices(std::span<const double> scores, std::size_t k) {
  const std::size_t n = scores.size();
  if (k < 1 || k > n) {
    throw ShapeError("k", "topk_indices: K=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  if (k < n) {
    auto before = [&](std::uint32_t a, std::uint32_t b) {
      return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
    };
    std::nth_element(order.begin(), order.begin() + static_cast<long>(k - 1), order.end(), before);
    order.resize(k);
    std::sort(order.begin(), order.end());
  }
  return order;
}

Tensor topk_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t top_k,
                      SparseAttnPlan* plan, bool keep_scores) {
  require_tokens(q, "q");
  require_tokens(k, "k");
  require_tokens(v, "v");
  const std::size_t n = q.dim(0), d = q.dim(1), dv = v.dim(1);
  if (k.dim(0) != n || v.dim(0) != n) {
    throw ShapeError("tokens", "topk_attention: q, k and v must share the token count");
  }
  if (k.dim(1) != d) throw ShapeError("head_dim", "topk_attention: q and k head dims differ");
  if (top_k < 1 || top_k > n) {
    throw ShapeError("k", "topk_attention: K=" + std::to_string(top_k) + " outside [1, " +
                              std::to_string(n) + "]");
  }

  if (plan) {
    plan->tokens = n;
    plan->k = top_k;
    plan->indices.assign(n * top_k, 0);
    plan->weights.assign(n * top_k, 0.0);
    plan->scores.clear();
    if (keep_scores) plan->scores.assign(n * n, 0.0);
  }

  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  const double* qd = q.data().data();
  const double* kd = k.data().data();
  const double* vd = v.data().data();
  Tensor out({n, dv}, DType::f64);
  double* od = out.data().data();

  std::vector<double> row(n);
  std::vector<double> w(top_k);
  for (std::size_t i = 0; i < n; ++i) {
    const double* qi = qd + i * d;
    for (std::size_t j = 0; j < n; ++j) row[j] = dot(qi, kd + j * d, d) * inv_sqrt_d;
    const std::vector<std::uint32_t> sel = topk_indices(row, top_k);

    double peak = -INFINITY;
    for (std::uint32_t j : sel) peak = std::max(peak, row[j]);
    double total = 0.0;
    for (std::size_t t = 0; t < top_k; ++t) {
      w[t] = std::exp(row[sel[t]] - peak);
      total += w[t];
    }
    double* oi = od + i * dv;
    for (std::size_t t = 0; t < top_k; ++t) {
      w[t] /= total;
      const double* vj = vd + static_cast<std::size_t>(sel[t]) * dv;
      for (std::size_t c = 0; c < dv; ++c) oi[c] += w[t] * vj[c];
    }
    if (plan) {
      std::copy(sel.begin(), sel.end(), plan->indices.begin() + static_cast<long>(i * top_k));
      std::copy(w.begin(), w.end(), plan->weights.begin() + static_cast<long>(i * top_k));
      if (keep_scores) std::copy(row.begin(), row.end(), plan->scores.begin() + static_cast<long>(i * n));
    }
  }
  out.set_dtype(promote(promote(q.dtype(), k.dtype()), v.dtype()));
  return out;
}

AttentionGrads topk_attention_backward(const Tensor& q, const Tensor& k, const Tensor& v,
                                       const SparseAttnPlan& plan, const Tensor& grad_output) {
  const std::size_t n = q.dim(0), d = q.dim(1), dv = v.dim(1), kk = plan.k;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  AttentionGrads g{Tensor(q.shape()), Tensor(k.shape()), Tensor(v.shape())};
  std::vector<double> da(kk);
  for (std::size_t i = 0; i < n; ++i) {
    auto idx = plan.row_indices(i);
    auto a = plan.row_weights(i);
    const double* gi = grad_output.data().data() + i * dv;
    double weighted = 0.0;
    for (std::size_t t = 0; t < kk; ++t) {
      const std::size_t j = idx[t];
      da[t] = dot(gi, v.data().data() + j * dv, dv);
      weighted += a[t] * da[t];
      for (std::size_t c = 0; c < dv; ++c) g.v[j * dv + c] += a[t] * gi[c];
    }
    for (std::size_t t = 0; t < kk; ++t) {
      const std::size_t j = idx[t];
      const double ds = a[t] * (da[t] - weighted) * inv_sqrt_d;
      for (std::size_t c = 0; c < d; ++c) {
        g.q[i * d + c] += ds * k[j * d + c];
        g.k[j * d + c] += ds * q[i * d + c];
      }
    }
  }
  return g;
}

std::size_t k_from_gate(double pooled_logit, std::size_t tokens) {
  // The gate probability is held at single precision so that a saturated
  // gate (logit around +20) reaches K = N rather than stopping one short.
  const double p = static_cast<float>(sigmoid(pooled_logit));
  const double raw = std::floor(static_cast<double>(tokens) * p);
  if (!(raw >= 1.0)) return 1;  // also catches NaN
  return std::min(tokens, static_cast<std::size_t>(raw));
}

namespace ad {
namespace {

// (B, C, H, W) channel-major head slice -> (N, d) token-major.
Tensor gather_head(const Tensor& x, std::size_t b, std::size_t head, std::size_t d) {
  const std::size_t n = x.height() * x.width();
  Tensor out({n, d});
  for (std::size_t c = 0; c < d; ++c) {
    const double* src = x.data().data() + (b * x.channels() + head * d + c) * n;
    for (std::size_t t = 0; t < n; ++t) out[t * d + c] = src[t];
  }
  return out;
}

void scatter_head(const Tensor& tokens, Tensor& x, std::size_t b, std::size_t head, std::size_t d) {
  const std::size_t n = x.height() * x.width();
  for (std::size_t c = 0; c < d; ++c) {
    double* dst = x.data().data() + (b * x.channels() + head * d + c) * n;
    for (std::size_t t = 0; t < n; ++t) dst[t] = tokens[t * d + c];
  }
}

}  // namespace

Var topk_attention(const Var& q, const Var& k, const Var& v, std::size_t heads,
                   const std::vector<std::size_t>& top_k, std::vector<SparseAttnPlan>* plans) {
  const Tensor& qt = q.tensor();
  const Tensor& kt = k.tensor();
  const Tensor& vt = v.tensor();
  require_rank4(qt, "topk_attention q");
  if (kt.shape() != qt.shape() || vt.shape() != qt.shape()) {
    throw ShapeError("shape", "topk_attention: q, k and v must share a shape");
  }
  const std::size_t B = qt.batch(), C = qt.channels();
  if (heads < 1 || C % heads != 0) {
    throw ShapeError("heads", "topk_attention: heads=" + std::to_string(heads) + " must divide channels=" +
                                  std::to_string(C));
  }
  if (top_k.size() != B) throw ShapeError("batch", "topk_attention: need one K per batch sample");
  const std::size_t d = C / heads;

  auto saved = std::make_shared<std::vector<SparseAttnPlan>>(B * heads);
  Tensor out(qt.shape(), DType::f64);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      Tensor o = dfir::topk_attention(gather_head(qt, b, h, d), gather_head(kt, b, h, d),
                                      gather_head(vt, b, h, d), top_k[b], &(*saved)[b * heads + h]);
      scatter_head(o, out, b, h, d);
    }
  }
  out.set_dtype(qt.dtype());
  if (plans) *plans = *saved;

  return q.tape().record("topk_attention", std::move(out), {q, k, v}, [q, k, v, heads, d, saved](const Value& g) {
    const Tensor& go = std::get<Tensor>(g);
    const Tensor& qt = q.tensor();
    const Tensor& kt = k.tensor();
    const Tensor& vt = v.tensor();
    Tensor gq(qt.shape()), gk(qt.shape()), gv(qt.shape());
    for (std::size_t b = 0; b < qt.batch(); ++b) {
      for (std::size_t h = 0; h < heads; ++h) {
        AttentionGrads ag = topk_attention_backward(gather_head(qt, b, h, d), gather_head(kt, b, h, d),
                                                    gather_head(vt, b, h, d), (*saved)[b * heads + h],
                                                    gather_head(go, b, h, d));
        scatter_head(ag.q, gq, b, h, d);
        scatter_head(ag.k, gk, b, h, d);
        scatter_head(ag.v, gv, b, h, d);
      }
    }
    return std::vector<Value>{std::move(gq), std::move(gk), std::move(gv)};
  });
}

}  // namespace ad
}  // namespace dfir
