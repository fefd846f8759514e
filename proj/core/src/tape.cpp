#include "ffgt/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace ffgt {

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
  if (numel() != data.size())
    throw std::invalid_argument("Tensor: data length does not match shape");
}

std::size_t Tensor::numel() const {
  std::size_t n = 1;
  for (const auto d : shape) n *= d;
  return n;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  Tensor t;
  t.shape = std::move(shape);
  t.data.assign(t.numel(), 0.0);
  return t;
}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.data.assign(1, v);
  return t;
}

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

CMap map2(const Tensor& t) {
  return CMap(t.data.data(), static_cast<Eigen::Index>(t.rows()),
              static_cast<Eigen::Index>(t.cols()));
}

MMap map2(Tensor& t) {
  return MMap(t.data.data(), static_cast<Eigen::Index>(t.rows()),
              static_cast<Eigen::Index>(t.cols()));
}

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

Var Tape::push(Tensor value, std::function<void(Tape&)> back) {
  nodes_.push_back(Node{std::move(value), Tensor{}, std::move(back)});
  return static_cast<Var>(nodes_.size()) - 1;
}

Var Tape::leaf(Tensor value) { return push(std::move(value), {}); }

Var Tape::matmul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.shape.size() == 2 && tb.shape.size() == 2, "matmul: rank-2 operands required");
  require(ta.cols() == tb.rows(), "matmul: inner dimensions differ");
  Tensor out = Tensor::zeros({ta.rows(), tb.cols()});
  map2(out).noalias() = map2(ta) * map2(tb);
  const Var v = push(std::move(out), nullptr);
  nodes_[v].back = [a, b, v](Tape& t) {
    map2(t.nodes_[a].grad).noalias() += map2(t.nodes_[v].grad) * map2(t.nodes_[b].value).transpose();
    map2(t.nodes_[b].grad).noalias() += map2(t.nodes_[a].value).transpose() * map2(t.nodes_[v].grad);
  };
  return v;
}

Var Tape::matmul_nt(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.shape.size() == 2 && tb.shape.size() == 2, "matmul_nt: rank-2 operands required");
  require(ta.cols() == tb.cols(), "matmul_nt: inner dimensions differ");
  Tensor out = Tensor::zeros({ta.rows(), tb.rows()});
  map2(out).noalias() = map2(ta) * map2(tb).transpose();
  const Var v = push(std::move(out), nullptr);
  nodes_[v].back = [a, b, v](Tape& t) {
    map2(t.nodes_[a].grad).noalias() += map2(t.nodes_[v].grad) * map2(t.nodes_[b].value);
    map2(t.nodes_[b].grad).noalias() += map2(t.nodes_[v].grad).transpose() * map2(t.nodes_[a].value);
  };
  return v;
}

Var Tape::add(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.same_shape(tb), "add: shape mismatch");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += tb.data[i];
  const Var v = push(std::move(out), nullptr);
  nodes_[v].back = [a, b, v](Tape& t) {
    const auto& g = t.nodes_[v].grad.data;
    auto& ga = t.nodes_[a].grad.data;
    auto& gb = t.nodes_[b].grad.data;
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] += g[i];
    }
  };
  return v;
}

Var Tape::add_rowvec(Var a, Var bias) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(bias);
  require(ta.shape.size() == 2 && tb.shape.size() == 1, "add_rowvec: [n,d] + [d] required");
  require(ta.cols() == tb.shape[0], "add_rowvec: width mismatch");
  Tensor out = ta;
  const std::size_t n = ta.rows(), d = ta.cols();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out.data[i * d + j] += tb.data[j];
  const Var v = push(std::move(out), nullptr);
  nodes_[v].back = [a, bias, v, n, d](Tape& t) {
    const auto& g = t.nodes_[v].grad.data;
    auto& ga = t.nodes_[a].grad.data;
    auto& gb = t.nodes_[bias].grad.data;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        ga[i * d + j] += g[i * d + j];
        gb[j] += g[i * d + j];
      }
  };
  return v;
}

Var Tape::mul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.same_shape(tb), "mul: shape mismatch");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= tb.data[i];
  const Var v = push(std::move(out), nullptr);
  nodes_[v].back = [a, b, v](Tape& t) {
    const auto& g = t.nodes_[v].grad.data;
    const auto& va = t.nodes_[a].value.data;
    const auto& vb = t.nodes_[b].value.data;
    auto& ga = t.nodes_[a].grad.data;
    auto& gb = t.nodes_[b].grad.data;
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i] * vb[i];
      gb[i] += g[i] * va[i];
    }
  };
  return v;
}

Var Tape::scale(Var a, double c) {
  Tensor out = value(a);
  for (auto& x : out.data) x *= c;
  const Var v = push(std::move(out), nullptr);
  nodes_[v].back = [a, v, c](Tape& t) {
    const auto& g = t.nodes_[v].grad.data;
    auto& ga = t.nodes_[a].grad.data;
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
  };
  return v;
}

Var Tape::relu(Var a) {
  Tensor out = value(a);
  for (auto& x : out.data) x = x > 0.0 ? x : 0.0;
  const Var v = push(std::move(out), nullptr);
  nodes_[v].back = [a, v](Tape& t) {
    const auto& g = t.nodes_[v].grad.data;
    const auto& va = t.nodes_[a].value.data;
    auto& ga = t.nodes_[a].grad.data;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (va[i] > 0.0) ga[i] += g[i];
  };
  return v;
}

Var Tape::concat_cols(const std::vector<Var>& xs) {
  require(!xs.empty(), "concat_cols: empty input");
  const std::size_t n = value(xs[0]).rows();
  std::size_t total = 0;
  for (const Var x : xs) {
    require(value(x).shape.size() == 2 && value(x).rows() == n,
            "concat_cols: row counts differ");
    total += value(x).cols();
  }
  Tensor out = Tensor::zeros({n, total});
  std::size_t off = 0;
  for (const Var x : xs) {
    const Tensor& tx = value(x);
    const std::size_t d = tx.cols();
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(tx.data.begin() + i * d, d, out.data.begin() + i * total + off);
    off += d;
  }
  const Var v = push(std::move(out), nullptr);
  nodes_[v].back = [xs, v, n, total](Tape& t) {
    const auto& g = t.nodes_[v].grad.data;
    std::size_t off = 0;
    for (const Var x : xs) {
      const std::size_t d = t.nodes_[x].value.cols();
      auto& gx = t.nodes_[x].grad.data;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += g[i * total + off + j];
      off += d;
    }
  };
  return v;
}

Var Tape::row_slice(Var a, std::size_t start, std::size_t count) {
  const Tensor& ta = value(a);
  require(ta.shape.size() == 2, "row_slice: rank-2 operand required");
  require(start + count <= ta.rows(), "row_slice: range out of bounds");
  const std::size_t d = ta.cols();
  Tensor out = Tensor::zeros({count, d});
  std::copy_n(ta.data.begin() + start * d, count * d, out.data.begin());
  const Var v = push(std::move(out), nullptr);
  nodes_[v].back = [a, v, start, count, d](Tape& t) {
    const auto& g = t.nodes_[v].grad.data;
    auto& ga = t.nodes_[a].grad.data;
    for (std::size_t i = 0; i < count * d; ++i) ga[start * d + i] += g[i];
  };
  return v;
}

Var Tape::embedding_lookup(Var table, const std::vector<int>& ids) {
  const Tensor& tt = value(table);
  require(tt.shape.size() == 2, "embedding_lookup: rank-2 table required");
  const std::size_t v_rows = tt.rows(), d = tt.cols();
  for (const int id : ids)
    require(id >= 0 && static_cast<std::size_t>(id) < v_rows,
            "embedding_lookup: id out of range");
  Tensor out = Tensor::zeros({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::copy_n(tt.data.begin() + static_cast<std::size_t>(ids[i]) * d, d,
                out.data.begin() + i * d);
  const Var v = push(std::move(out), nullptr);
  nodes_[v].back = [table, v, ids, d](Tape& t) {
    const auto& g = t.nodes_[v].grad.data;
    auto& gt = t.nodes_[table].grad.data;
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t j = 0; j < d; ++j)
        gt[static_cast<std::size_t>(ids[i]) * d + j] += g[i * d + j];
  };
  return v;
}

Var Tape::gather_entries(Var table, std::shared_ptr<const std::vector<int>> flat_ids,
                         std::size_t col, std::size_t out_rows, std::size_t out_cols) {
  const Tensor& tt = value(table);
  require(tt.shape.size() == 2 && col < tt.cols(), "gather_entries: bad column");
  require(flat_ids && flat_ids->size() == out_rows * out_cols,
          "gather_entries: id count mismatch");
  const std::size_t width = tt.cols();
  const int limit = static_cast<int>(tt.rows());
  Tensor out = Tensor::zeros({out_rows, out_cols});
  for (std::size_t i = 0; i < flat_ids->size(); ++i) {
    const int id = (*flat_ids)[i];
    if (id < 0) continue;
    require(id < limit, "gather_entries: id out of range");
    out.data[i] = tt.data[static_cast<std::size_t>(id) * width + col];
  }
  const Var v = push(std::move(out), nullptr);
  nodes_[v].back = [table, v, ids = std::move(flat_ids), col, width](Tape& t) {
    const auto& g = t.nodes_[v].grad.data;
    auto& gt = t.nodes_[table].grad.data;
    for (std::size_t i = 0; i < ids->size(); ++i) {
      const int id = (*ids)[i];
      if (id >= 0) gt[static_cast<std::size_t>(id) * width + col] += g[i];
    }
  };
  return v;
}

Var Tape::masked_row_softmax(Var logits, const FocalMask* mask) {
  const Tensor& tl = value(logits);
  require(tl.shape.size() == 2, "masked_row_softmax: rank-2 logits required");
  const std::size_t n = tl.rows(), c = tl.cols();
  if (mask) {
    require(mask->n == static_cast<int>(n) && n == c,
            "masked_row_softmax: mask size mismatch");
    for (const auto& row : mask->rows)
      if (row.empty())
        throw std::logic_error("masked_row_softmax: empty mask row (self-inclusion violated)");
  }
  Tensor out = Tensor::zeros({n, c});
  for (std::size_t i = 0; i < n; ++i) {
    const double* in = tl.data.data() + i * c;
    double* o = out.data.data() + i * c;
    if (mask) {
      const auto& row = mask->rows[i];
      double mx = in[row[0]];
      for (const int j : row) mx = std::max(mx, in[j]);
      double z = 0.0;
      for (const int j : row) {
        o[j] = std::exp(in[j] - mx);
        z += o[j];
      }
      const double inv = 1.0 / z;
      for (const int j : row) o[j] *= inv;
    } else {
      double mx = in[0];
      for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, in[j]);
      double z = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        o[j] = std::exp(in[j] - mx);
        z += o[j];
      }
      const double inv = 1.0 / z;
      for (std::size_t j = 0; j < c; ++j) o[j] *= inv;
    }
  }
  const Var v = push(std::move(out), nullptr);
  nodes_[v].back = [logits, v, mask, n, c](Tape& t) {
    const auto& g = t.nodes_[v].grad.data;
    const auto& s = t.nodes_[v].value.data;
    auto& gl = t.nodes_[logits].grad.data;
    for (std::size_t i = 0; i < n; ++i) {
      const double* gr = g.data() + i * c;
      const double* sr = s.data() + i * c;
      double* glr = gl.data() + i * c;
      if (mask) {
        const auto& row = mask->rows[i];
        double dot = 0.0;
        for (const int j : row) dot += gr[j] * sr[j];
        for (const int j : row) glr[j] += sr[j] * (gr[j] - dot);
      } else {
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += gr[j] * sr[j];
        for (std::size_t j = 0; j < c; ++j) glr[j] += sr[j] * (gr[j] - dot);
      }
    }
  };
  return v;
}

Var Tape::layer_norm(Var x, Var gamma, Var beta) {
  const Tensor& tx = value(x);
  const Tensor& tg = value(gamma);
  const Tensor& tb = value(beta);
  require(tx.shape.size() == 2, "layer_norm: rank-2 input required");
  const std::size_t n = tx.rows(), d = tx.cols();
  require(tg.shape.size() == 1 && tg.shape[0] == d, "layer_norm: gamma width mismatch");
  require(tb.shape.size() == 1 && tb.shape[0] == d, "layer_norm: beta width mismatch");

  Tensor out = Tensor::zeros({n, d});
  // Cache (x - mu)/sigma and 1/sigma per row for the backward pass.
  auto xhat = std::make_shared<std::vector<double>>(n * d);
  auto inv_sigma = std::make_shared<std::vector<double>>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xr = tx.data.data() + i * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    (*inv_sigma)[i] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (xr[j] - mu) * inv;
      (*xhat)[i * d + j] = h;
      out.data[i * d + j] = tg.data[j] * h + tb.data[j];
    }
  }
  const Var v = push(std::move(out), nullptr);
  nodes_[v].back = [x, gamma, beta, v, n, d, xhat, inv_sigma](Tape& t) {
    const auto& g = t.nodes_[v].grad.data;
    const auto& gam = t.nodes_[gamma].value.data;
    auto& gx = t.nodes_[x].grad.data;
    auto& gg = t.nodes_[gamma].grad.data;
    auto& gb = t.nodes_[beta].grad.data;
    const double dd = static_cast<double>(d);
    for (std::size_t i = 0; i < n; ++i) {
      const double* gr = g.data() + i * d;
      const double* hr = xhat->data() + i * d;
      double sum_dh = 0.0, sum_dh_h = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double dh = gr[j] * gam[j];
        sum_dh += dh;
        sum_dh_h += dh * hr[j];
        gg[j] += gr[j] * hr[j];
        gb[j] += gr[j];
      }
      const double inv = (*inv_sigma)[i];
      for (std::size_t j = 0; j < d; ++j) {
        const double dh = gr[j] * gam[j];
        gx[i * d + j] += inv * (dh - sum_dh / dd - hr[j] * sum_dh_h / dd);
      }
    }
  };
  return v;
}

Var Tape::cross_entropy(Var logits, std::vector<int> labels,
                        std::vector<double> class_weights) {
  const Tensor& tl = value(logits);
  require(tl.shape.size() == 2, "cross_entropy: rank-2 logits required");
  const std::size_t n = tl.rows(), c = tl.cols();
  require(labels.size() == n, "cross_entropy: one label per row required");
  for (const int y : labels)
    require(y >= 0 && static_cast<std::size_t>(y) < c, "cross_entropy: label out of range");
  if (class_weights.empty()) class_weights.assign(c, 1.0);
  require(class_weights.size() == c, "cross_entropy: one weight per class required");

  auto softmax = std::make_shared<std::vector<double>>(n * c);
  double weight_total = 0.0;
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* in = tl.data.data() + i * c;
    double mx = in[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, in[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(in[j] - mx);
    const double lse = mx + std::log(z);
    const double w = class_weights[labels[i]];
    weight_total += w;
    loss += w * (lse - in[labels[i]]);
    for (std::size_t j = 0; j < c; ++j)
      (*softmax)[i * c + j] = std::exp(in[j] - lse);
  }
  loss /= weight_total;
  const Var v = push(Tensor::scalar(loss), nullptr);
  nodes_[v].back = [logits, v, n, c, softmax, labels = std::move(labels),
                    class_weights = std::move(class_weights), weight_total](Tape& t) {
    const double gl = t.nodes_[v].grad.data[0];
    auto& gx = t.nodes_[logits].grad.data;
    for (std::size_t i = 0; i < n; ++i) {
      const double coeff = gl * class_weights[labels[i]] / weight_total;
      for (std::size_t j = 0; j < c; ++j) {
        double p = (*softmax)[i * c + j];
        if (j == static_cast<std::size_t>(labels[i])) p -= 1.0;
        gx[i * c + j] += coeff * p;
      }
    }
  };
  return v;
}

Var Tape::sum(Var a) {
  double s = 0.0;
  for (const double x : value(a).data) s += x;
  const Var v = push(Tensor::scalar(s), nullptr);
  nodes_[v].back = [a, v](Tape& t) {
    const double g = t.nodes_[v].grad.data[0];
    for (auto& x : t.nodes_[a].grad.data) x += g;
  };
  return v;
}

void Tape::backward(Var loss) {
  if (!value(loss).is_scalar())
    throw std::invalid_argument("backward: loss must be scalar");
  for (auto& node : nodes_) {
    node.grad.shape = node.value.shape;
    node.grad.data.assign(node.value.data.size(), 0.0);
  }
  nodes_[loss].grad.data[0] = 1.0;
  for (Var v = loss; v >= 0; --v) {
    if (nodes_[v].back) nodes_[v].back(*this);
  }
}

Tensor softmax_negbias_reference(const Tensor& logits, const FocalMask* mask) {
  const std::size_t n = logits.rows(), c = logits.cols();
  Tensor biased = logits;
  if (mask) {
    const auto dense = mask->dense();
    for (std::size_t i = 0; i < n * c; ++i)
      if (!dense[i]) biased.data[i] += -1e9;
  }
  Tensor out = Tensor::zeros({n, c});
  for (std::size_t i = 0; i < n; ++i) {
    const double* in = biased.data.data() + i * c;
    double mx = in[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, in[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(in[j] - mx);
    for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] = std::exp(in[j] - mx) / z;
  }
  return out;
}

}  // namespace ffgt
