//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "erpflow/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "erpflow/rng.hpp"

namespace erpflow::ad {

namespace {
constexpr double kLnEps = 1e-5;
}

NodeId Tape::input(Tensor value) {
  return push(std::move(value), true, nullptr, "input");
}

NodeId Tape::constant(Tensor value) {
  return push(std::move(value), false, nullptr, "constant");
}

NodeId Tape::param(const Tensor* value) {
  Node n;
  n.ref = value;
  n.needs = true;
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

NodeId Tape::push(Tensor value, bool needs_grad,
                  std::function<void(Tape&, const Tensor&)> back,
                  const char* op_name) {
  if (!value.all_finite())
    throw std::runtime_error(std::string("non-finite value in ") + op_name);
  Node n;
  n.owned = std::move(value);
  n.needs = needs_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

void Tape::accumulate(NodeId id, const Tensor& delta) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.needs) return;
  if (n.grad.empty()) n.grad = Tensor(val(id).rows(), val(id).cols());
  for (std::size_t i = 0; i < delta.size(); ++i) n.grad.raw()[i] += delta.raw()[i];
}

const Tensor& Tape::value(NodeId id) const { return val(id); }

Tensor Tape::grad(NodeId id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.grad.empty()) return n.grad;
  return Tensor(val(id).rows(), val(id).cols());
}

void Tape::backward(NodeId root) {
  if (val(root).rows() != 1 || val(root).cols() != 1)
    throw std::invalid_argument("backward root must be scalar");
  Tensor seed(1, 1);
  seed.at(0, 0) = 1.0;
  nodes_[static_cast<std::size_t>(root)].grad = seed;
  for (NodeId id = root; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty() || !n.back) continue;
    n.back(*this, n.grad);
  }
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  Tensor C(A.rows(), B.cols());
  gemm_nn(A, B, C);
  return push(std::move(C), needs(a) || needs(b),
              [a, b](Tape& t, const Tensor& d) {
                if (t.needs(a)) {
                  Tensor da(t.val(a).rows(), t.val(a).cols());
                  gemm_nt(d, t.val(b), da);
                  t.accumulate(a, da);
                }
                if (t.needs(b)) {
                  Tensor db(t.val(b).rows(), t.val(b).cols());
                  gemm_tn(t.val(a), d, db);
                  t.accumulate(b, db);
                }
              },
              "matmul");
}

NodeId Tape::matmul_nt(NodeId a, NodeId b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  Tensor C(A.rows(), B.rows());
  gemm_nt(A, B, C);
  return push(std::move(C), needs(a) || needs(b),
              [a, b](Tape& t, const Tensor& d) {
                if (t.needs(a)) {
                  Tensor da(t.val(a).rows(), t.val(a).cols());
                  gemm_nn(d, t.val(b), da);
                  t.accumulate(a, da);
                }
                if (t.needs(b)) {
                  Tensor db(t.val(b).rows(), t.val(b).cols());
                  gemm_tn(d, t.val(a), db);
                  t.accumulate(b, db);
                }
              },
              "matmul_nt");
}

NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  if (!A.same_shape(B)) throw std::invalid_argument("add shape mismatch");
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C.raw()[i] += B.raw()[i];
  return push(std::move(C), needs(a) || needs(b),
              [a, b](Tape& t, const Tensor& d) {
                t.accumulate(a, d);
                t.accumulate(b, d);
              },
              "add");
}

NodeId Tape::sub(NodeId a, NodeId b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  if (!A.same_shape(B)) throw std::invalid_argument("sub shape mismatch");
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C.raw()[i] -= B.raw()[i];
  return push(std::move(C), needs(a) || needs(b),
              [a, b](Tape& t, const Tensor& d) {
                t.accumulate(a, d);
                if (!t.needs(b)) return;
                Tensor neg = d;
                for (double& v : neg.raw()) v = -v;
                t.accumulate(b, neg);
              },
              "sub");
}

NodeId Tape::mul(NodeId a, NodeId b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  if (!A.same_shape(B)) throw std::invalid_argument("mul shape mismatch");
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C.raw()[i] *= B.raw()[i];
  return push(std::move(C), needs(a) || needs(b),
              [a, b](Tape& t, const Tensor& d) {
                if (t.needs(a)) {
                  Tensor da = d;
                  for (std::size_t i = 0; i < da.size(); ++i)
                    da.raw()[i] *= t.val(b).raw()[i];
                  t.accumulate(a, da);
                }
                if (t.needs(b)) {
                  Tensor db = d;
                  for (std::size_t i = 0; i < db.size(); ++i)
                    db.raw()[i] *= t.val(a).raw()[i];
                  t.accumulate(b, db);
                }
              },
              "mul");
}

NodeId Tape::scale(NodeId a, double s) {
  Tensor C = val(a);
  for (double& v : C.raw()) v *= s;
  return push(std::move(C), needs(a),
              [a, s](Tape& t, const Tensor& d) {
                Tensor da = d;
                for (double& v : da.raw()) v *= s;
                t.accumulate(a, da);
              },
              "scale");
}

NodeId Tape::add_rowvec(NodeId m, NodeId v) {
  const Tensor& M = val(m);
  const Tensor& V = val(v);
  if (V.rows() != 1 || V.cols() != M.cols())
    throw std::invalid_argument("add_rowvec shape mismatch");
  Tensor C = M;
  for (int r = 0; r < C.rows(); ++r)
    for (int c = 0; c < C.cols(); ++c) C.at(r, c) += V.at(0, c);
  return push(std::move(C), needs(m) || needs(v),
              [m, v](Tape& t, const Tensor& d) {
                t.accumulate(m, d);
                if (!t.needs(v)) return;
                Tensor dv(1, d.cols());
                for (int r = 0; r < d.rows(); ++r)
                  for (int c = 0; c < d.cols(); ++c) dv.at(0, c) += d.at(r, c);
                t.accumulate(v, dv);
              },
              "add_rowvec");
}

NodeId Tape::relu(NodeId a) {
  Tensor C = val(a);
  for (double& x : C.raw()) x = x > 0.0 ? x : 0.0;
  return push(std::move(C), needs(a),
              [a](Tape& t, const Tensor& d) {
                Tensor da = d;
                for (std::size_t i = 0; i < da.size(); ++i)
                  if (t.val(a).raw()[i] <= 0.0) da.raw()[i] = 0.0;
                t.accumulate(a, da);
              },
              "relu");
}

NodeId Tape::sigmoid(NodeId a) {
  Tensor C = val(a);
  for (double& x : C.raw()) x = 1.0 / (1.0 + std::exp(-x));
  const NodeId out = push(std::move(C), needs(a), nullptr, "sigmoid");
  nodes_[static_cast<std::size_t>(out)].back = [a, out](Tape& t,
                                                        const Tensor& d) {
    Tensor da = d;
    const Tensor& y = t.val(out);
    for (std::size_t i = 0; i < da.size(); ++i) {
      const double s = y.raw()[i];
      da.raw()[i] *= s * (1.0 - s);
    }
    t.accumulate(a, da);
  };
  return out;
}

NodeId Tape::softmax_rows(NodeId a) {
  Tensor C = val(a);
  for (int r = 0; r < C.rows(); ++r) {
    double mx = C.at(r, 0);
    for (int c = 1; c < C.cols(); ++c) mx = std::max(mx, C.at(r, c));
    double z = 0.0;
    for (int c = 0; c < C.cols(); ++c) {
      C.at(r, c) = std::exp(C.at(r, c) - mx);
      z += C.at(r, c);
    }
    for (int c = 0; c < C.cols(); ++c) C.at(r, c) /= z;
  }
  const NodeId out = push(std::move(C), needs(a), nullptr, "softmax_rows");
  nodes_[static_cast<std::size_t>(out)].back = [a, out](Tape& t,
                                                        const Tensor& d) {
    const Tensor& y = t.val(out);
    Tensor da(y.rows(), y.cols());
    for (int r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (int c = 0; c < y.cols(); ++c) dot += d.at(r, c) * y.at(r, c);
      for (int c = 0; c < y.cols(); ++c)
        da.at(r, c) = y.at(r, c) * (d.at(r, c) - dot);
    }
    t.accumulate(a, da);
  };
  return out;
}

NodeId Tape::layer_norm(NodeId x, NodeId gamma, NodeId beta) {
  const Tensor& X = val(x);
  const Tensor& G = val(gamma);
  const Tensor& B = val(beta);
  if (G.rows() != 1 || G.cols() != X.cols() || !G.same_shape(B))
    throw std::invalid_argument("layer_norm shape mismatch");
  const int rows = X.rows(), cols = X.cols();
  Tensor xhat(rows, cols);
  Tensor inv_std(rows, 1);
  Tensor C(rows, cols);
  for (int r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (int c = 0; c < cols; ++c) mean += X.at(r, c);
    mean /= cols;
    double var = 0.0;
    for (int c = 0; c < cols; ++c) {
      const double dv = X.at(r, c) - mean;
      var += dv * dv;
    }
    var /= cols;
    const double is = 1.0 / std::sqrt(var + kLnEps);
    inv_std.at(r, 0) = is;
    for (int c = 0; c < cols; ++c) {
      xhat.at(r, c) = (X.at(r, c) - mean) * is;
      C.at(r, c) = G.at(0, c) * xhat.at(r, c) + B.at(0, c);
    }
  }
  return push(
      std::move(C), needs(x) || needs(gamma) || needs(beta),
      [x, gamma, beta, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](Tape& t, const Tensor& d) {
        const int rows = d.rows(), cols = d.cols();
        if (t.needs(beta)) {
          Tensor db(1, cols);
          for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) db.at(0, c) += d.at(r, c);
          t.accumulate(beta, db);
        }
        if (t.needs(gamma)) {
          Tensor dg(1, cols);
          for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
              dg.at(0, c) += d.at(r, c) * xhat.at(r, c);
          t.accumulate(gamma, dg);
        }
        if (t.needs(x)) {
          const Tensor& G = t.val(gamma);
          Tensor dx(rows, cols);
          for (int r = 0; r < rows; ++r) {
            double mean_g = 0.0, mean_gx = 0.0;
            for (int c = 0; c < cols; ++c) {
              const double gv = d.at(r, c) * G.at(0, c);
              mean_g += gv;
              mean_gx += gv * xhat.at(r, c);
            }
            mean_g /= cols;
            mean_gx /= cols;
            for (int c = 0; c < cols; ++c) {
              const double gv = d.at(r, c) * G.at(0, c);
              dx.at(r, c) =
                  (gv - mean_g - xhat.at(r, c) * mean_gx) * inv_std.at(r, 0);
            }
          }
          t.accumulate(x, dx);
        }
      },
      "layer_norm");
}

NodeId Tape::embedding_rows(NodeId table, std::vector<int> ids) {
  const Tensor& T = val(table);
  Tensor C(static_cast<int>(ids.size()), T.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || ids[r] >= T.rows())
      throw std::out_of_range("embedding row out of range");
    for (int c = 0; c < T.cols(); ++c)
      C.at(static_cast<int>(r), c) = T.at(ids[r], c);
  }
  return push(std::move(C), needs(table),
              [table, ids = std::move(ids)](Tape& t, const Tensor& d) {
                Tensor dt(t.val(table).rows(), t.val(table).cols());
                for (std::size_t r = 0; r < ids.size(); ++r)
                  for (int c = 0; c < d.cols(); ++c)
                    dt.at(ids[r], c) += d.at(static_cast<int>(r), c);
                t.accumulate(table, dt);
              },
              "embedding_rows");
}

NodeId Tape::sum(NodeId a) {
  const Tensor& A = val(a);
  Tensor C(1, 1);
  for (const double v : A.raw()) C.at(0, 0) += v;
  return push(std::move(C), needs(a),
              [a](Tape& t, const Tensor& d) {
                Tensor da(t.val(a).rows(), t.val(a).cols());
                da.fill(d.at(0, 0));
                t.accumulate(a, da);
              },
              "sum");
}

NodeId Tape::mean(NodeId a) {
  const Tensor& A = val(a);
  if (A.size() == 0) throw std::invalid_argument("mean of empty tensor");
  Tensor C(1, 1);
  for (const double v : A.raw()) C.at(0, 0) += v;
  C.at(0, 0) /= static_cast<double>(A.size());
  return push(std::move(C), needs(a),
              [a](Tape& t, const Tensor& d) {
                Tensor da(t.val(a).rows(), t.val(a).cols());
                da.fill(d.at(0, 0) / static_cast<double>(da.size()));
                t.accumulate(a, da);
              },
              "mean");
}

NodeId Tape::concat_cols(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat of nothing");
  const int rows = val(parts[0]).rows();
  int cols = 0;
  bool any = false;
  for (const NodeId p : parts) {
    if (val(p).rows() != rows)
      throw std::invalid_argument("concat_cols row mismatch");
    cols += val(p).cols();
    any = any || needs(p);
  }
  Tensor C(rows, cols);
  int off = 0;
  for (const NodeId p : parts) {
    const Tensor& P = val(p);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < P.cols(); ++c) C.at(r, off + c) = P.at(r, c);
    off += P.cols();
  }
  return push(std::move(C), any,
              [parts](Tape& t, const Tensor& d) {
                int off = 0;
                for (const NodeId p : parts) {
                  const int pc = t.val(p).cols();
                  if (t.needs(p)) {
                    Tensor dp(d.rows(), pc);
                    for (int r = 0; r < d.rows(); ++r)
                      for (int c = 0; c < pc; ++c) dp.at(r, c) = d.at(r, off + c);
                    t.accumulate(p, dp);
                  }
                  off += pc;
                }
              },
              "concat_cols");
}

NodeId Tape::slice_cols(NodeId a, int begin, int end) {
  const Tensor& A = val(a);
  if (begin < 0 || end > A.cols() || begin >= end)
    throw std::invalid_argument("slice_cols range invalid");
  Tensor C(A.rows(), end - begin);
  for (int r = 0; r < A.rows(); ++r)
    for (int c = begin; c < end; ++c) C.at(r, c - begin) = A.at(r, c);
  return push(std::move(C), needs(a),
              [a, begin](Tape& t, const Tensor& d) {
                Tensor da(t.val(a).rows(), t.val(a).cols());
                for (int r = 0; r < d.rows(); ++r)
                  for (int c = 0; c < d.cols(); ++c)
                    da.at(r, begin + c) = d.at(r, c);
                t.accumulate(a, da);
              },
              "slice_cols");
}

NodeId Tape::transpose(NodeId a) {
  const Tensor& A = val(a);
  Tensor C(A.cols(), A.rows());
  for (int r = 0; r < A.rows(); ++r)
    for (int c = 0; c < A.cols(); ++c) C.at(c, r) = A.at(r, c);
  return push(std::move(C), needs(a),
              [a](Tape& t, const Tensor& d) {
                Tensor da(d.cols(), d.rows());
                for (int r = 0; r < d.rows(); ++r)
                  for (int c = 0; c < d.cols(); ++c) da.at(c, r) = d.at(r, c);
                t.accumulate(a, da);
              },
              "transpose");
}

NodeId Tape::dropout(NodeId a, Tensor mask) {
  const Tensor& A = val(a);
  if (!A.same_shape(mask)) throw std::invalid_argument("dropout shape mismatch");
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C.raw()[i] *= mask.raw()[i];
  return push(std::move(C), needs(a),
              [a, mask = std::move(mask)](Tape& t, const Tensor& d) {
                Tensor da = d;
                for (std::size_t i = 0; i < da.size(); ++i)
                  da.raw()[i] *= mask.raw()[i];
                t.accumulate(a, da);
              },
              "dropout");
}

NodeId Tape::mask_diag(NodeId a, double value) {
  const Tensor& A = val(a);
  if (A.rows() != A.cols()) throw std::invalid_argument("mask_diag needs square");
  Tensor C = A;
  for (int r = 0; r < C.rows(); ++r) C.at(r, r) = value;
  return push(std::move(C), needs(a),
              [a](Tape& t, const Tensor& d) {
                Tensor da = d;
                for (int r = 0; r < da.rows(); ++r) da.at(r, r) = 0.0;
                t.accumulate(a, da);
              },
              "mask_diag");
}

NodeId Tape::append_zero_col(NodeId a) {
  const Tensor& A = val(a);
  Tensor C(A.rows(), A.cols() + 1);
  for (int r = 0; r < A.rows(); ++r)
    for (int c = 0; c < A.cols(); ++c) C.at(r, c) = A.at(r, c);
  return push(std::move(C), needs(a),
              [a](Tape& t, const Tensor& d) {
                Tensor da(d.rows(), d.cols() - 1);
                for (int r = 0; r < d.rows(); ++r)
                  for (int c = 0; c < da.cols(); ++c) da.at(r, c) = d.at(r, c);
                t.accumulate(a, da);
              },
              "append_zero_col");
}

Tensor dropout_mask(int rows, int cols, double rate, std::uint64_t seed,
                    std::uint64_t layer_id, std::uint64_t step) {
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("dropout rate must be in [0, 1)");
  Tensor m(rows, cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < m.size(); ++i)
    m.raw()[i] = counter_real(seed, layer_id, step, i) < rate ? 0.0 : keep_scale;
  return m;
}

}  // namespace erpflow::ad
