#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace kgt::ad {

template <typename Scalar>
class Tape;

// Lightweight handle into a tape. Vectors are 1 x n or n x 1 matrices and
// scalars are 1 x 1, so a single dense matrix type covers every op here.
template <typename Scalar>
struct Var {
  Tape<Scalar>* tape = nullptr;
  std::int32_t id = -1;
};

// Reverse-mode tape. Values are immutable once emitted; backward runs once
// per tape and accumulates gradients in reverse emission order, which keeps
// reductions deterministic.
template <typename Scalar>
class Tape {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Pull = std::function<void(Tape&, const Matrix&)>;

  Var<Scalar> input(Matrix value) { return emit(std::move(value), Pull{}); }

  Var<Scalar> emit(Matrix value, Pull pull) {
    nodes_.push_back(Node{std::move(value), std::move(pull)});
    return Var<Scalar>{this, static_cast<std::int32_t>(nodes_.size() - 1)};
  }

  const Matrix& value(Var<Scalar> v) const { return nodes_[check(v)].value; }
  const Matrix& value_at(std::int32_t id) const {
    return nodes_[static_cast<std::size_t>(id)].value;
  }

  std::size_t size() const { return nodes_.size(); }

  void add_grad(std::int32_t id, const Matrix& g) {
    Matrix& slot = grads_[static_cast<std::size_t>(id)];
    if (slot.size() == 0) {
      slot = g;
    } else {
      slot += g;
    }
  }

  // Scatter-add of g's rows into the listed rows of node `id`; duplicate rows
  // accumulate, which is what embedding lookups with shared ids need.
  void add_grad_rows(std::int32_t id, const std::vector<std::int32_t>& rows, const Matrix& g) {
    Matrix& slot = grads_[static_cast<std::size_t>(id)];
    const Matrix& v = value_at(id);
    if (slot.size() == 0) slot = Matrix::Zero(v.rows(), v.cols());
    for (Eigen::Index k = 0; k < g.rows(); ++k)
      slot.row(rows[static_cast<std::size_t>(k)]) += g.row(k);
  }

  // Reverse pass from a 1 x 1 node.
  void backward(Var<Scalar> root) {
    const std::int32_t rid = check(root);
    const Matrix& rv = value_at(rid);
    if (rv.rows() != 1 || rv.cols() != 1)
      throw std::invalid_argument("backward: root must be a 1x1 scalar");
    if (ran_backward_) throw std::logic_error("backward: tape already differentiated");
    ran_backward_ = true;
    grads_.assign(nodes_.size(), Matrix());
    grads_[static_cast<std::size_t>(rid)] = Matrix::Ones(1, 1);
    for (std::int32_t id = rid; id >= 0; --id) {
      const std::size_t i = static_cast<std::size_t>(id);
      if (grads_[i].size() != 0 && nodes_[i].pull) nodes_[i].pull(*this, grads_[i]);
    }
  }

  // Zero matrix when the node does not influence the differentiated output.
  Matrix grad(Var<Scalar> v) const {
    const std::int32_t id = check(v);
    const std::size_t i = static_cast<std::size_t>(id);
    if (i < grads_.size() && grads_[i].size() != 0) return grads_[i];
    const Matrix& val = value_at(id);
    return Matrix::Zero(val.rows(), val.cols());
  }

 private:
  struct Node {
    Matrix value;
    Pull pull;
  };

  std::int32_t check(Var<Scalar> v) const {
    if (v.tape != this || v.id < 0 ||
        v.id >= static_cast<std::int32_t>(nodes_.size()))
      throw std::invalid_argument("Var does not belong to this tape");
    return v.id;
  }

  std::vector<Node> nodes_;
  std::vector<Matrix> grads_;
  bool ran_backward_ = false;
};

namespace detail {

template <typename S>
Tape<S>& tape_of(Var<S> a) {
  if (a.tape == nullptr) throw std::invalid_argument("unbound Var");
  return *a.tape;
}

template <typename S>
Tape<S>& same_tape(Var<S> a, Var<S> b) {
  if (a.tape == nullptr || a.tape != b.tape)
    throw std::invalid_argument("Vars live on different tapes");
  return *a.tape;
}

}  // namespace detail

template <typename S>
Var<S> matmul(Var<S> a, Var<S> b) {
  auto& t = detail::same_tape(a, b);
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  if (av.cols() != bv.rows())
    throw std::invalid_argument("matmul: inner dimensions differ");
  typename Tape<S>::Matrix out = av * bv;
  const std::int32_t ai = a.id, bi = b.id;
  return t.emit(std::move(out), [ai, bi](Tape<S>& tp, const auto& g) {
    tp.add_grad(ai, g * tp.value_at(bi).transpose());
    tp.add_grad(bi, tp.value_at(ai).transpose() * g);
  });
}

template <typename S>
Var<S> transpose(Var<S> a) {
  auto& t = detail::tape_of(a);
  typename Tape<S>::Matrix out = t.value(a).transpose();
  const std::int32_t ai = a.id;
  return t.emit(std::move(out), [ai](Tape<S>& tp, const auto& g) {
    tp.add_grad(ai, g.transpose());
  });
}

template <typename S>
Var<S> add(Var<S> a, Var<S> b) {
  auto& t = detail::same_tape(a, b);
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  if (av.rows() != bv.rows() || av.cols() != bv.cols())
    throw std::invalid_argument("add: shape mismatch");
  typename Tape<S>::Matrix out = av + bv;
  const std::int32_t ai = a.id, bi = b.id;
  return t.emit(std::move(out), [ai, bi](Tape<S>& tp, const auto& g) {
    tp.add_grad(ai, g);
    tp.add_grad(bi, g);
  });
}

template <typename S>
Var<S> sub(Var<S> a, Var<S> b) {
  auto& t = detail::same_tape(a, b);
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  if (av.rows() != bv.rows() || av.cols() != bv.cols())
    throw std::invalid_argument("sub: shape mismatch");
  typename Tape<S>::Matrix out = av - bv;
  const std::int32_t ai = a.id, bi = b.id;
  return t.emit(std::move(out), [ai, bi](Tape<S>& tp, const auto& g) {
    tp.add_grad(ai, g);
    tp.add_grad(bi, -g);
  });
}

// Broadcast-add a 1 x n row vector over every row of a.
template <typename S>
Var<S> add_rowvec(Var<S> a, Var<S> b) {
  auto& t = detail::same_tape(a, b);
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  if (bv.rows() != 1 || bv.cols() != av.cols())
    throw std::invalid_argument("add_rowvec: b must be 1 x cols(a)");
  typename Tape<S>::Matrix out = av.rowwise() + bv.row(0);
  const std::int32_t ai = a.id, bi = b.id;
  return t.emit(std::move(out), [ai, bi](Tape<S>& tp, const auto& g) {
    tp.add_grad(ai, g);
    tp.add_grad(bi, g.colwise().sum());
  });
}

template <typename S>
Var<S> scale(Var<S> a, S c) {
  auto& t = detail::tape_of(a);
  typename Tape<S>::Matrix out = t.value(a) * c;
  const std::int32_t ai = a.id;
  return t.emit(std::move(out), [ai, c](Tape<S>& tp, const auto& g) {
    tp.add_grad(ai, g * c);
  });
}

template <typename S>
Var<S> add_scalar(Var<S> a, S c) {
  auto& t = detail::tape_of(a);
  typename Tape<S>::Matrix out = (t.value(a).array() + c).matrix();
  const std::int32_t ai = a.id;
  return t.emit(std::move(out), [ai](Tape<S>& tp, const auto& g) {
    tp.add_grad(ai, g);
  });
}

// Concatenation along the last (column) dimension.
template <typename S>
Var<S> concat_cols(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  auto& t = detail::tape_of(parts.front());
  Eigen::Index rows = t.value(parts.front()).rows();
  Eigen::Index cols = 0;
  std::vector<std::int32_t> ids;
  std::vector<Eigen::Index> widths;
  for (const Var<S>& p : parts) {
    detail::same_tape(parts.front(), p);
    const auto& pv = t.value(p);
    if (pv.rows() != rows) throw std::invalid_argument("concat_cols: row count mismatch");
    ids.push_back(p.id);
    widths.push_back(pv.cols());
    cols += pv.cols();
  }
  typename Tape<S>::Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out.middleCols(at, widths[i]) = t.value_at(ids[i]);
    at += widths[i];
  }
  return t.emit(std::move(out), [ids, widths](Tape<S>& tp, const auto& g) {
    Eigen::Index at = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      tp.add_grad(ids[i], g.middleCols(at, widths[i]));
      at += widths[i];
    }
  });
}

// Row lookup: out.row(k) = a.row(rows[k]). Duplicate indices are fine; their
// gradients accumulate into the shared source row.
template <typename S>
Var<S> gather_rows(Var<S> a, std::vector<std::int32_t> rows) {
  auto& t = detail::tape_of(a);
  const auto& av = t.value(a);
  typename Tape<S>::Matrix out(static_cast<Eigen::Index>(rows.size()), av.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= av.rows())
      throw std::out_of_range("gather_rows: index " + std::to_string(rows[k]) +
                              " out of range");
    out.row(static_cast<Eigen::Index>(k)) = av.row(rows[k]);
  }
  const std::int32_t ai = a.id;
  return t.emit(std::move(out), [ai, rows = std::move(rows)](Tape<S>& tp, const auto& g) {
    tp.add_grad_rows(ai, rows, g);
  });
}

template <typename S>
Var<S> relu(Var<S> a) {
  auto& t = detail::tape_of(a);
  const auto& av = t.value(a);
  typename Tape<S>::Matrix out = av.cwiseMax(S(0));
  const std::int32_t ai = a.id;
  return t.emit(std::move(out), [ai](Tape<S>& tp, const auto& g) {
    const auto& av = tp.value_at(ai);
    tp.add_grad(ai, (av.array() > S(0)).template cast<S>().matrix().cwiseProduct(g));
  });
}

// Sum of absolute values as a 1 x 1 scalar; the subgradient uses sign(0) = 0.
template <typename S>
Var<S> l1_norm(Var<S> a) {
  auto& t = detail::tape_of(a);
  typename Tape<S>::Matrix out(1, 1);
  out(0, 0) = t.value(a).cwiseAbs().sum();
  const std::int32_t ai = a.id;
  return t.emit(std::move(out), [ai](Tape<S>& tp, const auto& g) {
    const auto sign = tp.value_at(ai).unaryExpr(
        [](S x) { return x > S(0) ? S(1) : (x < S(0) ? S(-1) : S(0)); });
    tp.add_grad(ai, g(0, 0) * sign);
  });
}

// Euclidean norm of all entries as a 1 x 1 scalar; zero subgradient at the
// origin.
template <typename S>
Var<S> l2_norm(Var<S> a) {
  auto& t = detail::tape_of(a);
  typename Tape<S>::Matrix out(1, 1);
  const S n = std::sqrt(t.value(a).array().square().sum());
  out(0, 0) = n;
  const std::int32_t ai = a.id;
  return t.emit(std::move(out), [ai, n](Tape<S>& tp, const auto& g) {
    if (n > S(0)) tp.add_grad(ai, (g(0, 0) / n) * tp.value_at(ai));
  });
}

// Row-wise layer normalization with biased variance and a tiny epsilon, so
// normalized rows really do have unit variance to well under 1e-6.
inline constexpr double kLayerNormEpsilon = 1e-9;

template <typename S>
Var<S> layer_norm(Var<S> x, Var<S> gain, Var<S> bias) {
  auto& t = detail::same_tape(x, gain);
  detail::same_tape(x, bias);
  const auto& xv = t.value(x);
  const auto& gv = t.value(gain);
  const auto& bv = t.value(bias);
  if (gv.rows() != 1 || bv.rows() != 1 || gv.cols() != xv.cols() || bv.cols() != xv.cols())
    throw std::invalid_argument("layer_norm: gain/bias must be 1 x cols(x)");
  const Eigen::Index d = xv.cols();
  if (d == 0) throw std::invalid_argument("layer_norm: empty rows");
  using Matrix = typename Tape<S>::Matrix;
  Matrix out(xv.rows(), d);
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    const S mu = xv.row(i).mean();
    const S var = (xv.row(i).array() - mu).square().sum() / static_cast<S>(d);
    const S sigma = std::sqrt(var + S(kLayerNormEpsilon));
    out.row(i).array() =
        (((xv.row(i).array() - mu) / sigma) * gv.row(0).array()) + bv.row(0).array();
  }
  const std::int32_t xi = x.id, gi = gain.id, bi = bias.id;
  return t.emit(std::move(out), [xi, gi, bi, d](Tape<S>& tp, const auto& g) {
    const auto& xv = tp.value_at(xi);
    const auto& gv = tp.value_at(gi);
    Matrix dx(xv.rows(), d);
    Matrix dgain = Matrix::Zero(1, d);
    Matrix dbias = Matrix::Zero(1, d);
    for (Eigen::Index i = 0; i < xv.rows(); ++i) {
      const S mu = xv.row(i).mean();
      const S var = (xv.row(i).array() - mu).square().sum() / static_cast<S>(d);
      const S sigma = std::sqrt(var + S(kLayerNormEpsilon));
      const auto centered = (xv.row(i).array() - mu).eval();
      const auto xhat = (centered / sigma).eval();
      const auto dxhat = (g.row(i).array() * gv.row(0).array()).eval();
      dgain.row(0).array() += g.row(i).array() * xhat;
      dbias.row(0).array() += g.row(i).array();
      const S dvar = (dxhat * centered).sum() * S(-0.5) / (sigma * sigma * sigma);
      const S dmu = -dxhat.sum() / sigma;
      dx.row(i).array() = dxhat / sigma + centered * (S(2) * dvar / static_cast<S>(d)) +
                          dmu / static_cast<S>(d);
    }
    tp.add_grad(xi, dx);
    tp.add_grad(gi, dgain);
    tp.add_grad(bi, dbias);
  });
}

// Row-wise softmax under a binary mask, implemented as an additive -1e30
// shift before exponentiation plus a final multiply by the mask (vectorized
// exp clamps its argument and can leave denormals where a true underflow
// would give zero). Disallowed entries come out exactly zero, rows
// renormalize over allowed entries only, and a fully masked row is an error.
template <typename S>
Var<S> masked_softmax(Var<S> scores, const typename Tape<S>::Matrix& mask) {
  auto& t = detail::tape_of(scores);
  const auto& sv = t.value(scores);
  if (mask.rows() != sv.rows() || mask.cols() != sv.cols())
    throw std::invalid_argument("masked_softmax: mask shape mismatch");
  using Matrix = typename Tape<S>::Matrix;
  Matrix p(sv.rows(), sv.cols());
  for (Eigen::Index i = 0; i < sv.rows(); ++i) {
    S allowed = S(0);
    for (Eigen::Index j = 0; j < sv.cols(); ++j) {
      const S m = mask(i, j);
      if (m != S(0) && m != S(1))
        throw std::invalid_argument("masked_softmax: mask must be binary");
      allowed += m;
    }
    if (allowed == S(0))
      throw std::invalid_argument("masked_softmax: fully masked row " + std::to_string(i));
    const auto shifted = (sv.row(i).array() + (mask.row(i).array() - S(1)) * S(1e30)).eval();
    const S rowmax = shifted.maxCoeff();
    const auto e = ((shifted - rowmax).exp() * mask.row(i).array()).eval();
    p.row(i).array() = e / e.sum();
  }
  const std::int32_t si = scores.id;
  return t.emit(p, [si, p](Tape<S>& tp, const auto& g) {
    Matrix ds(p.rows(), p.cols());
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      const S dot = (g.row(i).array() * p.row(i).array()).sum();
      ds.row(i).array() = p.row(i).array() * (g.row(i).array() - dot);
    }
    tp.add_grad(si, ds);
  });
}

template <typename S>
Var<S> operator+(Var<S> a, Var<S> b) {
  return add(a, b);
}
template <typename S>
Var<S> operator-(Var<S> a, Var<S> b) {
  return sub(a, b);
}
template <typename S>
Var<S> operator*(S c, Var<S> a) {
  return scale(a, c);
}

// Central-difference check of tape gradients for a scalar-valued function of
// the given parameter matrices. Returns the worst relative error
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8) over all entries.
template <typename Scalar>
Scalar grad_check(
    const std::function<Var<Scalar>(Tape<Scalar>&, const std::vector<Var<Scalar>>&)>& f,
    std::vector<typename Tape<Scalar>::Matrix> params, Scalar eps) {
  using Matrix = typename Tape<Scalar>::Matrix;
  if (!(eps >= Scalar(1e-7) && eps <= Scalar(1e-3)))
    throw std::invalid_argument("grad_check: eps must lie in [1e-7, 1e-3]");
  auto build = [&](const std::vector<Matrix>& ps, Tape<Scalar>& tape,
                   std::vector<Var<Scalar>>& vars) {
    vars.clear();
    vars.reserve(ps.size());
    for (const Matrix& p : ps) vars.push_back(tape.input(p));
    Var<Scalar> out = f(tape, vars);
    const Matrix& m = tape.value(out);
    if (m.rows() != 1 || m.cols() != 1)
      throw std::invalid_argument("grad_check: f must return a 1x1 scalar");
    if (!std::isfinite(m(0, 0)))
      throw std::runtime_error("grad_check: non-finite objective value");
    return out;
  };
  std::vector<Matrix> analytic;
  {
    Tape<Scalar> tape;
    std::vector<Var<Scalar>> vars;
    Var<Scalar> out = build(params, tape, vars);
    tape.backward(out);
    for (const Var<Scalar>& v : vars) analytic.push_back(tape.grad(v));
  }
  auto eval = [&](const std::vector<Matrix>& ps) {
    Tape<Scalar> tape;
    std::vector<Var<Scalar>> vars;
    Var<Scalar> out = build(ps, tape, vars);
    return tape.value(out)(0, 0);
  };
  Scalar max_rel = Scalar(0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (Eigen::Index r = 0; r < params[i].rows(); ++r) {
      for (Eigen::Index c = 0; c < params[i].cols(); ++c) {
        const Scalar orig = params[i](r, c);
        params[i](r, c) = orig + eps;
        const Scalar fp = eval(params);
        params[i](r, c) = orig - eps;
        const Scalar fm = eval(params);
        params[i](r, c) = orig;
        const Scalar numeric = (fp - fm) / (Scalar(2) * eps);
        const Scalar a = analytic[i](r, c);
        const Scalar denom =
            std::max({std::abs(a), std::abs(numeric), Scalar(1e-8)});
        max_rel = std::max(max_rel, std::abs(a - numeric) / denom);
      }
    }
  }
  return max_rel;
}

}  // namespace kgt::ad
