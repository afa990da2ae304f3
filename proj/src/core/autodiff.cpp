#include "core/autodiff.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace tdg::ad {

Parameter::Parameter(std::string n, Mat init)
    : name(std::move(n)), val(std::move(init)) {
  grad = Mat::Zero(val.rows(), val.cols());
  m = Mat::Zero(val.rows(), val.cols());
  v = Mat::Zero(val.rows(), val.cols());
}

void Parameter::zero_grad() { grad.setZero(); }

Tape::V Tape::make(Mat val, bool requires_grad) {
  nodes_.emplace_back();
  Node& n = nodes_.back();
  n.val = std::move(val);
  n.requires_grad = requires_grad;
  if (requires_grad) n.grad = Mat::Zero(n.val.rows(), n.val.cols());
  return &n;
}

Tape::V Tape::constant(Mat val) { return make(std::move(val), false); }

Tape::V Tape::param(Parameter& p) {
  V n = make(p.val, true);
  Parameter* pp = &p;
  n->back = [n, pp]() { pp->grad += n->grad; };
  return n;
}

Tape::V Tape::gather_rows(Parameter& emb, const std::vector<int>& idx) {
  Mat out(idx.size(), emb.val.cols());
  for (std::size_t i = 0; i < idx.size(); ++i)
    out.row(i) = emb.val.row(idx[i]);
  V n = make(std::move(out), true);
  Parameter* pp = &emb;
  std::vector<int> ix = idx;
  n->back = [n, pp, ix]() {
    for (std::size_t i = 0; i < ix.size(); ++i)
      pp->grad.row(ix[i]) += n->grad.row(i);
  };
  return n;
}

Tape::V Tape::matmul(V a, V b, bool trans_a, bool trans_b) {
  Mat av = trans_a ? a->val.transpose() : a->val;
  Mat bv = trans_b ? b->val.transpose() : b->val;
  V n = make(av * bv, a->requires_grad || b->requires_grad);
  if (!n->requires_grad) return n;
  n->back = [n, a, b, trans_a, trans_b]() {
    const Mat& g = n->grad;
    if (a->requires_grad) {
      Mat bv = trans_b ? b->val.transpose() : b->val;
      Mat da = g * bv.transpose();
      a->grad += trans_a ? da.transpose() : da;
    }
    if (b->requires_grad) {
      Mat av = trans_a ? a->val.transpose() : a->val;
      Mat db = av.transpose() * g;
      b->grad += trans_b ? db.transpose() : db;
    }
  };
  return n;
}

Tape::V Tape::add(V a, V b) {
  V n = make(a->val + b->val, a->requires_grad || b->requires_grad);
  if (!n->requires_grad) return n;
  n->back = [n, a, b]() {
    if (a->requires_grad) a->grad += n->grad;
    if (b->requires_grad) b->grad += n->grad;
  };
  return n;
}

Tape::V Tape::sub(V a, V b) {
  V n = make(a->val - b->val, a->requires_grad || b->requires_grad);
  if (!n->requires_grad) return n;
  n->back = [n, a, b]() {
    if (a->requires_grad) a->grad += n->grad;
    if (b->requires_grad) b->grad -= n->grad;
  };
  return n;
}

Tape::V Tape::add_rowvec(V a, V row) {
  Mat out = a->val;
  out.rowwise() += Eigen::RowVectorXd(row->val.row(0));
  V n = make(std::move(out), a->requires_grad || row->requires_grad);
  if (!n->requires_grad) return n;
  n->back = [n, a, row]() {
    if (a->requires_grad) a->grad += n->grad;
    if (row->requires_grad) row->grad.row(0) += n->grad.colwise().sum();
  };
  return n;
}

Tape::V Tape::add_const(V a, const Mat& c) {
  V n = make(a->val + c, a->requires_grad);
  if (!n->requires_grad) return n;
  n->back = [n, a]() { a->grad += n->grad; };
  return n;
}

Tape::V Tape::scale(V a, double s) {
  V n = make(a->val * s, a->requires_grad);
  if (!n->requires_grad) return n;
  n->back = [n, a, s]() { a->grad += s * n->grad; };
  return n;
}

Tape::V Tape::cwise_mul(V a, V b) {
  V n = make(a->val.cwiseProduct(b->val),
             a->requires_grad || b->requires_grad);
  if (!n->requires_grad) return n;
  n->back = [n, a, b]() {
    if (a->requires_grad) a->grad += n->grad.cwiseProduct(b->val);
    if (b->requires_grad) b->grad += n->grad.cwiseProduct(a->val);
  };
  return n;
}

Tape::V Tape::cwise_mul_const(V a, const Mat& c) {
  V n = make(a->val.cwiseProduct(c), a->requires_grad);
  if (!n->requires_grad) return n;
  Mat cc = c;
  n->back = [n, a, cc]() { a->grad += n->grad.cwiseProduct(cc); };
  return n;
}

Tape::V Tape::relu(V a) {
  V n = make(a->val.cwiseMax(0.0), a->requires_grad);
  if (!n->requires_grad) return n;
  n->back = [n, a]() {
    a->grad += n->grad.cwiseProduct(
        (a->val.array() > 0.0).cast<double>().matrix());
  };
  return n;
}

Tape::V Tape::log(V a) {
  V n = make(a->val.array().log().matrix(), a->requires_grad);
  if (!n->requires_grad) return n;
  n->back = [n, a]() { a->grad += n->grad.cwiseQuotient(a->val); };
  return n;
}

Tape::V Tape::softmax_rows(V a) {
  Mat out = a->val;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double mx = out.row(r).maxCoeff();
    out.row(r) = (out.row(r).array() - mx).exp();
    out.row(r) /= out.row(r).sum();
  }
  V n = make(std::move(out), a->requires_grad);
  if (!n->requires_grad) return n;
  n->back = [n, a]() {
    for (Eigen::Index r = 0; r < n->val.rows(); ++r) {
      const auto y = n->val.row(r).array();
      const auto dy = n->grad.row(r).array();
      const double dot = (y * dy).sum();
      a->grad.row(r) += ((dy - dot) * y).matrix();
    }
  };
  return n;
}

Tape::V Tape::log_softmax_rows(V a) {
  Mat out = a->val;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double mx = out.row(r).maxCoeff();
    const double lse =
        std::log((out.row(r).array() - mx).exp().sum()) + mx;
    out.row(r).array() -= lse;
  }
  V n = make(std::move(out), a->requires_grad);
  if (!n->requires_grad) return n;
  n->back = [n, a]() {
    for (Eigen::Index r = 0; r < n->val.rows(); ++r) {
      const auto p = n->val.row(r).array().exp();
      const double gsum = n->grad.row(r).sum();
      a->grad.row(r) += (n->grad.row(r).array() - p * gsum).matrix();
    }
  };
  return n;
}

Tape::V Tape::layernorm_rows(V x, V gain, V bias, double eps) {
  const Eigen::Index cols = x->val.cols();
  Mat xhat(x->val.rows(), cols);
  Eigen::VectorXd inv_sigma(x->val.rows());
  for (Eigen::Index r = 0; r < x->val.rows(); ++r) {
    const double mu = x->val.row(r).mean();
    const double var =
        (x->val.row(r).array() - mu).square().sum() / cols;
    inv_sigma(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x->val.row(r).array() - mu) * inv_sigma(r);
  }
  Mat out = xhat;
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    out.row(r) = out.row(r).cwiseProduct(gain->val.row(0)) + bias->val.row(0);
  V n = make(std::move(out),
             x->requires_grad || gain->requires_grad || bias->requires_grad);
  if (!n->requires_grad) return n;
  n->back = [n, x, gain, bias, xhat, inv_sigma, cols]() {
    for (Eigen::Index r = 0; r < n->val.rows(); ++r) {
      const auto dy = n->grad.row(r).array();
      if (bias->requires_grad) bias->grad.row(0) += n->grad.row(r);
      if (gain->requires_grad)
        gain->grad.row(0) +=
            (dy * xhat.row(r).array()).matrix();
      if (x->requires_grad) {
        const auto g = gain->val.row(0).array();
        const auto dxhat = dy * g;
        const double mean_dxhat = dxhat.sum() / cols;
        const double mean_dxhat_xhat =
            (dxhat * xhat.row(r).array()).sum() / cols;
        x->grad.row(r) +=
            (inv_sigma(r) *
             (dxhat - mean_dxhat - xhat.row(r).array() * mean_dxhat_xhat))
                .matrix();
      }
    }
  };
  return n;
}

Tape::V Tape::cols(V a, int from, int ncols) {
  V n = make(a->val.middleCols(from, ncols), a->requires_grad);
  if (!n->requires_grad) return n;
  n->back = [n, a, from, ncols]() {
    a->grad.middleCols(from, ncols) += n->grad;
  };
  return n;
}

Tape::V Tape::rows(V a, int from, int nrows) {
  V n = make(a->val.middleRows(from, nrows), a->requires_grad);
  if (!n->requires_grad) return n;
  n->back = [n, a, from, nrows]() {
    a->grad.middleRows(from, nrows) += n->grad;
  };
  return n;
}

Tape::V Tape::concat_cols(const std::vector<V>& parts) {
  Eigen::Index total = 0;
  bool rg = false;
  for (V p : parts) {
    total += p->val.cols();
    rg = rg || p->requires_grad;
  }
  Mat out(parts.front()->val.rows(), total);
  Eigen::Index at = 0;
  for (V p : parts) {
    out.middleCols(at, p->val.cols()) = p->val;
    at += p->val.cols();
  }
  V n = make(std::move(out), rg);
  if (!rg) return n;
  std::vector<V> ps = parts;
  n->back = [n, ps]() {
    Eigen::Index at = 0;
    for (V p : ps) {
      if (p->requires_grad)
        p->grad += n->grad.middleCols(at, p->val.cols());
      at += p->val.cols();
    }
  };
  return n;
}

Tape::V Tape::sum_all(V a) {
  Mat out(1, 1);
  out(0, 0) = a->val.sum();
  V n = make(std::move(out), a->requires_grad);
  if (!n->requires_grad) return n;
  n->back = [n, a]() {
    a->grad.array() += n->grad(0, 0);
  };
  return n;
}

void Tape::backward(V scalar_node) {
  if (scalar_node->val.size() != 1)
    throw NumericError("backward: output is not a scalar");
  scalar_node->grad(0, 0) = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
    if (it->requires_grad && it->back) it->back();
}

void AdamOptimizer::step(std::vector<Parameter*>& params) {
  ++step_count;
  const double bc1 = 1.0 - std::pow(beta1, step_count);
  const double bc2 = 1.0 - std::pow(beta2, step_count);
  for (Parameter* p : params) {
    p->m = beta1 * p->m + (1.0 - beta1) * p->grad;
    p->v = beta2 * p->v.array() + (1.0 - beta2) * p->grad.array().square();
    p->val.array() -=
        lr * (p->m.array() / bc1) /
        ((p->v.array() / bc2).sqrt() + eps);
  }
}

}  // namespace tdg::ad
