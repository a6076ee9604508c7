#include "skvg/graph.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace skvg {

// ---------------------------------------------------------------------------
// ParamStore

Parameter& ParamStore::create(const std::string& name, int rows, int cols) {
  if (by_name_.count(name)) {
    throw ShapeError("duplicate parameter name: " + name);
  }
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = Mat::Zero(rows, cols);
  p->grad = Mat::Zero(rows, cols);
  by_name_[name] = params_.size();
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParamStore::create_xavier(const std::string& name, int rows,
                                     int cols, Rng& rng) {
  Parameter& p = create(name, rows, cols);
  const double stddev = std::sqrt(2.0 / static_cast<double>(rows + cols));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      p.value(r, c) = rng.normal(0.0, stddev);
    }
  }
  return p;
}

Parameter& ParamStore::create_constant(const std::string& name, int rows,
                                       int cols, double fill) {
  Parameter& p = create(name, rows, cols);
  p.value.setConstant(fill);
  return p;
}

Parameter* ParamStore::find(const std::string& name) {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : params_[it->second].get();
}

const Parameter* ParamStore::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : params_[it->second].get();
}

Parameter& ParamStore::at(const std::string& name) {
  Parameter* p = find(name);
  if (!p) throw ShapeError("unknown parameter: " + name);
  return *p;
}

std::vector<Parameter*> ParamStore::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParamStore::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

void ParamStore::zero_grads() {
  for (auto& p : params_) p->zero_grad();
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

// ---------------------------------------------------------------------------
// Graph

Var Graph::emplace(Mat value, std::function<void(Graph&, Node&)> back) {
  Node n;
  n.value = std::move(value);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Graph::check_id(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
    throw ShapeError("invalid Var handle");
  }
}

Mat& Graph::grad_of(int id) {
  Node& n = nodes_[id];
  if (!n.grad_ready) {
    n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    n.grad_ready = true;
  }
  return n.grad;
}

const Mat& Graph::value(Var v) const {
  check_id(v);
  return nodes_[v.id].value;
}

double Graph::scalar(Var v) const {
  const Mat& m = value(v);
  if (m.rows() != 1 || m.cols() != 1) {
    throw ShapeError("scalar() requires a 1x1 value");
  }
  return m(0, 0);
}

Var Graph::input(Mat value) { return emplace(std::move(value), nullptr); }

Var Graph::param(Parameter& p) {
  Parameter* ptr = &p;
  return emplace(p.value, [ptr](Graph&, Node& self) {
    ptr->grad += self.grad;
  });
}

Var Graph::gather_rows(Parameter& table, std::vector<int> ids) {
  const int cols = static_cast<int>(table.value.cols());
  Mat out(static_cast<int>(ids.size()), cols);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.value.rows()) {
      throw ShapeError("gather_rows: id out of range in " + table.name);
    }
    out.row(static_cast<int>(i)) = table.value.row(ids[i]);
  }
  Parameter* ptr = &table;
  return emplace(std::move(out), [ptr, ids = std::move(ids)](Graph&,
                                                             Node& self) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      ptr->grad.row(ids[i]) += self.grad.row(static_cast<int>(i));
    }
  });
}

Var Graph::matmul(Var a, Var b) {
  check_id(a);
  check_id(b);
  const Mat& A = val_of(a.id);
  const Mat& B = val_of(b.id);
  if (A.cols() != B.rows()) throw ShapeError("matmul: inner dims differ");
  Mat out = A * B;
  return emplace(std::move(out), [a, b](Graph& g, Node& self) {
    g.grad_of(a.id).noalias() += self.grad * g.val_of(b.id).transpose();
    g.grad_of(b.id).noalias() += g.val_of(a.id).transpose() * self.grad;
  });
}

Var Graph::matmul_nt(Var a, Var b) {
  check_id(a);
  check_id(b);
  const Mat& A = val_of(a.id);
  const Mat& B = val_of(b.id);
  if (A.cols() != B.cols()) throw ShapeError("matmul_nt: widths differ");
  Mat out = A * B.transpose();
  return emplace(std::move(out), [a, b](Graph& g, Node& self) {
    g.grad_of(a.id).noalias() += self.grad * g.val_of(b.id);
    g.grad_of(b.id).noalias() += self.grad.transpose() * g.val_of(a.id);
  });
}

Var Graph::add(Var a, Var b) {
  check_id(a);
  check_id(b);
  if (val_of(a.id).rows() != val_of(b.id).rows() ||
      val_of(a.id).cols() != val_of(b.id).cols()) {
    throw ShapeError("add: shape mismatch");
  }
  Mat out = val_of(a.id) + val_of(b.id);
  return emplace(std::move(out), [a, b](Graph& g, Node& self) {
    g.grad_of(a.id) += self.grad;
    g.grad_of(b.id) += self.grad;
  });
}

Var Graph::sub(Var a, Var b) {
  check_id(a);
  check_id(b);
  if (val_of(a.id).rows() != val_of(b.id).rows() ||
      val_of(a.id).cols() != val_of(b.id).cols()) {
    throw ShapeError("sub: shape mismatch");
  }
  Mat out = val_of(a.id) - val_of(b.id);
  return emplace(std::move(out), [a, b](Graph& g, Node& self) {
    g.grad_of(a.id) += self.grad;
    g.grad_of(b.id) -= self.grad;
  });
}

Var Graph::mul_elem(Var a, Var b) {
  check_id(a);
  check_id(b);
  if (val_of(a.id).rows() != val_of(b.id).rows() ||
      val_of(a.id).cols() != val_of(b.id).cols()) {
    throw ShapeError("mul_elem: shape mismatch");
  }
  Mat out = val_of(a.id).cwiseProduct(val_of(b.id));
  return emplace(std::move(out), [a, b](Graph& g, Node& self) {
    g.grad_of(a.id) += self.grad.cwiseProduct(g.val_of(b.id));
    g.grad_of(b.id) += self.grad.cwiseProduct(g.val_of(a.id));
  });
}

Var Graph::scale(Var a, double s) {
  check_id(a);
  Mat out = val_of(a.id) * s;
  return emplace(std::move(out), [a, s](Graph& g, Node& self) {
    g.grad_of(a.id) += self.grad * s;
  });
}

Var Graph::add_scalar(Var a, double c) {
  check_id(a);
  Mat out = val_of(a.id).array() + c;
  return emplace(std::move(out), [a](Graph& g, Node& self) {
    g.grad_of(a.id) += self.grad;
  });
}

Var Graph::add_row_broadcast(Var a, Var row) {
  check_id(a);
  check_id(row);
  const Mat& A = val_of(a.id);
  const Mat& R = val_of(row.id);
  if (R.rows() != 1 || R.cols() != A.cols()) {
    throw ShapeError("add_row_broadcast: row must be 1 x cols");
  }
  Mat out = A.rowwise() + R.row(0);
  return emplace(std::move(out), [a, row](Graph& g, Node& self) {
    g.grad_of(a.id) += self.grad;
    g.grad_of(row.id).row(0) += self.grad.colwise().sum();
  });
}

Var Graph::softmax_rows(Var a, const std::vector<std::uint8_t>* key_mask) {
  check_id(a);
  const Mat& X = val_of(a.id);
  std::vector<std::uint8_t> mask;
  if (key_mask) {
    if (static_cast<int>(key_mask->size()) != X.cols()) {
      throw ShapeError("softmax_rows: mask size must equal column count");
    }
    mask = *key_mask;
    bool any = false;
    for (auto m : mask) any = any || (m != 0);
    if (!any) throw ShapeError("softmax_rows: all keys masked out");
  }
  Mat Y(X.rows(), X.cols());
  for (int r = 0; r < X.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < X.cols(); ++c) {
      if (!mask.empty() && !mask[c]) continue;
      mx = std::max(mx, X(r, c));
    }
    double sum = 0.0;
    for (int c = 0; c < X.cols(); ++c) {
      if (!mask.empty() && !mask[c]) {
        Y(r, c) = 0.0;
        continue;
      }
      Y(r, c) = std::exp(X(r, c) - mx);
      sum += Y(r, c);
    }
    Y.row(r) /= sum;
  }
  return emplace(std::move(Y), [a](Graph& g, Node& self) {
    Mat& dx = g.grad_of(a.id);
    const Mat& Y = self.value;
    const Mat& dy = self.grad;
    for (int r = 0; r < Y.rows(); ++r) {
      const double dot = dy.row(r).cwiseProduct(Y.row(r)).sum();
      dx.row(r).array() +=
          Y.row(r).array() * (dy.row(r).array() - dot);
    }
  });
}

Var Graph::layer_norm_rows(Var x, Var gain, Var offset, double eps) {
  check_id(x);
  check_id(gain);
  check_id(offset);
  const Mat& X = val_of(x.id);
  const Mat& G = val_of(gain.id);
  const Mat& B = val_of(offset.id);
  if (G.rows() != 1 || B.rows() != 1 || G.cols() != X.cols() ||
      B.cols() != X.cols()) {
    throw ShapeError("layer_norm_rows: gain/offset must be 1 x cols");
  }
  const int d = static_cast<int>(X.cols());
  Mat xhat(X.rows(), d);
  Eigen::VectorXd inv_std(X.rows());
  for (int r = 0; r < X.rows(); ++r) {
    const double mu = X.row(r).mean();
    const double var = (X.row(r).array() - mu).square().sum() / d;
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std(r) = inv;
    xhat.row(r) = (X.row(r).array() - mu) * inv;
  }
  Mat Y = (xhat.array().rowwise() * G.row(0).array()).rowwise() +
          B.row(0).array();
  return emplace(
      std::move(Y),
      [x, gain, offset, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Graph& g, Node& self) {
        const Mat& dy = self.grad;
        g.grad_of(gain.id).row(0) +=
            dy.cwiseProduct(xhat).colwise().sum();
        g.grad_of(offset.id).row(0) += dy.colwise().sum();
        const auto& G = g.val_of(gain.id);
        Mat& dx = g.grad_of(x.id);
        for (int r = 0; r < dy.rows(); ++r) {
          Eigen::RowVectorXd dxhat =
              dy.row(r).cwiseProduct(G.row(0));
          const double m1 = dxhat.mean();
          const double m2 = dxhat.cwiseProduct(xhat.row(r)).mean();
          dx.row(r).array() +=
              inv_std(r) *
              (dxhat.array() - m1 - xhat.row(r).array() * m2);
        }
      });
}

Var Graph::relu(Var a) {
  check_id(a);
  Mat out = val_of(a.id).cwiseMax(0.0);
  return emplace(std::move(out), [a](Graph& g, Node& self) {
    const Mat& x = g.val_of(a.id);
    g.grad_of(a.id).array() +=
        self.grad.array() * (x.array() > 0.0).cast<double>();
  });
}

Var Graph::sigmoid(Var a) {
  check_id(a);
  Mat out = val_of(a.id).unaryExpr(
      [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  return emplace(std::move(out), [a](Graph& g, Node& self) {
    const Mat& y = self.value;
    g.grad_of(a.id).array() +=
        self.grad.array() * y.array() * (1.0 - y.array());
  });
}

Var Graph::slice_rows(Var a, int r0, int n) {
  check_id(a);
  const Mat& A = val_of(a.id);
  if (r0 < 0 || n <= 0 || r0 + n > A.rows()) {
    throw ShapeError("slice_rows: out of range");
  }
  Mat out = A.middleRows(r0, n);
  return emplace(std::move(out), [a, r0, n](Graph& g, Node& self) {
    g.grad_of(a.id).middleRows(r0, n) += self.grad;
  });
}

Var Graph::slice_cols(Var a, int c0, int n) {
  check_id(a);
  const Mat& A = val_of(a.id);
  if (c0 < 0 || n <= 0 || c0 + n > A.cols()) {
    throw ShapeError("slice_cols: out of range");
  }
  Mat out = A.middleCols(c0, n);
  return emplace(std::move(out), [a, c0, n](Graph& g, Node& self) {
    g.grad_of(a.id).middleCols(c0, n) += self.grad;
  });
}

Var Graph::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  int rows = 0;
  const int cols = static_cast<int>(value(parts[0]).cols());
  for (Var p : parts) {
    check_id(p);
    if (val_of(p.id).cols() != cols) {
      throw ShapeError("concat_rows: column mismatch");
    }
    rows += static_cast<int>(val_of(p.id).rows());
  }
  Mat out(rows, cols);
  std::vector<int> offsets;
  int r = 0;
  for (Var p : parts) {
    offsets.push_back(r);
    out.middleRows(r, val_of(p.id).rows()) = val_of(p.id);
    r += static_cast<int>(val_of(p.id).rows());
  }
  return emplace(std::move(out),
                 [parts, offsets](Graph& g, Node& self) {
                   for (std::size_t i = 0; i < parts.size(); ++i) {
                     Mat& dp = g.grad_of(parts[i].id);
                     dp += self.grad.middleRows(offsets[i], dp.rows());
                   }
                 });
}

Var Graph::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  int cols = 0;
  const int rows = static_cast<int>(value(parts[0]).rows());
  for (Var p : parts) {
    check_id(p);
    if (val_of(p.id).rows() != rows) {
      throw ShapeError("concat_cols: row mismatch");
    }
    cols += static_cast<int>(val_of(p.id).cols());
  }
  Mat out(rows, cols);
  std::vector<int> offsets;
  int c = 0;
  for (Var p : parts) {
    offsets.push_back(c);
    out.middleCols(c, val_of(p.id).cols()) = val_of(p.id);
    c += static_cast<int>(val_of(p.id).cols());
  }
  return emplace(std::move(out),
                 [parts, offsets](Graph& g, Node& self) {
                   for (std::size_t i = 0; i < parts.size(); ++i) {
                     Mat& dp = g.grad_of(parts[i].id);
                     dp += self.grad.middleCols(offsets[i], dp.cols());
                   }
                 });
}

Var Graph::mean_rows(Var a, int r0, int n) {
  check_id(a);
  const Mat& A = val_of(a.id);
  if (r0 < 0 || n <= 0 || r0 + n > A.rows()) {
    throw ShapeError("mean_rows: out of range");
  }
  Mat out = A.middleRows(r0, n).colwise().mean();
  return emplace(std::move(out), [a, r0, n](Graph& g, Node& self) {
    Mat& da = g.grad_of(a.id);
    const double inv = 1.0 / n;
    for (int r = 0; r < n; ++r) {
      da.row(r0 + r) += self.grad.row(0) * inv;
    }
  });
}

Var Graph::bce_with_logits_mean(Var logits, Mat targets) {
  check_id(logits);
  const Mat& S = val_of(logits.id);
  if (S.rows() != targets.rows() || S.cols() != targets.cols()) {
    throw ShapeError("bce_with_logits_mean: shape mismatch");
  }
  const double count = static_cast<double>(S.size());
  double total = 0.0;
  for (int r = 0; r < S.rows(); ++r) {
    for (int c = 0; c < S.cols(); ++c) {
      const double s = S(r, c);
      const double t = targets(r, c);
      total += std::max(s, 0.0) - s * t + std::log1p(std::exp(-std::abs(s)));
    }
  }
  Mat out(1, 1);
  out(0, 0) = total / count;
  return emplace(std::move(out),
                 [logits, targets = std::move(targets), count](Graph& g,
                                                               Node& self) {
                   const double go = self.grad(0, 0) / count;
                   const Mat& S = g.val_of(logits.id);
                   Mat& dl = g.grad_of(logits.id);
                   for (int r = 0; r < S.rows(); ++r) {
                     for (int c = 0; c < S.cols(); ++c) {
                       const double p =
                           1.0 / (1.0 + std::exp(-S(r, c)));
                       dl(r, c) += go * (p - targets(r, c));
                     }
                   }
                 });
}

Var Graph::smooth_l1_mean(Var pred, Mat target, double beta) {
  check_id(pred);
  const Mat& P = val_of(pred.id);
  if (P.rows() != target.rows() || P.cols() != target.cols()) {
    throw ShapeError("smooth_l1_mean: shape mismatch");
  }
  if (!(beta > 0.0)) throw ShapeError("smooth_l1_mean: beta must be > 0");
  const double count = static_cast<double>(P.size());
  double total = 0.0;
  for (int r = 0; r < P.rows(); ++r) {
    for (int c = 0; c < P.cols(); ++c) {
      const double x = std::abs(P(r, c) - target(r, c));
      total += (x < beta) ? 0.5 * x * x / beta : x - 0.5 * beta;
    }
  }
  Mat out(1, 1);
  out(0, 0) = total / count;
  return emplace(
      std::move(out),
      [pred, target = std::move(target), beta, count](Graph& g, Node& self) {
        const double go = self.grad(0, 0) / count;
        const Mat& P = g.val_of(pred.id);
        Mat& dp = g.grad_of(pred.id);
        for (int r = 0; r < P.rows(); ++r) {
          for (int c = 0; c < P.cols(); ++c) {
            const double x = P(r, c) - target(r, c);
            const double d =
                (std::abs(x) < beta) ? x / beta : (x > 0 ? 1.0 : -1.0);
            dp(r, c) += go * d;
          }
        }
      });
}

namespace {

// GIoU of box a vs fixed box b, both corner form, plus d(giou)/d(corners_a).
double giou_corners_grad(const std::array<double, 4>& a,
                         const std::array<double, 4>& b,
                         std::array<double, 4>& da) {
  const double ax1 = a[0], ay1 = a[1], ax2 = a[2], ay2 = a[3];
  const double bx1 = b[0], by1 = b[1], bx2 = b[2], by2 = b[3];
  const double iw = std::min(ax2, bx2) - std::max(ax1, bx1);
  const double ih = std::min(ay2, by2) - std::max(ay1, by1);
  const bool overlap = iw > 0.0 && ih > 0.0;
  const double inter = overlap ? iw * ih : 0.0;
  const double areaA = (ax2 - ax1) * (ay2 - ay1);
  const double areaB = (bx2 - bx1) * (by2 - by1);
  const double uni = areaA + areaB - inter;
  const double cw = std::max(ax2, bx2) - std::min(ax1, bx1);
  const double ch = std::max(ay2, by2) - std::min(ay1, by1);
  const double enclose = cw * ch;
  const double giou = inter / uni - (enclose - uni) / enclose;

  // dI/d corners
  std::array<double, 4> dI{0, 0, 0, 0};
  if (overlap) {
    dI[0] = (ax1 > bx1) ? -ih : 0.0;
    dI[2] = (ax2 < bx2) ? ih : 0.0;
    dI[1] = (ay1 > by1) ? -iw : 0.0;
    dI[3] = (ay2 < by2) ? iw : 0.0;
  }
  // dA/d corners
  const std::array<double, 4> dA{-(ay2 - ay1), -(ax2 - ax1), (ay2 - ay1),
                                 (ax2 - ax1)};
  // dC/d corners
  std::array<double, 4> dC{0, 0, 0, 0};
  dC[0] = (ax1 < bx1) ? -ch : 0.0;
  dC[2] = (ax2 > bx2) ? ch : 0.0;
  dC[1] = (ay1 < by1) ? -cw : 0.0;
  dC[3] = (ay2 > by2) ? cw : 0.0;

  // giou = I/U + U/C - 1 with U = A + B - I.
  for (int i = 0; i < 4; ++i) {
    const double dU = dA[i] - dI[i];
    da[i] = (dI[i] * uni - inter * dU) / (uni * uni) +
            (dU * enclose - uni * dC[i]) / (enclose * enclose);
  }
  return giou;
}

}  // namespace

Var Graph::giou_value(Var pred_center_size, Mat gt_center_size) {
  check_id(pred_center_size);
  const Mat& P = val_of(pred_center_size.id);
  if (P.rows() != 1 || P.cols() != 4 || gt_center_size.rows() != 1 ||
      gt_center_size.cols() != 4) {
    throw ShapeError("giou_value: boxes must be 1x4 center-size rows");
  }
  if (!(P(0, 2) > 0.0) || !(P(0, 3) > 0.0) || !(gt_center_size(0, 2) > 0.0) ||
      !(gt_center_size(0, 3) > 0.0)) {
    throw GeometryError("giou_value: degenerate box");
  }
  const std::array<double, 4> a{P(0, 0) - 0.5 * P(0, 2),
                                P(0, 1) - 0.5 * P(0, 3),
                                P(0, 0) + 0.5 * P(0, 2),
                                P(0, 1) + 0.5 * P(0, 3)};
  const std::array<double, 4> b{
      gt_center_size(0, 0) - 0.5 * gt_center_size(0, 2),
      gt_center_size(0, 1) - 0.5 * gt_center_size(0, 3),
      gt_center_size(0, 0) + 0.5 * gt_center_size(0, 2),
      gt_center_size(0, 1) + 0.5 * gt_center_size(0, 3)};
  std::array<double, 4> da{};
  const double val = giou_corners_grad(a, b, da);
  // chain corners -> center-size
  const std::array<double, 4> dcs{da[0] + da[2], da[1] + da[3],
                                  0.5 * (da[2] - da[0]),
                                  0.5 * (da[3] - da[1])};
  Mat out(1, 1);
  out(0, 0) = val;
  return emplace(std::move(out),
                 [pred_center_size, dcs](Graph& g, Node& self) {
                   const double go = self.grad(0, 0);
                   Mat& dp = g.grad_of(pred_center_size.id);
                   for (int i = 0; i < 4; ++i) dp(0, i) += go * dcs[i];
                 });
}

Var Graph::sum_all(Var a) {
  check_id(a);
  Mat out(1, 1);
  out(0, 0) = val_of(a.id).sum();
  return emplace(std::move(out), [a](Graph& g, Node& self) {
    g.grad_of(a.id).array() += self.grad(0, 0);
  });
}

void Graph::backward(Var root) {
  check_id(root);
  Node& r = nodes_[root.id];
  if (r.value.rows() != 1 || r.value.cols() != 1) {
    throw ShapeError("backward: root must be scalar (1x1)");
  }
  grad_of(root.id)(0, 0) = 1.0;
  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad_ready && n.back) {
      n.back(*this, n);
    }
  }
}

// ---------------------------------------------------------------------------
// AdamW

AdamW::AdamW(ParamStore& params, Options opts)
    : params_(params), opts_(opts) {}

void AdamW::step(double lr_scale) {
  ++t_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  for (Parameter* p : params_.all()) {
    if (!p->trainable || p->lr == 0.0) continue;
    if (p->adam_m.size() == 0) {
      p->adam_m = Mat::Zero(p->value.rows(), p->value.cols());
      p->adam_v = Mat::Zero(p->value.rows(), p->value.cols());
    }
    p->adam_m = opts_.beta1 * p->adam_m + (1.0 - opts_.beta1) * p->grad;
    p->adam_v = opts_.beta2 * p->adam_v.array() +
                (1.0 - opts_.beta2) * p->grad.array().square();
    const double lr = lr_scale * p->lr;
    p->value.array() -=
        lr * (p->adam_m.array() / bc1) /
        ((p->adam_v.array() / bc2).sqrt() + opts_.eps);
    if (p->weight_decay && opts_.weight_decay > 0.0) {
      p->value.array() -= lr * opts_.weight_decay * p->value.array();
    }
  }
}

// ---------------------------------------------------------------------------
// Gradient checking

GradCheckReport grad_check(ParamStore& params,
                           const std::function<double(bool)>& loss_fn,
                           const GradCheckOptions& opts) {
  params.zero_grads();
  const double base = loss_fn(true);
  if (!std::isfinite(base)) {
    throw Error("grad_check: non-finite loss");
  }

  GradCheckReport report;
  for (Parameter* p : params.all()) {
    if (!p->trainable) continue;
    const Mat analytic = p->grad;
    const int total = static_cast<int>(p->value.size());
    std::vector<int> entries;
    if (opts.max_entries_per_param <= 0 ||
        total <= opts.max_entries_per_param) {
      entries.resize(total);
      for (int i = 0; i < total; ++i) entries[i] = i;
    } else {
      Rng rng = Rng::seeded(opts.seed ^ Rng::hash_string(p->name));
      for (int i = 0; i < opts.max_entries_per_param; ++i) {
        entries.push_back(static_cast<int>(rng.index(total)));
      }
    }
    for (int idx : entries) {
      double* w = p->value.data() + idx;
      const double saved = *w;
      *w = saved + opts.epsilon;
      const double fp = loss_fn(false);
      *w = saved - opts.epsilon;
      const double fm = loss_fn(false);
      *w = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        throw Error("grad_check: non-finite loss during perturbation");
      }
      const double numeric = (fp - fm) / (2.0 * opts.epsilon);
      const double a = analytic.data()[idx];
      ++report.entries_checked;
      if (std::abs(a) < opts.denom_floor &&
          std::abs(numeric) < opts.denom_floor) {
        continue;
      }
      const double rel = std::abs(a - numeric) /
                         std::max(std::abs(numeric), opts.denom_floor);
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = p->name;
        report.worst_index = idx;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace skvg
