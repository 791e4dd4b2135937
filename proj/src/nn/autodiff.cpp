// Copyright 2026 The pcfuse Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pcfuse/nn/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "pcfuse/errors.hpp"

namespace pcfuse::nn {

namespace {

std::shared_ptr<Node> make_node(Mat value, std::vector<std::shared_ptr<Node>> parents) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  for (const auto& p : parents) node->requires_grad = node->requires_grad || p->requires_grad;
  node->parents = std::move(parents);
  return node;
}

void require_same_shape(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

void topo_visit(Node* n, std::unordered_set<Node*>& seen, std::vector<Node*>& order) {
  // Iterative DFS; graphs from deep MLPs are shallow but batches are wide.
  std::vector<std::pair<Node*, std::size_t>> stack{{n, 0}};
  seen.insert(n);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
}

}  // namespace

void Node::accumulate(const Mat& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

void Var::zero_grad() { node_->grad = Mat::Zero(node_->value.rows(), node_->value.cols()); }

Var constant(Mat value) { return Var(make_node(std::move(value), {})); }

Var parameter(Mat value) {
  auto node = make_node(std::move(value), {});
  node->requires_grad = true;
  node->grad = Mat::Zero(node->value.rows(), node->value.cols());
  return Var(node);
}

KinkMonitor& kink_monitor() {
  thread_local KinkMonitor monitor;
  return monitor;
}

void backward(const Var& root) {
  if (root.rows() != 1 || root.cols() != 1) throw std::invalid_argument("backward needs a scalar root");
  if (!root.requires_grad()) return;
  std::unordered_set<Node*> seen;
  std::vector<Node*> order;
  topo_visit(root.node().get(), seen, order);
  // Interior nodes get a fresh gradient; leaves keep accumulating.
  for (Node* n : order) {
    if (!n->parents.empty()) n->grad = Mat::Zero(n->value.rows(), n->value.cols());
  }
  root.node()->grad(0, 0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  auto node = make_node(a.value() + b.value(), {a.node(), b.node()});
  node->backward_fn = [](Node& n) {
    for (auto& p : n.parents) {
      if (p->requires_grad) p->accumulate(n.grad);
    }
  };
  return Var(node);
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "sub");
  auto node = make_node(a.value() - b.value(), {a.node(), b.node()});
  node->backward_fn = [](Node& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad);
    if (n.parents[1]->requires_grad) n.parents[1]->accumulate(-n.grad);
  };
  return Var(node);
}

Var mul(const Var& a, double k) {
  auto node = make_node(a.value() * k, {a.node()});
  node->backward_fn = [k](Node& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad * k);
  };
  return Var(node);
}

Var scale(const Var& a, const Var& s) {
  if (s.rows() != 1 || s.cols() != 1) throw std::invalid_argument("scale: factor must be 1x1");
  auto node = make_node(a.value() * s.scalar(), {a.node(), s.node()});
  node->backward_fn = [](Node& n) {
    auto& a_node = n.parents[0];
    auto& s_node = n.parents[1];
    if (a_node->requires_grad) a_node->accumulate(n.grad * s_node->value(0, 0));
    if (s_node->requires_grad) {
      Mat g(1, 1);
      g(0, 0) = n.grad.cwiseProduct(a_node->value).sum();
      s_node->accumulate(g);
    }
  };
  return Var(node);
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: bias shape mismatch");
  Mat out = a.value();
  out.rowwise() += row.value().row(0);
  auto node = make_node(std::move(out), {a.node(), row.node()});
  node->backward_fn = [](Node& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad);
    if (n.parents[1]->requires_grad) n.parents[1]->accumulate(n.grad.colwise().sum());
  };
  return Var(node);
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  auto node = make_node(a.value() * b.value(), {a.node(), b.node()});
  node->backward_fn = [](Node& n) {
    auto& pa = n.parents[0];
    auto& pb = n.parents[1];
    if (pa->requires_grad) pa->accumulate(n.grad * pb->value.transpose());
    if (pb->requires_grad) pb->accumulate(pa->value.transpose() * n.grad);
  };
  return Var(node);
}

Var relu(const Var& a) {
  auto& mon = kink_monitor();
  if (mon.enabled) {
    for (Eigen::Index i = 0; i < a.value().size(); ++i) mon.trace.push_back(a.value().data()[i] > 0.0);
  }
  auto node = make_node(a.value().cwiseMax(0.0), {a.node()});
  node->backward_fn = [](Node& n) {
    auto& p = n.parents[0];
    if (!p->requires_grad) return;
    p->accumulate((p->value.array() > 0.0).select(n.grad, 0.0));
  };
  return Var(node);
}

Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size()) throw std::invalid_argument("reshape: size mismatch");
  Mat out = Eigen::Map<const Mat>(a.value().data(), rows, cols);
  auto node = make_node(std::move(out), {a.node()});
  node->backward_fn = [](Node& n) {
    auto& p = n.parents[0];
    if (!p->requires_grad) return;
    p->accumulate(Eigen::Map<const Mat>(n.grad.data(), p->value.rows(), p->value.cols()));
  };
  return Var(node);
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 1 || start + count > a.cols()) throw std::invalid_argument("slice_cols: out of range");
  auto node = make_node(a.value().middleCols(start, count), {a.node()});
  node->backward_fn = [start, count](Node& n) {
    auto& p = n.parents[0];
    if (!p->requires_grad) return;
    Mat g = Mat::Zero(p->value.rows(), p->value.cols());
    g.middleCols(start, count) = n.grad;
    p->accumulate(g);
  };
  return Var(node);
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  std::vector<std::shared_ptr<Node>> parents;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    cols += p.cols();
    parents.push_back(p.node());
  }
  Mat out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  auto node = make_node(std::move(out), std::move(parents));
  node->backward_fn = [](Node& n) {
    Eigen::Index col = 0;
    for (auto& p : n.parents) {
      if (p->requires_grad) p->accumulate(n.grad.middleCols(col, p->value.cols()));
      col += p->value.cols();
    }
  };
  return Var(node);
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  std::vector<std::shared_ptr<Node>> parents;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
    rows += p.rows();
    parents.push_back(p.node());
  }
  Mat out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  auto node = make_node(std::move(out), std::move(parents));
  node->backward_fn = [](Node& n) {
    Eigen::Index row = 0;
    for (auto& p : n.parents) {
      if (p->requires_grad) p->accumulate(n.grad.middleRows(row, p->value.rows()));
      row += p->value.rows();
    }
  };
  return Var(node);
}

Var select_rows(const Var& a, std::span<const Eigen::Index> indices) {
  Mat out(static_cast<Eigen::Index>(indices.size()), a.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= a.rows()) throw std::invalid_argument("select_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(indices[i]);
  }
  std::vector<Eigen::Index> idx(indices.begin(), indices.end());
  auto node = make_node(std::move(out), {a.node()});
  node->backward_fn = [idx](Node& n) {
    auto& p = n.parents[0];
    if (!p->requires_grad) return;
    Mat g = Mat::Zero(p->value.rows(), p->value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) g.row(idx[i]) += n.grad.row(static_cast<Eigen::Index>(i));
    p->accumulate(g);
  };
  return Var(node);
}

Var sum_all(const Var& a) {
  Mat out(1, 1);
  out(0, 0) = a.value().sum();
  auto node = make_node(std::move(out), {a.node()});
  node->backward_fn = [](Node& n) {
    auto& p = n.parents[0];
    if (p->requires_grad) p->accumulate(Mat::Constant(p->value.rows(), p->value.cols(), n.grad(0, 0)));
  };
  return Var(node);
}

Var mean_all(const Var& a) { return mul(sum_all(a), 1.0 / static_cast<double>(a.value().size())); }

Var max_rows(const Var& a, Eigen::Index valid_rows) {
  const Eigen::Index rows = valid_rows < 0 ? a.rows() : std::min(valid_rows, a.rows());
  const Eigen::Index cols = a.cols();
  Mat out = Mat::Zero(1, cols);
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(cols), -1);
  auto& mon = kink_monitor();
  for (Eigen::Index c = 0; c < cols; ++c) {
    double best = -std::numeric_limits<double>::infinity();
    double second = -std::numeric_limits<double>::infinity();
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double v = a.value()(r, c);
      if (v > best) {
        second = best;
        best = v;
        arg[static_cast<std::size_t>(c)] = r;
      } else if (v > second) {
        second = v;
      }
    }
    if (rows > 0) out(0, c) = best;
    if (mon.enabled) mon.trace.push_back(arg[static_cast<std::size_t>(c)]);
  }
  auto node = make_node(std::move(out), {a.node()});
  node->backward_fn = [arg = std::move(arg)](Node& n) {
    auto& p = n.parents[0];
    if (!p->requires_grad) return;
    Mat g = Mat::Zero(p->value.rows(), p->value.cols());
    for (std::size_t c = 0; c < arg.size(); ++c) {
      if (arg[c] >= 0) g(arg[c], static_cast<Eigen::Index>(c)) = n.grad(0, static_cast<Eigen::Index>(c));
    }
    p->accumulate(g);
  };
  return Var(node);
}

Var softmax_rows(const Var& a) {
  Mat out(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double m = a.value().row(r).maxCoeff();
    out.row(r) = (a.value().row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  auto node = make_node(std::move(out), {a.node()});
  node->backward_fn = [](Node& n) {
    auto& p = n.parents[0];
    if (!p->requires_grad) return;
    Mat g(n.value.rows(), n.value.cols());
    for (Eigen::Index r = 0; r < n.value.rows(); ++r) {
      const double dot = n.grad.row(r).dot(n.value.row(r));
      g.row(r) = n.value.row(r).array() * (n.grad.row(r).array() - dot);
    }
    p->accumulate(g);
  };
  return Var(node);
}

Var normalize_plane_head(const Var& a) {
  if (a.value().size() != 4) throw std::invalid_argument("plane head must have 4 outputs");
  const Eigen::Vector3d v(a.value()(0), a.value()(1), a.value()(2));
  const double len = v.norm();
  if (!(len > 0.0) || !std::isfinite(len)) throw NumericalError("plane head produced a zero or non-finite normal");
  Mat out(1, 4);
  out << v.x() / len, v.y() / len, v.z() / len, a.value()(3);
  auto node = make_node(std::move(out), {a.node()});
  node->backward_fn = [len](Node& n) {
    auto& p = n.parents[0];
    if (!p->requires_grad) return;
    const Eigen::Vector3d u(n.value(0), n.value(1), n.value(2));
    const Eigen::Vector3d gu(n.grad(0), n.grad(1), n.grad(2));
    // d(v/|v|)/dv = (I - u u^T) / |v|
    const Eigen::Vector3d gv = (gu - u * u.dot(gu)) / len;
    Mat g(p->value.rows(), p->value.cols());
    g(0) = gv.x();
    g(1) = gv.y();
    g(2) = gv.z();
    g(3) = n.grad(3);
    p->accumulate(g);
  };
  return Var(node);
}

Var smooth_l1(const Var& pred, const Mat& target) {
  require_same_shape(pred.value(), target, "smooth_l1");
  const Mat e = pred.value() - target;
  auto& mon = kink_monitor();
  if (mon.enabled) {
    for (Eigen::Index i = 0; i < e.size(); ++i) mon.trace.push_back(e.data()[i] > 1.0 ? 1 : (e.data()[i] < -1.0 ? -1 : 0));
  }
  const double count = static_cast<double>(e.size());
  Mat out(1, 1);
  out(0, 0) = e.unaryExpr([](double x) { return std::abs(x) < 1.0 ? 0.5 * x * x : std::abs(x) - 0.5; }).sum() / count;
  auto node = make_node(std::move(out), {pred.node()});
  node->backward_fn = [e, count](Node& n) {
    auto& p = n.parents[0];
    if (!p->requires_grad) return;
    const double g0 = n.grad(0, 0) / count;
    p->accumulate(e.unaryExpr([g0](double x) { return g0 * (std::abs(x) < 1.0 ? x : (x > 0.0 ? 1.0 : -1.0)); }));
  };
  return Var(node);
}

Var cross_entropy(const Var& logits, std::span<const int> labels) {
  const Eigen::Index rows = logits.rows();
  const Eigen::Index classes = logits.cols();
  if (static_cast<Eigen::Index>(labels.size()) != rows) throw std::invalid_argument("cross_entropy: label count");
  Mat prob(rows, classes);
  double loss = 0.0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= classes) throw std::invalid_argument("cross_entropy: label out of range");
    const double m = logits.value().row(r).maxCoeff();
    const auto shifted = (logits.value().row(r).array() - m).eval();
    const double lse = std::log(shifted.exp().sum());
    loss += lse - shifted(y);
    prob.row(r) = (shifted - lse).exp();
  }
  Mat out(1, 1);
  out(0, 0) = loss / static_cast<double>(rows);
  auto node = make_node(std::move(out), {logits.node()});
  std::vector<int> lab(labels.begin(), labels.end());
  node->backward_fn = [prob = std::move(prob), lab = std::move(lab)](Node& n) {
    auto& p = n.parents[0];
    if (!p->requires_grad) return;
    Mat g = prob;
    for (std::size_t r = 0; r < lab.size(); ++r) g(static_cast<Eigen::Index>(r), lab[r]) -= 1.0;
    g *= n.grad(0, 0) / static_cast<double>(lab.size());
    p->accumulate(g);
  };
  return Var(node);
}

Var linear_map(const Var& a, std::shared_ptr<const LinearMap> map) {
  if (a.rows() != map->in_rows || a.cols() != map->in_cols) throw std::invalid_argument("linear_map: input shape");
  Mat out(map->out_rows, map->out_cols);
  map->apply(std::span<const double>(a.value().data(), static_cast<std::size_t>(a.value().size())),
             std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
  auto node = make_node(std::move(out), {a.node()});
  node->backward_fn = [map](Node& n) {
    auto& p = n.parents[0];
    if (!p->requires_grad) return;
    Mat g(map->in_rows, map->in_cols);
    map->apply_adjoint(std::span<const double>(n.grad.data(), static_cast<std::size_t>(n.grad.size())),
                       std::span<double>(g.data(), static_cast<std::size_t>(g.size())));
    p->accumulate(g);
  };
  return Var(node);
}

}  // namespace pcfuse::nn
