#include "hop/diffcore.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

namespace hop::ad {

namespace {

std::atomic<std::uint64_t> g_next_tape_id{1};

Error shape_error(std::string_view op, const Matrix& a, const Matrix& b) {
  std::ostringstream os;
  os << op << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x" << b.cols();
  return Error(ErrorCode::kDimensionMismatch, os.str());
}

bool is_scalar(const Matrix& m) { return m.rows() == 1 && m.cols() == 1; }

template <class Fwd, class Deriv>
NodeId unary(Tape& t, std::string_view op, NodeId a, Fwd fwd, Deriv deriv) {
  const Matrix x = t.value(a);
  Matrix y = x.unaryExpr(fwd);
  Matrix local(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) local.data()[i] = deriv(x.data()[i], y.data()[i]);
  return t.record(op, {a}, std::move(y), [local = std::move(local)](const Matrix& g, std::vector<Matrix>& gi) {
    gi[0].array() += g.array() * local.array();
  });
}

// Elementwise binary op with scalar broadcast. da/db give the local partials.
template <class Fwd, class Da, class Db>
NodeId binary(Tape& t, std::string_view op, NodeId a, NodeId b, Fwd fwd, Da da, Db db) {
  const Matrix& va = t.value(a);
  const Matrix& vb = t.value(b);
  const bool a_scalar = is_scalar(va) && !is_scalar(vb);
  const bool b_scalar = is_scalar(vb) && !is_scalar(va);
  if (!a_scalar && !b_scalar && (va.rows() != vb.rows() || va.cols() != vb.cols())) {
    throw shape_error(op, va, vb);
  }
  const Eigen::Index rows = a_scalar ? vb.rows() : va.rows();
  const Eigen::Index cols = a_scalar ? vb.cols() : va.cols();
  const Matrix xa = a_scalar ? Matrix::Constant(rows, cols, va(0, 0)) : va;
  const Matrix xb = b_scalar ? Matrix::Constant(rows, cols, vb(0, 0)) : vb;
  Matrix y(rows, cols);
  Matrix pa(rows, cols);
  Matrix pb(rows, cols);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double u = xa.data()[i];
    const double w = xb.data()[i];
    y.data()[i] = fwd(u, w);
    pa.data()[i] = da(u, w);
    pb.data()[i] = db(u, w);
  }
  return t.record(op, {a, b}, std::move(y),
                  [pa = std::move(pa), pb = std::move(pb), a_scalar, b_scalar](const Matrix& g, std::vector<Matrix>& gi) {
                    if (a_scalar) {
                      gi[0](0, 0) += (g.array() * pa.array()).sum();
                    } else {
                      gi[0].array() += g.array() * pa.array();
                    }
                    if (b_scalar) {
                      gi[1](0, 0) += (g.array() * pb.array()).sum();
                    } else {
                      gi[1].array() += g.array() * pb.array();
                    }
                  });
}

}  // namespace

Tape::Tape() : id_(g_next_tape_id.fetch_add(1)) {}

NodeId Tape::constant(Matrix value) { return record("constant", {}, std::move(value), nullptr); }

NodeId Tape::constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

NodeId Tape::parameter(Matrix value) {
  NodeId id = record("parameter", {}, std::move(value), nullptr);
  nodes_.back().parameter = true;
  nodes_.back().needs_grad = true;
  return id;
}

NodeId Tape::record(std::string_view op, std::vector<NodeId> inputs, Matrix value, Backward backward) {
  if (!value.allFinite()) {
    throw Error(ErrorCode::kNonFinite, std::string("non-finite forward value in ") + std::string(op));
  }
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (const NodeId& in : inputs) {
    node(in);  // validates ownership and range
    n.inputs.push_back(in.index);
    n.needs_grad = n.needs_grad || nodes_[in.index].needs_grad;
  }
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1), id_};
}

const Tape::Node& Tape::node(NodeId id) const {
  if (id.tape != id_ || id.index >= nodes_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "node id does not belong to this tape");
  }
  return nodes_[id.index];
}

const Matrix& Tape::value(NodeId id) const { return node(id).value; }

double Tape::scalar(NodeId id) const {
  const Matrix& v = value(id);
  if (!is_scalar(v)) throw Error(ErrorCode::kDimensionMismatch, "scalar(): node is not 1x1");
  return v(0, 0);
}

std::string_view Tape::op(NodeId id) const { return node(id).op; }

bool Tape::is_parameter(NodeId id) const { return node(id).parameter; }

const Matrix& Gradients::wrt(NodeId id) const {
  auto it = grads_.find(id.index);
  if (id.tape != tape_ || it == grads_.end()) {
    throw Error(ErrorCode::kInvalidArgument, "gradient requested for a non-parameter node");
  }
  return it->second;
}

Gradients backward(const Tape& tape, NodeId output) {
  const Matrix& out = tape.value(output);
  if (!is_scalar(out)) throw Error(ErrorCode::kInvalidArgument, "backward: output must be scalar");

  std::vector<Matrix> adj(output.index + 1);
  adj[output.index] = Matrix::Ones(1, 1);
  for (std::int64_t i = output.index; i >= 0; --i) {
    const auto& n = tape.nodes_[static_cast<std::size_t>(i)];
    if (!n.needs_grad || adj[i].size() == 0 || !n.backward) continue;
    std::vector<Matrix> gi;
    gi.reserve(n.inputs.size());
    for (std::uint32_t in : n.inputs) {
      const Matrix& v = tape.nodes_[in].value;
      gi.push_back(Matrix::Zero(v.rows(), v.cols()));
    }
    n.backward(adj[i], gi);
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      const std::uint32_t in = n.inputs[k];
      if (!tape.nodes_[in].needs_grad) continue;
      if (adj[in].size() == 0) {
        adj[in] = std::move(gi[k]);
      } else {
        adj[in] += gi[k];
      }
    }
  }

  Gradients g;
  g.tape_ = tape.id_;
  for (std::uint32_t i = 0; i < tape.nodes_.size(); ++i) {
    const auto& n = tape.nodes_[i];
    if (!n.parameter) continue;
    if (i <= output.index && adj[i].size() != 0) {
      g.grads_.emplace(i, std::move(adj[i]));
    } else {
      g.grads_.emplace(i, Matrix::Zero(n.value.rows(), n.value.cols()));
    }
  }
  return g;
}

NodeId add(Tape& t, NodeId a, NodeId b) {
  return binary(
      t, "add", a, b, [](double u, double w) { return u + w; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

NodeId sub(Tape& t, NodeId a, NodeId b) {
  return binary(
      t, "sub", a, b, [](double u, double w) { return u - w; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

NodeId mul(Tape& t, NodeId a, NodeId b) {
  return binary(
      t, "mul", a, b, [](double u, double w) { return u * w; }, [](double, double w) { return w; },
      [](double u, double) { return u; });
}

NodeId div(Tape& t, NodeId a, NodeId b) {
  return binary(
      t, "div", a, b, [](double u, double w) { return u / w; }, [](double, double w) { return 1.0 / w; },
      [](double u, double w) { return -u / (w * w); });
}

NodeId neg(Tape& t, NodeId a) {
  return unary(t, "neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

NodeId scale(Tape& t, NodeId a, double s) {
  return unary(t, "scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

NodeId add_scalar(Tape& t, NodeId a, double s) {
  return unary(t, "add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

NodeId matmul(Tape& t, NodeId a, NodeId b, bool transpose_b) {
  Matrix va = t.value(a);
  Matrix vb = t.value(b);
  const Eigen::Index inner = transpose_b ? vb.cols() : vb.rows();
  if (va.cols() != inner) throw shape_error("matmul", va, vb);
  Matrix y = transpose_b ? Matrix(va * vb.transpose()) : Matrix(va * vb);
  return t.record("matmul", {a, b}, std::move(y),
                  [va = std::move(va), vb = std::move(vb), transpose_b](const Matrix& g, std::vector<Matrix>& gi) {
                    if (transpose_b) {
                      gi[0].noalias() += g * vb;
                      gi[1].noalias() += g.transpose() * va;
                    } else {
                      gi[0].noalias() += g * vb.transpose();
                      gi[1].noalias() += va.transpose() * g;
                    }
                  });
}

NodeId add_bias(Tape& t, NodeId a, NodeId row) {
  const Matrix& va = t.value(a);
  const Matrix& vr = t.value(row);
  if (vr.rows() != 1 || vr.cols() != va.cols()) throw shape_error("add_bias", va, vr);
  Matrix y = va.rowwise() + vr.row(0);
  return t.record("add_bias", {a, row}, std::move(y), [](const Matrix& g, std::vector<Matrix>& gi) {
    gi[0] += g;
    gi[1] += g.colwise().sum();
  });
}

NodeId scale_rows(Tape& t, NodeId a, NodeId s) {
  Matrix va = t.value(a);
  Matrix vs = t.value(s);
  if (vs.cols() != 1 || vs.rows() != va.rows()) throw shape_error("scale_rows", va, vs);
  Matrix y = va.array().colwise() * vs.col(0).array();
  return t.record("scale_rows", {a, s}, std::move(y),
                  [va = std::move(va), vs = std::move(vs)](const Matrix& g, std::vector<Matrix>& gi) {
                    gi[0].array() += g.array().colwise() * vs.col(0).array();
                    gi[1].col(0) += (g.array() * va.array()).rowwise().sum().matrix();
                  });
}

NodeId sum(Tape& t, NodeId a) {
  Matrix y = Matrix::Constant(1, 1, t.value(a).sum());
  return t.record("sum", {a}, std::move(y),
                  [](const Matrix& g, std::vector<Matrix>& gi) { gi[0].array() += g(0, 0); });
}

NodeId sum_axis(Tape& t, NodeId a, Axis axis) {
  const Matrix& va = t.value(a);
  if (axis == Axis::kCols) {
    Matrix y = va.rowwise().sum();
    return t.record("sum_cols", {a}, std::move(y), [](const Matrix& g, std::vector<Matrix>& gi) {
      gi[0].colwise() += g.col(0);
    });
  }
  Matrix y = va.colwise().sum();
  return t.record("sum_rows", {a}, std::move(y), [](const Matrix& g, std::vector<Matrix>& gi) {
    gi[0].rowwise() += g.row(0);
  });
}

NodeId mean(Tape& t, NodeId a) {
  const double n = static_cast<double>(t.value(a).size());
  Matrix y = Matrix::Constant(1, 1, t.value(a).sum() / n);
  return t.record("mean", {a}, std::move(y),
                  [n](const Matrix& g, std::vector<Matrix>& gi) { gi[0].array() += g(0, 0) / n; });
}

NodeId dot(Tape& t, NodeId a, NodeId b) {
  Matrix va = t.value(a);
  Matrix vb = t.value(b);
  if (va.rows() != vb.rows() || va.cols() != vb.cols()) throw shape_error("dot", va, vb);
  Matrix y = (va.array() * vb.array()).rowwise().sum();
  return t.record("dot", {a, b}, std::move(y),
                  [va = std::move(va), vb = std::move(vb)](const Matrix& g, std::vector<Matrix>& gi) {
                    gi[0].array() += vb.array().colwise() * g.col(0).array();
                    gi[1].array() += va.array().colwise() * g.col(0).array();
                  });
}

NodeId l2norm(Tape& t, NodeId a) {
  Matrix va = t.value(a);
  Matrix y = va.rowwise().norm();
  Matrix norms = y;
  return t.record("l2norm", {a}, std::move(y),
                  [va = std::move(va), norms = std::move(norms)](const Matrix& g, std::vector<Matrix>& gi) {
                    for (Eigen::Index i = 0; i < va.rows(); ++i) {
                      if (norms(i, 0) == 0.0) continue;
                      gi[0].row(i) += (g(i, 0) / norms(i, 0)) * va.row(i);
                    }
                  });
}

NodeId quadform(Tape& t, NodeId y, std::shared_ptr<const std::vector<Matrix>> mats) {
  Matrix vy = t.value(y);
  const Eigen::Index rows = vy.rows();
  const Eigen::Index n = vy.cols();
  if (!mats || (mats->size() != 1 && static_cast<Eigen::Index>(mats->size()) != rows)) {
    throw Error(ErrorCode::kDimensionMismatch, "quadform: need one matrix or one per row");
  }
  Matrix out(rows, 1);
  Matrix grad_rows(rows, n);
  if (mats->size() == 1) {
    const Matrix& M = mats->front();
    if (M.rows() != n || M.cols() != n) throw shape_error("quadform", vy, M);
    const Matrix my = vy * M.transpose();
    out = vy.cwiseProduct(my).rowwise().sum();
    grad_rows = my + vy * M;
  }
  for (Eigen::Index i = 0; i < rows && mats->size() != 1; ++i) {
    const Matrix& M = mats->size() == 1 ? mats->front() : (*mats)[static_cast<std::size_t>(i)];
    if (M.rows() != n || M.cols() != n) throw shape_error("quadform", vy, M);
    const RowVector yi = vy.row(i);
    const RowVector My = (M * yi.transpose()).transpose();
    const RowVector Mty = yi * M;
    out(i, 0) = yi.dot(My);
    grad_rows.row(i) = My + Mty;
  }
  return t.record("quadform", {y}, std::move(out), [grad_rows = std::move(grad_rows)](const Matrix& g, std::vector<Matrix>& gi) {
    gi[0].array() += grad_rows.array().colwise() * g.col(0).array();
  });
}

NodeId abs(Tape& t, NodeId a) {
  return unary(
      t, "abs", a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

NodeId relu(Tape& t, NodeId a) {
  return unary(
      t, "relu", a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

NodeId sigmoid(Tape& t, NodeId a) {
  return unary(
      t, "sigmoid", a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

NodeId tanh(Tape& t, NodeId a) {
  return unary(
      t, "tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

NodeId sin(Tape& t, NodeId a) {
  return unary(
      t, "sin", a, [](double x) { return std::sin(x); }, [](double x, double) { return std::cos(x); });
}

NodeId cos(Tape& t, NodeId a) {
  return unary(
      t, "cos", a, [](double x) { return std::cos(x); }, [](double x, double) { return -std::sin(x); });
}

NodeId tan(Tape& t, NodeId a) {
  return unary(
      t, "tan", a, [](double x) { return std::tan(x); }, [](double, double y) { return 1.0 + y * y; });
}

NodeId atan(Tape& t, NodeId a) {
  return unary(
      t, "atan", a, [](double x) { return std::atan(x); }, [](double x, double) { return 1.0 / (1.0 + x * x); });
}

NodeId exp(Tape& t, NodeId a) {
  return unary(
      t, "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

NodeId log(Tape& t, NodeId a) {
  return unary(
      t, "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

NodeId sqrt(Tape& t, NodeId a) {
  return unary(
      t, "sqrt", a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

NodeId pow(Tape& t, NodeId a, double e) {
  return unary(
      t, "pow", a, [e](double x) { return std::pow(x, e); },
      [e](double x, double) {
        if (x == 0.0 && e < 1.0) return 0.0;
        return e * std::pow(x, e - 1.0);
      });
}

NodeId min_over_axis(Tape& t, NodeId a, Axis axis) {
  const Matrix& va = t.value(a);
  const bool per_row = axis == Axis::kCols;
  const Eigen::Index outer = per_row ? va.rows() : va.cols();
  const Eigen::Index inner = per_row ? va.cols() : va.rows();
  if (inner == 0) throw Error(ErrorCode::kDimensionMismatch, "min_over_axis: empty axis");
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(outer));
  Matrix y = per_row ? Matrix(outer, 1) : Matrix(1, outer);
  for (Eigen::Index o = 0; o < outer; ++o) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < inner; ++k) {
      const double cand = per_row ? va(o, k) : va(k, o);
      const double cur = per_row ? va(o, best) : va(best, o);
      if (cand < cur) best = k;
    }
    arg[static_cast<std::size_t>(o)] = best;
    y.data()[o] = per_row ? va(o, best) : va(best, o);
  }
  return t.record("min_over_axis", {a}, std::move(y),
                  [arg = std::move(arg), per_row](const Matrix& g, std::vector<Matrix>& gi) {
                    for (std::size_t o = 0; o < arg.size(); ++o) {
                      const auto oi = static_cast<Eigen::Index>(o);
                      if (per_row) {
                        gi[0](oi, arg[o]) += g(oi, 0);
                      } else {
                        gi[0](arg[o], oi) += g(0, oi);
                      }
                    }
                  });
}

NodeId concat(Tape& t, const std::vector<NodeId>& parts, Axis axis) {
  if (parts.empty()) throw Error(ErrorCode::kInvalidArgument, "concat: no inputs");
  const bool cols = axis == Axis::kCols;
  const Matrix& first = t.value(parts.front());
  Eigen::Index total = 0;
  std::vector<Eigen::Index> widths;
  for (const NodeId& p : parts) {
    const Matrix& v = t.value(p);
    if ((cols && v.rows() != first.rows()) || (!cols && v.cols() != first.cols())) {
      throw shape_error("concat", first, v);
    }
    widths.push_back(cols ? v.cols() : v.rows());
    total += widths.back();
  }
  Matrix y = cols ? Matrix(first.rows(), total) : Matrix(total, first.cols());
  Eigen::Index offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Matrix& v = t.value(parts[k]);
    if (cols) {
      y.middleCols(offset, widths[k]) = v;
    } else {
      y.middleRows(offset, widths[k]) = v;
    }
    offset += widths[k];
  }
  return t.record("concat", parts, std::move(y), [widths, cols](const Matrix& g, std::vector<Matrix>& gi) {
    Eigen::Index off = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      if (cols) {
        gi[k] += g.middleCols(off, widths[k]);
      } else {
        gi[k] += g.middleRows(off, widths[k]);
      }
      off += widths[k];
    }
  });
}

NodeId slice(Tape& t, NodeId a, int begin, int count) {
  const Matrix& va = t.value(a);
  if (begin < 0 || count < 0 || begin + count > va.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "slice: column range out of bounds");
  }
  Matrix y = va.middleCols(begin, count);
  return t.record("slice", {a}, std::move(y), [begin, count](const Matrix& g, std::vector<Matrix>& gi) {
    gi[0].middleCols(begin, count) += g;
  });
}

GradcheckReport gradcheck(const ScalarFunction& f, const Vector& x, double h) {
  GradcheckReport report;
  const auto n = x.size();
  {
    Tape tape;
    const NodeId xi = tape.parameter(Matrix(x.transpose()));
    const NodeId out = f(tape, xi);
    const Gradients g = backward(tape, out);
    report.analytic = g.wrt(xi).row(0).transpose();
  }
  auto eval = [&](const Vector& p) {
    Tape tape;
    const NodeId xi = tape.constant(Matrix(p.transpose()));
    return tape.scalar(f(tape, xi));
  };
  report.numeric.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vector hi = x;
    Vector lo = x;
    hi(i) += h;
    lo(i) -= h;
    report.numeric(i) = (eval(hi) - eval(lo)) / (2.0 * h);
    const double a = report.analytic(i);
    const double num = report.numeric(i);
    const double denom = std::max({1.0, std::abs(a), std::abs(num)});
    report.max_rel_error = std::max(report.max_rel_error, std::abs(a - num) / denom);
  }
  return report;
}

}  // namespace hop::ad
