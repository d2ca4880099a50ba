#include "segcolor/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace segcolor::nn {

namespace {
thread_local bool g_grad_enabled = true;

bool track(const std::vector<VarPtr>& parents) {
  if (!g_grad_enabled) return false;
  for (const auto& p : parents) {
    if (p->requires_grad) return true;
  }
  return false;
}
}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

VarPtr make_leaf(Tensor value, bool requires_grad) {
  auto v = std::make_shared<Var>();
  v->value = std::move(value);
  v->requires_grad = requires_grad;
  return v;
}

VarPtr make_node(Tensor value, std::vector<VarPtr> parents,
                 std::function<void(Var&)> backward_fn) {
  auto v = std::make_shared<Var>();
  v->value = std::move(value);
  if (track(parents)) {
    v->requires_grad = true;
    v->parents = std::move(parents);
    v->backward_fn = std::move(backward_fn);
  }
  return v;
}

void backward(const VarPtr& root) {
  if (root->value.numel() != 1) {
    throw std::invalid_argument("backward: root must be scalar");
  }
  // iterative post-order topo sort
  std::vector<Var*> order;
  std::unordered_set<Var*> visited;
  std::vector<std::pair<Var*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next_child] = stack.back();
    if (next_child < node->parents.size()) {
      Var* child = node->parents[next_child].get();
      ++next_child;
      if (child->requires_grad && !visited.count(child)) {
        visited.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Var* node : order) {
    node->zero_grad();
  }
  root->grad.data[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) {
      (*it)->backward_fn(**it);
    }
  }
}

VarPtr add(const VarPtr& a, const VarPtr& b) {
  if (!a->value.same_shape(b->value)) {
    throw std::invalid_argument("add: shape mismatch");
  }
  Tensor out(a->value.shape);
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out.data[i] = a->value.data[i] + b->value.data[i];
  }
  return make_node(std::move(out), {a, b}, [a, b](Var& self) {
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::size_t i = 0; i < self.grad.numel(); ++i) a->grad.data[i] += self.grad.data[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t i = 0; i < self.grad.numel(); ++i) b->grad.data[i] += self.grad.data[i];
    }
  });
}

VarPtr scale(const VarPtr& a, double s) {
  Tensor out(a->value.shape);
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = a->value.data[i] * s;
  return make_node(std::move(out), {a}, [a, s](Var& self) {
    if (!a->requires_grad) return;
    a->ensure_grad();
    for (std::size_t i = 0; i < self.grad.numel(); ++i) a->grad.data[i] += s * self.grad.data[i];
  });
}

VarPtr relu(const VarPtr& x) {
  Tensor out(x->value.shape);
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = std::max(0.0, x->value.data[i]);
  return make_node(std::move(out), {x}, [x](Var& self) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (std::size_t i = 0; i < self.grad.numel(); ++i) {
      if (x->value.data[i] > 0.0) x->grad.data[i] += self.grad.data[i];
    }
  });
}

VarPtr concat_cols(const VarPtr& a, const VarPtr& b) {
  if (a->value.shape.size() != 2 || b->value.shape.size() != 2 ||
      a->value.dim(0) != b->value.dim(0)) {
    throw std::invalid_argument("concat_cols: expected matching row counts");
  }
  const int n = a->value.dim(0);
  const int p = a->value.dim(1);
  const int q = b->value.dim(1);
  Tensor out({n, p + q});
  for (int i = 0; i < n; ++i) {
    std::copy_n(a->value.data.begin() + static_cast<std::size_t>(i) * p, p,
                out.data.begin() + static_cast<std::size_t>(i) * (p + q));
    std::copy_n(b->value.data.begin() + static_cast<std::size_t>(i) * q, q,
                out.data.begin() + static_cast<std::size_t>(i) * (p + q) + p);
  }
  return make_node(std::move(out), {a, b}, [a, b, n, p, q](Var& self) {
    for (int i = 0; i < n; ++i) {
      const double* g = self.grad.data.data() + static_cast<std::size_t>(i) * (p + q);
      if (a->requires_grad) {
        a->ensure_grad();
        double* ga = a->grad.data.data() + static_cast<std::size_t>(i) * p;
        for (int k = 0; k < p; ++k) ga[k] += g[k];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        double* gb = b->grad.data.data() + static_cast<std::size_t>(i) * q;
        for (int k = 0; k < q; ++k) gb[k] += g[k + p];
      }
    }
  });
}

VarPtr concat_rows(const std::vector<VarPtr>& parts) {
  if (parts.empty()) {
    throw std::invalid_argument("concat_rows: no inputs");
  }
  if (parts.size() == 1) return parts.front();
  const int c = parts.front()->value.dim(1);
  int rows = 0;
  for (const auto& p : parts) {
    if (p->value.shape.size() != 2 || p->value.dim(1) != c) {
      throw std::invalid_argument("concat_rows: column mismatch");
    }
    rows += p->value.dim(0);
  }
  Tensor out({rows, c});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p->value.data.begin(), p->value.data.end(), out.data.begin() + offset);
    offset += p->value.numel();
  }
  return make_node(std::move(out), parts, [parts](Var& self) {
    std::size_t offset = 0;
    for (const auto& p : parts) {
      if (p->requires_grad) {
        p->ensure_grad();
        for (std::size_t i = 0; i < p->value.numel(); ++i) {
          p->grad.data[i] += self.grad.data[offset + i];
        }
      }
      offset += p->value.numel();
    }
  });
}

VarPtr pad_hw(const VarPtr& x, int target_h, int target_w) {
  const int h = x->value.dim(0), w = x->value.dim(1), c = x->value.dim(2);
  if (target_h < h || target_w < w) {
    throw std::invalid_argument("pad_hw: target smaller than input");
  }
  if (target_h == h && target_w == w) return x;
  Tensor out({target_h, target_w, c});
  for (int y = 0; y < h; ++y) {
    std::copy_n(x->value.data.begin() + static_cast<std::size_t>(y) * w * c,
                static_cast<std::size_t>(w) * c,
                out.data.begin() + static_cast<std::size_t>(y) * target_w * c);
  }
  return make_node(std::move(out), {x}, [x, h, w, c, target_w](Var& self) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (int y = 0; y < h; ++y) {
      const double* g = self.grad.data.data() + static_cast<std::size_t>(y) * target_w * c;
      double* gx = x->grad.data.data() + static_cast<std::size_t>(y) * w * c;
      for (std::size_t i = 0; i < static_cast<std::size_t>(w) * c; ++i) gx[i] += g[i];
    }
  });
}

VarPtr crop_hw(const VarPtr& x, int target_h, int target_w) {
  const int h = x->value.dim(0), w = x->value.dim(1), c = x->value.dim(2);
  if (target_h > h || target_w > w) {
    throw std::invalid_argument("crop_hw: target larger than input");
  }
  if (target_h == h && target_w == w) return x;
  Tensor out({target_h, target_w, c});
  for (int y = 0; y < target_h; ++y) {
    std::copy_n(x->value.data.begin() + static_cast<std::size_t>(y) * w * c,
                static_cast<std::size_t>(target_w) * c,
                out.data.begin() + static_cast<std::size_t>(y) * target_w * c);
  }
  return make_node(std::move(out), {x}, [x, w, c, target_h, target_w](Var& self) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (int y = 0; y < target_h; ++y) {
      const double* g = self.grad.data.data() + static_cast<std::size_t>(y) * target_w * c;
      double* gx = x->grad.data.data() + static_cast<std::size_t>(y) * w * c;
      for (std::size_t i = 0; i < static_cast<std::size_t>(target_w) * c; ++i) gx[i] += g[i];
    }
  });
}

VarPtr matmul(const VarPtr& a, const VarPtr& b) {
  const int m = a->value.dim(0), k = a->value.dim(1);
  const int k2 = b->value.dim(0), n = b->value.dim(1);
  if (k != k2) {
    throw std::invalid_argument("matmul: inner dims mismatch");
  }
  Tensor out({m, n});
  out.as_matrix(m, n).noalias() = a->value.as_matrix(m, k) * b->value.as_matrix(k, n);
  return make_node(std::move(out), {a, b}, [a, b, m, k, n](Var& self) {
    auto g = self.grad.as_matrix(m, n);
    if (a->requires_grad) {
      a->ensure_grad();
      a->grad.as_matrix(m, k).noalias() += g * b->value.as_matrix(k, n).transpose();
    }
    if (b->requires_grad) {
      b->ensure_grad();
      b->grad.as_matrix(k, n).noalias() += a->value.as_matrix(m, k).transpose() * g;
    }
  });
}

VarPtr linear(const VarPtr& x, const VarPtr& w, const VarPtr& b) {
  const int n = x->value.dim(0), in = x->value.dim(1);
  const int in2 = w->value.dim(0), out_dim = w->value.dim(1);
  if (in != in2 || b->value.dim(0) != out_dim) {
    throw std::invalid_argument("linear: shape mismatch");
  }
  Tensor out({n, out_dim});
  auto om = out.as_matrix(n, out_dim);
  om.noalias() = x->value.as_matrix(n, in) * w->value.as_matrix(in, out_dim);
  om.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b->value.data.data(), out_dim);
  return make_node(std::move(out), {x, w, b}, [x, w, b, n, in, out_dim](Var& self) {
    auto g = self.grad.as_matrix(n, out_dim);
    if (x->requires_grad) {
      x->ensure_grad();
      x->grad.as_matrix(n, in).noalias() += g * w->value.as_matrix(in, out_dim).transpose();
    }
    if (w->requires_grad) {
      w->ensure_grad();
      w->grad.as_matrix(in, out_dim).noalias() += x->value.as_matrix(n, in).transpose() * g;
    }
    if (b->requires_grad) {
      b->ensure_grad();
      Eigen::Map<Eigen::RowVectorXd>(b->grad.data.data(), out_dim) += g.colwise().sum();
    }
  });
}

namespace {

// Shifted-GEMM convolution core, shared by forward (accumulating into `out`
// from `x`) and the two backward passes.
void conv_forward(const Tensor& x, const Tensor& w, const Tensor& b, Tensor& out, int kernel) {
  const int h = x.dim(0), wd = x.dim(1), cin = x.dim(2);
  const int cout = w.dim(3);
  const int r = kernel / 2;
  auto om = out.as_matrix(h * wd, cout);
  om.rowwise() = Eigen::Map<const Eigen::RowVectorXd>(b.data.data(), cout);
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      ConstMapRM wt(w.data.data() +
                        (static_cast<std::size_t>(dy + r) * kernel + (dx + r)) * cin * cout,
                    cin, cout);
      for (int y = 0; y < h; ++y) {
        const int sy = y + dy;
        if (sy < 0 || sy >= h) continue;
        // output columns x where source column x+dx is valid
        const int x0 = std::max(0, -dx);
        const int x1 = std::min(wd, wd - dx);
        if (x0 >= x1) continue;
        ConstMapRM src(x.data.data() + (static_cast<std::size_t>(sy) * wd + (x0 + dx)) * cin,
                       x1 - x0, cin);
        MapRM dst(out.data.data() + (static_cast<std::size_t>(y) * wd + x0) * cout, x1 - x0, cout);
        dst.noalias() += src * wt;
      }
    }
  }
}

}  // namespace

VarPtr conv2d(const VarPtr& x, const VarPtr& w, const VarPtr& b, int kernel) {
  const int h = x->value.dim(0), wd = x->value.dim(1), cin = x->value.dim(2);
  if (w->value.dim(0) != kernel || w->value.dim(1) != kernel || w->value.dim(2) != cin) {
    throw std::invalid_argument("conv2d: weight shape mismatch");
  }
  const int cout = w->value.dim(3);
  Tensor out({h, wd, cout});
  conv_forward(x->value, w->value, b->value, out, kernel);
  return make_node(std::move(out), {x, w, b}, [x, w, b, h, wd, cin, cout, kernel](Var& self) {
    const int r = kernel / 2;
    if (b->requires_grad) {
      b->ensure_grad();
      Eigen::Map<Eigen::RowVectorXd>(b->grad.data.data(), cout) +=
          self.grad.as_matrix(h * wd, cout).colwise().sum();
    }
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx) {
        const std::size_t w_off =
            (static_cast<std::size_t>(dy + r) * kernel + (dx + r)) * cin * cout;
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(wd, wd - dx);
          if (x0 >= x1) continue;
          ConstMapRM g(self.grad.data.data() + (static_cast<std::size_t>(y) * wd + x0) * cout,
                       x1 - x0, cout);
          if (x->requires_grad) {
            x->ensure_grad();
            ConstMapRM wt(w->value.data.data() + w_off, cin, cout);
            MapRM gx(x->grad.data.data() + (static_cast<std::size_t>(sy) * wd + (x0 + dx)) * cin,
                     x1 - x0, cin);
            gx.noalias() += g * wt.transpose();
          }
          if (w->requires_grad) {
            w->ensure_grad();
            ConstMapRM src(
                x->value.data.data() + (static_cast<std::size_t>(sy) * wd + (x0 + dx)) * cin,
                x1 - x0, cin);
            MapRM gw(w->grad.data.data() + w_off, cin, cout);
            gw.noalias() += src.transpose() * g;
          }
        }
      }
    }
  });
}

VarPtr maxpool2(const VarPtr& x) {
  const int h = x->value.dim(0), w = x->value.dim(1), c = x->value.dim(2);
  if (h % 2 != 0 || w % 2 != 0) {
    throw std::invalid_argument("maxpool2: dims must be even");
  }
  const int oh = h / 2, ow = w / 2;
  Tensor out({oh, ow, c});
  auto arg = std::make_shared<std::vector<std::int32_t>>();
  const bool need_arg = track({x});
  if (need_arg) arg->resize(out.numel());
  for (int y = 0; y < oh; ++y) {
    for (int xx = 0; xx < ow; ++xx) {
      for (int k = 0; k < c; ++k) {
        double best = -1e300;
        std::int32_t best_idx = 0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            std::size_t idx =
                (static_cast<std::size_t>(2 * y + dy) * w + (2 * xx + dx)) * c + k;
            if (x->value.data[idx] > best) {
              best = x->value.data[idx];
              best_idx = static_cast<std::int32_t>(idx);
            }
          }
        }
        std::size_t o = (static_cast<std::size_t>(y) * ow + xx) * c + k;
        out.data[o] = best;
        if (need_arg) (*arg)[o] = best_idx;
      }
    }
  }
  return make_node(std::move(out), {x}, [x, arg](Var& self) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (std::size_t i = 0; i < self.grad.numel(); ++i) {
      x->grad.data[static_cast<std::size_t>((*arg)[i])] += self.grad.data[i];
    }
  });
}

VarPtr upsample2_nearest(const VarPtr& x) {
  const int h = x->value.dim(0), w = x->value.dim(1), c = x->value.dim(2);
  Tensor out({2 * h, 2 * w, c});
  for (int y = 0; y < 2 * h; ++y) {
    for (int xx = 0; xx < 2 * w; ++xx) {
      const double* src = x->value.data.data() + (static_cast<std::size_t>(y / 2) * w + xx / 2) * c;
      double* dst = out.data.data() + (static_cast<std::size_t>(y) * 2 * w + xx) * c;
      std::copy_n(src, c, dst);
    }
  }
  return make_node(std::move(out), {x}, [x, h, w, c](Var& self) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (int y = 0; y < 2 * h; ++y) {
      for (int xx = 0; xx < 2 * w; ++xx) {
        const double* g = self.grad.data.data() + (static_cast<std::size_t>(y) * 2 * w + xx) * c;
        double* gx = x->grad.data.data() + (static_cast<std::size_t>(y / 2) * w + xx / 2) * c;
        for (int k = 0; k < c; ++k) gx[k] += g[k];
      }
    }
  });
}

VarPtr instance_norm(const VarPtr& x, const VarPtr& gamma, const VarPtr& beta, double eps) {
  const int h = x->value.dim(0), w = x->value.dim(1), c = x->value.dim(2);
  const std::size_t n = static_cast<std::size_t>(h) * w;
  Tensor out({h, w, c});
  auto inv_sigma = std::make_shared<std::vector<double>>(c);
  auto mean = std::make_shared<std::vector<double>>(c);
  for (int k = 0; k < c; ++k) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      double v = x->value.data[p * c + k];
      sum += v;
      sq += v * v;
    }
    double mu = sum / static_cast<double>(n);
    double var = std::max(0.0, sq / static_cast<double>(n) - mu * mu);
    (*mean)[k] = mu;
    (*inv_sigma)[k] = 1.0 / std::sqrt(var + eps);
  }
  for (std::size_t p = 0; p < n; ++p) {
    for (int k = 0; k < c; ++k) {
      double xhat = (x->value.data[p * c + k] - (*mean)[k]) * (*inv_sigma)[k];
      out.data[p * c + k] = gamma->value.data[k] * xhat + beta->value.data[k];
    }
  }
  return make_node(std::move(out), {x, gamma, beta},
                   [x, gamma, beta, mean, inv_sigma, n, c](Var& self) {
    std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
      for (int k = 0; k < c; ++k) {
        double g = self.grad.data[p * c + k];
        double xhat = (x->value.data[p * c + k] - (*mean)[k]) * (*inv_sigma)[k];
        sum_g[k] += g;
        sum_gx[k] += g * xhat;
      }
    }
    if (gamma->requires_grad) {
      gamma->ensure_grad();
      for (int k = 0; k < c; ++k) gamma->grad.data[k] += sum_gx[k];
    }
    if (beta->requires_grad) {
      beta->ensure_grad();
      for (int k = 0; k < c; ++k) beta->grad.data[k] += sum_g[k];
    }
    if (x->requires_grad) {
      x->ensure_grad();
      const double inv_n = 1.0 / static_cast<double>(n);
      for (std::size_t p = 0; p < n; ++p) {
        for (int k = 0; k < c; ++k) {
          double g = self.grad.data[p * c + k] * gamma->value.data[k];
          double xhat = (x->value.data[p * c + k] - (*mean)[k]) * (*inv_sigma)[k];
          x->grad.data[p * c + k] +=
              (*inv_sigma)[k] *
              (g - inv_n * gamma->value.data[k] * (sum_g[k] + xhat * sum_gx[k]));
        }
      }
    }
  });
}

VarPtr segment_pool_op(const VarPtr& x,
                       const std::vector<std::vector<std::int32_t>>& pixel_lists) {
  const int c = x->value.dim(2);
  const int m = static_cast<int>(pixel_lists.size());
  Tensor out({m, c});
  for (int i = 0; i < m; ++i) {
    if (pixel_lists[i].empty()) {
      throw std::runtime_error("degenerate segment");
    }
    double* row = out.data.data() + static_cast<std::size_t>(i) * c;
    for (std::int32_t p : pixel_lists[i]) {
      const double* src = x->value.data.data() + static_cast<std::size_t>(p) * c;
      for (int k = 0; k < c; ++k) row[k] += src[k];
    }
    const double inv = 1.0 / static_cast<double>(pixel_lists[i].size());
    for (int k = 0; k < c; ++k) row[k] *= inv;
  }
  std::shared_ptr<std::vector<std::vector<std::int32_t>>> lists;
  if (track({x})) {
    lists = std::make_shared<std::vector<std::vector<std::int32_t>>>(pixel_lists);
  }
  return make_node(std::move(out), {x}, [x, lists, c](Var& self) {
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (std::size_t i = 0; i < lists->size(); ++i) {
      const double inv = 1.0 / static_cast<double>((*lists)[i].size());
      const double* g = self.grad.data.data() + i * c;
      for (std::int32_t p : (*lists)[i]) {
        double* gx = x->grad.data.data() + static_cast<std::size_t>(p) * c;
        for (int k = 0; k < c; ++k) gx[k] += inv * g[k];
      }
    }
  });
}

VarPtr cosine_similarity_op(const VarPtr& a, const VarPtr& b, double eps) {
  const int m = a->value.dim(0), c = a->value.dim(1);
  const int n = b->value.dim(0);
  if (b->value.dim(1) != c) {
    throw std::invalid_argument("cosine_similarity_op: column mismatch");
  }
  auto am = a->value.as_matrix(m, c);
  auto bm = b->value.as_matrix(n, c);
  auto na = std::make_shared<VectorXd>(am.rowwise().norm());
  auto nb = std::make_shared<VectorXd>(bm.rowwise().norm());
  Tensor out({m, n});
  auto sm = out.as_matrix(m, n);
  sm.noalias() = am * bm.transpose();
  auto denom = std::make_shared<MatrixRM>(((*na) * nb->transpose()).array() + eps);
  sm.array() /= denom->array();
  return make_node(std::move(out), {a, b}, [a, b, na, nb, denom, m, n, c](Var& self) {
    auto g = self.grad.as_matrix(m, n);
    auto am = a->value.as_matrix(m, c);
    auto bm = b->value.as_matrix(n, c);
    auto sm = self.value.as_matrix(m, n);
    // dS/da_i = b_j/denom - S_ij * |b_j| * a_i/|a_i| / denom
    MatrixRM gd = g.array() / denom->array();                     // g / denom
    MatrixRM gsd = (g.array() * sm.array() / denom->array());     // g*S/denom
    if (a->requires_grad) {
      a->ensure_grad();
      auto ga = a->grad.as_matrix(m, c);
      ga.noalias() += gd * bm;
      VectorXd coeff = (gsd * (*nb));  // row sums weighted by |b_j|
      for (int i = 0; i < m; ++i) {
        double norm = (*na)(i);
        if (norm > 1e-30) {
          ga.row(i).noalias() -= (coeff(i) / norm) * am.row(i);
        }
      }
    }
    if (b->requires_grad) {
      b->ensure_grad();
      auto gb = b->grad.as_matrix(n, c);
      gb.noalias() += gd.transpose() * am;
      VectorXd coeff = (gsd.transpose() * (*na));
      for (int j = 0; j < n; ++j) {
        double norm = (*nb)(j);
        if (norm > 1e-30) {
          gb.row(j).noalias() -= (coeff(j) / norm) * bm.row(j);
        }
      }
    }
  });
}

}  // namespace segcolor::nn
