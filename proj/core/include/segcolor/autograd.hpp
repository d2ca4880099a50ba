#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "segcolor/tensor.hpp"

namespace segcolor::nn {

struct Var;
using VarPtr = std::shared_ptr<Var>;

/// Node in a reverse-mode tape. Ops allocate grads lazily; backward functions
/// accumulate into parents' grads.
struct Var {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<VarPtr> parents;
  std::function<void(Var&)> backward_fn;

  void ensure_grad() {
    if (grad.shape != value.shape) {
      grad = Tensor(value.shape);
    }
  }
  void zero_grad() {
    ensure_grad();
    grad.zero();
  }
};

VarPtr make_leaf(Tensor value, bool requires_grad = false);
/// Fused-op helper: wraps a precomputed value with a custom backward.
VarPtr make_node(Tensor value, std::vector<VarPtr> parents,
                 std::function<void(Var&)> backward_fn);

/// Thread-local switch; when disabled, ops skip tape recording so inference
/// frees intermediates as it goes.
bool grad_enabled();
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Reverse pass from a scalar root (seeds d(root)/d(root) = 1).
void backward(const VarPtr& root);

// ---- elementwise / shape ----
VarPtr add(const VarPtr& a, const VarPtr& b);
VarPtr scale(const VarPtr& a, double s);
VarPtr relu(const VarPtr& x);
VarPtr concat_cols(const VarPtr& a, const VarPtr& b);   // [n,p] + [n,q] -> [n,p+q]
VarPtr concat_rows(const std::vector<VarPtr>& parts);   // [m_i,c] -> [sum m_i, c]
VarPtr pad_hw(const VarPtr& x, int target_h, int target_w);   // zero pad bottom/right
VarPtr crop_hw(const VarPtr& x, int target_h, int target_w);  // top-left crop

// ---- dense ----
VarPtr matmul(const VarPtr& a, const VarPtr& b);                      // [m,k]x[k,n]
VarPtr linear(const VarPtr& x, const VarPtr& w, const VarPtr& b);     // rows of x

// ---- spatial (channels-last [H,W,C]) ----
VarPtr conv2d(const VarPtr& x, const VarPtr& w, const VarPtr& b, int kernel);  // same pad
VarPtr maxpool2(const VarPtr& x);
VarPtr upsample2_nearest(const VarPtr& x);
VarPtr instance_norm(const VarPtr& x, const VarPtr& gamma, const VarPtr& beta,
                     double eps = 1e-5);

/// Mean of the map over each segment's pixels; pixel_lists[i] holds linear
/// pixel indices (y*W+x) of segment row i. Every list must be nonempty.
VarPtr segment_pool_op(const VarPtr& x, const std::vector<std::vector<std::int32_t>>& pixel_lists);

/// Row-wise cosine similarity with an epsilon-guarded denominator:
/// S[i][j] = <a_i, b_j> / (|a_i||b_j| + eps).
VarPtr cosine_similarity_op(const VarPtr& a, const VarPtr& b, double eps = 1e-8);

}  // namespace segcolor::nn
