#include "segcolor/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace segcolor::nn {

Conv2d::Conv2d(int k, int in_ch, int out_ch, std::mt19937_64& rng) : kernel(k) {
  Tensor w({k, k, in_ch, out_ch});
  fill_normal(w, std::sqrt(2.0 / (static_cast<double>(k) * k * in_ch)), rng);
  weight = make_leaf(std::move(w), true);
  bias = make_leaf(Tensor({out_ch}), true);
}

void Conv2d::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

InstanceNorm2d::InstanceNorm2d(int channels) {
  gamma = make_leaf(Tensor({channels}, 1.0), true);
  beta = make_leaf(Tensor({channels}), true);
}

void InstanceNorm2d::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

Linear::Linear(int in_dim, int out_dim, std::mt19937_64& rng) {
  Tensor w({in_dim, out_dim});
  fill_normal(w, std::sqrt(2.0 / in_dim), rng);
  weight = make_leaf(std::move(w), true);
  bias = make_leaf(Tensor({out_dim}), true);
}

void Linear::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

void ConvBlock::collect(const std::string& prefix, ParamList& out) const {
  conv.collect(prefix + ".conv", out);
  norm.collect(prefix + ".norm", out);
}

void Adam::step(const ParamList& params) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = Tensor(params[i].var->value.shape);
      v_[i] = Tensor(params[i].var->value.shape);
    }
  }
  if (m_.size() != params.size()) {
    throw std::invalid_argument("Adam::step: parameter list changed size");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Var& p = *params[i].var;
    p.ensure_grad();
    for (std::size_t k = 0; k < p.value.numel(); ++k) {
      double g = p.grad.data[k];
      m_[i].data[k] = beta1 * m_[i].data[k] + (1.0 - beta1) * g;
      v_[i].data[k] = beta2 * v_[i].data[k] + (1.0 - beta2) * g * g;
      double mhat = m_[i].data[k] / bc1;
      double vhat = v_[i].data[k] / bc2;
      p.value.data[k] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

void Adam::reset() {
  t_ = 0;
  m_.clear();
  v_.clear();
}

}  // namespace segcolor::nn
