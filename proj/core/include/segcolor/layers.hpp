#pragma once

#include <random>
#include <string>
#include <vector>

#include "segcolor/autograd.hpp"

namespace segcolor::nn {

struct NamedParam {
  std::string name;
  VarPtr var;
};
using ParamList = std::vector<NamedParam>;

struct Conv2d {
  VarPtr weight;  // [k,k,in,out]
  VarPtr bias;    // [out]
  int kernel = 3;

  Conv2d() = default;
  Conv2d(int kernel, int in_ch, int out_ch, std::mt19937_64& rng);
  VarPtr operator()(const VarPtr& x) const { return conv2d(x, weight, bias, kernel); }
  void collect(const std::string& prefix, ParamList& out) const;
};

struct InstanceNorm2d {
  VarPtr gamma;  // [c], init 1
  VarPtr beta;   // [c], init 0

  InstanceNorm2d() = default;
  explicit InstanceNorm2d(int channels);
  VarPtr operator()(const VarPtr& x) const { return instance_norm(x, gamma, beta); }
  void collect(const std::string& prefix, ParamList& out) const;
};

struct Linear {
  VarPtr weight;  // [in,out]
  VarPtr bias;    // [out]

  Linear() = default;
  Linear(int in_dim, int out_dim, std::mt19937_64& rng);
  VarPtr operator()(const VarPtr& x) const { return linear(x, weight, bias); }
  void collect(const std::string& prefix, ParamList& out) const;
};

/// conv -> per-channel norm -> relu
struct ConvBlock {
  Conv2d conv;
  InstanceNorm2d norm;

  ConvBlock() = default;
  ConvBlock(int in_ch, int out_ch, std::mt19937_64& rng)
      : conv(3, in_ch, out_ch, rng), norm(out_ch) {}
  VarPtr operator()(const VarPtr& x) const { return relu(norm(conv(x))); }
  void collect(const std::string& prefix, ParamList& out) const;
};

struct Adam {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void step(const ParamList& params);
  void reset();

 private:
  std::int64_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace segcolor::nn
