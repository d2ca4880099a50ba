#include "segcolor/encoders.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "segcolor/image_io.hpp"

namespace segcolor {

namespace fs = std::filesystem;
using nlohmann::json;
using nn::Tensor;
using nn::VarPtr;

namespace {
double luminance_at(const ImageU8& image, int y, int x) {
  Rgb c = image.at(y, x);
  return (c.r + c.g + c.b) / (3.0 * 255.0);
}
}  // namespace

FeatureMap encode_semantic(const ImageU8& image, const SemanticBackbone& backbone) {
  if (image.height < 1 || image.width < 1) {
    throw std::invalid_argument("encode_semantic: empty image");
  }
  const int side = backbone.input_side();
  ImageU8 resized = resize_image(image, side, side);
  FeatureMap grid = backbone.encode_resized(resized);
  const int expect = backbone.grid_side();
  if (grid.height != expect || grid.width != expect || grid.channels != backbone.channels()) {
    throw std::runtime_error("backbone produced unexpected grid shape");
  }
  return grid;
}

// ---------------------------------------------------------------------------
// ProceduralBackbone
// ---------------------------------------------------------------------------

namespace {
constexpr int kStatDims = 22;
constexpr std::uint64_t kProjectionSeed = 0x9d2c5680f2a1b3c7ULL;
}  // namespace

ProceduralBackbone::ProceduralBackbone(int channels) : channels_(channels) {
  std::mt19937_64 rng(kProjectionSeed);
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(kStatDims)));
  projection_.resize(kStatDims, channels_);
  for (int i = 0; i < kStatDims; ++i) {
    for (int j = 0; j < channels_; ++j) {
      projection_(i, j) = dist(rng);
    }
  }
}

FeatureMap ProceduralBackbone::encode_resized(const ImageU8& image) const {
  const int side = input_side();
  const int patch = patch_size();
  const int grid = side / patch;
  if (image.height != side || image.width != side) {
    throw std::invalid_argument("ProceduralBackbone: image must be pre-resized");
  }
  FeatureMap out(grid, grid, channels_);
  Eigen::Matrix<double, 1, Eigen::Dynamic> stats(kStatDims);
  for (int gy = 0; gy < grid; ++gy) {
    for (int gx = 0; gx < grid; ++gx) {
      double sum[3] = {0, 0, 0};
      double sq[3] = {0, 0, 0};
      double grad_sum = 0.0;
      double ink = 0.0;
      for (int py = 0; py < patch; ++py) {
        for (int px = 0; px < patch; ++px) {
          int y = gy * patch + py;
          int x = gx * patch + px;
          Rgb c = image.at(y, x);
          double v[3] = {c.r / 255.0, c.g / 255.0, c.b / 255.0};
          for (int k = 0; k < 3; ++k) {
            sum[k] += v[k];
            sq[k] += v[k] * v[k];
          }
          double lum = (v[0] + v[1] + v[2]) / 3.0;
          if (lum < 200.0 / 255.0) ink += 1.0;
          double lum_r = x + 1 < side ? luminance_at(image, y, x + 1) : lum;
          double lum_d = y + 1 < side ? luminance_at(image, y + 1, x) : lum;
          grad_sum += std::abs(lum_r - lum) + std::abs(lum_d - lum);
        }
      }
      const double n = static_cast<double>(patch) * patch;
      int s = 0;
      for (int k = 0; k < 3; ++k) stats(s++) = sum[k] / n;
      for (int k = 0; k < 3; ++k) {
        double mu = sum[k] / n;
        stats(s++) = std::sqrt(std::max(0.0, sq[k] / n - mu * mu));
      }
      stats(s++) = grad_sum / n;
      stats(s++) = ink / n;
      const double u = (gx + 0.5) / grid;
      const double v = (gy + 0.5) / grid;
      stats(s++) = u;
      stats(s++) = v;
      for (double f : {1.0, 2.0, 4.0}) {
        stats(s++) = std::sin(f * M_PI * u);
        stats(s++) = std::cos(f * M_PI * u);
        stats(s++) = std::sin(f * M_PI * v);
        stats(s++) = std::cos(f * M_PI * v);
      }
      Eigen::Matrix<double, 1, Eigen::Dynamic> feat = stats * projection_;
      float* dst = out.pixel(gy, gx);
      for (int k = 0; k < channels_; ++k) dst[k] = static_cast<float>(feat(k));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// VitBackbone
// ---------------------------------------------------------------------------

namespace {

struct RawTensor {
  std::vector<int> shape;
  std::vector<float> data;
};

struct VitWeights {
  int dim = 0;
  int depth = 0;
  int heads = 0;
  int patch = 0;
  int img = 0;
  int mlp_ratio = 4;
  int register_tokens = 0;
  std::map<std::string, RawTensor> tensors;
};

constexpr char kVitMagic[4] = {'S', 'G', 'V', 'W'};

VitWeights load_vit_weights(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("backbone unavailable: cannot open " + path.string());
  }
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t header_len = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in || std::memcmp(magic, kVitMagic, 4) != 0 || version != 1) {
    throw std::runtime_error("backbone unavailable: bad weight header in " + path.string());
  }
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) {
    throw std::runtime_error("backbone unavailable: truncated header in " + path.string());
  }
  VitWeights w;
  json meta;
  try {
    meta = json::parse(header);
    w.dim = meta.at("dim").get<int>();
    w.depth = meta.at("depth").get<int>();
    w.heads = meta.at("heads").get<int>();
    w.patch = meta.at("patch").get<int>();
    w.img = meta.at("img").get<int>();
    w.mlp_ratio = meta.value("mlp_ratio", 4);
    w.register_tokens = meta.value("register_tokens", 0);
  } catch (const json::exception&) {
    throw std::runtime_error("backbone unavailable: malformed metadata in " + path.string());
  }
  for (const auto& t : meta.at("tensors")) {
    RawTensor raw;
    raw.shape = t.at("shape").get<std::vector<int>>();
    std::size_t numel = 1;
    for (int d : raw.shape) numel *= static_cast<std::size_t>(d);
    raw.data.resize(numel);
    in.read(reinterpret_cast<char*>(raw.data.data()),
            static_cast<std::streamsize>(numel * sizeof(float)));
    if (!in) {
      throw std::runtime_error("backbone unavailable: truncated tensor data in " + path.string());
    }
    w.tensors[t.at("name").get<std::string>()] = std::move(raw);
  }
  return w;
}

void layer_norm_rows(MatrixRM& x, const RawTensor& gamma, const RawTensor& beta) {
  const double eps = 1e-6;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    auto row = x.row(i);
    double mu = row.mean();
    double var = (row.array() - mu).square().mean();
    double inv = 1.0 / std::sqrt(var + eps);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      row(j) = (row(j) - mu) * inv * gamma.data[static_cast<std::size_t>(j)] +
               beta.data[static_cast<std::size_t>(j)];
    }
  }
}

double gelu(double v) {
  return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
}

}  // namespace

struct VitBackbone::Impl {
  VitWeights w;

  const RawTensor& tensor(const std::string& name) const {
    auto it = w.tensors.find(name);
    if (it == w.tensors.end()) {
      throw std::runtime_error("backbone unavailable: missing tensor " + name);
    }
    return it->second;
  }

  MatrixRM matrix(const std::string& name, int rows, int cols) const {
    const RawTensor& t = tensor(name);
    if (t.data.size() != static_cast<std::size_t>(rows) * cols) {
      throw std::runtime_error("backbone unavailable: tensor size mismatch for " + name);
    }
    MatrixRM m(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) {
        m(i, j) = t.data[static_cast<std::size_t>(i) * cols + j];
      }
    }
    return m;
  }
};

VitBackbone::VitBackbone(const fs::path& weights_path) : impl_(std::make_unique<Impl>()) {
  impl_->w = load_vit_weights(weights_path);
  // validate required tensors up front so failures surface at load time
  const auto& w = impl_->w;
  impl_->tensor("patch_embed.weight");
  impl_->tensor("pos_embed");
  impl_->tensor("cls_token");
  for (int l = 0; l < w.depth; ++l) {
    std::string p = "blocks." + std::to_string(l) + ".";
    for (const char* t : {"norm1.weight", "norm1.bias", "attn.qkv.weight", "attn.qkv.bias",
                          "attn.proj.weight", "attn.proj.bias", "ls1.gamma", "norm2.weight",
                          "norm2.bias", "mlp.fc1.weight", "mlp.fc1.bias", "mlp.fc2.weight",
                          "mlp.fc2.bias", "ls2.gamma"}) {
      impl_->tensor(p + t);
    }
  }
  impl_->tensor("norm.weight");
  impl_->tensor("norm.bias");
}

VitBackbone::~VitBackbone() = default;

int VitBackbone::input_side() const { return impl_->w.img; }
int VitBackbone::patch_size() const { return impl_->w.patch; }
int VitBackbone::channels() const { return impl_->w.dim; }

FeatureMap VitBackbone::encode_resized(const ImageU8& image) const {
  const VitWeights& w = impl_->w;
  const int grid = w.img / w.patch;
  const int n_patches = grid * grid;
  const int extra = 1 + w.register_tokens;  // cls (+ registers)
  const int n_tokens = n_patches + extra;
  const int dim = w.dim;
  const int head_dim = dim / w.heads;

  if (image.height != w.img || image.width != w.img) {
    throw std::invalid_argument("VitBackbone: image must be pre-resized");
  }

  // patch embedding: flattened (c,py,px) patch pixels x [3*patch*patch, dim]
  static const double kMean[3] = {0.485, 0.456, 0.406};
  static const double kStd[3] = {0.229, 0.224, 0.225};
  const int patch_len = 3 * w.patch * w.patch;
  MatrixRM embed_w = impl_->matrix("patch_embed.weight", patch_len, dim);
  const RawTensor& embed_b = impl_->tensor("patch_embed.bias");

  MatrixRM tokens(n_tokens, dim);
  {
    MatrixRM patches(n_patches, patch_len);
    for (int gy = 0; gy < grid; ++gy) {
      for (int gx = 0; gx < grid; ++gx) {
        double* row = patches.row(static_cast<Eigen::Index>(gy) * grid + gx).data();
        int s = 0;
        for (int c = 0; c < 3; ++c) {
          for (int py = 0; py < w.patch; ++py) {
            for (int px = 0; px < w.patch; ++px) {
              Rgb pix = image.at(gy * w.patch + py, gx * w.patch + px);
              double v = (c == 0 ? pix.r : c == 1 ? pix.g : pix.b) / 255.0;
              row[s++] = (v - kMean[c]) / kStd[c];
            }
          }
        }
      }
    }
    tokens.bottomRows(n_patches).noalias() = patches * embed_w;
    for (int i = 0; i < n_patches; ++i) {
      for (int j = 0; j < dim; ++j) {
        tokens(extra + i, j) += embed_b.data[static_cast<std::size_t>(j)];
      }
    }
  }
  const RawTensor& cls = impl_->tensor("cls_token");
  for (int j = 0; j < dim; ++j) tokens(0, j) = cls.data[static_cast<std::size_t>(j)];
  for (int r = 0; r < w.register_tokens; ++r) {
    const RawTensor& reg = impl_->tensor("register_tokens");
    for (int j = 0; j < dim; ++j) {
      tokens(1 + r, j) = reg.data[static_cast<std::size_t>(r) * dim + j];
    }
  }
  const RawTensor& pos = impl_->tensor("pos_embed");
  if (pos.data.size() != static_cast<std::size_t>(n_tokens) * dim) {
    throw std::runtime_error("backbone unavailable: pos_embed size mismatch");
  }
  for (int i = 0; i < n_tokens; ++i) {
    for (int j = 0; j < dim; ++j) {
      tokens(i, j) += pos.data[static_cast<std::size_t>(i) * dim + j];
    }
  }

  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  for (int l = 0; l < w.depth; ++l) {
    const std::string p = "blocks." + std::to_string(l) + ".";
    MatrixRM x = tokens;
    layer_norm_rows(x, impl_->tensor(p + "norm1.weight"), impl_->tensor(p + "norm1.bias"));
    MatrixRM qkv_w = impl_->matrix(p + "attn.qkv.weight", dim, 3 * dim);
    const RawTensor& qkv_b = impl_->tensor(p + "attn.qkv.bias");
    MatrixRM qkv = x * qkv_w;
    for (int i = 0; i < n_tokens; ++i) {
      for (int j = 0; j < 3 * dim; ++j) qkv(i, j) += qkv_b.data[static_cast<std::size_t>(j)];
    }
    MatrixRM attn_out(n_tokens, dim);
    for (int h = 0; h < w.heads; ++h) {
      auto q = qkv.block(0, h * head_dim, n_tokens, head_dim);
      auto k = qkv.block(0, dim + h * head_dim, n_tokens, head_dim);
      auto v = qkv.block(0, 2 * dim + h * head_dim, n_tokens, head_dim);
      MatrixRM scores = (q * k.transpose()) * attn_scale;
      for (int i = 0; i < n_tokens; ++i) {
        auto row = scores.row(i);
        double mx = row.maxCoeff();
        row = (row.array() - mx).exp();
        row /= row.sum();
      }
      attn_out.block(0, h * head_dim, n_tokens, head_dim).noalias() = scores * v;
    }
    MatrixRM proj_w = impl_->matrix(p + "attn.proj.weight", dim, dim);
    const RawTensor& proj_b = impl_->tensor(p + "attn.proj.bias");
    const RawTensor& ls1 = impl_->tensor(p + "ls1.gamma");
    MatrixRM branch = attn_out * proj_w;
    for (int i = 0; i < n_tokens; ++i) {
      for (int j = 0; j < dim; ++j) {
        tokens(i, j) += (branch(i, j) + proj_b.data[static_cast<std::size_t>(j)]) *
                        ls1.data[static_cast<std::size_t>(j)];
      }
    }

    MatrixRM y = tokens;
    layer_norm_rows(y, impl_->tensor(p + "norm2.weight"), impl_->tensor(p + "norm2.bias"));
    const int hidden = dim * w.mlp_ratio;
    MatrixRM fc1 = impl_->matrix(p + "mlp.fc1.weight", dim, hidden);
    const RawTensor& fc1_b = impl_->tensor(p + "mlp.fc1.bias");
    MatrixRM h1 = y * fc1;
    for (int i = 0; i < n_tokens; ++i) {
      for (int j = 0; j < hidden; ++j) {
        h1(i, j) = gelu(h1(i, j) + fc1_b.data[static_cast<std::size_t>(j)]);
      }
    }
    MatrixRM fc2 = impl_->matrix(p + "mlp.fc2.weight", hidden, dim);
    const RawTensor& fc2_b = impl_->tensor(p + "mlp.fc2.bias");
    const RawTensor& ls2 = impl_->tensor(p + "ls2.gamma");
    MatrixRM h2 = h1 * fc2;
    for (int i = 0; i < n_tokens; ++i) {
      for (int j = 0; j < dim; ++j) {
        tokens(i, j) += (h2(i, j) + fc2_b.data[static_cast<std::size_t>(j)]) *
                        ls2.data[static_cast<std::size_t>(j)];
      }
    }
  }

  layer_norm_rows(tokens, impl_->tensor("norm.weight"), impl_->tensor("norm.bias"));

  FeatureMap out(grid, grid, dim);
  for (int gy = 0; gy < grid; ++gy) {
    for (int gx = 0; gx < grid; ++gx) {
      float* dst = out.pixel(gy, gx);
      const auto row = tokens.row(extra + static_cast<Eigen::Index>(gy) * grid + gx);
      for (int j = 0; j < dim; ++j) dst[j] = static_cast<float>(row(j));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Providers
// ---------------------------------------------------------------------------

FeatureMap BackboneProvider::features_for(const fs::path& image_path) const {
  return encode_semantic(read_image(image_path), *backbone_);
}

FeatureMap BackboneProvider::features_for_image(const ImageU8& image) const {
  return encode_semantic(image, *backbone_);
}

// ---------------------------------------------------------------------------
// SpatialEncoder
// ---------------------------------------------------------------------------

SpatialEncoder::SpatialEncoder(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  enc1_ = nn::ConvBlock(3, 32, rng);
  enc2_ = nn::ConvBlock(32, 64, rng);
  enc3_ = nn::ConvBlock(64, 128, rng);
  enc4_ = nn::ConvBlock(128, 256, rng);
  dec3_ = nn::ConvBlock(256 + 128, 128, rng);
  dec2_ = nn::ConvBlock(128 + 64, 64, rng);
  dec1_ = nn::ConvBlock(64 + 32, 32, rng);
  head_ = nn::Conv2d(1, 32, kSpatialChannels, rng);
}

namespace {
// channel concat for [H,W,C] tensors
VarPtr concat_channels(const VarPtr& a, const VarPtr& b) {
  const int h = a->value.dim(0), w = a->value.dim(1);
  const int ca = a->value.dim(2), cb = b->value.dim(2);
  if (b->value.dim(0) != h || b->value.dim(1) != w) {
    throw std::invalid_argument("concat_channels: spatial dims mismatch");
  }
  Tensor out({h, w, ca + cb});
  const std::size_t n = static_cast<std::size_t>(h) * w;
  for (std::size_t p = 0; p < n; ++p) {
    std::copy_n(a->value.data.begin() + p * ca, ca, out.data.begin() + p * (ca + cb));
    std::copy_n(b->value.data.begin() + p * cb, cb, out.data.begin() + p * (ca + cb) + ca);
  }
  return nn::make_node(std::move(out), {a, b}, [a, b, n, ca, cb](nn::Var& self) {
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::size_t p = 0; p < n; ++p) {
        const double* g = self.grad.data.data() + p * (ca + cb);
        double* ga = a->grad.data.data() + p * ca;
        for (int k = 0; k < ca; ++k) ga[k] += g[k];
      }
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t p = 0; p < n; ++p) {
        const double* g = self.grad.data.data() + p * (ca + cb) + ca;
        double* gb = b->grad.data.data() + p * cb;
        for (int k = 0; k < cb; ++k) gb[k] += g[k];
      }
    }
  });
}
}  // namespace

VarPtr SpatialEncoder::forward(const VarPtr& x) const {
  const int h = x->value.dim(0), w = x->value.dim(1);
  if (h < kMinSide || w < kMinSide) {
    throw std::runtime_error("spatial encoder input smaller than minimum downsampling size");
  }
  const int ph = (h + 7) / 8 * 8;
  const int pw = (w + 7) / 8 * 8;
  VarPtr in = pad_hw(x, ph, pw);

  VarPtr e1 = enc1_(in);
  VarPtr e2 = enc2_(nn::maxpool2(e1));
  VarPtr e3 = enc3_(nn::maxpool2(e2));
  VarPtr e4 = enc4_(nn::maxpool2(e3));
  VarPtr d3 = dec3_(concat_channels(nn::upsample2_nearest(e4), e3));
  VarPtr d2 = dec2_(concat_channels(nn::upsample2_nearest(d3), e2));
  VarPtr d1 = dec1_(concat_channels(nn::upsample2_nearest(d2), e1));
  VarPtr out = head_(d1);
  return crop_hw(out, h, w);
}

FeatureMap SpatialEncoder::encode(const ImageU8& image) const {
  nn::NoGradGuard no_grad;
  VarPtr x = nn::make_leaf(nn::image_to_tensor(image));
  return nn::to_feature_map(forward(x)->value);
}

nn::ParamList SpatialEncoder::params() const {
  nn::ParamList out;
  enc1_.collect("unet.enc1", out);
  enc2_.collect("unet.enc2", out);
  enc3_.collect("unet.enc3", out);
  enc4_.collect("unet.enc4", out);
  dec3_.collect("unet.dec3", out);
  dec2_.collect("unet.dec2", out);
  dec1_.collect("unet.dec1", out);
  head_.collect("unet.head", out);
  return out;
}

FeatureMap encode_spatial(const ImageU8& image, const SpatialEncoder& encoder) {
  return encoder.encode(image);
}

}  // namespace segcolor
