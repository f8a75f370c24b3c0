#include "sparseg/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

#include <Eigen/Core>
#include <json.hpp>

#include "sparseg/mvol.hpp"

namespace sparseg {

namespace {

constexpr int kIn = arch::kInputChannels;
constexpr int kHid = arch::kHidden;
constexpr int kTaps = arch::kTaps;

struct Padded {
  int px, py, pz;
  explicit Padded(const Dims& d) : px(d.x + 2), py(d.y + 2), pz(d.z + 2) {}
  std::size_t count() const { return static_cast<std::size_t>(px) * py * pz; }
  // padded index of interior voxel (i,j,k) shifted by -1 on every axis, i.e. the
  // corner of its 3x3x3 neighbourhood
  std::size_t corner(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * py + static_cast<std::size_t>(j)) * px + static_cast<std::size_t>(i);
  }
  std::size_t center(int i, int j, int k) const { return corner(i + 1, j + 1, k + 1); }
  std::array<std::size_t, kTaps> taps() const {
    std::array<std::size_t, kTaps> t{};
    int n = 0;
    for (int dz = 0; dz < 3; ++dz)
      for (int dy = 0; dy < 3; ++dy)
        for (int dx = 0; dx < 3; ++dx) t[n++] = corner(dx, dy, dz);
    return t;
  }
};

TensorBlock make_block(const char* name, std::vector<std::size_t> shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return {name, std::move(shape), std::vector<double>(n, 0.0)};
}

double sigmoid(double z) {
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - 0x1.0p-53;
  const double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  return std::clamp(p, lo, hi);
}

template <int C>
using RowBlock = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, C, Eigen::RowMajor>>;
template <int C>
using ConstRowBlock = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, C, Eigen::RowMajor>>;
template <int Rows, int Cols>
using ConstWeight = Eigen::Map<const Eigen::Matrix<double, Rows, Cols, Eigen::RowMajor>>;
template <int Rows, int Cols>
using WeightGrad = Eigen::Map<Eigen::Matrix<double, Rows, Cols, Eigen::RowMajor>>;

// Contiguous run of padded indices covering every interior voxel. Rows that fall
// in the halo are computed too and discarded (forward) or carry zero gradient
// (backward), which turns each kernel tap into one dense product.
struct InteriorRun {
  std::size_t first;
  std::size_t rows;
  std::array<std::ptrdiff_t, kTaps> shift;

  explicit InteriorRun(const Dims& d) {
    const Padded pad(d);
    first = pad.center(0, 0, 0);
    rows = pad.center(d.x - 1, d.y - 1, d.z - 1) - first + 1;
    const auto taps = pad.taps();
    const auto mid = static_cast<std::ptrdiff_t>(taps[kTaps / 2]);
    for (int t = 0; t < kTaps; ++t) shift[t] = static_cast<std::ptrdiff_t>(taps[t]) - mid;
  }
};

// Rows per chunk; keeps a chunk of outputs resident in L1 across the 27 taps.
constexpr std::size_t kChunkRows = 192;

template <int C>
using Row = Eigen::Matrix<double, 1, C>;
template <int R, int C>
using Fixed = Eigen::Matrix<double, R, C, Eigen::RowMajor>;

// Pre-activation of a 3x3x3 conv written to the interior run of `out_pad`.
template <int Cin, int Cout>
void conv3_pre(const double* in_pad, const Dims& d, const double* weight, const double* bias, double* out_pad) {
  const InteriorRun run(d);
  const Row<Cout> b = Eigen::Map<const Row<Cout>>(bias);
  for (std::size_t r0 = 0; r0 < run.rows; r0 += kChunkRows) {
    const std::size_t rows = std::min(kChunkRows, run.rows - r0);
    const auto first = static_cast<std::ptrdiff_t>(run.first + r0);
    double* out = out_pad + first * Cout;
    for (std::size_t r = 0; r < rows; ++r) Eigen::Map<Row<Cout>>(out + r * Cout) = b;
    for (int t = 0; t < kTaps; ++t) {
      const Fixed<Cin, Cout> w = Eigen::Map<const Fixed<Cin, Cout>>(weight + static_cast<std::size_t>(t) * Cin * Cout);
      const double* in = in_pad + (first + run.shift[t]) * Cin;
      for (std::size_t r = 0; r < rows; ++r) {
        Eigen::Map<Row<Cout>> o(out + r * Cout);
        Row<Cout> acc = o;
        for (int ci = 0; ci < Cin; ++ci) acc += in[r * Cin + ci] * w.row(ci);
        o = acc;
      }
    }
  }
}

// ReLU on the interior, zero on the halo.
template <int C>
void relu_interior(double* buf_pad, const Dims& d) {
  const Padded pad(d);
  std::vector<std::uint8_t> interior(pad.count(), 0);
  for (int k = 0; k < d.z; ++k)
    for (int j = 0; j < d.y; ++j)
      for (int i = 0; i < d.x; ++i) interior[pad.center(i, j, k)] = 1;
  for (std::size_t p = 0; p < pad.count(); ++p) {
    double* v = buf_pad + p * C;
    for (int c = 0; c < C; ++c) v[c] = (interior[p] && v[c] > 0.0) ? v[c] : 0.0;
  }
}

// Backward of a 3x3x3 conv. grad_pre_pad must be zero on the halo.
template <int Cin, int Cout>
void conv3_backward(const double* in_pad, const Dims& d, const double* weight, const double* grad_pre_pad,
                    double* grad_weight, double* grad_bias, double* grad_in_pad) {
  const InteriorRun run(d);
  Eigen::Map<Row<Cout>> gb(grad_bias);
  for (std::size_t r0 = 0; r0 < run.rows; r0 += kChunkRows) {
    const std::size_t rows = std::min(kChunkRows, run.rows - r0);
    const auto first = static_cast<std::ptrdiff_t>(run.first + r0);
    const double* g = grad_pre_pad + first * Cout;
    for (std::size_t r = 0; r < rows; ++r) gb += Eigen::Map<const Row<Cout>>(g + r * Cout);
    for (int t = 0; t < kTaps; ++t) {
      const std::ptrdiff_t off = (first + run.shift[t]) * Cin;
      const double* in = in_pad + off;
      Eigen::Map<Fixed<Cin, Cout>> gw_out(grad_weight + static_cast<std::size_t>(t) * Cin * Cout);
      Fixed<Cin, Cout> gw = gw_out;
      for (std::size_t r = 0; r < rows; ++r) {
        const Row<Cout> gr = Eigen::Map<const Row<Cout>>(g + r * Cout);
        for (int ci = 0; ci < Cin; ++ci) gw.row(ci) += in[r * Cin + ci] * gr;
      }
      gw_out = gw;
      if (grad_in_pad != nullptr) {
        const Fixed<Cout, Cin> wt =
            Eigen::Map<const Fixed<Cin, Cout>>(weight + static_cast<std::size_t>(t) * Cin * Cout).transpose();
        double* gi = grad_in_pad + off;
        for (std::size_t r = 0; r < rows; ++r) {
          Eigen::Map<Row<Cin>> o(gi + r * Cin);
          Row<Cin> acc = o;
          for (int co = 0; co < Cout; ++co) acc += g[r * Cout + co] * wt.row(co);
          o = acc;
        }
      }
    }
  }
}

}  // namespace

NetParams zero_params() {
  NetParams p;
  p.blocks.push_back(make_block("conv1.weight", {3, 3, 3, kIn, kHid}));
  p.blocks.push_back(make_block("conv1.bias", {kHid}));
  p.blocks.push_back(make_block("conv2.weight", {3, 3, 3, kHid, kHid}));
  p.blocks.push_back(make_block("conv2.bias", {kHid}));
  p.blocks.push_back(make_block("conv3.weight", {kHid}));
  p.blocks.push_back(make_block("conv3.bias", {1}));
  return p;
}

NetParams init_params(Rng& rng) {
  NetParams p = zero_params();
  const std::array<std::pair<std::size_t, double>, 3> weights{{
      {0, static_cast<double>(kTaps * kIn)},
      {2, static_cast<double>(kTaps * kHid)},
      {4, static_cast<double>(kHid)},
  }};
  for (const auto& [block, fan_in] : weights) {
    const double bound = std::sqrt(6.0 / fan_in);
    for (auto& w : p.blocks[block].values) w = rng.next_uniform(-bound, bound);
  }
  return p;
}

void check_architecture(const NetParams& params) {
  static const NetParams reference = zero_params();
  if (!params.same_layout(reference)) {
    throw std::invalid_argument("network parameters do not match architecture " + std::string(arch::kTag));
  }
}

NetInput make_input(const Patch& patch) {
  NetInput in{patch.dims, kIn, std::vector<double>(patch.dims.count() * kIn)};
  const auto mask = patch.mask_channel();
  for (std::size_t v = 0; v < patch.dims.count(); ++v) {
    in.values[v * kIn] = patch.image[v];
    in.values[v * kIn + 1] = mask[v];
  }
  return in;
}

NetInput make_inference_input(std::span<const float> image, const Dims& dims) {
  if (image.size() != dims.count()) throw std::invalid_argument("make_inference_input: size mismatch");
  NetInput in{dims, kIn, std::vector<double>(dims.count() * kIn)};
  for (std::size_t v = 0; v < dims.count(); ++v) {
    in.values[v * kIn] = image[v];
    in.values[v * kIn + 1] = 1.0;
  }
  return in;
}

ForwardCache forward(const NetParams& params, const NetInput& input) {
  check_architecture(params);
  if (input.channels != kIn) {
    throw std::invalid_argument("forward: expected " + std::to_string(kIn) + " input channels, got " +
                                std::to_string(input.channels));
  }
  const Dims& d = input.dims;
  if (d.x < 3 || d.y < 3 || d.z < 3) throw std::invalid_argument("forward: patch dims must be >= 3");
  if (input.values.size() != d.count() * kIn) throw std::invalid_argument("forward: input size mismatch");

  const Padded pad(d);
  ForwardCache c;
  c.dims = d;
  c.input_padded.assign(pad.count() * kIn, 0.0);
  for (int k = 0; k < d.z; ++k)
    for (int j = 0; j < d.y; ++j)
      for (int i = 0; i < d.x; ++i) {
        const std::size_t src = d.index(i, j, k) * kIn;
        const std::size_t dst = pad.center(i, j, k) * kIn;
        for (int ch = 0; ch < kIn; ++ch) c.input_padded[dst + ch] = input.values[src + ch];
      }

  c.hidden1_padded.assign(pad.count() * kHid, 0.0);
  conv3_pre<kIn, kHid>(c.input_padded.data(), d, params.blocks[0].values.data(), params.blocks[1].values.data(),
                       c.hidden1_padded.data());
  relu_interior<kHid>(c.hidden1_padded.data(), d);
  c.hidden2_padded.assign(pad.count() * kHid, 0.0);
  conv3_pre<kHid, kHid>(c.hidden1_padded.data(), d, params.blocks[2].values.data(),
                        params.blocks[3].values.data(), c.hidden2_padded.data());
  relu_interior<kHid>(c.hidden2_padded.data(), d);

  const double* w3 = params.blocks[4].values.data();
  const double b3 = params.blocks[5].values[0];
  c.probabilities.resize(d.count());
  for (int k = 0; k < d.z; ++k)
    for (int j = 0; j < d.y; ++j)
      for (int i = 0; i < d.x; ++i) {
        double z = b3;
        const double* h = c.hidden2_padded.data() + pad.center(i, j, k) * kHid;
        for (int ci = 0; ci < kHid; ++ci) z += w3[ci] * h[ci];
        c.probabilities[d.index(i, j, k)] = sigmoid(z);
      }
  return c;
}

void accumulate_backward(const NetParams& params, const ForwardCache& cache, std::span<const double> grad_output,
                         GradientSet& acc) {
  check_architecture(params);
  if (!acc.same_layout(params)) throw std::invalid_argument("backward: gradient set does not match params");
  const Dims& d = cache.dims;
  const std::size_t n = d.count();
  const Padded pad(d);
  if (grad_output.size() != n || cache.probabilities.size() != n || cache.hidden1_padded.size() != pad.count() * kHid ||
      cache.hidden2_padded.size() != pad.count() * kHid || cache.input_padded.size() != pad.count() * kIn) {
    throw std::invalid_argument("backward: cache does not match the output gradient");
  }

  // output layer: sigmoid then 1x1 conv
  const double* w3 = params.blocks[4].values.data();
  double* gw3 = acc.blocks[4].values.data();
  double& gb3 = acc.blocks[5].values[0];
  std::vector<double> grad_pre2(pad.count() * kHid, 0.0);
  for (int k = 0; k < d.z; ++k)
    for (int j = 0; j < d.y; ++j)
      for (int i = 0; i < d.x; ++i) {
        const std::size_t v = d.index(i, j, k);
        const double p = cache.probabilities[v];
        const double gz = grad_output[v] * p * (1.0 - p);
        if (gz == 0.0) continue;
        gb3 += gz;
        const std::size_t row = pad.center(i, j, k) * kHid;
        const double* h = cache.hidden2_padded.data() + row;
        double* g = grad_pre2.data() + row;
        for (int ci = 0; ci < kHid; ++ci) {
          gw3[ci] += gz * h[ci];
          g[ci] = h[ci] > 0.0 ? w3[ci] * gz : 0.0;
        }
      }

  std::vector<double> grad_h1(pad.count() * kHid, 0.0);
  conv3_backward<kHid, kHid>(cache.hidden1_padded.data(), d, params.blocks[2].values.data(), grad_pre2.data(),
                             acc.blocks[2].values.data(), acc.blocks[3].values.data(), grad_h1.data());

  // ReLU gate; the halo of hidden1 is zero, so halo gradients vanish here too
  for (std::size_t q = 0; q < grad_h1.size(); ++q) {
    if (!(cache.hidden1_padded[q] > 0.0)) grad_h1[q] = 0.0;
  }

  conv3_backward<kIn, kHid>(cache.input_padded.data(), d, params.blocks[0].values.data(), grad_h1.data(),
                            acc.blocks[0].values.data(), acc.blocks[1].values.data(), nullptr);
}

GradientSet backward(const NetParams& params, const ForwardCache& cache, std::span<const double> grad_output) {
  GradientSet g = GradientSet::zeros_like(params);
  accumulate_backward(params, cache, grad_output, g);
  return g;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  check_architecture(ckpt.params);
  nlohmann::ordered_json h;
  h["arch"] = arch::kTag;
  h["epoch"] = ckpt.epoch;
  if (ckpt.val_score && std::isfinite(*ckpt.val_score)) {
    h["val_score"] = *ckpt.val_score;
  } else {
    h["val_score"] = nullptr;
  }
  auto blocks = nlohmann::ordered_json::array();
  for (const auto& b : ckpt.params.blocks) blocks.push_back({{"name", b.name}, {"shape", b.shape}});
  h["blocks"] = blocks;
  std::string out = h.dump() + "\n";
  for (const auto& b : ckpt.params.blocks) {
    const std::size_t off = out.size();
    out.resize(off + b.values.size() * sizeof(double));
    std::memcpy(out.data() + off, b.values.data(), b.values.size() * sizeof(double));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw std::runtime_error("checkpoint: missing header line");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: malformed header: ") + e.what());
  }
  if (h.value("arch", std::string{}) != arch::kTag) {
    throw std::runtime_error("checkpoint: unsupported architecture tag");
  }
  Checkpoint c;
  c.params = zero_params();
  c.epoch = h.at("epoch").get<int>();
  if (!h.at("val_score").is_null()) c.val_score = h.at("val_score").get<double>();
  const auto& blocks = h.at("blocks");
  if (blocks.size() != c.params.blocks.size()) throw std::runtime_error("checkpoint: wrong block count");
  std::size_t off = nl + 1;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    auto& b = c.params.blocks[i];
    if (blocks[i].at("name").get<std::string>() != b.name ||
        blocks[i].at("shape").get<std::vector<std::size_t>>() != b.shape) {
      throw std::runtime_error("checkpoint: block " + std::to_string(i) + " does not match the architecture");
    }
    const std::size_t len = b.values.size() * sizeof(double);
    if (off + len > bytes.size()) throw std::runtime_error("checkpoint: truncated payload");
    std::memcpy(b.values.data(), bytes.data() + off, len);
    off += len;
  }
  if (off != bytes.size()) throw std::runtime_error("checkpoint: trailing bytes after payload");
  return c;
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_bytes(path, encode_checkpoint(ckpt));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file_bytes(path)); }

}  // namespace sparseg
