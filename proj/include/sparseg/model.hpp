#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sparseg/rng.hpp"
#include "sparseg/sampling.hpp"
#include "sparseg/volume.hpp"

namespace sparseg {

struct TensorBlock {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;

  friend bool operator==(const TensorBlock&, const TensorBlock&) = default;
};

/// Ordered list of named blocks. Tagged so parameters and gradients cannot be
/// swapped by accident.
template <typename Tag>
struct BlockSet {
  std::vector<TensorBlock> blocks;

  std::size_t value_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.values.size();
    return n;
  }

  template <typename OtherTag>
  bool same_layout(const BlockSet<OtherTag>& other) const {
    if (blocks.size() != other.blocks.size()) return false;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      if (blocks[i].shape != other.blocks[i].shape || blocks[i].values.size() != other.blocks[i].values.size()) {
        return false;
      }
    }
    return true;
  }

  template <typename OtherTag>
  static BlockSet zeros_like(const BlockSet<OtherTag>& other) {
    BlockSet out;
    for (const auto& b : other.blocks) out.blocks.push_back({b.name, b.shape, std::vector<double>(b.values.size(), 0.0)});
    return out;
  }

  friend bool operator==(const BlockSet&, const BlockSet&) = default;
};

using NetParams = BlockSet<struct NetParamsTag>;
using GradientSet = BlockSet<struct GradientSetTag>;

/// Tiny fully convolutional net:
///   conv3x3x3(2->8, pad 1) + ReLU, conv3x3x3(8->8, pad 1) + ReLU, conv1x1x1(8->1) + sigmoid.
///
/// Canonical block order and layouts (also the checkpoint payload order):
///   0 conv1.weight [kz][ky][kx][cin=2][cout=8]
///   1 conv1.bias   [8]
///   2 conv2.weight [kz][ky][kx][cin=8][cout=8]
///   3 conv2.bias   [8]
///   4 conv3.weight [cin=8]
///   5 conv3.bias   [1]
namespace arch {
inline constexpr int kInputChannels = 2;
inline constexpr int kHidden = 8;
inline constexpr int kTaps = 27;
inline constexpr const char* kTag = "sparseg-tiny3d-v1";
}  // namespace arch

/// Weights ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)), biases zero.
NetParams init_params(Rng& rng);
NetParams zero_params();
/// Throws std::invalid_argument unless the blocks match the architecture.
void check_architecture(const NetParams& params);

/// Two-channel network input, channel-last: voxel v holds (image, mask).
struct NetInput {
  Dims dims;
  int channels = arch::kInputChannels;
  std::vector<double> values;
};

NetInput make_input(const Patch& patch);
/// Input for inference: image voxels with an all-ones mask channel.
NetInput make_inference_input(std::span<const float> image, const Dims& dims);

struct ForwardCache {
  Dims dims;
  std::vector<double> input_padded;   // [(X+2)(Y+2)(Z+2)][2]
  std::vector<double> hidden1_padded;  // post-ReLU, zero halo
  std::vector<double> hidden2_padded;  // post-ReLU, zero halo
  std::vector<double> probabilities;   // [XYZ]
};

/// Probabilities are clamped into the open interval (0, 1).
ForwardCache forward(const NetParams& params, const NetInput& input);

/// Exact gradients of a scalar loss given dL/d(probability) per voxel.
GradientSet backward(const NetParams& params, const ForwardCache& cache, std::span<const double> grad_output);
/// Same as backward but adds into `acc`.
void accumulate_backward(const NetParams& params, const ForwardCache& cache, std::span<const double> grad_output,
                         GradientSet& acc);

struct Checkpoint {
  NetParams params;
  int epoch = 0;
  std::optional<double> val_score;
};

/// JSON header line (architecture tag, epoch, validation score, block shapes)
/// followed by the little-endian float64 payload in canonical block order.
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);
void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace sparseg
