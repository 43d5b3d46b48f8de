#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "imdn/autograd.hpp"

namespace imdn {

// standard: trunk at LR resolution, sub-pixel upsampling by `scale`.
// any_scale: two stride-2 convs in, x4 sub-pixel out, output size == input size.
enum class Topology : std::uint8_t { standard = 0, any_scale = 1 };

// prm: progressive refinement + optional attention + 1x1 fuse.
// plain3: three 3x3 convs, no distillation and no trailing 1x1.
enum class BlockKind : std::uint8_t { prm = 0, plain3 = 1 };

struct ImdnConfig {
  int num_blocks = 6;
  int channels = 64;
  int distilled = 16;
  int coarse = 48;
  int cca_squeeze = 4;
  double leaky_slope = 0.05;
  int scale = 4;
  bool use_cca = true;
  bool use_iic = true;
  BlockKind block = BlockKind::prm;
  Topology topology = Topology::standard;

  void validate() const;

  // Channel plan scaled down for cheap experiments; distilled = channels / 4.
  static ImdnConfig narrow(int channels, int num_blocks, int scale);

  friend bool operator==(const ImdnConfig&, const ImdnConfig&) = default;
};

// Named architectures: the full network, its any-scale sibling, and the
// four-block ablation ladder.
enum class Variant { imdn, imdn_as, plain3_b4, basic_b4, basic_b4_cca, b4 };

std::optional<Variant> parse_variant(std::string_view name);
std::string_view to_string(Variant v);
std::span<const Variant> all_variants();
ImdnConfig config_for(Variant v, int scale);

struct LayerSlot {
  std::string name;
  ag::Var weight;  // (out, in, k, k)
  ag::Var bias;    // (1, out, 1, 1)
  ConvGeometry geometry;
  bool activated = false;         // followed by leaky ReLU
  bool attention_branch = false;  // runs on pooled 1x1 statistics
  // HR pixel area divided by the area of the spatial grid the trunk runs on here.
  int area_divisor = 1;
  // Layers whose outputs reach this layer through parameter-free ops; empty means the image.
  std::vector<std::string> sources;

  int in_channels() const { return weight.value().c(); }
  int out_channels() const { return weight.value().n(); }
  int kernel() const { return weight.value().h(); }
  std::int64_t allocated_params() const {
    return static_cast<std::int64_t>(weight.value().numel() + bias.value().numel());
  }
};

struct ImdbLayers {
  const LayerSlot* c1 = nullptr;
  const LayerSlot* c2 = nullptr;
  const LayerSlot* c3 = nullptr;
  const LayerSlot* c4 = nullptr;
  const LayerSlot* cca_down = nullptr;
  const LayerSlot* cca_up = nullptr;
  const LayerSlot* c5 = nullptr;
};

// Built network: an ordered set of named convolutions plus the wiring implied
// by its config. Move-only because the parameters are shared handles.
class Model {
 public:
  explicit Model(ImdnConfig config);

  Model(Model&&) = default;
  Model& operator=(Model&&) = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  Model clone() const;

  const ImdnConfig& config() const noexcept { return config_; }
  std::span<const LayerSlot> layers() const noexcept { return layers_; }
  std::span<LayerSlot> layers() noexcept { return layers_; }
  const LayerSlot& layer(std::string_view name) const;
  LayerSlot& layer(std::string_view name);
  bool has_layer(std::string_view name) const;

  ImdbLayers block(int index) const;
  std::vector<ag::Var> parameters() const;
  void zero_grad();

  // Input (N, 3, H, W); output (N, 3, s*H, s*W), or (N, 3, H, W) for any_scale.
  ag::Var forward(const ag::Var& input) const;
  Tensor forward(const Tensor& input) const;

  // Checks spatial preconditions on a prospective input.
  void check_input(const Shape& input) const;

 private:
  LayerSlot& add_layer(std::string name, int in, int out, int kernel, int stride, bool activated,
                       bool branch, int area_divisor, std::vector<std::string> sources);
  std::vector<std::string> build_block(int index, std::vector<std::string> sources, int divisor);

  ImdnConfig config_;
  std::vector<LayerSlot> layers_;
};

ag::Var apply_conv(const LayerSlot& layer, const ag::Var& x, double slope);

ag::Var forward_prm(const ag::Var& f_in, const ImdbLayers& block, const ImdnConfig& config);
ag::Var forward_cca(const ag::Var& x, const ImdbLayers& block);
ag::Var forward_imdb(const ag::Var& f_in, const ImdbLayers& block, const ImdnConfig& config);
ag::Var forward_plain_block(const ag::Var& f_in, const ImdbLayers& block, const ImdnConfig& config);

Model build_imdn(const ImdnConfig& config);
Model build_imdn_as(ImdnConfig config);
Model build_ablation(Variant variant, int scale);
Model build_variant(Variant variant, int scale);

// He-style normal init: std = gain / sqrt(fan_in), gain sqrt(2 / (1 + slope^2))
// on leaky-ReLU-followed convs and 1 elsewhere. Biases are zeroed.
void init_weights(Model& model, std::uint64_t seed);

void save_weights(const Model& model, const std::filesystem::path& path);
Model load_weights(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_weights(const Model& model);
Model deserialize_weights(std::span<const std::uint8_t> bytes);

inline constexpr std::uint32_t kWeightFormatVersion = 1;

}  // namespace imdn
