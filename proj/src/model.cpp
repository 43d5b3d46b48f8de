#include "imdn/model.hpp"

#include <array>
#include <cmath>
#include <random>

namespace imdn {

namespace {

constexpr std::array<Variant, 6> kVariants = {Variant::imdn,      Variant::imdn_as,
                                              Variant::plain3_b4, Variant::basic_b4,
                                              Variant::basic_b4_cca, Variant::b4};

// Any-scale networks downsample twice by 2 and upsample once by 4.
constexpr int kAnyScaleShuffle = 4;

std::string block_prefix(int index) { return "blocks." + std::to_string(index) + "."; }

}  // namespace

void ImdnConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::invalid_config, "imdn config: " + what); };
  if (num_blocks < 1) bad("num_blocks must be at least 1");
  if (channels < 1) bad("channels must be positive");
  if (block == BlockKind::prm) {
    if (distilled < 1 || coarse < 1) bad("distilled and coarse widths must be positive");
    if (distilled + coarse != channels) bad("distilled + coarse must equal channels");
    if (cca_squeeze < 1 || cca_squeeze > 4 * distilled) bad("cca_squeeze out of range");
  }
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) bad("leaky_slope must lie in (0, 1)");
  if (topology == Topology::standard && scale < 1) bad("scale must be at least 1");
  if (topology == Topology::any_scale && scale != 1)
    bad("any-scale networks keep the input size; scale must be 1");
  if (block == BlockKind::plain3 && use_cca) bad("plain blocks carry no attention layer");
}

ImdnConfig ImdnConfig::narrow(int channels, int num_blocks, int scale) {
  ImdnConfig c;
  c.channels = channels;
  c.num_blocks = num_blocks;
  c.distilled = channels / 4;
  c.coarse = channels - c.distilled;
  c.cca_squeeze = std::max(1, channels / 16);
  c.scale = scale;
  return c;
}

std::optional<Variant> parse_variant(std::string_view name) {
  for (Variant v : kVariants)
    if (to_string(v) == name) return v;
  return std::nullopt;
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::imdn: return "imdn";
    case Variant::imdn_as: return "imdn-as";
    case Variant::plain3_b4: return "plain-3conv-B4";
    case Variant::basic_b4: return "basic-B4";
    case Variant::basic_b4_cca: return "basic-B4+CCA";
    case Variant::b4: return "B4";
  }
  return "unknown";
}

std::span<const Variant> all_variants() { return kVariants; }

ImdnConfig config_for(Variant v, int scale) {
  ImdnConfig c;
  c.scale = scale;
  switch (v) {
    case Variant::imdn:
      break;
    case Variant::imdn_as:
      c.topology = Topology::any_scale;
      c.scale = 1;
      break;
    case Variant::plain3_b4:
      c.num_blocks = 4;
      c.block = BlockKind::plain3;
      c.use_cca = false;
      c.use_iic = false;
      break;
    case Variant::basic_b4:
      c.num_blocks = 4;
      c.use_cca = false;
      c.use_iic = false;
      break;
    case Variant::basic_b4_cca:
      c.num_blocks = 4;
      c.use_iic = false;
      break;
    case Variant::b4:
      c.num_blocks = 4;
      break;
  }
  return c;
}

LayerSlot& Model::add_layer(std::string name, int in, int out, int kernel, int stride,
                            bool activated, bool branch, int area_divisor,
                            std::vector<std::string> sources) {
  LayerSlot slot;
  slot.name = std::move(name);
  slot.weight = ag::Var::parameter(Tensor({out, in, kernel, kernel}));
  slot.bias = ag::Var::parameter(Tensor({1, out, 1, 1}));
  slot.geometry = {stride, kernel / 2};
  slot.activated = activated;
  slot.attention_branch = branch;
  slot.area_divisor = area_divisor;
  slot.sources = std::move(sources);
  layers_.push_back(std::move(slot));
  return layers_.back();
}

// Returns the layers feeding the block output.
std::vector<std::string> Model::build_block(int index, std::vector<std::string> sources,
                                            int divisor) {
  const std::string p = block_prefix(index);
  const int ch = config_.channels;
  std::vector<std::string> out = sources;
  if (config_.block == BlockKind::plain3) {
    add_layer(p + "c1", ch, ch, 3, 1, true, false, divisor, sources);
    add_layer(p + "c2", ch, ch, 3, 1, true, false, divisor, {p + "c1"});
    add_layer(p + "c3", ch, ch, 3, 1, true, false, divisor, {p + "c2"});
    out.push_back(p + "c3");
    return out;
  }
  const int d = config_.distilled;
  const int rest = config_.coarse;
  const int fused = 4 * d;
  add_layer(p + "c1", ch, ch, 3, 1, true, false, divisor, sources);
  add_layer(p + "c2", rest, ch, 3, 1, true, false, divisor, {p + "c1"});
  add_layer(p + "c3", rest, ch, 3, 1, true, false, divisor, {p + "c2"});
  add_layer(p + "c4", rest, d, 3, 1, true, false, divisor, {p + "c3"});
  std::vector<std::string> distilled = {p + "c1", p + "c2", p + "c3", p + "c4"};
  std::vector<std::string> c5_sources = distilled;
  if (config_.use_cca) {
    const int sq = config_.cca_squeeze;
    // Attention convs are charged at trunk resolution, like the trunk.
    add_layer(p + "cca_down", fused, sq, 1, 1, false, true, divisor, distilled);
    add_layer(p + "cca_up", sq, fused, 1, 1, false, true, divisor, {p + "cca_down"});
    c5_sources.push_back(p + "cca_up");
  }
  add_layer(p + "c5", fused, ch, 1, 1, false, false, divisor, c5_sources);
  out.push_back(p + "c5");
  return out;
}

Model::Model(ImdnConfig config) : config_(config) {
  config_.validate();
  const int ch = config_.channels;
  int divisor = config_.scale * config_.scale;
  int shuffle = config_.scale;
  std::vector<std::string> head;
  if (config_.topology == Topology::standard) {
    add_layer("fea_conv", 3, ch, 3, 1, false, false, divisor, {});
    head = {"fea_conv"};
  } else {
    shuffle = kAnyScaleShuffle;
    add_layer("down1", 3, ch, 3, 2, true, false, 4, {});
    divisor = 16;
    add_layer("down2", ch, ch, 3, 2, true, false, divisor, {"down1"});
    head = {"down2"};
  }

  std::vector<std::string> current = head;
  std::vector<std::string> block_outputs;
  for (int b = 0; b < config_.num_blocks; ++b) {
    current = build_block(b, current, divisor);
    block_outputs.insert(block_outputs.end(), current.back());
  }
  std::vector<std::string> trunk = current;
  if (config_.use_iic) {
    add_layer("fusion_1x1", ch * config_.num_blocks, ch, 1, 1, true, false, divisor,
              block_outputs);
    trunk = {"fusion_1x1"};
  }
  add_layer("lr_conv", ch, ch, 3, 1, false, false, divisor, trunk);
  std::vector<std::string> up_sources = head;
  up_sources.push_back("lr_conv");
  add_layer("up_conv", ch, 3 * shuffle * shuffle, 3, 1, false, false, divisor, up_sources);
}

Model Model::clone() const {
  Model copy(config_);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    copy.layers_[i].weight.mutable_value() = layers_[i].weight.value();
    copy.layers_[i].bias.mutable_value() = layers_[i].bias.value();
  }
  return copy;
}

const LayerSlot& Model::layer(std::string_view name) const {
  for (const LayerSlot& l : layers_)
    if (l.name == name) return l;
  fail(ErrorCode::invalid_argument, "model has no layer named '" + std::string(name) + "'");
}

LayerSlot& Model::layer(std::string_view name) {
  return const_cast<LayerSlot&>(std::as_const(*this).layer(name));
}

bool Model::has_layer(std::string_view name) const {
  for (const LayerSlot& l : layers_)
    if (l.name == name) return true;
  return false;
}

ImdbLayers Model::block(int index) const {
  if (index < 0 || index >= config_.num_blocks)
    fail(ErrorCode::invalid_argument, "block index " + std::to_string(index) + " out of range");
  const std::string p = block_prefix(index);
  auto find = [&](const char* n) -> const LayerSlot* {
    const std::string full = p + n;
    for (const LayerSlot& l : layers_)
      if (l.name == full) return &l;
    return nullptr;
  };
  return {find("c1"), find("c2"), find("c3"), find("c4"), find("cca_down"), find("cca_up"),
          find("c5")};
}

std::vector<ag::Var> Model::parameters() const {
  std::vector<ag::Var> params;
  params.reserve(layers_.size() * 2);
  for (const LayerSlot& l : layers_) {
    params.push_back(l.weight);
    params.push_back(l.bias);
  }
  return params;
}

void Model::zero_grad() {
  for (LayerSlot& l : layers_) {
    l.weight.zero_grad();
    l.bias.zero_grad();
  }
}

void Model::check_input(const Shape& input) const {
  if (input.c != 3)
    fail(ErrorCode::shape_mismatch, "model expects 3 input channels, got " + to_string(input));
  if (input.h < 1 || input.w < 1 || input.n < 1)
    fail(ErrorCode::invalid_argument, "model input must be non-empty, got " + to_string(input));
  if (config_.topology == Topology::any_scale && (input.h % 4 != 0 || input.w % 4 != 0))
    fail(ErrorCode::invalid_argument,
         "any-scale model needs height and width divisible by 4, got " + to_string(input));
}

ag::Var apply_conv(const LayerSlot& layer, const ag::Var& x, double slope) {
  ag::Var y = ag::conv2d(x, layer.weight, layer.bias, layer.geometry);
  return layer.activated ? ag::leaky_relu(y, slope) : y;
}

ag::Var forward_prm(const ag::Var& f_in, const ImdbLayers& block, const ImdnConfig& config) {
  if (f_in.value().c() != block.c1->in_channels())
    fail(ErrorCode::shape_mismatch, "prm: input has " + std::to_string(f_in.value().c()) +
                                        " channels, expected " +
                                        std::to_string(block.c1->in_channels()));
  const double a = config.leaky_slope;
  const int d = config.distilled;
  auto [refined1, coarse1] = ag::channel_split(apply_conv(*block.c1, f_in, a), d);
  auto [refined2, coarse2] = ag::channel_split(apply_conv(*block.c2, coarse1, a), d);
  auto [refined3, coarse3] = ag::channel_split(apply_conv(*block.c3, coarse2, a), d);
  ag::Var refined4 = apply_conv(*block.c4, coarse3, a);
  return ag::concat_channels({refined1, refined2, refined3, refined4});
}

ag::Var forward_cca(const ag::Var& x, const ImdbLayers& block) {
  if (!block.cca_down || !block.cca_up)
    fail(ErrorCode::invalid_argument, "cca: block has no attention layers");
  if (x.value().c() != block.cca_down->in_channels())
    fail(ErrorCode::shape_mismatch, "cca: input channel count does not match attention layer");
  ag::Var z = ag::global_contrast_pool(x);
  ag::Var squeezed =
      ag::relu(ag::conv2d(z, block.cca_down->weight, block.cca_down->bias, {1, 0}));
  ag::Var gates =
      ag::sigmoid(ag::conv2d(squeezed, block.cca_up->weight, block.cca_up->bias, {1, 0}));
  return ag::channel_scale(x, gates);
}

ag::Var forward_imdb(const ag::Var& f_in, const ImdbLayers& block, const ImdnConfig& config) {
  ag::Var distilled = forward_prm(f_in, block, config);
  if (block.cca_down) distilled = forward_cca(distilled, block);
  ag::Var fused = ag::conv2d(distilled, block.c5->weight, block.c5->bias, block.c5->geometry);
  return ag::add(fused, f_in);
}

ag::Var forward_plain_block(const ag::Var& f_in, const ImdbLayers& block,
                            const ImdnConfig& config) {
  const double a = config.leaky_slope;
  ag::Var y = apply_conv(*block.c1, f_in, a);
  y = apply_conv(*block.c2, y, a);
  y = apply_conv(*block.c3, y, a);
  return ag::add(y, f_in);
}

ag::Var Model::forward(const ag::Var& input) const {
  check_input(input.value().shape());
  const double a = config_.leaky_slope;
  ag::Var head;
  if (config_.topology == Topology::standard) {
    head = apply_conv(layer("fea_conv"), input, a);
  } else {
    head = apply_conv(layer("down2"), apply_conv(layer("down1"), input, a), a);
  }
  ag::Var x = head;
  std::vector<ag::Var> outputs;
  outputs.reserve(config_.num_blocks);
  for (int b = 0; b < config_.num_blocks; ++b) {
    const ImdbLayers blk = block(b);
    x = config_.block == BlockKind::plain3 ? forward_plain_block(x, blk, config_)
                                           : forward_imdb(x, blk, config_);
    outputs.push_back(x);
  }
  if (config_.use_iic) x = apply_conv(layer("fusion_1x1"), ag::concat_channels(outputs), a);
  x = ag::add(apply_conv(layer("lr_conv"), x, a), head);
  const int shuffle = config_.topology == Topology::standard ? config_.scale : kAnyScaleShuffle;
  return ag::pixel_shuffle(apply_conv(layer("up_conv"), x, a), shuffle);
}

Tensor Model::forward(const Tensor& input) const {
  ag::NoGradGuard guard;
  return forward(ag::Var(input)).value();
}

Model build_imdn(const ImdnConfig& config) {
  if (config.topology != Topology::standard)
    fail(ErrorCode::invalid_config, "build_imdn: use build_imdn_as for any-scale topology");
  return Model(config);
}

Model build_imdn_as(ImdnConfig config) {
  config.topology = Topology::any_scale;
  config.scale = 1;
  return Model(config);
}

Model build_ablation(Variant variant, int scale) {
  switch (variant) {
    case Variant::plain3_b4:
    case Variant::basic_b4:
    case Variant::basic_b4_cca:
    case Variant::b4:
      return Model(config_for(variant, scale));
    default:
      fail(ErrorCode::invalid_argument,
           "build_ablation: '" + std::string(to_string(variant)) + "' is not an ablation variant");
  }
}

Model build_variant(Variant variant, int scale) { return Model(config_for(variant, scale)); }

void init_weights(Model& model, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double slope = model.config().leaky_slope;
  const double leaky_gain = std::sqrt(2.0 / (1.0 + slope * slope));
  for (LayerSlot& l : model.layers()) {
    Tensor& w = l.weight.mutable_value();
    Tensor& b = l.bias.mutable_value();
    const double fan_in = static_cast<double>(w.c()) * w.h() * w.w();
    const double gain = l.activated ? leaky_gain : 1.0;
    std::normal_distribution<double> dist(0.0, gain / std::sqrt(fan_in));
    for (double& v : w.data()) v = dist(rng);
    b.fill(0.0);
  }
}

}  // namespace imdn
