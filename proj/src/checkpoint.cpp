#include "attriflip/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace attriflip {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[10] = {'A', 'T', 'T', 'R', 'I', 'F', 'L', 'I', 'P', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_i32(std::ostream& os, std::int32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
std::int32_t read_i32(std::istream& is) {
  std::int32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

void write_f32_array(std::ostream& os, const std::vector<double>& a) {
  for (double v : a) {
    float f = static_cast<float>(v);
    os.write(reinterpret_cast<const char*>(&f), sizeof f);
  }
}

void read_f32_array(std::istream& is, std::vector<double>& a) {
  for (double& v : a) {
    float f = 0.0f;
    is.read(reinterpret_cast<char*>(&f), sizeof f);
    v = static_cast<double>(f);
  }
}

}  // namespace

void save_checkpoint(const Network& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open checkpoint for write: " + path);
  os.write(kMagic, sizeof kMagic);
  write_u32(os, net.loss == LossKind::Euclidean ? 0u : 1u);
  write_u32(os, static_cast<std::uint32_t>(net.input.channels));
  write_u32(os, static_cast<std::uint32_t>(net.input.height));
  write_u32(os, static_cast<std::uint32_t>(net.input.width));
  write_u32(os, static_cast<std::uint32_t>(net.specs.size()));
  for (const auto& s : net.specs) {
    write_u32(os, static_cast<std::uint32_t>(s.kind));
    write_i32(os, s.out_channels);
    write_i32(os, s.kernel);
    write_i32(os, s.stride);
    write_i32(os, s.pad);
    write_i32(os, s.units);
  }
  for (std::size_t i = 0; i < net.specs.size(); ++i) {
    write_f32_array(os, net.weights[i]);
    write_f32_array(os, net.biases[i]);
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

Network load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[sizeof kMagic] = {};
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("not an ATTRIFLIP1 checkpoint: " + path);

  std::uint32_t loss_kind = read_u32(is);
  if (loss_kind > 1)
    throw std::runtime_error("checkpoint: unknown loss kind");
  Shape3 input;
  input.channels = static_cast<int>(read_u32(is));
  input.height = static_cast<int>(read_u32(is));
  input.width = static_cast<int>(read_u32(is));
  std::uint32_t n_layers = read_u32(is);
  if (!is || n_layers == 0 || n_layers > 1024)
    throw std::runtime_error("checkpoint: corrupt header");

  std::vector<LayerSpec> specs;
  specs.reserve(n_layers);
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    std::uint32_t kind = read_u32(is);
    if (kind > 3) throw std::runtime_error("checkpoint: unknown layer kind");
    LayerSpec s;
    s.kind = static_cast<LayerKind>(kind);
    s.out_channels = read_i32(is);
    s.kernel = read_i32(is);
    s.stride = read_i32(is);
    s.pad = read_i32(is);
    s.units = read_i32(is);
    specs.push_back(s);
  }

  // Rebuild through make_network so shapes are validated, then overwrite
  // the random parameters with the stored ones.
  Network net = make_network(
      input, specs, loss_kind == 0 ? LossKind::Euclidean : LossKind::Softmax,
      0);
  for (std::size_t i = 0; i < net.specs.size(); ++i) {
    read_f32_array(is, net.weights[i]);
    read_f32_array(is, net.biases[i]);
  }
  if (!is) throw std::runtime_error("checkpoint: truncated parameter data");
  is.peek();
  if (!is.eof())
    throw std::runtime_error("checkpoint: trailing bytes after parameters");
  return net;
}

}  // namespace attriflip
