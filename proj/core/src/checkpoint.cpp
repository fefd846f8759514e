#include "ffgt/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "ffgt/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

namespace ffgt {

namespace {

constexpr char kMagic[8] = {'F', 'F', 'G', 'T', 'C', 'K', 'P', '1'};

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("checkpoint: truncated file");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const Tensor*>>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("checkpoint: cannot open for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_raw(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& [name, tensor] : records) {
    write_raw(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_raw(out, static_cast<std::uint32_t>(tensor->shape.size()));
    for (const auto d : tensor->shape) write_raw(out, static_cast<std::uint64_t>(d));
    out.write(reinterpret_cast<const char*>(tensor->data.data()),
              static_cast<std::streamsize>(tensor->data.size() * sizeof(double)));
  }
  if (!out) throw IoError("checkpoint: write failed: " + path);
}

std::vector<std::pair<std::string, Tensor>> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("checkpoint: bad magic in " + path);
  const auto count = read_raw<std::uint32_t>(in);
  std::vector<std::pair<std::string, Tensor>> records;
  records.reserve(count);
  for (std::uint32_t r = 0; r < count; ++r) {
    const auto name_len = read_raw<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto rank = read_raw<std::uint32_t>(in);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(read_raw<std::uint64_t>(in));
    Tensor t = Tensor::zeros(shape);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!in) throw IoError("checkpoint: truncated file");
    records.emplace_back(std::move(name), std::move(t));
  }
  return records;
}

void load_checkpoint_into(const std::string& path, std::vector<ParamRef> refs) {
  const auto records = load_checkpoint(path);
  if (records.size() != refs.size())
    throw IoError("checkpoint: record count mismatch in " + path);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto& [name, tensor] = records[i];
    if (name != refs[i].name)
      throw IoError("checkpoint: expected parameter '" + refs[i].name + "', found '" +
                    name + "'");
    if (tensor.shape != refs[i].tensor->shape)
      throw IoError("checkpoint: shape mismatch for '" + name + "'");
    *refs[i].tensor = tensor;
  }
}

}  // namespace ffgt
