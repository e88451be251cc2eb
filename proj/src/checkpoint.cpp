#include "ddgan/checkpoint.hpp"

#include "ddgan/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace ddgan {

namespace {

void write_floats_le(std::ostream& os, const Buffer<float>& data) {
  std::vector<char> bytes(static_cast<std::size_t>(data.size()) * 4);
  for (Index i = 0; i < data.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(data[i]);
    for (int b = 0; b < 4; ++b) bytes[static_cast<std::size_t>(i) * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
  }
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Buffer<float> read_floats_le(std::istream& is, Index count, const std::string& source, const std::string& name) {
  std::vector<unsigned char> bytes(static_cast<std::size_t>(count) * 4);
  is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (is.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw IoError(source, "truncated payload for tensor " + name);
  }
  Buffer<float> data(count);
  for (Index i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[static_cast<std::size_t>(i) * 4 + b]) << (8 * b);
    data[i] = std::bit_cast<float>(bits);
  }
  return data;
}

}  // namespace

const std::string& Checkpoint::header_value(const std::string& key) const {
  for (const auto& [k, v] : header) {
    if (k == key) return v;
  }
  throw IoError("<checkpoint>", "missing header key " + key);
}

void write_checkpoint(std::ostream& os, const std::vector<std::pair<std::string, std::string>>& header,
                      const std::map<std::string, Tensorf>& tensors) {
  for (const auto& [key, value] : header) os << key << '=' << value << '\n';
  os << kCheckpointMagic << '\n';
  for (const auto& [name, tensor] : tensors) {
    os << name << ' ' << tensor.ndim();
    for (const auto d : tensor.shape()) os << ' ' << d;
    os << '\n';
    write_floats_le(os, tensor.data());
  }
}

void write_checkpoint(std::ostream& os, const std::vector<std::pair<std::string, std::string>>& header,
                      const ParameterSet& params) {
  std::map<std::string, Tensorf> tensors;
  for (const auto& [name, entry] : params.entries()) tensors.emplace(name, entry.tensor);
  write_checkpoint(os, header, tensors);
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<std::pair<std::string, std::string>>& header,
                     const ParameterSet& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(path.string(), "cannot open for writing");
  write_checkpoint(os, header, params);
  if (!os) throw IoError(path.string(), "write failed");
}

Checkpoint read_checkpoint(std::istream& is, const std::string& source) {
  Checkpoint ckpt;
  std::string line;
  bool magic = false;
  while (std::getline(is, line)) {
    if (line == kCheckpointMagic) {
      magic = true;
      break;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError(source, "malformed header line '" + line + "'");
    ckpt.header.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  if (!magic) throw IoError(source, std::string("missing ") + kCheckpointMagic + " magic line");

  while (std::getline(is, line)) {
    std::istringstream fields(line);
    std::string name;
    int ndim = -1;
    fields >> name >> ndim;
    if (name.empty() || ndim < 0 || !fields) throw IoError(source, "malformed tensor record '" + line + "'");
    Shape shape(static_cast<std::size_t>(ndim));
    for (auto& d : shape) {
      if (!(fields >> d) || d <= 0) throw IoError(source, "malformed shape for tensor " + name);
    }
    std::string extra;
    if (fields >> extra) throw IoError(source, "trailing fields in record for tensor " + name);
    if (ckpt.tensors.count(name)) throw IoError(source, "duplicate tensor " + name);
    if (!ckpt.tensors.empty() && !(ckpt.tensors.rbegin()->first < name)) {
      throw IoError(source, "tensor " + name + " out of lexicographic order");
    }
    auto data = read_floats_le(is, shape_size(shape), source, name);
    ckpt.tensors.emplace(name, Tensorf(std::move(shape), std::move(data)));
  }
  return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(path.string(), "cannot open checkpoint");
  return read_checkpoint(is, path.string());
}

void apply_checkpoint(const Checkpoint& checkpoint, ParameterSet& params) {
  for (const auto& [name, entry] : params.entries()) {
    const auto it = checkpoint.tensors.find(name);
    if (it == checkpoint.tensors.end()) throw IoError("<checkpoint>", "missing tensor " + name);
    if (it->second.shape() != entry.tensor.shape()) {
      throw IoError("<checkpoint>", "tensor " + name + " has shape " + shape_string(it->second.shape()) +
                                        ", model expects " + shape_string(entry.tensor.shape()));
    }
  }
  for (const auto& [name, tensor] : checkpoint.tensors) {
    if (!params.contains(name)) throw IoError("<checkpoint>", "unexpected tensor " + name);
  }
  for (const auto& [name, entry] : params.entries()) {
    Tensorf target = entry.tensor;
    target.mutable_data() = checkpoint.tensors.at(name).data();
  }
}

}  // namespace ddgan
