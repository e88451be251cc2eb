#ifndef DDGAN_CHECKPOINT_HPP_
#define DDGAN_CHECKPOINT_HPP_

#include "ddgan/layers.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace ddgan {

inline constexpr const char* kCheckpointMagic = "CGAN1";

/// Parsed checkpoint file.
///
/// Layout: optional `key=value` header lines, the magic line `CGAN1`, then
/// per tensor (lexicographic by name) a line `name ndim d0 ... dk` followed by
/// the raw little-endian float32 values in row-major order.
struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> header;
  std::map<std::string, Tensorf> tensors;

  const std::string& header_value(const std::string& key) const;
};

void write_checkpoint(std::ostream& os, const std::vector<std::pair<std::string, std::string>>& header,
                      const std::map<std::string, Tensorf>& tensors);
void write_checkpoint(std::ostream& os, const std::vector<std::pair<std::string, std::string>>& header,
                      const ParameterSet& params);
void save_checkpoint(const std::filesystem::path& path, const std::vector<std::pair<std::string, std::string>>& header,
                     const ParameterSet& params);

/// Throws IoError on malformed headers, unknown magic or truncated payloads.
Checkpoint read_checkpoint(std::istream& is, const std::string& source = "<stream>");
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint values into an existing parameter set. Names and shapes
/// must match exactly in both directions.
void apply_checkpoint(const Checkpoint& checkpoint, ParameterSet& params);

}  // namespace ddgan

#endif  // DDGAN_CHECKPOINT_HPP_
