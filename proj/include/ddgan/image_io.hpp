#ifndef DDGAN_IMAGE_IO_HPP_
#define DDGAN_IMAGE_IO_HPP_

#include "ddgan/tensor.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace ddgan {

// An image is a 3xHxW tensor, a batch NxCxHxW; values live in [-1, 1].

/// Binary P6, maxval 255. A byte p maps to 2p/255 - 1.
Tensorf read_ppm(std::istream& is, const std::string& source = "<stream>");
Tensorf load_ppm(const std::filesystem::path& path);

/// Inverse mapping with round-half-away-from-zero; values are clamped to [-1, 1].
void write_ppm(std::ostream& os, const Tensorf& image);
void save_ppm(const Tensorf& image, const std::filesystem::path& path);

/// Every .ppm below `dir` (recursively, sorted by path) stacked into a batch.
Tensorf load_dir(const std::filesystem::path& dir);

Tensorf stack_images(std::span<const Tensorf> images);
Tensorf image_at(const Tensorf& batch, Index i);
/// Gathers rows of a batch in the given order.
Tensorf gather(const Tensorf& batch, std::span<const std::size_t> indices);

/// Tiles the first rows*cols images of a batch into one image.
Tensorf tile_grid(const Tensorf& batch, int cols);

}  // namespace ddgan

#endif  // DDGAN_IMAGE_IO_HPP_
