#include "ddgan/image_io.hpp"

#include "ddgan/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace ddgan {

namespace {

// Reads one header token, skipping whitespace and '#' comments.
std::string header_token(std::istream& is, const std::string& source) {
  std::string token;
  int c = is.get();
  while (is) {
    if (c == '#') {
      while (is && c != '\n') c = is.get();
    } else if (std::isspace(c)) {
      c = is.get();
    } else {
      break;
    }
  }
  while (is && !std::isspace(c) && c != '#') {
    token.push_back(static_cast<char>(c));
    c = is.get();
  }
  if (token.empty()) throw IoError(source, "truncated PPM header");
  if (c == '#') is.unget();
  // The single whitespace byte after the last token has been consumed.
  return token;
}

int header_int(std::istream& is, const std::string& source, const char* what) {
  const auto token = header_token(is, source);
  if (!std::all_of(token.begin(), token.end(), [](char c) { return c >= '0' && c <= '9'; }) || token.size() > 6) {
    throw IoError(source, std::string("malformed PPM ") + what + " '" + token + "'");
  }
  return std::stoi(token);
}

std::uint8_t to_byte(float v) {
  const double u = (std::clamp(static_cast<double>(v), -1.0, 1.0) + 1.0) * 127.5;
  return static_cast<std::uint8_t>(std::round(u));
}

}  // namespace

Tensorf read_ppm(std::istream& is, const std::string& source) {
  if (header_token(is, source) != "P6") throw IoError(source, "not a binary P6 PPM");
  const int width = header_int(is, source, "width");
  const int height = header_int(is, source, "height");
  const int maxval = header_int(is, source, "maxval");
  if (width <= 0 || height <= 0) throw IoError(source, "PPM extents must be positive");
  if (maxval != 255) throw IoError(source, "unsupported PPM maxval " + std::to_string(maxval));
  const std::size_t pixels = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::vector<unsigned char> bytes(pixels * 3);
  is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(is.gcount()) != bytes.size()) {
    throw IoError(source, "truncated PPM payload (" + std::to_string(is.gcount()) + " of " +
                              std::to_string(bytes.size()) + " bytes)");
  }
  Buffer<float> data(static_cast<Index>(bytes.size()));
  for (std::size_t p = 0; p < pixels; ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      data[static_cast<Index>(c * pixels + p)] = static_cast<float>(2.0 * bytes[p * 3 + c] / 255.0 - 1.0);
    }
  }
  return Tensorf({3, height, width}, std::move(data));
}

Tensorf load_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  return read_ppm(in, path.string());
}

void write_ppm(std::ostream& os, const Tensorf& image) {
  if (image.ndim() != 3 || image.dim(0) != 3) throw DimensionError("write_ppm", 0, "expected a 3xHxW image");
  const Index h = image.dim(1), w = image.dim(2), pixels = h * w;
  os << "P6\n" << w << ' ' << h << "\n255\n";
  std::vector<unsigned char> bytes(static_cast<std::size_t>(pixels * 3));
  const auto& d = image.data();
  for (Index p = 0; p < pixels; ++p) {
    for (Index c = 0; c < 3; ++c) bytes[static_cast<std::size_t>(p * 3 + c)] = to_byte(d[c * pixels + p]);
  }
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void save_ppm(const Tensorf& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  write_ppm(out, image);
  if (!out) throw IoError(path.string(), "write failed");
}

Tensorf load_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError(dir.string(), "not a directory");
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ppm") paths.push_back(entry.path());
  }
  if (paths.empty()) throw IoError(dir.string(), "no .ppm files found");
  std::sort(paths.begin(), paths.end());
  std::vector<Tensorf> images;
  images.reserve(paths.size());
  for (const auto& p : paths) {
    images.push_back(load_ppm(p));
    if (images.back().shape() != images.front().shape()) {
      throw IoError(p.string(), "image is " + shape_string(images.back().shape()) + ", expected " +
                                    shape_string(images.front().shape()));
    }
  }
  return stack_images(images);
}

Tensorf stack_images(std::span<const Tensorf> images) {
  if (images.empty()) throw DimensionError("stack_images", 0, "no images");
  const auto& first = images.front().shape();
  const Index per = images.front().size();
  Buffer<float> data(per * static_cast<Index>(images.size()));
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].shape() != first) throw DimensionError("stack_images", 1, "mixed image shapes");
    data.segment(static_cast<Index>(i) * per, per) = images[i].data();
  }
  Shape shape{static_cast<Index>(images.size())};
  shape.insert(shape.end(), first.begin(), first.end());
  return Tensorf(std::move(shape), std::move(data));
}

Tensorf image_at(const Tensorf& batch, Index i) {
  const Index per = batch.size() / batch.dim(0);
  return Tensorf(Shape(batch.shape().begin() + 1, batch.shape().end()), batch.data().segment(i * per, per));
}

Tensorf gather(const Tensorf& batch, std::span<const std::size_t> indices) {
  const Index per = batch.size() / batch.dim(0);
  Buffer<float> data(per * static_cast<Index>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    data.segment(static_cast<Index>(i) * per, per) = batch.data().segment(static_cast<Index>(indices[i]) * per, per);
  }
  Shape shape = batch.shape();
  shape[0] = static_cast<Index>(indices.size());
  return Tensorf(std::move(shape), std::move(data));
}

Tensorf tile_grid(const Tensorf& batch, int cols) {
  const Index n = batch.dim(0), c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  const Index rows = (n + cols - 1) / cols;
  Buffer<float> data = Buffer<float>::Constant(c * rows * h * cols * w, -1.0f);
  const Index gw = cols * w, gh = rows * h;
  for (Index i = 0; i < n; ++i) {
    const Index r0 = (i / cols) * h, c0 = (i % cols) * w;
    for (Index ch = 0; ch < c; ++ch) {
      for (Index y = 0; y < h; ++y) {
        for (Index x = 0; x < w; ++x) {
          data[(ch * gh + r0 + y) * gw + c0 + x] = batch.data()[((i * c + ch) * h + y) * w + x];
        }
      }
    }
  }
  return Tensorf({c, gh, gw}, std::move(data));
}

}  // namespace ddgan
