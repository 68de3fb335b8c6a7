#include "eiqa/image.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "eiqa/errors.hpp"

namespace eiqa {

Image::Image(int height, int width, double fill) : height_(height), width_(width) {
  if (height < 0 || width < 0) throw InvalidArgument("image dimensions must be non-negative");
  data_.assign(static_cast<std::size_t>(height) * width * 3, fill);
}

double Image::mean_luma() const noexcept {
  if (data_.empty()) return 0.0;
  double sum = 0.0;
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x) sum += luma(y, x);
  return sum / static_cast<double>(pixel_count());
}

namespace {

std::uint16_t to_u16(double v) {
  const double clamped = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint16_t>(std::lround(clamped * 65535.0));
}

}  // namespace

Image quantize16(const Image& img) {
  Image out = img;
  for (double& v : out.data()) v = to_u16(v) / 65535.0;
  return out;
}

void write_ppm16(const Image& img, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << "P6\n" << img.width() << ' ' << img.height() << "\n65535\n";
  std::string buf;
  buf.reserve(img.data().size() * 2);
  for (double v : img.data()) {
    const std::uint16_t q = to_u16(v);
    buf.push_back(static_cast<char>(q >> 8));
    buf.push_back(static_cast<char>(q & 0xFF));
  }
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!os) throw IoError("write failed: " + path.string());
}

Image read_ppm16(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  std::string magic;
  int width = 0, height = 0, maxval = 0;
  is >> magic >> width >> height >> maxval;
  if (magic != "P6" || width <= 0 || height <= 0 || maxval != 65535)
    throw IoError("not a 16-bit binary PPM: " + path.string());
  is.get();  // single whitespace before raster
  Image img(height, width);
  std::string buf(img.data().size() * 2, '\0');
  is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (is.gcount() != static_cast<std::streamsize>(buf.size())) throw IoError("truncated raster: " + path.string());
  for (std::size_t i = 0; i < img.data().size(); ++i) {
    const auto hi = static_cast<unsigned char>(buf[2 * i]);
    const auto lo = static_cast<unsigned char>(buf[2 * i + 1]);
    img.data()[i] = static_cast<std::uint16_t>((hi << 8) | lo) / 65535.0;
  }
  return img;
}

Image crop(const Image& img, int top, int left, int size) {
  if (top < 0 || left < 0 || size <= 0 || top + size > img.height() || left + size > img.width())
    throw InvalidArgument("crop window outside image");
  Image out(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(top + y, left + x, c);
  return out;
}

Image center_crop(const Image& img, int size) {
  return crop(img, (img.height() - size) / 2, (img.width() - size) / 2, size);
}

Image rotate90(const Image& img, int quarter_turns) {
  quarter_turns = ((quarter_turns % 4) + 4) % 4;
  if (quarter_turns == 0) return img;
  const int h = img.height(), w = img.width();
  Image out = (quarter_turns == 2) ? Image(h, w) : Image(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = img.at(y, x, c);
        switch (quarter_turns) {
          case 1: out.at(x, h - 1 - y, c) = v; break;
          case 2: out.at(h - 1 - y, w - 1 - x, c) = v; break;
          default: out.at(w - 1 - x, y, c) = v; break;
        }
      }
  return out;
}

Image flip_horizontal(const Image& img) {
  Image out(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c) out.at(y, img.width() - 1 - x, c) = img.at(y, x, c);
  return out;
}

}  // namespace eiqa
