#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <vector>

namespace eiqa {

// Rec.601 luma weights; also define which tints are luminance-neutral.
inline constexpr std::array<double, 3> kLumaWeights{0.299, 0.587, 0.114};

// Interleaved RGB image, row-major, values nominally in [0,1].
class Image {
 public:
  Image() = default;
  Image(int height, int width, double fill = 0.0);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(height_) * width_; }
  bool empty() const noexcept { return data_.empty(); }

  double& at(int y, int x, int c) noexcept { return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c]; }
  double at(int y, int x, int c) const noexcept {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c];
  }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  double luma(int y, int x) const noexcept {
    return kLumaWeights[0] * at(y, x, 0) + kLumaWeights[1] * at(y, x, 1) + kLumaWeights[2] * at(y, x, 2);
  }
  double mean_luma() const noexcept;
  bool same_shape(const Image& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

// Snap every value to the 16-bit grid k/65535 used by the on-disk format.
Image quantize16(const Image& img);

// Binary PPM (P6) with maxval 65535. Lossless for quantize16() images.
void write_ppm16(const Image& img, const std::filesystem::path& path);
Image read_ppm16(const std::filesystem::path& path);

// Deterministic geometric transforms used by augmentation and evaluation.
Image crop(const Image& img, int top, int left, int size);
Image center_crop(const Image& img, int size);
Image rotate90(const Image& img, int quarter_turns);
Image flip_horizontal(const Image& img);

}  // namespace eiqa
