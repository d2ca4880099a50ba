#include "segcolor/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace segcolor {

namespace fs = std::filesystem;

ImageU8 read_image(const fs::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) {
    throw std::runtime_error("cannot read image: " + path.string());
  }
  ImageU8 image(bgr.rows, bgr.cols);
  for (int y = 0; y < bgr.rows; ++y) {
    const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      image.set(y, x, {row[x][2], row[x][1], row[x][0]});
    }
  }
  return image;
}

void write_image(const fs::path& path, const ImageU8& image) {
  cv::Mat bgr(image.height, image.width, CV_8UC3);
  for (int y = 0; y < image.height; ++y) {
    cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < image.width; ++x) {
      Rgb c = image.at(y, x);
      row[x] = {c.b, c.g, c.r};
    }
  }
  if (!cv::imwrite(path.string(), bgr)) {
    throw std::runtime_error("cannot write image: " + path.string());
  }
}

std::vector<std::uint16_t> read_label_png(const fs::path& path, int& height, int& width) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty()) {
    throw std::runtime_error("cannot read label image: " + path.string());
  }
  if (m.channels() != 1) {
    throw std::runtime_error("label image must be single channel: " + path.string());
  }
  height = m.rows;
  width = m.cols;
  std::vector<std::uint16_t> labels(static_cast<std::size_t>(m.rows) * m.cols);
  if (m.depth() == CV_16U) {
    for (int y = 0; y < m.rows; ++y) {
      const std::uint16_t* row = m.ptr<std::uint16_t>(y);
      std::copy(row, row + m.cols, labels.begin() + static_cast<std::size_t>(y) * m.cols);
    }
  } else if (m.depth() == CV_8U) {
    for (int y = 0; y < m.rows; ++y) {
      const std::uint8_t* row = m.ptr<std::uint8_t>(y);
      for (int x = 0; x < m.cols; ++x) {
        labels[static_cast<std::size_t>(y) * m.cols + x] = row[x];
      }
    }
  } else {
    throw std::runtime_error("unsupported label image depth: " + path.string());
  }
  return labels;
}

void write_label_png(const fs::path& path, const std::vector<std::uint16_t>& labels, int height,
                     int width) {
  if (labels.size() != static_cast<std::size_t>(height) * width) {
    throw std::runtime_error("label buffer does not match dimensions");
  }
  cv::Mat m(height, width, CV_16UC1);
  for (int y = 0; y < height; ++y) {
    std::uint16_t* row = m.ptr<std::uint16_t>(y);
    std::copy(labels.begin() + static_cast<std::size_t>(y) * width,
              labels.begin() + static_cast<std::size_t>(y + 1) * width, row);
  }
  if (!cv::imwrite(path.string(), m)) {
    throw std::runtime_error("cannot write label image: " + path.string());
  }
}

FeatureMap read_semfeat(const fs::path& path, int height, int width, int channels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot read feature file: " + path.string());
  }
  FeatureMap map(height, width, channels);
  const std::size_t bytes = map.data.size() * sizeof(float);
  in.read(reinterpret_cast<char*>(map.data.data()), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in.gcount()) != bytes) {
    throw std::runtime_error("feature file truncated: " + path.string());
  }
  return map;
}

void write_semfeat(const fs::path& path, const FeatureMap& map) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write feature file: " + path.string());
  }
  out.write(reinterpret_cast<const char*>(map.data.data()),
            static_cast<std::streamsize>(map.data.size() * sizeof(float)));
  if (!out) {
    throw std::runtime_error("short write on feature file: " + path.string());
  }
}

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) {
    throw std::runtime_error("cannot read file: " + path.string());
  }
  auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::uint8_t> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  return bytes;
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot write file: " + tmp.string());
    }
    out << contents;
  }
  fs::rename(tmp, path);
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const std::uint8_t*>(data);
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t fnv1a64_file(const fs::path& path) {
  auto bytes = read_file_bytes(path);
  return fnv1a64(bytes.data(), bytes.size());
}

std::string to_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace segcolor
