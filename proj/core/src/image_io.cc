//
// Copyright 2026 The PFDM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//


#include "pfdm/image_io.h"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>

#include "pfdm/errors.h"
#include "pfdm/wire.h"

namespace pfdm {
namespace {

constexpr char kSampleSetMagic[4] = {'P', 'F', 'S', 'S'};
constexpr std::uint16_t kSampleSetVersion = 1;

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

}  // namespace

void WritePngGrid(const std::filesystem::path& path,
                  const std::vector<SampleBatch>& rows, int columns, double lo,
                  double hi) {
  if (rows.empty() || columns < 1) {
    throw InvalidArgument("png grid: need at least one row and column");
  }
  if (!(hi > lo)) throw InvalidArgument("png grid: empty value range");
  const SampleShape& shape = rows.front().shape();
  if (shape.size() != 3 || (shape[0] != 1 && shape[0] != 3)) {
    throw InvalidArgument("png grid: expected 1 or 3 channel images, got " +
                          ShapeToString(shape));
  }
  for (const auto& r : rows) {
    if (r.shape() != shape) throw InvalidArgument("png grid: mixed shapes");
  }
  const Index c = shape[0], h = shape[1], w = shape[2];
  constexpr Index kPad = 1;
  const Index width = columns * (w + kPad) + kPad;
  const Index height = static_cast<Index>(rows.size()) * (h + kPad) + kPad;
  std::vector<png_byte> pixels(static_cast<std::size_t>(width * height * c), 0);
  for (std::size_t gr = 0; gr < rows.size(); ++gr) {
    const Index n = std::min<Index>(columns, rows[gr].count());
    for (Index gc = 0; gc < n; ++gc) {
      const auto img = rows[gr].data().row(gc);
      for (Index ch = 0; ch < c; ++ch) {
        for (Index y = 0; y < h; ++y) {
          for (Index x = 0; x < w; ++x) {
            const double v =
                std::clamp((img(ch * h * w + y * w + x) - lo) / (hi - lo), 0.0,
                           1.0);
            const Index py = kPad + static_cast<Index>(gr) * (h + kPad) + y;
            const Index px = kPad + gc * (w + kPad) + x;
            pixels[static_cast<std::size_t>((py * width + px) * c + ch)] =
                static_cast<png_byte>(std::lround(v * 255.0));
          }
        }
      }
    }
  }

  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
  if (!file) throw InvalidArgument("cannot write " + path.string());
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("libpng failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width),
               static_cast<png_uint_32>(height), 8,
               c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (Index y = 0; y < height; ++y) {
    png_write_row(png, pixels.data() + y * width * c);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void SaveSampleSet(const std::filesystem::path& path, const SampleBatch& batch) {
  std::vector<std::uint8_t> out(std::begin(kSampleSetMagic),
                                std::end(kSampleSetMagic));
  le::PutU16(out, kSampleSetVersion);
  le::PutU32(out, static_cast<std::uint32_t>(batch.count()));
  le::PutU32(out, static_cast<std::uint32_t>(batch.shape().size()));
  for (auto d : batch.shape()) le::PutU32(out, static_cast<std::uint32_t>(d));
  out.push_back(batch.has_labels() ? 1 : 0);
  for (Index i = 0; i < batch.count(); ++i) {
    for (Index j = 0; j < batch.dim(); ++j) {
      le::PutF32(out, static_cast<float>(batch.data()(i, j)));
    }
  }
  if (batch.has_labels()) {
    for (int y : *batch.labels()) {
      if (y < 0 || y > 0xFFFF) throw InvalidArgument("label out of u16 range");
      le::PutU16(out, static_cast<std::uint16_t>(y));
    }
  }
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw InvalidArgument("cannot write " + tmp);
    f.write(reinterpret_cast<const char*>(out.data()),
            static_cast<std::streamsize>(out.size()));
    if (!f) throw FormatError("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

SampleBatch LoadSampleSet(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidArgument("cannot read " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                        std::istreambuf_iterator<char>());
  le::Reader r(bytes);
  const auto magic = r.Bytes(4);
  if (!std::equal(magic.begin(), magic.end(), std::begin(kSampleSetMagic))) {
    throw FormatError(path.string() + " is not a sample-set file");
  }
  const std::uint16_t version = r.U16();
  if (version != kSampleSetVersion) {
    throw FormatError("unsupported sample-set version " +
                      std::to_string(version));
  }
  const std::uint32_t count = r.U32();
  const std::uint32_t rank = r.U32();
  if (rank == 0 || rank > 8) throw FormatError("sample-set: bad rank");
  SampleShape shape;
  for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(r.U32());
  const std::int64_t flat = FlatSize(shape);
  const bool labeled = r.U8() != 0;
  const std::size_t need = static_cast<std::size_t>(count) *
                           (static_cast<std::size_t>(flat) * 4 + (labeled ? 2 : 0));
  if (r.remaining() != need) {
    throw FormatError("sample-set: payload size does not match header");
  }
  Matrix data(count, flat);
  for (std::uint32_t i = 0; i < count; ++i) {
    for (std::int64_t j = 0; j < flat; ++j) data(i, j) = r.F32();
  }
  std::optional<std::vector<int>> labels;
  if (labeled) {
    labels.emplace(count);
    for (auto& y : *labels) y = r.U16();
  }
  return SampleBatch(std::move(data), std::move(shape), std::move(labels));
}

}  // namespace pfdm
