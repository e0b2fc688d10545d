// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#include "dprt/ppm.hpp"

#include <cctype>
#include <fstream>
#include <string>

#include "dprt/error.hpp"

namespace dprt {

Bytes encodePpm(const Image &image)
{
  const std::string header = "P6\n" + std::to_string(image.width) + " "
      + std::to_string(image.height) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.insert(out.end(), image.rgb.begin(), image.rgb.end());
  return out;
}

Image decodePpm(ByteView data)
{
  size_t pos = 0;
  auto skipSpace = [&] {
    while (pos < data.size()) {
      if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n')
          ++pos;
      } else if (std::isspace(data[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto readInt = [&](const char *what) {
    skipSpace();
    const size_t start = pos;
    std::uint64_t v = 0;
    while (pos < data.size() && std::isdigit(data[pos]) && pos - start < 10)
      v = v * 10 + (data[pos++] - '0');
    if (pos == start)
      throw DecodeError(std::string("PPM: expected ") + what, start);
    return v;
  };

  if (data.size() < 2 || data[0] != 'P' || data[1] != '6')
    throw DecodeError("PPM: bad magic", 0);
  pos = 2;
  Image img;
  img.width = static_cast<std::uint32_t>(readInt("width"));
  img.height = static_cast<std::uint32_t>(readInt("height"));
  if (readInt("maxval") != 255)
    throw DecodeError("PPM: only maxval 255 is supported", pos);
  if (pos >= data.size() || !std::isspace(data[pos]))
    throw DecodeError("PPM: missing header terminator", pos);
  ++pos;
  const size_t expected = size_t(img.width) * img.height * 3;
  if (data.size() - pos != expected)
    throw DecodeError("PPM: pixel data length mismatch", pos);
  img.rgb.assign(data.begin() + pos, data.end());
  return img;
}

void writePpm(const std::filesystem::path &path, const Image &image)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error("cannot write '" + path.string() + "'");
  const Bytes bytes = encodePpm(image);
  out.write(reinterpret_cast<const char *>(bytes.data()),
      static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw Error("write to '" + path.string() + "' failed");
}

Image readPpm(const std::filesystem::path &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error("cannot read '" + path.string() + "'");
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decodePpm(bytes);
}

} // namespace dprt
