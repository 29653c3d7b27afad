// Copyright 2026 The FedListing Authors
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

// Little-endian file helpers shared by the on-disk formats. Private to the
// library.

#ifndef FEDLISTING_SRC_BINARY_IO_HPP_
#define FEDLISTING_SRC_BINARY_IO_HPP_

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fedlisting/common.hpp"

namespace fedlisting::binary_io {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts unsupported");

inline std::vector<char> ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("missing file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

template <typename T>
std::vector<T> ReadArray(const std::filesystem::path& path, std::size_t count) {
  const std::vector<char> bytes = ReadFile(path);
  if (bytes.size() != count * sizeof(T)) {
    std::ostringstream msg;
    msg << "size mismatch in " << path.string() << ": expected " << count * sizeof(T)
        << " bytes, found " << bytes.size();
    throw FormatError(msg.str());
  }
  std::vector<T> out(count);
  if (count > 0) std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

// Appends raw values to an open binary stream.
template <typename T>
void Put(std::ostream& out, std::span<const T> data) {
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size_bytes()));
}
template <typename T>
void Put(std::ostream& out, const T& value) {
  Put(out, std::span<const T>(&value, 1));
}

template <typename T>
void WriteArray(const std::filesystem::path& path, std::span<const T> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  Put(out, data);
  if (!out) throw IoError("write failed: " + path.string());
}

// Sequential reader over a file image; every overrun is a FormatError
// naming the file.
class Cursor {
 public:
  Cursor(std::vector<char> bytes, std::string name) : bytes_(std::move(bytes)), name_(std::move(name)) {}

  template <typename T>
  void Read(std::span<T> out) {
    const std::size_t n = out.size_bytes();
    if (bytes_.size() - pos_ < n) throw FormatError("truncated file: " + name_);
    if (n > 0) std::memcpy(out.data(), bytes_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T Read() {
    T v{};
    Read(std::span<T>(&v, 1));
    return v;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  const std::string& name() const { return name_; }

 private:
  std::vector<char> bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

}  // namespace fedlisting::binary_io

#endif  // FEDLISTING_SRC_BINARY_IO_HPP_
