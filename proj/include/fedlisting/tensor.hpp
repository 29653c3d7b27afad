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

#ifndef FEDLISTING_TENSOR_HPP_
#define FEDLISTING_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fedlisting {

// Row-major dense matrix of 32-bit reals.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c, float fill = 0.0f)
      : rows(r), cols(c), values(r * c, fill) {}

  float& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  float at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  std::span<float> row(std::size_t r) { return {values.data() + r * cols, cols}; }
  std::span<const float> row(std::size_t r) const {
    return {values.data() + r * cols, cols};
  }

  bool operator==(const DenseMatrix&) const = default;
};

// Compressed sparse row matrix. `values` is empty for unit-weight patterns.
struct CsrMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint32_t> row_ptr;  // rows + 1 entries
  std::vector<std::uint32_t> col_idx;
  std::vector<float> values;

  std::size_t nnz() const { return col_idx.size(); }
  std::size_t RowLength(std::size_t r) const { return row_ptr[r + 1] - row_ptr[r]; }
  std::span<const std::uint32_t> RowIndices(std::size_t r) const {
    return {col_idx.data() + row_ptr[r], RowLength(r)};
  }
  std::span<const float> RowValues(std::size_t r) const {
    return {values.data() + row_ptr[r], RowLength(r)};
  }
  bool Contains(std::size_t r, std::uint32_t c) const;

  bool operator==(const CsrMatrix&) const = default;
};

}  // namespace fedlisting

#endif  // FEDLISTING_TENSOR_HPP_
