#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "nggan/error.hpp"

namespace nggan::nd {

// batch x length x channels, row-major with channels fastest.
template <typename T>
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t batch, std::size_t length, std::size_t channels, T fill = T(0))
      : batch_(batch), length_(length), channels_(channels), data_(batch * length * channels, fill) {}
  Tensor3(std::size_t batch, std::size_t length, std::size_t channels, std::vector<T> data)
      : batch_(batch), length_(length), channels_(channels), data_(std::move(data)) {
    if (data_.size() != batch * length * channels) {
      throw ShapeError("Tensor3: data size " + std::to_string(data_.size()) + " does not match shape");
    }
  }

  std::size_t batch() const { return batch_; }
  std::size_t length() const { return length_; }
  std::size_t channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  std::array<std::size_t, 3> shape() const { return {batch_, length_, channels_}; }

  T& operator()(std::size_t b, std::size_t t, std::size_t c) { return data_[(b * length_ + t) * channels_ + c]; }
  const T& operator()(std::size_t b, std::size_t t, std::size_t c) const {
    return data_[(b * length_ + t) * channels_ + c];
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  // Same buffer, new shape; element count must match.
  Tensor3 reshaped(std::size_t batch, std::size_t length, std::size_t channels) const& {
    return Tensor3(batch, length, channels, data_);
  }
  Tensor3 reshaped(std::size_t batch, std::size_t length, std::size_t channels) && {
    return Tensor3(batch, length, channels, std::move(data_));
  }

  template <typename U>
  Tensor3<U> cast() const {
    return Tensor3<U>(batch_, length_, channels_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t batch_ = 0;
  std::size_t length_ = 0;
  std::size_t channels_ = 0;
  std::vector<T> data_;
};

inline std::string shape_string(const std::array<std::size_t, 3>& s) {
  return "(" + std::to_string(s[0]) + ", " + std::to_string(s[1]) + ", " + std::to_string(s[2]) + ")";
}

// Trainable tensor plus its gradient accumulator.
template <typename T>
struct Param {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<T> value;
  std::vector<T> grad;

  Param() = default;
  Param(std::string n, std::vector<std::size_t> s) : name(std::move(n)), shape(std::move(s)) {
    std::size_t count = 1;
    for (auto d : shape) count *= d;
    value.assign(count, T(0));
    grad.assign(count, T(0));
  }

  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

}  // namespace nggan::nd
