#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace jarn {

using Shape = std::vector<int64_t>;

int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tape;

// Dense double-precision tensor. Value semantics over an immutable shared
// buffer; a tensor may additionally reference the tape node that produced it,
// in which case it keeps the tape alive.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);

  const Shape& shape() const { return shape_; }
  int64_t size() const { return static_cast<int64_t>(data_ ? data_->size() : 0); }
  bool defined() const { return data_ != nullptr; }

  const std::vector<double>& values() const { return *data_; }
  const std::shared_ptr<const std::vector<double>>& buffer() const { return data_; }

  // Scalar access; tensor must hold exactly one element.
  double value() const;

  bool has_node() const { return tape_ != nullptr; }
  const std::shared_ptr<Tape>& tape() const { return tape_; }
  int32_t node() const { return node_; }

  // Same data, no tape reference.
  Tensor detached() const;

  bool all_finite() const;

 private:
  friend class Tape;
  Tensor(Shape shape, std::shared_ptr<const std::vector<double>> data,
         std::shared_ptr<Tape> tape, int32_t node)
      : shape_(std::move(shape)), data_(std::move(data)), tape_(std::move(tape)), node_(node) {}

  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  std::shared_ptr<Tape> tape_;
  int32_t node_ = -1;
};

}  // namespace jarn
