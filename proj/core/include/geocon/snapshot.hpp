#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "geocon/tensor.hpp"

namespace geocon {

/// Ordered collection of named parameter tensors.
class ParamSet {
 public:
  void add(std::string name, Tensor value);
  bool contains(const std::string& name) const;
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t scalar_count() const noexcept;
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }
  auto begin() noexcept { return entries_.begin(); }
  auto end() noexcept { return entries_.end(); }
  const std::pair<std::string, Tensor>& operator[](std::size_t i) const { return entries_[i]; }
  std::pair<std::string, Tensor>& operator[](std::size_t i) { return entries_[i]; }

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

// Snapshot layout:
//   8 bytes  magic "GCSNAP01"
//   8 bytes  manifest length L (little-endian uint64)
//   L bytes  JSON manifest {"tensors":[{"name","shape","offset","count"}...]}
//   payload  little-endian IEEE-754 float64 values, tensors back to back
std::string encode_snapshot(const ParamSet& params);
ParamSet decode_snapshot(const std::string& bytes);

void save_snapshot(const ParamSet& params, const std::filesystem::path& path);
ParamSet load_snapshot(const std::filesystem::path& path);

}  // namespace geocon
