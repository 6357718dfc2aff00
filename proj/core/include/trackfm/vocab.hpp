#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "trackfm/common.hpp"

namespace trackfm {

// Bijection between opaque string ids and dense indices. Indices are
// assigned by first insertion, so building from canonically sorted input
// yields a deterministic layout.
class Vocab {
 public:
  uint32_t add(std::string_view id) {
    auto it = index_.find(std::string(id));
    if (it != index_.end()) return it->second;
    uint32_t idx = static_cast<uint32_t>(names_.size());
    names_.emplace_back(id);
    index_.emplace(names_.back(), idx);
    return idx;
  }

  std::optional<uint32_t> find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  uint32_t at(std::string_view id) const {
    auto idx = find(id);
    if (!idx) throw DataError("unknown id: " + std::string(id));
    return *idx;
  }

  const std::string& name(uint32_t idx) const { return names_.at(idx); }

  uint32_t size() const { return static_cast<uint32_t>(names_.size()); }
  bool empty() const { return names_.empty(); }

  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, uint32_t> index_;
};

}  // namespace trackfm
