// Copyright 2026 The tinytl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Field-path aware accessors over nlohmann::json used by the file readers.

#ifndef TINYTL_SRC_IO_JSON_FIELDS_HPP_
#define TINYTL_SRC_IO_JSON_FIELDS_HPP_

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tinytl/errors.hpp"

namespace tinytl::io::detail {

using Json = nlohmann::ordered_json;

[[noreturn]] inline void fail(const std::string& source, const std::string& path,
                              const std::string& what) {
  throw SpecError(source + ": " + (path.empty() ? std::string("<root>") : path) + ": " + what);
}

// Parses text, turning nlohmann's byte offset into line:column.
inline Json parse_text(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1;
    std::size_t col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw SpecError(source + ":" + std::to_string(line) + ":" + std::to_string(col) +
                    ": malformed JSON: " + e.what());
  }
}

class Node {
 public:
  Node(const Json& j, std::string source, std::string path)
      : j_(j), source_(std::move(source)), path_(std::move(path)) {}

  const Json& json() const { return j_; }
  const std::string& path() const { return path_; }
  [[noreturn]] void fail(const std::string& what) const { detail::fail(source_, path_, what); }

  void expect_object(std::initializer_list<const char*> allowed) const {
    if (!j_.is_object()) fail("expected an object");
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || it.key() == a;
      if (!ok) detail::fail(source_, child_path(it.key()), "unknown field");
    }
  }

  bool has(const char* key) const { return j_.is_object() && j_.contains(key); }

  Node at(const char* key) const {
    if (!has(key)) detail::fail(source_, child_path(key), "missing field");
    return Node(j_.at(key), source_, child_path(key));
  }

  Node at(std::size_t i) const {
    return Node(j_.at(i), source_, path_ + "[" + std::to_string(i) + "]");
  }

  std::size_t array_size() const {
    if (!j_.is_array()) fail("expected an array");
    return j_.size();
  }

  int as_int() const {
    if (!j_.is_number_integer()) fail("expected an integer");
    const auto v = j_.get<std::int64_t>();
    if (v < INT32_MIN || v > INT32_MAX) fail("integer out of range");
    return static_cast<int>(v);
  }

  double as_double() const {
    if (!j_.is_number()) fail("expected a number");
    return j_.get<double>();
  }

  std::uint64_t as_u64() const {
    if (!j_.is_number_unsigned() && !(j_.is_number_integer() && j_.get<std::int64_t>() >= 0)) {
      fail("expected a non-negative integer");
    }
    return j_.get<std::uint64_t>();
  }

  std::vector<int> as_int_list() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < array_size(); ++i) out.push_back(at(i).as_int());
    return out;
  }

  int int_or(const char* key, int fallback) const { return has(key) ? at(key).as_int() : fallback; }
  double double_or(const char* key, double fallback) const {
    return has(key) ? at(key).as_double() : fallback;
  }

 private:
  std::string child_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const Json& j_;
  std::string source_;
  std::string path_;
};

}  // namespace tinytl::io::detail

#endif  // TINYTL_SRC_IO_JSON_FIELDS_HPP_
