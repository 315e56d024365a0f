// Copyright 2026 The dpfs Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Minimal TOML subset used for presets and run configs: [table] headers
// (dotted names allowed), bare keys, basic strings with escapes, integers,
// floats, booleans, and single-line arrays. Enough for this project's
// files; not a general TOML implementation.

#ifndef DPFS_TOML_LITE_H_
#define DPFS_TOML_LITE_H_

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace dpfs {
namespace toml {

class Value;
using Table = std::map<std::string, Value>;
using Array = std::vector<Value>;

class Value {
 public:
  enum class Kind { kString, kInteger, kFloat, kBoolean, kArray, kTable };

  Value() : kind_(Kind::kTable) {}
  explicit Value(std::string v) : kind_(Kind::kString), string_(std::move(v)) {}
  explicit Value(int64_t v) : kind_(Kind::kInteger), integer_(v) {}
  explicit Value(double v) : kind_(Kind::kFloat), float_(v) {}
  explicit Value(bool v) : kind_(Kind::kBoolean), boolean_(v) {}
  explicit Value(Array v) : kind_(Kind::kArray), array_(std::move(v)) {}
  explicit Value(Table v) : kind_(Kind::kTable), table_(std::move(v)) {}

  Kind kind() const { return kind_; }
  bool is_table() const { return kind_ == Kind::kTable; }

  // Checked accessors; throw ParseError on a kind mismatch.
  const std::string& AsString() const;
  int64_t AsInteger() const;
  double AsNumber() const;  // integer or float
  bool AsBoolean() const;
  const Array& AsArray() const;
  const Table& AsTable() const;
  Table& MutableTable();

  std::vector<std::string> AsStringArray() const;
  std::vector<double> AsNumberArray() const;
  std::vector<int64_t> AsIntegerArray() const;

  // Table lookup; nullptr when absent (requires kTable).
  const Value* Find(const std::string& key) const;
  // Lookup that throws ParseError when the key is absent.
  const Value& At(const std::string& key) const;

  bool operator==(const Value& other) const;

 private:
  Kind kind_;
  std::string string_;
  int64_t integer_ = 0;
  double float_ = 0.0;
  bool boolean_ = false;
  Array array_;
  Table table_;
};

// Parses a document into a table value. Throws ParseError with a line
// number on malformed input.
Value Parse(const std::string& text);
Value ParseFile(const std::string& path);

// Serializes a table document; Parse(Serialize(v)) == v for values this
// subset can represent.
std::string Serialize(const Value& document);

}  // namespace toml
}  // namespace dpfs

#endif  // DPFS_TOML_LITE_H_
