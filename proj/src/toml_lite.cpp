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

#include "dpfs/toml_lite.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "dpfs/error.hpp"

namespace dpfs {
namespace toml {
namespace {

[[noreturn]] void Fail(int line, const std::string& message) {
  std::ostringstream msg;
  msg << "toml:" << line << ": " << message;
  throw ParseError(msg.str());
}

std::string Trim(const std::string& s) {
  size_t begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  size_t end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

// Strips a trailing comment that is outside any string literal.
std::string StripComment(const std::string& s) {
  bool in_string = false;
  for (size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
    } else if (c == '"') {
      in_string = true;
    } else if (c == '#') {
      return s.substr(0, i);
    }
  }
  return s;
}

bool IsBareKeyChar(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

class ValueParser {
 public:
  ValueParser(std::string text, int line) : text_(std::move(text)), line_(line) {}

  Value ParseAll() {
    Value v = ParseOne();
    SkipSpace();
    if (pos_ != text_.size()) Fail(line_, "trailing characters after value");
    return v;
  }

 private:
  void SkipSpace() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) {
      ++pos_;
    }
  }

  Value ParseOne() {
    SkipSpace();
    if (pos_ >= text_.size()) Fail(line_, "missing value");
    const char c = text_[pos_];
    if (c == '"') return ParseString();
    if (c == '[') return ParseArray();
    return ParseScalar();
  }

  Value ParseString() {
    ++pos_;  // opening quote
    std::string out;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      char c = text_[pos_++];
      if (c == '\\') {
        if (pos_ >= text_.size()) Fail(line_, "dangling escape");
        const char esc = text_[pos_++];
        switch (esc) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case 'r': out += '\r'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: Fail(line_, std::string("unsupported escape \\") + esc);
        }
      } else {
        out += c;
      }
    }
    if (pos_ >= text_.size()) Fail(line_, "unterminated string");
    ++pos_;  // closing quote
    return Value(std::move(out));
  }

  Value ParseArray() {
    ++pos_;  // '['
    Array items;
    SkipSpace();
    if (pos_ < text_.size() && text_[pos_] == ']') {
      ++pos_;
      return Value(std::move(items));
    }
    for (;;) {
      items.push_back(ParseOne());
      SkipSpace();
      if (pos_ >= text_.size()) Fail(line_, "unterminated array");
      if (text_[pos_] == ',') {
        ++pos_;
        continue;
      }
      if (text_[pos_] == ']') {
        ++pos_;
        return Value(std::move(items));
      }
      Fail(line_, "expected ',' or ']' in array");
    }
  }

  Value ParseScalar() {
    size_t end = pos_;
    while (end < text_.size() && text_[end] != ',' && text_[end] != ']' &&
           text_[end] != ' ' && text_[end] != '\t') {
      ++end;
    }
    const std::string token = text_.substr(pos_, end - pos_);
    pos_ = end;
    if (token == "true") return Value(true);
    if (token == "false") return Value(false);
    const bool looks_float = token.find_first_of(".eE") != std::string::npos &&
                             token.find("0x") != 0;
    if (!looks_float) {
      int64_t integer = 0;
      auto [ptr, ec] =
          std::from_chars(token.data(), token.data() + token.size(), integer);
      if (ec == std::errc() && ptr == token.data() + token.size()) {
        return Value(integer);
      }
    }
    try {
      size_t consumed = 0;
      const double number = std::stod(token, &consumed);
      if (consumed == token.size()) return Value(number);
    } catch (const std::exception&) {
    }
    Fail(line_, "cannot parse value: " + token);
  }

  std::string text_;
  int line_;
  size_t pos_ = 0;
};

Table* ResolveTablePath(Value& root, const std::string& path, int line) {
  Table* table = &root.MutableTable();
  std::istringstream parts(path);
  std::string part;
  while (std::getline(parts, part, '.')) {
    part = Trim(part);
    if (part.empty()) Fail(line, "empty table name component");
    Value& slot = (*table)[part];
    if (!slot.is_table()) Fail(line, "key reused as table: " + part);
    table = &slot.MutableTable();
  }
  return table;
}

void SerializeValue(const Value& value, std::ostream& out);

void SerializeScalarOrArray(const Value& value, std::ostream& out) {
  switch (value.kind()) {
    case Value::Kind::kString: {
      out << '"';
      for (char c : value.AsString()) {
        switch (c) {
          case '\n': out << "\\n"; break;
          case '\t': out << "\\t"; break;
          case '\r': out << "\\r"; break;
          case '"': out << "\\\""; break;
          case '\\': out << "\\\\"; break;
          default: out << c;
        }
      }
      out << '"';
      break;
    }
    case Value::Kind::kInteger:
      out << value.AsInteger();
      break;
    case Value::Kind::kFloat: {
      std::ostringstream number;
      number.precision(17);
      number << value.AsNumber();
      std::string text = number.str();
      if (text.find_first_of(".eE") == std::string::npos &&
          text.find("inf") == std::string::npos &&
          text.find("nan") == std::string::npos) {
        text += ".0";
      }
      out << text;
      break;
    }
    case Value::Kind::kBoolean:
      out << (value.AsBoolean() ? "true" : "false");
      break;
    case Value::Kind::kArray: {
      out << '[';
      const Array& items = value.AsArray();
      for (size_t i = 0; i < items.size(); ++i) {
        if (i > 0) out << ", ";
        SerializeScalarOrArray(items[i], out);
      }
      out << ']';
      break;
    }
    case Value::Kind::kTable:
      throw ParseError("nested inline tables are not supported");
  }
}

void SerializeTable(const Table& table, const std::string& prefix,
                    std::ostream& out) {
  for (const auto& [key, value] : table) {
    if (value.kind() != Value::Kind::kTable) {
      out << key << " = ";
      SerializeScalarOrArray(value, out);
      out << '\n';
    }
  }
  for (const auto& [key, value] : table) {
    if (value.kind() == Value::Kind::kTable) {
      const std::string path = prefix.empty() ? key : prefix + "." + key;
      out << "\n[" << path << "]\n";
      SerializeTable(value.AsTable(), path, out);
    }
  }
}

}  // namespace

const std::string& Value::AsString() const {
  if (kind_ != Kind::kString) throw ParseError("toml value is not a string");
  return string_;
}

int64_t Value::AsInteger() const {
  if (kind_ != Kind::kInteger) throw ParseError("toml value is not an integer");
  return integer_;
}

double Value::AsNumber() const {
  if (kind_ == Kind::kInteger) return static_cast<double>(integer_);
  if (kind_ != Kind::kFloat) throw ParseError("toml value is not a number");
  return float_;
}

bool Value::AsBoolean() const {
  if (kind_ != Kind::kBoolean) throw ParseError("toml value is not a boolean");
  return boolean_;
}

const Array& Value::AsArray() const {
  if (kind_ != Kind::kArray) throw ParseError("toml value is not an array");
  return array_;
}

const Table& Value::AsTable() const {
  if (kind_ != Kind::kTable) throw ParseError("toml value is not a table");
  return table_;
}

Table& Value::MutableTable() {
  if (kind_ != Kind::kTable) throw ParseError("toml value is not a table");
  return table_;
}

std::vector<std::string> Value::AsStringArray() const {
  std::vector<std::string> out;
  for (const Value& item : AsArray()) out.push_back(item.AsString());
  return out;
}

std::vector<double> Value::AsNumberArray() const {
  std::vector<double> out;
  for (const Value& item : AsArray()) out.push_back(item.AsNumber());
  return out;
}

std::vector<int64_t> Value::AsIntegerArray() const {
  std::vector<int64_t> out;
  for (const Value& item : AsArray()) out.push_back(item.AsInteger());
  return out;
}

const Value* Value::Find(const std::string& key) const {
  const Table& table = AsTable();
  auto it = table.find(key);
  return it == table.end() ? nullptr : &it->second;
}

const Value& Value::At(const std::string& key) const {
  const Value* found = Find(key);
  if (found == nullptr) throw ParseError("missing toml key: " + key);
  return *found;
}

bool Value::operator==(const Value& other) const {
  if (kind_ != other.kind_) return false;
  switch (kind_) {
    case Kind::kString: return string_ == other.string_;
    case Kind::kInteger: return integer_ == other.integer_;
    case Kind::kFloat: return float_ == other.float_;
    case Kind::kBoolean: return boolean_ == other.boolean_;
    case Kind::kArray: return array_ == other.array_;
    case Kind::kTable: return table_ == other.table_;
  }
  return false;
}

Value Parse(const std::string& text) {
  Value root{Table{}};
  Table* current = &root.MutableTable();

  std::istringstream stream(text);
  std::string raw_line;
  int line_number = 0;
  while (std::getline(stream, raw_line)) {
    ++line_number;
    const std::string line = Trim(StripComment(raw_line));
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') Fail(line_number, "unterminated table header");
      const std::string name = Trim(line.substr(1, line.size() - 2));
      if (name.empty()) Fail(line_number, "empty table name");
      current = ResolveTablePath(root, name, line_number);
      continue;
    }

    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      Fail(line_number, "expected key = value");
    }
    const std::string key = Trim(line.substr(0, eq));
    if (key.empty()) Fail(line_number, "empty key");
    for (char c : key) {
      if (!IsBareKeyChar(c)) Fail(line_number, "invalid key: " + key);
    }
    if (current->count(key)) Fail(line_number, "duplicate key: " + key);
    ValueParser parser(Trim(line.substr(eq + 1)), line_number);
    (*current)[key] = parser.ParseAll();
  }
  return root;
}

Value ParseFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return Parse(buffer.str());
}

std::string Serialize(const Value& document) {
  std::ostringstream out;
  SerializeTable(document.AsTable(), "", out);
  return out.str();
}

}  // namespace toml
}  // namespace dpfs
