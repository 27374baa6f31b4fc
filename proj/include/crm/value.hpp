#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>

namespace crm {

// Scalar cell value: NULL, 64-bit integer, or text.
class Value {
 public:
  Value() = default;

  static Value null() { return Value(); }
  static Value integer(std::int64_t v) {
    Value out;
    out.data_ = v;
    return out;
  }
  static Value text(std::string v) {
    Value out;
    out.data_ = std::move(v);
    return out;
  }

  bool is_null() const { return std::holds_alternative<std::monostate>(data_); }
  bool is_int() const { return std::holds_alternative<std::int64_t>(data_); }
  bool is_text() const { return std::holds_alternative<std::string>(data_); }

  std::int64_t as_int() const { return std::get<std::int64_t>(data_); }
  const std::string& as_text() const { return std::get<std::string>(data_); }

  // Display form; NULL renders as the literal string NULL.
  std::string render() const {
    if (is_null()) return "NULL";
    if (is_int()) return std::to_string(as_int());
    return as_text();
  }

  friend bool operator==(const Value& a, const Value& b) { return a.data_ == b.data_; }
  friend bool operator!=(const Value& a, const Value& b) { return !(a == b); }
  friend bool operator<(const Value& a, const Value& b) { return a.data_ < b.data_; }

 private:
  std::variant<std::monostate, std::int64_t, std::string> data_;
};

// MySQL's <=> operator: NULL<=>NULL is true, NULL<=>x is false.
inline bool null_safe_equal(const Value& a, const Value& b) {
  if (a.is_null() || b.is_null()) return a.is_null() && b.is_null();
  if (a.is_int() && b.is_int()) return a.as_int() == b.as_int();
  return a.render() == b.render();
}

using RowValues = std::map<std::string, Value>;

}  // namespace crm
