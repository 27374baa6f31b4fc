#pragma once

#include <stdexcept>
#include <string>

namespace crm {

// Stable error taxonomy surfaced by the monitor and mapped to CLI exit codes.
enum class ErrorCode {
  Syntax,       // E_SYNTAX: malformed statement, bind failure
  Unsupported,  // E_UNSUPPORTED: recognized but outside the shipped subset
  UnknownTable, // E_UNKNOWN_TABLE: name does not resolve inside the session's f-unit
  Owner,        // E_OWNER: owner invariant violated
  Identity,     // E_IDENTITY: session identity could not be verified
  Permission,   // E_PERMISSION: resolved table not usable for the operation
  Constraint,   // E_CONSTRAINT: data rule violated (duplicate key, subquery cardinality)
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::Syntax: return "E_SYNTAX";
    case ErrorCode::Unsupported: return "E_UNSUPPORTED";
    case ErrorCode::UnknownTable: return "E_UNKNOWN_TABLE";
    case ErrorCode::Owner: return "E_OWNER";
    case ErrorCode::Identity: return "E_IDENTITY";
    case ErrorCode::Permission: return "E_PERMISSION";
    case ErrorCode::Constraint: return "E_CONSTRAINT";
  }
  return "E_UNKNOWN";
}

inline int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::Syntax: return 2;
    case ErrorCode::Unsupported: return 2;
    case ErrorCode::UnknownTable: return 3;
    case ErrorCode::Owner: return 4;
    case ErrorCode::Identity: return 5;
    case ErrorCode::Permission: return 6;
    case ErrorCode::Constraint: return 7;
  }
  return 1;
}

class MonitorError : public std::runtime_error {
 public:
  MonitorError(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Parse-level failure with source position, used by both the SQL and the
// .db-file parser. Rendered as line:col: message.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int col, const std::string& message)
      : std::runtime_error(std::to_string(line) + ":" + std::to_string(col) + ": " + message),
        line_(line),
        col_(col),
        bare_(message) {}

  int line() const { return line_; }
  int col() const { return col_; }
  const std::string& bare_message() const { return bare_; }

 private:
  int line_;
  int col_;
  std::string bare_;
};

}  // namespace crm
