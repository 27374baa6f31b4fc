#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "crm/value.hpp"

namespace crm::sql {

enum class Op { Select, Insert, Update, Delete };

inline const char* to_string(Op op) {
  switch (op) {
    case Op::Select: return "SEL";
    case Op::Insert: return "INS";
    case Op::Update: return "UPD";
    case Op::Delete: return "DEL";
  }
  return "?";
}

struct SelectStmt;

// Scalar expression. Value-semantic; sub-selects are shared so the node stays
// copyable.
struct Expr {
  enum class Kind { Column, Literal, Lower, Concat, Subselect };

  Kind kind = Kind::Literal;
  std::string qualifier;  // Column: optional table alias
  std::string column;     // Column
  Value literal;          // Literal
  std::vector<Expr> args; // Lower (1), Concat (>=1)
  std::shared_ptr<SelectStmt> subselect;

  static Expr column_ref(std::string qualifier, std::string name) {
    Expr e;
    e.kind = Kind::Column;
    e.qualifier = std::move(qualifier);
    e.column = std::move(name);
    return e;
  }
  static Expr lit(Value v) {
    Expr e;
    e.kind = Kind::Literal;
    e.literal = std::move(v);
    return e;
  }
};

enum class CompareOp { Eq, Ne, Lt, Le, Gt, Ge, NullSafeEq };

struct Condition {
  enum class Kind { Compare, Like, IsNull, And, Or, Not };

  Kind kind = Kind::Compare;
  CompareOp cmp = CompareOp::Eq;
  bool negated = false;             // IsNull: IS NOT NULL; Like: NOT LIKE
  std::vector<Expr> operands;       // Compare/Like: 2, IsNull: 1
  std::vector<Condition> children;  // And/Or: 2, Not: 1
};

struct TableRef {
  std::string table;
  std::string alias;  // empty when none

  const std::string& effective_name() const { return alias.empty() ? table : alias; }
};

struct SelectItem {
  Expr expr;
  std::string alias;  // empty when none
};

struct SelectStmt {
  bool star = false;
  bool count_star = false;
  std::vector<SelectItem> items;
  std::vector<TableRef> from;               // comma list and INNER JOINs, flattened
  std::vector<Condition> join_conditions;   // ON conditions, conjoined with WHERE
  std::optional<Condition> where;
};

struct InsertStmt {
  std::string table;
  std::vector<std::string> columns;
  std::vector<std::vector<Value>> rows;  // literal tuples
};

struct UpdateStmt {
  std::string table;
  std::vector<std::pair<std::string, Expr>> assignments;
  std::optional<Condition> where;
};

struct DeleteStmt {
  std::string table;
  std::optional<Condition> where;
};

struct Statement {
  Op op = Op::Select;
  // exactly one of these is populated, per op
  std::shared_ptr<SelectStmt> select;
  std::shared_ptr<InsertStmt> insert;
  std::shared_ptr<UpdateStmt> update;
  std::shared_ptr<DeleteStmt> del;
};

std::string to_string(const Expr&);
std::string to_string(const Condition&);
std::string to_string(const SelectStmt&);
std::string to_string(const Statement&);

}  // namespace crm::sql
