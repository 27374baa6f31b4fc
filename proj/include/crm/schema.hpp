#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "crm/errors.hpp"
#include "crm/sql_ast.hpp"
#include "crm/value.hpp"

namespace crm::schema {

// Column type vocabulary of the .db-file dialect. KEY and OWNER are marker
// types; KEY values are text at the storage layer.
struct ColumnType {
  enum class Base { Int, Text, TinyText, Varchar, Key, Owner };

  Base base = Base::Text;
  int varchar_len = 0;

  bool is_key() const { return base == Base::Key; }
  bool is_owner() const { return base == Base::Owner; }
  bool is_text_family() const {
    return base == Base::Text || base == Base::TinyText || base == Base::Varchar ||
           base == Base::Key || base == Base::Owner;
  }
  bool is_int() const { return base == Base::Int; }

  std::string to_string() const;
  friend bool operator==(const ColumnType& a, const ColumnType& b) {
    return a.base == b.base && (a.base != Base::Varchar || a.varchar_len == b.varchar_len);
  }
};

struct ColumnDecl {
  std::string name;
  ColumnType type;

  friend bool operator==(const ColumnDecl&, const ColumnDecl&) = default;
};

struct ForeignKeyDecl {
  std::string child_table;   // filled in by the parser (enclosing table)
  std::string child_column;
  std::string parent_table;  // local or input table of the same component
  std::string parent_column; // must be the parent's KEY column

  friend bool operator==(const ForeignKeyDecl&, const ForeignKeyDecl&) = default;
};

struct LocalTableDecl {
  std::string name;
  std::vector<ColumnDecl> columns;
  std::vector<ForeignKeyDecl> foreign_keys;

  const ColumnDecl* key_column() const;
  const ColumnDecl* owner_column() const;
  const ColumnDecl* find(const std::string& name) const;
  friend bool operator==(const LocalTableDecl&, const LocalTableDecl&) = default;
};

struct InputTableDecl {
  std::string name;
  std::vector<ColumnDecl> columns;

  const ColumnDecl* key_column() const;
  const ColumnDecl* owner_column() const;
  const ColumnDecl* find(const std::string& name) const;
  friend bool operator==(const InputTableDecl&, const InputTableDecl&) = default;
};

// Invariant expression AST: All | Is(a,b) | [!]Pred(table, args) | And | Or.
struct InvariantArg {
  enum class Kind { Uid, Column, Constant };
  Kind kind = Kind::Uid;
  std::string column;
  Value constant;

  static InvariantArg uid() { return InvariantArg{}; }
  static InvariantArg col(std::string name) {
    InvariantArg a;
    a.kind = Kind::Column;
    a.column = std::move(name);
    return a;
  }
  static InvariantArg constant_of(Value v) {
    InvariantArg a;
    a.kind = Kind::Constant;
    a.constant = std::move(v);
    return a;
  }
  friend bool operator==(const InvariantArg&, const InvariantArg&) = default;
};

struct InvariantExpr {
  enum class Kind { All, Is, Pred, And, Or };

  Kind kind = Kind::All;
  std::vector<InvariantArg> args;      // Is: 2, Pred: table arity
  std::string pred_table;              // Pred
  bool negated = false;                // Pred only
  std::vector<InvariantExpr> children; // And/Or: 2

  friend bool operator==(const InvariantExpr&, const InvariantExpr&) = default;
};

struct OutputTableDecl {
  std::string name;
  std::string query_text;   // SQL-subset SELECT as written
  sql::SelectStmt query;    // parsed form
  InvariantExpr invariant;  // default is(@uid, owner) inserted at parse time
  bool invariant_explicit = false;

  // projection column names of the output signature
  std::vector<std::string> projection_names() const;
};

struct SchemaDecl {
  std::string funit;  // component name; assigned at integration from the bundle
  std::vector<LocalTableDecl> locals;
  std::vector<InputTableDecl> inputs;
  std::vector<OutputTableDecl> outputs;

  const LocalTableDecl* find_local(const std::string& name) const;
  const InputTableDecl* find_input(const std::string& name) const;
  const OutputTableDecl* find_output(const std::string& name) const;
  std::vector<std::string> all_table_names() const;
};

struct Diagnostic {
  int line = 0;
  int col = 0;
  std::string message;

  std::string render(const std::string& file) const {
    return file + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + message;
  }
};

// Tables already integrated elsewhere, for cross-component diagnostics.
struct Catalog {
  std::map<std::string, std::set<std::string>> component_tables;

  std::optional<std::string> owner_of_table(const std::string& table) const {
    for (const auto& [comp, tables] : component_tables) {
      if (tables.count(table)) return comp;
    }
    return std::nullopt;
  }
};

SchemaDecl parse_db_file(const std::string& text);
InvariantExpr parse_invariant(const std::string& text);

std::string serialize(const SchemaDecl&);
std::string serialize(const InvariantExpr&);

// Structural validation against the declaration itself and the catalog.
// Diagnostics are returned, never thrown.
std::vector<Diagnostic> validate_schema(const SchemaDecl& decl, const Catalog& catalog);

// Output signature: projection aliases with inferred types.
// Throws MonitorError(Syntax) when a projected expression is un-inferable.
std::vector<std::pair<std::string, ColumnType>> output_signature(const SchemaDecl& decl,
                                                                 const OutputTableDecl& output);

}  // namespace crm::schema
