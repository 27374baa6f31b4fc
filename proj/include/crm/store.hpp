#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crm/relation.hpp"
#include "crm/schema.hpp"
#include "crm/value.hpp"

#include <nlohmann/json_fwd.hpp>

namespace crm::store {

struct StoredRow {
  std::uint64_t id = 0;  // store-wide row identity
  RowValues cols;

  Value get(const std::string& column) const {
    auto it = cols.find(column);
    return it == cols.end() ? Value::null() : it->second;
  }
};

struct Table {
  std::string physical;
  std::vector<schema::ColumnDecl> columns;
  std::string key_column;    // empty when the table has no KEY marker
  std::string owner_column;  // empty when the table has no OWNER marker
  std::uint64_t next_key = 1;
  std::vector<StoredRow> rows;

  const schema::ColumnDecl* find_column(const std::string& name) const {
    for (const auto& c : columns) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }
  bool has_key(const Value& key) const;
  std::string allocate_key();  // next unused decimal key, rendered as text

  // Contents as a relation; meta carries "<physical>#<rowid>" item ids and
  // the given src attribution.
  Relation to_relation(const std::string& src) const;
};

class Store {
 public:
  Table& create_table(const std::string& physical);
  void drop_table(const std::string& physical);
  Table* find_table(const std::string& physical);
  const Table* find_table(const std::string& physical) const;
  bool contains(const std::string& physical) const { return tables_.count(physical) != 0; }

  std::uint64_t allocate_row_id() { return next_row_id_++; }

  const std::map<std::string, Table>& tables() const { return tables_; }
  std::map<std::string, Table>& tables() { return tables_; }

  // Canonical serialized form; equal strings mean bit-identical stores.
  std::string fingerprint() const;

  nlohmann::json to_json() const;
  static Store from_json(const nlohmann::json&);

 private:
  std::map<std::string, Table> tables_;
  std::uint64_t next_row_id_ = 1;
};

}  // namespace crm::store
