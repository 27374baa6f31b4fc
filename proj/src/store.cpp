#include "crm/store.hpp"

#include <stdexcept>

#include <nlohmann/json.hpp>

namespace crm::store {

namespace {

nlohmann::json value_to_json(const Value& v) {
  if (v.is_null()) return nullptr;
  if (v.is_int()) return v.as_int();
  return v.as_text();
}

Value value_from_json(const nlohmann::json& j) {
  if (j.is_null()) return Value::null();
  if (j.is_number_integer()) return Value::integer(j.get<std::int64_t>());
  return Value::text(j.get<std::string>());
}

schema::ColumnType type_from_string(const std::string& s) {
  schema::ColumnType t;
  if (s == "INT") t.base = schema::ColumnType::Base::Int;
  else if (s == "TEXT") t.base = schema::ColumnType::Base::Text;
  else if (s == "TINYTEXT") t.base = schema::ColumnType::Base::TinyText;
  else if (s == "KEY") t.base = schema::ColumnType::Base::Key;
  else if (s == "OWNER") t.base = schema::ColumnType::Base::Owner;
  else if (s.rfind("VARCHAR(", 0) == 0) {
    t.base = schema::ColumnType::Base::Varchar;
    t.varchar_len = std::stoi(s.substr(8));
  } else {
    throw std::runtime_error("bad column type in store file: " + s);
  }
  return t;
}

}  // namespace

bool Table::has_key(const Value& key) const {
  if (key_column.empty()) return false;
  for (const auto& r : rows) {
    if (null_safe_equal(r.get(key_column), key)) return true;
  }
  return false;
}

std::string Table::allocate_key() {
  for (;;) {
    std::string candidate = std::to_string(next_key++);
    if (!has_key(Value::text(candidate))) return candidate;
  }
}

Relation Table::to_relation(const std::string& src) const {
  Relation rel;
  for (const auto& c : columns) rel.columns.push_back(c.name);
  rel.rows.reserve(rows.size());
  rel.meta.reserve(rows.size());
  for (const auto& r : rows) {
    std::vector<Value> vals;
    vals.reserve(columns.size());
    for (const auto& c : columns) vals.push_back(r.get(c.name));
    rel.rows.push_back(std::move(vals));
    rel.meta.push_back(RowMeta{physical + "#" + std::to_string(r.id), src});
  }
  return rel;
}

Table& Store::create_table(const std::string& physical) {
  auto [it, inserted] = tables_.emplace(physical, Table{});
  if (!inserted) throw std::runtime_error("table already exists: " + physical);
  it->second.physical = physical;
  return it->second;
}

void Store::drop_table(const std::string& physical) { tables_.erase(physical); }

Table* Store::find_table(const std::string& physical) {
  auto it = tables_.find(physical);
  return it == tables_.end() ? nullptr : &it->second;
}

const Table* Store::find_table(const std::string& physical) const {
  auto it = tables_.find(physical);
  return it == tables_.end() ? nullptr : &it->second;
}

nlohmann::json Store::to_json() const {
  nlohmann::json j;
  j["next_row_id"] = next_row_id_;
  nlohmann::json tables = nlohmann::json::object();
  for (const auto& [name, table] : tables_) {
    nlohmann::json t;
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : table.columns) {
      cols.push_back({{"name", c.name}, {"type", c.type.to_string()}});
    }
    t["columns"] = std::move(cols);
    t["key"] = table.key_column;
    t["owner"] = table.owner_column;
    t["next_key"] = table.next_key;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : table.rows) {
      nlohmann::json row;
      row["id"] = r.id;
      nlohmann::json vals = nlohmann::json::object();
      for (const auto& [col, v] : r.cols) vals[col] = value_to_json(v);
      row["cols"] = std::move(vals);
      rows.push_back(std::move(row));
    }
    t["rows"] = std::move(rows);
    tables[name] = std::move(t);
  }
  j["tables"] = std::move(tables);
  return j;
}

Store Store::from_json(const nlohmann::json& j) {
  Store s;
  s.next_row_id_ = j.at("next_row_id").get<std::uint64_t>();
  for (const auto& [name, t] : j.at("tables").items()) {
    Table& table = s.create_table(name);
    for (const auto& c : t.at("columns")) {
      schema::ColumnDecl col;
      col.name = c.at("name").get<std::string>();
      col.type = type_from_string(c.at("type").get<std::string>());
      table.columns.push_back(std::move(col));
    }
    table.key_column = t.at("key").get<std::string>();
    table.owner_column = t.at("owner").get<std::string>();
    table.next_key = t.at("next_key").get<std::uint64_t>();
    for (const auto& r : t.at("rows")) {
      StoredRow row;
      row.id = r.at("id").get<std::uint64_t>();
      for (const auto& [col, v] : r.at("cols").items()) {
        row.cols[col] = value_from_json(v);
      }
      table.rows.push_back(std::move(row));
    }
  }
  return s;
}

std::string Store::fingerprint() const { return to_json().dump(); }

}  // namespace crm::store
