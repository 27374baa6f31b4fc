#include "crm/model.hpp"

#include <algorithm>
#include <sstream>

namespace crm::model {

const Dimension* Universe::find_dimension(const std::string& name) const {
  for (const auto& d : dimensions) {
    if (d.name == name) return &d;
  }
  return nullptr;
}

const DataItem* Universe::find_item(const std::string& id) const {
  for (const auto& [table, items] : data) {
    for (const auto& item : items) {
      if (item.id == id) return &item;
    }
  }
  return nullptr;
}

std::vector<std::string> Universe::local_tables(const PrincipalId& component) const {
  std::vector<std::string> out;
  for (const auto& [name, info] : tables) {
    if (info.kind == TableKind::Local && info.component == component) out.push_back(name);
  }
  return out;
}

std::vector<std::string> Universe::input_tables(const PrincipalId& component) const {
  std::vector<std::string> out;
  for (const auto& [name, info] : tables) {
    if (info.kind == TableKind::Input && info.component == component) out.push_back(name);
  }
  return out;
}

std::string Request::describe() const {
  std::ostringstream out;
  out << sql::to_string(op) << " by (" << issuer_user << "," << issuer_component << ") over {";
  bool first = true;
  for (const auto& t : scope_tables) {
    if (!first) out << ",";
    out << t;
    first = false;
  }
  out << "} items {";
  first = true;
  for (const auto& i : scope_items) {
    if (!first) out << ",";
    out << i;
    first = false;
  }
  for (const auto& p : pending_items) {
    if (!first) out << ",";
    out << "+" << p.id << "(owner=" << p.owner << ",src=" << p.src << ")";
    first = false;
  }
  out << "}";
  return out.str();
}

PrincipalId affected_principal(const Universe& u, const DataItem& item, const std::string& dim) {
  if (dim == kUserDimension) return item.owner;
  if (dim == kComponentDimension) return item.src;
  if (!u.find_dimension(dim)) throw ModelError("unknown dimension " + dim);
  auto it = item.extra_aff.find(dim);
  if (it == item.extra_aff.end()) {
    throw ModelError("item " + item.id + " has no affected principal in dimension " + dim);
  }
  return it->second;
}

std::vector<const DataItem*> scope_data(const Universe& u, const Request& r) {
  for (const auto& t : r.scope_tables) {
    if (!u.tables.count(t)) throw ModelError("unknown table in scope: " + t);
  }
  std::vector<const DataItem*> out;
  for (const auto& t : r.scope_tables) {
    auto it = u.data.find(t);
    if (it == u.data.end()) continue;
    for (const auto& item : it->second) {
      if (r.scope_items.count(item.id)) out.push_back(&item);
    }
  }
  for (const auto& p : r.pending_items) out.push_back(&p);
  return out;
}

bool shares_user(const Universe& u, const PrincipalId& from, const PrincipalId& to,
                 const DataItem& d) {
  (void)to;
  if (from != d.owner) throw ModelError("shares_user: from is not the owner of " + d.id);
  // Eqs. (1) and (2): every item residing in a local or an input table is
  // shared with every user. Pending items are not stored anywhere yet.
  for (const auto& [table, items] : u.data) {
    for (const auto& item : items) {
      if (item.id == d.id) return true;
    }
  }
  return false;
}

bool shares_component(const Universe& u, const PrincipalId& from, const PrincipalId& to,
                      const DataItem& d) {
  if (from != d.src) throw ModelError("shares_component: from is not the src of " + d.id);
  for (const auto& [table, info] : u.tables) {
    if (info.kind != TableKind::Input || info.component != to) continue;
    auto it = u.data.find(table);
    if (it == u.data.end()) continue;
    for (const auto& item : it->second) {
      if (item.id == d.id) return true;
    }
  }
  return false;
}

bool req_valid(const Universe& u, const Request& r) {
  auto scope = scope_data(u, r);
  for (const DataItem* d : scope) {
    for (std::size_t i = 0; i < u.dimensions.size(); ++i) {
      const std::string& dim = u.dimensions[i].name;
      PrincipalId affected = affected_principal(u, *d, dim);
      PrincipalId issuer;
      if (dim == kUserDimension) issuer = r.issuer_user;
      else if (dim == kComponentDimension) issuer = r.issuer_component;
      else if (i >= 2 && i - 2 < r.extra_issuers.size()) issuer = r.extra_issuers[i - 2];
      else throw ModelError("request has no issuer for dimension " + dim);

      if (affected == issuer) continue;
      bool shared = false;
      if (dim == kUserDimension) {
        shared = shares_user(u, affected, issuer, *d);
      } else if (dim == kComponentDimension) {
        shared = shares_component(u, affected, issuer, *d);
      } else {
        auto fn = u.extra_sharing.find(dim);
        shared = fn != u.extra_sharing.end() && fn->second(affected, issuer, *d);
      }
      if (!shared) return false;
    }
  }
  return true;
}

bool sb(const Universe& u, const Request& r) {
  bool modifying = r.op != sql::Op::Select;
  for (const auto& t : r.scope_tables) {
    auto it = u.tables.find(t);
    if (it == u.tables.end()) throw ModelError("unknown table in scope: " + t);
    const TableInfo& info = it->second;
    if (modifying) {
      // (3A) only own local tables
      if (info.kind != TableKind::Local || info.component != r.issuer_component) return false;
    } else {
      // (3C) own local tables or own input tables
      if (info.component != r.issuer_component) return false;
    }
  }
  if (modifying) {
    // (3B) every affected item owned by the issuer
    for (const DataItem* d : scope_data(u, r)) {
      if (d->owner != r.issuer_user) return false;
    }
  }
  return true;
}

SoundnessReport soundness_check(const Universe& u, const std::vector<Request>& requests,
                                std::size_t budget) {
  SoundnessReport report;
  for (const auto& r : requests) {
    if (report.evaluations + 2 > budget) {
      report.budget_exceeded = true;
      break;
    }
    report.evaluations += 2;
    ++report.requests_checked;
    if (sb(u, r) && !req_valid(u, r)) {
      report.violations.push_back(r);
    }
  }
  return report;
}

std::vector<Request> enumerate_requests(const Universe& u) {
  std::vector<Request> out;
  if (u.dimensions.size() < 2) return out;
  const auto& users = u.dimensions[0].principals;
  const auto& components = u.dimensions[1].principals;

  std::vector<std::set<std::string>> table_sets;
  std::set<std::string> all_tables;
  for (const auto& [name, _] : u.tables) {
    table_sets.push_back({name});
    all_tables.insert(name);
  }
  if (all_tables.size() > 1) table_sets.push_back(all_tables);

  auto items_of = [&](const std::set<std::string>& tables) {
    std::set<std::string> ids;
    for (const auto& t : tables) {
      auto it = u.data.find(t);
      if (it == u.data.end()) continue;
      for (const auto& item : it->second) ids.insert(item.id);
    }
    return ids;
  };

  for (const auto& user : users) {
    for (const auto& comp : components) {
      for (const auto& tables : table_sets) {
        auto full = items_of(tables);
        for (sql::Op op : {sql::Op::Select, sql::Op::Update, sql::Op::Delete}) {
          Request r;
          r.op = op;
          r.scope_tables = tables;
          r.scope_items = full;
          r.issuer_user = user;
          r.issuer_component = comp;
          out.push_back(r);
        }
        // single-item scopes over singleton table sets
        if (tables.size() == 1 && !full.empty()) {
          Request r;
          r.op = sql::Op::Update;
          r.scope_tables = tables;
          r.scope_items = {*full.begin()};
          r.issuer_user = user;
          r.issuer_component = comp;
          out.push_back(r);
        }
      }
      // INS with pending rows into every table: owner matching and not
      for (const auto& [table, info] : u.tables) {
        int variant = 0;
        for (const auto& owner : users) {
          Request r;
          r.op = sql::Op::Insert;
          r.scope_tables = {table};
          DataItem pending;
          pending.id = "pending:" + table + ":" + std::to_string(variant++);
          pending.home_table = table;
          pending.owner = owner;
          pending.src = info.kind == TableKind::Local ? info.component : comp;
          r.pending_items.push_back(std::move(pending));
          r.issuer_user = user;
          r.issuer_component = comp;
          out.push_back(std::move(r));
        }
      }
    }
  }
  return out;
}

Universe load_universe(const std::string& text) {
  // whitespace token scanner with single-quote strings and # comments
  std::vector<std::vector<std::string>> lines;
  {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      std::vector<std::string> tokens;
      std::size_t i = 0;
      while (i < line.size()) {
        char c = line[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
          ++i;
          continue;
        }
        if (c == '#') break;
        if (c == '\'') {
          std::string s;
          ++i;
          bool closed = false;
          while (i < line.size()) {
            if (line[i] == '\'') {
              if (i + 1 < line.size() && line[i + 1] == '\'') {
                s.push_back('\'');
                i += 2;
                continue;
              }
              ++i;
              closed = true;
              break;
            }
            s.push_back(line[i++]);
          }
          if (!closed) throw ModelError("fixture: unterminated quoted value");
          tokens.push_back("'" + s);  // marker prefix to force text type
          continue;
        }
        std::string tok;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) {
          tok.push_back(line[i++]);
        }
        tokens.push_back(tok);
      }
      if (!tokens.empty()) lines.push_back(std::move(tokens));
    }
  }

  Universe u;
  std::string current_table;
  std::vector<std::string> header;

  auto parse_value = [](const std::string& tok) {
    if (tok == "NULL") return Value::null();
    if (!tok.empty() && tok[0] == '\'') return Value::text(tok.substr(1));
    if (!tok.empty() && std::all_of(tok.begin(), tok.end(), [](unsigned char c) {
          return std::isdigit(c);
        })) {
      return Value::integer(std::stoll(tok));
    }
    return Value::text(tok);
  };

  for (const auto& tokens : lines) {
    if (tokens[0] == "dimension") {
      if (tokens.size() < 2) throw ModelError("fixture: dimension needs a name");
      Dimension d;
      d.name = tokens[1];
      for (std::size_t i = 2; i < tokens.size(); ++i) d.principals.insert(tokens[i]);
      u.dimensions.push_back(std::move(d));
      current_table.clear();
      continue;
    }
    if (tokens[0] == "table") {
      if (tokens.size() != 4) throw ModelError("fixture: table <name> <local|input> <component>");
      TableInfo info;
      info.name = tokens[1];
      if (tokens[2] == "local") info.kind = TableKind::Local;
      else if (tokens[2] == "input") info.kind = TableKind::Input;
      else throw ModelError("fixture: table kind must be local or input");
      info.component = tokens[3];
      if (u.tables.count(info.name)) throw ModelError("fixture: duplicate table " + info.name);
      u.tables[info.name] = info;
      u.data[info.name];  // ensure presence
      current_table = info.name;
      header.clear();
      continue;
    }
    if (current_table.empty()) throw ModelError("fixture: row outside a table block");
    if (header.empty()) {
      header = tokens;
      bool has_owner = false;
      bool has_src = false;
      for (const auto& h : header) {
        if (h == "owner") has_owner = true;
        if (h == "src") has_src = true;
      }
      if (!has_owner || !has_src) {
        throw ModelError("fixture: table " + current_table + " header must include owner and src");
      }
      continue;
    }
    if (tokens.size() != header.size()) {
      throw ModelError("fixture: row arity mismatch in table " + current_table);
    }
    DataItem item;
    item.id = current_table + "#" + std::to_string(u.data[current_table].size());
    item.home_table = current_table;
    for (std::size_t i = 0; i < header.size(); ++i) {
      Value v = parse_value(tokens[i]);
      if (header[i] == "owner") {
        item.owner = v.render();
      } else if (header[i] == "src") {
        item.src = v.render();
      } else {
        item.values[header[i]] = v;
      }
    }
    u.data[current_table].push_back(std::move(item));
  }

  // membership validation against the declared dimensions
  if (u.dimensions.size() < 2 || u.dimensions[0].name != kUserDimension ||
      u.dimensions[1].name != kComponentDimension) {
    throw ModelError("fixture: first dimensions must be 'users' then 'components'");
  }
  for (const auto& [table, info] : u.tables) {
    if (!u.dimensions[1].principals.count(info.component)) {
      throw ModelError("fixture: table " + table + " belongs to unknown component " +
                       info.component);
    }
  }
  for (const auto& [table, items] : u.data) {
    for (const auto& item : items) {
      if (!u.dimensions[0].principals.count(item.owner)) {
        throw ModelError("fixture: item " + item.id + " has unknown owner " + item.owner);
      }
      if (!u.dimensions[1].principals.count(item.src)) {
        throw ModelError("fixture: item " + item.id + " has unknown src " + item.src);
      }
    }
  }
  return u;
}

}  // namespace crm::model
