#include "crm/monitor.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "crm/digest.hpp"
#include "crm/query_eval.hpp"
#include "crm/sql_parser.hpp"

namespace crm::engine {

namespace {

constexpr const char* kPrefix = "f_";
constexpr const char* kSeparator = "__";

std::string render_columns(const std::vector<schema::ColumnDecl>& columns) {
  std::string out = "(";
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) out += ", ";
    out += columns[i].name + " " + columns[i].type.to_string();
  }
  return out + ")";
}

std::string render_signature(const std::vector<std::pair<std::string, schema::ColumnType>>& sig) {
  std::string out = "(";
  for (std::size_t i = 0; i < sig.size(); ++i) {
    if (i) out += ", ";
    out += sig[i].first + " " + sig[i].second.to_string();
  }
  return out + ")";
}

}  // namespace

Monitor::Monitor() : sk_(digest::random_hex(32)) {}

Monitor::Monitor(std::string secret_key) : sk_(std::move(secret_key)) {}

bool Monitor::valid_name(const std::string& name) {
  if (name.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(name[0]))) return false;
  for (char c : name) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  }
  if (name.find(kSeparator) != std::string::npos) return false;
  return true;
}

std::string Monitor::physical_name(const std::string& component, const std::string& logical) {
  return kPrefix + component + kSeparator + logical;
}

// --- integration ---

schema::Catalog Monitor::catalog_excluding(const std::string& component) const {
  schema::Catalog cat;
  for (const auto& [name, info] : catalog_) {
    if (name == component) continue;
    std::set<std::string> tables;
    for (const auto& t : info.decl.all_table_names()) tables.insert(t);
    cat.component_tables[name] = std::move(tables);
  }
  return cat;
}

void Monitor::integrate_locked(const std::string& component, const std::string& db_text,
                               bool create_tables, IntegrationReport* report) {
  std::vector<std::string> diags;
  if (!valid_name(component)) {
    diags.push_back("invalid component name '" + component +
                    "' (letters, digits, underscore; no '__')");
    throw IntegrationError(std::move(diags));
  }
  if (catalog_.count(component)) {
    diags.push_back("component already integrated: " + component);
    throw IntegrationError(std::move(diags));
  }

  schema::SchemaDecl decl;
  try {
    decl = schema::parse_db_file(db_text);
  } catch (const ParseError& e) {
    diags.push_back(e.what());
    throw IntegrationError(std::move(diags));
  } catch (const MonitorError& e) {
    diags.push_back(e.what());
    throw IntegrationError(std::move(diags));
  }
  decl.funit = component;

  for (const auto& name : decl.all_table_names()) {
    if (!valid_name(name)) {
      diags.push_back("invalid table name '" + name + "' (letters, digits, underscore; no '__')");
    }
  }
  for (const auto& d : schema::validate_schema(decl, catalog_excluding(component))) {
    diags.push_back(d.message);
  }
  if (!diags.empty()) throw IntegrationError(std::move(diags));

  ComponentInfo info;
  info.name = component;
  info.db_text = db_text;
  info.decl = decl;
  for (const auto& t : decl.locals) {
    for (const auto& fk : t.foreign_keys) info.foreign_keys.push_back(fk);
  }

  // predicate tables resolve in the declaring component's namespace; arity
  // excludes the synthetic KEY column
  std::map<std::string, std::size_t> pred_arities;
  for (const auto& t : decl.locals) pred_arities[t.name] = t.columns.size() - 1;
  for (const auto& t : decl.inputs) pred_arities[t.name] = t.columns.size() - 1;

  for (const auto& o : decl.outputs) {
    OutputViewState state;
    state.decl = o;
    try {
      state.signature = schema::output_signature(decl, o);
      state.restriction = wiring::compile_restriction(o.invariant, o.projection_names(),
                                                      pred_arities);
    } catch (const MonitorError& e) {
      diags.push_back(std::string("output table ") + o.name + ": " + e.what());
      throw IntegrationError(std::move(diags));
    }
    info.outputs.emplace(o.name, std::move(state));
  }

  if (create_tables) {
    for (const auto& t : decl.locals) {
      const std::string physical = physical_name(component, t.name);
      if (store_.contains(physical)) {
        diags.push_back("physical table collision: " + physical);
        throw IntegrationError(std::move(diags));
      }
      store::Table& table = store_.create_table(physical);
      table.columns = t.columns;
      table.key_column = t.key_column()->name;
      table.owner_column = t.owner_column()->name;
    }
  }

  graph_.add_node(component);
  catalog_.emplace(component, std::move(info));
  compile_input_views();

  if (report) {
    report->component = component;
    for (const auto& t : decl.locals) {
      report->signature_lines.push_back("local  " + component + "." + t.name + " " +
                                        render_columns(t.columns));
    }
    for (const auto& t : decl.inputs) {
      report->signature_lines.push_back("input  " + component + "." + t.name + " " +
                                        render_columns(t.columns) + " awaiting wiring");
    }
    for (const auto& o : decl.outputs) {
      const auto& state = catalog_.at(component).outputs.at(o.name);
      report->signature_lines.push_back("output " + component + "." + o.name + " " +
                                        render_signature(state.signature) + " INVARIANT " +
                                        schema::serialize(o.invariant));
    }
  }
}

IntegrationReport Monitor::integrate(const std::string& component, const std::string& db_text) {
  std::lock_guard<std::mutex> lock(mutex_);
  IntegrationReport report;
  integrate_locked(component, db_text, /*create_tables=*/true, &report);
  return report;
}

void Monitor::remove_component(const std::string& component) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = catalog_.find(component);
  if (it == catalog_.end()) return;
  for (const auto& t : it->second.decl.locals) {
    store_.drop_table(physical_name(component, t.name));
  }
  catalog_.erase(it);
  wirings_.erase(std::remove_if(wirings_.begin(), wirings_.end(),
                                [&](const wiring::WiringSpec& w) {
                                  return w.source_component == component ||
                                         w.target_component == component;
                                }),
                 wirings_.end());
  graph_.remove_node(component);
  compile_input_views();
}

bool Monitor::is_integrated(const std::string& component) const {
  std::lock_guard<std::mutex> lock(mutex_);
  return catalog_.count(component) != 0;
}

std::vector<std::string> Monitor::components() const {
  std::lock_guard<std::mutex> lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [name, _] : catalog_) out.push_back(name);
  return out;
}

void Monitor::add_activation(const std::string& parent, const std::string& child) {
  std::lock_guard<std::mutex> lock(mutex_);
  graph_.add_activation(parent, child);
}

std::vector<std::string> Monitor::add_wiring(const wiring::WiringSpec& spec) {
  std::lock_guard<std::mutex> lock(mutex_);
  wiring::WiringCatalog cat;
  cat.is_integrated = [&](const std::string& c) { return catalog_.count(c) != 0; };
  cat.find_input = [&](const std::string& c,
                       const std::string& t) -> const schema::InputTableDecl* {
    auto it = catalog_.find(c);
    return it == catalog_.end() ? nullptr : it->second.decl.find_input(t);
  };
  cat.find_output_signature =
      [&](const std::string& c, const std::string& t)
      -> std::optional<std::vector<std::pair<std::string, schema::ColumnType>>> {
    auto it = catalog_.find(c);
    if (it == catalog_.end()) return std::nullopt;
    auto out = it->second.outputs.find(t);
    if (out == it->second.outputs.end()) return std::nullopt;
    return out->second.signature;
  };
  auto diags = wiring::check_wiring(spec, cat, graph_);
  if (!diags.empty()) return diags;
  wirings_.push_back(spec);
  graph_.add_sharing(spec.source_component, spec.target_component);
  compile_input_views();
  return {};
}

void Monitor::compile_input_views() {
  input_views_.clear();
  for (const auto& [name, info] : catalog_) {
    for (const auto& input : info.decl.inputs) {
      input_views_[{name, input.name}] = wiring::compile_input_view(name, input.name, wirings_);
    }
  }
}

// --- sessions ---

Session Monitor::open_session(const std::string& funit, const std::string& uid) const {
  std::lock_guard<std::mutex> lock(mutex_);
  if (!catalog_.count(funit)) {
    throw MonitorError(ErrorCode::Identity, "unknown component " + funit);
  }
  if (uid.empty()) {
    throw MonitorError(ErrorCode::Identity, "empty uid");
  }
  Session s;
  s.funit = funit;
  s.uid = uid;
  s.uid_h = digest::uid_digest(uid, funit, sk_);
  s.opened_at = std::chrono::steady_clock::now();
  return s;
}

bool Monitor::verify_uid(const Session& session, const std::string& claimed_funit) const {
  return digest::uid_digest(session.uid, claimed_funit, sk_) == session.uid_h;
}

// --- name resolution (the query sandbox) ---

Monitor::ResolvedTarget Monitor::resolve_table(const std::string& component,
                                               const std::string& logical) const {
  auto it = catalog_.find(component);
  if (it == catalog_.end()) {
    throw MonitorError(ErrorCode::Identity, "unknown component " + component);
  }
  const auto& decl = it->second.decl;
  if (decl.find_local(logical)) {
    return ResolvedTarget{ResolvedTarget::Kind::Local, logical,
                          physical_name(component, logical)};
  }
  if (decl.find_input(logical)) {
    return ResolvedTarget{ResolvedTarget::Kind::Input, logical, ""};
  }
  if (decl.find_output(logical)) {
    return ResolvedTarget{ResolvedTarget::Kind::Output, logical, ""};
  }
  throw MonitorError(ErrorCode::UnknownTable, "unknown table " + logical);
}

Relation Monitor::relation_for(const std::string& component, const std::string& logical,
                               const std::string& uid, bool restricted,
                               CapturedTable* capture) const {
  ResolvedTarget target = resolve_table(component, logical);
  switch (target.kind) {
    case ResolvedTarget::Kind::Local: {
      const store::Table* table = store_.find_table(target.physical);
      if (!table) throw MonitorError(ErrorCode::UnknownTable, "missing storage for " + logical);
      Relation rel = table->to_relation(component);
      if (capture) {
        capture->model_table = target.physical;
        capture->is_input = false;
        capture->component = component;
        int owner_idx = rel.column_index(table->owner_column);
        for (std::size_t i = 0; i < rel.rows.size(); ++i) {
          capture->items.push_back(CapturedItem{rel.meta[i].item_id,
                                                owner_idx >= 0 ? rel.rows[i][owner_idx] : Value::null(),
                                                rel.meta[i].src});
        }
      }
      return rel;
    }
    case ResolvedTarget::Kind::Input: {
      const auto& decl = catalog_.at(component).decl;
      const schema::InputTableDecl* input = decl.find_input(logical);
      auto view_it = input_views_.find({component, logical});
      static const wiring::CompiledInputView kEmpty;
      const wiring::CompiledInputView& view =
          view_it == input_views_.end() ? kEmpty : view_it->second;
      Relation rel = wiring::evaluate_input_view(*this, view, *input, uid, restricted);
      if (capture) {
        capture->model_table = "view:" + component + "." + logical;
        capture->is_input = true;
        capture->component = component;
        int owner_idx = rel.column_index(input->owner_column()->name);
        for (std::size_t i = 0; i < rel.rows.size(); ++i) {
          capture->items.push_back(CapturedItem{rel.meta[i].item_id,
                                                owner_idx >= 0 ? rel.rows[i][owner_idx] : Value::null(),
                                                rel.meta[i].src});
        }
      }
      return rel;
    }
    case ResolvedTarget::Kind::Output:
      throw MonitorError(ErrorCode::Permission,
                         "output table " + logical + " is only readable through wirings");
  }
  throw MonitorError(ErrorCode::UnknownTable, "unknown table " + logical);
}

Relation Monitor::eval_select_ns(const std::string& component, const sql::SelectStmt& query,
                                 const std::string& uid, bool restricted,
                                 CapturedRequest* capture) const {
  auto resolver = [&](const std::string& logical) -> Relation {
    CapturedTable table_capture;
    Relation rel =
        relation_for(component, logical, uid, restricted, capture ? &table_capture : nullptr);
    if (capture) capture->tables.push_back(std::move(table_capture));
    return rel;
  };
  return sql::evaluate_select(query, resolver);
}

// --- ViewHost ---

Relation Monitor::evaluate_in_namespace(const std::string& component,
                                        const sql::SelectStmt& query, const std::string& uid,
                                        bool restricted) const {
  return eval_select_ns(component, query, uid, restricted, nullptr);
}

std::optional<wiring::OutputInfo> Monitor::output_info(const std::string& component,
                                                       const std::string& output) const {
  auto it = catalog_.find(component);
  if (it == catalog_.end()) return std::nullopt;
  auto out = it->second.outputs.find(output);
  if (out == it->second.outputs.end()) return std::nullopt;
  wiring::OutputInfo info;
  info.decl = &it->second.decl;
  info.output = &out->second.decl;
  info.restriction = &out->second.restriction;
  return info;
}

std::optional<Relation> Monitor::predicate_relation(const std::string& component,
                                                    const std::string& table,
                                                    const std::string& uid) const {
  auto it = catalog_.find(component);
  if (it == catalog_.end()) return std::nullopt;
  const auto& decl = it->second.decl;

  auto drop_key = [](const Relation& rel, const std::string& key_column) {
    Relation out;
    int key_idx = rel.column_index(key_column);
    for (std::size_t i = 0; i < rel.columns.size(); ++i) {
      if (static_cast<int>(i) != key_idx) out.columns.push_back(rel.columns[i]);
    }
    for (const auto& row : rel.rows) {
      std::vector<Value> r;
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (static_cast<int>(i) != key_idx) r.push_back(row[i]);
      }
      out.rows.push_back(std::move(r));
    }
    return out;
  };

  if (const auto* local = decl.find_local(table)) {
    const store::Table* t = store_.find_table(physical_name(component, table));
    if (!t) return std::nullopt;
    return drop_key(t->to_relation(component), local->key_column()->name);
  }
  if (const auto* input = decl.find_input(table)) {
    auto view_it = input_views_.find({component, table});
    static const wiring::CompiledInputView kEmpty;
    const wiring::CompiledInputView& view =
        view_it == input_views_.end() ? kEmpty : view_it->second;
    Relation rel = wiring::evaluate_input_view(*this, view, *input, uid, /*restricted=*/true);
    return drop_key(rel, input->key_column()->name);
  }
  return std::nullopt;
}

// --- guards ---

void Monitor::guard_owner(const Session& session, sql::Op op, const store::Table& table,
                          const store::StoredRow* old_row, const RowValues* new_row) const {
  if (!verify_uid(session, session.funit)) {
    throw MonitorError(ErrorCode::Identity, "session identity could not be verified");
  }
  const std::string& owner_col = table.owner_column;
  Value uid = Value::text(session.uid);
  auto fetch = [&](const RowValues& vals) {
    auto it = vals.find(owner_col);
    return it == vals.end() ? Value::null() : it->second;
  };
  auto violation = [&](const std::string& what, const Value& row_key) {
    throw MonitorError(ErrorCode::Owner,
                       what + " on " + table.physical +
                           (row_key.is_null() ? "" : " (key " + row_key.render() + ")"));
  };
  Value key = Value::null();
  if (old_row && !table.key_column.empty()) key = old_row->get(table.key_column);

  switch (op) {
    case sql::Op::Insert: {
      Value owner = fetch(*new_row);
      if (!null_safe_equal(owner, uid)) violation("owner invariant violated by INSERT", key);
      break;
    }
    case sql::Op::Update: {
      Value old_owner = old_row->get(owner_col);
      Value new_owner = fetch(*new_row);
      if (!null_safe_equal(new_owner, old_owner)) {
        violation("owner column must not change", key);
      }
      if (!null_safe_equal(new_owner, uid)) violation("owner invariant violated by UPDATE", key);
      break;
    }
    case sql::Op::Delete: {
      Value old_owner = old_row->get(owner_col);
      if (!null_safe_equal(old_owner, uid)) violation("owner invariant violated by DELETE", key);
      break;
    }
    case sql::Op::Select:
      break;
  }
}

// --- execution ---

void Monitor::check_assignable(const store::Table& table, const std::string& column,
                               Value& value) const {
  const schema::ColumnDecl* decl = table.find_column(column);
  if (!decl) {
    throw MonitorError(ErrorCode::Syntax, "unknown column " + column + " in " + table.physical);
  }
  if (value.is_null()) return;
  if (decl->type.is_int()) {
    if (!value.is_int()) {
      throw MonitorError(ErrorCode::Syntax, "column " + column + " expects an integer value");
    }
    return;
  }
  // text family, KEY and OWNER store text; integers are rendered
  if (value.is_int()) value = Value::text(value.render());
}

std::vector<std::size_t> Monitor::match_rows(const store::Table& table,
                                             const std::optional<sql::Condition>& where) const {
  Relation rel = table.to_relation("");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rel.rows.size(); ++i) {
    if (!where || sql::condition_matches(*where, rel, i)) out.push_back(i);
  }
  return out;
}

sql::Expr Monitor::substitute_subselects(const Session& session, const sql::Expr& expr,
                                         std::vector<CapturedRequest>* captured) const {
  sql::Expr out = expr;
  if (expr.kind == sql::Expr::Kind::Subselect) {
    CapturedRequest capture;
    capture.op = sql::Op::Select;
    capture.issuer_user = session.uid;
    capture.issuer_component = session.funit;
    Relation rel = eval_select_ns(session.funit, *expr.subselect, session.uid,
                                  /*restricted=*/true, captured ? &capture : nullptr);
    if (captured) captured->push_back(std::move(capture));
    if (rel.columns.size() != 1) {
      throw MonitorError(ErrorCode::Syntax, "scalar sub-select must project exactly one column");
    }
    if (rel.rows.size() > 1) {
      throw MonitorError(ErrorCode::Constraint, "scalar sub-select returned more than one row");
    }
    out = sql::Expr::lit(rel.rows.empty() ? Value::null() : rel.rows[0][0]);
    return out;
  }
  out.args.clear();
  for (const auto& a : expr.args) out.args.push_back(substitute_subselects(session, a, captured));
  return out;
}

sql::Condition Monitor::substitute_subselects(const Session& session, const sql::Condition& cond,
                                              std::vector<CapturedRequest>* captured) const {
  sql::Condition out = cond;
  out.operands.clear();
  out.children.clear();
  for (const auto& e : cond.operands) {
    out.operands.push_back(substitute_subselects(session, e, captured));
  }
  for (const auto& c : cond.children) {
    out.children.push_back(substitute_subselects(session, c, captured));
  }
  return out;
}

ExecResult Monitor::run_select(const Session& session, const sql::SelectStmt& stmt,
                               std::vector<CapturedRequest>* captured) const {
  CapturedRequest capture;
  capture.op = sql::Op::Select;
  capture.issuer_user = session.uid;
  capture.issuer_component = session.funit;
  Relation rel = eval_select_ns(session.funit, stmt, session.uid, /*restricted=*/true,
                                captured ? &capture : nullptr);
  if (captured) captured->push_back(std::move(capture));
  ExecResult result;
  result.is_rows = true;
  result.columns = std::move(rel.columns);
  result.rows = std::move(rel.rows);
  return result;
}

void Monitor::finish_modification(const Session& session, ExecResult& result,
                                  std::vector<CascadeRecord> cascades) {
  for (const auto& c : cascades) audit_log_.push_back(c);
  result.cascades = std::move(cascades);
  auto stale = graph_.stale_closure(session.funit);
  result.rebuild_order = graph_.rebuild_order(stale);
}

std::set<std::string> Monitor::parent_keys(const std::string& component,
                                           const schema::ForeignKeyDecl& fk) const {
  std::set<std::string> keys;
  const auto& decl = catalog_.at(component).decl;
  if (const auto* local = decl.find_local(fk.parent_table)) {
    const store::Table* t = store_.find_table(physical_name(component, fk.parent_table));
    if (!t) return keys;
    for (const auto& row : t->rows) {
      Value k = row.get(local->key_column()->name);
      if (!k.is_null()) keys.insert(k.render());
    }
    return keys;
  }
  if (const auto* input = decl.find_input(fk.parent_table)) {
    auto view_it = input_views_.find({component, fk.parent_table});
    static const wiring::CompiledInputView kEmpty;
    const wiring::CompiledInputView& view =
        view_it == input_views_.end() ? kEmpty : view_it->second;
    // existence is user-independent: the unrestricted branch union decides
    Relation rel = wiring::evaluate_input_view(*this, view, *input, "", /*restricted=*/false);
    int key_idx = rel.column_index(input->key_column()->name);
    for (const auto& row : rel.rows) {
      if (key_idx >= 0 && !row[key_idx].is_null()) keys.insert(row[key_idx].render());
    }
  }
  return keys;
}

std::vector<CascadeRecord> Monitor::run_cascades() {
  std::vector<CascadeRecord> records;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& [component, info] : catalog_) {
      for (const auto& fk : info.foreign_keys) {
        store::Table* child = store_.find_table(physical_name(component, fk.child_table));
        if (!child) continue;
        std::set<std::string> parents = parent_keys(component, fk);
        for (auto it = child->rows.begin(); it != child->rows.end();) {
          Value v = it->get(fk.child_column);
          if (!v.is_null() && !parents.count(v.render())) {
            CascadeRecord rec;
            rec.component = component;
            rec.table = fk.child_table;
            rec.row_id = it->id;
            rec.key = child->key_column.empty() ? "" : it->get(child->key_column).render();
            rec.owner = it->get(child->owner_column).render();
            records.push_back(std::move(rec));
            it = child->rows.erase(it);
            changed = true;
          } else {
            ++it;
          }
        }
      }
    }
  }
  return records;
}

ExecResult Monitor::run_insert(const Session& session, const sql::InsertStmt& stmt,
                               std::vector<CapturedRequest>* captured) {
  ResolvedTarget target = resolve_table(session.funit, stmt.table);
  if (target.kind == ResolvedTarget::Kind::Input) {
    throw MonitorError(ErrorCode::Permission, "input table " + stmt.table + " is read-only");
  }
  if (target.kind == ResolvedTarget::Kind::Output) {
    throw MonitorError(ErrorCode::Permission, "output table " + stmt.table + " is not modifiable");
  }
  store::Table& table = *store_.find_table(target.physical);

  std::set<std::string> listed;
  for (const auto& c : stmt.columns) {
    if (!table.find_column(c)) {
      throw MonitorError(ErrorCode::Syntax, "unknown column " + c + " in " + stmt.table);
    }
    if (!listed.insert(c).second) {
      throw MonitorError(ErrorCode::Syntax, "column " + c + " listed twice");
    }
  }

  const auto& fks = catalog_.at(session.funit).foreign_keys;
  std::vector<RowValues> pending;
  std::set<std::string> pending_keys;
  for (const auto& tuple : stmt.rows) {
    RowValues row;
    for (const auto& c : table.columns) row[c.name] = Value::null();
    for (std::size_t i = 0; i < stmt.columns.size(); ++i) {
      Value v = tuple[i];
      check_assignable(table, stmt.columns[i], v);
      row[stmt.columns[i]] = std::move(v);
    }
    // KEY auto-assignment and uniqueness
    Value key = row[table.key_column];
    if (key.is_null()) {
      row[table.key_column] = Value::text(table.allocate_key());
    } else {
      std::string rendered = key.render();
      if (table.has_key(Value::text(rendered)) || pending_keys.count(rendered)) {
        throw MonitorError(ErrorCode::Constraint, "duplicate key " + rendered + " in " + stmt.table);
      }
      row[table.key_column] = Value::text(rendered);
    }
    pending_keys.insert(row[table.key_column].render());

    guard_owner(session, sql::Op::Insert, table, nullptr, &row);

    for (const auto& fk : fks) {
      if (fk.child_table != stmt.table) continue;
      Value v = row[fk.child_column];
      if (!v.is_null() && !parent_keys(session.funit, fk).count(v.render())) {
        throw MonitorError(ErrorCode::Constraint, "foreign key violation: " + fk.child_column +
                                                      " = " + v.render() + " has no parent in " +
                                                      fk.parent_table);
      }
    }
    pending.push_back(std::move(row));
  }

  if (captured) {
    CapturedRequest capture;
    capture.op = sql::Op::Insert;
    capture.issuer_user = session.uid;
    capture.issuer_component = session.funit;
    CapturedTable t;
    t.model_table = target.physical;
    t.is_input = false;
    t.component = session.funit;
    capture.tables.push_back(std::move(t));
    int n = 0;
    for (const auto& row : pending) {
      capture.pending.push_back(CapturedItem{
          "pending:" + target.physical + "#" + std::to_string(n++),
          row.at(table.owner_column), session.funit});
    }
    captured->push_back(std::move(capture));
  }

  auto snapshot = store_.tables();
  try {
    for (auto& row : pending) {
      store::StoredRow stored;
      stored.id = store_.allocate_row_id();
      stored.cols = std::move(row);
      table.rows.push_back(std::move(stored));
    }
  } catch (...) {
    store_.tables() = snapshot;
    throw;
  }

  ExecResult result;
  result.affected = pending.size();
  finish_modification(session, result, {});
  return result;
}

ExecResult Monitor::run_update(const Session& session, sql::UpdateStmt stmt,
                               std::vector<CapturedRequest>* captured) {
  ResolvedTarget target = resolve_table(session.funit, stmt.table);
  if (target.kind == ResolvedTarget::Kind::Input) {
    throw MonitorError(ErrorCode::Permission, "input table " + stmt.table + " is read-only");
  }
  if (target.kind == ResolvedTarget::Kind::Output) {
    throw MonitorError(ErrorCode::Permission, "output table " + stmt.table + " is not modifiable");
  }
  store::Table& table = *store_.find_table(target.physical);

  // sub-selects run first, as their own SEL sub-requests
  for (auto& [col, expr] : stmt.assignments) {
    expr = substitute_subselects(session, expr, captured);
  }
  if (stmt.where) stmt.where = substitute_subselects(session, *stmt.where, captured);

  Relation rel = table.to_relation(session.funit);
  std::vector<std::size_t> matched = match_rows(table, stmt.where);

  struct PendingUpdate {
    std::size_t row_index;
    RowValues new_values;
  };
  std::vector<PendingUpdate> updates;
  const auto& fks = catalog_.at(session.funit).foreign_keys;
  bool key_assigned = false;
  for (const auto& [col, _] : stmt.assignments) {
    if (col == table.key_column) key_assigned = true;
  }

  for (std::size_t idx : matched) {
    const store::StoredRow& old_row = table.rows[idx];
    RowValues new_values = old_row.cols;
    for (const auto& [col, expr] : stmt.assignments) {
      Value v = sql::expr_value(expr, rel, idx);
      check_assignable(table, col, v);
      if (col == table.key_column) {
        if (v.is_null()) {
          throw MonitorError(ErrorCode::Constraint, "key column cannot be set to NULL");
        }
        v = Value::text(v.render());
      }
      new_values[col] = std::move(v);
    }
    guard_owner(session, sql::Op::Update, table, &old_row, &new_values);
    for (const auto& fk : fks) {
      if (fk.child_table != stmt.table) continue;
      Value v = new_values[fk.child_column];
      if (!v.is_null() && !parent_keys(session.funit, fk).count(v.render())) {
        throw MonitorError(ErrorCode::Constraint, "foreign key violation: " + fk.child_column +
                                                      " = " + v.render() + " has no parent in " +
                                                      fk.parent_table);
      }
    }
    updates.push_back(PendingUpdate{idx, std::move(new_values)});
  }

  if (key_assigned) {
    std::set<std::string> keys;
    std::map<std::size_t, const RowValues*> updated;
    for (const auto& u : updates) updated[u.row_index] = &u.new_values;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      auto it = updated.find(i);
      Value k = it != updated.end() ? it->second->at(table.key_column)
                                    : table.rows[i].get(table.key_column);
      if (!k.is_null() && !keys.insert(k.render()).second) {
        throw MonitorError(ErrorCode::Constraint, "duplicate key " + k.render() + " in " + stmt.table);
      }
    }
  }

  if (captured) {
    CapturedRequest capture;
    capture.op = sql::Op::Update;
    capture.issuer_user = session.uid;
    capture.issuer_component = session.funit;
    CapturedTable t;
    t.model_table = target.physical;
    t.is_input = false;
    t.component = session.funit;
    for (std::size_t idx : matched) {
      t.items.push_back(CapturedItem{rel.meta[idx].item_id,
                                     table.rows[idx].get(table.owner_column), session.funit});
    }
    capture.tables.push_back(std::move(t));
    captured->push_back(std::move(capture));
  }

  auto snapshot = store_.tables();
  std::vector<CascadeRecord> cascades;
  try {
    for (auto& u : updates) {
      table.rows[u.row_index].cols = std::move(u.new_values);
    }
    cascades = run_cascades();
  } catch (...) {
    store_.tables() = snapshot;
    throw;
  }

  ExecResult result;
  result.affected = updates.size();
  finish_modification(session, result, std::move(cascades));
  return result;
}

ExecResult Monitor::run_delete(const Session& session, const sql::DeleteStmt& stmt,
                               std::vector<CapturedRequest>* captured) {
  ResolvedTarget target = resolve_table(session.funit, stmt.table);
  if (target.kind == ResolvedTarget::Kind::Input) {
    throw MonitorError(ErrorCode::Permission, "input table " + stmt.table + " is read-only");
  }
  if (target.kind == ResolvedTarget::Kind::Output) {
    throw MonitorError(ErrorCode::Permission, "output table " + stmt.table + " is not modifiable");
  }
  store::Table& table = *store_.find_table(target.physical);

  sql::DeleteStmt resolved = stmt;
  if (resolved.where) resolved.where = substitute_subselects(session, *resolved.where, captured);

  Relation rel = table.to_relation(session.funit);
  std::vector<std::size_t> matched = match_rows(table, resolved.where);
  for (std::size_t idx : matched) {
    guard_owner(session, sql::Op::Delete, table, &table.rows[idx], nullptr);
  }

  if (captured) {
    CapturedRequest capture;
    capture.op = sql::Op::Delete;
    capture.issuer_user = session.uid;
    capture.issuer_component = session.funit;
    CapturedTable t;
    t.model_table = target.physical;
    t.is_input = false;
    t.component = session.funit;
    for (std::size_t idx : matched) {
      t.items.push_back(CapturedItem{rel.meta[idx].item_id,
                                     table.rows[idx].get(table.owner_column), session.funit});
    }
    capture.tables.push_back(std::move(t));
    captured->push_back(std::move(capture));
  }

  auto snapshot = store_.tables();
  std::vector<CascadeRecord> cascades;
  std::size_t removed = matched.size();
  try {
    std::set<std::size_t> doomed(matched.begin(), matched.end());
    std::vector<store::StoredRow> kept;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      if (!doomed.count(i)) kept.push_back(std::move(table.rows[i]));
    }
    table.rows = std::move(kept);
    cascades = run_cascades();
  } catch (...) {
    store_.tables() = snapshot;
    throw;
  }

  ExecResult result;
  result.affected = removed;
  finish_modification(session, result, std::move(cascades));
  return result;
}

ExecResult Monitor::execute(const Session& session, const std::string& sql_text) {
  return execute_captured(session, sql_text, nullptr);
}

ExecResult Monitor::execute_captured(const Session& session, const std::string& sql_text,
                                     std::vector<CapturedRequest>* captured) {
  std::lock_guard<std::mutex> lock(mutex_);
  if (!verify_uid(session, session.funit)) {
    throw MonitorError(ErrorCode::Identity, "session identity could not be verified");
  }
  sql::Statement stmt;
  try {
    stmt = sql::parse_statement(sql_text);
  } catch (const ParseError& e) {
    throw MonitorError(ErrorCode::Syntax, e.what());
  }
  switch (stmt.op) {
    case sql::Op::Select:
      return run_select(session, *stmt.select, captured);
    case sql::Op::Insert:
      return run_insert(session, *stmt.insert, captured);
    case sql::Op::Update:
      return run_update(session, *stmt.update, captured);
    case sql::Op::Delete:
      return run_delete(session, *stmt.del, captured);
  }
  throw MonitorError(ErrorCode::Unsupported, "unsupported statement");
}

// --- catalog access ---

const schema::SchemaDecl* Monitor::schema_of(const std::string& component) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = catalog_.find(component);
  return it == catalog_.end() ? nullptr : &it->second.decl;
}

std::vector<std::pair<std::string, schema::ColumnType>> Monitor::output_signature_of(
    const std::string& component, const std::string& output) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = catalog_.find(component);
  if (it == catalog_.end()) {
    throw MonitorError(ErrorCode::UnknownTable, "unknown component " + component);
  }
  auto out = it->second.outputs.find(output);
  if (out == it->second.outputs.end()) {
    throw MonitorError(ErrorCode::UnknownTable, "unknown output table " + output);
  }
  return out->second.signature;
}

const wiring::CompiledInputView* Monitor::input_view_of(const std::string& component,
                                                        const std::string& input) const {
  auto it = input_views_.find({component, input});
  return it == input_views_.end() ? nullptr : &it->second;
}

// --- persistence ---

nlohmann::json Monitor::to_json() const {
  nlohmann::json j;
  j["version"] = 1;
  j["sk"] = sk_;
  j["store"] = store_.to_json();
  nlohmann::json comps = nlohmann::json::object();
  for (const auto& [name, info] : catalog_) comps[name] = info.db_text;
  j["components"] = std::move(comps);
  nlohmann::json acts = nlohmann::json::array();
  for (const auto& [p, c] : graph_.activation_edges()) acts.push_back({p, c});
  j["activations"] = std::move(acts);
  nlohmann::json wires = nlohmann::json::array();
  for (const auto& w : wirings_) {
    nlohmann::json wj;
    wj["source_component"] = w.source_component;
    wj["source_output"] = w.source_output;
    wj["target_component"] = w.target_component;
    wj["target_input"] = w.target_input;
    nlohmann::json map = nlohmann::json::array();
    for (const auto& m : w.column_map) {
      nlohmann::json mj;
      mj["target"] = m.target_column;
      if (m.is_constant) {
        mj["constant"] = m.constant.is_int() ? nlohmann::json(m.constant.as_int())
                                             : nlohmann::json(m.constant.render());
      } else {
        mj["source"] = m.source_column;
      }
      map.push_back(std::move(mj));
    }
    wj["columns"] = std::move(map);
    wires.push_back(std::move(wj));
  }
  j["wirings"] = std::move(wires);
  return j;
}

void Monitor::load_json(const nlohmann::json& j) {
  sk_ = j.at("sk").get<std::string>();
  store_ = store::Store::from_json(j.at("store"));
  for (const auto& [name, text] : j.at("components").items()) {
    integrate_locked(name, text.get<std::string>(), /*create_tables=*/false, nullptr);
  }
  for (const auto& a : j.at("activations")) {
    graph_.add_activation(a.at(0).get<std::string>(), a.at(1).get<std::string>());
  }
  for (const auto& wj : j.at("wirings")) {
    wiring::WiringSpec w;
    w.source_component = wj.at("source_component").get<std::string>();
    w.source_output = wj.at("source_output").get<std::string>();
    w.target_component = wj.at("target_component").get<std::string>();
    w.target_input = wj.at("target_input").get<std::string>();
    for (const auto& mj : wj.at("columns")) {
      wiring::ColumnMapping m;
      m.target_column = mj.at("target").get<std::string>();
      if (mj.contains("constant")) {
        m.is_constant = true;
        m.constant = mj.at("constant").is_number_integer()
                         ? Value::integer(mj.at("constant").get<std::int64_t>())
                         : Value::text(mj.at("constant").get<std::string>());
      } else {
        m.source_column = mj.at("source").get<std::string>();
      }
      w.column_map.push_back(std::move(m));
    }
    wirings_.push_back(std::move(w));
    graph_.add_sharing(wirings_.back().source_component, wirings_.back().target_component);
  }
  compile_input_views();
}

void Monitor::save_file(const std::filesystem::path& path) const {
  std::lock_guard<std::mutex> lock(mutex_);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write store file " + path.string());
  out << to_json().dump(2) << "\n";
}

std::unique_ptr<Monitor> Monitor::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read store file " + path.string());
  nlohmann::json j = nlohmann::json::parse(in);
  auto monitor = std::make_unique<Monitor>(std::string());
  monitor->load_json(j);
  return monitor;
}

std::string Monitor::store_fingerprint() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return store_.fingerprint();
}

}  // namespace crm::engine
