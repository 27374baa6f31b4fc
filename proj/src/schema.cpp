#include "crm/schema.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <sstream>

#include "crm/sql_parser.hpp"

namespace crm::schema {

namespace {

using sql::Token;
using sql::TokenKind;

bool is_decl_start(const sql::Parser& p) {
  const Token& t = p.peek();
  if (t.is_keyword("TABLE")) return true;
  if (t.is_keyword("INPUT") && p.peek(1).is_keyword("TABLE")) return true;
  if (t.is_keyword("OUTPUT") && p.peek(1).is_keyword("TABLE")) return true;
  return false;
}

ColumnType parse_type(sql::Parser& p) {
  const Token& t = p.peek();
  if (t.kind != TokenKind::Ident) p.fail("expected column type");
  ColumnType ct;
  if (t.is_keyword("KEY")) ct.base = ColumnType::Base::Key;
  else if (t.is_keyword("OWNER")) ct.base = ColumnType::Base::Owner;
  else if (t.is_keyword("INT")) ct.base = ColumnType::Base::Int;
  else if (t.is_keyword("TEXT")) ct.base = ColumnType::Base::Text;
  else if (t.is_keyword("TINYTEXT")) ct.base = ColumnType::Base::TinyText;
  else if (t.is_keyword("VARCHAR")) {
    ct.base = ColumnType::Base::Varchar;
    p.advance();
    p.expect_punct("(");
    const Token& n = p.peek();
    if (n.kind != TokenKind::Integer) p.fail("expected VARCHAR length");
    p.advance();
    ct.varchar_len = static_cast<int>(n.ival);
    p.expect_punct(")");
    return ct;
  } else {
    p.fail("unknown column type " + t.text);
  }
  p.advance();
  return ct;
}

// Shared body for local and input tables: columns plus, for locals,
// FOREIGN KEY entries. Separating commas are optional (the paper's listings
// use plain whitespace).
void parse_table_body(sql::Parser& p, const std::string& table,
                      std::vector<ColumnDecl>& columns, std::vector<ForeignKeyDecl>* fks) {
  p.expect_punct("(");
  while (!p.accept_punct(")")) {
    if (p.peek().is_keyword("FOREIGN")) {
      if (!fks) p.fail("FOREIGN KEY is only allowed in local tables");
      p.advance();
      p.expect_keyword("KEY");
      p.expect_punct("(");
      const Token& child = p.peek();
      if (child.kind != TokenKind::Ident) p.fail("expected column name");
      p.advance();
      p.expect_punct(")");
      p.expect_keyword("REFERENCES");
      const Token& parent = p.peek();
      if (parent.kind != TokenKind::Ident) p.fail("expected table name");
      p.advance();
      p.expect_punct("(");
      const Token& pcol = p.peek();
      if (pcol.kind != TokenKind::Ident) p.fail("expected column name");
      p.advance();
      p.expect_punct(")");
      ForeignKeyDecl fk;
      fk.child_table = table;
      fk.child_column = child.text;
      fk.parent_table = parent.text;
      fk.parent_column = pcol.text;
      fks->push_back(fk);
      p.accept_punct(",");
      continue;
    }
    const Token& name = p.peek();
    if (name.kind != TokenKind::Ident) p.fail("expected column name");
    p.advance();
    ColumnDecl col;
    col.name = name.text;
    col.type = parse_type(p);
    columns.push_back(std::move(col));
    p.accept_punct(",");
  }
}

void check_markers(const std::string& table, const std::vector<ColumnDecl>& columns,
                   const Token& at) {
  int keys = 0;
  int owners = 0;
  std::set<std::string> names;
  for (const auto& c : columns) {
    if (!names.insert(c.name).second) {
      throw ParseError(at.line, at.col, "duplicate column " + c.name + " in table " + table);
    }
    if (c.type.is_key()) ++keys;
    if (c.type.is_owner()) ++owners;
  }
  if (keys != 1) {
    throw ParseError(at.line, at.col, "table " + table + " must declare exactly one KEY column");
  }
  if (owners != 1) {
    throw ParseError(at.line, at.col, "table " + table + " must declare exactly one OWNER column");
  }
}

InvariantExpr parse_inv_or(sql::Parser& p);

InvariantArg parse_inv_arg(sql::Parser& p) {
  const Token& t = p.peek();
  if (t.is_keyword("@uid")) {
    p.advance();
    return InvariantArg::uid();
  }
  if (t.kind == TokenKind::String) {
    p.advance();
    return InvariantArg::constant_of(Value::text(t.text));
  }
  if (t.kind == TokenKind::Integer) {
    p.advance();
    return InvariantArg::constant_of(Value::integer(t.ival));
  }
  if (t.kind == TokenKind::Ident) {
    p.advance();
    return InvariantArg::col(t.text);
  }
  p.fail("expected invariant argument");
}

InvariantExpr parse_inv_factor(sql::Parser& p) {
  const Token& t = p.peek();
  if (t.is_punct("(")) {
    p.advance();
    InvariantExpr inner = parse_inv_or(p);
    p.expect_punct(")");
    return inner;
  }
  if (t.is_keyword("ALL")) {
    p.advance();
    InvariantExpr e;
    e.kind = InvariantExpr::Kind::All;
    return e;
  }
  bool negated = false;
  if (t.is_punct("!")) {
    p.advance();
    negated = true;
  }
  const Token& name = p.peek();
  if (name.kind != TokenKind::Ident) p.fail("expected predicate");
  p.advance();
  InvariantExpr e;
  if (name.is_keyword("is")) {
    if (negated) {
      throw ParseError(name.line, name.col, "negation is only allowed on table predicates");
    }
    e.kind = InvariantExpr::Kind::Is;
  } else {
    e.kind = InvariantExpr::Kind::Pred;
    e.pred_table = name.text;
    e.negated = negated;
  }
  p.expect_punct("(");
  e.args.push_back(parse_inv_arg(p));
  while (p.accept_punct(",")) e.args.push_back(parse_inv_arg(p));
  p.expect_punct(")");
  if (e.kind == InvariantExpr::Kind::Is && e.args.size() != 2) {
    throw ParseError(name.line, name.col, "is() takes exactly two arguments");
  }
  return e;
}

InvariantExpr parse_inv_and(sql::Parser& p) {
  InvariantExpr left = parse_inv_factor(p);
  while (p.peek().is_keyword("AND")) {
    p.advance();
    InvariantExpr right = parse_inv_factor(p);
    InvariantExpr e;
    e.kind = InvariantExpr::Kind::And;
    e.children.push_back(std::move(left));
    e.children.push_back(std::move(right));
    left = std::move(e);
  }
  return left;
}

InvariantExpr parse_inv_or(sql::Parser& p) {
  InvariantExpr left = parse_inv_and(p);
  while (p.peek().is_keyword("OR")) {
    p.advance();
    InvariantExpr right = parse_inv_and(p);
    InvariantExpr e;
    e.kind = InvariantExpr::Kind::Or;
    e.children.push_back(std::move(left));
    e.children.push_back(std::move(right));
    left = std::move(e);
  }
  return left;
}

InvariantExpr default_invariant() {
  InvariantExpr e;
  e.kind = InvariantExpr::Kind::Is;
  e.args.push_back(InvariantArg::uid());
  e.args.push_back(InvariantArg::col("owner"));
  return e;
}

}  // namespace

const ColumnDecl* LocalTableDecl::key_column() const {
  for (const auto& c : columns) {
    if (c.type.is_key()) return &c;
  }
  return nullptr;
}
const ColumnDecl* LocalTableDecl::owner_column() const {
  for (const auto& c : columns) {
    if (c.type.is_owner()) return &c;
  }
  return nullptr;
}
const ColumnDecl* LocalTableDecl::find(const std::string& n) const {
  for (const auto& c : columns) {
    if (c.name == n) return &c;
  }
  return nullptr;
}

const ColumnDecl* InputTableDecl::key_column() const {
  for (const auto& c : columns) {
    if (c.type.is_key()) return &c;
  }
  return nullptr;
}
const ColumnDecl* InputTableDecl::owner_column() const {
  for (const auto& c : columns) {
    if (c.type.is_owner()) return &c;
  }
  return nullptr;
}
const ColumnDecl* InputTableDecl::find(const std::string& n) const {
  for (const auto& c : columns) {
    if (c.name == n) return &c;
  }
  return nullptr;
}

std::vector<std::string> OutputTableDecl::projection_names() const {
  std::vector<std::string> out;
  for (const auto& item : query.items) {
    if (!item.alias.empty()) {
      out.push_back(item.alias);
    } else if (item.expr.kind == sql::Expr::Kind::Column) {
      out.push_back(item.expr.column);
    } else {
      out.push_back(sql::to_string(item.expr));
    }
  }
  return out;
}

const LocalTableDecl* SchemaDecl::find_local(const std::string& n) const {
  for (const auto& t : locals) {
    if (t.name == n) return &t;
  }
  return nullptr;
}
const InputTableDecl* SchemaDecl::find_input(const std::string& n) const {
  for (const auto& t : inputs) {
    if (t.name == n) return &t;
  }
  return nullptr;
}
const OutputTableDecl* SchemaDecl::find_output(const std::string& n) const {
  for (const auto& t : outputs) {
    if (t.name == n) return &t;
  }
  return nullptr;
}
std::vector<std::string> SchemaDecl::all_table_names() const {
  std::vector<std::string> out;
  for (const auto& t : locals) out.push_back(t.name);
  for (const auto& t : inputs) out.push_back(t.name);
  for (const auto& t : outputs) out.push_back(t.name);
  return out;
}

std::string ColumnType::to_string() const {
  switch (base) {
    case Base::Int: return "INT";
    case Base::Text: return "TEXT";
    case Base::TinyText: return "TINYTEXT";
    case Base::Varchar: return "VARCHAR(" + std::to_string(varchar_len) + ")";
    case Base::Key: return "KEY";
    case Base::Owner: return "OWNER";
  }
  return "?";
}

SchemaDecl parse_db_file(const std::string& text) {
  sql::Parser p(sql::tokenize(text));
  SchemaDecl decl;
  std::set<std::string> names;
  auto claim_name = [&](const std::string& n, const Token& at) {
    if (!names.insert(n).second) {
      throw ParseError(at.line, at.col, "duplicate table " + n);
    }
  };
  while (!p.at_end()) {
    if (p.accept_keyword("TABLE")) {
      const Token& name = p.peek();
      if (name.kind != TokenKind::Ident) p.fail("expected table name");
      p.advance();
      LocalTableDecl t;
      t.name = name.text;
      claim_name(t.name, name);
      parse_table_body(p, t.name, t.columns, &t.foreign_keys);
      check_markers(t.name, t.columns, name);
      decl.locals.push_back(std::move(t));
      continue;
    }
    if (p.peek().is_keyword("INPUT") && p.peek(1).is_keyword("TABLE")) {
      p.advance();
      p.advance();
      const Token& name = p.peek();
      if (name.kind != TokenKind::Ident) p.fail("expected table name");
      p.advance();
      InputTableDecl t;
      t.name = name.text;
      claim_name(t.name, name);
      parse_table_body(p, t.name, t.columns, nullptr);
      check_markers(t.name, t.columns, name);
      decl.inputs.push_back(std::move(t));
      continue;
    }
    if (p.peek().is_keyword("OUTPUT") && p.peek(1).is_keyword("TABLE")) {
      p.advance();
      p.advance();
      const Token& name = p.peek();
      if (name.kind != TokenKind::Ident) p.fail("expected table name");
      p.advance();
      OutputTableDecl t;
      t.name = name.text;
      claim_name(t.name, name);
      bool parenthesized = false;
      if (p.accept_punct("(")) {
        parenthesized = true;
      } else if (!p.accept_punct("=")) {
        p.fail("expected '=' or '(' after output table name");
      }
      t.query = p.parse_select();
      if (p.accept_keyword("INVARIANT")) {
        t.invariant = parse_inv_or(p);
        t.invariant_explicit = true;
      } else {
        t.invariant = default_invariant();
      }
      if (parenthesized) {
        p.expect_punct(")");
      } else if (!p.at_end() && !is_decl_start(p)) {
        p.fail("expected next declaration");
      }
      t.query_text = sql::to_string(t.query);
      decl.outputs.push_back(std::move(t));
      continue;
    }
    p.fail("expected TABLE, INPUT TABLE, or OUTPUT TABLE");
  }
  return decl;
}

InvariantExpr parse_invariant(const std::string& text) {
  sql::Parser p(sql::tokenize(text));
  InvariantExpr e = parse_inv_or(p);
  if (!p.at_end()) p.fail("unexpected trailing input");
  return e;
}

namespace {

std::string arg_str(const InvariantArg& a) {
  switch (a.kind) {
    case InvariantArg::Kind::Uid: return "@uid";
    case InvariantArg::Kind::Column: return a.column;
    case InvariantArg::Kind::Constant:
      if (a.constant.is_int()) return std::to_string(a.constant.as_int());
      {
        std::string out = "'";
        for (char c : a.constant.as_text()) {
          if (c == '\'') out += "''";
          else out.push_back(c);
        }
        return out + "'";
      }
  }
  return "?";
}

std::string inv_str(const InvariantExpr& e, bool parenthesize_or) {
  switch (e.kind) {
    case InvariantExpr::Kind::All:
      return "ALL";
    case InvariantExpr::Kind::Is:
      return "is(" + arg_str(e.args[0]) + "," + arg_str(e.args[1]) + ")";
    case InvariantExpr::Kind::Pred: {
      std::string out = e.negated ? "!" : "";
      out += e.pred_table + "(";
      for (std::size_t i = 0; i < e.args.size(); ++i) {
        if (i) out += ",";
        out += arg_str(e.args[i]);
      }
      return out + ")";
    }
    case InvariantExpr::Kind::And: {
      std::string s = inv_str(e.children[0], true) + " AND " + inv_str(e.children[1], true);
      return s;
    }
    case InvariantExpr::Kind::Or: {
      std::string s = inv_str(e.children[0], false) + " OR " + inv_str(e.children[1], false);
      if (parenthesize_or) return "(" + s + ")";
      return s;
    }
  }
  return "?";
}

}  // namespace

std::string serialize(const InvariantExpr& e) { return inv_str(e, false); }

std::string serialize(const SchemaDecl& decl) {
  std::ostringstream out;
  for (const auto& t : decl.locals) {
    out << "TABLE " << t.name << " (\n";
    for (const auto& c : t.columns) {
      out << "  " << c.name << " " << c.type.to_string() << "\n";
    }
    for (const auto& fk : t.foreign_keys) {
      out << "  FOREIGN KEY (" << fk.child_column << ") REFERENCES " << fk.parent_table << "("
          << fk.parent_column << ")\n";
    }
    out << ")\n";
  }
  for (const auto& t : decl.inputs) {
    out << "INPUT TABLE " << t.name << " (\n";
    for (const auto& c : t.columns) {
      out << "  " << c.name << " " << c.type.to_string() << "\n";
    }
    out << ")\n";
  }
  for (const auto& t : decl.outputs) {
    out << "OUTPUT TABLE " << t.name << " = " << sql::to_string(t.query);
    if (t.invariant_explicit) {
      out << " INVARIANT " << serialize(t.invariant);
    }
    out << "\n";
  }
  return out.str();
}

namespace {

void collect_invariant_columns(const InvariantExpr& e, std::vector<std::string>& out) {
  for (const auto& a : e.args) {
    if (a.kind == InvariantArg::Kind::Column) out.push_back(a.column);
  }
  for (const auto& c : e.children) collect_invariant_columns(c, out);
}

bool has_subselect(const sql::Expr& e) {
  if (e.kind == sql::Expr::Kind::Subselect) return true;
  for (const auto& a : e.args) {
    if (has_subselect(a)) return true;
  }
  return false;
}

}  // namespace

std::vector<Diagnostic> validate_schema(const SchemaDecl& decl, const Catalog& catalog) {
  std::vector<Diagnostic> diags;
  auto add = [&](const std::string& msg) { diags.push_back(Diagnostic{0, 0, msg}); };

  std::set<std::string> seen;
  for (const auto& n : decl.all_table_names()) {
    if (!seen.insert(n).second) add("duplicate table " + n);
  }

  auto check_table = [&](const std::string& name, const std::vector<ColumnDecl>& columns) {
    int keys = 0;
    int owners = 0;
    std::set<std::string> cols;
    for (const auto& c : columns) {
      if (!cols.insert(c.name).second) add("table " + name + ": duplicate column " + c.name);
      if (c.type.is_key()) ++keys;
      if (c.type.is_owner()) ++owners;
    }
    if (keys != 1) add("table " + name + ": exactly one KEY column required");
    if (owners != 1) add("table " + name + ": exactly one OWNER column required");
  };
  for (const auto& t : decl.locals) check_table(t.name, t.columns);
  for (const auto& t : decl.inputs) check_table(t.name, t.columns);

  // foreign keys reference tables of this component only
  std::map<std::string, std::vector<std::string>> fk_edges;
  for (const auto& t : decl.locals) {
    for (const auto& fk : t.foreign_keys) {
      const ColumnDecl* child = t.find(fk.child_column);
      if (!child) {
        add("foreign key on " + t.name + ": unknown column " + fk.child_column);
        continue;
      }
      if (child->type.is_key() || child->type.is_owner()) {
        add("foreign key on " + t.name + ": column " + fk.child_column +
            " must carry a concrete type");
      }
      const std::string* parent_key = nullptr;
      if (const auto* pl = decl.find_local(fk.parent_table)) {
        if (const auto* k = pl->key_column()) parent_key = &k->name;
      } else if (const auto* pi = decl.find_input(fk.parent_table)) {
        if (const auto* k = pi->key_column()) parent_key = &k->name;
      } else {
        add("foreign key on " + t.name + ": unknown parent table " + fk.parent_table);
        continue;
      }
      if (parent_key && *parent_key != fk.parent_column) {
        add("foreign key on " + t.name + ": parent column " + fk.parent_column +
            " is not the KEY column of " + fk.parent_table);
      }
      fk_edges[t.name].push_back(fk.parent_table);
    }
  }
  // reject cyclic foreign-key declarations
  {
    std::map<std::string, int> state;  // 0 new, 1 open, 2 done
    std::function<bool(const std::string&)> visit = [&](const std::string& n) -> bool {
      int& s = state[n];
      if (s == 1) return false;
      if (s == 2) return true;
      s = 1;
      for (const auto& m : fk_edges[n]) {
        if (!visit(m)) return false;
      }
      s = 2;
      return true;
    };
    for (const auto& [n, _] : fk_edges) {
      if (!visit(n)) {
        add("cycle among foreign key declarations involving " + n);
        break;
      }
    }
  }

  for (const auto& o : decl.outputs) {
    if (o.query.star || o.query.count_star) {
      add("output table " + o.name + ": query must list an explicit projection");
      continue;
    }
    for (const auto& ref : o.query.from) {
      if (!decl.find_local(ref.table) && !decl.find_input(ref.table)) {
        std::string msg = "output table " + o.name + ": query references table " + ref.table +
                          " outside this f-unit";
        if (auto owner = catalog.owner_of_table(ref.table)) {
          msg += " (belongs to " + *owner + ")";
        }
        add(msg);
      }
    }
    for (const auto& item : o.query.items) {
      if (has_subselect(item.expr)) {
        add("output table " + o.name + ": nested SELECT is not allowed");
      }
    }
    auto names = o.projection_names();
    std::set<std::string> name_set(names.begin(), names.end());
    if (name_set.size() != names.size()) {
      add("output table " + o.name + ": duplicate projection column names");
    }
    if (!name_set.count("key")) {
      add("output table " + o.name + ": projection must expose a 'key' column");
    }
    if (!name_set.count("owner")) {
      add("output table " + o.name + ": projection must expose an 'owner' column");
    }
    std::vector<std::string> inv_cols;
    collect_invariant_columns(o.invariant, inv_cols);
    for (const auto& c : inv_cols) {
      if (!name_set.count(c)) {
        add("output table " + o.name + ": invariant references column " + c +
            " absent from the projection");
      }
    }
  }
  return diags;
}

std::vector<std::pair<std::string, ColumnType>> output_signature(const SchemaDecl& decl,
                                                                 const OutputTableDecl& output) {
  // source columns visible to the output query, keyed by effective table name
  struct SourceCols {
    std::string name;
    const std::vector<ColumnDecl>* columns;
  };
  std::vector<SourceCols> sources;
  for (const auto& ref : output.query.from) {
    const std::vector<ColumnDecl>* cols = nullptr;
    if (const auto* l = decl.find_local(ref.table)) cols = &l->columns;
    else if (const auto* i = decl.find_input(ref.table)) cols = &i->columns;
    if (!cols) {
      throw MonitorError(ErrorCode::Syntax,
                         "signature of " + output.name + ": unknown table " + ref.table);
    }
    sources.push_back({ref.effective_name(), cols});
  }

  std::function<ColumnType(const sql::Expr&)> infer = [&](const sql::Expr& e) -> ColumnType {
    switch (e.kind) {
      case sql::Expr::Kind::Column: {
        const ColumnDecl* found = nullptr;
        for (const auto& s : sources) {
          if (!e.qualifier.empty() && s.name != e.qualifier) continue;
          for (const auto& c : *s.columns) {
            if (c.name == e.column) {
              if (found) {
                throw MonitorError(ErrorCode::Syntax, "signature of " + output.name +
                                                          ": ambiguous column " + e.column);
              }
              found = &c;
            }
          }
        }
        if (!found) {
          throw MonitorError(ErrorCode::Syntax,
                             "signature of " + output.name + ": unknown column " + e.column);
        }
        return found->type;
      }
      case sql::Expr::Kind::Literal: {
        ColumnType t;
        t.base = e.literal.is_int() ? ColumnType::Base::Int : ColumnType::Base::Text;
        return t;
      }
      case sql::Expr::Kind::Lower:
      case sql::Expr::Kind::Concat: {
        for (const auto& a : e.args) infer(a);  // arguments must themselves resolve
        ColumnType t;
        t.base = ColumnType::Base::Text;
        return t;
      }
      case sql::Expr::Kind::Subselect:
        throw MonitorError(ErrorCode::Syntax,
                           "signature of " + output.name + ": un-inferable expression");
    }
    throw MonitorError(ErrorCode::Syntax, "signature of " + output.name + ": un-inferable expression");
  };

  std::vector<std::pair<std::string, ColumnType>> out;
  auto names = output.projection_names();
  for (std::size_t i = 0; i < output.query.items.size(); ++i) {
    out.emplace_back(names[i], infer(output.query.items[i].expr));
  }
  return out;
}

}  // namespace crm::schema
