#include "crm/sql_parser.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace crm::sql {

namespace {

bool ieq(const std::string& a, const char* b) {
  std::size_t n = 0;
  for (; b[n]; ++n) {
    if (n >= a.size()) return false;
    if (std::toupper(static_cast<unsigned char>(a[n])) != std::toupper(static_cast<unsigned char>(b[n]))) {
      return false;
    }
  }
  return n == a.size();
}

bool ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '@';
}

bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

const char* kMultiPunct[] = {"<=>", "<-", "->", "<=", ">=", "<>", "!=", nullptr};

// Identifiers that may follow a table name without being a bare alias.
// Covers clause keywords of the statement grammar and the .db-file and
// wiring-file layers that embed SELECTs.
bool reserved_after_table(const Token& t) {
  static const char* kReserved[] = {"WHERE", "JOIN",   "INNER",  "ON",     "INVARIANT", "TABLE",
                                    "INPUT", "OUTPUT", "FOREIGN", "GROUP", "ORDER",     "LIMIT",
                                    "HAVING", "UNION", "SELECT", "FROM",   "AND",       "OR",
                                    "NOT",   "AS",     "LIKE",   "IS",     "NULL",      "INSERT",
                                    "UPDATE", "DELETE", "SET",   "VALUES", "INTO",      "WIRE",
                                    "REFERENCES"};
  for (const char* kw : kReserved) {
    if (t.is_keyword(kw)) return true;
  }
  return false;
}

}  // namespace

bool Token::is_keyword(const char* kw) const {
  return kind == TokenKind::Ident && ieq(text, kw);
}

std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> out;
  int line = 1;
  int col = 1;
  std::size_t i = 0;
  auto bump = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (text[i + k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    i += n;
  };

  while (i < text.size()) {
    char c = text[i];
    if (c == '#') {  // line comment
      while (i < text.size() && text[i] != '\n') bump(1);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      bump(1);
      continue;
    }
    Token t;
    t.line = line;
    t.col = col;
    if (c == '\'') {
      t.kind = TokenKind::String;
      bump(1);
      std::string s;
      bool closed = false;
      while (i < text.size()) {
        if (text[i] == '\'') {
          if (i + 1 < text.size() && text[i + 1] == '\'') {
            s.push_back('\'');
            bump(2);
            continue;
          }
          bump(1);
          closed = true;
          break;
        }
        s.push_back(text[i]);
        bump(1);
      }
      if (!closed) throw ParseError(t.line, t.col, "unterminated string literal");
      t.text = std::move(s);
      out.push_back(std::move(t));
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::string num;
      while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
        num.push_back(text[i]);
        bump(1);
      }
      t.kind = TokenKind::Integer;
      t.text = num;
      t.ival = std::stoll(num);
      out.push_back(std::move(t));
      continue;
    }
    if (ident_start(c)) {
      std::string id(1, c);
      bump(1);
      while (i < text.size() && ident_char(text[i])) {
        id.push_back(text[i]);
        bump(1);
      }
      t.kind = TokenKind::Ident;
      t.text = std::move(id);
      out.push_back(std::move(t));
      continue;
    }
    // punctuation, longest match first
    bool matched = false;
    for (int k = 0; kMultiPunct[k]; ++k) {
      std::size_t len = std::string(kMultiPunct[k]).size();
      if (text.compare(i, len, kMultiPunct[k]) == 0) {
        t.kind = TokenKind::Punct;
        t.text = kMultiPunct[k];
        bump(len);
        out.push_back(std::move(t));
        matched = true;
        break;
      }
    }
    if (matched) continue;
    static const std::string kSingle = "()[]{},.*=<>!;+-/";
    if (kSingle.find(c) != std::string::npos) {
      t.kind = TokenKind::Punct;
      t.text = std::string(1, c);
      bump(1);
      out.push_back(std::move(t));
      continue;
    }
    throw ParseError(line, col, std::string("unexpected character '") + c + "'");
  }
  Token end;
  end.kind = TokenKind::End;
  end.line = line;
  end.col = col;
  out.push_back(end);
  return out;
}

const Token& Parser::peek(std::size_t ahead) const {
  const auto& ts = toks();
  std::size_t idx = std::min(pos_ + ahead, ts.size() - 1);
  return ts[idx];
}

const Token& Parser::advance() {
  const auto& ts = toks();
  const Token& t = ts[std::min(pos_, ts.size() - 1)];
  if (pos_ < ts.size() - 1) ++pos_;
  return t;
}

bool Parser::accept_keyword(const char* kw) {
  if (peek().is_keyword(kw)) {
    advance();
    return true;
  }
  return false;
}

void Parser::expect_keyword(const char* kw) {
  if (!accept_keyword(kw)) fail(std::string("expected ") + kw);
}

bool Parser::accept_punct(const char* p) {
  if (peek().is_punct(p)) {
    advance();
    return true;
  }
  return false;
}

void Parser::expect_punct(const char* p) {
  if (!accept_punct(p)) fail(std::string("expected '") + p + "'");
}

void Parser::fail(const std::string& message) const {
  const Token& t = peek();
  std::string got = t.kind == TokenKind::End ? "end of input" : "'" + t.text + "'";
  throw ParseError(t.line, t.col, message + ", got " + got);
}

Expr Parser::parse_primary() {
  const Token& t = peek();
  if (t.kind == TokenKind::String) {
    advance();
    return Expr::lit(Value::text(t.text));
  }
  if (t.kind == TokenKind::Integer) {
    advance();
    return Expr::lit(Value::integer(t.ival));
  }
  if (t.is_punct("-") && peek(1).kind == TokenKind::Integer) {
    advance();
    const Token& n = advance();
    return Expr::lit(Value::integer(-n.ival));
  }
  if (t.is_keyword("NULL")) {
    advance();
    return Expr::lit(Value::null());
  }
  if (t.is_punct("(")) {
    advance();
    if (peek().is_keyword("SELECT")) {
      Expr e;
      e.kind = Expr::Kind::Subselect;
      e.subselect = std::make_shared<SelectStmt>(parse_select_body());
      expect_punct(")");
      return e;
    }
    Expr inner = parse_expr();
    expect_punct(")");
    return inner;
  }
  if (t.kind == TokenKind::Ident) {
    advance();
    if (peek().is_punct("(")) {  // function call
      Expr e;
      if (ieq(t.text, "LOWER")) {
        e.kind = Expr::Kind::Lower;
      } else if (ieq(t.text, "CONCAT")) {
        e.kind = Expr::Kind::Concat;
      } else {
        throw MonitorError(ErrorCode::Unsupported, "unsupported function " + t.text);
      }
      advance();
      e.args.push_back(parse_expr());
      while (accept_punct(",")) e.args.push_back(parse_expr());
      expect_punct(")");
      if (e.kind == Expr::Kind::Lower && e.args.size() != 1) {
        throw ParseError(t.line, t.col, "LOWER takes one argument");
      }
      return e;
    }
    if (peek().is_punct(".")) {
      advance();
      const Token& col = peek();
      if (col.kind != TokenKind::Ident) fail("expected column name after '.'");
      advance();
      return Expr::column_ref(t.text, col.text);
    }
    return Expr::column_ref("", t.text);
  }
  fail("expected expression");
}

Expr Parser::parse_expr() { return parse_primary(); }

Condition Parser::parse_predicate() {
  if (peek().is_punct("(")) {
    // Could be a parenthesized condition or a parenthesized expression used
    // as a comparison operand; try the condition reading first.
    std::size_t save = pos_;
    try {
      advance();
      Condition c = parse_or();
      expect_punct(")");
      return c;
    } catch (const ParseError&) {
      pos_ = save;
    } catch (const MonitorError&) {
      pos_ = save;
    }
  }
  Condition c;
  c.operands.push_back(parse_expr());
  const Token& t = peek();
  if (t.is_keyword("IS")) {
    advance();
    c.kind = Condition::Kind::IsNull;
    if (accept_keyword("NOT")) c.negated = true;
    expect_keyword("NULL");
    return c;
  }
  bool not_like = false;
  if (t.is_keyword("NOT") && peek(1).is_keyword("LIKE")) {
    advance();
    not_like = true;
  }
  if (peek().is_keyword("LIKE")) {
    advance();
    c.kind = Condition::Kind::Like;
    c.negated = not_like;
    c.operands.push_back(parse_expr());
    return c;
  }
  c.kind = Condition::Kind::Compare;
  const Token& op = peek();
  if (op.is_punct("=")) c.cmp = CompareOp::Eq;
  else if (op.is_punct("<>") || op.is_punct("!=")) c.cmp = CompareOp::Ne;
  else if (op.is_punct("<=>")) c.cmp = CompareOp::NullSafeEq;
  else if (op.is_punct("<=")) c.cmp = CompareOp::Le;
  else if (op.is_punct(">=")) c.cmp = CompareOp::Ge;
  else if (op.is_punct("<")) c.cmp = CompareOp::Lt;
  else if (op.is_punct(">")) c.cmp = CompareOp::Gt;
  else fail("expected comparison operator");
  advance();
  c.operands.push_back(parse_expr());
  return c;
}

Condition Parser::parse_not() {
  if (accept_keyword("NOT")) {
    Condition c;
    c.kind = Condition::Kind::Not;
    c.children.push_back(parse_not());
    return c;
  }
  return parse_predicate();
}

Condition Parser::parse_and() {
  Condition left = parse_not();
  while (peek().is_keyword("AND")) {
    advance();
    Condition right = parse_not();
    Condition c;
    c.kind = Condition::Kind::And;
    c.children.push_back(std::move(left));
    c.children.push_back(std::move(right));
    left = std::move(c);
  }
  return left;
}

Condition Parser::parse_or() {
  Condition left = parse_and();
  while (peek().is_keyword("OR")) {
    advance();
    Condition right = parse_and();
    Condition c;
    c.kind = Condition::Kind::Or;
    c.children.push_back(std::move(left));
    c.children.push_back(std::move(right));
    left = std::move(c);
  }
  return left;
}

Condition Parser::parse_condition() { return parse_or(); }

TableRef Parser::parse_table_ref() {
  const Token& t = peek();
  if (t.kind != TokenKind::Ident) fail("expected table name");
  advance();
  TableRef ref;
  ref.table = t.text;
  if (accept_keyword("AS")) {
    const Token& a = peek();
    if (a.kind != TokenKind::Ident) fail("expected alias");
    advance();
    ref.alias = a.text;
  } else if (peek().kind == TokenKind::Ident && !reserved_after_table(peek())) {
    // bare alias only when it does not collide with a clause keyword
    ref.alias = advance().text;
  }
  return ref;
}

SelectStmt Parser::parse_select_body() {
  expect_keyword("SELECT");
  SelectStmt sel;
  if (peek().is_keyword("COUNT") && peek(1).is_punct("(")) {
    advance();
    advance();
    expect_punct("*");
    expect_punct(")");
    sel.count_star = true;
  } else if (accept_punct("*")) {
    sel.star = true;
  } else {
    do {
      SelectItem item;
      item.expr = parse_expr();
      if (accept_keyword("AS")) {
        const Token& a = peek();
        if (a.kind != TokenKind::Ident) fail("expected alias");
        advance();
        item.alias = a.text;
      }
      sel.items.push_back(std::move(item));
    } while (accept_punct(","));
  }
  expect_keyword("FROM");
  sel.from.push_back(parse_table_ref());
  for (;;) {
    if (accept_punct(",")) {
      sel.from.push_back(parse_table_ref());
      continue;
    }
    if (peek().is_keyword("INNER") && peek(1).is_keyword("JOIN")) {
      advance();
    }
    if (accept_keyword("JOIN")) {
      sel.from.push_back(parse_table_ref());
      expect_keyword("ON");
      sel.join_conditions.push_back(parse_condition());
      continue;
    }
    break;
  }
  if (accept_keyword("WHERE")) {
    sel.where = parse_condition();
  }
  for (const char* kw : {"GROUP", "ORDER", "LIMIT", "HAVING", "UNION"}) {
    if (peek().is_keyword(kw)) {
      throw MonitorError(ErrorCode::Unsupported, std::string("unsupported clause ") + kw);
    }
  }
  return sel;
}

SelectStmt Parser::parse_select() { return parse_select_body(); }

Statement Parser::parse_statement() {
  Statement stmt;
  const Token& t = peek();
  if (t.is_keyword("SELECT")) {
    stmt.op = Op::Select;
    stmt.select = std::make_shared<SelectStmt>(parse_select_body());
  } else if (t.is_keyword("INSERT")) {
    advance();
    expect_keyword("INTO");
    auto ins = std::make_shared<InsertStmt>();
    const Token& name = peek();
    if (name.kind != TokenKind::Ident) fail("expected table name");
    advance();
    ins->table = name.text;
    expect_punct("(");
    do {
      const Token& c = peek();
      if (c.kind != TokenKind::Ident) fail("expected column name");
      advance();
      ins->columns.push_back(c.text);
    } while (accept_punct(","));
    expect_punct(")");
    expect_keyword("VALUES");
    do {
      expect_punct("(");
      std::vector<Value> row;
      do {
        Expr e = parse_expr();
        if (e.kind != Expr::Kind::Literal) {
          throw MonitorError(ErrorCode::Unsupported, "INSERT values must be literals");
        }
        row.push_back(e.literal);
      } while (accept_punct(","));
      expect_punct(")");
      if (row.size() != ins->columns.size()) {
        throw ParseError(t.line, t.col, "VALUES arity does not match column list");
      }
      ins->rows.push_back(std::move(row));
    } while (accept_punct(","));
    stmt.op = Op::Insert;
    stmt.insert = std::move(ins);
  } else if (t.is_keyword("UPDATE")) {
    advance();
    auto upd = std::make_shared<UpdateStmt>();
    const Token& name = peek();
    if (name.kind != TokenKind::Ident) fail("expected table name");
    advance();
    upd->table = name.text;
    expect_keyword("SET");
    do {
      const Token& c = peek();
      if (c.kind != TokenKind::Ident) fail("expected column name");
      advance();
      expect_punct("=");
      upd->assignments.emplace_back(c.text, parse_expr());
    } while (accept_punct(","));
    if (accept_keyword("WHERE")) upd->where = parse_condition();
    stmt.op = Op::Update;
    stmt.update = std::move(upd);
  } else if (t.is_keyword("DELETE")) {
    advance();
    expect_keyword("FROM");
    auto del = std::make_shared<DeleteStmt>();
    const Token& name = peek();
    if (name.kind != TokenKind::Ident) fail("expected table name");
    advance();
    del->table = name.text;
    if (accept_keyword("WHERE")) del->where = parse_condition();
    stmt.op = Op::Delete;
    stmt.del = std::move(del);
  } else if (t.kind == TokenKind::Ident) {
    throw MonitorError(ErrorCode::Unsupported, "unsupported statement " + t.text);
  } else {
    fail("expected statement");
  }
  accept_punct(";");
  if (!at_end()) fail("unexpected trailing input");
  return stmt;
}

Statement parse_statement(const std::string& text) {
  Parser p(tokenize(text));
  return p.parse_statement();
}

std::vector<std::string> split_script(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  bool in_string = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      current.push_back(c);
      if (c == '\'') in_string = false;
      continue;
    }
    if (c == '\'') {
      in_string = true;
      current.push_back(c);
      continue;
    }
    if (c == '#') {
      while (i < text.size() && text[i] != '\n') ++i;
      current.push_back('\n');
      continue;
    }
    if (c == ';') {
      out.push_back(current);
      current.clear();
      continue;
    }
    current.push_back(c);
  }
  out.push_back(current);
  std::vector<std::string> trimmed;
  for (auto& s : out) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) continue;
    std::size_t b = s.find_last_not_of(" \t\r\n");
    trimmed.push_back(s.substr(a, b - a + 1));
  }
  return trimmed;
}

namespace {

std::string quote_text(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "''";
    else out.push_back(c);
  }
  out += "'";
  return out;
}

std::string value_sql(const Value& v) {
  if (v.is_null()) return "NULL";
  if (v.is_int()) return std::to_string(v.as_int());
  return quote_text(v.as_text());
}

const char* cmp_sql(CompareOp op) {
  switch (op) {
    case CompareOp::Eq: return "=";
    case CompareOp::Ne: return "<>";
    case CompareOp::Lt: return "<";
    case CompareOp::Le: return "<=";
    case CompareOp::Gt: return ">";
    case CompareOp::Ge: return ">=";
    case CompareOp::NullSafeEq: return "<=>";
  }
  return "=";
}

}  // namespace

std::string to_string(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Column:
      return e.qualifier.empty() ? e.column : e.qualifier + "." + e.column;
    case Expr::Kind::Literal:
      return value_sql(e.literal);
    case Expr::Kind::Lower:
      return "LOWER(" + to_string(e.args[0]) + ")";
    case Expr::Kind::Concat: {
      std::string out = "CONCAT(";
      for (std::size_t i = 0; i < e.args.size(); ++i) {
        if (i) out += ", ";
        out += to_string(e.args[i]);
      }
      return out + ")";
    }
    case Expr::Kind::Subselect:
      return "(" + to_string(*e.subselect) + ")";
  }
  return "?";
}

std::string to_string(const Condition& c) {
  switch (c.kind) {
    case Condition::Kind::Compare:
      return to_string(c.operands[0]) + " " + cmp_sql(c.cmp) + " " + to_string(c.operands[1]);
    case Condition::Kind::Like:
      return to_string(c.operands[0]) + (c.negated ? " NOT LIKE " : " LIKE ") + to_string(c.operands[1]);
    case Condition::Kind::IsNull:
      return to_string(c.operands[0]) + (c.negated ? " IS NOT NULL" : " IS NULL");
    case Condition::Kind::And:
      return "(" + to_string(c.children[0]) + " AND " + to_string(c.children[1]) + ")";
    case Condition::Kind::Or:
      return "(" + to_string(c.children[0]) + " OR " + to_string(c.children[1]) + ")";
    case Condition::Kind::Not:
      return "NOT (" + to_string(c.children[0]) + ")";
  }
  return "?";
}

std::string to_string(const SelectStmt& s) {
  std::ostringstream out;
  out << "SELECT ";
  if (s.count_star) {
    out << "COUNT(*)";
  } else if (s.star) {
    out << "*";
  } else {
    for (std::size_t i = 0; i < s.items.size(); ++i) {
      if (i) out << ", ";
      out << to_string(s.items[i].expr);
      if (!s.items[i].alias.empty()) out << " AS " << s.items[i].alias;
    }
  }
  out << " FROM ";
  for (std::size_t i = 0; i < s.from.size(); ++i) {
    if (i) out << ", ";
    out << s.from[i].table;
    if (!s.from[i].alias.empty()) out << " " << s.from[i].alias;
  }
  // joins are re-rendered as comma sources plus WHERE conjuncts
  std::vector<std::string> conds;
  for (const auto& jc : s.join_conditions) conds.push_back(to_string(jc));
  if (s.where) conds.push_back(to_string(*s.where));
  if (!conds.empty()) {
    out << " WHERE ";
    for (std::size_t i = 0; i < conds.size(); ++i) {
      if (i) out << " AND ";
      out << conds[i];
    }
  }
  return out.str();
}

std::string to_string(const Statement& stmt) {
  switch (stmt.op) {
    case Op::Select:
      return to_string(*stmt.select);
    case Op::Insert: {
      std::ostringstream out;
      out << "INSERT INTO " << stmt.insert->table << " (";
      for (std::size_t i = 0; i < stmt.insert->columns.size(); ++i) {
        if (i) out << ", ";
        out << stmt.insert->columns[i];
      }
      out << ") VALUES ";
      for (std::size_t r = 0; r < stmt.insert->rows.size(); ++r) {
        if (r) out << ", ";
        out << "(";
        for (std::size_t i = 0; i < stmt.insert->rows[r].size(); ++i) {
          if (i) out << ", ";
          out << value_sql(stmt.insert->rows[r][i]);
        }
        out << ")";
      }
      return out.str();
    }
    case Op::Update: {
      std::ostringstream out;
      out << "UPDATE " << stmt.update->table << " SET ";
      for (std::size_t i = 0; i < stmt.update->assignments.size(); ++i) {
        if (i) out << ", ";
        out << stmt.update->assignments[i].first << " = " << to_string(stmt.update->assignments[i].second);
      }
      if (stmt.update->where) out << " WHERE " << to_string(*stmt.update->where);
      return out.str();
    }
    case Op::Delete: {
      std::ostringstream out;
      out << "DELETE FROM " << stmt.del->table;
      if (stmt.del->where) out << " WHERE " << to_string(*stmt.del->where);
      return out.str();
    }
  }
  return "?";
}

}  // namespace crm::sql
