#pragma once

#include <string>
#include <vector>

#include "crm/errors.hpp"
#include "crm/sql_ast.hpp"

namespace crm::sql {

enum class TokenKind { Ident, String, Integer, Punct, End };

struct Token {
  TokenKind kind = TokenKind::End;
  std::string text;   // Ident: raw spelling; String: decoded content; Punct: symbol
  std::int64_t ival = 0;
  int line = 1;
  int col = 1;

  bool is_keyword(const char* kw) const;  // case-insensitive match on Ident
  bool is_punct(const char* p) const { return kind == TokenKind::Punct && text == p; }
};

// Tokenizes the shared lexical layer used by SQL statements, .db-files and
// invariant expressions: identifiers, 'single-quoted' strings ('' escapes),
// integers, punctuation, # line comments.
std::vector<Token> tokenize(const std::string& text);

// Recursive-descent parser over a token window. Exposed so the .db-file
// parser can embed SELECT parsing and continue from where it stopped.
class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}
  Parser(const std::vector<Token>* shared, std::size_t start) : view_(shared), pos_(start) {}

  Statement parse_statement();       // full statement, must consume to end
  SelectStmt parse_select();         // stops after the select body
  Condition parse_condition();
  Expr parse_expr();

  const Token& peek(std::size_t ahead = 0) const;
  const Token& advance();
  bool accept_keyword(const char* kw);
  void expect_keyword(const char* kw);
  bool accept_punct(const char* p);
  void expect_punct(const char* p);
  std::size_t position() const { return pos_; }
  bool at_end() const { return peek().kind == TokenKind::End; }

  [[noreturn]] void fail(const std::string& message) const;

 private:
  SelectStmt parse_select_body();
  TableRef parse_table_ref();
  Condition parse_or();
  Condition parse_and();
  Condition parse_not();
  Condition parse_predicate();
  Expr parse_primary();

  const std::vector<Token>& toks() const { return view_ ? *view_ : tokens_; }

  std::vector<Token> tokens_;
  const std::vector<Token>* view_ = nullptr;
  std::size_t pos_ = 0;
};

// Parses one statement of the supported subset (SELECT/INSERT/UPDATE/DELETE).
// Throws ParseError for malformed input and MonitorError(Unsupported) for
// recognized-but-unsupported constructs.
Statement parse_statement(const std::string& text);

// Splits a `;`-separated script into statement texts (quote-aware).
std::vector<std::string> split_script(const std::string& text);

}  // namespace crm::sql
