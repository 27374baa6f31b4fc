#include "crm/query_eval.hpp"

#include <algorithm>
#include <cctype>
#include <optional>

#include "crm/errors.hpp"

namespace crm::sql {

namespace {

enum class Tri { True, False, Unknown };

Tri tri_not(Tri t) {
  if (t == Tri::True) return Tri::False;
  if (t == Tri::False) return Tri::True;
  return Tri::Unknown;
}

Tri tri_and(Tri a, Tri b) {
  if (a == Tri::False || b == Tri::False) return Tri::False;
  if (a == Tri::True && b == Tri::True) return Tri::True;
  return Tri::Unknown;
}

Tri tri_or(Tri a, Tri b) {
  if (a == Tri::True || b == Tri::True) return Tri::True;
  if (a == Tri::False && b == Tri::False) return Tri::False;
  return Tri::Unknown;
}

// One source in the joined row: alias plus column slice offsets.
struct Source {
  std::string name;  // effective name (alias or table)
  std::size_t offset;
  Relation rel;
};

struct JoinEnv {
  std::vector<Source> sources;
  const std::vector<Value>* current = nullptr;  // concatenated row

  // Resolves a column reference to an index in the concatenated row.
  std::size_t bind(const Expr& e) const {
    int found = -1;
    if (!e.qualifier.empty()) {
      for (const auto& s : sources) {
        if (s.name != e.qualifier) continue;
        int idx = s.rel.column_index(e.column);
        if (idx < 0) {
          throw MonitorError(ErrorCode::Syntax, "unknown column " + e.qualifier + "." + e.column);
        }
        return s.offset + static_cast<std::size_t>(idx);
      }
      throw MonitorError(ErrorCode::Syntax, "unknown table alias " + e.qualifier);
    }
    for (const auto& s : sources) {
      int idx = s.rel.column_index(e.column);
      if (idx >= 0) {
        if (found >= 0) throw MonitorError(ErrorCode::Syntax, "ambiguous column " + e.column);
        found = static_cast<int>(s.offset) + idx;
      }
    }
    if (found < 0) throw MonitorError(ErrorCode::Syntax, "unknown column " + e.column);
    return static_cast<std::size_t>(found);
  }
};

std::string lower_ascii(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

Value eval_expr(const Expr& e, const JoinEnv& env) {
  switch (e.kind) {
    case Expr::Kind::Literal:
      return e.literal;
    case Expr::Kind::Column:
      return (*env.current)[env.bind(e)];
    case Expr::Kind::Lower: {
      Value v = eval_expr(e.args[0], env);
      if (v.is_null()) return Value::null();
      return Value::text(lower_ascii(v.render()));
    }
    case Expr::Kind::Concat: {
      std::string out;
      for (const auto& a : e.args) {
        Value v = eval_expr(a, env);
        if (v.is_null()) return Value::null();
        out += v.render();
      }
      return Value::text(out);
    }
    case Expr::Kind::Subselect:
      throw MonitorError(ErrorCode::Unsupported,
                         "sub-select is only supported in UPDATE SET expressions");
  }
  return Value::null();
}

int compare_values(const Value& a, const Value& b) {
  if (a.is_int() && b.is_int()) {
    if (a.as_int() < b.as_int()) return -1;
    if (a.as_int() > b.as_int()) return 1;
    return 0;
  }
  // mixed or textual comparison falls back to the rendered form
  return a.render().compare(b.render());
}

Tri eval_condition(const Condition& c, const JoinEnv& env) {
  switch (c.kind) {
    case Condition::Kind::Compare: {
      Value a = eval_expr(c.operands[0], env);
      Value b = eval_expr(c.operands[1], env);
      if (c.cmp == CompareOp::NullSafeEq) {
        return null_safe_equal(a, b) ? Tri::True : Tri::False;
      }
      if (a.is_null() || b.is_null()) return Tri::Unknown;
      int r = compare_values(a, b);
      bool ok = false;
      switch (c.cmp) {
        case CompareOp::Eq: ok = r == 0; break;
        case CompareOp::Ne: ok = r != 0; break;
        case CompareOp::Lt: ok = r < 0; break;
        case CompareOp::Le: ok = r <= 0; break;
        case CompareOp::Gt: ok = r > 0; break;
        case CompareOp::Ge: ok = r >= 0; break;
        case CompareOp::NullSafeEq: break;
      }
      return ok ? Tri::True : Tri::False;
    }
    case Condition::Kind::Like: {
      Value text = eval_expr(c.operands[0], env);
      Value pat = eval_expr(c.operands[1], env);
      if (text.is_null() || pat.is_null()) return Tri::Unknown;
      bool m = like_match(text.render(), pat.render());
      if (c.negated) m = !m;
      return m ? Tri::True : Tri::False;
    }
    case Condition::Kind::IsNull: {
      Value v = eval_expr(c.operands[0], env);
      bool isnull = v.is_null();
      if (c.negated) isnull = !isnull;
      return isnull ? Tri::True : Tri::False;
    }
    case Condition::Kind::And:
      return tri_and(eval_condition(c.children[0], env), eval_condition(c.children[1], env));
    case Condition::Kind::Or:
      return tri_or(eval_condition(c.children[0], env), eval_condition(c.children[1], env));
    case Condition::Kind::Not:
      return tri_not(eval_condition(c.children[0], env));
  }
  return Tri::Unknown;
}

std::string derive_name(const Expr& e) {
  if (e.kind == Expr::Kind::Column) return e.column;
  return to_string(e);
}

}  // namespace

bool like_match(const std::string& text, const std::string& pattern) {
  std::size_t n = text.size();
  std::size_t m = pattern.size();
  // dp[j]: pattern[0..j) matches current text prefix
  std::vector<char> dp(m + 1, 0);
  std::vector<char> next(m + 1, 0);
  dp[0] = 1;
  for (std::size_t j = 1; j <= m; ++j) dp[j] = dp[j - 1] && pattern[j - 1] == '%';
  for (std::size_t i = 1; i <= n; ++i) {
    std::fill(next.begin(), next.end(), 0);
    for (std::size_t j = 1; j <= m; ++j) {
      char p = pattern[j - 1];
      if (p == '%') {
        next[j] = next[j - 1] || dp[j];
      } else if (p == '_' || p == text[i - 1]) {
        next[j] = dp[j - 1];
      }
    }
    std::swap(dp, next);
  }
  return dp[m] != 0;
}

namespace {

JoinEnv single_row_env(const Relation& rel) {
  JoinEnv env;
  Source s;
  s.name = "";
  s.offset = 0;
  s.rel.columns = rel.columns;
  env.sources.push_back(std::move(s));
  return env;
}

}  // namespace

bool condition_matches(const Condition& cond, const Relation& rel, std::size_t row) {
  JoinEnv env = single_row_env(rel);
  env.current = &rel.rows[row];
  return eval_condition(cond, env) == Tri::True;
}

Value expr_value(const Expr& expr, const Relation& rel, std::size_t row) {
  JoinEnv env = single_row_env(rel);
  env.current = &rel.rows[row];
  return eval_expr(expr, env);
}

Relation evaluate_select(const SelectStmt& stmt, const RelationResolver& resolve) {
  JoinEnv env;
  std::size_t offset = 0;
  for (const auto& ref : stmt.from) {
    Source s;
    s.name = ref.effective_name();
    s.offset = offset;
    s.rel = resolve(ref.table);
    offset += s.rel.columns.size();
    env.sources.push_back(std::move(s));
  }

  // materialize the cross product lazily via index counters
  std::vector<std::size_t> idx(env.sources.size(), 0);
  std::vector<std::vector<Value>> matched;
  bool any_empty = false;
  for (const auto& s : env.sources) {
    if (s.rel.rows.empty()) any_empty = true;
  }
  if (!any_empty) {
    for (;;) {
      std::vector<Value> joined;
      for (std::size_t k = 0; k < env.sources.size(); ++k) {
        const auto& r = env.sources[k].rel.rows[idx[k]];
        joined.insert(joined.end(), r.begin(), r.end());
      }
      env.current = &joined;
      bool pass = true;
      for (const auto& jc : stmt.join_conditions) {
        if (eval_condition(jc, env) != Tri::True) {
          pass = false;
          break;
        }
      }
      if (pass && stmt.where) {
        pass = eval_condition(*stmt.where, env) == Tri::True;
      }
      if (pass) matched.push_back(joined);
      // increment
      std::size_t k = env.sources.size();
      while (k > 0) {
        --k;
        if (++idx[k] < env.sources[k].rel.rows.size()) break;
        idx[k] = 0;
        if (k == 0) {
          k = SIZE_MAX;
          break;
        }
      }
      if (k == SIZE_MAX) break;
    }
  }

  Relation out;
  if (stmt.count_star) {
    out.columns = {"COUNT(*)"};
    out.rows.push_back({Value::integer(static_cast<std::int64_t>(matched.size()))});
    return out;
  }
  if (stmt.star) {
    for (const auto& s : env.sources) {
      out.columns.insert(out.columns.end(), s.rel.columns.begin(), s.rel.columns.end());
    }
    out.rows = std::move(matched);
    return out;
  }
  for (const auto& item : stmt.items) {
    out.columns.push_back(item.alias.empty() ? derive_name(item.expr) : item.alias);
  }
  for (const auto& row : matched) {
    env.current = &row;
    std::vector<Value> projected;
    projected.reserve(stmt.items.size());
    for (const auto& item : stmt.items) {
      projected.push_back(eval_expr(item.expr, env));
    }
    out.rows.push_back(std::move(projected));
  }
  return out;
}

}  // namespace crm::sql
