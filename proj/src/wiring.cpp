#include "crm/wiring.hpp"

#include <algorithm>
#include <sstream>

#include "crm/errors.hpp"
#include "crm/sql_parser.hpp"

namespace crm::wiring {

namespace {

using sql::Token;
using sql::TokenKind;

}  // namespace

std::vector<WiringSpec> parse_wirings(const std::string& text) {
  sql::Parser p(sql::tokenize(text));
  std::vector<WiringSpec> out;
  while (!p.at_end()) {
    p.expect_keyword("WIRE");
    WiringSpec spec;
    auto parse_endpoint = [&](std::string& comp, std::string& table) {
      const Token& c = p.peek();
      if (c.kind != TokenKind::Ident) p.fail("expected component name");
      p.advance();
      p.expect_punct(".");
      const Token& t = p.peek();
      if (t.kind != TokenKind::Ident) p.fail("expected table name");
      p.advance();
      comp = c.text;
      table = t.text;
    };
    parse_endpoint(spec.source_component, spec.source_output);
    p.expect_punct("->");
    parse_endpoint(spec.target_component, spec.target_input);
    while (!p.at_end() && !p.peek().is_keyword("WIRE")) {
      ColumnMapping m;
      const Token& target = p.peek();
      if (target.kind != TokenKind::Ident) p.fail("expected target column");
      p.advance();
      m.target_column = target.text;
      p.expect_punct("<-");
      const Token& src = p.peek();
      if (src.kind == TokenKind::String) {
        p.advance();
        m.is_constant = true;
        m.constant = Value::text(src.text);
      } else if (src.kind == TokenKind::Integer) {
        p.advance();
        m.is_constant = true;
        m.constant = Value::integer(src.ival);
      } else if (src.kind == TokenKind::Ident) {
        p.advance();
        m.source_column = src.text;
      } else {
        p.fail("expected source column or constant");
      }
      spec.column_map.push_back(std::move(m));
    }
    out.push_back(std::move(spec));
  }
  return out;
}

std::string serialize(const WiringSpec& spec) {
  std::ostringstream out;
  out << "WIRE " << spec.source_component << "." << spec.source_output << " -> "
      << spec.target_component << "." << spec.target_input << "\n";
  for (const auto& m : spec.column_map) {
    out << "  " << m.target_column << " <- ";
    if (m.is_constant) {
      if (m.constant.is_int()) {
        out << m.constant.as_int();
      } else {
        out << "'";
        for (char c : m.constant.render()) {
          if (c == '\'') out << "''";
          else out << c;
        }
        out << "'";
      }
    } else {
      out << m.source_column;
    }
    out << "\n";
  }
  return out.str();
}

namespace {

bool pred_args_valid(const schema::InvariantExpr& e, const std::vector<std::string>& projection) {
  for (const auto& a : e.args) {
    if (a.kind == schema::InvariantArg::Kind::Column &&
        std::find(projection.begin(), projection.end(), a.column) == projection.end()) {
      throw MonitorError(ErrorCode::Syntax,
                         "invariant references column " + a.column + " absent from the projection");
    }
  }
  return true;
}

void validate_invariant(const schema::InvariantExpr& e, const std::vector<std::string>& projection,
                        const std::map<std::string, std::size_t>& pred_arities) {
  switch (e.kind) {
    case schema::InvariantExpr::Kind::All:
      return;
    case schema::InvariantExpr::Kind::Is:
      pred_args_valid(e, projection);
      return;
    case schema::InvariantExpr::Kind::Pred: {
      pred_args_valid(e, projection);
      auto it = pred_arities.find(e.pred_table);
      if (it == pred_arities.end()) {
        throw MonitorError(ErrorCode::Syntax, "unknown predicate table " + e.pred_table);
      }
      if (it->second != e.args.size()) {
        throw MonitorError(ErrorCode::Syntax,
                           "predicate " + e.pred_table + " expects " + std::to_string(it->second) +
                               " arguments, got " + std::to_string(e.args.size()));
      }
      return;
    }
    case schema::InvariantExpr::Kind::And:
    case schema::InvariantExpr::Kind::Or:
      for (const auto& c : e.children) validate_invariant(c, projection, pred_arities);
      return;
  }
}

Value bind_arg(const schema::InvariantArg& a, const std::vector<Value>& row,
               const std::vector<std::string>& projection, const std::string& uid) {
  switch (a.kind) {
    case schema::InvariantArg::Kind::Uid:
      return Value::text(uid);
    case schema::InvariantArg::Kind::Constant:
      return a.constant;
    case schema::InvariantArg::Kind::Column: {
      for (std::size_t i = 0; i < projection.size(); ++i) {
        if (projection[i] == a.column) return row[i];
      }
      throw MonitorError(ErrorCode::Syntax, "invariant column " + a.column + " not in row");
    }
  }
  return Value::null();
}

bool eval_invariant(const schema::InvariantExpr& e, const std::vector<Value>& row,
                    const std::vector<std::string>& projection, const std::string& uid,
                    const RestrictionCondition::PredResolver& preds) {
  switch (e.kind) {
    case schema::InvariantExpr::Kind::All:
      return true;
    case schema::InvariantExpr::Kind::Is: {
      Value a = bind_arg(e.args[0], row, projection, uid);
      Value b = bind_arg(e.args[1], row, projection, uid);
      return null_safe_equal(a, b);
    }
    case schema::InvariantExpr::Kind::Pred: {
      auto rel = preds(e.pred_table);
      if (!rel) {
        throw MonitorError(ErrorCode::Syntax, "unknown predicate table " + e.pred_table);
      }
      if (rel->columns.size() != e.args.size()) {
        throw MonitorError(ErrorCode::Syntax, "predicate arity mismatch for " + e.pred_table);
      }
      std::vector<Value> bound;
      bound.reserve(e.args.size());
      for (const auto& a : e.args) bound.push_back(bind_arg(a, row, projection, uid));
      bool exists = false;
      for (const auto& candidate : rel->rows) {
        bool match = true;
        for (std::size_t i = 0; i < bound.size(); ++i) {
          // SQL equality inside EXISTS: NULL matches nothing
          if (candidate[i].is_null() || bound[i].is_null() ||
              !null_safe_equal(candidate[i], bound[i])) {
            match = false;
            break;
          }
        }
        if (match) {
          exists = true;
          break;
        }
      }
      return e.negated ? !exists : exists;
    }
    case schema::InvariantExpr::Kind::And:
      return eval_invariant(e.children[0], row, projection, uid, preds) &&
             eval_invariant(e.children[1], row, projection, uid, preds);
    case schema::InvariantExpr::Kind::Or:
      return eval_invariant(e.children[0], row, projection, uid, preds) ||
             eval_invariant(e.children[1], row, projection, uid, preds);
  }
  return false;
}

}  // namespace

bool RestrictionCondition::evaluate(const std::vector<Value>& row, const std::string& uid,
                                    const PredResolver& preds) const {
  return eval_invariant(inv_, row, projection_, uid, preds);
}

RestrictionCondition compile_restriction(const schema::InvariantExpr& inv,
                                         const std::vector<std::string>& projection,
                                         const std::map<std::string, std::size_t>& pred_arities) {
  validate_invariant(inv, projection, pred_arities);
  RestrictionCondition c;
  c.inv_ = inv;
  c.projection_ = projection;
  return c;
}

std::vector<std::string> check_wiring(const WiringSpec& spec, const WiringCatalog& catalog,
                                      const graph::EcosystemGraph& g) {
  std::vector<std::string> diags;
  if (!catalog.is_integrated(spec.source_component)) {
    diags.push_back("source component " + spec.source_component + " is not integrated");
  }
  if (!catalog.is_integrated(spec.target_component)) {
    diags.push_back("target component " + spec.target_component + " is not integrated");
  }
  if (!diags.empty()) return diags;

  const schema::InputTableDecl* input =
      catalog.find_input(spec.target_component, spec.target_input);
  if (!input) {
    diags.push_back("unknown input table " + spec.target_component + "." + spec.target_input);
  }
  auto signature = catalog.find_output_signature(spec.source_component, spec.source_output);
  if (!signature) {
    diags.push_back("unknown output table " + spec.source_component + "." + spec.source_output);
  }
  if (!input || !signature) return diags;

  auto source_type = [&](const std::string& col) -> const schema::ColumnType* {
    for (const auto& [name, type] : *signature) {
      if (name == col) return &type;
    }
    return nullptr;
  };

  std::map<std::string, std::size_t> mapped_count;
  for (const auto& m : spec.column_map) {
    const schema::ColumnDecl* target = input->find(m.target_column);
    if (!target) {
      diags.push_back("unknown target column " + m.target_column);
      continue;
    }
    ++mapped_count[m.target_column];
    bool is_marker = target->type.is_key() || target->type.is_owner();
    if (m.is_constant) {
      if (is_marker) {
        diags.push_back("target column " + m.target_column +
                        " is a " + target->type.to_string() + " marker and cannot map to a constant");
        continue;
      }
      if (target->type.is_int() && !m.constant.is_int()) {
        diags.push_back("constant for INT column " + m.target_column + " must be numeric");
      }
      continue;
    }
    const schema::ColumnType* st = source_type(m.source_column);
    if (!st) {
      diags.push_back("source output has no column " + m.source_column);
      continue;
    }
    if (target->type.is_key() && m.source_column != "key") {
      diags.push_back("target KEY column " + m.target_column + " must map to the source's key");
    }
    if (target->type.is_owner() && m.source_column != "owner") {
      diags.push_back("target OWNER column " + m.target_column +
                      " must map to the source's owner");
    }
    if (target->type.is_int() && !st->is_int()) {
      diags.push_back("type mismatch: " + m.target_column + " is INT but " + m.source_column +
                      " is " + st->to_string());
    }
  }
  for (const auto& c : input->columns) {
    auto it = mapped_count.find(c.name);
    if (it == mapped_count.end()) {
      diags.push_back("target column " + c.name + " is unmapped");
    } else if (it->second > 1) {
      diags.push_back("target column " + c.name + " is mapped more than once");
    }
  }

  if (auto reason = g.can_add_sharing(spec.source_component, spec.target_component)) {
    diags.push_back(*reason);
  }
  return diags;
}

CompiledInputView compile_input_view(const std::string& target_component,
                                     const std::string& target_input,
                                     const std::vector<WiringSpec>& wirings) {
  CompiledInputView view;
  view.target_component = target_component;
  view.target_input = target_input;
  for (const auto& w : wirings) {
    if (w.target_component == target_component && w.target_input == target_input) {
      view.branches.push_back(w);
    }
  }
  return view;
}

Relation evaluate_unrestricted_output(const ViewHost& host, const std::string& component,
                                      const std::string& output) {
  auto info = host.output_info(component, output);
  if (!info) throw MonitorError(ErrorCode::UnknownTable, "unknown output table " + output);
  return host.evaluate_in_namespace(component, info->output->query, "", false);
}

Relation evaluate_restricted_output(const ViewHost& host, const std::string& component,
                                    const std::string& output, const std::string& uid) {
  auto info = host.output_info(component, output);
  if (!info) throw MonitorError(ErrorCode::UnknownTable, "unknown output table " + output);
  Relation unrestricted = host.evaluate_in_namespace(component, info->output->query, uid, true);
  Relation restricted;
  restricted.columns = unrestricted.columns;
  auto preds = [&](const std::string& table) {
    return host.predicate_relation(component, table, uid);
  };
  for (const auto& row : unrestricted.rows) {
    if (info->restriction->evaluate(row, uid, preds)) restricted.rows.push_back(row);
  }
  return restricted;
}

std::string namespaced_key(const std::string& source_component, const Value& key) {
  return source_component + ":" + key.render();
}

Relation evaluate_input_view(const ViewHost& host, const CompiledInputView& view,
                             const schema::InputTableDecl& decl, const std::string& uid,
                             bool restricted) {
  Relation out;
  for (const auto& c : decl.columns) out.columns.push_back(c.name);

  for (const auto& branch : view.branches) {
    Relation source =
        restricted
            ? evaluate_restricted_output(host, branch.source_component, branch.source_output, uid)
            : evaluate_unrestricted_output(host, branch.source_component, branch.source_output);
    auto col_index = [&](const std::string& name) {
      int idx = source.column_index(name);
      if (idx < 0) {
        throw MonitorError(ErrorCode::Syntax, "wiring " + branch.describe() +
                                                  ": source column " + name + " missing");
      }
      return static_cast<std::size_t>(idx);
    };
    for (const auto& srow : source.rows) {
      std::vector<Value> trow(decl.columns.size(), Value::null());
      for (const auto& m : branch.column_map) {
        int tidx = -1;
        for (std::size_t i = 0; i < decl.columns.size(); ++i) {
          if (decl.columns[i].name == m.target_column) tidx = static_cast<int>(i);
        }
        if (tidx < 0) continue;  // checked at wiring time
        Value v = m.is_constant ? m.constant : srow[col_index(m.source_column)];
        if (decl.columns[tidx].type.is_key()) {
          v = Value::text(namespaced_key(branch.source_component, v));
        } else if (decl.columns[tidx].type.is_text_family() && v.is_int()) {
          v = Value::text(v.render());
        }
        trow[tidx] = v;
      }
      std::string key_text;
      for (std::size_t i = 0; i < decl.columns.size(); ++i) {
        if (decl.columns[i].type.is_key()) key_text = trow[i].render();
      }
      out.rows.push_back(std::move(trow));
      out.meta.push_back(RowMeta{
          "view:" + view.target_component + "." + view.target_input + "#" + key_text,
          branch.source_component});
    }
  }
  return out;
}

}  // namespace crm::wiring
