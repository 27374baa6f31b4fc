#pragma once

#include <functional>
#include <string>

#include "crm/relation.hpp"
#include "crm/sql_ast.hpp"

namespace crm::sql {

// Supplies the contents of a FROM source by its (already sandboxed) logical
// name. Throwing is the resolver's way of rejecting a name.
using RelationResolver = std::function<Relation(const std::string& table)>;

// Evaluates a SELECT against resolved relations: nested-loop join over the
// FROM list, Kleene three-valued WHERE, projection with aliases. Sub-select
// expressions must have been substituted by literals beforehand.
Relation evaluate_select(const SelectStmt& stmt, const RelationResolver& resolve);

// SQL LIKE with % and _ wildcards, case-sensitive.
bool like_match(const std::string& text, const std::string& pattern);

// Condition over a single relation row; Unknown counts as no match.
// UPDATE/DELETE row matching uses this.
bool condition_matches(const Condition& cond, const Relation& rel, std::size_t row);

// Scalar expression over a single relation row.
Value expr_value(const Expr& expr, const Relation& rel, std::size_t row);

}  // namespace crm::sql
