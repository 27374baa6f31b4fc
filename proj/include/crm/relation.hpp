#pragma once

#include <string>
#include <vector>

#include "crm/value.hpp"

namespace crm {

// Per-row provenance carried by raw relations (store tables and compiled
// input views). Projection results drop it.
struct RowMeta {
  std::string item_id;  // stable data-item identity
  std::string src;      // providing component
};

struct Relation {
  std::vector<std::string> columns;
  std::vector<std::vector<Value>> rows;
  std::vector<RowMeta> meta;  // parallel to rows when tracked, else empty

  int column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) return static_cast<int>(i);
    }
    return -1;
  }
};

}  // namespace crm
