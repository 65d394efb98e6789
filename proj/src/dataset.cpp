#include "splitee/types.hpp"

#include "splitee/errors.hpp"

#include <algorithm>

namespace splitee {

Dataset::Dataset(std::vector<std::string> names, RowMatrix values)
    : names_(std::move(names)), values_(std::move(values)) {
  if (static_cast<Index>(names_.size()) != values_.cols()) {
    fail(ErrorKind::InvalidArgument, "dataset has " + std::to_string(names_.size()) +
                                         " names for " + std::to_string(values_.cols()) +
                                         " columns");
  }
}

std::optional<Index> Dataset::find(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<Index>(it - names_.begin());
}

Vector Dataset::column(std::string_view name) const {
  auto j = find(name);
  if (!j) fail(ErrorKind::SchemaMismatch, "missing column '" + std::string(name) + "'");
  return values_.col(*j);
}

Dataset Dataset::select(const std::vector<std::string>& names) const {
  RowMatrix out(rows(), static_cast<Index>(names.size()));
  for (std::size_t k = 0; k < names.size(); ++k) {
    auto j = find(names[k]);
    if (!j) fail(ErrorKind::SchemaMismatch, "missing column '" + names[k] + "'");
    out.col(static_cast<Index>(k)) = values_.col(*j);
  }
  return Dataset(names, std::move(out));
}

Dataset Dataset::append_rows(const Dataset& other) const {
  if (other.names_ != names_) fail(ErrorKind::SchemaMismatch, "append_rows: column names differ");
  RowMatrix out(rows() + other.rows(), cols());
  out.topRows(rows()) = values_;
  out.bottomRows(other.rows()) = other.values_;
  return Dataset(names_, std::move(out));
}

Dataset Dataset::permute_rows(std::span<const Index> order) const {
  if (static_cast<Index>(order.size()) != rows()) {
    fail(ErrorKind::InvalidArgument, "permute_rows: order length differs from row count");
  }
  RowMatrix out(rows(), cols());
  for (Index i = 0; i < rows(); ++i) out.row(i) = values_.row(order[static_cast<std::size_t>(i)]);
  return Dataset(names_, std::move(out));
}

}  // namespace splitee
