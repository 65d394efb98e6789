#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace splitee {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

/// One observation: a contiguous row of a Dataset, in the column order the
/// consuming model declared.
using Observation = std::span<const double>;

/// Column-named numeric table. Rows are observations and are stored
/// contiguously so a model can read a row as an Observation.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<std::string> names, RowMatrix values);

  Index rows() const { return values_.rows(); }
  Index cols() const { return values_.cols(); }

  Observation row(Index i) const {
    return {values_.data() + i * values_.cols(), static_cast<std::size_t>(values_.cols())};
  }

  const std::vector<std::string>& names() const { return names_; }
  const RowMatrix& values() const { return values_; }

  std::optional<Index> find(std::string_view name) const;

  /// Throws SchemaMismatch naming the column when absent.
  Vector column(std::string_view name) const;

  /// Reorders/projects onto `names`; throws SchemaMismatch naming the first
  /// missing column.
  Dataset select(const std::vector<std::string>& names) const;

  /// Rows of `this` followed by rows of `other`; column names must agree.
  Dataset append_rows(const Dataset& other) const;

  Dataset permute_rows(std::span<const Index> order) const;

 private:
  std::vector<std::string> names_;
  RowMatrix values_;
};

}  // namespace splitee
