#pragma once

#include <Eigen/Dense>

#include <initializer_list>
#include <string>
#include <vector>

namespace qiv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Strictly increasing set of zero-based column indices.
///
/// Files and user-facing output use one-based indices (x1..xp); the
/// conversion happens only at the I/O boundary.
class IndexSet {
public:
    IndexSet() = default;
    /// Sorts and deduplicates.
    explicit IndexSet(std::vector<int> indices);
    IndexSet(std::initializer_list<int> indices) : IndexSet(std::vector<int>(indices)) {}

    static IndexSet range(int begin, int end);
    /// {0..p-1} minus *this.
    IndexSet complement(int p) const;
    /// Maps positions within *this to the indices they name.
    IndexSet compose(const IndexSet& positions) const;

    bool contains(int index) const;
    /// Throws IndexOutOfRange unless every index lies in [0, p).
    void check_bounds(int p) const;

    int size() const { return static_cast<int>(indices_.size()); }
    bool empty() const { return indices_.empty(); }
    int operator[](int k) const { return indices_[static_cast<std::size_t>(k)]; }
    const std::vector<int>& values() const { return indices_; }
    auto begin() const { return indices_.begin(); }
    auto end() const { return indices_.end(); }

    bool operator==(const IndexSet&) const = default;

private:
    std::vector<int> indices_;
};

/// Gathers the columns of `m` named by `columns`, in index order.
Matrix gather_columns(const Matrix& m, const IndexSet& columns);
Vector gather(const Vector& v, const IndexSet& entries);

/// Design matrix and response together with the affine map that
/// standardization applied to them.
class Dataset {
public:
    /// Raw data; validates finiteness, n >= 2 and p >= 1.
    Dataset(Matrix X, Vector y);

    const Matrix& X() const { return X_; }
    const Vector& y() const { return y_; }
    const Vector& column_means() const { return column_means_; }
    const Vector& column_scales() const { return column_scales_; }
    /// Mean removed from y by standardization (0 for raw data).
    double y_mean() const { return y_mean_; }
    bool standardized() const { return standardized_; }
    int n() const { return static_cast<int>(X_.rows()); }
    int p() const { return static_cast<int>(X_.cols()); }

    /// y on its original scale.
    Vector raw_y() const { return y_.array() + y_mean_; }

    /// Applies the recorded column map to new rows on the raw scale.
    Matrix transform(const Matrix& X_raw) const;

private:
    friend Dataset standardize(const Dataset& dataset);
    Dataset() = default;

    Matrix X_;
    Vector y_;
    Vector column_means_;
    Vector column_scales_;
    double y_mean_ = 0.0;
    bool standardized_ = false;
};

/// Centers and scales every column of X to mean 0 and population
/// variance 1 (divide-by-n), and centers y. Applying it twice composes
/// the affine maps, so the recorded means/scales always refer to the
/// original data.
Dataset standardize(const Dataset& dataset);

/// Column split of a design into kept predictors Z and removed predictors U.
struct Partition {
    Matrix Z;
    Matrix U;
    IndexSet z_indices;
    IndexSet u_indices;
};

/// Throws EmptySelection, FullSelection or IndexOutOfRange.
Partition partition(const Matrix& X, const IndexSet& selected);
Partition partition(const Dataset& dataset, const IndexSet& selected);
/// Inverse of partition.
Matrix reassemble(const Partition& part);

/// Comma-separated table with a header row.
struct CsvTable {
    std::vector<std::string> header;
    Matrix values;

    /// Position of a named column, or -1.
    int column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text, const std::string& origin = "<memory>");

/// Expects columns y, x1..xp in that order.
Dataset dataset_from_csv(const CsvTable& table);
Dataset read_dataset(const std::string& path);
void write_dataset(const std::string& path, const Matrix& X, const Vector& y);

/// Shortest round-trip decimal representation.
std::string format_double(double value);

}  // namespace qiv
