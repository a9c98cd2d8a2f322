#include "qiv/dataset.hpp"

#include "qiv/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace qiv {

IndexSet::IndexSet(std::vector<int> indices) : indices_(std::move(indices)) {
    std::sort(indices_.begin(), indices_.end());
    indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
}

IndexSet IndexSet::range(int begin, int end) {
    std::vector<int> v;
    for (int i = begin; i < end; ++i) v.push_back(i);
    return IndexSet(std::move(v));
}

IndexSet IndexSet::complement(int p) const {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(std::max(0, p - size())));
    auto it = indices_.begin();
    for (int j = 0; j < p; ++j) {
        while (it != indices_.end() && *it < j) ++it;
        if (it == indices_.end() || *it != j) out.push_back(j);
    }
    return IndexSet(std::move(out));
}

IndexSet IndexSet::compose(const IndexSet& positions) const {
    std::vector<int> out;
    for (int k : positions) {
        if (k < 0 || k >= size())
            throw validation_error("IndexOutOfRange", "position " + std::to_string(k));
        out.push_back(indices_[static_cast<std::size_t>(k)]);
    }
    return IndexSet(std::move(out));
}

bool IndexSet::contains(int index) const {
    return std::binary_search(indices_.begin(), indices_.end(), index);
}

void IndexSet::check_bounds(int p) const {
    if (!indices_.empty() && (indices_.front() < 0 || indices_.back() >= p))
        throw validation_error("IndexOutOfRange",
                               "index set not within [1, " + std::to_string(p) + "]");
}

Matrix gather_columns(const Matrix& m, const IndexSet& columns) {
    Matrix out(m.rows(), columns.size());
    for (int k = 0; k < columns.size(); ++k) out.col(k) = m.col(columns[k]);
    return out;
}

Vector gather(const Vector& v, const IndexSet& entries) {
    Vector out(entries.size());
    for (int k = 0; k < entries.size(); ++k) out(k) = v(entries[k]);
    return out;
}

Dataset::Dataset(Matrix X, Vector y) : X_(std::move(X)), y_(std::move(y)) {
    if (X_.rows() < 2) throw validation_error("TooFewObservations", "need n >= 2");
    if (X_.cols() < 1) throw validation_error("NoPredictors", "need p >= 1");
    if (y_.size() != X_.rows())
        throw validation_error("LengthMismatch", "y length differs from the row count of X");
    if (!X_.allFinite() || !y_.allFinite())
        throw validation_error("NonFiniteValue", "dataset contains NaN or infinite entries");
    column_means_ = Vector::Zero(X_.cols());
    column_scales_ = Vector::Ones(X_.cols());
}

Matrix Dataset::transform(const Matrix& X_raw) const {
    if (X_raw.cols() != X_.cols())
        throw validation_error("LengthMismatch", "column count differs from the training design");
    Matrix out = X_raw.rowwise() - column_means_.transpose();
    return out.array().rowwise() / column_scales_.transpose().array();
}

Dataset standardize(const Dataset& dataset) {
    const Matrix& X = dataset.X();
    const double n = static_cast<double>(X.rows());
    Vector means = X.colwise().mean().transpose();
    Matrix centered = X.rowwise() - means.transpose();
    Vector scales = (centered.colwise().squaredNorm() / n).array().sqrt().transpose();
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        if (!(scales(j) > 1e-12 * std::max(1.0, std::abs(means(j)))))
            throw validation_error("ZeroVarianceColumn",
                                   "column x" + std::to_string(j + 1) + " is constant");
    }

    Dataset out;
    out.X_ = centered.array().rowwise() / scales.transpose().array();
    const double ym = dataset.y().mean();
    out.y_ = dataset.y().array() - ym;
    out.y_mean_ = dataset.y_mean() + ym;
    out.column_means_ = dataset.column_means() + dataset.column_scales().cwiseProduct(means);
    out.column_scales_ = dataset.column_scales().cwiseProduct(scales);
    out.standardized_ = true;
    return out;
}

Partition partition(const Matrix& X, const IndexSet& selected) {
    const int p = static_cast<int>(X.cols());
    if (selected.empty()) throw validation_error("EmptySelection", "no predictors selected");
    selected.check_bounds(p);
    if (selected.size() == p)
        throw validation_error("FullSelection", "every predictor selected; U would be empty");
    Partition part;
    part.z_indices = selected;
    part.u_indices = selected.complement(p);
    part.Z = gather_columns(X, part.z_indices);
    part.U = gather_columns(X, part.u_indices);
    return part;
}

Partition partition(const Dataset& dataset, const IndexSet& selected) {
    return partition(dataset.X(), selected);
}

Matrix reassemble(const Partition& part) {
    Matrix X(part.Z.rows(), part.Z.cols() + part.U.cols());
    for (int k = 0; k < part.z_indices.size(); ++k) X.col(part.z_indices[k]) = part.Z.col(k);
    for (int k = 0; k < part.u_indices.size(); ++k) X.col(part.u_indices[k]) = part.U.col(k);
    return X;
}

int CsvTable::column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
        auto b = field.find_first_not_of(" \t\r");
        auto e = field.find_last_not_of(" \t\r");
        fields.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_number(const std::string& field, const std::string& origin, int line) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size())
        throw validation_error("MalformedCsv", origin + ":" + std::to_string(line) +
                                                   ": not a number: '" + field + "'");
    return v;
}

}  // namespace

CsvTable parse_csv(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    CsvTable table;
    int line_no = 0;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
            line.erase(0, 3);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto fields = split_line(line);
        if (table.header.empty()) {
            table.header = fields;
            continue;
        }
        if (fields.size() != table.header.size())
            throw validation_error("MalformedCsv", origin + ":" + std::to_string(line_no) +
                                                       ": expected " +
                                                       std::to_string(table.header.size()) +
                                                       " fields");
        std::vector<double> row;
        for (const auto& f : fields) row.push_back(parse_number(f, origin, line_no));
        rows.push_back(std::move(row));
    }
    if (table.header.empty()) throw validation_error("MalformedCsv", origin + ": empty file");
    table.values.resize(static_cast<Eigen::Index>(rows.size()),
                        static_cast<Eigen::Index>(table.header.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return table;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("FileNotReadable", path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), path);
}

Dataset dataset_from_csv(const CsvTable& table) {
    const auto& h = table.header;
    if (h.size() < 2 || h[0] != "y")
        throw validation_error("MalformedCsv", "header must start with y followed by x1..xp");
    for (std::size_t j = 1; j < h.size(); ++j)
        if (h[j] != "x" + std::to_string(j))
            throw validation_error("MalformedCsv", "expected column x" + std::to_string(j) +
                                                       ", found '" + h[j] + "'");
    const Eigen::Index p = table.values.cols() - 1;
    return Dataset(table.values.rightCols(p), table.values.col(0));
}

Dataset read_dataset(const std::string& path) { return dataset_from_csv(read_csv(path)); }

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    (void)ec;
    return std::string(buf, ptr);
}

void write_dataset(const std::string& path, const Matrix& X, const Vector& y) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("FileNotWritable", path);
    out << "y";
    for (Eigen::Index j = 0; j < X.cols(); ++j) out << ",x" << j + 1;
    out << '\n';
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        out << format_double(y(i));
        for (Eigen::Index j = 0; j < X.cols(); ++j) out << ',' << format_double(X(i, j));
        out << '\n';
    }
    if (!out) throw io_error("FileNotWritable", path);
}

}  // namespace qiv
