#include "support.hpp"

#include "qiv/dataset.hpp"
#include "qiv/error.hpp"

#include <doctest.h>

#include <numeric>

using namespace qiv;
using qiv::test::gaussian_matrix;
using qiv::test::gaussian_vector;
using qiv::test::error_kind;

namespace {

void check_standardized(const Dataset& d) {
    const double n = d.n();
    for (int j = 0; j < d.p(); ++j) {
        const Vector c = d.X().col(j);
        CHECK(std::abs(c.mean()) < 1e-10);
        CHECK(std::abs(c.squaredNorm() / n - 1.0) < 1e-8);
    }
    CHECK(std::abs(d.y().mean()) < 1e-10);
}

}  // namespace

TEST_CASE("standardize: identity on an already standardized column") {
    Matrix X(4, 1);
    X << -1, 1, -1, 1;
    Vector y(4);
    y << 1, 2, 3, 4;
    const Dataset s = standardize(Dataset(X, y));
    CHECK((s.X() - X).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(s.column_means()(0) == doctest::Approx(0.0));
    CHECK(s.column_scales()(0) == doctest::Approx(1.0));
}

TEST_CASE("standardize: two-point column uses the divide-by-n convention") {
    Matrix X(2, 1);
    X << 0, 2;
    const Dataset s = standardize(Dataset(X, Vector::Zero(2)));
    CHECK(s.column_means()(0) == doctest::Approx(1.0));
    CHECK(s.column_scales()(0) == doctest::Approx(1.0));
    CHECK(s.X()(0, 0) == doctest::Approx(-1.0));
    CHECK(s.X()(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("standardize: idempotent and invariants hold") {
    std::mt19937_64 rng(11);
    Matrix X = gaussian_matrix(30, 5, rng) * 3.0;
    X.col(2).array() += 7.0;
    const Dataset once = standardize(Dataset(X, gaussian_vector(30, rng).array() + 4.0));
    const Dataset twice = standardize(once);
    check_standardized(once);
    CHECK((once.X() - twice.X()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((once.y() - twice.y()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((once.column_means() - twice.column_means()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((once.column_scales() - twice.column_scales()).cwiseAbs().maxCoeff() < 1e-10);
    // The recorded map refers to the original data.
    CHECK((twice.transform(X) - once.X()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(twice.y_mean() == doctest::Approx(once.y_mean()));
}

TEST_CASE("standardize: constant column is rejected") {
    Matrix X(5, 3);
    X.setRandom();
    X.col(1).setConstant(2.5);
    CHECK(error_kind([&] { standardize(Dataset(X, Vector::Zero(5))); }) == "ZeroVarianceColumn");
}

TEST_CASE("standardize commutes with row permutation") {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        const Matrix X = gaussian_matrix(25, 4, rng);
        const Vector y = gaussian_vector(25, rng);
        std::vector<int> perm(25);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Matrix Xp(25, 4);
        Vector yp(25);
        for (int i = 0; i < 25; ++i) {
            Xp.row(i) = X.row(perm[i]);
            yp(i) = y(perm[i]);
        }
        const Dataset a = standardize(Dataset(X, y));
        const Dataset b = standardize(Dataset(Xp, yp));
        for (int i = 0; i < 25; ++i) {
            CHECK((b.X().row(i) - a.X().row(perm[i])).cwiseAbs().maxCoeff() < 1e-12);
            CHECK(std::abs(b.y()(i) - a.y()(perm[i])) < 1e-12);
        }
    }
}

TEST_CASE("dataset rejects bad shapes and non-finite values") {
    CHECK(error_kind([] { Dataset(Matrix::Zero(1, 2), Vector::Zero(1)); }) == "TooFewObservations");
    CHECK(error_kind([] { Dataset(Matrix::Zero(3, 0), Vector::Zero(3)); }) == "NoPredictors");
    Matrix X = Matrix::Ones(3, 2);
    X(1, 1) = std::nan("");
    CHECK(error_kind([&] { Dataset(X, Vector::Zero(3)); }) == "NonFiniteValue");
}

TEST_CASE("partition gathers selected columns and the complement") {
    Matrix X(2, 3);
    X << 1, 2, 3, 4, 5, 6;
    const Partition part = partition(X, IndexSet{0, 2});
    CHECK(part.Z.cols() == 2);
    CHECK(part.Z(0, 0) == 1);
    CHECK(part.Z(1, 1) == 6);
    CHECK(part.U.cols() == 1);
    CHECK(part.U(1, 0) == 5);
    CHECK(part.u_indices == IndexSet{1});
    CHECK(reassemble(part) == X);
}

TEST_CASE("partition: boundaries and errors") {
    Matrix X = Matrix::Random(4, 5);
    CHECK(partition(X, IndexSet::range(0, 4)).U.cols() == 1);
    CHECK(error_kind([&] { partition(X, IndexSet{}); }) == "EmptySelection");
    CHECK(error_kind([&] { partition(X, IndexSet::range(0, 5)); }) == "FullSelection");
    CHECK(error_kind([&] { partition(X, IndexSet{1, 5}); }) == "IndexOutOfRange");
}

TEST_CASE("IndexSet sorts, deduplicates, complements and composes") {
    const IndexSet s({4, 1, 4, 2});
    CHECK(s.values() == std::vector<int>{1, 2, 4});
    CHECK(s.complement(6).values() == std::vector<int>{0, 3, 5});
    CHECK(s.compose(IndexSet{0, 2}).values() == std::vector<int>{1, 4});
    CHECK(s.contains(2));
    CHECK_FALSE(s.contains(3));
}

TEST_CASE("csv round trip and header validation") {
    qiv::test::TempDir dir("csv");
    std::mt19937_64 rng(5);
    const Matrix X = gaussian_matrix(7, 3, rng);
    const Vector y = gaussian_vector(7, rng);
    write_dataset(dir / "d.csv", X, y);
    const Dataset d = read_dataset(dir / "d.csv");
    CHECK(d.X() == X);
    CHECK(d.y() == y);

    CHECK(error_kind([] { dataset_from_csv(parse_csv("y,x2\n1,2\n")); }) == "MalformedCsv");
    CHECK(error_kind([] { parse_csv("y,x1\n1,abc\n"); }) == "MalformedCsv");
    CHECK(error_kind([] { parse_csv("y,x1\n1\n"); }) == "MalformedCsv");
    CHECK(error_kind([&] { read_csv(dir / "missing.csv"); }) == "FileNotReadable");
}
