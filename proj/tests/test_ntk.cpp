#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "ntkal/network.hpp"
#include "ntkal/ntk.hpp"

using namespace ntkal;

namespace {

ntk::PointSet random_unit_points(int k, int dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    ntk::PointSet ps;
    ps.dim = dim;
    ps.points.resize(k, dim);
    for (int i = 0; i < k; ++i) {
        Eigen::VectorXd x(dim);
        for (int j = 0; j < dim; ++j) x(j) = g(rng);
        ps.points.row(i) = x.transpose() / x.norm();
    }
    return ps;
}

}  // namespace

TEST_CASE("single unit point, depth 2: H = 1.5") {
    ntk::PointSet ps;
    ps.dim = 3;
    ps.points.resize(1, 3);
    ps.points << 1.0, 0.0, 0.0;
    const auto report = ntk::ntk_matrix(ps, 2);
    CHECK(report.H(0, 0) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(report.lambda0 == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(report.L_H == doctest::Approx(std::log(2.5)).epsilon(1e-12));
}

TEST_CASE("orthogonal pair, depth 2: off-diagonal = 1/pi") {
    ntk::PointSet ps;
    ps.dim = 2;
    ps.points.resize(2, 2);
    ps.points << 1.0, 0.0, 0.0, 1.0;
    const auto report = ntk::ntk_matrix(ps, 2);
    CHECK(report.H(0, 1) == doctest::Approx(1.0 / std::numbers::pi).epsilon(1e-12));
    CHECK(report.H(1, 0) == doctest::Approx(report.H(0, 1)));
    CHECK(report.H(0, 0) == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("identical points give identical rows") {
    ntk::PointSet ps;
    ps.dim = 2;
    ps.points.resize(2, 2);
    const double r = 1.0 / std::sqrt(2.0);
    ps.points << r, r, r, r;
    const auto report = ntk::ntk_matrix(ps, 3);
    CHECK(report.H(0, 1) == doctest::Approx(report.H(0, 0)).epsilon(1e-10));
}

TEST_CASE("validation rejects non-unit points and bad depth") {
    ntk::PointSet ps;
    ps.dim = 2;
    ps.points.resize(1, 2);
    ps.points << 0.5, 0.5;
    CHECK_THROWS(ntk::ntk_matrix(ps, 2));
    ps.points << 1.0, 0.0;
    CHECK_THROWS(ntk::ntk_matrix(ps, 1));
}

TEST_CASE("H symmetric and Monte-Carlo estimate agrees within 4 se") {
    const auto ps = random_unit_points(5, 3, 42);
    for (int depth : {2, 3}) {
        const auto exact = ntk::ntk_matrix(ps, depth);
        CHECK((exact.H - exact.H.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        const auto mc = ntk::mc_ntk_matrix(ps, depth, 200000, 99);
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j) {
                const double tol = 4.0 * std::max(mc.se(i, j), 1e-9);
                CHECK(std::abs(exact.H(i, j) - mc.H(i, j)) <= tol);
            }
    }
}

TEST_CASE("complexity_S identity and zero cases") {
    ntk::NtkReport report;
    report.H = Eigen::MatrixXd::Identity(2, 2);
    Eigen::VectorXd h(2);
    h << 0.5, 0.5;
    CHECK(ntk::complexity_S(h, report).S ==
          doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    h.setZero();
    CHECK(ntk::complexity_S(h, report).S == doctest::Approx(0.0));
}

TEST_CASE("complexity_S matches dense factorization oracle") {
    const auto ps = random_unit_points(6, 4, 7);
    const auto report = ntk::ntk_matrix(ps, 2);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::VectorXd h(6);
    for (int i = 0; i < 6; ++i) h(i) = unif(rng);
    const double s = ntk::complexity_S(h, report).S;
    // oracle: full eigendecomposition inverse
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(report.H);
    const Eigen::MatrixXd Hinv = es.eigenvectors() *
                                 es.eigenvalues().cwiseInverse().asDiagonal() *
                                 es.eigenvectors().transpose();
    const double oracle = std::sqrt(h.dot(Hinv * h));
    CHECK(s == doctest::Approx(oracle).epsilon(1e-8));
}

TEST_CASE("complexity_S permutation invariance") {
    const auto ps = random_unit_points(5, 3, 21);
    const auto report = ntk::ntk_matrix(ps, 3);
    Eigen::VectorXd h(5);
    h << 0.2, 0.7, 0.4, 0.9, 0.1;
    const double s = ntk::complexity_S(h, report).S;

    std::vector<int> perm = {3, 0, 4, 1, 2};
    ntk::PointSet ps2;
    ps2.dim = 3;
    ps2.points.resize(5, 3);
    Eigen::VectorXd h2(5);
    for (int i = 0; i < 5; ++i) {
        ps2.points.row(i) = ps.points.row(perm[i]);
        h2(i) = h(perm[i]);
    }
    const auto report2 = ntk::ntk_matrix(ps2, 3);
    CHECK(ntk::complexity_S(h2, report2).S == doctest::Approx(s).epsilon(1e-10));
}

TEST_CASE("complexity_S rejects singular H") {
    ntk::NtkReport report;
    report.H = Eigen::MatrixXd::Zero(2, 2);
    Eigen::VectorXd h = Eigen::VectorXd::Ones(2);
    CHECK_THROWS(ntk::complexity_S(h, report));
}

TEST_CASE("d_diagnostic values and monotonicity") {
    ntk::NtkReport report;
    report.L_H = 0.0;
    CHECK(ntk::d_diagnostic(0.0, std::exp(-2.0), report, 1) ==
          doctest::Approx(17.0 / 16.0 + 4.0).epsilon(1e-12));
    report.L_H = 1.0;
    const double expected = 2.0 * (1.0 + 17.0 / 16.0 + 2.0 * std::log(10.0) + 1.0);
    CHECK(ntk::d_diagnostic(1.0, 0.1, report, 1) ==
          doctest::Approx(expected).epsilon(1e-10));
    double prev = 0.0;
    for (double s : {0.0, 0.5, 1.0, 2.0, 4.0}) {
        const double d = ntk::d_diagnostic(s, 0.1, report, 4);
        CHECK(d > prev);
        prev = d;
    }
}

TEST_CASE("gram matrix of wide-network features approximates H") {
    const auto ps = random_unit_points(4, 3, 5);
    const auto report = ntk::ntk_matrix(ps, 2);
    const int m = 2048;
    const auto net = nn::init_network(3, m, 2, 77, nn::Variant::frozen);
    Eigen::MatrixXd G(net.param_count(), 4);
    for (int i = 0; i < 4; ++i)
        G.col(i) = nn::feature_map(ps.points.row(i).transpose(), net,
                                   nn::At::theta0);
    const Eigen::MatrixXd gram = G.transpose() * G;
    const double rel = (gram - report.H).norm() / report.H.norm();
    CHECK(rel < 0.25);
}

TEST_CASE("point CSV round trip") {
    const auto ps = random_unit_points(7, 3, 31);
    Eigen::VectorXd h(7);
    for (int i = 0; i < 7; ++i) h(i) = 0.1 * i;
    const std::string path = "test_ntk_roundtrip.csv";
    ntk::write_point_csv(path, ps, &h);
    Eigen::VectorXd h2;
    const auto ps2 = ntk::read_point_csv(path, &h2);
    CHECK(ps2.dim == 3);
    CHECK((ps2.points - ps.points).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK((h2 - h).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    std::remove(path.c_str());
}
