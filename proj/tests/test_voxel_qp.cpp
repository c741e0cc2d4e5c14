#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "sct/error.hpp"
#include "sct/voxel_qp.hpp"

using namespace sct;

namespace {

VoxelQP make_qp(const Eigen::MatrixXd& h, const Eigen::VectorXd& d, bool sum = true) {
    VoxelQP qp;
    qp.hessian = h;
    qp.linear = d;
    qp.sum_constraint = sum;
    return qp;
}

} // namespace

TEST_CASE("feasible unconstrained minimiser is returned as is") {
    const auto sol = solve_voxel_qp(make_qp(Eigen::MatrixXd::Identity(4, 4), Eigen::VectorXd::Zero(4)));
    CHECK(sol.x.cwiseAbs().maxCoeff() == 0.0);
    CHECK(sol.lambda == 0.0);

    Eigen::VectorXd d(3);
    d << -0.2, -0.3, -0.1;
    const auto interior = solve_voxel_qp(make_qp(Eigen::MatrixXd::Identity(3, 3), d));
    CHECK(interior.x(0) == doctest::Approx(0.2));
    CHECK(interior.x(1) == doctest::Approx(0.3));
    CHECK(interior.x(2) == doctest::Approx(0.1));
}

TEST_CASE("sum constraint binds with the hand-derived multiplier") {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(4);
    d(0) = -2.0;
    const auto sol = solve_voxel_qp(make_qp(Eigen::MatrixXd::Identity(4, 4), d));
    CHECK(sol.x(0) == doctest::Approx(1.0).epsilon(1e-12));
    for (int m = 1; m < 4; ++m) CHECK(sol.x(m) == doctest::Approx(0.0));
    CHECK(sol.lambda == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(kkt_residuals(make_qp(Eigen::MatrixXd::Identity(4, 4), d), sol).max() < 1e-12);
}

TEST_CASE("without the sum constraint only non-negativity applies") {
    Eigen::VectorXd d(2);
    d << -2.0, 3.0;
    const auto qp = make_qp(Eigen::MatrixXd::Identity(2, 2), d, false);
    const auto sol = solve_voxel_qp(qp);
    CHECK(sol.x(0) == doctest::Approx(2.0));
    CHECK(sol.x(1) == 0.0);
    CHECK(sol.mu(1) == doctest::Approx(3.0));
    CHECK(kkt_residuals(qp, sol).max() < 1e-12);
}

TEST_CASE("scalar problems clamp at zero") {
    Eigen::MatrixXd h(1, 1);
    h << 4.0;
    Eigen::VectorXd d(1);
    d << 2.0;
    CHECK(solve_voxel_qp(make_qp(h, d, false)).x(0) == 0.0);
    d << -2.0;
    CHECK(solve_voxel_qp(make_qp(h, d, false)).x(0) == doctest::Approx(0.5));
}

TEST_CASE("indefinite or malformed Hessians are rejected") {
    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(2, 2);
    h(1, 1) = -1.0;
    CHECK_THROWS_AS(solve_voxel_qp(make_qp(h, Eigen::VectorXd::Zero(2))), NumericError);
    h = Eigen::MatrixXd::Identity(2, 2);
    h(0, 1) = 0.5;
    CHECK_THROWS_AS(solve_voxel_qp(make_qp(h, Eigen::VectorXd::Zero(2))), NumericError);
    CHECK_THROWS_AS(solve_voxel_qp(make_qp(Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(2))), ShapeError);
    h = Eigen::MatrixXd::Identity(2, 2);
    Eigen::VectorXd d(2);
    d << std::nan(""), 0.0;
    CHECK_THROWS_AS(solve_voxel_qp(make_qp(h, d)), NumericError);
}

TEST_CASE("random instances match the simplex grid oracle" * doctest::timeout(120)) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> shift(0.5, 2.0);
    std::normal_distribution<double> n01;
    double worst = 0.0;
    double worst_kkt = 0.0;
    for (int t = 0; t < 200; ++t) {
        const auto h = oracle::random_spd(rng, shift(rng));
        std::array<double, 4> d{};
        for (double& v : d) v = 2.0 * n01(rng);
        Eigen::MatrixXd he(4, 4);
        Eigen::VectorXd de(4);
        for (int i = 0; i < 4; ++i) {
            de(i) = d[i];
            for (int j = 0; j < 4; ++j) he(i, j) = h[i][j];
        }
        const auto qp = make_qp(he, de);
        const auto sol = solve_voxel_qp(qp);
        const auto want = oracle::grid_search_simplex(h, d);
        for (int i = 0; i < 4; ++i) worst = std::max(worst, std::abs(sol.x(i) - want[i]));
        worst_kkt = std::max(worst_kkt, kkt_residuals(qp, sol).max());
        CHECK(sol.x.minCoeff() >= 0.0);
        CHECK(sol.x.sum() <= 1.0 + 1e-12);
    }
    CHECK(worst < 2e-3);
    CHECK(worst_kkt < 1e-9);
}

TEST_CASE("solution is never beaten by feasible perturbations") {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 200; ++t) {
        const int m = 1 + t % 8;
        Eigen::MatrixXd b(m, m);
        for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = n01(rng);
        const Eigen::MatrixXd h = b.transpose() * b + 0.1 * Eigen::MatrixXd::Identity(m, m);
        Eigen::VectorXd d(m);
        for (int i = 0; i < m; ++i) d(i) = 3.0 * n01(rng);
        const auto qp = make_qp(h, d);
        const auto sol = solve_voxel_qp(qp);
        CHECK(kkt_residuals(qp, sol).max() < 1e-9);
        for (int k = 0; k < 50; ++k) {
            SmallVector x(m);
            for (int i = 0; i < m; ++i) x(i) = u(rng);
            x /= std::max(1.0, x.sum() / u(rng));
            CHECK(qp.objective(x) >= sol.objective - 1e-12);
        }
    }
}

TEST_CASE("kkt residuals flag a wrong answer") {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(2);
    d(0) = -1.0;
    const auto qp = make_qp(Eigen::MatrixXd::Identity(2, 2), d);
    QpSolution bad;
    bad.x = SmallVector::Zero(2);
    bad.mu = SmallVector::Zero(2);
    CHECK(kkt_residuals(qp, bad).stationarity > 0.5);
    bad.x(0) = 2.0;
    CHECK(kkt_residuals(qp, bad).primal > 0.5);
}
