#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "advisor/dynamics.hpp"
#include "advisor/errors.hpp"

using namespace advisor;
using doctest::Approx;

namespace {
constexpr double pi = std::numbers::pi;
}

TEST_CASE("derivative of straight coasting") {
    const Vector4 d = derivative({0, 0, 15, 0}, {0, 0}, VehicleParams{});
    CHECK(d[0] == 15.0);
    CHECK(d[1] == 0.0);
    CHECK(d[2] == 0.0);
    CHECK(d[3] == 0.0);
}

TEST_CASE("derivative with lateral heading") {
    const Vector4 d = derivative({0, 0, 10, pi / 2}, {0, 2}, VehicleParams{});
    CHECK(d[0] == Approx(0.0).epsilon(1e-12));
    CHECK(d[1] == Approx(10.0));
    CHECK(d[2] == 2.0);
    CHECK(d[3] == 0.0);
}

TEST_CASE("derivative yaw rate for a steering step") {
    // 10 * (1/2.8) * tan(0.1), tan(0.1) = 0.1003346720854505
    const Vector4 d = derivative({0, 0, 10, 0}, {0.1, 0}, VehicleParams{});
    CHECK(d[3] == Approx(0.3583381146).epsilon(1e-9));
}

TEST_CASE("derivative rejects bad inputs") {
    CHECK_THROWS_AS((void)derivative({0, 0, NAN, 0}, {0, 0}, VehicleParams{}), InputError);
    CHECK_THROWS_AS((void)derivative({0, 0, 10, 0}, {pi / 2, 0}, VehicleParams{}), InputError);
}

TEST_CASE("derivative is rotation equivariant") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const VehicleParams p;
    for (int i = 0; i < 50; ++i) {
        const ContinuousVehicleState s{u(rng), u(rng), 10 + 5 * u(rng), 3 * u(rng)};
        const ControlCommand c{0.4 * u(rng), u(rng)};
        const double alpha = 3 * u(rng);
        const Vector4 d0 = derivative(s, c, p);
        const Vector4 d1 = derivative({s.x, s.y, s.v, s.theta + alpha}, c, p);
        const double ca = std::cos(alpha), sa = std::sin(alpha);
        CHECK(d1[0] == Approx(ca * d0[0] - sa * d0[1]).epsilon(1e-12));
        CHECK(d1[1] == Approx(sa * d0[0] + ca * d0[1]).epsilon(1e-12));
        CHECK(d1[2] == d0[2]);
        CHECK(d1[3] == d0[3]);
    }
}

TEST_CASE("step with zero command advances x by v dt") {
    const ContinuousVehicleState s = step({1, 2, 15, 0}, {0, 0}, VehicleParams{}, 0.05);
    CHECK(s.x == Approx(1.75).epsilon(1e-15));
    CHECK(s.y == 2.0);
    CHECK(s.theta == 0.0);
}

TEST_CASE("step matches the constant-acceleration solution") {
    const ContinuousVehicleState s = step({0, 0, 15, 0}, {0, 1}, VehicleParams{}, 0.05);
    CHECK(s.v == Approx(15.05).epsilon(1e-14));
    CHECK(s.x == Approx(0.75125).epsilon(1e-14));
}

TEST_CASE("step agrees with two half steps") {
    // Lane-keeping envelope: 5-45 m/s, yaw rate up to ~0.5 rad/s.
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const VehicleParams p;
    for (int i = 0; i < 50; ++i) {
        const ContinuousVehicleState s{10 * u(rng), u(rng), 25 + 20 * u(rng), pi * u(rng)};
        const ControlCommand c{0.03 * u(rng), 2 * u(rng)};
        const ContinuousVehicleState a = step(s, c, p, 0.05);
        const ContinuousVehicleState b = step(step(s, c, p, 0.025), c, p, 0.025);
        CHECK(std::abs(a.x - b.x) < 1e-9);
        CHECK(std::abs(a.y - b.y) < 1e-9);
        CHECK(std::abs(a.v - b.v) < 1e-9);
        CHECK(std::abs(a.theta - b.theta) < 1e-9);
    }
}

TEST_CASE("step has fourth-order accuracy") {
    const VehicleParams p;
    const ContinuousVehicleState s{0, 0, 20, 0.3};
    const ControlCommand c{0.4, 1.5};
    auto integrate = [&](double h, int n) {
        ContinuousVehicleState x = s;
        for (int i = 0; i < n; ++i) x = step(x, c, p, h);
        return x;
    };
    const ContinuousVehicleState ref = integrate(0.05 / 256, 256);
    const double e1 = std::hypot(integrate(0.05, 1).x - ref.x, integrate(0.05, 1).y - ref.y);
    const double e2 = std::hypot(integrate(0.025, 2).x - ref.x, integrate(0.025, 2).y - ref.y);
    // global error over a fixed interval scales as h^4
    CHECK(e1 / e2 > 12.0);
    CHECK(e1 / e2 < 20.0);
}

TEST_CASE("step rejects dt outside (0, ts]") {
    CHECK_THROWS_AS((void)step({0, 0, 10, 0}, {0, 0}, VehicleParams{}, 0.0), InputError);
    CHECK_THROWS_AS((void)step({0, 0, 10, 0}, {0, 0}, VehicleParams{}, 0.06), InputError);
}

TEST_CASE("straight run keeps y constant") {
    ContinuousVehicleState s{0, 0.7, 15, 0};
    for (int i = 0; i < 600; ++i) s = advance(s, {0, 0}, VehicleParams{});
    CHECK(s.y == 0.7);
    CHECK(s.x == Approx(15 * 30.0).epsilon(1e-12));
}

TEST_CASE("advance wraps theta") {
    ContinuousVehicleState s{0, 0, 20, 3.1};
    for (int i = 0; i < 5; ++i) s = advance(s, {0.5, 0}, VehicleParams{});
    CHECK(s.theta > -pi);
    CHECK(s.theta <= pi);
    CHECK(normalize_angle(pi) == pi);
    CHECK(normalize_angle(-pi) == pi);
    CHECK(normalize_angle(3 * pi / 2) == Approx(-pi / 2));
}

TEST_CASE("accel_map examples") {
    const VehicleParams p;
    PlanarAcceleration a = accel_map({0, 2}, 10, 0, p);
    CHECK(a.xddot == 2.0);
    CHECK(a.yddot == 0.0);
    a = accel_map({std::atan(0.1), 2}, 10, 0, p);
    CHECK(a.xddot == Approx(2.0));
    CHECK(a.yddot == Approx(3.5714285714).epsilon(1e-9));
    a = accel_map({0, 1}, 10, pi / 2, p);
    CHECK(a.xddot == Approx(0.0).epsilon(1e-15));
    CHECK(a.yddot == Approx(1.0));
}

TEST_CASE("accel_map_inverse round trip") {
    const VehicleParams p;
    const ControlCommand c = accel_map_inverse({2, 0}, 10, 0, p);
    CHECK(c.delta == 0.0);
    CHECK(c.accel == 2.0);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const PlanarAcceleration pa{5 * u(rng), 5 * u(rng)};
        const double v = 0.1 + 45 * (u(rng) + 1) / 2;
        const double th = pi * u(rng);
        const PlanarAcceleration back = accel_map(accel_map_inverse(pa, v, th, p), v, th, p);
        const double scale = std::max(std::hypot(pa.xddot, pa.yddot), 1e-300);
        CHECK(std::hypot(back.xddot - pa.xddot, back.yddot - pa.yddot) / scale < 1e-12);
    }
}

TEST_CASE("accel_map_inverse stalls at rest") {
    CHECK_THROWS_AS((void)accel_map_inverse({1, 1}, 0.0, 0.0, VehicleParams{}), StallError);
    CHECK_THROWS_AS((void)accel_map_inverse({1, 1}, 0.05, 0.0, VehicleParams{}), StallError);
}

TEST_CASE("discrete matrices") {
    VehicleParams p;
    const DiscreteModel m = discrete_matrices(p);
    CHECK(m.B(1, 0) == 0.0);
    CHECK(m.B(1, 1) == Approx(0.00125).epsilon(1e-15));
    CHECK(m.A.row(3) == Eigen::RowVector4d(0, 0, 0, 1));
    CHECK(m.B.row(3).isZero());

    Eigen::Vector4d xi(15, 0.2, 0.3, -1.8);
    const Eigen::Vector4d next = m.A * xi;
    CHECK(next(0) == xi(0));
    CHECK(next(1) == Approx(0.2 + 0.05 * 0.3));
    CHECK(next(2) == xi(2));
    CHECK(next(3) == xi(3));

    for (double ts : {0.001, 0.01, 0.05, 0.2, 1.0}) {
        p.ts = ts;
        const DiscreteModel d = discrete_matrices(p);
        const Eigen::VectorXcd eig = d.A.eigenvalues();
        for (int i = 0; i < 4; ++i) CHECK(std::abs(eig(i) - 1.0) == 0.0);
        Eigen::Matrix<double, 4, 8> C;
        Eigen::Matrix<double, 4, 2> blk = d.B;
        for (int i = 0; i < 4; ++i) {
            C.middleCols<2>(2 * i) = blk;
            blk = d.A * blk;
        }
        CHECK(Eigen::FullPivLU<Eigen::MatrixXd>(C).rank() < 4);
    }
    p.ts = 0;
    CHECK_THROWS_AS((void)discrete_matrices(p), InputError);
}

TEST_CASE("vehicle params validation") {
    VehicleParams p;
    CHECK_NOTHROW(p.validate());
    p.far_dist = 5.0;
    CHECK_THROWS_AS(p.validate(), InputError);
}
