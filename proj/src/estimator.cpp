#include "advisor/estimator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "advisor/errors.hpp"

namespace advisor {

namespace {

constexpr double kPsdTolerance = 1e-10;
constexpr double kWeightFloor = 1e-12;
constexpr double kRankTolerance = 1e-8;

// Coefficients padded to index 3. beta[i] = (b_i, c_i, d_i); a[0] unused.
struct Padded {
    std::array<double, 4> a{};
    std::array<Eigen::RowVector3d, 4> beta;
};

double pick(const std::vector<double>& v, std::size_t i) { return i < v.size() ? v[i] : 0.0; }

Padded pad(const GeneralizedSteeringParams& p) {
    check_realizable(p);
    Padded out;
    for (std::size_t i = 0; i < 4; ++i) {
        out.a[i] = i == 0 ? 0.0 : pick(p.a, i - 1);
        out.beta[i] = Eigen::RowVector3d(pick(p.b, i), pick(p.c, i), pick(p.d, i));
    }
    return out;
}

// (phi, Omega, xi3) as seen by the estimator.
Eigen::Vector3d inputs(const AugmentedState& s, const VehicleParams& params) {
    const VisualAngles va = visual_angles(s(0), s(1), s(2), params);
    return {va.phi, va.omega, s(2)};
}

// d(phi, Omega, xi3)/d(xi), xi1 floored at v_min_invert.
Eigen::Matrix<double, 3, 7> input_partials(const AugmentedState& s, const VehicleParams& params) {
    const double x1 = std::max(s(0), params.v_min_invert);
    const double x2 = s(1);
    const double x3 = s(2);
    const double den = x1 * x1 + x3 * x3;
    const double ln = params.near_dist;
    const double lf = params.far_dist;
    Eigen::Matrix<double, 3, 7> J = Eigen::Matrix<double, 3, 7>::Zero();
    J(0, 0) = J(1, 0) = -x3 / den;
    J(0, 2) = J(1, 2) = x1 / den;
    J(0, 1) = ln / (ln * ln + x2 * x2);
    J(1, 1) = lf / (lf * lf + x2 * x2);
    J(2, 2) = 1.0;
    return J;
}

Eigen::MatrixXd select_r(const NoiseConfig& noise, SensorRows rows) {
    return rows == SensorRows::with_human ? Eigen::MatrixXd(noise.R) : Eigen::MatrixXd(noise.R.topLeftCorner(2, 2));
}

void symmetrize_and_check(Matrix7& P, const char* where) {
    P = 0.5 * (P + P.transpose()).eval();
    if (!P.allFinite()) throw CovarianceError(std::string(where) + ": non-finite covariance");
    const Eigen::SelfAdjointEigenSolver<Matrix7> eig(P, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -kPsdTolerance)
        throw CovarianceError(std::string(where) + ": covariance lost positive semi-definiteness");
}

int numeric_rank(const Eigen::MatrixXd& M) {
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) return 0;
    const double tol = kRankTolerance * sv(0);
    return static_cast<int>((sv.array() > tol).count());
}

}  // namespace

NoiseConfig NoiseConfig::defaults() {
    NoiseConfig n;
    n.R = Eigen::Vector3d(0.1 * 0.1, 0.05 * 0.05, 0.001 * 0.001).asDiagonal();
    n.Q.setZero();
    n.Q.diagonal() << 1e-4, 1e-4, 1e-4, 1e-8, 1e-6, 1e-6, 1e-6;
    n.nu_sigma = 1e-3;
    return n;
}

void NoiseConfig::validate() const {
    auto spd_check = [](const Eigen::MatrixXd& M, const char* name) {
        if (!M.allFinite()) throw InputError(std::string(name) + " has non-finite entries");
        if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw InputError(std::string(name) + " not symmetric");
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M, Eigen::EigenvaluesOnly);
        if (eig.eigenvalues().minCoeff() < -1e-15) throw InputError(std::string(name) + " not positive semi-definite");
    };
    spd_check(R, "R");
    spd_check(Q, "Q");
    if (!(nu_sigma >= 0.0)) throw InputError("nu_sigma must be non-negative");
}

AugmentedState MixtureEstimate::aggregate_mean() const { return aggregate(components); }

std::vector<double> MixtureEstimate::weights() const {
    std::vector<double> w;
    w.reserve(components.size());
    for (const auto& c : components) w.push_back(c.weight);
    return w;
}

void check_realizable(const GeneralizedSteeringParams& p, JacobianMode mode) {
    p.validate();
    const ModelOrders o = p.orders();
    if (o.max() > kMaxRealizationOrder)
        throw InputError("steering model order exceeds the 3 internal estimator states");
    if (mode == JacobianMode::paper && (o.na > 2 || o.nb > 3 || o.nc > 0 || o.nd > 1))
        throw InputError("paper Jacobian mode requires orders within (2,3,0,1)");
}

SteeringFunctions g_functions(const AugmentedState& s, const GeneralizedSteeringParams& p,
                              const VehicleParams& params) {
    const Padded c = pad(p);
    const Eigen::Vector3d u = inputs(s, params);
    const double y = s(6) + c.beta[0] * u;
    SteeringFunctions g;
    g.g3 = c.a[1] * y + s(5) + c.beta[1] * u;
    g.g2 = c.a[2] * y + s(4) + c.beta[2] * u;
    g.g1 = c.a[3] * y + c.beta[3] * u;
    return g;
}

double predicted_steering(const AugmentedState& s, const GeneralizedSteeringParams& p, const VehicleParams& params) {
    const Padded c = pad(p);
    return s(6) + c.beta[0] * inputs(s, params);
}

AugmentedState transition(const AugmentedState& s, const GeneralizedSteeringParams& p, const VehicleParams& params) {
    const DiscreteModel dm = discrete_matrices(params);
    const SteeringFunctions g = g_functions(s, p, params);
    AugmentedState out;
    out.head<4>() = dm.A * s.head<4>();
    out(4) = g.g1;
    out(5) = g.g2;
    out(6) = g.g3;
    return out;
}

Eigen::VectorXd predicted_measurement(const AugmentedState& s, const GeneralizedSteeringParams& p,
                                      const VehicleParams& params, SensorRows rows) {
    Eigen::VectorXd z(rows == SensorRows::with_human ? 3 : 2);
    z(0) = s(0);
    z(1) = s(1) + s(3);
    if (rows == SensorRows::with_human) z(2) = predicted_steering(s, p, params);
    return z;
}

Matrix7 state_jacobian(const AugmentedState& s, const GeneralizedSteeringParams& p, const VehicleParams& params,
                       JacobianMode mode) {
    if (!(s(0) > 0.0)) throw InputError("state_jacobian: xi1 must be positive");
    check_realizable(p, mode);
    const Padded c = pad(p);
    Matrix7 J = Matrix7::Zero();
    J.topLeftCorner<4, 4>() = discrete_matrices(params).A;

    if (mode == JacobianMode::exact) {
        const Eigen::Matrix<double, 3, 7> du = input_partials(s, params);
        Eigen::Matrix<double, 1, 7> dy = c.beta[0] * du;
        dy(6) += 1.0;
        J.row(6) = c.a[1] * dy + c.beta[1] * du;
        J(6, 5) += 1.0;
        J.row(5) = c.a[2] * dy + c.beta[2] * du;
        J(5, 4) += 1.0;
        J.row(4) = c.a[3] * dy + c.beta[3] * du;
        return J;
    }

    const double x1 = std::max(s(0), params.v_min_invert);
    const double ln = params.near_dist;
    const double lf = params.far_dist;
    const double a1 = c.a[1], a2 = c.a[2];
    const double b0 = c.beta[0](0), b1 = c.beta[1](0), b2 = c.beta[2](0), b3 = c.beta[3](0);
    const double c0 = c.beta[0](1);
    const double d0 = c.beta[0](2), d1 = c.beta[1](2);
    J(4, 1) = b3 / ln;
    J(4, 2) = b3 / x1;
    J(5, 1) = (b2 + a2 * b0) / ln + a2 * c0 / ln;
    J(5, 2) = (b2 + a2 * b0 + a2 * c0) / x1 + a2 * d0;
    J(5, 4) = 1.0;
    J(5, 6) = a2;
    J(6, 1) = (b1 + a1 * b0) / ln + a1 * c0 / lf;
    J(6, 2) = (b1 + a1 * b0 + a1 * c0) / x1 + d1 + a1 * d0;
    J(6, 5) = 1.0;
    J(6, 6) = a1;
    return J;
}

Eigen::MatrixXd measurement_jacobian(const AugmentedState& s, const GeneralizedSteeringParams& p,
                                     const VehicleParams& params, JacobianMode mode, SensorRows rows) {
    if (!(s(0) > 0.0)) throw InputError("measurement_jacobian: xi1 must be positive");
    check_realizable(p, mode);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(rows == SensorRows::with_human ? 3 : 2, 7);
    H(0, 0) = 1.0;
    H(1, 1) = 1.0;
    H(1, 3) = 1.0;
    if (rows == SensorRows::camera_speed_only) return H;

    const Padded c = pad(p);
    if (mode == JacobianMode::exact) {
        H.row(2) = c.beta[0] * input_partials(s, params);
    } else {
        const double x1 = std::max(s(0), params.v_min_invert);
        const double b0 = c.beta[0](0), c0 = c.beta[0](1), d0 = c.beta[0](2);
        H(2, 1) = b0 / params.near_dist + c0 / params.far_dist;
        H(2, 2) = (b0 + c0) / x1 + d0;
    }
    H(2, 6) = 1.0;
    return H;
}

Eigen::Matrix<double, 7, 2> input_matrix(const VehicleParams& params) {
    Eigen::Matrix<double, 7, 2> B = Eigen::Matrix<double, 7, 2>::Zero();
    B.topRows<4>() = discrete_matrices(params).B;
    return B;
}

GaussianComponent propagate(const GaussianComponent& comp, const PlanarAcceleration& input,
                            const GeneralizedSteeringParams& p, const VehicleParams& params, const NoiseConfig& noise,
                            JacobianMode mode) {
    const Matrix7 J = state_jacobian(comp.mean, p, params, mode);
    GaussianComponent out = comp;
    out.mean = transition(comp.mean, p, params) + input_matrix(params) * Eigen::Vector2d(input.xddot, input.yddot);
    out.cov = J * comp.cov * J.transpose() + noise.Q;
    symmetrize_and_check(out.cov, "propagate");
    return out;
}

UpdateResult update(const GaussianComponent& comp, const Measurement& meas, const GeneralizedSteeringParams& p,
                    const VehicleParams& params, const NoiseConfig& noise, JacobianMode mode, SensorRows rows) {
    const Eigen::MatrixXd H = measurement_jacobian(comp.mean, p, params, mode, rows);
    const Eigen::MatrixXd R = select_r(noise, rows);
    Eigen::VectorXd z(H.rows());
    z(0) = meas.z1;
    z(1) = meas.z2;
    if (rows == SensorRows::with_human) z(2) = meas.z3;

    UpdateResult res;
    res.residual = z - predicted_measurement(comp.mean, p, params, rows);
    res.innovation_cov = H * comp.cov * H.transpose() + R;
    const Eigen::LLT<Eigen::MatrixXd> llt(res.innovation_cov);
    if (llt.info() != Eigen::Success || !res.innovation_cov.allFinite())
        throw SingularInnovation("update: innovation covariance is not positive definite");
    const Eigen::MatrixXd K = llt.solve(H * comp.cov).transpose();

    res.component = comp;
    res.component.mean = comp.mean + K * res.residual;
    const Matrix7 IKH = Matrix7::Identity() - K * H;
    res.component.cov = IKH * comp.cov * IKH.transpose() + K * R * K.transpose();
    symmetrize_and_check(res.component.cov, "update");
    return res;
}

std::vector<double> update_weights(const std::vector<double>& weights, const std::vector<Eigen::VectorXd>& residuals,
                                   const std::vector<Eigen::MatrixXd>& covs) {
    if (weights.size() != residuals.size() || weights.size() != covs.size() || weights.empty())
        throw InputError("update_weights: mismatched component counts");
    std::vector<double> w(weights.size());
    bool any = false;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const Eigen::LLT<Eigen::MatrixXd> llt(covs[i]);
        if (llt.info() != Eigen::Success) throw SingularInnovation("update_weights: innovation covariance singular");
        const Eigen::MatrixXd L = llt.matrixL();
        const double maha = L.triangularView<Eigen::Lower>().solve(residuals[i]).squaredNorm();
        const double log_det = 2.0 * L.diagonal().array().log().sum();
        const double m = static_cast<double>(residuals[i].size());
        const double dens = std::exp(-0.5 * maha - 0.5 * (m * std::log(2.0 * std::numbers::pi) + log_det));
        w[i] = weights[i] * dens;
        if (w[i] > 0.0) any = true;
    }
    if (!any) throw AllWeightsVanished("update_weights: every component likelihood underflowed");
    double total = 0.0;
    for (double& x : w) {
        x = std::max(x, kWeightFloor);
        total += x;
    }
    for (double& x : w) x /= total;
    return w;
}

AugmentedState aggregate(const std::vector<GaussianComponent>& comps) {
    AugmentedState out = AugmentedState::Zero();
    for (const auto& c : comps) out += c.weight * c.mean;
    return out;
}

int observability_rank(const GeneralizedSteeringParams& p, const VehicleParams& params, SensorRows rows, double xi1,
                       JacobianMode mode) {
    AugmentedState s = AugmentedState::Zero();
    s(0) = xi1;
    const Matrix7 A = state_jacobian(s, p, params, mode);
    const Eigen::MatrixXd C = measurement_jacobian(s, p, params, mode, rows);
    Eigen::MatrixXd O(C.rows() * 7, 7);
    Eigen::MatrixXd block = C;
    for (int i = 0; i < 7; ++i) {
        O.middleRows(i * C.rows(), C.rows()) = block;
        block = block * A;
    }
    return numeric_rank(O);
}

int controllability_rank(const GeneralizedSteeringParams& p, const VehicleParams& params, double xi1) {
    AugmentedState s = AugmentedState::Zero();
    s(0) = xi1;
    const Matrix7 A = state_jacobian(s, p, params, JacobianMode::exact);
    const Eigen::Matrix<double, 7, 2> B = input_matrix(params);
    Eigen::MatrixXd Cm(7, 14);
    Eigen::MatrixXd block = B;
    for (int i = 0; i < 7; ++i) {
        Cm.middleCols(2 * i, 2) = block;
        block = A * block;
    }
    return numeric_rank(Cm);
}

Eigen::Vector3d warmup_internal(const GeneralizedSteeringParams& p, const SteeringSeries& s, std::size_t samples) {
    s.validate();
    if (samples > s.size()) throw InputError("warmup_internal: not enough samples");
    const Padded c = pad(p);
    double x5 = 0.0, x6 = 0.0, x7 = 0.0;
    for (std::size_t k = 0; k < samples; ++k) {
        const Eigen::Vector3d u(s.phi[k], s.omega[k], s.xi3[k]);
        const double y = s.delta[k];
        const double n7 = c.a[1] * y + x6 + c.beta[1] * u;
        const double n6 = c.a[2] * y + x5 + c.beta[2] * u;
        const double n5 = c.a[3] * y + c.beta[3] * u;
        x5 = n5;
        x6 = n6;
        x7 = n7;
    }
    return {x5, x6, x7};
}

MixtureEstimate init_mixture(const std::vector<double>& hypotheses, const InitialGuess& g,
                             const Eigen::Vector3d& internal, double internal_var) {
    if (hypotheses.empty()) throw InputError("init_mixture: need at least one hypothesis");
    if (!(internal_var > 0.0)) throw InputError("init_mixture: internal variance must be positive");
    MixtureEstimate mix;
    const double w = 1.0 / static_cast<double>(hypotheses.size());
    for (double h : hypotheses) {
        GaussianComponent c;
        c.mean << g.xi1, g.camera_y - h, g.xi3, h, internal(0), internal(1), internal(2);
        c.cov = Matrix7::Identity();
        c.cov.bottomRightCorner<3, 3>() *= internal_var;
        c.weight = w;
        mix.components.push_back(c);
    }
    return mix;
}

GmmEkf::GmmEkf(GeneralizedSteeringParams p, VehicleParams params, FilterConfig cfg, MixtureEstimate init)
    : p_(std::move(p)), params_(params), cfg_(std::move(cfg)), mix_(std::move(init)) {
    params_.validate();
    cfg_.noise.validate();
    check_realizable(p_, cfg_.mode);
    if (mix_.components.empty()) throw InputError("GmmEkf: empty mixture");
    double total = 0.0;
    for (const auto& c : mix_.components) total += c.weight;
    if (std::abs(total - 1.0) > 1e-12) throw InputError("GmmEkf: initial weights must sum to 1");
}

namespace {

// A non-positive forward speed estimate means the filter has diverged.
void check_speed(const MixtureEstimate& mix) {
    for (const auto& c : mix.components)
        if (!(c.mean(0) > 0.0)) throw StallError("GmmEkf: forward speed estimate is not positive");
}

}  // namespace

void GmmEkf::update(const Measurement& z) {
    check_speed(mix_);
    const SensorRows rows = cfg_.use_human ? SensorRows::with_human : SensorRows::camera_speed_only;
    std::vector<Eigen::VectorXd> residuals;
    std::vector<Eigen::MatrixXd> covs;
    const std::vector<double> prior = mix_.weights();
    for (auto& c : mix_.components) {
        UpdateResult r = advisor::update(c, z, p_, params_, cfg_.noise, cfg_.mode, rows);
        c = r.component;
        residuals.push_back(std::move(r.residual));
        covs.push_back(std::move(r.innovation_cov));
    }
    const std::vector<double> w = update_weights(prior, residuals, covs);
    for (std::size_t i = 0; i < w.size(); ++i) mix_.components[i].weight = w[i];
}

void GmmEkf::propagate(const PlanarAcceleration& input) {
    check_speed(mix_);
    for (auto& c : mix_.components) c = advisor::propagate(c, input, p_, params_, cfg_.noise, cfg_.mode);
}

}  // namespace advisor
