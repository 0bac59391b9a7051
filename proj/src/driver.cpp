#include "advisor/driver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "advisor/analysis.hpp"
#include "advisor/errors.hpp"

namespace advisor {

namespace {

constexpr double kRankTolerance = 1e-10;

Eigen::VectorXd least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(kRankTolerance);
    if (qr.rank() < X.cols())
        throw RankDeficient("least squares: regressor matrix rank " + std::to_string(qr.rank()) + " < " +
                            std::to_string(X.cols()));
    return qr.solve(y);
}

struct Regression {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
};

Regression build_regression(const SteeringSeries& s, const ModelOrders& o, std::size_t start) {
    const std::size_t n = s.size();
    const auto rows = static_cast<Eigen::Index>(n - start);
    Regression r{Eigen::MatrixXd(rows, o.count()), Eigen::VectorXd(rows)};
    for (Eigen::Index row = 0; row < rows; ++row) {
        const std::size_t k = start + static_cast<std::size_t>(row);
        Eigen::Index col = 0;
        for (int i = 1; i <= o.na; ++i) r.X(row, col++) = s.delta[k - i];
        for (int i = 0; i <= o.nb; ++i) r.X(row, col++) = s.phi[k - i];
        for (int i = 0; i <= o.nc; ++i) r.X(row, col++) = s.omega[k - i];
        for (int i = 0; i <= o.nd; ++i) r.X(row, col++) = s.xi3[k - i];
        r.y(row) = s.delta[k];
    }
    return r;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

int ModelOrders::max() const { return std::max({na, nb, nc, nd}); }

void ModelOrders::validate() const {
    if (na < 0 || nb < 0 || nc < 0 || nd < 0) throw InputError("model orders must be non-negative");
}

ModelOrders GeneralizedSteeringParams::orders() const {
    auto n = [](const std::vector<double>& v) { return static_cast<int>(v.size()) - 1; };
    return {static_cast<int>(a.size()), n(b), n(c), n(d)};
}

void GeneralizedSteeringParams::validate() const {
    if (b.empty() || c.empty() || d.empty()) throw InputError("steering params: b, c and d need at least index 0");
    for (const auto* v : {&a, &b, &c, &d})
        for (double x : *v)
            if (!std::isfinite(x)) throw InputError("steering params: non-finite coefficient");
}

GeneralizedSteeringParams GeneralizedSteeringParams::nominal() {
    return {{1.47, 0.51}, {-5.73, 17.32, -17.65, 6.12}, {0.11}, {0.02, -0.02}};
}

GeneralizedSteeringParams GeneralizedSteeringParams::reference_driver() {
    return {{1.2, -0.6}, {-2.5, 2.47, -0.19, -0.6}, {0.11}, {0.02, -0.02}};
}

GeneralizedSteeringParams GeneralizedSteeringParams::from_two_point(const TwoPointGains& g, double ts) {
    return {{1.0}, {g.kn + g.ki * ts, g.kn}, {g.kf, g.kf}, {0.0}};
}

std::vector<double> GeneralizedSteeringParams::flatten() const {
    std::vector<double> out;
    for (const auto* v : {&a, &b, &c, &d}) out.insert(out.end(), v->begin(), v->end());
    return out;
}

GeneralizedSteeringParams GeneralizedSteeringParams::unflatten(const std::vector<double>& theta,
                                                               const ModelOrders& o) {
    o.validate();
    if (theta.size() != static_cast<std::size_t>(o.count()))
        throw InputError("unflatten: coefficient count does not match orders");
    GeneralizedSteeringParams p;
    auto it = theta.begin();
    auto take = [&it](int n) {
        std::vector<double> v(it, it + n);
        it += n;
        return v;
    };
    p.a = take(o.na);
    p.b = take(o.nb + 1);
    p.c = take(o.nc + 1);
    p.d = take(o.nd + 1);
    return p;
}

SteeringHistory::SteeringHistory(std::size_t depth)
    : depth_(std::max<std::size_t>(depth, 1)),
      delta_(depth_, 0.0),
      phi_(depth_ + 1, 0.0),
      omega_(depth_ + 1, 0.0),
      xi3_(depth_ + 1, 0.0) {}

void SteeringHistory::push_inputs(double phi, double omega, double xi3) {
    for (auto [q, x] : {std::pair{&phi_, phi}, std::pair{&omega_, omega}, std::pair{&xi3_, xi3}}) {
        q->push_front(x);
        q->pop_back();
    }
}

void SteeringHistory::push_delta(double delta) {
    delta_.push_front(delta);
    delta_.pop_back();
}

void SteeringHistory::fill(double delta, double phi, double omega, double xi3) {
    std::fill(delta_.begin(), delta_.end(), delta);
    std::fill(phi_.begin(), phi_.end(), phi);
    std::fill(omega_.begin(), omega_.end(), omega);
    std::fill(xi3_.begin(), xi3_.end(), xi3);
}

double SteeringHistory::delta(std::size_t lag) const {
    if (lag < 1 || lag > depth_) throw InputError("SteeringHistory: steering lag out of range");
    return delta_[lag - 1];
}

double SteeringHistory::phi(std::size_t lag) const {
    if (lag > depth_) throw InputError("SteeringHistory: lag out of range");
    return phi_[lag];
}

double SteeringHistory::omega(std::size_t lag) const {
    if (lag > depth_) throw InputError("SteeringHistory: lag out of range");
    return omega_[lag];
}

double SteeringHistory::xi3(std::size_t lag) const {
    if (lag > depth_) throw InputError("SteeringHistory: lag out of range");
    return xi3_[lag];
}

void SteeringSeries::validate() const {
    const std::size_t n = delta.size();
    if (phi.size() != n || omega.size() != n || xi3.size() != n)
        throw InputError("steering series: channel lengths differ");
}

VisualAngles visual_angles(double xi1, double xi2, double xi3, const VehicleParams& params) {
    if (!(xi1 > 0.0)) throw InputError("visual_angles: xi1 must be positive");
    const double heading = std::atan(xi3 / xi1);
    return {heading + std::atan(xi2 / params.near_dist), heading + std::atan(xi2 / params.far_dist)};
}

double two_point_steer(const SteeringHistory& h, const TwoPointGains& g, const VehicleParams& params) {
    return h.delta(1) + g.kn * (h.phi(0) + h.phi(1)) + g.kf * (h.omega(0) + h.omega(1)) +
           g.ki * params.ts * h.phi(0);
}

double generalized_steer(const SteeringHistory& h, const GeneralizedSteeringParams& p) {
    if (static_cast<std::size_t>(p.orders().max()) > h.depth())
        throw InputError("generalized_steer: history shallower than model order");
    double out = 0.0;
    for (std::size_t i = 0; i < p.a.size(); ++i) out += p.a[i] * h.delta(i + 1);
    for (std::size_t i = 0; i < p.b.size(); ++i) out += p.b[i] * h.phi(i);
    for (std::size_t i = 0; i < p.c.size(); ++i) out += p.c[i] * h.omega(i);
    for (std::size_t i = 0; i < p.d.size(); ++i) out += p.d[i] * h.xi3(i);
    return out;
}

FitReport fit_two_point(const SteeringSeries& s, const VehicleParams& params) {
    s.validate();
    const std::size_t n = s.size();
    if (n < 50) throw InputError("fit_two_point: need at least 50 samples");
    const auto rows = static_cast<Eigen::Index>(n - 1);
    Eigen::MatrixXd X(rows, 3);
    Eigen::VectorXd y(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const std::size_t k = static_cast<std::size_t>(r) + 1;
        X(r, 0) = s.phi[k] + s.phi[k - 1];
        X(r, 1) = s.omega[k] + s.omega[k - 1];
        X(r, 2) = params.ts * s.phi[k];
        y(r) = s.delta[k] - s.delta[k - 1];
    }
    const Eigen::VectorXd g = least_squares(X, y);
    const Eigen::VectorXd res = y - X * g;

    FitReport rep;
    rep.model = "two-point";
    rep.gains = TwoPointGains{g(0), g(1), g(2)};
    rep.params = GeneralizedSteeringParams::from_two_point(*rep.gains, params.ts);
    rep.residuals = to_std(res);
    std::vector<double> actual(s.delta.begin() + 1, s.delta.end());
    std::vector<double> pred(actual.size());
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = actual[i] - rep.residuals[i];
    rep.rmse = rmse(pred, actual);
    rep.r2 = r_squared(pred, actual);
    return rep;
}

FitReport fit_generalized(const SteeringSeries& s, const ModelOrders& o, std::optional<std::size_t> start) {
    s.validate();
    o.validate();
    const std::size_t k0 = start.value_or(static_cast<std::size_t>(o.max()));
    if (k0 < static_cast<std::size_t>(o.max())) throw InputError("fit_generalized: start precedes the model order");
    const std::size_t needed = 10 * static_cast<std::size_t>(o.count());
    if (s.size() < k0 + needed)
        throw InputError("fit_generalized: need at least " + std::to_string(needed) + " samples after warm-up");
    const Regression reg = build_regression(s, o, k0);
    const Eigen::VectorXd theta = least_squares(reg.X, reg.y);
    const Eigen::VectorXd res = reg.y - reg.X * theta;

    FitReport rep;
    rep.model = "generalized";
    rep.params = GeneralizedSteeringParams::unflatten(to_std(theta), o);
    rep.residuals = to_std(res);
    const std::vector<double> actual = to_std(reg.y);
    const std::vector<double> pred = to_std(reg.X * theta);
    rep.rmse = rmse(pred, actual);
    rep.r2 = r_squared(pred, actual);
    return rep;
}

double bic(double sse, std::size_t n, int p) {
    const double nn = static_cast<double>(n);
    const double floor = std::numeric_limits<double>::min();
    return nn * std::log(std::max(sse, floor) / nn) + p * std::log(nn);
}

ModelOrders select_order(const SteeringSeries& s, const ModelOrders& max_orders) {
    s.validate();
    max_orders.validate();
    if (max_orders.max() > 6) throw InputError("select_order: max orders must not exceed 6");
    const auto start = static_cast<std::size_t>(max_orders.max());
    ModelOrders best{};
    double best_score = std::numeric_limits<double>::infinity();
    int best_p = 0;
    for (int na = 0; na <= max_orders.na; ++na)
        for (int nb = 0; nb <= max_orders.nb; ++nb)
            for (int nc = 0; nc <= max_orders.nc; ++nc)
                for (int nd = 0; nd <= max_orders.nd; ++nd) {
                    const ModelOrders o{na, nb, nc, nd};
                    const FitReport rep = fit_generalized(s, o, start);
                    double sse = 0.0;
                    for (double r : rep.residuals) sse += r * r;
                    const double score = bic(sse, rep.residuals.size(), o.count());
                    const bool first = best_p == 0;
                    const double tie = first ? 0.0 : 1e-9 * std::max(1.0, std::abs(best_score));
                    if (first || score < best_score - tie ||
                        (std::abs(score - best_score) <= tie && o.count() < best_p)) {
                        best = o;
                        best_score = score;
                        best_p = o.count();
                    }
                }
    return best;
}

std::vector<double> predict_steering(const GeneralizedSteeringParams& p, const SteeringSeries& s, std::size_t warmup,
                                     bool free_run) {
    s.validate();
    p.validate();
    if (warmup < static_cast<std::size_t>(p.orders().max()))
        throw InputError("predict_steering: warm-up shorter than the model order");
    if (warmup >= s.size()) throw InputError("predict_steering: series shorter than warm-up");
    std::vector<double> out(s.delta.begin(), s.delta.end());
    for (std::size_t k = warmup; k < s.size(); ++k) {
        const std::vector<double>& past = free_run ? out : s.delta;
        double v = 0.0;
        for (std::size_t i = 0; i < p.a.size(); ++i) v += p.a[i] * past[k - 1 - i];
        for (std::size_t i = 0; i < p.b.size(); ++i) v += p.b[i] * s.phi[k - i];
        for (std::size_t i = 0; i < p.c.size(); ++i) v += p.c[i] * s.omega[k - i];
        for (std::size_t i = 0; i < p.d.size(); ++i) v += p.d[i] * s.xi3[k - i];
        out[k] = v;
    }
    return {out.begin() + static_cast<std::ptrdiff_t>(warmup), out.end()};
}

}  // namespace advisor
