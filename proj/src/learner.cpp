#include "ntkal/learner.hpp"

#include <cmath>
#include <stdexcept>

namespace ntkal::learner {

AugmentedPoint AugmentedPoint::from_raw(const Eigen::VectorXd& x) {
    AugmentedPoint p;
    p.raw = x;
    const auto d = x.size();
    p.plus = Eigen::VectorXd::Zero(2 * d);
    p.plus.head(d) = x;
    p.minus = Eigen::VectorXd::Zero(2 * d);
    p.minus.tail(d) = x;
    return p;
}

Learner::Learner(const LearnerConfig& config, nn::NetworkParams net)
    : config_(config), net_(std::move(net)) {
    if (config_.S < 0.0) throw std::invalid_argument("learner: S must be >= 0");
    if (config_.delta <= 0.0 || config_.delta >= 1.0)
        throw std::invalid_argument("learner: delta must be in (0,1)");
    if (config_.variant != net_.variant)
        throw std::invalid_argument("learner: config/network variant mismatch");
    if (config_.variant == nn::Variant::nonfrozen && config_.horizon_T < 1)
        throw std::invalid_argument("learner: nonfrozen variant needs horizon_T >= 1");
    const long p = net_.param_count();
    Zinv_ = Eigen::MatrixXd::Identity(p, p);
    b_ = Eigen::VectorXd::Zero(p);
    v_ = Eigen::VectorXd::Zero(p);
}

double Learner::gamma() const {
    if (config_.variant == nn::Variant::frozen)
        return std::sqrt(logdetZ_ + 2.0 * std::log(1.0 / config_.delta)) + config_.S;
    return 3.0 * (std::sqrt(logdetZ_ + 3.0 * std::log(1.0 / config_.delta)) +
                  config_.S);
}

double Learner::upper_index(const Eigen::VectorXd& arm, Eigen::VectorXd* phi_out,
                            double* znorm_out) const {
    // The network weights equal theta0 for the frozen variant and theta_{t-1}
    // for the nonfrozen one, so the decision-time feature map is always the
    // gradient at the current weights.
    Eigen::VectorXd phi = nn::feature_map(arm, net_, nn::At::current);
    const double znorm = std::sqrt(std::max(0.0, phi.dot(Zinv_ * phi)));
    double u;
    if (config_.variant == nn::Variant::frozen) {
        // sqrt(m) <phi, theta - theta0> = phi' Z^-1 b, cached in v_.
        u = phi.dot(v_) + gamma() * znorm;
    } else {
        u = nn::forward(arm, net_) + gamma() * znorm +
            1.0 / std::sqrt(static_cast<double>(config_.horizon_T));
    }
    if (phi_out) *phi_out = std::move(phi);
    if (znorm_out) *znorm_out = znorm;
    return u;
}

Decision Learner::observe(const AugmentedPoint& point) const {
    Eigen::VectorXd phi_plus, phi_minus;
    double norm_plus = 0.0, norm_minus = 0.0;
    Decision d;
    d.U_plus = upper_index(point.plus, &phi_plus, &norm_plus);
    d.U_minus = upper_index(point.minus, &phi_minus, &norm_minus);
    d.action = (d.U_plus >= d.U_minus) ? +1 : -1;
    const double chosen_u = (d.action > 0) ? d.U_plus : d.U_minus;
    const double chosen_norm = (d.action > 0) ? norm_plus : norm_minus;
    d.phi = (d.action > 0) ? std::move(phi_plus) : std::move(phi_minus);
    d.znorm2 = chosen_norm * chosen_norm;
    d.margin_hat = chosen_u - 0.5;
    d.B = 2.0 * gamma() * chosen_norm;
    if (config_.variant == nn::Variant::nonfrozen)
        d.B += 2.0 / std::sqrt(static_cast<double>(config_.horizon_T));
    d.query = config_.force_query || std::abs(d.margin_hat) <= d.B;
    return d;
}

void Learner::update(const AugmentedPoint& point, const Decision& decision,
                     int loss) {
    if (loss != 0 && loss != 1)
        throw std::invalid_argument("learner: loss must be 0 or 1");
    const Eigen::VectorXd& phi = decision.phi;
    if (phi.size() != Zinv_.rows())
        throw std::invalid_argument("learner: decision feature size mismatch");

    const Eigen::VectorXd w = Zinv_ * phi;
    const double denom = 1.0 + phi.dot(w);
    if (denom <= 0.0)
        throw std::runtime_error(
            "learner: rank-one update denominator <= 0 (PSD invariant broken)");
    Zinv_.noalias() -= (w * w.transpose()) / denom;
    logdetZ_ += std::log(denom);
    ++queries_;

    if (config_.variant == nn::Variant::frozen) {
        b_ += (1.0 - loss) * phi;
        v_ = Zinv_ * b_;
    } else {
        hist_contexts_.push_back(point.arm(decision.action));
        hist_losses_.push_back(static_cast<double>(loss));
        // Retrain from theta0 on all queried examples so far.
        nn::NetworkParams start = net_;
        start.set_from_flat(net_.theta0);
        net_ = nn::train_nn(config_.train, hist_contexts_, hist_losses_, start);
    }
}

}  // namespace ntkal::learner
