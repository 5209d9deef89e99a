#ifndef NTKAL_LEARNER_HPP
#define NTKAL_LEARNER_HPP

#include <Eigen/Dense>
#include <vector>

#include "ntkal/network.hpp"

namespace ntkal::learner {

// A context x paired into the two action embeddings (x,0) and (0,x); all
// three vectors are unit norm.
struct AugmentedPoint {
    Eigen::VectorXd raw;    // x in R^d
    Eigen::VectorXd plus;   // (x, 0) in R^{2d}, action +1
    Eigen::VectorXd minus;  // (0, x) in R^{2d}, action -1

    static AugmentedPoint from_raw(const Eigen::VectorXd& x);
    const Eigen::VectorXd& arm(int action) const { return action > 0 ? plus : minus; }
};

struct LearnerConfig {
    double S = 0.0;
    double delta = 0.05;
    nn::Variant variant = nn::Variant::frozen;
    long horizon_T = 0;       // required by the nonfrozen 1/sqrt(T) terms
    nn::TrainConfig train;    // nonfrozen only
    bool force_query = false; // passive reference mode: query every round
};

struct Decision {
    int action = +1;        // argmax_a U_a, ties to +1
    bool query = false;     // |margin_hat| <= B
    double U_plus = 0.0;
    double U_minus = 0.0;
    double B = 0.0;
    double margin_hat = 0.0;  // U_{chosen} - 1/2
    double znorm2 = 0.0;      // ||phi_{chosen}||^2 in the Z^-1 norm
    Eigen::VectorXd phi;      // feature of the chosen arm, cached for update()
};

// Selective-sampling base learner over the confidence ellipsoid in feature
// space.  Frozen variant keeps theta via the closed form Z^-1 b / sqrt(m);
// the nonfrozen variant retrains the network on all queried examples.
//
// Z^-1 and log det Z are maintained incrementally (Sherman-Morrison plus a
// scalar log update); cost per queried round is O(p^2).
class Learner {
public:
    Learner(const LearnerConfig& config, nn::NetworkParams net);

    // Polls the round-t decision without mutating any state.
    Decision observe(const AugmentedPoint& point) const;

    // Apply the post-label update for a queried round; loss in {0,1}.
    // Throws std::runtime_error if the rank-one update breaks positive
    // definiteness (denominator <= 0).
    void update(const AugmentedPoint& point, const Decision& decision, int loss);

    // Immutable deep copy usable as a classifier snapshot.
    Learner snapshot() const { return *this; }
    int predict(const AugmentedPoint& point) const { return observe(point).action; }

    double gamma() const;  // radius gamma_{t-1} from the current state
    double logdetZ() const { return logdetZ_; }
    long queries() const { return queries_; }
    const LearnerConfig& config() const { return config_; }
    const Eigen::MatrixXd& Zinv() const { return Zinv_; }
    const nn::NetworkParams& net() const { return net_; }

private:
    double upper_index(const Eigen::VectorXd& arm, Eigen::VectorXd* phi_out,
                       double* znorm_out) const;

    LearnerConfig config_;
    nn::NetworkParams net_;
    Eigen::MatrixXd Zinv_;   // starts at I
    double logdetZ_ = 0.0;
    Eigen::VectorXd b_;      // frozen variant
    Eigen::VectorXd v_;      // cached Z^-1 b
    long queries_ = 0;
    // Queried history for nonfrozen retraining.
    std::vector<Eigen::VectorXd> hist_contexts_;
    std::vector<double> hist_losses_;
};

}  // namespace ntkal::learner

#endif
