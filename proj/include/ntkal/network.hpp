#ifndef NTKAL_NETWORK_HPP
#define NTKAL_NETWORK_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace ntkal::nn {

enum class Variant { frozen, nonfrozen };

// Fully connected ReLU network f(x) = sqrt(m) W_n relu(... relu(W_1 x)).
// The nonfrozen variant duplicates the input as [x,x]/sqrt(2) and arranges
// the weights block-diagonally with an antisymmetric output row, so that
// f(x, theta0) = 0 exactly at initialization.
//
// Parameters flatten layer-major (W_1 first, each matrix row-major); feature
// vectors, Z and b in the learner all use this order.
struct NetworkParams {
    std::vector<Eigen::MatrixXd> weights;  // W_1 ... W_n
    int input_dim = 0;   // dimension of the raw input x
    int width = 0;       // m
    int depth = 0;       // n >= 2
    Variant variant = Variant::frozen;
    Eigen::VectorXd theta0;  // flat snapshot taken at init

    long param_count() const;
    Eigen::VectorXd flatten() const;
    void set_from_flat(const Eigen::VectorXd& theta);
};

struct TrainConfig {
    double eta = 0.0;  // step size; eta * m < 1 keeps the regularizer step contractive
    int J = 100;       // full-batch gradient steps
    int m = 0;         // width (regularizer weight)
};

// Frozen: hidden entries ~ N(0, 2/m), output ~ N(0, 1/m).
// Nonfrozen: half-width blocks drawn with variances 4/m and 2/m, duplicated.
NetworkParams init_network(int input_dim, int m, int n, std::uint64_t seed,
                           Variant variant);

double forward(const Eigen::VectorXd& x, const NetworkParams& params);

// Exact backprop gradient of forward w.r.t. all weights, flattened.
// Subgradient convention: relu'(0) = 0.
Eigen::VectorXd gradient(const Eigen::VectorXd& x, const NetworkParams& params);

enum class At { theta0, current };

// phi(x) = g(x; theta) / sqrt(m) at the requested snapshot.
Eigen::VectorXd feature_map(const Eigen::VectorXd& x, const NetworkParams& params,
                            At at);

// Full-batch gradient descent on
//   L(theta) = sum_i (f(x_i, theta) - 1 + loss_i)^2 / 2 + m ||theta - theta0||^2
// starting from theta_start; returns theta^(J).  theta0 is theta_start.theta0.
NetworkParams train_nn(const TrainConfig& config,
                       const std::vector<Eigen::VectorXd>& contexts,
                       const std::vector<double>& losses,
                       const NetworkParams& theta_start);

// The objective above; exposed for tests and per-step monitoring.
double train_loss(const NetworkParams& params,
                  const std::vector<Eigen::VectorXd>& contexts,
                  const std::vector<double>& losses);

void save_params(const std::string& path, const NetworkParams& params);

}  // namespace ntkal::nn

#endif
