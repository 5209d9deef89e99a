#include "ntkal/network.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace ntkal::nn {

namespace {

// Nonfrozen networks consume the duplicated embedding [x, x]/sqrt(2).
Eigen::VectorXd embed(const Eigen::VectorXd& x, const NetworkParams& params) {
    if (x.size() != params.input_dim)
        throw std::invalid_argument("network: input dimension mismatch");
    if (params.variant == Variant::frozen) return x;
    Eigen::VectorXd xd(2 * params.input_dim);
    xd << x, x;
    return xd / std::sqrt(2.0);
}

}  // namespace

long NetworkParams::param_count() const {
    long p = 0;
    for (const auto& w : weights) p += w.size();
    return p;
}

Eigen::VectorXd NetworkParams::flatten() const {
    Eigen::VectorXd theta(param_count());
    long off = 0;
    for (const auto& w : weights) {
        for (int r = 0; r < w.rows(); ++r)
            for (int c = 0; c < w.cols(); ++c) theta(off++) = w(r, c);
    }
    return theta;
}

void NetworkParams::set_from_flat(const Eigen::VectorXd& theta) {
    if (theta.size() != param_count())
        throw std::invalid_argument("set_from_flat: length mismatch");
    long off = 0;
    for (auto& w : weights) {
        for (int r = 0; r < w.rows(); ++r)
            for (int c = 0; c < w.cols(); ++c) w(r, c) = theta(off++);
    }
}

NetworkParams init_network(int input_dim, int m, int n, std::uint64_t seed,
                           Variant variant) {
    if (m < 2) throw std::invalid_argument("init_network: m must be >= 2");
    if (n < 2) throw std::invalid_argument("init_network: n must be >= 2");
    if (input_dim < 1) throw std::invalid_argument("init_network: input_dim >= 1");
    if (variant == Variant::nonfrozen && m % 2 != 0)
        throw std::invalid_argument("init_network: nonfrozen variant needs even m");

    std::mt19937_64 rng(seed);
    NetworkParams params;
    params.input_dim = input_dim;
    params.width = m;
    params.depth = n;
    params.variant = variant;
    params.weights.resize(n);

    auto draw = [&](int rows, int cols, double var) {
        std::normal_distribution<double> g(0.0, std::sqrt(var));
        Eigen::MatrixXd w(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) w(r, c) = g(rng);
        return w;
    };

    if (variant == Variant::frozen) {
        params.weights[0] = draw(m, input_dim, 2.0 / m);
        for (int l = 1; l < n - 1; ++l) params.weights[l] = draw(m, m, 2.0 / m);
        params.weights[n - 1] = draw(1, m, 1.0 / m);
    } else {
        const int half = m / 2;
        auto duplicate = [&](const Eigen::MatrixXd& block) {
            Eigen::MatrixXd w =
                Eigen::MatrixXd::Zero(2 * block.rows(), 2 * block.cols());
            w.topLeftCorner(block.rows(), block.cols()) = block;
            w.bottomRightCorner(block.rows(), block.cols()) = block;
            return w;
        };
        params.weights[0] = duplicate(draw(half, input_dim, 4.0 / m));
        for (int l = 1; l < n - 1; ++l)
            params.weights[l] = duplicate(draw(half, half, 4.0 / m));
        Eigen::MatrixXd w_out(1, m);
        Eigen::MatrixXd half_out = draw(1, half, 2.0 / m);
        w_out << half_out, -half_out;
        params.weights[n - 1] = w_out;
    }

    params.theta0 = params.flatten();
    return params;
}

double forward(const Eigen::VectorXd& x, const NetworkParams& params) {
    Eigen::VectorXd z = embed(x, params);
    for (int l = 0; l + 1 < params.depth; ++l)
        z = (params.weights[l] * z).cwiseMax(0.0);
    return std::sqrt(static_cast<double>(params.width)) *
           (params.weights[params.depth - 1] * z)(0);
}

Eigen::VectorXd gradient(const Eigen::VectorXd& x, const NetworkParams& params) {
    const int n = params.depth;
    const double scale = std::sqrt(static_cast<double>(params.width));

    std::vector<Eigen::VectorXd> act(n);  // act[l] = input to layer l
    act[0] = embed(x, params);
    std::vector<Eigen::VectorXd> pre(n - 1);
    for (int l = 0; l + 1 < n; ++l) {
        pre[l] = params.weights[l] * act[l];
        act[l + 1] = pre[l].cwiseMax(0.0);
    }

    Eigen::VectorXd grad(params.param_count());
    std::vector<Eigen::MatrixXd> dw(n);
    dw[n - 1] = scale * act[n - 1].transpose();
    Eigen::VectorXd delta = scale * params.weights[n - 1].transpose();
    for (int l = n - 2; l >= 0; --l) {
        // relu'(0) = 0 by convention
        delta = (pre[l].array() > 0.0).select(delta, 0.0);
        dw[l] = delta * act[l].transpose();
        if (l > 0) delta = params.weights[l].transpose() * delta;
    }

    long off = 0;
    for (int l = 0; l < n; ++l) {
        const auto& w = dw[l];
        for (int r = 0; r < w.rows(); ++r)
            for (int c = 0; c < w.cols(); ++c) grad(off++) = w(r, c);
    }
    return grad;
}

Eigen::VectorXd feature_map(const Eigen::VectorXd& x, const NetworkParams& params,
                            At at) {
    const double root_m = std::sqrt(static_cast<double>(params.width));
    if (at == At::current) return gradient(x, params) / root_m;
    NetworkParams frozen = params;
    frozen.set_from_flat(params.theta0);
    return gradient(x, frozen) / root_m;
}

double train_loss(const NetworkParams& params,
                  const std::vector<Eigen::VectorXd>& contexts,
                  const std::vector<double>& losses) {
    double total = 0.0;
    for (size_t i = 0; i < contexts.size(); ++i) {
        const double r = forward(contexts[i], params) - 1.0 + losses[i];
        total += 0.5 * r * r;
    }
    total += params.width * (params.flatten() - params.theta0).squaredNorm();
    return total;
}

NetworkParams train_nn(const TrainConfig& config,
                       const std::vector<Eigen::VectorXd>& contexts,
                       const std::vector<double>& losses,
                       const NetworkParams& theta_start) {
    if (contexts.size() != losses.size())
        throw std::invalid_argument("train_nn: contexts/losses length mismatch");
    if (config.eta < 0.0) throw std::invalid_argument("train_nn: eta must be >= 0");
    if (config.eta * config.m >= 1.0)
        throw std::invalid_argument("train_nn: requires eta * m < 1");

    NetworkParams params = theta_start;
    Eigen::VectorXd theta = params.flatten();
    for (int j = 0; j < config.J; ++j) {
        Eigen::VectorXd grad = 2.0 * config.m * (theta - params.theta0);
        for (size_t i = 0; i < contexts.size(); ++i) {
            const double r = forward(contexts[i], params) - 1.0 + losses[i];
            grad += r * gradient(contexts[i], params);
        }
        theta -= config.eta * grad;
        params.set_from_flat(theta);
    }
    return params;
}

void save_params(const std::string& path, const NetworkParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    const Eigen::VectorXd theta = params.flatten();
    const long p = theta.size();
    out.write(reinterpret_cast<const char*>(&p), sizeof(p));
    out.write(reinterpret_cast<const char*>(theta.data()),
              static_cast<std::streamsize>(p * sizeof(double)));
}

}  // namespace ntkal::nn
