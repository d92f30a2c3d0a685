#include "stwf/mlp.hpp"

#include <random>

namespace stwf {

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Relu: return "relu";
        case Activation::Softplus: return "softplus";
        case Activation::Tanh: return "tanh";
        case Activation::Sigmoid: return "sigmoid";
    }
    return "identity";
}

Activation activation_from_string(const std::string& name) {
    if (name == "identity") return Activation::Identity;
    if (name == "relu") return Activation::Relu;
    if (name == "softplus") return Activation::Softplus;
    if (name == "tanh") return Activation::Tanh;
    if (name == "sigmoid") return Activation::Sigmoid;
    throw ValidationError("unknown activation '" + name + "'");
}

double activate(Activation a, double u) {
    switch (a) {
        case Activation::Identity: return u;
        case Activation::Relu: return u > 0 ? u : 0.0;
        case Activation::Softplus: return u > 0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
        case Activation::Tanh: return std::tanh(u);
        case Activation::Sigmoid: return sigmoid(u);
    }
    return u;
}

double activate_derivative(Activation a, double u) {
    switch (a) {
        case Activation::Identity: return 1.0;
        case Activation::Relu: return u > 0 ? 1.0 : 0.0;
        case Activation::Softplus: return sigmoid(u);
        case Activation::Tanh: {
            const double t = std::tanh(u);
            return 1.0 - t * t;
        }
        case Activation::Sigmoid: {
            const double s = sigmoid(u);
            return s * (1.0 - s);
        }
    }
    return 1.0;
}

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    require(!layers_.empty(), "network needs at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        require(layers_[l].bias.size() == layers_[l].weight.rows(), "bias/weight shape mismatch");
        if (l > 0) {
            require(layers_[l].weight.cols() == layers_[l - 1].weight.rows(),
                    "layer widths do not chain");
        }
    }
}

Mlp Mlp::random(const std::vector<int>& widths, Activation hidden, Activation output,
                std::uint64_t seed) {
    require(widths.size() >= 2, "network needs input and output widths");
    std::mt19937_64 rng(seed);
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const int in = widths[l];
        const int out = widths[l + 1];
        require(in > 0 && out > 0, "layer widths must be positive");
        std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / (in + out)));
        DenseLayer layer;
        layer.weight.resize(out, in);
        for (int r = 0; r < out; ++r) {
            for (int c = 0; c < in; ++c) {
                layer.weight(r, c) = normal(rng);
            }
        }
        layer.bias = Vector::Zero(out);
        layer.activation = (l + 2 == widths.size()) ? output : hidden;
        layers.push_back(std::move(layer));
    }
    return Mlp(std::move(layers));
}

Index Mlp::num_params() const {
    Index n = 0;
    for (const auto& layer : layers_) {
        n += layer.weight.size() + layer.bias.size();
    }
    return n;
}

Vector Mlp::params() const {
    Vector theta(num_params());
    Index k = 0;
    for (const auto& layer : layers_) {
        for (Index r = 0; r < layer.weight.rows(); ++r) {
            for (Index c = 0; c < layer.weight.cols(); ++c) {
                theta[k++] = layer.weight(r, c);
            }
        }
        theta.segment(k, layer.bias.size()) = layer.bias;
        k += layer.bias.size();
    }
    return theta;
}

void Mlp::set_params(const Vector& theta) {
    require(theta.size() == num_params(), "parameter vector has wrong length");
    Index k = 0;
    for (auto& layer : layers_) {
        for (Index r = 0; r < layer.weight.rows(); ++r) {
            for (Index c = 0; c < layer.weight.cols(); ++c) {
                layer.weight(r, c) = theta[k++];
            }
        }
        layer.bias = theta.segment(k, layer.bias.size());
        k += layer.bias.size();
    }
}

Vector Mlp::forward(const Vector& x) const {
    require_dim(x, input_dim(), "network input");
    Vector a = x;
    for (const auto& layer : layers_) {
        Vector z = layer.weight * a + layer.bias;
        a = z.unaryExpr([&](double u) { return activate(layer.activation, u); });
    }
    return a;
}

Matrix Mlp::forward_cached(const Matrix& inputs, Cache& cache) const {
    require(inputs.cols() == input_dim(), "network input has wrong width");
    cache.pre.clear();
    cache.post.clear();
    cache.post.push_back(inputs);
    for (const auto& layer : layers_) {
        Matrix z = cache.post.back() * layer.weight.transpose();
        z.rowwise() += layer.bias.transpose();
        Matrix a = z.unaryExpr([&](double u) { return activate(layer.activation, u); });
        cache.pre.push_back(std::move(z));
        cache.post.push_back(std::move(a));
    }
    return cache.post.back();
}

Matrix Mlp::forward_batch(const Matrix& inputs) const {
    Cache cache;
    return forward_cached(inputs, cache);
}

Matrix Mlp::input_jacobian(const Vector& x) const {
    require_dim(x, input_dim(), "network input");
    Matrix jac = Matrix::Identity(input_dim(), input_dim());
    Vector a = x;
    for (const auto& layer : layers_) {
        Vector z = layer.weight * a + layer.bias;
        Vector slope = z.unaryExpr([&](double u) { return activate_derivative(layer.activation, u); });
        jac = slope.asDiagonal() * (layer.weight * jac);
        a = z.unaryExpr([&](double u) { return activate(layer.activation, u); });
    }
    return jac;
}

Matrix Mlp::input_gradient_batch(const Matrix& inputs) const {
    require(output_dim() == 1, "input gradient needs a scalar-output network");
    Cache cache;
    forward_cached(inputs, cache);
    Matrix g = Matrix::Ones(inputs.rows(), 1);
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const auto& layer = layers_[l];
        Matrix slope = cache.pre[l].unaryExpr(
            [&](double u) { return activate_derivative(layer.activation, u); });
        g = g.cwiseProduct(slope) * layer.weight;
    }
    return g;
}

Vector Mlp::param_gradient_batch(const Matrix& inputs, const Matrix& output_grad) const {
    require(output_grad.rows() == inputs.rows() && output_grad.cols() == output_dim(),
            "output gradient has wrong shape");
    Cache cache;
    forward_cached(inputs, cache);
    std::vector<Matrix> dweights(layers_.size());
    std::vector<Vector> dbiases(layers_.size());
    Matrix g = output_grad;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const auto& layer = layers_[l];
        Matrix slope = cache.pre[l].unaryExpr(
            [&](double u) { return activate_derivative(layer.activation, u); });
        Matrix delta = g.cwiseProduct(slope);
        dweights[l] = delta.transpose() * cache.post[l];
        dbiases[l] = delta.colwise().sum().transpose();
        if (l > 0) {
            g = delta * layer.weight;
        }
    }
    Vector theta(num_params());
    Index k = 0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        for (Index r = 0; r < dweights[l].rows(); ++r) {
            for (Index c = 0; c < dweights[l].cols(); ++c) {
                theta[k++] = dweights[l](r, c);
            }
        }
        theta.segment(k, dbiases[l].size()) = dbiases[l];
        k += dbiases[l].size();
    }
    return theta;
}

Adam::Adam(Index size, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps), m_(Vector::Zero(size)), v_(Vector::Zero(size)) {}

void Adam::step(Vector& params, const Vector& grad, double lr) {
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

}  // namespace stwf
