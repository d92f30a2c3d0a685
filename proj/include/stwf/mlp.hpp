#ifndef STWF_MLP_HPP
#define STWF_MLP_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "stwf/common.hpp"

namespace stwf {

enum class Activation { Identity, Relu, Softplus, Tanh, Sigmoid };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct DenseLayer {
    Matrix weight;  // out x in
    Vector bias;    // out
    Activation activation = Activation::Identity;
};

/*
 * Small fully-connected network. Batched inputs are n x in matrices (one row
 * per sample); outputs are n x out.
 *
 * Flattened parameter layout, layer by layer: weight in row-major order,
 * then bias.
 */
class Mlp {
public:
    Mlp() = default;
    explicit Mlp(std::vector<DenseLayer> layers);

    /// Glorot-style normal initialisation, deterministic in `seed`.
    static Mlp random(const std::vector<int>& widths, Activation hidden, Activation output,
                      std::uint64_t seed);

    Index input_dim() const { return layers_.front().weight.cols(); }
    Index output_dim() const { return layers_.back().weight.rows(); }
    Index num_params() const;
    const std::vector<DenseLayer>& layers() const { return layers_; }

    Vector params() const;
    void set_params(const Vector& theta);

    Vector forward(const Vector& x) const;
    Matrix forward_batch(const Matrix& inputs) const;

    /// d out / d in at a single point, out x in.
    Matrix input_jacobian(const Vector& x) const;

    /// Gradient of a scalar output (output_dim() == 1) w.r.t. inputs, n x in.
    Matrix input_gradient_batch(const Matrix& inputs) const;

    /// Given dL/d(output) for each row, returns the flattened dL/d(theta)
    /// (summed over rows).
    Vector param_gradient_batch(const Matrix& inputs, const Matrix& output_grad) const;

private:
    struct Cache {
        std::vector<Matrix> pre;   // pre-activations per layer
        std::vector<Matrix> post;  // post[0] = inputs, post[l+1] = act(pre[l])
    };
    Matrix forward_cached(const Matrix& inputs, Cache& cache) const;

    std::vector<DenseLayer> layers_;
};

double activate(Activation a, double u);
double activate_derivative(Activation a, double u);

/// Adaptive-moments optimiser state for one flat parameter vector.
class Adam {
public:
    Adam() = default;
    Adam(Index size, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    /// Applies one descent step to `params` in place.
    void step(Vector& params, const Vector& grad, double lr);

private:
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    long t_ = 0;
    Vector m_;
    Vector v_;
};

}  // namespace stwf

#endif  // STWF_MLP_HPP
