#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace socpinn::nn {

enum class Activation { Relu, Identity };

/// Fully-connected layer. Weights are stored row-major (out_dim x in_dim).
struct DenseLayer {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    std::vector<double> weights;
    std::vector<double> bias;
    Activation activation = Activation::Relu;

    [[nodiscard]] double weight(std::size_t row, std::size_t col) const {
        return weights[row * in_dim + col];
    }
    [[nodiscard]] std::size_t param_count() const { return weights.size() + bias.size(); }
};

/**
 * Dense feed-forward network with a scalar output.
 *
 * Hidden layers use ReLU, the output layer is linear with a single unit.
 * Parameters can only change through `assign_parameters` or an optimizer
 * step; every change bumps `revision()`, which forward caches record so a
 * stale cache is rejected by `backward`.
 */
class Mlp {
public:
    Mlp() = default;
    explicit Mlp(std::vector<DenseLayer> layers);

    [[nodiscard]] const std::vector<DenseLayer>& layers() const { return layers_; }
    [[nodiscard]] std::size_t input_dim() const;
    [[nodiscard]] std::vector<std::size_t> dims() const;
    [[nodiscard]] std::size_t param_count() const;
    [[nodiscard]] std::uint64_t revision() const { return revision_; }

    /// Parameters flattened layer by layer as (weights row-major, bias).
    [[nodiscard]] std::vector<double> flat_parameters() const;
    void assign_parameters(std::span<const double> values);

    /// Used by the optimizer; callers must keep shapes intact.
    std::vector<DenseLayer>& mutable_layers() {
        ++revision_;
        return layers_;
    }

private:
    std::vector<DenseLayer> layers_;
    std::uint64_t revision_ = 0;
};

/// He-style uniform(-sqrt(6/fan_in), +sqrt(6/fan_in)) weights, zero biases.
Mlp init_mlp(std::span<const std::size_t> layer_dims, std::uint64_t seed);

/// Sum over layers of (in + 1) * out.
std::size_t param_count_for(std::span<const std::size_t> layer_dims);

struct LayerGradient {
    std::vector<double> weights;
    std::vector<double> bias;
};

struct Gradients {
    std::vector<LayerGradient> layers;

    static Gradients zeros_like(const Mlp& mlp);
    [[nodiscard]] bool congruent_with(const Mlp& mlp) const;
    [[nodiscard]] std::vector<double> flat() const;
    void set_zero();
    void add_scaled(const Gradients& other, double scale);
};

struct ForwardCache {
    std::vector<std::size_t> dims;
    std::uint64_t revision = 0;
    /// activations[0] is the input; activations[l + 1] is layer l's output.
    std::vector<std::vector<double>> activations;
    std::vector<std::vector<double>> pre_activations;
};

struct ForwardResult {
    double y = 0.0;
    ForwardCache cache;
};

ForwardResult forward(const Mlp& mlp, std::span<const double> x);

/// Same as above but reuses the buffers already held by `cache`.
double forward(const Mlp& mlp, std::span<const double> x, ForwardCache& cache);

/// Forward pass without keeping intermediate values.
double predict(const Mlp& mlp, std::span<const double> x);

struct BackwardResult {
    Gradients grads;
    std::vector<double> dx;
};

BackwardResult backward(const Mlp& mlp, const ForwardCache& cache, double dy);

/// Adds d(y * dy)/d(theta) into `grads`. When `dx` is non-null it receives
/// d(y * dy)/dx.
void backward_accumulate(const Mlp& mlp, const ForwardCache& cache, double dy, Gradients& grads,
                         std::vector<double>* dx = nullptr);

struct MaeResult {
    double loss = 0.0;
    std::vector<double> dpred;
};

/// Mean absolute error with the subgradient sign(0) = 0.
MaeResult mae_loss(std::span<const double> pred, std::span<const double> target);

enum class Algorithm { Sgd, Adam };

struct OptimizerConfig {
    Algorithm algorithm = Algorithm::Adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class OptimizerState {
public:
    OptimizerState(const Mlp& mlp, OptimizerConfig config);

    [[nodiscard]] const OptimizerConfig& config() const { return config_; }
    [[nodiscard]] std::uint64_t step_count() const { return step_; }
    [[nodiscard]] const Gradients& first_moment() const { return m_; }
    [[nodiscard]] const Gradients& second_moment() const { return v_; }

private:
    friend void optimizer_step(Mlp& mlp, const Gradients& grads, OptimizerState& state);

    OptimizerConfig config_;
    std::uint64_t step_ = 0;
    Gradients m_;
    Gradients v_;
};

/// Applies one SGD or Adam update in place. Validates shapes and finiteness
/// before touching any parameter.
void optimizer_step(Mlp& mlp, const Gradients& grads, OptimizerState& state);

/**
 * Worst relative error between backprop gradients and central finite
 * differences over every parameter, for y = mlp(x).
 *
 * Parameters whose +/- eps perturbation flips the sign of any ReLU
 * pre-activation are skipped, since the finite difference straddles a kink.
 * The relative error uses max(|analytic|, |numeric|, 1e-6) as denominator.
 */
double grad_check(const Mlp& mlp, std::span<const double> x, double eps);

}  // namespace socpinn::nn
