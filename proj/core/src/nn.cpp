#include "socpinn/nn.hpp"

#include "socpinn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace socpinn::nn {

namespace {

void check_finite(std::span<const double> values, const char* what) {
    for (double v : values) {
        if (!std::isfinite(v)) fail(ErrorKind::Numeric, std::string("non-finite value in ") + what);
    }
}

void require_input(const Mlp& mlp, std::span<const double> x) {
    if (mlp.layers().empty()) fail(ErrorKind::Shape, "network has no layers");
    if (x.size() != mlp.input_dim()) {
        fail(ErrorKind::Shape, "input has " + std::to_string(x.size()) + " entries, network expects " +
                                   std::to_string(mlp.input_dim()));
    }
}

// Dense affine map followed by the layer activation.
void apply_layer(const DenseLayer& layer, const double* in, double* pre, double* out) {
    for (std::size_t r = 0; r < layer.out_dim; ++r) {
        const double* row = layer.weights.data() + r * layer.in_dim;
        double acc = layer.bias[r];
        for (std::size_t c = 0; c < layer.in_dim; ++c) acc += row[c] * in[c];
        pre[r] = acc;
        out[r] = (layer.activation == Activation::Relu && acc < 0.0) ? 0.0 : acc;
    }
}

std::vector<bool> relu_pattern(const Mlp& mlp, std::span<const double> x) {
    ForwardCache cache;
    forward(mlp, x, cache);
    std::vector<bool> pattern;
    for (std::size_t l = 0; l < mlp.layers().size(); ++l) {
        if (mlp.layers()[l].activation != Activation::Relu) continue;
        for (double p : cache.pre_activations[l]) pattern.push_back(p > 0.0);
    }
    return pattern;
}

}  // namespace

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) fail(ErrorKind::InvalidArchitecture, "network needs at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        if (layer.in_dim == 0 || layer.out_dim == 0) {
            fail(ErrorKind::InvalidArchitecture, "layer " + std::to_string(l) + " has a zero dimension");
        }
        if (layer.weights.size() != layer.in_dim * layer.out_dim || layer.bias.size() != layer.out_dim) {
            fail(ErrorKind::Shape, "layer " + std::to_string(l) + " parameter sizes disagree with its dims");
        }
        if (l + 1 < layers_.size() && layers_[l + 1].in_dim != layer.out_dim) {
            fail(ErrorKind::InvalidArchitecture,
                 "layer " + std::to_string(l) + " output does not match layer " + std::to_string(l + 1) + " input");
        }
        check_finite(layer.weights, "layer weights");
        check_finite(layer.bias, "layer bias");
    }
    const auto& last = layers_.back();
    if (last.out_dim != 1 || last.activation != Activation::Identity) {
        fail(ErrorKind::InvalidArchitecture, "output layer must be a single linear unit");
    }
}

std::size_t Mlp::input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim; }

std::vector<std::size_t> Mlp::dims() const {
    std::vector<std::size_t> d;
    if (layers_.empty()) return d;
    d.push_back(layers_.front().in_dim);
    for (const auto& layer : layers_) d.push_back(layer.out_dim);
    return d;
}

std::size_t Mlp::param_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) n += layer.param_count();
    return n;
}

std::vector<double> Mlp::flat_parameters() const {
    std::vector<double> out;
    out.reserve(param_count());
    for (const auto& layer : layers_) {
        out.insert(out.end(), layer.weights.begin(), layer.weights.end());
        out.insert(out.end(), layer.bias.begin(), layer.bias.end());
    }
    return out;
}

void Mlp::assign_parameters(std::span<const double> values) {
    if (values.size() != param_count()) {
        fail(ErrorKind::Shape, "expected " + std::to_string(param_count()) + " parameters, got " +
                                   std::to_string(values.size()));
    }
    check_finite(values, "assigned parameters");
    std::size_t pos = 0;
    for (auto& layer : layers_) {
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), layer.weights.size(), layer.weights.begin());
        pos += layer.weights.size();
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), layer.bias.size(), layer.bias.begin());
        pos += layer.bias.size();
    }
    ++revision_;
}

std::size_t param_count_for(std::span<const std::size_t> layer_dims) {
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < layer_dims.size(); ++i) n += (layer_dims[i] + 1) * layer_dims[i + 1];
    return n;
}

Mlp init_mlp(std::span<const std::size_t> layer_dims, std::uint64_t seed) {
    if (layer_dims.size() < 2) fail(ErrorKind::InvalidArchitecture, "need at least input and output dims");
    for (std::size_t d : layer_dims) {
        if (d == 0) fail(ErrorKind::InvalidArchitecture, "layer dims must be positive");
    }
    std::mt19937_64 rng(seed);
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        DenseLayer layer;
        layer.in_dim = layer_dims[l];
        layer.out_dim = layer_dims[l + 1];
        layer.activation = (l + 2 == layer_dims.size()) ? Activation::Identity : Activation::Relu;
        const double limit = std::sqrt(6.0 / static_cast<double>(layer.in_dim));
        std::uniform_real_distribution<double> dist(-limit, limit);
        layer.weights.resize(layer.in_dim * layer.out_dim);
        for (auto& w : layer.weights) w = dist(rng);
        layer.bias.assign(layer.out_dim, 0.0);
        layers.push_back(std::move(layer));
    }
    return Mlp(std::move(layers));
}

Gradients Gradients::zeros_like(const Mlp& mlp) {
    Gradients g;
    g.layers.reserve(mlp.layers().size());
    for (const auto& layer : mlp.layers()) {
        g.layers.push_back({std::vector<double>(layer.weights.size(), 0.0), std::vector<double>(layer.bias.size(), 0.0)});
    }
    return g;
}

bool Gradients::congruent_with(const Mlp& mlp) const {
    if (layers.size() != mlp.layers().size()) return false;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].weights.size() != mlp.layers()[l].weights.size() ||
            layers[l].bias.size() != mlp.layers()[l].bias.size()) {
            return false;
        }
    }
    return true;
}

std::vector<double> Gradients::flat() const {
    std::vector<double> out;
    for (const auto& layer : layers) {
        out.insert(out.end(), layer.weights.begin(), layer.weights.end());
        out.insert(out.end(), layer.bias.begin(), layer.bias.end());
    }
    return out;
}

void Gradients::set_zero() {
    for (auto& layer : layers) {
        std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
        std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
    }
}

void Gradients::add_scaled(const Gradients& other, double scale) {
    if (other.layers.size() != layers.size()) fail(ErrorKind::Shape, "gradient layer counts differ");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        auto& dst = layers[l];
        const auto& src = other.layers[l];
        if (dst.weights.size() != src.weights.size() || dst.bias.size() != src.bias.size()) {
            fail(ErrorKind::Shape, "gradient layer shapes differ");
        }
        for (std::size_t i = 0; i < dst.weights.size(); ++i) dst.weights[i] += scale * src.weights[i];
        for (std::size_t i = 0; i < dst.bias.size(); ++i) dst.bias[i] += scale * src.bias[i];
    }
}

double forward(const Mlp& mlp, std::span<const double> x, ForwardCache& cache) {
    require_input(mlp, x);
    const auto& layers = mlp.layers();
    cache.dims = mlp.dims();
    cache.revision = mlp.revision();
    cache.activations.resize(layers.size() + 1);
    cache.pre_activations.resize(layers.size());
    cache.activations[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        cache.pre_activations[l].resize(layers[l].out_dim);
        cache.activations[l + 1].resize(layers[l].out_dim);
        apply_layer(layers[l], cache.activations[l].data(), cache.pre_activations[l].data(),
                    cache.activations[l + 1].data());
    }
    return cache.activations.back()[0];
}

ForwardResult forward(const Mlp& mlp, std::span<const double> x) {
    ForwardResult result;
    result.y = forward(mlp, x, result.cache);
    return result;
}

double predict(const Mlp& mlp, std::span<const double> x) {
    require_input(mlp, x);
    std::size_t width = x.size();
    for (const auto& layer : mlp.layers()) width = std::max(width, layer.out_dim);
    std::vector<double> a(x.begin(), x.end());
    a.resize(width);
    std::vector<double> b(width);
    std::vector<double> pre(width);
    for (const auto& layer : mlp.layers()) {
        apply_layer(layer, a.data(), pre.data(), b.data());
        std::swap(a, b);
    }
    return a[0];
}

void backward_accumulate(const Mlp& mlp, const ForwardCache& cache, double dy, Gradients& grads,
                         std::vector<double>* dx) {
    const auto& layers = mlp.layers();
    if (cache.dims != mlp.dims() || cache.activations.size() != layers.size() + 1) {
        fail(ErrorKind::Cache, "forward cache was produced by a different architecture");
    }
    if (cache.revision != mlp.revision()) {
        fail(ErrorKind::Cache, "forward cache is stale: parameters changed since the forward pass");
    }
    if (!grads.congruent_with(mlp)) fail(ErrorKind::Shape, "gradient buffer does not match network");

    // delta holds d(y*dy)/d(layer output) and is walked back layer by layer.
    std::vector<double> delta{dy};
    std::vector<double> next;
    for (std::size_t li = layers.size(); li-- > 0;) {
        const auto& layer = layers[li];
        auto& g = grads.layers[li];
        const auto& pre = cache.pre_activations[li];
        const auto& in = cache.activations[li];
        if (layer.activation == Activation::Relu) {
            for (std::size_t r = 0; r < layer.out_dim; ++r) {
                if (pre[r] <= 0.0) delta[r] = 0.0;
            }
        }
        next.assign(layer.in_dim, 0.0);
        for (std::size_t r = 0; r < layer.out_dim; ++r) {
            const double d = delta[r];
            g.bias[r] += d;
            if (d == 0.0) continue;
            double* grow = g.weights.data() + r * layer.in_dim;
            const double* wrow = layer.weights.data() + r * layer.in_dim;
            for (std::size_t c = 0; c < layer.in_dim; ++c) {
                grow[c] += d * in[c];
                next[c] += d * wrow[c];
            }
        }
        std::swap(delta, next);
    }
    if (dx != nullptr) *dx = std::move(delta);
}

BackwardResult backward(const Mlp& mlp, const ForwardCache& cache, double dy) {
    BackwardResult result;
    result.grads = Gradients::zeros_like(mlp);
    backward_accumulate(mlp, cache, dy, result.grads, &result.dx);
    return result;
}

MaeResult mae_loss(std::span<const double> pred, std::span<const double> target) {
    if (pred.empty() || target.empty()) fail(ErrorKind::InvalidInput, "mae_loss needs non-empty vectors");
    if (pred.size() != target.size()) fail(ErrorKind::Shape, "mae_loss vectors differ in length");
    MaeResult result;
    result.dpred.resize(pred.size());
    const double n = static_cast<double>(pred.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double r = pred[i] - target[i];
        sum += std::abs(r);
        result.dpred[i] = r > 0.0 ? 1.0 / n : (r < 0.0 ? -1.0 / n : 0.0);
    }
    result.loss = sum / n;
    return result;
}

OptimizerState::OptimizerState(const Mlp& mlp, OptimizerConfig config) : config_(config) {
    if (!(config.learning_rate >= 0.0) || !std::isfinite(config.learning_rate)) {
        fail(ErrorKind::Config, "learning rate must be finite and non-negative");
    }
    if (config.algorithm == Algorithm::Adam) {
        if (!(config.beta1 >= 0.0 && config.beta1 < 1.0) || !(config.beta2 >= 0.0 && config.beta2 < 1.0) ||
            !(config.epsilon > 0.0)) {
            fail(ErrorKind::Config, "adam needs beta1, beta2 in [0,1) and epsilon > 0");
        }
        m_ = Gradients::zeros_like(mlp);
        v_ = Gradients::zeros_like(mlp);
    }
}

void optimizer_step(Mlp& mlp, const Gradients& grads, OptimizerState& state) {
    if (!grads.congruent_with(mlp)) fail(ErrorKind::Shape, "gradients do not match network shape");
    for (const auto& layer : grads.layers) {
        check_finite(layer.weights, "weight gradient");
        check_finite(layer.bias, "bias gradient");
    }
    const auto& cfg = state.config_;
    if (cfg.algorithm == Algorithm::Adam && !state.m_.congruent_with(mlp)) {
        fail(ErrorKind::Shape, "optimizer moments do not match network shape");
    }
    ++state.step_;

    const double lr = cfg.learning_rate;
    auto& layers = mlp.mutable_layers();
    if (cfg.algorithm == Algorithm::Sgd) {
        for (std::size_t l = 0; l < layers.size(); ++l) {
            for (std::size_t i = 0; i < layers[l].weights.size(); ++i) layers[l].weights[i] -= lr * grads.layers[l].weights[i];
            for (std::size_t i = 0; i < layers[l].bias.size(); ++i) layers[l].bias[i] -= lr * grads.layers[l].bias[i];
        }
        return;
    }

    const double t = static_cast<double>(state.step_);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    auto update = [&](std::vector<double>& params, const std::vector<double>& g, std::vector<double>& m,
                      std::vector<double>& v) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            params[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
        }
    };
    for (std::size_t l = 0; l < layers.size(); ++l) {
        update(layers[l].weights, grads.layers[l].weights, state.m_.layers[l].weights, state.v_.layers[l].weights);
        update(layers[l].bias, grads.layers[l].bias, state.m_.layers[l].bias, state.v_.layers[l].bias);
    }
}

double grad_check(const Mlp& mlp, std::span<const double> x, double eps) {
    if (!(eps > 0.0)) fail(ErrorKind::InvalidInput, "grad_check needs eps > 0");
    const auto base = forward(mlp, x);
    const auto analytic = backward(mlp, base.cache, 1.0).grads.flat();
    const auto base_pattern = relu_pattern(mlp, x);

    const auto params = mlp.flat_parameters();
    Mlp probe = mlp;
    auto values = params;
    double worst = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        values[p] = params[p] + eps;
        probe.assign_parameters(values);
        const double y_plus = predict(probe, x);
        const bool plus_ok = relu_pattern(probe, x) == base_pattern;
        values[p] = params[p] - eps;
        probe.assign_parameters(values);
        const double y_minus = predict(probe, x);
        const bool minus_ok = relu_pattern(probe, x) == base_pattern;
        values[p] = params[p];
        if (!plus_ok || !minus_ok) continue;

        const double numeric = (y_plus - y_minus) / (2.0 * eps);
        const double denom = std::max({std::abs(analytic[p]), std::abs(numeric), 1e-6});
        worst = std::max(worst, std::abs(analytic[p] - numeric) / denom);
    }
    return worst;
}

}  // namespace socpinn::nn
