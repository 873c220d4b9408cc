#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "abonn/error.hpp"

namespace abonn {

using Vector = std::vector<double>;

/// Dense row-major matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    /// Builds from nested rows; throws DimensionError on ragged input.
    static Matrix from_rows(const std::vector<Vector>& rows) {
        Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            detail::require_dim(rows[r].size() == m.cols_, "ragged matrix rows");
            for (std::size_t c = 0; c < m.cols_; ++c) m(r, c) = rows[r][c];
        }
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

enum class Activation { relu, identity };

inline const char* to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

struct Layer {
    Matrix weights;  // rows = out-dim, cols = in-dim
    Vector bias;
    Activation activation = Activation::relu;

    std::size_t in_dim() const noexcept { return weights.cols(); }
    std::size_t out_dim() const noexcept { return weights.rows(); }

    bool operator==(const Layer&) const = default;
};

/// A ReLU neuron: index of its layer in the network and of the unit within it.
struct NeuronRef {
    std::size_t layer = 0;
    std::size_t unit = 0;

    auto operator<=>(const NeuronRef&) const = default;
};

/// Input/output affine normalization constants read from NNet files.
struct Normalization {
    Vector input_min, input_max, means, ranges;

    bool operator==(const Normalization&) const = default;
};

/// Feed-forward network of affine layers; every layer but the last applies ReLU.
/// Immutable after construction.
class Network {
public:
    Network() = default;

    explicit Network(std::vector<Layer> layers, std::optional<Normalization> norm = std::nullopt)
        : layers_(std::move(layers)), normalization_(std::move(norm)) {
        detail::require_dim(!layers_.empty(), "network needs at least one layer");
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const Layer& l = layers_[i];
            detail::require_dim(l.out_dim() > 0 && l.in_dim() > 0, "layer with empty weight matrix");
            detail::require_dim(l.bias.size() == l.out_dim(), "bias length differs from weight row count");
            if (i > 0)
                detail::require_dim(l.in_dim() == layers_[i - 1].out_dim(), "adjacent layer dimensions do not chain");
            if (i + 1 < layers_.size() && l.activation != Activation::relu)
                throw DimensionError("only the final layer may use identity activation");
        }
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            if (layers_[i].activation != Activation::relu) break;
            relu_offsets_.push_back(relu_count_);
            relu_count_ += layers_[i].out_dim();
        }
    }

    const std::vector<Layer>& layers() const noexcept { return layers_; }
    std::size_t input_dim() const { return layers_.front().in_dim(); }
    std::size_t output_dim() const { return layers_.back().out_dim(); }

    /// Total number of ReLU neurons.
    std::size_t relu_count() const noexcept { return relu_count_; }
    /// Number of leading layers that apply ReLU.
    std::size_t relu_layer_count() const noexcept { return relu_offsets_.size(); }
    bool is_relu_layer(std::size_t i) const noexcept { return i < relu_offsets_.size(); }

    /// Layer-major flat position of a ReLU neuron.
    std::size_t flat_index(NeuronRef n) const {
        detail::require(is_relu_layer(n.layer) && n.unit < layers_[n.layer].out_dim(), "neuron reference out of range");
        return relu_offsets_[n.layer] + n.unit;
    }

    NeuronRef neuron_at(std::size_t flat) const {
        detail::require(flat < relu_count_, "flat neuron index out of range");
        std::size_t layer = 0;
        while (layer + 1 < relu_offsets_.size() && relu_offsets_[layer + 1] <= flat) ++layer;
        return {layer, flat - relu_offsets_[layer]};
    }

    const std::optional<Normalization>& normalization() const noexcept { return normalization_; }

    bool operator==(const Network& o) const { return layers_ == o.layers_; }

private:
    std::vector<Layer> layers_;
    std::optional<Normalization> normalization_;
    std::vector<std::size_t> relu_offsets_;
    std::size_t relu_count_ = 0;
};

namespace detail {

inline Vector affine(const Layer& l, std::span<const double> x) {
    Vector out(l.bias);
    for (std::size_t r = 0; r < l.out_dim(); ++r) {
        auto w = l.weights.row(r);
        double acc = out[r];
        for (std::size_t c = 0; c < w.size(); ++c) acc += w[c] * x[c];
        out[r] = acc;
    }
    return out;
}

}  // namespace detail

/// Concrete execution: affine map per layer, ReLU on ReLU layers.
inline Vector forward(const Network& net, std::span<const double> x) {
    detail::require_dim(x.size() == net.input_dim(), "input length differs from network input_dim");
    Vector cur(x.begin(), x.end());
    for (const Layer& l : net.layers()) {
        cur = detail::affine(l, cur);
        if (l.activation == Activation::relu)
            for (double& v : cur) v = v > 0.0 ? v : 0.0;
    }
    return cur;
}

/// Pre-activation value of every ReLU neuron, in flat (layer-major) order.
inline Vector pre_activations(const Network& net, std::span<const double> x) {
    detail::require_dim(x.size() == net.input_dim(), "input length differs from network input_dim");
    Vector out;
    out.reserve(net.relu_count());
    Vector cur(x.begin(), x.end());
    for (std::size_t i = 0; i < net.relu_layer_count(); ++i) {
        cur = detail::affine(net.layers()[i], cur);
        out.insert(out.end(), cur.begin(), cur.end());
        for (double& v : cur) v = v > 0.0 ? v : 0.0;
    }
    return out;
}

}  // namespace abonn
