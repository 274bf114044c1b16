#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace hrvnet::nn {

struct NetworkConfig {
    int input_dim = 20;
    std::vector<int> hidden_sizes{64, 64, 64, 128, 128, 128, 256};
    double leaky_slope = 0.01;
    double dropout_rate = 0.5;
    double l2_coeff = 1e-4;
    double learning_rate = 0.001;
    int batch_size = 64;
    int epochs = 400;
    std::uint64_t seed = 0;

    void validate() const;  // throws ValidationError
};

// Row-major dense matrix.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
    double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
};

// One affine layer: weights are (out x in), one bias per output unit.
struct Layer {
    Matrix weights;
    std::vector<double> bias;
};

// Seven shared hidden layers plus the two single-unit sigmoid heads.
struct NetworkParams {
    std::vector<Layer> hidden;
    Layer head_expert;
    Layer head_load;

    int input_dim() const { return hidden.empty() ? 0 : hidden.front().weights.cols; }
    // Throws ValidationError when the layer chain is inconsistent or any
    // entry is non-finite.
    void validate() const;
};

// Seeded He-uniform initialization (bound sqrt(6/fan_in)), zero biases.
// Deterministic for a given config.seed.
NetworkParams init_network(const NetworkConfig& config);

enum class Mode { train, eval };

struct HeadProbabilities {
    double p_expert = 0.5;
    double p_high_load = 0.5;
};

struct MultitaskLabels {
    int expert = 0;
    int high_load = 0;
};

// Sigmoid outputs are clamped into [kProbEps, 1 - kProbEps] before any log.
inline constexpr double kProbEps = 1e-7;

// Everything backward() needs: layer inputs, pre-activations, dropout masks
// (already carrying the 1/(1-rate) inverted-dropout scale) and head outputs.
struct ForwardCache {
    Matrix input;
    std::vector<Matrix> pre;         // pre-activation per hidden layer
    std::vector<Matrix> activation;  // post leaky-ReLU (+ dropout in train mode)
    std::vector<Matrix> mask;        // dropout scale per unit; empty in eval mode
    std::vector<double> z_expert;    // head pre-activations, one per row
    std::vector<double> z_load;
    std::vector<double> p_expert;    // clamped sigmoid outputs
    std::vector<double> p_load;
    Mode mode = Mode::eval;
    double leaky_slope = 0.01;  // slope used in the producing forward pass

    std::vector<HeadProbabilities> probabilities() const;
};

// Hidden layers: affine -> leaky ReLU -> (train only) inverted dropout.
// Heads: affine -> sigmoid. The mask_seed fully determines the dropout
// pattern; eval mode ignores it.
ForwardCache forward(const NetworkParams& params, const Matrix& batch,
                     const NetworkConfig& config, Mode mode, std::uint64_t mask_seed);

struct LossBreakdown {
    double l_expertise = 0.0;
    double l_cognitive_load = 0.0;
    double l2_penalty = 0.0;
    double l_total = 0.0;  // l_expertise + l_cognitive_load + l2_penalty
};

// Mean binary cross-entropy per head plus l2_coeff * sum of squared weights
// (biases excluded).
LossBreakdown loss(const ForwardCache& cache, std::span<const MultitaskLabels> labels,
                   const NetworkParams& params, double l2_coeff);

struct Gradients {
    std::vector<Layer> hidden;
    Layer head_expert;
    Layer head_load;
};

// Exact gradients of l_total for the forward pass that produced the cache,
// including the L2 term and the dropout masks used in that pass.
Gradients backward(const NetworkParams& params, const ForwardCache& cache,
                   std::span<const MultitaskLabels> labels, double l2_coeff);

struct AdamState {
    std::vector<Layer> m_hidden, v_hidden;
    Layer m_head_expert, v_head_expert;
    Layer m_head_load, v_head_load;
    long step = 0;

    static AdamState zeros_like(const NetworkParams& params);
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// Standard bias-corrected Adam update, in place.
void adam_step(NetworkParams& params, const Gradients& grads, AdamState& state,
               double learning_rate);

struct Dataset {
    Matrix x;  // one row per example
    std::vector<MultitaskLabels> y;
};

struct TrainResult {
    NetworkParams params;
    std::vector<LossBreakdown> epoch_losses;
};

// Full training loop: per-epoch seeded shuffling, mini-batches (short final
// batch included), Adam. Deterministic for a given config.seed. Throws
// NumericalError if the loss stops being finite.
TrainResult train(const Dataset& dataset, const NetworkConfig& config);

// Eval-mode forward on a single feature row.
HeadProbabilities predict(const NetworkParams& params, const NetworkConfig& config,
                          std::span<const double> features);

// JSON checkpoint with config echo, layer shapes and row-major weights.
// Loading validates the shape chain against the embedded config.
void save_checkpoint(const std::filesystem::path& path, const NetworkParams& params,
                     const NetworkConfig& config);
std::pair<NetworkParams, NetworkConfig> load_checkpoint(const std::filesystem::path& path);

}  // namespace hrvnet::nn
