#include "hrvnet/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "hrvnet/errors.hpp"

namespace hrvnet::nn {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double clamp_prob(double p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }

// Z = X * W^T + b, one output row per batch row.
Matrix affine(const Matrix& x, const Layer& layer) {
    const Matrix& w = layer.weights;
    Matrix z(x.rows, w.rows);
    for (int i = 0; i < x.rows; ++i) {
        const double* xi = x.row(i);
        double* zi = z.row(i);
        for (int o = 0; o < w.rows; ++o) {
            const double* wo = w.row(o);
            double acc = layer.bias[o];
            for (int k = 0; k < w.cols; ++k) {
                acc += xi[k] * wo[k];
            }
            zi[o] = acc;
        }
    }
    return z;
}

Layer zero_layer_like(const Layer& layer) {
    Layer out;
    out.weights = Matrix(layer.weights.rows, layer.weights.cols);
    out.bias.assign(layer.bias.size(), 0.0);
    return out;
}

// dL/dW and dL/db of one affine layer given dL/dZ, plus dL/dX for the chain.
void affine_backward(const Matrix& x, const Layer& layer, const Matrix& dz, Layer& grad,
                     Matrix* dx) {
    const Matrix& w = layer.weights;
    for (int i = 0; i < dz.rows; ++i) {
        const double* xi = x.row(i);
        const double* dzi = dz.row(i);
        for (int o = 0; o < w.rows; ++o) {
            const double g = dzi[o];
            if (g == 0.0) continue;
            double* gw = grad.weights.row(o);
            for (int k = 0; k < w.cols; ++k) {
                gw[k] += g * xi[k];
            }
            grad.bias[o] += g;
        }
    }
    if (dx) {
        *dx = Matrix(x.rows, x.cols);
        for (int i = 0; i < dz.rows; ++i) {
            const double* dzi = dz.row(i);
            double* dxi = dx->row(i);
            for (int o = 0; o < w.rows; ++o) {
                const double g = dzi[o];
                if (g == 0.0) continue;
                const double* wo = w.row(o);
                for (int k = 0; k < w.cols; ++k) {
                    dxi[k] += g * wo[k];
                }
            }
        }
    }
}

void adam_update_layer(Layer& p, const Layer& g, Layer& m, Layer& v, double lr, double bc1,
                       double bc2) {
    const auto update = [&](double& param, double grad, double& m1, double& m2) {
        m1 = kAdamBeta1 * m1 + (1.0 - kAdamBeta1) * grad;
        m2 = kAdamBeta2 * m2 + (1.0 - kAdamBeta2) * grad * grad;
        const double mhat = m1 / bc1;
        const double vhat = m2 / bc2;
        param -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
    };
    for (size_t i = 0; i < p.weights.data.size(); ++i) {
        update(p.weights.data[i], g.weights.data[i], m.weights.data[i], v.weights.data[i]);
    }
    for (size_t i = 0; i < p.bias.size(); ++i) {
        update(p.bias[i], g.bias[i], m.bias[i], v.bias[i]);
    }
}

}  // namespace

void NetworkConfig::validate() const {
    if (input_dim <= 0) throw ValidationError("network config: input_dim must be positive");
    if (hidden_sizes.empty()) throw ValidationError("network config: need at least one hidden layer");
    for (int s : hidden_sizes) {
        if (s <= 0) throw ValidationError("network config: hidden sizes must be positive");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        throw ValidationError("network config: dropout rate must be in [0, 1)");
    }
    if (!(learning_rate > 0.0)) throw ValidationError("network config: learning rate must be positive");
    if (batch_size <= 0) throw ValidationError("network config: batch size must be positive");
    if (epochs <= 0) throw ValidationError("network config: epochs must be positive");
    if (l2_coeff < 0.0) throw ValidationError("network config: l2 coefficient must be >= 0");
    if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) {
        throw ValidationError("network config: leaky slope must be in [0, 1)");
    }
}

void NetworkParams::validate() const {
    if (hidden.empty()) throw ValidationError("network params: no hidden layers");
    int expect = hidden.front().weights.cols;
    for (const Layer& layer : hidden) {
        if (layer.weights.cols != expect) {
            throw ValidationError("network params: broken layer shape chain");
        }
        if (static_cast<int>(layer.bias.size()) != layer.weights.rows) {
            throw ValidationError("network params: bias size mismatch");
        }
        expect = layer.weights.rows;
    }
    for (const Layer* head : {&head_expert, &head_load}) {
        if (head->weights.rows != 1 || head->weights.cols != expect || head->bias.size() != 1) {
            throw ValidationError("network params: head shape mismatch");
        }
    }
    const auto check_finite = [](const Layer& layer) {
        for (double v : layer.weights.data) {
            if (!std::isfinite(v)) throw ValidationError("network params: non-finite weight");
        }
        for (double v : layer.bias) {
            if (!std::isfinite(v)) throw ValidationError("network params: non-finite bias");
        }
    };
    for (const Layer& layer : hidden) check_finite(layer);
    check_finite(head_expert);
    check_finite(head_load);
}

NetworkParams init_network(const NetworkConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);

    const auto make_layer = [&rng](int fan_in, int fan_out) {
        Layer layer;
        layer.weights = Matrix(fan_out, fan_in);
        layer.bias.assign(fan_out, 0.0);
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& w : layer.weights.data) {
            w = dist(rng);
        }
        return layer;
    };

    NetworkParams params;
    int in = config.input_dim;
    for (int size : config.hidden_sizes) {
        params.hidden.push_back(make_layer(in, size));
        in = size;
    }
    params.head_expert = make_layer(in, 1);
    params.head_load = make_layer(in, 1);
    return params;
}

std::vector<HeadProbabilities> ForwardCache::probabilities() const {
    std::vector<HeadProbabilities> out(p_expert.size());
    for (size_t i = 0; i < p_expert.size(); ++i) {
        out[i] = HeadProbabilities{p_expert[i], p_load[i]};
    }
    return out;
}

ForwardCache forward(const NetworkParams& params, const Matrix& batch,
                     const NetworkConfig& config, Mode mode, std::uint64_t mask_seed) {
    if (batch.cols != params.input_dim()) {
        throw ValidationError("forward: batch width does not match the network input size");
    }

    ForwardCache cache;
    cache.mode = mode;
    cache.leaky_slope = config.leaky_slope;
    cache.input = batch;

    std::mt19937_64 mask_rng(mask_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const bool use_dropout = mode == Mode::train && config.dropout_rate > 0.0;
    const double keep = 1.0 - config.dropout_rate;

    const Matrix* current = &cache.input;
    for (const Layer& layer : params.hidden) {
        Matrix z = affine(*current, layer);
        Matrix a = z;
        for (double& v : a.data) {
            if (v < 0.0) v *= config.leaky_slope;
        }
        if (use_dropout) {
            Matrix mask(a.rows, a.cols);
            for (size_t i = 0; i < mask.data.size(); ++i) {
                mask.data[i] = unit(mask_rng) < config.dropout_rate ? 0.0 : 1.0 / keep;
                a.data[i] *= mask.data[i];
            }
            cache.mask.push_back(std::move(mask));
        }
        cache.pre.push_back(std::move(z));
        cache.activation.push_back(std::move(a));
        current = &cache.activation.back();
    }

    const Matrix z_e = affine(*current, params.head_expert);
    const Matrix z_l = affine(*current, params.head_load);
    cache.z_expert.resize(batch.rows);
    cache.z_load.resize(batch.rows);
    cache.p_expert.resize(batch.rows);
    cache.p_load.resize(batch.rows);
    for (int i = 0; i < batch.rows; ++i) {
        cache.z_expert[i] = z_e.at(i, 0);
        cache.z_load[i] = z_l.at(i, 0);
        cache.p_expert[i] = clamp_prob(sigmoid(cache.z_expert[i]));
        cache.p_load[i] = clamp_prob(sigmoid(cache.z_load[i]));
    }
    return cache;
}

LossBreakdown loss(const ForwardCache& cache, std::span<const MultitaskLabels> labels,
                   const NetworkParams& params, double l2_coeff) {
    if (labels.size() != cache.p_expert.size() || labels.empty()) {
        throw ValidationError("loss: labels must align with the forward batch");
    }
    const double n = static_cast<double>(labels.size());

    LossBreakdown out;
    for (size_t i = 0; i < labels.size(); ++i) {
        const double ye = static_cast<double>(labels[i].expert);
        const double yl = static_cast<double>(labels[i].high_load);
        out.l_expertise -=
            ye * std::log(cache.p_expert[i]) + (1.0 - ye) * std::log(1.0 - cache.p_expert[i]);
        out.l_cognitive_load -=
            yl * std::log(cache.p_load[i]) + (1.0 - yl) * std::log(1.0 - cache.p_load[i]);
    }
    out.l_expertise /= n;
    out.l_cognitive_load /= n;

    if (l2_coeff > 0.0) {
        double sq = 0.0;
        for (const Layer& layer : params.hidden) {
            for (double w : layer.weights.data) sq += w * w;
        }
        for (double w : params.head_expert.weights.data) sq += w * w;
        for (double w : params.head_load.weights.data) sq += w * w;
        out.l2_penalty = l2_coeff * sq;
    }
    out.l_total = out.l_expertise + out.l_cognitive_load + out.l2_penalty;
    return out;
}

Gradients backward(const NetworkParams& params, const ForwardCache& cache,
                   std::span<const MultitaskLabels> labels, double l2_coeff) {
    const int n_rows = cache.input.rows;
    if (static_cast<int>(labels.size()) != n_rows) {
        throw ValidationError("backward: labels must align with the cached batch");
    }
    if (cache.pre.size() != params.hidden.size()) {
        throw ValidationError("backward: cache does not match this network");
    }

    Gradients grads;
    grads.hidden.reserve(params.hidden.size());
    for (const Layer& layer : params.hidden) {
        grads.hidden.push_back(zero_layer_like(layer));
    }
    grads.head_expert = zero_layer_like(params.head_expert);
    grads.head_load = zero_layer_like(params.head_load);

    const double inv_n = 1.0 / static_cast<double>(n_rows);
    const Matrix& last_act = cache.activation.back();

    // Head deltas. The clamp freezes the loss where it saturates, so its
    // gradient there is exactly zero.
    Matrix dz_e(n_rows, 1), dz_l(n_rows, 1);
    for (int i = 0; i < n_rows; ++i) {
        const double pe = cache.p_expert[i];
        const double pl = cache.p_load[i];
        const bool e_clamped = pe <= kProbEps || pe >= 1.0 - kProbEps;
        const bool l_clamped = pl <= kProbEps || pl >= 1.0 - kProbEps;
        dz_e.at(i, 0) = e_clamped ? 0.0 : (pe - static_cast<double>(labels[i].expert)) * inv_n;
        dz_l.at(i, 0) = l_clamped ? 0.0 : (pl - static_cast<double>(labels[i].high_load)) * inv_n;
    }

    Matrix d_act_e, d_act_l;
    affine_backward(last_act, params.head_expert, dz_e, grads.head_expert, &d_act_e);
    affine_backward(last_act, params.head_load, dz_l, grads.head_load, &d_act_l);

    Matrix d_act(n_rows, last_act.cols);
    for (size_t i = 0; i < d_act.data.size(); ++i) {
        d_act.data[i] = d_act_e.data[i] + d_act_l.data[i];
    }

    for (int l = static_cast<int>(params.hidden.size()) - 1; l >= 0; --l) {
        const Matrix& pre = cache.pre[l];
        Matrix dz = d_act;
        if (!cache.mask.empty()) {
            const Matrix& mask = cache.mask[l];
            for (size_t i = 0; i < dz.data.size(); ++i) {
                dz.data[i] *= mask.data[i];
            }
        }
        for (size_t i = 0; i < dz.data.size(); ++i) {
            if (pre.data[i] < 0.0) {
                dz.data[i] *= cache.leaky_slope;
            }
        }
        const Matrix& input = l == 0 ? cache.input : cache.activation[l - 1];
        affine_backward(input, params.hidden[l], dz, grads.hidden[l],
                        l > 0 ? &d_act : nullptr);
    }

    if (l2_coeff > 0.0) {
        const auto add_l2 = [l2_coeff](Layer& grad, const Layer& param) {
            for (size_t i = 0; i < grad.weights.data.size(); ++i) {
                grad.weights.data[i] += 2.0 * l2_coeff * param.weights.data[i];
            }
        };
        for (size_t l = 0; l < params.hidden.size(); ++l) {
            add_l2(grads.hidden[l], params.hidden[l]);
        }
        add_l2(grads.head_expert, params.head_expert);
        add_l2(grads.head_load, params.head_load);
    }
    return grads;
}

AdamState AdamState::zeros_like(const NetworkParams& params) {
    AdamState state;
    for (const Layer& layer : params.hidden) {
        state.m_hidden.push_back(zero_layer_like(layer));
        state.v_hidden.push_back(zero_layer_like(layer));
    }
    state.m_head_expert = zero_layer_like(params.head_expert);
    state.v_head_expert = zero_layer_like(params.head_expert);
    state.m_head_load = zero_layer_like(params.head_load);
    state.v_head_load = zero_layer_like(params.head_load);
    return state;
}

void adam_step(NetworkParams& params, const Gradients& grads, AdamState& state,
               double learning_rate) {
    if (grads.hidden.size() != params.hidden.size() ||
        state.m_hidden.size() != params.hidden.size()) {
        throw ValidationError("adam_step: parameter/gradient/state shape mismatch");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
    for (size_t l = 0; l < params.hidden.size(); ++l) {
        adam_update_layer(params.hidden[l], grads.hidden[l], state.m_hidden[l], state.v_hidden[l],
                          learning_rate, bc1, bc2);
    }
    adam_update_layer(params.head_expert, grads.head_expert, state.m_head_expert,
                      state.v_head_expert, learning_rate, bc1, bc2);
    adam_update_layer(params.head_load, grads.head_load, state.m_head_load, state.v_head_load,
                      learning_rate, bc1, bc2);
}

TrainResult train(const Dataset& dataset, const NetworkConfig& config) {
    config.validate();
    if (dataset.x.rows == 0 || dataset.y.empty()) {
        throw ValidationError("train: empty dataset");
    }
    if (dataset.x.rows != static_cast<int>(dataset.y.size())) {
        throw ValidationError("train: features and labels must align");
    }
    if (dataset.x.cols != config.input_dim) {
        throw ValidationError("train: dataset width does not match input_dim");
    }

    TrainResult result;
    result.params = init_network(config);
    AdamState state = AdamState::zeros_like(result.params);

    const int n = dataset.x.rows;
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(config.seed ^ 0x5a17ab1e5eedULL);

    result.epoch_losses.reserve(config.epochs);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double sum_e = 0.0, sum_l = 0.0, last_l2 = 0.0;
        for (int start = 0; start < n; start += config.batch_size) {
            const int rows = std::min(config.batch_size, n - start);
            Matrix batch(rows, dataset.x.cols);
            std::vector<MultitaskLabels> labels(rows);
            for (int r = 0; r < rows; ++r) {
                const int src = order[start + r];
                std::copy_n(dataset.x.row(src), dataset.x.cols, batch.row(r));
                labels[r] = dataset.y[src];
            }

            const std::uint64_t mask_seed =
                config.seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(epoch) + 1) +
                static_cast<std::uint64_t>(start);
            ForwardCache cache = forward(result.params, batch, config, Mode::train, mask_seed);
            const LossBreakdown lb = loss(cache, labels, result.params, config.l2_coeff);
            if (!std::isfinite(lb.l_total)) {
                throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch));
            }
            sum_e += lb.l_expertise * rows;
            sum_l += lb.l_cognitive_load * rows;
            last_l2 = lb.l2_penalty;

            const Gradients grads = backward(result.params, cache, labels, config.l2_coeff);
            adam_step(result.params, grads, state, config.learning_rate);
        }

        LossBreakdown epoch_loss;
        epoch_loss.l_expertise = sum_e / n;
        epoch_loss.l_cognitive_load = sum_l / n;
        epoch_loss.l2_penalty = last_l2;
        epoch_loss.l_total = epoch_loss.l_expertise + epoch_loss.l_cognitive_load + last_l2;
        result.epoch_losses.push_back(epoch_loss);
    }
    return result;
}

HeadProbabilities predict(const NetworkParams& params, const NetworkConfig& config,
                          std::span<const double> features) {
    if (static_cast<int>(features.size()) != params.input_dim()) {
        throw ValidationError("predict: feature width does not match the network input size");
    }
    Matrix batch(1, static_cast<int>(features.size()));
    std::copy(features.begin(), features.end(), batch.row(0));
    const ForwardCache cache = forward(params, batch, config, Mode::eval, 0);
    return HeadProbabilities{cache.p_expert[0], cache.p_load[0]};
}

namespace {

nlohmann::json layer_to_json(const Layer& layer) {
    return nlohmann::json{{"rows", layer.weights.rows},
                          {"cols", layer.weights.cols},
                          {"weights", layer.weights.data},
                          {"bias", layer.bias}};
}

Layer layer_from_json(const nlohmann::json& j) {
    Layer layer;
    layer.weights.rows = j.at("rows").get<int>();
    layer.weights.cols = j.at("cols").get<int>();
    layer.weights.data = j.at("weights").get<std::vector<double>>();
    layer.bias = j.at("bias").get<std::vector<double>>();
    if (layer.weights.data.size() !=
        static_cast<size_t>(layer.weights.rows) * static_cast<size_t>(layer.weights.cols)) {
        throw ValidationError("checkpoint: weight array size does not match its shape");
    }
    if (layer.bias.size() != static_cast<size_t>(layer.weights.rows)) {
        throw ValidationError("checkpoint: bias size does not match its shape");
    }
    return layer;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const NetworkParams& params,
                     const NetworkConfig& config) {
    nlohmann::json j;
    j["format"] = "hrvnet-model-v1";
    j["config"] = {{"input_dim", config.input_dim},
                   {"hidden_sizes", config.hidden_sizes},
                   {"leaky_slope", config.leaky_slope},
                   {"dropout_rate", config.dropout_rate},
                   {"l2_coeff", config.l2_coeff},
                   {"learning_rate", config.learning_rate},
                   {"batch_size", config.batch_size},
                   {"epochs", config.epochs},
                   {"seed", config.seed}};
    nlohmann::json layers = nlohmann::json::array();
    for (const Layer& layer : params.hidden) {
        layers.push_back(layer_to_json(layer));
    }
    j["hidden_layers"] = std::move(layers);
    j["head_expert"] = layer_to_json(params.head_expert);
    j["head_load"] = layer_to_json(params.head_load);

    std::ofstream out(path);
    if (!out) throw ValidationError("checkpoint: cannot open " + path.string() + " for writing");
    out << j.dump(2) << "\n";
}

std::pair<NetworkParams, NetworkConfig> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("checkpoint: cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("checkpoint: invalid JSON in " + path.string() + ": " + e.what());
    }
    if (j.value("format", "") != "hrvnet-model-v1") {
        throw ValidationError("checkpoint: unknown format tag");
    }

    NetworkConfig config;
    const nlohmann::json& c = j.at("config");
    config.input_dim = c.at("input_dim").get<int>();
    config.hidden_sizes = c.at("hidden_sizes").get<std::vector<int>>();
    config.leaky_slope = c.at("leaky_slope").get<double>();
    config.dropout_rate = c.at("dropout_rate").get<double>();
    config.l2_coeff = c.at("l2_coeff").get<double>();
    config.learning_rate = c.at("learning_rate").get<double>();
    config.batch_size = c.at("batch_size").get<int>();
    config.epochs = c.at("epochs").get<int>();
    config.seed = c.at("seed").get<std::uint64_t>();
    config.validate();

    NetworkParams params;
    for (const nlohmann::json& layer : j.at("hidden_layers")) {
        params.hidden.push_back(layer_from_json(layer));
    }
    params.head_expert = layer_from_json(j.at("head_expert"));
    params.head_load = layer_from_json(j.at("head_load"));
    params.validate();

    // The embedded config must describe exactly the stored shape chain.
    int expect = config.input_dim;
    if (params.hidden.size() != config.hidden_sizes.size()) {
        throw ValidationError("checkpoint: layer count does not match config");
    }
    for (size_t l = 0; l < params.hidden.size(); ++l) {
        if (params.hidden[l].weights.cols != expect ||
            params.hidden[l].weights.rows != config.hidden_sizes[l]) {
            throw ValidationError("checkpoint: layer shape does not match config");
        }
        expect = config.hidden_sizes[l];
    }
    if (params.head_expert.weights.cols != expect || params.head_load.weights.cols != expect) {
        throw ValidationError("checkpoint: head shape does not match config");
    }
    return {std::move(params), config};
}

}  // namespace hrvnet::nn
