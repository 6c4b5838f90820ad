#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rrecon/grid.hpp"
#include "rrecon/indices.hpp"

namespace rrecon {

// Residual reconstruction network: linear layer + two linear residual
// blocks produce a width-N embedding from [indices, year, one-hot month];
// the embedding is broadcast to every pixel, stacked with the four static
// layers and reduced to one channel by a chain of 3x3 convolutional
// residual blocks. ReLU follows every layer except the final block output.
struct ModelConfig {
    int n_indices = 7;
    int width = 28; // embedding dim N and linear-block width
    // resolved channel schedule; empty = {N+4, N+4, then halving to 1}
    std::vector<int> channels;
    int kernel = 3;
    double year_offset = 1940.0;
    double year_scale = 100.0;

    int input_dim() const { return n_indices + 1 + 12; }
    std::vector<int> schedule() const;
    void validate() const;
};

std::size_t model_parameter_count(const ModelConfig& cfg);

// [indices..., (year - offset)/scale, one-hot(month)]
std::vector<double> encode_inputs(std::span<const double> indices, int year, int month,
                                  const ModelConfig& cfg);

// Mean squared difference over unmasked pixels.
double mse_loss(std::span<const double> pred, std::span<const double> target,
                const std::vector<std::uint8_t>* mask = nullptr);

namespace detail {

struct AffineDesc {
    int in = 0, out = 0;
    std::size_t w = 0, b = 0; // offsets into the flat parameter vector
};

struct ConvBlockDesc {
    int cin = 0, cout = 0;
    AffineDesc conv1, conv2; // conv weights (out, in, 3, 3)
    bool has_skip = false;
    AffineDesc skip; // 1x1
    bool final_linear = false;
};

struct LayerPlan {
    AffineDesc lin_in;
    AffineDesc res[4]; // two blocks x two affines
    std::vector<ConvBlockDesc> blocks;
    std::size_t n_params = 0;
    int width = 0;
    int input_dim = 0;
};

LayerPlan make_plan(const ModelConfig& cfg);

} // namespace detail

// Per-sample activation buffers; reusable across calls with one grid shape.
template <typename T>
struct Workspace {
    int H = 0, W = 0;
    std::vector<T> vec;     // linear activations, chained
    std::vector<T> planes;  // conv activations, padded layout
    std::vector<T> dvec;
    std::vector<T> dplanes;
    std::vector<T> output;  // H*W, unpadded
    std::vector<T> doutput;
};

template <typename T>
class ReconNet {
public:
    explicit ReconNet(ModelConfig cfg);

    const ModelConfig& config() const { return cfg_; }
    std::size_t n_params() const { return plan_.n_params; }
    std::vector<T>& params() { return params_; }
    const std::vector<T>& params() const { return params_; }

    // fan-in scaled uniform weights, zero biases; deterministic per seed
    void init_params(std::uint64_t seed);

    // static layers cast to T once per grid shape
    void set_static(const StaticStack& stat);
    int grid_h() const { return H_; }
    int grid_w() const { return W_; }

    // fills ws.output (H*W)
    void forward(std::span<const T> input, Workspace<T>& ws) const;

    // reverse-mode gradients of a scalar loss with d(loss)/d(output) in
    // ws.doutput; accumulates into grad (size n_params) and requires the
    // forward activations left in ws
    void backward(std::span<const T> input, Workspace<T>& ws, std::vector<T>& grad) const;

    void ensure_workspace(Workspace<T>& ws) const;

private:
    ModelConfig cfg_;
    detail::LayerPlan plan_;
    std::vector<T> params_;
    int H_ = 0, W_ = 0;
    std::vector<T> static_planes_; // 4 padded planes
};

struct TrainSplit {
    YearMonth train_start{1940, 1}, train_end{2010, 12};
    YearMonth val_start{2011, 1}, val_end{2018, 12};
    YearMonth test_start{2011, 1}, test_end{2024, 12};

    void validate() const; // train disjoint from validation
    bool validation_inside_test() const;
};

struct MonthSample {
    Date stamp;
    std::vector<double> input;  // encoded
    std::vector<double> target; // H*W
};

struct Dataset {
    ModelConfig config;
    StaticStack static_stack;
    std::vector<MonthSample> samples;
    std::optional<std::vector<std::uint8_t>> pixel_mask; // land-only training

    static Dataset build(const IndexSeries& monthly_indices, const GridField& monthly_target,
                         const StaticStack& stat, const ModelConfig& cfg, bool land_only = false);
};

struct TrainOptions {
    int n_seeds = 6;
    double lr = 1e-3;
    int batch_size = 0; // 0 = full batch
    int max_epochs = 2000;
    int patience = 50;
    std::uint64_t seed = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

struct EpochStats {
    int epoch;
    double train_mse;
    double val_mse;
};

struct TrainedModel {
    ModelConfig config;
    std::vector<double> params;
    std::uint64_t seed = 0;
    int stop_epoch = 0;
    double best_val_mse = 0.0;
    std::vector<EpochStats> history;
    std::uint64_t shuffle_fingerprint = 0; // first-epoch sample order hash
};

// Independently seeded trainings with per-seed shuffle order, Adam updates
// and best-validation early stopping.
template <typename T>
std::vector<TrainedModel> train(const Dataset& data, const TrainSplit& split,
                                const TrainOptions& opt);

// Seed-ensemble (and optionally member-ensemble) mean reconstruction.
class ReconEvaluator {
public:
    ReconEvaluator(const std::vector<TrainedModel>& ensemble, const StaticStack& stat);

    int n_seeds() const { return static_cast<int>(nets_.size()); }
    const ModelConfig& config() const;

    Field2 reconstruct(std::span<const double> indices, int year, int month) const;
    Field2 reconstruct_seed(int seed_idx, std::span<const double> indices, int year, int month) const;
    // per-member evaluation averaged over members and seeds
    Field2 reconstruct_members(const std::vector<std::vector<double>>& member_indices, int year,
                               int month) const;

private:
    std::vector<ReconNet<float>> nets_;
    mutable Workspace<float> ws_;
};

// RCM1 checkpoint: JSON text header line + little-endian float64 parameter
// blob in layer order.
void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

void write_history_csv(const TrainedModel& model, const std::string& path);

} // namespace rrecon
