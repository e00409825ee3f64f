#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <json.hpp>

#include "flowreg/types.hpp"

namespace flowreg {

enum class TimeMode { autonomous, time_injected };

// Parameterized velocity field v_theta(q, t). Evaluation returns the raw
// (pre-smoothing) field; Gaussian smoothing is composed by the flow.
class VelocityModel {
public:
    virtual ~VelocityModel() = default;

    virtual const GridShape& grid() const = 0;
    virtual int param_count() const = 0;
    virtual const std::vector<double>& params() const = 0;
    virtual void set_params(std::vector<double> theta) = 0;

    // Deterministic initial parameters; the resulting flow is the identity.
    virtual std::vector<double> init_params(std::uint64_t seed) const = 0;

    virtual VectorField eval(const VoxelCloud& q, double t) const = 0;

    // cotangent^T * d eval / d q, cloud-shaped.
    virtual VectorField vjp_state(const VoxelCloud& q, double t,
                                  const VectorField& cotangent) const = 0;

    // cotangent^T * d eval / d theta, theta-shaped.
    virtual std::vector<double> vjp_params(const VoxelCloud& q, double t,
                                           const VectorField& cotangent) const = 0;

    struct Vjp {
        VectorField state;
        std::vector<double> params;
    };
    // Both VJPs from one backward pass; what the gradient sweeps call.
    virtual Vjp vjp(const VoxelCloud& q, double t, const VectorField& cotangent) const = 0;

    // Architecture descriptor embedded in parameter sidecars.
    virtual nlohmann::json describe() const = 0;
};

// One stored tensor per integration step; parameters are the field values
// themselves (steps * dim * N of them).
class TensorFieldModel : public VelocityModel {
public:
    TensorFieldModel(GridShape grid, int steps, double horizon = 1.0);

    const GridShape& grid() const override { return grid_; }
    int param_count() const override;
    const std::vector<double>& params() const override { return theta_; }
    void set_params(std::vector<double> theta) override;
    std::vector<double> init_params(std::uint64_t seed) const override;
    VectorField eval(const VoxelCloud& q, double t) const override;
    VectorField vjp_state(const VoxelCloud& q, double t,
                          const VectorField& cotangent) const override;
    std::vector<double> vjp_params(const VoxelCloud& q, double t,
                                   const VectorField& cotangent) const override;
    Vjp vjp(const VoxelCloud& q, double t, const VectorField& cotangent) const override;
    nlohmann::json describe() const override;

    int steps() const { return steps_; }
    int step_index(double t) const;

private:
    GridShape grid_;
    int steps_;
    double horizon_;
    std::vector<double> theta_;
};

// Convolutional encoder / bottleneck / decoder velocity network. Stride-2
// convolutions downsample, the bottleneck optionally sees t as an extra
// constant channel, nearest-upsample + convolution restores full resolution,
// and a zero-initialized linear output layer maps to one channel per axis.
struct NeuralFieldSpec {
    GridShape grid;
    std::vector<int> widths = {16, 32};  // channels per downsample level
    int bottleneck_depth = 2;
    int kernel = 3;
    TimeMode time_mode = TimeMode::autonomous;
    double horizon = 1.0;
};

class NeuralFieldModel : public VelocityModel {
public:
    explicit NeuralFieldModel(NeuralFieldSpec spec);

    const GridShape& grid() const override { return spec_.grid; }
    int param_count() const override { return param_count_; }
    const std::vector<double>& params() const override { return theta_; }
    void set_params(std::vector<double> theta) override;
    std::vector<double> init_params(std::uint64_t seed) const override;
    VectorField eval(const VoxelCloud& q, double t) const override;
    VectorField vjp_state(const VoxelCloud& q, double t,
                          const VectorField& cotangent) const override;
    std::vector<double> vjp_params(const VoxelCloud& q, double t,
                                   const VectorField& cotangent) const override;
    Vjp vjp(const VoxelCloud& q, double t, const VectorField& cotangent) const override;
    nlohmann::json describe() const override;

    const NeuralFieldSpec& spec() const { return spec_; }

private:
    enum class LayerKind { conv, upsample, concat_time };
    struct Layer {
        LayerKind kind;
        int in_ch = 0, out_ch = 0;
        GridShape in_shape, out_shape;
        int stride = 1;
        bool tanh_act = false;
        std::int64_t w_off = 0, b_off = 0;
    };

    void check_input(const VoxelCloud& q, double t) const;
    std::vector<VectorField> forward(const VoxelCloud& q, double t) const;
    Vjp backward(const std::vector<VectorField>& acts, const VectorField& cotangent) const;

    NeuralFieldSpec spec_;
    std::vector<Layer> layers_;
    int param_count_ = 0;
    std::vector<double> theta_;
};

// Build a model from a descriptor produced by describe().
std::unique_ptr<VelocityModel> model_from_descriptor(const nlohmann::json& desc);

}  // namespace flowreg
