#include "flowreg/velocity.hpp"

#include <algorithm>
#include <cmath>

#include "flowreg/parallel.hpp"

namespace flowreg {

namespace {

constexpr int kMaxChannels = 64;

// Deterministic, self-contained generator so initialization is bit-stable.
struct SplitMix64 {
    std::uint64_t state;
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform_sym(double bound) { return (2.0 * uniform() - 1.0) * bound; }
};

inline void decompose(std::int64_t idx, const std::vector<std::int64_t>& strides,
                      const GridShape& shape, int* coords) {
    for (int a = 0; a < shape.dim(); ++a)
        coords[a] = static_cast<int>((idx / strides[a]) % shape.extents[a]);
}

struct KernelOffsets {
    int kd;
    std::vector<std::array<int, 3>> offs;  // per tap, per axis, in [-p. p]
};

KernelOffsets kernel_offsets(int k, int dim) {
    const int p = k / 2;
    KernelOffsets ko;
    ko.kd = 1;
    for (int a = 0; a < dim; ++a) ko.kd *= k;
    ko.offs.resize(static_cast<std::size_t>(ko.kd));
    for (int idx = 0; idx < ko.kd; ++idx) {
        int rest = idx;
        for (int a = dim - 1; a >= 0; --a) {
            ko.offs[static_cast<std::size_t>(idx)][static_cast<std::size_t>(a)] = rest % k - p;
            rest /= k;
        }
    }
    return ko;
}

GridShape halved(const GridShape& s) {
    GridShape h = s;
    for (int& e : h.extents) e = (e - 1) / 2 + 1;
    return h;
}

}  // namespace

// ---------------------------------------------------------------------------
// TensorFieldModel
// ---------------------------------------------------------------------------

TensorFieldModel::TensorFieldModel(GridShape grid, int steps, double horizon)
    : grid_(std::move(grid)), steps_(steps), horizon_(horizon) {
    validate_shape(grid_);
    if (steps_ < 1) throw ParamError("tensor field needs at least one step");
    if (!(horizon_ > 0.0)) throw ParamError("horizon must be positive");
    theta_.assign(static_cast<std::size_t>(param_count()), 0.0);
}

int TensorFieldModel::param_count() const {
    return static_cast<int>(static_cast<std::int64_t>(steps_) * grid_.dim() * grid_.voxels());
}

void TensorFieldModel::set_params(std::vector<double> theta) {
    if (static_cast<int>(theta.size()) != param_count())
        throw ParamError("parameter vector size does not match tensor field layout");
    theta_ = std::move(theta);
}

std::vector<double> TensorFieldModel::init_params(std::uint64_t) const {
    return std::vector<double>(static_cast<std::size_t>(param_count()), 0.0);
}

int TensorFieldModel::step_index(double t) const {
    if (t < 0.0 || t > horizon_ * (1.0 + 1e-12))
        throw ParamError("time " + std::to_string(t) + " outside [0, horizon]");
    const double u = (t / horizon_) * steps_ + 1e-9;
    return std::clamp(static_cast<int>(std::floor(u)), 0, steps_ - 1);
}

VectorField TensorFieldModel::eval(const VoxelCloud& q, double t) const {
    if (!(q.shape == grid_)) throw ShapeError("cloud shape does not match tensor field grid");
    const int idx = step_index(t);
    const std::int64_t block = static_cast<std::int64_t>(grid_.dim()) * grid_.voxels();
    VectorField out = make_field(grid_, grid_.dim());
    const double* src = theta_.data() + idx * block;
    par::for_each(block, [&](std::int64_t i) { out.data[static_cast<std::size_t>(i)] = src[i]; });
    return out;
}

VectorField TensorFieldModel::vjp_state(const VoxelCloud& q, double t,
                                        const VectorField& cotangent) const {
    if (!(q.shape == grid_) || !(cotangent.shape == grid_))
        throw ShapeError("cloud/cotangent shape does not match tensor field grid");
    (void)step_index(t);
    return make_field(grid_, grid_.dim());  // field does not depend on q
}

std::vector<double> TensorFieldModel::vjp_params(const VoxelCloud& q, double t,
                                                 const VectorField& cotangent) const {
    if (!(q.shape == grid_) || !(cotangent.shape == grid_))
        throw ShapeError("cloud/cotangent shape does not match tensor field grid");
    const int idx = step_index(t);
    const std::int64_t block = static_cast<std::int64_t>(grid_.dim()) * grid_.voxels();
    std::vector<double> g(theta_.size(), 0.0);
    double* dst = g.data() + idx * block;
    par::for_each(block,
                  [&](std::int64_t i) { dst[i] = cotangent.data[static_cast<std::size_t>(i)]; });
    return g;
}

VelocityModel::Vjp TensorFieldModel::vjp(const VoxelCloud& q, double t,
                                         const VectorField& cotangent) const {
    return Vjp{vjp_state(q, t, cotangent), vjp_params(q, t, cotangent)};
}

nlohmann::json TensorFieldModel::describe() const {
    return nlohmann::json{{"kind", "tensor"},
                          {"grid", grid_.extents},
                          {"steps", steps_},
                          {"horizon", horizon_}};
}

// ---------------------------------------------------------------------------
// NeuralFieldModel
// ---------------------------------------------------------------------------

NeuralFieldModel::NeuralFieldModel(NeuralFieldSpec spec) : spec_(std::move(spec)) {
    validate_shape(spec_.grid);
    if (spec_.widths.empty()) throw ParamError("neural field needs at least one level");
    if (spec_.kernel < 1 || spec_.kernel % 2 == 0)
        throw ParamError("conv kernel must be odd and positive");
    if (spec_.bottleneck_depth < 1) throw ParamError("bottleneck depth must be >= 1");
    for (int w : spec_.widths)
        if (w < 1 || w >= kMaxChannels) throw ParamError("channel width out of range");

    const int dim = spec_.grid.dim();
    const int L = static_cast<int>(spec_.widths.size());

    std::vector<GridShape> levels{spec_.grid};
    for (int l = 0; l < L; ++l) {
        GridShape h = halved(levels.back());
        for (int e : h.extents)
            if (e < 2) throw ParamError("grid too small for the configured level count");
        levels.push_back(h);
    }

    std::int64_t off = 0;
    auto push_conv = [&](int in_ch, int out_ch, const GridShape& in_s, const GridShape& out_s,
                         int stride, bool act) {
        Layer l;
        l.kind = LayerKind::conv;
        l.in_ch = in_ch;
        l.out_ch = out_ch;
        l.in_shape = in_s;
        l.out_shape = out_s;
        l.stride = stride;
        l.tanh_act = act;
        std::int64_t kd = 1;
        for (int a = 0; a < dim; ++a) kd *= spec_.kernel;
        l.w_off = off;
        off += static_cast<std::int64_t>(out_ch) * in_ch * kd;
        l.b_off = off;
        off += out_ch;
        layers_.push_back(l);
    };

    // encoder
    int ch = dim;
    for (int l = 0; l < L; ++l) {
        push_conv(ch, spec_.widths[static_cast<std::size_t>(l)], levels[static_cast<std::size_t>(l)],
                  levels[static_cast<std::size_t>(l + 1)], 2, true);
        ch = spec_.widths[static_cast<std::size_t>(l)];
    }
    // bottleneck, time injected as one constant extra channel
    if (spec_.time_mode == TimeMode::time_injected) {
        Layer l;
        l.kind = LayerKind::concat_time;
        l.in_ch = ch;
        l.out_ch = ch + 1;
        l.in_shape = levels.back();
        l.out_shape = levels.back();
        layers_.push_back(l);
        push_conv(ch + 1, ch, levels.back(), levels.back(), 1, true);
    } else {
        push_conv(ch, ch, levels.back(), levels.back(), 1, true);
    }
    for (int d = 1; d < spec_.bottleneck_depth; ++d)
        push_conv(ch, ch, levels.back(), levels.back(), 1, true);
    // decoder
    for (int l = L - 1; l >= 0; --l) {
        Layer up;
        up.kind = LayerKind::upsample;
        up.in_ch = ch;
        up.out_ch = ch;
        up.in_shape = levels[static_cast<std::size_t>(l + 1)];
        up.out_shape = levels[static_cast<std::size_t>(l)];
        layers_.push_back(up);
        const int out_ch = spec_.widths[static_cast<std::size_t>(std::max(l - 1, 0))];
        push_conv(ch, out_ch, levels[static_cast<std::size_t>(l)],
                  levels[static_cast<std::size_t>(l)], 1, true);
        ch = out_ch;
    }
    // linear output
    push_conv(ch, dim, spec_.grid, spec_.grid, 1, false);

    param_count_ = static_cast<int>(off);
    theta_.assign(static_cast<std::size_t>(param_count_), 0.0);
}

void NeuralFieldModel::set_params(std::vector<double> theta) {
    if (static_cast<int>(theta.size()) != param_count_)
        throw ParamError("parameter vector size does not match network architecture");
    theta_ = std::move(theta);
}

std::vector<double> NeuralFieldModel::init_params(std::uint64_t seed) const {
    std::vector<double> theta(static_cast<std::size_t>(param_count_), 0.0);
    SplitMix64 rng{seed ^ 0x2545f4914f6cdd1dULL};
    const std::size_t last_conv = layers_.size() - 1;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        const Layer& l = layers_[li];
        if (l.kind != LayerKind::conv) continue;
        std::int64_t kd = 1;
        for (int a = 0; a < spec_.grid.dim(); ++a) kd *= spec_.kernel;
        const std::int64_t nw = static_cast<std::int64_t>(l.out_ch) * l.in_ch * kd;
        if (li == last_conv) {
            // zero output layer: the initial flow is the identity map
            continue;
        }
        const double bound = std::sqrt(3.0 / static_cast<double>(l.in_ch * kd));
        for (std::int64_t i = 0; i < nw; ++i)
            theta[static_cast<std::size_t>(l.w_off + i)] = rng.uniform_sym(bound);
        // biases stay zero
    }
    return theta;
}

void NeuralFieldModel::check_input(const VoxelCloud& q, double t) const {
    if (!(q.shape == spec_.grid)) throw ShapeError("cloud shape does not match network grid");
    if (t < 0.0 || t > spec_.horizon * (1.0 + 1e-12))
        throw ParamError("time " + std::to_string(t) + " outside [0, horizon]");
}

std::vector<VectorField> NeuralFieldModel::forward(const VoxelCloud& q, double t) const {
    const int dim = spec_.grid.dim();
    std::vector<VectorField> acts;
    acts.reserve(layers_.size() + 1);

    // normalized coordinates in [-1, 1] per axis
    VectorField input = make_field(spec_.grid, dim);
    const std::int64_t n0 = spec_.grid.voxels();
    for (int a = 0; a < dim; ++a) {
        const double scale = 2.0 / static_cast<double>(spec_.grid.extents[a] - 1);
        const double* src = q.plane(a);
        double* dst = input.plane(a);
        par::for_each(n0, [&, src, dst, scale](std::int64_t i) { dst[i] = src[i] * scale - 1.0; });
    }
    acts.push_back(std::move(input));

    const KernelOffsets ko = kernel_offsets(spec_.kernel, dim);
    const double tnorm = spec_.horizon > 0.0 ? t / spec_.horizon : t;

    for (const Layer& l : layers_) {
        const VectorField& in = acts.back();
        VectorField out = make_field(l.out_shape, l.out_ch);
        if (l.kind == LayerKind::concat_time) {
            const std::int64_t n = l.out_shape.voxels();
            for (int c = 0; c < l.in_ch; ++c) {
                const double* src = in.plane(c);
                double* dst = out.plane(c);
                par::for_each(n, [&, src, dst](std::int64_t i) { dst[i] = src[i]; });
            }
            double* tp = out.plane(l.in_ch);
            par::for_each(n, [&, tp](std::int64_t i) { tp[i] = tnorm; });
        } else if (l.kind == LayerKind::upsample) {
            const auto in_str = row_major_strides(l.in_shape);
            const auto out_str = row_major_strides(l.out_shape);
            const std::int64_t n = l.out_shape.voxels();
            for (int c = 0; c < l.out_ch; ++c) {
                const double* src = in.plane(c);
                double* dst = out.plane(c);
                par::for_each(n, [&, src, dst](std::int64_t x) {
                    int oc[3];
                    decompose(x, out_str, l.out_shape, oc);
                    std::int64_t s = 0;
                    for (int a = 0; a < dim; ++a) {
                        int ic = oc[a] / 2;
                        if (ic > l.in_shape.extents[a] - 1) ic = l.in_shape.extents[a] - 1;
                        s += ic * in_str[a];
                    }
                    dst[x] = src[s];
                });
            }
        } else {
            const double* w = theta_.data() + l.w_off;
            const double* b = theta_.data() + l.b_off;
            const auto in_str = row_major_strides(l.in_shape);
            const auto out_str = row_major_strides(l.out_shape);
            const std::int64_t n_in = l.in_shape.voxels();
            const std::int64_t n_out = l.out_shape.voxels();
            const double* in_data = in.data.data();
            double* out_data = out.data.data();
            par::for_each(n_out, [&](std::int64_t x) {
                int oc[3];
                decompose(x, out_str, l.out_shape, oc);
                double acc[kMaxChannels];
                for (int co = 0; co < l.out_ch; ++co) acc[co] = b[co];
                for (int kidx = 0; kidx < ko.kd; ++kidx) {
                    std::int64_t src = 0;
                    bool ok = true;
                    for (int a = 0; a < dim; ++a) {
                        const int s = oc[a] * l.stride + ko.offs[static_cast<std::size_t>(kidx)]
                                                            [static_cast<std::size_t>(a)];
                        if (s < 0 || s >= l.in_shape.extents[a]) {
                            ok = false;
                            break;
                        }
                        src += s * in_str[a];
                    }
                    if (!ok) continue;
                    for (int ci = 0; ci < l.in_ch; ++ci) {
                        const double v = in_data[ci * n_in + src];
                        const double* wp = w + (static_cast<std::int64_t>(ci) * ko.kd + kidx);
                        const std::int64_t co_stride = static_cast<std::int64_t>(l.in_ch) * ko.kd;
                        for (int co = 0; co < l.out_ch; ++co) acc[co] += wp[co * co_stride] * v;
                    }
                }
                if (l.tanh_act) {
                    for (int co = 0; co < l.out_ch; ++co)
                        out_data[co * n_out + x] = std::tanh(acc[co]);
                } else {
                    for (int co = 0; co < l.out_ch; ++co) out_data[co * n_out + x] = acc[co];
                }
            });
        }
        acts.push_back(std::move(out));
    }
    return acts;
}

VelocityModel::Vjp NeuralFieldModel::backward(const std::vector<VectorField>& acts,
                                              const VectorField& cotangent) const {
    const int dim = spec_.grid.dim();
    const KernelOffsets ko = kernel_offsets(spec_.kernel, dim);

    Vjp result;
    result.params.assign(theta_.size(), 0.0);

    VectorField cot = cotangent;
    for (int li = static_cast<int>(layers_.size()) - 1; li >= 0; --li) {
        const Layer& l = layers_[static_cast<std::size_t>(li)];
        const VectorField& in = acts[static_cast<std::size_t>(li)];
        const VectorField& out = acts[static_cast<std::size_t>(li) + 1];
        VectorField gin = make_field(l.in_shape, l.in_ch);

        if (l.kind == LayerKind::concat_time) {
            const std::int64_t n = l.in_shape.voxels();
            for (int c = 0; c < l.in_ch; ++c) {
                const double* src = cot.plane(c);
                double* dst = gin.plane(c);
                par::for_each(n, [&, src, dst](std::int64_t i) { dst[i] = src[i]; });
            }
        } else if (l.kind == LayerKind::upsample) {
            const auto in_str = row_major_strides(l.in_shape);
            const auto out_str = row_major_strides(l.out_shape);
            const std::int64_t n_in = l.in_shape.voxels();
            for (int c = 0; c < l.in_ch; ++c) {
                const double* g = cot.plane(c);
                double* dst = gin.plane(c);
                par::for_each(n_in, [&, g, dst](std::int64_t y) {
                    int ic[3];
                    decompose(y, in_str, l.in_shape, ic);
                    double acc = 0.0;
                    const int nchild = 1 << dim;
                    for (int m = 0; m < nchild; ++m) {
                        std::int64_t x = 0;
                        bool ok = true;
                        for (int a = 0; a < dim; ++a) {
                            const int cc = 2 * ic[a] + ((m >> a) & 1);
                            if (cc >= l.out_shape.extents[a]) {
                                ok = false;
                                break;
                            }
                            x += cc * out_str[a];
                        }
                        if (ok) acc += g[x];
                    }
                    dst[y] = acc;
                });
            }
        } else {
            const double* w = theta_.data() + l.w_off;
            const auto in_str = row_major_strides(l.in_shape);
            const auto out_str = row_major_strides(l.out_shape);
            const std::int64_t n_in = l.in_shape.voxels();
            const std::int64_t n_out = l.out_shape.voxels();

            // pre-activation cotangent
            VectorField gz = make_field(l.out_shape, l.out_ch);
            {
                const double* y = out.data.data();
                const double* gc = cot.data.data();
                double* gzp = gz.data.data();
                const std::int64_t total = n_out * l.out_ch;
                if (l.tanh_act) {
                    par::for_each(total, [&, y, gc, gzp](std::int64_t i) {
                        gzp[i] = gc[i] * (1.0 - y[i] * y[i]);
                    });
                } else {
                    par::for_each(total, [&, gc, gzp](std::int64_t i) { gzp[i] = gc[i]; });
                }
            }

            // input cotangent (gather over the windows that read each voxel)
            const double* gzd = gz.data.data();
            double* gind = gin.data.data();
            par::for_each(n_in, [&](std::int64_t yv) {
                int ic[3];
                decompose(yv, in_str, l.in_shape, ic);
                double acc[kMaxChannels];
                for (int ci = 0; ci < l.in_ch; ++ci) acc[ci] = 0.0;
                for (int kidx = 0; kidx < ko.kd; ++kidx) {
                    std::int64_t ox = 0;
                    bool ok = true;
                    for (int a = 0; a < dim; ++a) {
                        // solves oc*stride + koff == ic  =>  oc = (ic - koff)/stride
                        const int numer = ic[a] - ko.offs[static_cast<std::size_t>(kidx)]
                                                         [static_cast<std::size_t>(a)];
                        if (numer % l.stride != 0) {
                            ok = false;
                            break;
                        }
                        const int oc = numer / l.stride;
                        if (oc < 0 || oc >= l.out_shape.extents[a]) {
                            ok = false;
                            break;
                        }
                        ox += oc * out_str[a];
                    }
                    if (!ok) continue;
                    const std::int64_t co_stride = static_cast<std::int64_t>(l.in_ch) * ko.kd;
                    for (int co = 0; co < l.out_ch; ++co) {
                        const double gv = gzd[co * n_out + ox];
                        const double* wp = w + co * co_stride + kidx;
                        for (int ci = 0; ci < l.in_ch; ++ci)
                            acc[ci] += wp[static_cast<std::int64_t>(ci) * ko.kd] * gv;
                    }
                }
                for (int ci = 0; ci < l.in_ch; ++ci) gind[ci * n_in + yv] = acc[ci];
            });

            // weight gradient, one serial spatial sum per weight
            const double* in_data = in.data.data();
            const std::int64_t nw = static_cast<std::int64_t>(l.out_ch) * l.in_ch * ko.kd;
            double* gw = result.params.data() + l.w_off;
            par::for_each(nw, [&](std::int64_t widx) {
                const int co = static_cast<int>(widx / (static_cast<std::int64_t>(l.in_ch) * ko.kd));
                const int ci = static_cast<int>((widx / ko.kd) % l.in_ch);
                const int kidx = static_cast<int>(widx % ko.kd);
                double sum = 0.0;
                for (std::int64_t x = 0; x < n_out; ++x) {
                    int oc[3];
                    decompose(x, out_str, l.out_shape, oc);
                    std::int64_t src = 0;
                    bool ok = true;
                    for (int a = 0; a < dim; ++a) {
                        const int s = oc[a] * l.stride + ko.offs[static_cast<std::size_t>(kidx)]
                                                            [static_cast<std::size_t>(a)];
                        if (s < 0 || s >= l.in_shape.extents[a]) {
                            ok = false;
                            break;
                        }
                        src += s * in_str[a];
                    }
                    if (!ok) continue;
                    sum += gzd[co * n_out + x] * in_data[ci * n_in + src];
                }
                gw[widx] = sum;
            });
            double* gb = result.params.data() + l.b_off;
            par::for_each(l.out_ch, [&](std::int64_t co) {
                double sum = 0.0;
                const double* row = gzd + co * n_out;
                for (std::int64_t x = 0; x < n_out; ++x) sum += row[x];
                gb[co] = sum;
            });
        }
        cot = std::move(gin);
    }

    // undo the coordinate normalization
    result.state = make_field(spec_.grid, dim);
    const std::int64_t n0 = spec_.grid.voxels();
    for (int a = 0; a < dim; ++a) {
        const double scale = 2.0 / static_cast<double>(spec_.grid.extents[a] - 1);
        const double* src = cot.plane(a);
        double* dst = result.state.plane(a);
        par::for_each(n0, [&, src, dst, scale](std::int64_t i) { dst[i] = src[i] * scale; });
    }
    return result;
}

VectorField NeuralFieldModel::eval(const VoxelCloud& q, double t) const {
    check_input(q, t);
    auto acts = forward(q, t);
    return std::move(acts.back());
}

VelocityModel::Vjp NeuralFieldModel::vjp(const VoxelCloud& q, double t,
                                         const VectorField& cotangent) const {
    check_input(q, t);
    if (!(cotangent.shape == spec_.grid) || cotangent.channels != spec_.grid.dim())
        throw ShapeError("cotangent shape does not match network output");
    const auto acts = forward(q, t);
    return backward(acts, cotangent);
}

VectorField NeuralFieldModel::vjp_state(const VoxelCloud& q, double t,
                                        const VectorField& cotangent) const {
    return vjp(q, t, cotangent).state;
}

std::vector<double> NeuralFieldModel::vjp_params(const VoxelCloud& q, double t,
                                                 const VectorField& cotangent) const {
    return vjp(q, t, cotangent).params;
}

nlohmann::json NeuralFieldModel::describe() const {
    return nlohmann::json{
        {"kind", "neural"},
        {"grid", spec_.grid.extents},
        {"widths", spec_.widths},
        {"bottleneck_depth", spec_.bottleneck_depth},
        {"kernel", spec_.kernel},
        {"time_mode", spec_.time_mode == TimeMode::time_injected ? "injected" : "autonomous"},
        {"horizon", spec_.horizon}};
}

std::unique_ptr<VelocityModel> model_from_descriptor(const nlohmann::json& desc) {
    const std::string kind = desc.at("kind").get<std::string>();
    GridShape grid{desc.at("grid").get<std::vector<int>>()};
    if (kind == "tensor") {
        return std::make_unique<TensorFieldModel>(grid, desc.at("steps").get<int>(),
                                                  desc.at("horizon").get<double>());
    }
    if (kind == "neural") {
        NeuralFieldSpec spec;
        spec.grid = grid;
        spec.widths = desc.at("widths").get<std::vector<int>>();
        spec.bottleneck_depth = desc.at("bottleneck_depth").get<int>();
        spec.kernel = desc.at("kernel").get<int>();
        spec.time_mode = desc.at("time_mode").get<std::string>() == "injected"
                             ? TimeMode::time_injected
                             : TimeMode::autonomous;
        spec.horizon = desc.at("horizon").get<double>();
        return std::make_unique<NeuralFieldModel>(spec);
    }
    throw ParamError("unknown velocity model kind: " + kind);
}

}  // namespace flowreg
