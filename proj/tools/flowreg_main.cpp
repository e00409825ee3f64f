// flowreg: pairwise diffeomorphic registration by integrating a smoothed,
// parameterized velocity field over the voxel cloud and optimizing a
// similarity-plus-regularization objective with adjoint-sensitivity
// gradients.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "flowreg/fixtures.hpp"
#include "flowreg/grid.hpp"
#include "flowreg/io.hpp"
#include "flowreg/metrics.hpp"
#include "flowreg/optimizer.hpp"
#include "flowreg/render.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct RegisterOptions {
    std::string fixed_path;
    std::string moving_path;
    std::string out_dir;
    std::string sim = "ncc";
    int ncc_window = 21;
    int steps = 1;
    int iters = 250;
    double lambda_jdet = 1000.0;
    double lambda_mag = 0.01;
    double lambda_smt = 0.5;
    double epsilon = 1e-3;
    int kernel_radius = 2;
    double kernel_sigma = 1.0;
    std::string field = "neural";
    std::string time_mode = "autonomous";
    bool fix_boundary = false;
    std::uint64_t seed = 0;
    double lr = 0.0;  // 0 = pick by field kind
    std::string grad = "adjoint";
    std::string memory = "store-all";
    std::string scheme = "euler";
    std::vector<int> widths = {16, 32};
    int bottleneck = 2;
    std::string config_path;
};

ordered_json options_to_json(const RegisterOptions& o) {
    ordered_json j;
    j["fixed"] = o.fixed_path;
    j["moving"] = o.moving_path;
    j["out-dir"] = o.out_dir;
    j["sim"] = o.sim;
    j["ncc-window"] = o.ncc_window;
    j["steps"] = o.steps;
    j["iters"] = o.iters;
    j["lambda-jdet"] = o.lambda_jdet;
    j["lambda-mag"] = o.lambda_mag;
    j["lambda-smt"] = o.lambda_smt;
    j["epsilon"] = o.epsilon;
    j["kernel-radius"] = o.kernel_radius;
    j["kernel-sigma"] = o.kernel_sigma;
    j["field"] = o.field;
    j["time-mode"] = o.time_mode;
    j["fix-boundary"] = o.fix_boundary;
    j["seed"] = o.seed;
    j["lr"] = o.lr;
    j["grad"] = o.grad;
    j["memory"] = o.memory;
    j["scheme"] = o.scheme;
    j["widths"] = o.widths;
    j["bottleneck"] = o.bottleneck;
    return j;
}

// values from --config fill in everything the command line did not set
void merge_config(const CLI::App* cmd, const std::string& path, RegisterOptions& o) {
    std::ifstream in(path);
    if (!in) throw flowreg::IoError(flowreg::IoFault::open_failed, "cannot open config " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw flowreg::IoError(flowreg::IoFault::malformed_header,
                               path + ": invalid JSON: " + std::string(e.what()));
    }
    auto take = [&](const char* flag, const char* key, auto& dst) {
        if (cmd->count(flag) == 0 && j.contains(key))
            dst = j.at(key).get<std::decay_t<decltype(dst)>>();
    };
    take("--fixed", "fixed", o.fixed_path);
    take("--moving", "moving", o.moving_path);
    take("--out-dir", "out-dir", o.out_dir);
    take("--sim", "sim", o.sim);
    take("--ncc-window", "ncc-window", o.ncc_window);
    take("--steps", "steps", o.steps);
    take("--iters", "iters", o.iters);
    take("--lambda-jdet", "lambda-jdet", o.lambda_jdet);
    take("--lambda-mag", "lambda-mag", o.lambda_mag);
    take("--lambda-smt", "lambda-smt", o.lambda_smt);
    take("--epsilon", "epsilon", o.epsilon);
    take("--kernel-radius", "kernel-radius", o.kernel_radius);
    take("--kernel-sigma", "kernel-sigma", o.kernel_sigma);
    take("--field", "field", o.field);
    take("--time-mode", "time-mode", o.time_mode);
    take("--fix-boundary", "fix-boundary", o.fix_boundary);
    take("--seed", "seed", o.seed);
    take("--lr", "lr", o.lr);
    take("--grad", "grad", o.grad);
    take("--memory", "memory", o.memory);
    take("--scheme", "scheme", o.scheme);
    take("--widths", "widths", o.widths);
    take("--bottleneck", "bottleneck", o.bottleneck);
}

ordered_json report_to_json(const flowreg::LossReport& r) {
    ordered_json j;
    j["total"] = r.total;
    j["sim"] = r.sim;
    j["jdet"] = r.jdet;
    j["mag"] = r.mag;
    j["smt"] = r.smt;
    j["rD"] = r.neg_jac_ratio;
    return j;
}

int cmd_register(const CLI::App* cmd, RegisterOptions& o) {
    if (!o.config_path.empty()) merge_config(cmd, o.config_path, o);
    if (o.fixed_path.empty() || o.moving_path.empty() || o.out_dir.empty())
        throw flowreg::ParamError("--fixed, --moving and --out-dir are required");

    const flowreg::Image fixed = flowreg::read_image(o.fixed_path);
    const flowreg::Image moving = flowreg::read_image(o.moving_path);
    if (!(fixed.shape == moving.shape))
        throw flowreg::ShapeError("fixed and moving images must share a shape");
    const int dim = fixed.shape.dim();

    const flowreg::GaussianKernel kernel =
        flowreg::make_kernel(o.kernel_radius, o.kernel_sigma, dim);

    flowreg::FlowConfig flow_cfg;
    flow_cfg.steps = o.steps;
    flow_cfg.scheme = o.scheme == "rk4" ? flowreg::Scheme::rk4 : flowreg::Scheme::euler;

    flowreg::LossConfig loss_cfg;
    loss_cfg.similarity = o.sim == "mse" ? flowreg::Similarity::mse : flowreg::Similarity::ncc;
    loss_cfg.ncc_window = o.ncc_window;
    loss_cfg.lambda_jdet = o.lambda_jdet;
    loss_cfg.lambda_mag = o.lambda_mag;
    loss_cfg.lambda_smt = o.lambda_smt;
    loss_cfg.epsilon = o.epsilon;

    flowreg::OptimConfig optim_cfg;
    optim_cfg.iterations = o.iters;
    optim_cfg.seed = o.seed;
    optim_cfg.mode =
        o.grad == "discrete" ? flowreg::GradientMode::discrete : flowreg::GradientMode::adjoint;
    optim_cfg.memory = o.memory == "reintegrate" ? flowreg::AdjointMemory::reintegrate
                                                 : flowreg::AdjointMemory::store_all;
    optim_cfg.learning_rate = o.lr > 0.0 ? o.lr : (o.field == "tensor" ? 1e-1 : 1e-3);

    std::unique_ptr<flowreg::VelocityModel> model;
    if (o.field == "tensor") {
        model = std::make_unique<flowreg::TensorFieldModel>(fixed.shape, o.steps,
                                                            flow_cfg.horizon);
    } else {
        flowreg::NeuralFieldSpec spec;
        spec.grid = fixed.shape;
        spec.widths = o.widths;
        spec.bottleneck_depth = o.bottleneck;
        spec.time_mode = o.time_mode == "injected" ? flowreg::TimeMode::time_injected
                                                   : flowreg::TimeMode::autonomous;
        spec.horizon = flow_cfg.horizon;
        model = std::make_unique<flowreg::NeuralFieldModel>(spec);
    }

    flowreg::BoundaryMask mask;
    const flowreg::BoundaryMask* mask_ptr = nullptr;
    if (o.fix_boundary) {
        mask = flowreg::make_face_mask(fixed.shape);
        mask_ptr = &mask;
    }

    fs::create_directories(o.out_dir);
    {
        std::ofstream cfg(fs::path(o.out_dir) / "config.json");
        cfg << options_to_json(o).dump(2) << "\n";
    }

    const flowreg::RegistrationResult result = flowreg::run_registration(
        *model, kernel, fixed, moving, flow_cfg, loss_cfg, optim_cfg, mask_ptr);

    // artifacts
    const fs::path out(o.out_dir);
    const bool pgm_out = dim == 2 && fs::path(o.moving_path).extension() == ".pgm";
    if (pgm_out)
        flowreg::write_pgm((out / "warped.pgm").string(), result.warped);
    else
        flowreg::write_image((out / "warped.raw").string(), result.warped);
    flowreg::write_cloud((out / "field.raw").string(), result.deformation);
    const flowreg::JacobianMap jm = flowreg::jacobian_det_map(result.deformation);
    flowreg::write_jacobian((out / "jdet.raw").string(), jm);
    if (dim == 2) {
        flowreg::write_pgm((out / "jdet.pgm").string(), flowreg::jacobian_to_image(jm));
        flowreg::write_pgm((out / "grid.pgm").string(), flowreg::render_grid(result.deformation));
    }
    flowreg::write_params((out / "theta.raw").string(), result.theta, model->describe());

    {
        std::ofstream log(out / "log.jsonl");
        for (const auto& rec : result.log) {
            ordered_json j;
            j["iter"] = rec.iter;
            j["total"] = rec.report.total;
            j["sim"] = rec.report.sim;
            j["jdet"] = rec.report.jdet;
            j["mag"] = rec.report.mag;
            j["smt"] = rec.report.smt;
            j["rD"] = rec.report.neg_jac_ratio;
            j["wall_ms"] = rec.wall_ms;
            log << j.dump() << "\n";
        }
    }
    {
        ordered_json m;
        m["initial"] = report_to_json(result.initial);
        m["final"] = report_to_json(result.final);
        m["neg_jacobian_ratio"] = result.final.neg_jac_ratio;
        std::ofstream mf(out / "metrics.json");
        mf << m.dump(2) << "\n";
    }
    std::cout << "final total " << result.final.total << " (sim " << result.final.sim << ", rD "
              << result.final.neg_jac_ratio << ") after " << o.iters << " iterations\n";
    return 0;
}

int cmd_warp(const std::string& image_path, const std::string& labels_path,
             const std::string& field_path, const std::string& out_path) {
    if (image_path.empty() == labels_path.empty())
        throw flowreg::ParamError("pass exactly one of --image / --labels");
    const flowreg::VoxelCloud field = flowreg::read_cloud(field_path);
    if (!labels_path.empty()) {
        const flowreg::LabelMap labels = flowreg::read_labels(labels_path);
        flowreg::write_labels(out_path, flowreg::warp_labels(labels, field));
    } else {
        const flowreg::Image image = flowreg::read_image(image_path);
        flowreg::write_image(out_path, flowreg::warp(image, field));
    }
    return 0;
}

int cmd_metrics(const std::string& a_path, const std::string& b_path,
                const std::string& field_path, const std::string& labels_csv) {
    ordered_json out;
    if (!a_path.empty() || !b_path.empty()) {
        if (a_path.empty() || b_path.empty())
            throw flowreg::ParamError("--labels-a and --labels-b go together");
        const flowreg::LabelMap a = flowreg::read_labels(a_path);
        const flowreg::LabelMap b = flowreg::read_labels(b_path);
        std::vector<std::uint16_t> labels;
        if (!labels_csv.empty()) {
            std::size_t pos = 0;
            while (pos < labels_csv.size()) {
                const std::size_t comma = labels_csv.find(',', pos);
                const std::string tok = labels_csv.substr(
                    pos, comma == std::string::npos ? std::string::npos : comma - pos);
                labels.push_back(static_cast<std::uint16_t>(std::stoul(tok)));
                if (comma == std::string::npos) break;
                pos = comma + 1;
            }
        } else {
            std::set<std::uint16_t> seen;
            for (auto l : a.labels)
                if (l) seen.insert(l);
            for (auto l : b.labels)
                if (l) seen.insert(l);
            labels.assign(seen.begin(), seen.end());
        }
        const flowreg::DiceResult d = flowreg::dice(a, b, labels);
        out["mean_dice"] = d.mean;
        ordered_json per;
        for (const auto& [label, value] : d.per_label) per[std::to_string(label)] = value;
        out["per_label"] = per;
    }
    if (!field_path.empty()) {
        const flowreg::VoxelCloud field = flowreg::read_cloud(field_path);
        out["neg_jacobian_ratio"] = flowreg::neg_jacobian_ratio(field);
    }
    if (out.empty())
        throw flowreg::ParamError("nothing to do: pass label maps and/or a field");
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_gridviz(const std::string& field_path, const std::string& out_path, int spacing) {
    const flowreg::VoxelCloud field = flowreg::read_cloud(field_path);
    flowreg::write_pgm(out_path, flowreg::render_grid(field, spacing));
    return 0;
}

int cmd_demo(const std::string& name, const std::string& out_dir, int size) {
    fs::create_directories(out_dir);
    std::vector<std::string> names;
    if (name == "all")
        names = flowreg::demo::pair_names();
    else
        names.push_back(name);
    for (const auto& n : names) {
        const flowreg::demo::DemoPair pair = flowreg::demo::make_pair(n, size);
        flowreg::write_pgm((fs::path(out_dir) / (n + "_fixed.pgm")).string(), pair.fixed);
        flowreg::write_pgm((fs::path(out_dir) / (n + "_moving.pgm")).string(), pair.moving);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pairwise diffeomorphic image registration via voxel-cloud flows"};
    app.require_subcommand(1);

    RegisterOptions reg;
    CLI::App* reg_cmd = app.add_subcommand("register", "optimize a deformation for an image pair");
    reg_cmd->add_option("--fixed", reg.fixed_path, "fixed image (pgm or raw)");
    reg_cmd->add_option("--moving", reg.moving_path, "moving image (pgm or raw)");
    reg_cmd->add_option("--out-dir", reg.out_dir, "output directory");
    reg_cmd->add_option("--sim", reg.sim, "similarity loss")
        ->check(CLI::IsMember({"ncc", "mse"}));
    reg_cmd->add_option("--ncc-window", reg.ncc_window, "NCC window side (odd)");
    reg_cmd->add_option("--steps", reg.steps, "integration steps");
    reg_cmd->add_option("--iters", reg.iters, "optimizer iterations");
    reg_cmd->add_option("--lambda-jdet", reg.lambda_jdet, "negative-determinant penalty weight");
    reg_cmd->add_option("--lambda-mag", reg.lambda_mag, "velocity-magnitude weight");
    reg_cmd->add_option("--lambda-smt", reg.lambda_smt, "smoothness weight");
    reg_cmd->add_option("--epsilon", reg.epsilon, "determinant overcorrection");
    reg_cmd->add_option("--kernel-radius", reg.kernel_radius, "smoothing radius (0 disables)");
    reg_cmd->add_option("--kernel-sigma", reg.kernel_sigma, "smoothing sigma");
    reg_cmd->add_option("--field", reg.field, "velocity-field representation")
        ->check(CLI::IsMember({"neural", "tensor"}));
    reg_cmd->add_option("--time-mode", reg.time_mode, "time handling of the neural field")
        ->check(CLI::IsMember({"autonomous", "injected"}));
    reg_cmd->add_flag("--fix-boundary", reg.fix_boundary, "pin all face voxels");
    reg_cmd->add_option("--seed", reg.seed, "initialization seed");
    reg_cmd->add_option("--lr", reg.lr, "learning rate (default by field kind)");
    reg_cmd->add_option("--grad", reg.grad, "gradient mode")
        ->check(CLI::IsMember({"adjoint", "discrete"}));
    reg_cmd->add_option("--memory", reg.memory, "adjoint memory mode")
        ->check(CLI::IsMember({"store-all", "reintegrate"}));
    reg_cmd->add_option("--scheme", reg.scheme, "integration scheme")
        ->check(CLI::IsMember({"euler", "rk4"}));
    reg_cmd->add_option("--widths", reg.widths, "encoder channel widths");
    reg_cmd->add_option("--bottleneck", reg.bottleneck, "bottleneck depth");
    reg_cmd->add_option("--config", reg.config_path, "JSON config with defaults");

    std::string warp_image, warp_labels_path, warp_field, warp_out;
    CLI::App* warp_cmd = app.add_subcommand("warp", "apply a saved field to an image or labels");
    warp_cmd->add_option("--image", warp_image, "image to warp");
    warp_cmd->add_option("--labels", warp_labels_path, "label map to warp");
    warp_cmd->add_option("--field", warp_field, "deformation field (.raw)")->required();
    warp_cmd->add_option("--out", warp_out, "output path")->required();

    std::string met_a, met_b, met_field, met_labels;
    CLI::App* met_cmd = app.add_subcommand("metrics", "dice / negative-Jacobian ratio");
    met_cmd->add_option("--labels-a", met_a, "first label map");
    met_cmd->add_option("--labels-b", met_b, "second label map");
    met_cmd->add_option("--field", met_field, "deformation field for r^D");
    met_cmd->add_option("--labels", met_labels, "comma-separated labels to score");

    std::string gv_field, gv_out;
    int gv_spacing = 4;
    CLI::App* gv_cmd = app.add_subcommand("gridviz", "render a field as a deformed lattice");
    gv_cmd->add_option("--field", gv_field, "deformation field (.raw)")->required();
    gv_cmd->add_option("--out", gv_out, "output PGM")->required();
    gv_cmd->add_option("--spacing", gv_spacing, "grid line spacing");

    std::string demo_name = "all", demo_dir = ".";
    int demo_size = 64;
    CLI::App* demo_cmd = app.add_subcommand("demo", "write the bundled demo image pairs");
    demo_cmd->add_option("--name", demo_name, "pair name or 'all'");
    demo_cmd->add_option("--out-dir", demo_dir, "output directory");
    demo_cmd->add_option("--size", demo_size, "image side length");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (reg_cmd->parsed()) return cmd_register(reg_cmd, reg);
        if (warp_cmd->parsed()) return cmd_warp(warp_image, warp_labels_path, warp_field, warp_out);
        if (met_cmd->parsed()) return cmd_metrics(met_a, met_b, met_field, met_labels);
        if (gv_cmd->parsed()) return cmd_gridviz(gv_field, gv_out, gv_spacing);
        if (demo_cmd->parsed()) return cmd_demo(demo_name, demo_dir, demo_size);
    } catch (const flowreg::IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 3;
    } catch (const flowreg::DivergenceError& e) {
        std::cerr << "diverged: " << e.what() << "\n";
        return 4;
    } catch (const flowreg::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
