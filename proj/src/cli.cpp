#include "priorseg/cli.hpp"

#include "priorseg/config.hpp"
#include "priorseg/contour.hpp"
#include "priorseg/descent.hpp"
#include "priorseg/energy.hpp"
#include "priorseg/errors.hpp"
#include "priorseg/io.hpp"
#include "priorseg/shape_prior.hpp"
#include "priorseg/synth.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace priorseg {

void write_trace_csv(const std::vector<EnergyBreakdown>& trace, std::ostream& out)
{
    out << "iter,f1,f2,f3,f4,total\n";
    for (const auto& e : trace) {
        out << e.iter << ',' << format_double(e.f1) << ',' << format_double(e.f2) << ',' << format_double(e.f3)
            << ',' << format_double(e.f4) << ',' << format_double(e.total) << '\n';
    }
}

namespace {

struct SynthArgs
{
    std::string spec, out_image, out_truth;
};

struct ModelArgs
{
    std::vector<std::string> masks;
    int modes = 1;
    std::string out;
    bool align = false;
};

struct SegmentArgs
{
    std::string image, model, config, out_dir;
};

struct EnergyArgs
{
    std::string image, phi, model, config;
    std::vector<double> lambda;
    std::vector<double> pose;
};

struct ReinitArgs
{
    std::string phi, out;
    int iters = 100;
    double dt = 0.5;
};

void save_text(const std::string& path, const std::string& text)
{
    io::write_file_bytes(path, text);
}

int do_synth(const SynthArgs& a, std::ostream& out)
{
    const auto spec = SceneSpec::from_key_values(KeyValues::parse_file(a.spec));
    const auto [image, truth] = render(spec);
    io::write_pgm(image, a.out_image);
    io::write_pgm(truth.to_field(), a.out_truth);
    out << "synth: " << spec.width << "x" << spec.height << " image -> " << a.out_image << "\n";
    return 0;
}

int do_build_model(const ModelArgs& a, std::ostream& out)
{
    std::vector<BinaryMask> masks;
    for (const auto& path : a.masks) {
        masks.push_back(BinaryMask::from_field(io::read_pgm(path)));
        if (masks.back().width() != masks.front().width() || masks.back().height() != masks.front().height()) {
            throw FormatError("build-model: mask '" + path + "' differs in size from the first mask");
        }
        if (!masks.back().non_degenerate()) {
            throw FormatError("build-model: mask '" + path + "' is all inside or all outside");
        }
    }
    if (a.align) {
        masks = centroid_align(masks);
    }
    std::vector<ScalarField> sdfs;
    sdfs.reserve(masks.size());
    for (const auto& m : masks) {
        sdfs.push_back(sdf_from_mask(m));
    }
    const auto model = build_shape_model(sdfs, a.modes);
    write_shape_model(model, a.out);
    out << "build-model: " << masks.size() << " masks, " << model.num_modes() << " modes";
    if (model.degenerate) {
        out << " (degenerate variances present)";
    }
    out << "\n";
    return 0;
}

std::optional<ShapeModel> load_model(const std::string& path, const RunConfig& cfg, const ScalarField& image)
{
    if (path.empty()) {
        return std::nullopt;
    }
    auto model = read_shape_model(path, cfg.lambda_box_rule, cfg.lambda_box_k);
    if (model.width() != image.width() || model.height() != image.height()) {
        throw FormatError("shape model is " + std::to_string(model.width()) + "x" + std::to_string(model.height()) +
                          " but the image is " + std::to_string(image.width()) + "x" +
                          std::to_string(image.height()));
    }
    return model;
}

int do_segment(const SegmentArgs& a, std::ostream& out)
{
    const auto cfg = load_run_config(a.config);
    const auto image = io::read_pgm(a.image);
    const auto model = load_model(a.model, cfg, image);
    const ShapeModel* mp = model ? &*model : nullptr;

    InitSpec init;
    init.radius_fraction = cfg.init_radius_fraction;
    const auto result = segment(image, mp, cfg.weights, cfg.descent, init);

    const std::filesystem::path dir(a.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw FormatError("cannot create output directory '" + a.out_dir + "': " + ec.message());
    }
    const auto contours = extract_contours(result.phi);
    io::write_sfld(result.phi, (dir / "phi.sfld").string());
    std::ostringstream csv;
    write_contours_csv(contours, csv);
    save_text((dir / "contours.csv").string(), csv.str());
    // Overlay starts from the image as it would be stored, so untouched pixels match it exactly.
    std::ostringstream pgm;
    io::write_pgm(image, pgm);
    std::istringstream stored(pgm.str());
    io::write_pgm(overlay_contours(io::read_pgm(stored), contours), (dir / "overlay.pgm").string());
    std::ostringstream trace;
    write_trace_csv(result.trace, trace);
    save_text((dir / "trace.csv").string(), trace.str());
    save_text((dir / "config.txt").string(), cfg.to_key_values().to_string());

    const auto& last = result.trace.back();
    out << "segment: " << result.iter << " iterations, " << contours.size() << " contours, total "
        << format_double(last.total) << "\n";
    return 0;
}

int do_energy(const EnergyArgs& a, std::ostream& out)
{
    const auto cfg = load_run_config(a.config);
    const auto image = io::read_pgm(a.image);
    const auto phi = io::read_sfld(a.phi);
    if (!phi.same_shape(image)) {
        throw FormatError("level set is " + std::to_string(phi.width()) + "x" + std::to_string(phi.height()) +
                          " but the image is " + std::to_string(image.width()) + "x" +
                          std::to_string(image.height()));
    }
    const auto model = load_model(a.model, cfg, image);
    const ShapeModel* mp = model ? &*model : nullptr;
    if (!mp && (!a.lambda.empty() || !a.pose.empty())) {
        throw FormatError("--lambda and --pose need --model");
    }

    InitSpec init;
    init.phi = phi;
    if (mp) {
        init.lambda = Eigen::VectorXd::Zero(mp->num_modes());
        if (!a.lambda.empty()) {
            if (static_cast<int>(a.lambda.size()) != mp->num_modes()) {
                throw FormatError("--lambda needs " + std::to_string(mp->num_modes()) + " values");
            }
            init.lambda = Eigen::Map<const Eigen::VectorXd>(a.lambda.data(), mp->num_modes());
            if (!mp->lambda_in_box(init.lambda)) {
                throw FormatError("--lambda lies outside the shape parameter box");
            }
        }
        if (!a.pose.empty()) {
            if (a.pose.size() != 4) {
                throw FormatError("--pose needs 4 values: tau theta tx ty");
            }
            init.pose = Pose{a.pose[0], a.pose[1], a.pose[2], a.pose[3]};
            if (!contains(cfg.descent.pose_box, init.pose)) {
                throw FormatError("--pose lies outside the pose box");
            }
        }
    }
    cfg.weights.validate();
    auto state = initial_state(image, mp, cfg.weights, cfg.descent, init);
    if (mp) {
        refresh_approximants(state, image, *mp, cfg.weights, cfg.descent.inner_ms_iters);
    }
    const auto g = edge_indicator(image, cfg.weights.eta, cfg.weights.sigma);
    const auto e = total_energy(state, image, g, mp, cfg.weights);
    out << "f1=" << format_double(e.f1) << " f2=" << format_double(e.f2) << " f3=" << format_double(e.f3)
        << " f4=" << format_double(e.f4) << " total=" << format_double(e.total) << "\n";
    return 0;
}

int do_reinit(const ReinitArgs& a, std::ostream& out)
{
    const auto phi = io::read_sfld(a.phi);
    const auto result = reinitialize(phi, a.iters, a.dt);
    io::write_sfld(result, a.out);
    out << "reinit: " << a.iters << " iterations -> " << a.out << "\n";
    return 0;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Shape-prior level-set segmentation"};
    app.failure_message(CLI::FailureMessage::help);
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "Render a synthetic scene and its ground truth");
    synth->add_option("--spec", synth_args.spec, "Scene spec (key=value)")->required();
    synth->add_option("--out-image", synth_args.out_image, "Output image (PGM)")->required();
    synth->add_option("--out-truth", synth_args.out_truth, "Output truth mask (PGM)")->required();

    ModelArgs model_args;
    auto* build = app.add_subcommand("build-model", "Build a PCA shape model from training masks");
    build->add_option("--masks", model_args.masks, "Training masks (PGM, inside > 127.5)")->required();
    build->add_option("--modes", model_args.modes, "Number of retained modes")->required()->check(CLI::PositiveNumber);
    build->add_option("--out", model_args.out, "Output model (SMDL)")->required();
    build->add_flag("--align", model_args.align, "Translate each mask so its centroid is the domain center");

    SegmentArgs seg_args;
    auto* seg = app.add_subcommand("segment", "Segment an image");
    seg->add_option("--image", seg_args.image, "Input image (PGM)")->required();
    seg->add_option("--model", seg_args.model, "Shape model (SMDL); prior-free without it");
    seg->add_option("--config", seg_args.config, "Run configuration (key=value)")->required();
    seg->add_option("--out-dir", seg_args.out_dir, "Output directory")->required();

    EnergyArgs energy_args;
    auto* energy = app.add_subcommand("energy", "Evaluate the energy of a level set");
    energy->add_option("--image", energy_args.image, "Input image (PGM)")->required();
    energy->add_option("--phi", energy_args.phi, "Level set (SFLD)")->required();
    energy->add_option("--model", energy_args.model, "Shape model (SMDL)");
    energy->add_option("--lambda", energy_args.lambda, "Shape parameters");
    energy->add_option("--pose", energy_args.pose, "Pose: tau theta tx ty")->expected(4);
    energy->add_option("--config", energy_args.config, "Run configuration (key=value)")->required();

    ReinitArgs reinit_args;
    auto* reinit = app.add_subcommand("reinit", "Reinitialize a level set to a signed distance function");
    reinit->add_option("--phi", reinit_args.phi, "Level set (SFLD)")->required();
    reinit->add_option("--iters", reinit_args.iters, "Iterations")->required()->check(CLI::NonNegativeNumber);
    reinit->add_option("--dt", reinit_args.dt, "Pseudo-time step, 0 < dt <= 0.5");
    reinit->add_option("--out", reinit_args.out, "Output level set (SFLD)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) return do_synth(synth_args, out);
        if (build->parsed()) return do_build_model(model_args, out);
        if (seg->parsed()) return do_segment(seg_args, out);
        if (energy->parsed()) return do_energy(energy_args, out);
        if (reinit->parsed()) return do_reinit(reinit_args, out);
    } catch (const NumericalError& e) {
        err << "error: numerical abort: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

int run_cli(int argc, const char* const* argv)
{
    return run_cli(argc, argv, std::cout, std::cerr);
}

} // namespace priorseg
