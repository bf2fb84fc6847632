// sdnv: train sliding door networks, map their rules, verify global
// robustness and extract adversarial examples.
//
// Exit codes: 0 ok, 1 usage, 2 data error, 3 divergence or budget exhaustion.

#include "sdnv/data.hpp"
#include "sdnv/rgrv.hpp"
#include "sdnv/rulemap.hpp"
#include "sdnv/sdn.hpp"
#include "sdnv/serialize.hpp"
#include "sdnv/svg.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace sdnv;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDiverged = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataOptions {
    std::string path;
    int downscale = 0;
    long limit = 0;
};

void add_data_options(CLI::App* cmd, DataOptions& d, const std::string& name, bool required) {
    auto* opt = cmd->add_option("--" + name, d.path,
                                "IDX directory (MNIST file names) or dataset cache file");
    if (required) opt->required();
    cmd->add_option("--downscale", d.downscale, "Mean-pool square images to this side length");
    cmd->add_option("--limit", d.limit, "Use only the first N samples")->check(CLI::NonNegativeNumber);
}

json data_config(const DataOptions& d) {
    return {{"path", d.path}, {"downscale", d.downscale}, {"limit", d.limit}};
}

Dataset load_data(const DataOptions& d, const std::string& split) {
    Dataset data = fs::is_directory(d.path) ? load_mnist_split(d.path, split) : load_dataset(d.path);
    if (d.downscale > 0) {
        const auto side = static_cast<int>(std::lround(std::sqrt(double(data.dim()))));
        if (side * side != data.dim()) throw UsageError("--downscale needs square image inputs");
        data = downscale(data, side, d.downscale);
    }
    if (d.limit > 0 && d.limit < data.size()) data = data.slice(0, d.limit);
    return data;
}

struct BudgetOptions {
    Budgets budgets;

    void attach(CLI::App* cmd) {
        cmd->add_option("--budget-discover", budgets.discover_samples, "Uniform draws for region discovery")
            ->capture_default_str();
        cmd->add_option("--budget-region", budgets.region_samples, "Rejection draws per region")
            ->capture_default_str();
        cmd->add_option("--budget-probes", budgets.probes_per_boundary, "Probes per explicit rule")
            ->capture_default_str();
        cmd->add_option("--budget-ball", budgets.ball_samples, "Draws per limiting ball")
            ->capture_default_str();
        cmd->add_option("--budget-vertices", budgets.max_vertices, "Graph vertex cap")
            ->capture_default_str();
    }

    json to_json() const {
        return {{"discover_samples", budgets.discover_samples},
                {"region_samples", budgets.region_samples},
                {"probes_per_boundary", budgets.probes_per_boundary},
                {"ball_samples", budgets.ball_samples},
                {"max_vertices", budgets.max_vertices}};
    }
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

fs::path with_suffix(const fs::path& base, const std::string& suffix) {
    fs::path p = base;
    p.replace_extension();
    return p.string() + suffix;
}

// ---------------------------------------------------------------- train

struct TrainOptions {
    DataOptions data;
    DataOptions test;
    std::string arch = "16x4,12x2";
    double alpha = 2.0;
    TrainConfig config;
    std::string loss = "cross_entropy";
    std::string model_out = "model.json";
    std::string log_out;
    bool quiet = false;
};

int cmd_train(const TrainOptions& o) {
    TrainConfig cfg = o.config;
    cfg.loss_kind = parse_loss_kind(o.loss);
    cfg.validate();
    const auto arch = parse_architecture(o.arch);
    Dataset train_set = load_data(o.data, "train");
    train_set.validate();

    std::optional<std::ofstream> log;
    if (!o.log_out.empty()) {
        log.emplace(o.log_out);
        if (!*log) throw std::runtime_error("cannot write " + o.log_out);
        *log << "epoch,loss,accuracy,sat_rate\n";
        log->precision(17);
    }
    auto on_epoch = [&](const EpochStats& s) {
        if (log) *log << s.epoch << ',' << s.loss << ',' << s.accuracy << ',' << s.sat_rate << '\n';
        if (!o.quiet && (s.epoch % 10 == 0 || s.epoch == cfg.epochs)) {
            std::cerr << "epoch " << s.epoch << " loss " << s.loss << " acc " << s.accuracy
                      << " sat " << s.sat_rate << '\n';
        }
    };
    SDNetwork net = train(arch, o.alpha, train_set, cfg, on_epoch);

    json metrics = {{"train_accuracy", accuracy(net, train_set)},
                    {"train_sat_rate", sat_rate(net, train_set)}};
    if (!o.test.path.empty() || fs::is_directory(o.data.path)) {
        DataOptions t = o.test.path.empty() ? o.data : o.test;
        if (o.test.path.empty()) t.limit = 0;
        if (t.downscale == 0) t.downscale = o.data.downscale;
        const Dataset test_set = load_data(t, "test");
        metrics["test_accuracy"] = accuracy(net, test_set);
        metrics["test_sat_rate"] = sat_rate(net, test_set);
    }
    const json config = {{"command", "train"},
                         {"arch", format_architecture(arch)},
                         {"alpha", o.alpha},
                         {"epochs", cfg.epochs},
                         {"batch_size", cfg.batch_size},
                         {"learning_rate", cfg.learning_rate},
                         {"lambda", cfg.lambda},
                         {"loss", to_string(cfg.loss_kind)},
                         {"seed", cfg.seed},
                         {"data", data_config(o.data)},
                         {"test", data_config(o.test)},
                         {"metrics", metrics}};
    save_model(o.model_out, net, config);
    std::cout << metrics.dump() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------- rules

struct RulesOptions {
    std::string model;
    DataOptions data;
    std::size_t uniform = 4096;
    std::uint64_t seed = 0;
    std::string pattern;
    int cls = -1;
    std::string out = "rules.json";
};

int cmd_rules(const RulesOptions& o) {
    const SDNetwork net = load_model(o.model);
    std::vector<Region> regions;
    if (!o.pattern.empty()) {
        const auto pattern = parse_pattern(o.pattern);
        for (int k = 0; k < net.classes; ++k) {
            if (o.cls < 0 || o.cls == k) regions.push_back(region_rules(net, k, pattern));
        }
    } else {
        std::optional<Dataset> data;
        if (!o.data.path.empty()) data = load_data(o.data, "train");
        Rng rng(derive_seed(o.seed, 0xd15c));
        auto vertices = discover_populated_regions(net, data ? &*data : nullptr, o.uniform, rng);
        for (auto& v : vertices) {
            if (o.cls < 0 || v.region.class_label == o.cls) regions.push_back(std::move(v.region));
        }
    }
    const RegionIndex index = build_region_index(std::move(regions));
    const json config = {{"command", "rules"},
                         {"model", o.model},
                         {"data", data_config(o.data)},
                         {"uniform_draws", o.uniform},
                         {"seed", o.seed},
                         {"pattern", o.pattern},
                         {"class", o.cls}};
    save_json(o.out, rules_to_json(net, index, config));
    std::cout << index.size() << " regions written to " << o.out << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------- verify

struct VerifyOptions {
    std::string model;
    DataOptions data;
    VerifyParams params;
    BudgetOptions budgets;
    std::string out = "report.json";
    int resolution = 400;
};

int cmd_verify(VerifyOptions o) {
    const SDNetwork net = load_model(o.model);
    std::optional<Dataset> data;
    if (!o.data.path.empty()) data = load_data(o.data, "train");
    o.params.budgets = o.budgets.budgets;
    const VerificationReport report = verify_global(net, data ? &*data : nullptr, o.params);
    const json config = {{"command", "verify"},
                         {"model", o.model},
                         {"data", data_config(o.data)},
                         {"R", o.params.R},
                         {"r", o.params.r},
                         {"seed", o.params.seed},
                         {"budgets", o.budgets.to_json()},
                         {"resolution", o.resolution}};
    save_json(o.out, to_json(report, config));

    if (net.input_dim() == 2) {
        const auto plot = emit_region_svg(net, &report.graph, report.findings, o.resolution);
        write_text(with_suffix(o.out, ".svg"), plot.svg);
        write_text(with_suffix(o.out, ".grid.csv"), plot.csv);
        std::ostringstream samples;
        samples.precision(17);
        samples << "vertex,class,key,x,y\n";
        for (std::size_t v = 0; v < report.graph.vertices.size(); ++v) {
            const auto& vx = report.graph.vertices[v];
            for (const auto& p : vx.samples.points) {
                samples << v << ',' << vx.region.class_label << ',' << vx.region.key.number << ','
                        << p[0] << ',' << p[1] << '\n';
            }
        }
        write_text(with_suffix(o.out, ".samples.csv"), samples.str());
    }

    std::cout << report.verdict() << ": " << report.findings.size() << " findings, "
              << report.graph.vertices.size() << " regions, " << report.graph.edges.size()
              << " edges\n";
    if (!report.complete) {
        std::cerr << "incomplete: budget exhausted\n";
        for (const auto& w : report.warnings) std::cerr << "  " << w << '\n';
        return kExitDiverged;
    }
    return kExitOk;
}

// ---------------------------------------------------------------- attack

struct AttackOptions {
    std::string model;
    std::string report;
    std::string region;
    int cls = -1;
    std::size_t count = 10;
    std::uint64_t seed = 0;
    std::string out = "attack.csv";
    std::string grid;
};

void write_pgm_grid(const fs::path& path, const std::vector<Vector>& points, const Box& bounds) {
    const int side = static_cast<int>(std::lround(std::sqrt(double(points.front().size()))));
    if (side * side != points.front().size()) throw UsageError("--grid needs square image inputs");
    const int cols = static_cast<int>(std::ceil(std::sqrt(double(points.size()))));
    const int rows = static_cast<int>((points.size() + cols - 1) / cols);
    const int cell = side + 1;
    std::vector<unsigned char> pixels(std::size_t(rows * cell) * (cols * cell), 0);
    const int width = cols * cell;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const int r0 = int(i) / cols * cell, c0 = int(i) % cols * cell;
        for (int y = 0; y < side; ++y) {
            for (int x = 0; x < side; ++x) {
                const Eigen::Index k = y * side + x;
                const double t = (points[i][k] - bounds.lower[k]) / (bounds.upper[k] - bounds.lower[k]);
                pixels[std::size_t(r0 + y) * width + (c0 + x)] =
                    static_cast<unsigned char>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0));
            }
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "P5\n" << width << ' ' << rows * cell << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()), std::streamsize(pixels.size()));
}

int cmd_attack(const AttackOptions& o) {
    const SDNetwork net = load_model(o.model);
    const ActivationPattern pattern = parse_pattern(o.region);
    int cls = o.cls;
    if (!o.report.empty()) {
        const json report = load_json(o.report);
        std::vector<int> classes;
        for (const auto& v : report.at("vertices")) {
            if (pattern_from_json(v.at("pattern")) == pattern) classes.push_back(v.at("class").get<int>());
        }
        if (cls < 0) {
            if (classes.size() != 1) {
                throw UsageError("region " + o.region + " matches " + std::to_string(classes.size()) +
                                 " report vertices; pass --class");
            }
            cls = classes.front();
        }
    }
    if (cls < 0 || cls >= net.classes) throw UsageError("--class is required and must name a class");

    std::vector<Vector> points;
    if (o.count > 0) {
        const Region region = region_rules(net, cls, pattern);
        points = extract_adversarial_examples(net, region, o.count, o.seed);
    }
    std::ofstream out(o.out);
    if (!out) throw std::runtime_error("cannot write " + o.out);
    out.precision(17);
    for (const auto& p : points) {
        for (Eigen::Index i = 0; i < p.size(); ++i) out << (i ? "," : "") << p[i];
        out << ',' << forward(net, p).predicted() << '\n';
    }
    if (!o.grid.empty() && !points.empty()) write_pgm_grid(o.grid, points, net.input_bounds);
    std::cout << points.size() << " points classified as " << cls << " written to " << o.out << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------- synth2d

struct SynthOptions {
    Synth2DConfig config;
    bool no_blob = false;
    std::string out = "synth2d.bin";
};

int cmd_synth2d(SynthOptions o) {
    o.config.plant_blob = !o.no_blob;
    o.config.validate();
    const Dataset data = gen_synth2d(o.config);
    const json provenance = {{"command", "synth2d"},
                             {"seed", o.config.seed},
                             {"uniform_points", o.config.uniform_points},
                             {"blob_points", o.config.blob_points},
                             {"plant_blob", o.config.plant_blob},
                             {"main", {o.config.main_lo_x, o.config.main_lo_y, o.config.main_hi_x,
                                       o.config.main_hi_y}},
                             {"blob", {o.config.blob_x, o.config.blob_y, o.config.blob_radius}},
                             {"tool_version", kToolVersion}};
    save_dataset(o.out, data, provenance.dump());
    std::cout << data.size() << " points written to " << o.out << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------- report

struct ReportOptions {
    std::string report;
    std::string model;
    int resolution = 400;
    std::string svg;
};

int cmd_report(const ReportOptions& o) {
    const json report = load_json(o.report);
    std::cout << "verdict: " << report.at("verdict").get<std::string>()
              << (report.at("complete").get<bool>() ? "" : " (incomplete)") << '\n'
              << "R = " << report.at("params").at("R") << ", r = " << report.at("params").at("r")
              << ", seed = " << report.at("seed") << '\n'
              << "regions: " << report.at("vertices").size() << ", edges: " << report.at("edges").size()
              << ", components: " << report.at("components").size() << '\n';
    for (const auto& [cls, count] : report.at("components_per_class").items()) {
        std::cout << "  class " << cls << ": " << count << " components\n";
    }
    std::vector<Finding> findings;
    for (const auto& f : report.at("findings")) {
        findings.push_back(finding_from_json(f));
        std::cout << "finding " << f.at("kind").get<std::string>() << " class " << f.at("class")
                  << " component " << f.at("component") << " radius " << f.at("ball").at("radius")
                  << " evidence " << f.at("evidence") << '\n';
        for (auto v : f.at("vertices")) {
            std::cout << "  region " << report.at("vertices").at(v.get<std::size_t>()).at("pattern_text").get<std::string>()
                      << '\n';
        }
    }
    for (const auto& w : report.at("warnings")) std::cout << "warning: " << w.get<std::string>() << '\n';

    if (!o.svg.empty()) {
        if (o.model.empty()) throw UsageError("--svg needs --model");
        const SDNetwork net = load_model(o.model);
        ClassificationGraph graph;
        for (const auto& v : report.at("vertices")) {
            Vertex vx;
            vx.region.class_label = v.at("class").get<int>();
            vx.region.pattern = pattern_from_json(v.at("pattern"));
            vx.witness = vector_from_json(v.at("witness"));
            graph.vertices.push_back(std::move(vx));
        }
        for (const auto& e : report.at("edges")) {
            graph.edges.emplace(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
        }
        const auto plot = emit_region_svg(net, &graph, findings, o.resolution);
        write_text(o.svg, plot.svg);
        write_text(with_suffix(o.svg, ".grid.csv"), plot.csv);
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sliding door network training, rule mapping and global robustness verification"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);
    app.fallthrough();
    unsigned threads = 1;
    app.add_option("--threads", threads, "Worker threads for sampling and probing")
        ->check(CLI::PositiveNumber);

    TrainOptions train_opts;
    auto* train_cmd = app.add_subcommand("train", "Train a sliding door network");
    add_data_options(train_cmd, train_opts.data, "data", true);
    train_cmd->add_option("--test", train_opts.test.path, "Evaluation data (default: test split of an IDX --data)");
    train_cmd->add_option("--arch", train_opts.arch, "<groups>x<group_size>[,...]")->capture_default_str();
    train_cmd->add_option("--alpha", train_opts.alpha)->capture_default_str();
    train_cmd->add_option("--epochs", train_opts.config.epochs)->capture_default_str();
    train_cmd->add_option("--batch", train_opts.config.batch_size)->capture_default_str();
    train_cmd->add_option("--lr", train_opts.config.learning_rate)->capture_default_str();
    train_cmd->add_option("--lambda", train_opts.config.lambda)->capture_default_str();
    train_cmd->add_option("--loss", train_opts.loss, "cross_entropy | squared_error")->capture_default_str();
    train_cmd->add_option("--seed", train_opts.config.seed)->capture_default_str();
    train_cmd->add_option("-o,--model", train_opts.model_out)->capture_default_str();
    train_cmd->add_option("--log", train_opts.log_out, "Training log CSV");
    train_cmd->add_flag("-q,--quiet", train_opts.quiet);

    RulesOptions rules_opts;
    auto* rules_cmd = app.add_subcommand("rules", "Map classification rules of populated regions");
    rules_cmd->add_option("--model", rules_opts.model)->required();
    add_data_options(rules_cmd, rules_opts.data, "data", false);
    rules_cmd->add_option("--budget-discover", rules_opts.uniform, "Uniform draws for region discovery")
        ->capture_default_str();
    rules_cmd->add_option("--seed", rules_opts.seed)->capture_default_str();
    rules_cmd->add_option("--pattern", rules_opts.pattern, "Map one pattern, e.g. [[0,1],[2,-]]");
    rules_cmd->add_option("--class", rules_opts.cls, "Restrict to one class");
    rules_cmd->add_option("-o,--out", rules_opts.out)->capture_default_str();

    VerifyOptions verify_opts;
    auto* verify_cmd = app.add_subcommand("verify", "Region-based global robustness verification");
    verify_cmd->add_option("--model", verify_opts.model)->required();
    add_data_options(verify_cmd, verify_opts.data, "data", false);
    verify_cmd->add_option("--R", verify_opts.params.R, "Small-component radius threshold")->capture_default_str();
    verify_cmd->add_option("--r", verify_opts.params.r, "Protruding fraction threshold")->capture_default_str();
    verify_cmd->add_option("--seed", verify_opts.params.seed)->capture_default_str();
    verify_opts.budgets.attach(verify_cmd);
    verify_cmd->add_option("-o,--out", verify_opts.out)->capture_default_str();
    verify_cmd->add_option("--resolution", verify_opts.resolution, "2D plot grid size")->capture_default_str();

    AttackOptions attack_opts;
    auto* attack_cmd = app.add_subcommand("attack", "Extract points of an adversarial region");
    attack_cmd->add_option("--model", attack_opts.model)->required();
    attack_cmd->add_option("--report", attack_opts.report, "Verify report used to resolve the class");
    attack_cmd->add_option("--region", attack_opts.region, "Activation pattern, e.g. [[18,1],[1,15]]")->required();
    attack_cmd->add_option("--class", attack_opts.cls);
    attack_cmd->add_option("--count", attack_opts.count)->capture_default_str();
    attack_cmd->add_option("--seed", attack_opts.seed)->capture_default_str();
    attack_cmd->add_option("-o,--out", attack_opts.out, "Point list CSV (coordinates, class)")->capture_default_str();
    attack_cmd->add_option("--grid", attack_opts.grid, "PGM image grid for square image inputs");

    SynthOptions synth_opts;
    auto* synth_cmd = app.add_subcommand("synth2d", "Generate the planted-noise 2D dataset");
    synth_cmd->add_option("--points", synth_opts.config.uniform_points)->capture_default_str();
    synth_cmd->add_option("--blob-points", synth_opts.config.blob_points)->capture_default_str();
    synth_cmd->add_flag("--no-blob", synth_opts.no_blob, "Leave out the noise blob");
    synth_cmd->add_option("--seed", synth_opts.config.seed)->capture_default_str();
    synth_cmd->add_option("-o,--out", synth_opts.out)->capture_default_str();

    ReportOptions report_opts;
    auto* report_cmd = app.add_subcommand("report", "Summarize a verify report");
    report_cmd->add_option("report", report_opts.report)->required();
    report_cmd->add_option("--model", report_opts.model, "Model, needed for --svg");
    report_cmd->add_option("--svg", report_opts.svg, "Re-render the 2D overlay");
    report_cmd->add_option("--resolution", report_opts.resolution)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }
    verify_opts.params.threads = threads;

    try {
        if (*train_cmd) return cmd_train(train_opts);
        if (*rules_cmd) return cmd_rules(rules_opts);
        if (*verify_cmd) return cmd_verify(verify_opts);
        if (*attack_cmd) return cmd_attack(attack_opts);
        if (*synth_cmd) return cmd_synth2d(synth_opts);
        if (*report_cmd) return cmd_report(report_opts);
    } catch (const TrainingDivergence& e) {
        std::cerr << "error: training diverged";
        if (e.epoch() >= 0) std::cerr << " at epoch " << e.epoch();
        std::cerr << ": " << e.what() << '\n';
        return kExitDiverged;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ContractViolation& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}
