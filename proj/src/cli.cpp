#include "gatenet/cli.hpp"

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gatenet/config.hpp"
#include "gatenet/data.hpp"
#include "gatenet/eval.hpp"
#include "gatenet/optim.hpp"
#include "gatenet/persist.hpp"
#include "gatenet/train.hpp"

namespace gatenet {

namespace fs = std::filesystem;

namespace {

struct Options
{
    std::string config;
    std::string data_dir;
    std::string out;
    std::string base;
    std::string category;
    std::vector<std::string> gates;
    std::string report;
};

RunConfig resolve_config(const Options& o)
{
    RunConfig config = o.config.empty() ? RunConfig{} : load_config(o.config);
    if (!o.data_dir.empty())
        config.data_dir = o.data_dir;
    config.validate();
    return config;
}

fs::path curve_path(const fs::path& checkpoint)
{
    fs::path p = checkpoint;
    return p.replace_extension(".loss.csv");
}

DataSplit load_split(const RunConfig& config)
{
    return make_split(load_cifar10(config.data_dir), config);
}

TrainHooks progress(std::ostream& out)
{
    TrainHooks hooks;
    hooks.on_record = [&out](const LossPoint& p) {
        out << p.phase << " step " << p.step << " " << p.split << " " << format_number(p.loss) << "\n";
        out.flush();
    };
    return hooks;
}

int verify_data(const Options& o, std::ostream& out, std::ostream& err)
{
    const RunConfig config = resolve_config(o);
    const auto problems = verify_cifar_dir(config.data_dir);
    if (!problems.empty()) {
        for (const auto& p : problems)
            err << "error: " << p << "\n";
        return kExitFailure;
    }
    out << "ok: " << config.data_dir << "\n";
    return kExitOk;
}

int train_base_cmd(const Options& o, std::ostream& out)
{
    const RunConfig config = resolve_config(o);
    const DataSplit split = load_split(config);
    const auto result = train_base(split, Taxonomy::cifar10(), config.mlp(), config.schedule(), progress(out));
    write_file_bytes(o.out, save_base(result.model));
    write_loss_curve_csv(result.curve, curve_path(o.out));
    out << "saved " << o.out << " (best val " << format_number(result.best_val_loss) << " at step "
        << result.best_step << ")\n";
    return kExitOk;
}

int train_gates_cmd(const Options& o, std::ostream& out)
{
    const RunConfig config = resolve_config(o);
    const BaseModel base = load_base(read_file_bytes(o.base));
    base.taxonomy.category_index(o.category);
    const DataSplit split = load_split(config);
    const auto result = train_gates(base, o.category, split, config.mlp(), config.schedule(), progress(out));
    write_file_bytes(o.out, save_gates(result.gates, base));
    write_loss_curve_csv(result.curve, curve_path(o.out));
    out << "saved " << o.out << " (best val " << format_number(result.best_val_loss) << ", base "
        << format_number(result.base_val_loss) << ")\n";
    return kExitOk;
}

/// Evaluates the base (and the gated model when gate files are given) and
/// writes every report file. Returns the report of the requested model.
MetricsReport write_report(const RunConfig& config, const fs::path& base_path,
                           const std::vector<std::string>& gate_paths, const fs::path& report)
{
    const BaseModel base = load_base(read_file_bytes(base_path));
    std::optional<GateBank<float>> bank;
    if (!gate_paths.empty()) {
        std::vector<GateCheckpoint> checkpoints;
        for (const auto& p : gate_paths)
            checkpoints.push_back(load_gates(read_file_bytes(p)));
        bank = pair_gates(base, checkpoints);
        for (const auto& category : base.taxonomy.categories) {
            bool found = false;
            for (const auto& t : bank->tasks)
                found = found || t == category;
            if (!found)
                throw MissingGatesError("no gate checkpoint for category '" + category + "'");
        }
    }

    const ImageSet test = load_cifar_file(fs::path(config.data_dir) / kCifarTestFile);
    fs::create_directories(report);

    const auto base_report = evaluate(base, nullptr, test);
    write_confusion_csv(base_report, base.taxonomy, report / "confusion_base.csv");

    LossCurve curve;
    std::vector<fs::path> sources{base_path};
    sources.insert(sources.end(), gate_paths.begin(), gate_paths.end());
    for (const auto& s : sources)
        if (fs::exists(curve_path(s)))
            curve.append(read_loss_curve_csv(curve_path(s)));
    if (!curve.points.empty())
        write_loss_curve_csv(curve, report / "loss_curve.csv");

    nlohmann::ordered_json manifest;
    manifest["base"] = fs::absolute(base_path).string();
    manifest["gates"] = nlohmann::ordered_json::array();
    for (const auto& g : gate_paths)
        manifest["gates"].push_back(fs::absolute(g).string());
    manifest["data_dir"] = fs::absolute(config.data_dir).string();
    write_text_file(report / "sources.json", manifest.dump(2) + "\n");

    if (!bank) {
        write_metrics_json(base_report, report / "metrics.json");
        return base_report;
    }
    const auto gated_report = evaluate(base, &*bank, test);
    write_metrics_json(gated_report, report / "metrics.json");
    write_metrics_json(base_report, report / "metrics_base.json");
    write_confusion_csv(gated_report, base.taxonomy, report / "confusion_gated.csv");
    const auto snapshot = GateSnapshot::from_bank(*bank);
    export_gate_images(snapshot, report);
    export_gate_histograms(snapshot, report);
    return gated_report;
}

void print_metrics(const MetricsReport& r, std::ostream& out)
{
    out << r.model << ": loss " << format_number(r.test_loss) << ", accuracy " << format_number(r.test_accuracy)
        << ", categorical isolation " << format_number(r.categorical_isolation) << " (n=" << r.n_test << ")\n";
}

int eval_cmd(const Options& o, std::ostream& out)
{
    const RunConfig config = resolve_config(o);
    print_metrics(write_report(config, o.base, o.gates, o.report), out);
    return kExitOk;
}

int export_figures_cmd(const Options& o, std::ostream& out)
{
    const fs::path report = o.report;
    std::ifstream in(report / "sources.json");
    if (!in)
        throw Error("no sources.json in " + report.string() + "; run eval first");
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw MalformedFileError((report / "sources.json").string() + ": " + e.what());
    }
    RunConfig config = resolve_config(o);
    if (o.data_dir.empty() && o.config.empty())
        config.data_dir = manifest.at("data_dir").get<std::string>();
    print_metrics(write_report(config, manifest.at("base").get<std::string>(),
                               manifest.at("gates").get<std::vector<std::string>>(), report),
                  out);
    return kExitOk;
}

int gradcheck_cmd(std::ostream& out)
{
    const auto report = finite_diff_check({});
    for (const auto& e : report.entries)
        out << (e.passed ? "PASS " : "FAIL ") << e.path << " max_rel_error " << format_number(e.max_rel_error)
            << " checked " << e.checked << " skipped " << e.skipped << "\n";
    return report.passed() ? kExitOk : kExitFailure;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Gated MLP with categorical cueing on CIFAR-10", "gatenet"};
    app.require_subcommand(1);
    Options o;

    auto* verify = app.add_subcommand("verify-data", "Check the CIFAR-10 binary files");
    verify->add_option("--config", o.config, "Run config JSON");
    verify->add_option("--data-dir", o.data_dir, "Directory with the CIFAR-10 .bin files");

    auto* base = app.add_subcommand("train-base", "Train the ungated base network");
    base->add_option("--config", o.config, "Run config JSON");
    base->add_option("--data-dir", o.data_dir, "Overrides data_dir from the config");
    base->add_option("--out", o.out, "Base checkpoint to write")->required();

    auto* gates = app.add_subcommand("train-gates", "Train one category's gate biases on a frozen base");
    gates->add_option("--config", o.config, "Run config JSON (use the one the base was trained with)");
    gates->add_option("--data-dir", o.data_dir, "Overrides data_dir from the config");
    gates->add_option("--base", o.base, "Base checkpoint")->required();
    gates->add_option("--category", o.category, "Category name")->required();
    gates->add_option("--out", o.out, "Gate checkpoint to write")->required();

    auto* eval = app.add_subcommand("eval", "Evaluate on the test set and write a report");
    eval->add_option("--config", o.config, "Run config JSON");
    eval->add_option("--data-dir", o.data_dir, "Overrides data_dir from the config");
    eval->add_option("--base", o.base, "Base checkpoint")->required();
    eval->add_option("--gates", o.gates, "Gate checkpoints, one per category");
    eval->add_option("--report", o.report, "Report directory")->required();

    auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient check on a toy network");

    auto* figures = app.add_subcommand("export-figures", "Re-emit every report CSV from its checkpoints");
    figures->add_option("--config", o.config, "Run config JSON");
    figures->add_option("--data-dir", o.data_dir, "Overrides the recorded data directory");
    figures->add_option("--report", o.report, "Report directory written by eval")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    }

    try {
        if (verify->parsed())
            return verify_data(o, out, err);
        if (base->parsed())
            return train_base_cmd(o, out);
        if (gates->parsed())
            return train_gates_cmd(o, out);
        if (eval->parsed())
            return eval_cmd(o, out);
        if (grad->parsed())
            return gradcheck_cmd(out);
        if (figures->parsed())
            return export_figures_cmd(o, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace gatenet
