// Command-line front end: gen-data, run, report.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "adaptesn/harness.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> data_dir;
    std::optional<std::string> out;
    std::vector<int> pairs;
    std::optional<std::string> config_file;
    std::optional<std::string> models_dir;
};

void add_common(CLI::App* cmd, CommonFlags& f)
{
    cmd->add_option("--seed", f.seed, "Master seed (default 42)");
    cmd->add_option("--data-dir", f.data_dir, "Pair data directory (env ADAPTESN_DATA_DIR)");
    cmd->add_option("--pair", f.pairs, "Restrict to these pair ids (repeatable)")->check(CLI::Range(1, 9));
    cmd->add_option("--config", f.config_file, "JSON config file; flags override its values")
        ->check(CLI::ExistingFile);
}

// Config file first, then environment, then flags.
adaptesn::RunConfig resolve(const CommonFlags& f)
{
    adaptesn::RunConfig cfg;
    if (f.config_file) {
        adaptesn::load_run_config(*f.config_file, cfg);
    }
    if (!cfg.data_dir) {
        if (const char* env = std::getenv(adaptesn::kDataDirEnv); env != nullptr && *env != '\0') {
            cfg.data_dir = env;
        }
    }
    if (f.seed) cfg.master_seed = *f.seed;
    if (f.data_dir) cfg.data_dir = *f.data_dir;
    if (f.out) cfg.output_path = *f.out;
    if (!f.pairs.empty()) cfg.pairs = f.pairs;
    if (f.models_dir) cfg.models_dir = *f.models_dir;
    return cfg;
}

std::string fixed(double v, int precision)
{
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << v;
    return os.str();
}

void print_report(const nlohmann::json& report, const std::optional<nlohmann::json>& timings, std::ostream& os)
{
    os << "seed " << report.at("config").at("master_seed") << ", data "
       << report.at("config").at("data_source").get<std::string>() << "\n\n";
    os << std::left << std::setw(6) << "eval" << std::setw(6) << "pair" << std::setw(16) << "metric"
       << std::setw(21) << "strategy" << std::right << std::setw(14) << "raw" << std::setw(14) << "reference"
       << std::setw(10) << "score" << '\n';
    for (const auto& ev : report.at("evaluations")) {
        os << std::left << std::setw(6) << ev.at("eval").get<std::string>() << std::setw(6) << ev.at("pair").get<int>()
           << std::setw(16) << ev.at("metric").get<std::string>() << std::setw(21)
           << ev.at("strategy").get<std::string>() << std::right << std::setw(14)
           << fixed(ev.at("raw_error").get<double>(), 6) << std::setw(14)
           << fixed(ev.at("reference_error").get<double>(), 6) << std::setw(10)
           << fixed(ev.at("normalized_score").get<double>(), 2) << '\n';
    }
    for (const auto& p : report.at("pairs")) {
        if (p.at("status") != "ok") {
            os << "pair " << p.at("pair") << " FAILED: " << p.at("error").get<std::string>() << '\n';
        }
    }
    const auto& s = report.at("summary");
    os << "\nmean normalized score " << fixed(s.at("mean_normalized_score").get<double>(), 2) << " over "
       << s.at("evaluations") << " evaluations\n";
    if (timings) {
        os << "wall clock " << fixed(timings->at("total_seconds").get<double>(), 2) << " s (budget "
           << timings->at("time_budget") << " s):";
        for (const auto& p : timings->at("pairs")) {
            os << " p" << p.at("pair") << "=" << fixed(p.at("seconds").get<double>(), 1);
        }
        os << '\n';
    }
}

nlohmann::json read_json(const fs::path& path)
{
    std::ifstream is(path);
    if (!is) {
        throw adaptesn::DataError("missing report file '" + path.string() + "'");
    }
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw adaptesn::DataError(path.string() + ": " + e.what());
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Adaptive echo state network benchmark for the Lorenz system"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    CommonFlags gen_flags;
    auto* gen = app.add_subcommand("gen-data", "Synthesize pair datasets into the data directory");
    add_common(gen, gen_flags);

    CommonFlags run_flags;
    auto* run = app.add_subcommand("run", "Run the benchmark and write a report");
    add_common(run, run_flags);
    run->add_option("--out", run_flags.out, "Report path (default report.json)");
    run->add_option("--models-dir", run_flags.models_dir, "Also save each pair's fitted model here");

    std::string report_path = "report.json";
    auto* report = app.add_subcommand("report", "Pretty-print a stored report");
    report->add_option("file", report_path, "Report to print");
    report->add_option("--out", report_path, "Report to print (same as the positional argument)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            adaptesn::RunConfig cfg = resolve(gen_flags);
            const fs::path root = cfg.data_dir.value_or("data");
            adaptesn::generate_data(cfg, root);
            std::cout << "wrote " << cfg.pairs.size() << " pair(s) under " << root.string() << '\n';
            return 0;
        }
        if (run->parsed()) {
            const adaptesn::RunConfig cfg = resolve(run_flags);
            const auto result = adaptesn::run_all(cfg);
            adaptesn::write_reports(result, cfg.output_path);
            print_report(adaptesn::report_to_json(result), adaptesn::timings_to_json(result), std::cout);
            std::cout << "report written to " << cfg.output_path.string() << '\n';
            int failures = 0;
            for (const auto& p : result.pairs) {
                if (p.error) {
                    std::cerr << "error: pair " << p.pair_id << ": " << *p.error << '\n';
                    ++failures;
                }
            }
            return failures == 0 ? 0 : 2;
        }
        if (report->parsed()) {
            const auto doc = read_json(report_path);
            std::optional<nlohmann::json> timings;
            if (const auto tp = adaptesn::timings_path(report_path); fs::exists(tp)) {
                timings = read_json(tp);
            }
            print_report(doc, timings, std::cout);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
