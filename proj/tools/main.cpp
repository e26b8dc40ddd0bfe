#include "gridsched/cli.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"gridsched - decentralized grid scheduling simulator"};
    app.require_subcommand(1);

    std::vector<std::string> validate_paths;
    auto* validate = app.add_subcommand("validate", "Validate computer/application profile XML files");
    validate->add_option("files", validate_paths, "profile XML files")->required();

    gridsched::cli::SimulateOptions sim_options;
    uint64_t seed_value = 0;
    std::string policy_value, model_value, traces_value, csv_value;
    auto* simulate = app.add_subcommand("simulate", "Run a scenario and write its report");
    simulate->add_option("--scenario", sim_options.scenario_path, "scenario JSON file")->required();
    auto* seed_opt = simulate->add_option("--seed", seed_value, "override the scenario seed");
    auto* policy_opt =
        simulate->add_option("--policy", policy_value, "subscribed_load|spot_load override");
    auto* model_opt = simulate->add_option("--execution-model", model_value,
                                           "fair_share|edf override");
    simulate->add_option("--out", sim_options.out_path, "report JSON path (default report.json)");
    auto* traces_opt =
        simulate->add_option("--traces", traces_value, "write the JSON-lines trace stream here");
    auto* csv_opt = simulate->add_option("--csv", csv_value, "write the sample time series CSV here");
    simulate->add_flag("--quiet", sim_options.quiet, "suppress the summary line");

    std::vector<std::string> report_paths;
    std::string report_csv;
    auto* report = app.add_subcommand("report", "Print run reports side by side");
    report->add_option("reports", report_paths, "report JSON files")->required();
    auto* report_csv_opt = report->add_option("--csv", report_csv, "also write the table as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return gridsched::cli::kExitConfig;
    }

    if (validate->parsed()) {
        return gridsched::cli::cmd_validate(validate_paths, std::cout, std::cerr);
    }
    if (simulate->parsed()) {
        if (seed_opt->count() > 0) sim_options.seed = seed_value;
        if (policy_opt->count() > 0) sim_options.policy = policy_value;
        if (model_opt->count() > 0) sim_options.execution_model = model_value;
        if (traces_opt->count() > 0) sim_options.traces_path = traces_value;
        if (csv_opt->count() > 0) sim_options.csv_path = csv_value;
        return gridsched::cli::cmd_simulate(sim_options, std::cout, std::cerr);
    }
    std::optional<std::string> csv_out;
    if (report_csv_opt->count() > 0) csv_out = report_csv;
    return gridsched::cli::cmd_report(report_paths, csv_out, std::cout, std::cerr);
}
