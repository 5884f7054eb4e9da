#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "intertext/intertext.h"

namespace {

int exit_code(itx_status status) {
    if (status == ITX_OK)
        return 0;
    if (status == ITX_ERR_CONFIG)
        return 2;
    return 1;
}

int fail(itx_status status) {
    std::fprintf(stderr, "error: %s\n", itx_last_error());
    return exit_code(status);
}

const std::vector<std::pair<std::string, std::string>>& stage_help() {
    static const std::vector<std::pair<std::string, std::string>> help = {
        {"ingest", "Load the corpus manifest and chunk its documents"},
        {"idf", "Score vocabulary rarity against the reference corpus"},
        {"embed", "Embed context snippets for every rare occurrence"},
        {"match", "Cross-corpus similarity matching and density mapping"},
        {"screen", "First-pass review of candidate chunk pairs"},
        {"deep", "Detailed analysis of screened pairs"},
        {"register", "Register-shift scan with verse confirmation"},
        {"longcontext", "Whole-novel reader passes and critique"},
        {"verify", "Quote verification, dedup, and attestation"},
        {"catalogue", "Build and export the per-novel workbook"},
        {"report", "Render and print the summary tables"},
        {"calibrate", "Sensitivity posteriors and adjusted counts"},
        {"probe", "Score the memorization probe items"},
    };
    return help;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Corpus-to-catalogue allusion detection"};
    app.set_version_flag("--version", itx_version());
    app.require_subcommand(1);

    std::string config_path;
    std::string replay_path;
    bool force = false;
    app.add_option("--config", config_path, "Run configuration file")->required();
    app.add_flag("--force", force, "Rerun stages even when their inputs are unchanged");
    app.add_option("--replay", replay_path, "Replay reviewer calls from this transcript file");

    for (const auto& [name, description] : stage_help())
        app.add_subcommand(name, description)->fallthrough();
    app.add_subcommand("run-all", "Run every stage in order")->fallthrough();
    app.add_subcommand("cost", "Print projected spend for the configured corpus")->fallthrough();

    CLI11_PARSE(app, argc, argv);

    itx_run* run = nullptr;
    itx_status status = itx_run_open(config_path.c_str(), &run);
    if (status != ITX_OK)
        return fail(status);
    if (!replay_path.empty()) {
        status = itx_run_set_replay(run, replay_path.c_str());
        if (status != ITX_OK) {
            itx_run_close(run);
            return fail(status);
        }
    }

    const std::string command = app.get_subcommands().front()->get_name();
    if (command == "run-all") {
        status = itx_run_all(run, force ? 1 : 0);
    } else if (command == "cost") {
        char* text = nullptr;
        status = itx_run_cost(run, &text);
        if (status == ITX_OK) {
            std::fputs(text, stdout);
            itx_text_free(text);
        }
    } else {
        status = itx_run_stage(run, command.c_str(), force ? 1 : 0);
        if (status == ITX_OK && command == "report") {
            char* text = nullptr;
            status = itx_run_report(run, &text);
            if (status == ITX_OK) {
                std::fputs(text, stdout);
                itx_text_free(text);
            }
        }
    }

    itx_run_close(run);
    if (status != ITX_OK)
        return fail(status);
    return 0;
}
