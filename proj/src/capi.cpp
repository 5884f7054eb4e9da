#include "intertext/intertext.h"

#include <cstring>
#include <string>

#include "core/config.hpp"
#include "core/errors.hpp"
#include "core/pipeline.hpp"

using intertext::Error;
using intertext::Pipeline;

struct itx_run {
    Pipeline pipeline;

    explicit itx_run(intertext::RunConfig config) : pipeline(std::move(config)) {}
};

namespace {

thread_local std::string g_last_error;

itx_status status_from(const Error& e) {
    g_last_error = e.what();
    int code = static_cast<int>(e.code());
    if (code < 1 || code > 13)
        return ITX_ERR_INTERNAL;
    return static_cast<itx_status>(code);
}

template <typename Fn>
itx_status guarded(Fn fn) {
    try {
        fn();
        g_last_error.clear();
        return ITX_OK;
    } catch (const Error& e) {
        return status_from(e);
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return ITX_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return ITX_ERR_INTERNAL;
    }
}

itx_status bad_argument(const char* message) {
    g_last_error = message;
    return ITX_ERR_BAD_ARGUMENT;
}

char* copy_text(const std::string& text) {
    char* out = new char[text.size() + 1];
    std::memcpy(out, text.c_str(), text.size() + 1);
    return out;
}

} // namespace

extern "C" {

const char* itx_version(void) {
    return "1.0.0";
}

const char* itx_stage_names(void) {
    static const std::string names = [] {
        std::string joined;
        for (intertext::StageId stage : intertext::stage_order()) {
            if (!joined.empty())
                joined += ",";
            joined += intertext::stage_id_name(stage);
        }
        return joined;
    }();
    return names.c_str();
}

const char* itx_last_error(void) {
    return g_last_error.c_str();
}

itx_status itx_run_open(const char* config_path, itx_run** out_run) {
    if (!config_path || !out_run)
        return bad_argument("itx_run_open requires a config path and an output handle");
    *out_run = nullptr;
    return guarded([&] {
        intertext::RunConfig config = intertext::load_config(config_path);
        *out_run = new itx_run(std::move(config));
    });
}

void itx_run_close(itx_run* run) {
    delete run;
}

itx_status itx_run_set_replay(itx_run* run, const char* transcript_path) {
    if (!run || !transcript_path)
        return bad_argument("itx_run_set_replay requires a run and a transcript path");
    return guarded([&] { run->pipeline.set_replay(transcript_path); });
}

itx_status itx_run_stage(itx_run* run, const char* stage, int force) {
    if (!run || !stage)
        return bad_argument("itx_run_stage requires a run and a stage name");
    return guarded([&] {
        run->pipeline.run_stage(intertext::parse_stage_id(stage), force != 0);
    });
}

itx_status itx_run_all(itx_run* run, int force) {
    if (!run)
        return bad_argument("itx_run_all requires a run");
    return guarded([&] { run->pipeline.run_all(force != 0); });
}

itx_status itx_run_report(itx_run* run, char** out_text) {
    if (!run || !out_text)
        return bad_argument("itx_run_report requires a run and an output pointer");
    *out_text = nullptr;
    return guarded([&] { *out_text = copy_text(run->pipeline.report_text()); });
}

itx_status itx_run_cost(itx_run* run, char** out_text) {
    if (!run || !out_text)
        return bad_argument("itx_run_cost requires a run and an output pointer");
    *out_text = nullptr;
    return guarded([&] { *out_text = copy_text(run->pipeline.cost_text()); });
}

void itx_text_free(char* text) {
    delete[] text;
}

} // extern "C"
