#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <memory>
#include <string>

#include "intertext/intertext.h"

#include "core/config.hpp"
#include "core/pipeline.hpp"
#include "core/review.hpp"
#include "core/text.hpp"

using namespace intertext;

namespace {

namespace fs = std::filesystem;

const std::string kFixtureDir = std::string(INTERTEXT_TEST_DATA_DIR) + "/pipeline";
const std::string kPlanted =
    "And the quicksilver wheel turned upon the marillion waters in the evening.";

fs::path make_temp_dir(const std::string& stem) {
    static int counter = 0;
    fs::path dir = fs::temp_directory_path() /
                   (stem + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Finds the planted quotation and nothing else; the register and
// long-context tracks come back empty.
std::string quotation_review(ReviewStage stage, const std::string& payload) {
    switch (stage) {
    case ReviewStage::Screen:
        if (payload.find(kPlanted) != std::string::npos)
            return "{\"level\": \"Strong\", \"target_quote\": \"" + kPlanted +
                   "\", \"source_quote\": \"" + kPlanted + "\"}";
        return "{\"level\": \"None\"}";
    case ReviewStage::DeepAnalysis:
        return "{\"findings\": [{\"connection_type\": \"direct quotation\", "
               "\"target_quote\": \"" +
               kPlanted + "\", \"source_quote\": \"" + kPlanted +
               "\", \"notes\": \"verbatim quotation of the wheel verse\"}]}";
    case ReviewStage::RegisterScan:
        return "{\"flags\": []}";
    case ReviewStage::VerseConfirm:
        return "{\"decision\": \"reject\"}";
    case ReviewStage::LongContext:
        if (payload.find("[critique;") != std::string::npos)
            return "{\"edits\": [{\"action\": \"keep\", \"finding_id\": 1}]}";
        return "{\"findings\": []}";
    case ReviewStage::Probe:
        return "{}";
    }
    return "{}";
}

RunConfig recording_config(const fs::path& run_dir) {
    RunConfig config = default_config();
    config.manifest = kFixtureDir + "/manifest.psv";
    config.chunk_words = 60;
    config.run_dir = run_dir.string();
    config.gate.source_min_idf = 1.5;
    config.verse_table = kFixtureDir + "/verses.psv";
    config.reference_table = kFixtureDir + "/attested.psv";
    return config;
}

std::string write_run_config(const fs::path& dir, const fs::path& run_dir,
                             const std::string& transcripts) {
    std::string text = "corpus.manifest = " + kFixtureDir + "/manifest.psv\n" +
                       "corpus.chunk_words = 60\n" + "run.dir = " + run_dir.string() + "\n" +
                       "idf.source_min = 1.5\n" + "verse.table = " + kFixtureDir +
                       "/verses.psv\n" + "verify.reference_table = " + kFixtureDir +
                       "/attested.psv\n";
    if (!transcripts.empty())
        text += "review.transcripts = " + transcripts + "\n";
    std::string path = (dir / "capi.config").string();
    write_file(path, text);
    return path;
}

// Runs the scripted pipeline once and saves its reviewer transcripts.
std::string record_transcripts(const fs::path& base) {
    FunctionReviewer scripted("scripted", quotation_review);
    TranscriptStore store;
    Pipeline recorder(recording_config(base / "record"));
    recorder.set_reviewer(std::make_shared<RecordingReviewer>(scripted, store));
    recorder.run_all();
    std::string path = (base / "transcripts.jsonl").string();
    store.save(path);
    return path;
}

} // namespace

TEST_CASE("the C interface reports its version and stage names") {
    CHECK(std::string(itx_version()) == "1.0.0");
    CHECK(std::string(itx_stage_names()) ==
          "ingest,idf,embed,match,screen,deep,register,longcontext,verify,catalogue,"
          "report,calibrate,probe");
}

TEST_CASE("null arguments are rejected without touching anything") {
    itx_run* run = nullptr;
    CHECK(itx_run_open(nullptr, &run) == ITX_ERR_BAD_ARGUMENT);
    CHECK(itx_run_open("x.config", nullptr) == ITX_ERR_BAD_ARGUMENT);
    CHECK(itx_run_set_replay(nullptr, "t.jsonl") == ITX_ERR_BAD_ARGUMENT);
    CHECK(itx_run_stage(nullptr, "ingest", 0) == ITX_ERR_BAD_ARGUMENT);
    CHECK(itx_run_all(nullptr, 0) == ITX_ERR_BAD_ARGUMENT);
    char* text = nullptr;
    CHECK(itx_run_report(nullptr, &text) == ITX_ERR_BAD_ARGUMENT);
    CHECK(itx_run_cost(nullptr, &text) == ITX_ERR_BAD_ARGUMENT);
    CHECK(std::string(itx_last_error()) != "");
    itx_run_close(nullptr);
    itx_text_free(nullptr);
}

TEST_CASE("configuration problems surface as config errors with messages") {
    itx_run* run = nullptr;
    CHECK(itx_run_open("/nonexistent/intertext.config", &run) == ITX_ERR_CONFIG);
    CHECK(run == nullptr);
    CHECK(std::string(itx_last_error()).find("cannot open") != std::string::npos);

    fs::path dir = make_temp_dir("itx-capi-badconf");
    std::string bad = (dir / "bad.config").string();
    write_file(bad, "mystery.key = 1\n");
    CHECK(itx_run_open(bad.c_str(), &run) == ITX_ERR_CONFIG);
    CHECK(run == nullptr);
    CHECK(std::string(itx_last_error()).find("unknown setting") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("stage errors name the gap and success clears the message") {
    fs::path dir = make_temp_dir("itx-capi-stage");
    std::string config = write_run_config(dir, dir / "run", "");

    itx_run* run = nullptr;
    REQUIRE(itx_run_open(config.c_str(), &run) == ITX_OK);
    REQUIRE(run != nullptr);

    CHECK(itx_run_stage(run, "transmogrify", 0) == ITX_ERR_STAGE);
    CHECK(std::string(itx_last_error()) == "unknown stage: transmogrify");
    CHECK(itx_run_stage(run, "match", 0) == ITX_ERR_STAGE);
    CHECK(std::string(itx_last_error()) == "run embed before match");

    char* text = nullptr;
    CHECK(itx_run_report(run, &text) == ITX_ERR_STAGE);
    CHECK(text == nullptr);

    CHECK(itx_run_cost(run, &text) == ITX_OK);
    REQUIRE(text != nullptr);
    CHECK(std::string(text).find("total") != std::string::npos);
    CHECK(std::string(itx_last_error()) == "");
    itx_text_free(text);

    itx_run_close(run);
    fs::remove_all(dir);
}

TEST_CASE("a replayed run drives every stage through the C interface") {
    fs::path dir = make_temp_dir("itx-capi-run");
    std::string transcripts = record_transcripts(dir);

    // Without a transcript file the configured replay provider cannot start.
    std::string dry_config = write_run_config(dir, dir / "dry", "");
    itx_run* dry = nullptr;
    REQUIRE(itx_run_open(dry_config.c_str(), &dry) == ITX_OK);
    CHECK(itx_run_all(dry, 0) == ITX_ERR_STAGE);
    CHECK(std::string(itx_last_error()).find("no transcript file") != std::string::npos);
    // Pointing the run at the recorded transcripts completes the walk.
    REQUIRE(itx_run_set_replay(dry, transcripts.c_str()) == ITX_OK);
    CHECK(itx_run_all(dry, 0) == ITX_OK);
    itx_run_close(dry);

    // A config naming the transcript file needs no override at all.
    std::string config = write_run_config(dir, dir / "run", transcripts);
    itx_run* run = nullptr;
    REQUIRE(itx_run_open(config.c_str(), &run) == ITX_OK);
    REQUIRE(itx_run_all(run, 0) == ITX_OK);

    char* text = nullptr;
    REQUIRE(itx_run_report(run, &text) == ITX_OK);
    REQUIRE(text != nullptr);
    std::string report(text);
    itx_text_free(text);
    CHECK(report.find("== Connections by novel (references included) ==") != std::string::npos);
    CHECK(report.find("Border Crossing | 2 | 2 | 0 | 1 | 1") != std::string::npos);

    // Replayed artifacts match the recording run byte for byte.
    CHECK(read_file((dir / "record" / "findings_final.psv").string()) ==
          read_file((dir / "run" / "findings_final.psv").string()));
    CHECK(read_file((dir / "record" / "report.txt").string()) ==
          read_file((dir / "run" / "report.txt").string()));

    // A second walk over the same run directory reuses every marker.
    CHECK(itx_run_all(run, 0) == ITX_OK);
    itx_run_close(run);
    fs::remove_all(dir);
}
