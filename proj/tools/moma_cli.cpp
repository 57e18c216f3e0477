#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "moma/harness.hpp"
#include "moma/memory.hpp"

namespace {

std::unique_ptr<moma::Backend> make_backend(const std::string& name, const std::string& url,
                                            const std::string& model) {
    if (name == "oracle") {
        return std::make_unique<moma::OracleBackend>();
    }
    if (name == "http") {
        if (url.empty() || model.empty()) {
            throw std::invalid_argument("the http backend needs --url and --model");
        }
        moma::HttpBackendConfig cfg;
        cfg.base_url = url;
        cfg.model = model;
        return std::make_unique<moma::HttpBackend>(cfg);
    }
    throw std::invalid_argument("unknown backend: " + name + " (expected oracle or http)");
}

// Deterministic stand-in for a model-written analysis of one mistake.
std::string canned_analysis(const moma::FailureLesson& lesson) {
    return "When running " + lesson.skill + " for '" + lesson.instruction + "', the choice '" +
           lesson.predicted_value + "' was wrong; '" + lesson.ground_truth +
           "' was correct. Double-check the candidate details before answering.";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic building-wide mobile-manipulation benchmark"};
    app.require_subcommand(1);

    // run -------------------------------------------------------------------
    auto* run = app.add_subcommand("run", "Run benchmark trials for a task");
    std::string task_id = "all";
    std::string mode_str = "full";
    std::string backend_name = "oracle";
    std::string building = "building_a";
    std::string url, model, out_dir, ltm_path;
    int trials = 10;
    uint64_t seed = 1;
    run->add_option("--task", task_id, "retrieve_marker, retrieve_soda, rearrange_chairs, or all");
    run->add_option("--mode", mode_str, "full, come, im, nocot, or nosom");
    run->add_option("--backend", backend_name, "oracle or http");
    run->add_option("--building", building, "building_a, building_b, or building_c");
    run->add_option("--trials", trials, "seeds per phrasing");
    run->add_option("--seed", seed, "base seed");
    run->add_option("--out", out_dir, "output directory for logs and reports");
    run->add_option("--url", url, "http backend base URL");
    run->add_option("--model", model, "http backend model name");
    run->add_option("--ltm", ltm_path, "long-term memory store to load");

    // eval-offline ----------------------------------------------------------
    auto* eval = app.add_subcommand("eval-offline", "Score skill-parameter prediction offline");
    std::string dataset_path;
    std::string eval_mode = "full";
    eval->add_option("--dataset", dataset_path, "dataset JSON path")->required();
    eval->add_option("--mode", eval_mode, "full, come, im, nocot, or nosom");

    // memory ----------------------------------------------------------------
    auto* memory = app.add_subcommand("memory", "Memory maintenance");
    auto* curate = memory->add_subcommand("curate", "Distill failure lessons from a log");
    std::string log_path, truth_path, ltm_out = "ltm.json";
    curate->add_option("--log", log_path, "prediction log (JSONL)")->required();
    curate->add_option("--truth", truth_path, "ground-truth annotations (JSON)")->required();
    curate->add_option("--out", ltm_out, "output store path");

    // report ----------------------------------------------------------------
    auto* report = app.add_subcommand("report", "Summarize completed runs");
    std::string runs_dir;
    report->add_option("--runs", runs_dir, "directory of trial logs")->required();

    // gen-dataset -----------------------------------------------------------
    auto* gen = app.add_subcommand("gen-dataset", "Generate an offline skill dataset");
    std::string gen_out = "offline_dataset.json";
    int per_group = 30;
    uint64_t gen_seed = 7;
    gen->add_option("--out", gen_out, "output path");
    gen->add_option("--per-group", per_group, "instances per group");
    gen->add_option("--seed", gen_seed, "generator seed");

    // gen-config ------------------------------------------------------------
    auto* genc = app.add_subcommand("gen-config", "Dump a builtin building config");
    std::string genc_building = "building_a";
    std::string genc_out;
    genc->add_option("--building", genc_building, "building name");
    genc->add_option("--out", genc_out, "output path (stdout when omitted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            moma::BenchmarkConfig config;
            config.building = building;
            config.mode = moma::mode_from_name(mode_str);
            config.trials = trials;
            config.seed = seed;
            config.out_dir = out_dir;
            auto backend = make_backend(backend_name, url, model);
            config.backend = backend.get();
            moma::LongTermStore ltm;
            if (!ltm_path.empty()) {
                ltm = moma::LongTermStore::load(ltm_path);
                config.ltm = &ltm;
            }
            std::vector<moma::TaskSpec> tasks;
            if (task_id == "all") {
                tasks = moma::builtin_tasks();
            } else {
                tasks.push_back(moma::builtin_task(task_id));
            }
            moma::BenchmarkReport rep = moma::run_benchmark(tasks, config);
            std::cout << rep.text();
        } else if (*eval) {
            auto instances = moma::load_offline_dataset(dataset_path);
            moma::OracleBackend backend;
            moma::OfflineReport rep =
                moma::run_offline_eval(instances, moma::mode_from_name(eval_mode), backend);
            std::cout << rep.text();
        } else if (*curate) {
            auto log = moma::load_prediction_log(log_path);
            auto truth = moma::load_ground_truth(truth_path);
            moma::LongTermStore store = moma::curate_lessons(log, truth, canned_analysis);
            store.save(ltm_out);
            int n = 0;
            for (const auto& [skill, lessons] : store.lessons) n += lessons.size();
            std::cout << "curated " << n << " lessons into " << ltm_out << "\n";
        } else if (*report) {
            moma::BenchmarkReport rep = moma::collect_report(runs_dir);
            std::cout << rep.text() << "\n" << rep.csv();
        } else if (*gen) {
            auto instances = moma::generate_offline_dataset(per_group, gen_seed);
            moma::save_offline_dataset(gen_out, instances);
            std::cout << "wrote " << instances.size() << " instances to " << gen_out << "\n";
        } else if (*genc) {
            nlohmann::json cfg = moma::builtin_building_config(genc_building);
            if (genc_out.empty()) {
                std::cout << cfg.dump(2) << "\n";
            } else {
                std::ofstream out(genc_out);
                if (!out) throw std::runtime_error("cannot write " + genc_out);
                out << cfg.dump(2) << "\n";
                std::cout << "wrote " << genc_out << "\n";
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
