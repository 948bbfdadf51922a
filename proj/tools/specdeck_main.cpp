// Experiment runner for draft-and-verify decoding policies.
//
//   specdeck run <config.json> [--seed N] [--output-dir DIR] [--jobs N]
//   specdeck oracle [--jobs N]
//   specdeck train <corpus> <out> [--order K] [--alpha A] [--tokenizer byte|word]
//   specdeck replay <transcript.jsonl> [--draft-cost C] [--target-cost C] [--overhead C]

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "specd/experiment.hpp"
#include "specd/oracle.hpp"

namespace {

using namespace specd;

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed_override,
            std::optional<std::string> output_dir, unsigned jobs) {
    ExperimentConfig cfg;
    try {
        cfg = ExperimentConfig::parse_file(config_path);
        if (seed_override) cfg.seeds = {*seed_override};
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
    if (output_dir) {
        std::filesystem::create_directories(*output_dir);
        cfg.output_csv = *output_dir + "/" +
                         std::filesystem::path(cfg.output_csv).filename().string();
        if (cfg.transcript_dir) {
            cfg.transcript_dir = *output_dir + "/" +
                                 std::filesystem::path(*cfg.transcript_dir).filename().string();
        }
    }

    BuiltModels models;
    try {
        models = build_models(cfg);
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        std::vector<ResultRow> rows = run_experiment(cfg, models, jobs);
        std::ofstream out(cfg.output_csv);
        if (!out) {
            std::cerr << "RuntimeError: cannot write " << cfg.output_csv << "\n";
            return 3;
        }
        write_csv(out, rows);
        std::cout << "wrote " << rows.size() << " rows to " << cfg.output_csv << "\n";
        return 0;
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return 3;
    }
}

int cmd_oracle(bool corrupt_sd) {
    testing::corrupt_sd_residual = corrupt_sd;
    OracleReport report = run_oracle_suite();
    testing::corrupt_sd_residual = false;
    write_oracle_report(std::cout, report);
    if (!report.ok) {
        std::cerr << "oracle violation: " << report.first_failure << "\n";
        return 4;
    }
    return 0;
}

int cmd_train(const std::string& corpus_path, const std::string& out_path, int order,
              double alpha, const std::string& tokenizer) {
    try {
        std::ifstream in(corpus_path, std::ios::binary);
        if (!in) {
            std::cerr << "ModelBuildError: cannot open corpus " << corpus_path << "\n";
            return 2;
        }
        std::stringstream buf;
        buf << in.rdbuf();
        TokenizerMode mode = tokenizer == "word" ? TokenizerMode::Word : TokenizerMode::Byte;
        TokenizedCorpus corpus = tokenize_corpus(buf.str(), mode);
        NGramModel model = train_ngram(corpus.tokens, order, alpha, corpus.spec.vocabulary);
        std::ofstream out(out_path, std::ios::binary);
        if (!out) {
            std::cerr << "RuntimeError: cannot write " << out_path << "\n";
            return 3;
        }
        model.save(out);
        std::cout << "trained order-" << order << " model over vocab "
                  << corpus.spec.vocabulary.size << " -> " << out_path << "\n";
        return 0;
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
}

int cmd_replay(const std::string& path, const CostModel& cost) {
    try {
        std::ifstream in(path);
        if (!in) {
            std::cerr << "RuntimeError: cannot open transcript " << path << "\n";
            return 3;
        }
        Transcript t = read_transcript(in);
        RunMetrics m = compute_metrics(t, cost);
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%lld,%lld,%lld,%.17g,%.17g,%.17g,%.17g",
                      static_cast<long long>(m.total_tokens),
                      static_cast<long long>(m.target_calls),
                      static_cast<long long>(m.draft_calls), m.aal, m.llm_calls_ratio,
                      m.modeled_speedup, m.ppl);
        std::cout << "total_tokens,target_calls,draft_calls,aal,llm_calls_ratio,"
                     "modeled_speedup,ppl\n"
                  << buf << "\n";
        return 0;
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return 3;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"draft-and-verify decoding policy workbench"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed_override;
    std::optional<std::string> output_dir;
    unsigned jobs = 1;
    auto* run = app.add_subcommand("run", "run an experiment grid from a JSON config");
    run->add_option("config", config_path, "experiment config (JSON)")->required();
    run->add_option("--seed", seed_override, "override the config's seed list");
    run->add_option("--output-dir", output_dir, "redirect output files");
    run->add_option("--jobs", jobs, "worker threads for grid cells");

    bool corrupt_sd = false;
    auto* oracle = app.add_subcommand("oracle", "run the brute-force property sweep");
    oracle->add_option("--jobs", jobs, "worker threads");
    oracle->add_flag("--corrupt-sd-residual", corrupt_sd)->group("");  // test hook

    std::string corpus_path, model_out, tokenizer = "byte";
    int order = 2;
    double alpha = 1.0;
    auto* train = app.add_subcommand("train", "train and save an n-gram model");
    train->add_option("corpus", corpus_path, "UTF-8 text corpus")->required();
    train->add_option("out", model_out, "model output path")->required();
    train->add_option("--order", order, "n-gram order");
    train->add_option("--alpha", alpha, "add-alpha smoothing");
    train->add_option("--tokenizer", tokenizer, "byte|word");

    std::string transcript_path;
    CostModel cost;
    auto* replay = app.add_subcommand("replay", "recompute metrics from a transcript");
    replay->add_option("transcript", transcript_path, "line-delimited transcript")->required();
    replay->add_option("--draft-cost", cost.draft_cost, "per draft forward pass");
    replay->add_option("--target-cost", cost.target_cost, "per target verification pass");
    replay->add_option("--overhead", cost.overhead, "per step");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return cmd_run(config_path, seed_override, output_dir, jobs);
    if (oracle->parsed()) return cmd_oracle(corrupt_sd);
    if (train->parsed()) return cmd_train(corpus_path, model_out, order, alpha, tokenizer);
    if (replay->parsed()) return cmd_replay(transcript_path, cost);
    return 0;
}
