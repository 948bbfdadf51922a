#include "specd/experiment.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "specd/oracle.hpp"

namespace specd {

namespace {

using nlohmann::json;

[[noreturn]] void config_fail(const std::string& msg) { fail("ConfigError", msg); }

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

DecodeMode parse_mode(const std::string& s) {
    if (s == "greedy") return DecodeMode::Greedy;
    if (s == "sample") return DecodeMode::Sample;
    config_fail("decode_mode must be 'greedy' or 'sample', got '" + s + "'");
}

std::vector<PolicyCell> expand_policies(const json& list) {
    std::vector<PolicyCell> cells;
    for (const auto& entry : list) {
        std::string type = entry.at("type").get<std::string>();
        if (type == "sd") {
            cells.push_back({SdPolicy{}, "sd", std::nullopt, std::nullopt});
        } else if (type == "md") {
            MdPolicy p;
            if (entry.contains("distance_target")) p.distance_target = entry["distance_target"];
            if (entry.contains("tolerance")) p.md_tolerance = entry["tolerance"];
            if (entry.contains("temperature")) p.temperature = entry["temperature"];
            if (!(p.md_tolerance < p.distance_target)) {
                config_fail("md tolerance must be < distance_target");
            }
            cells.push_back({p, "md", std::nullopt, std::nullopt});
        } else if (type == "cd") {
            std::vector<double> epsilons = {2.0};
            std::vector<double> betas = {0.2};
            if (entry.contains("epsilon")) {
                epsilons = entry["epsilon"].is_array()
                               ? entry["epsilon"].get<std::vector<double>>()
                               : std::vector<double>{entry["epsilon"].get<double>()};
            }
            if (entry.contains("beta")) {
                betas = entry["beta"].is_array() ? entry["beta"].get<std::vector<double>>()
                                                : std::vector<double>{entry["beta"].get<double>()};
            }
            if (epsilons.empty() || betas.empty()) config_fail("empty cd parameter grid");
            for (double eps : epsilons) {
                for (double beta : betas) {
                    cells.push_back({CdPolicy{eps, beta}, "cd", eps, beta});
                }
            }
        } else {
            config_fail("unknown policy type '" + type + "'");
        }
    }
    return cells;
}

}  // namespace

ExperimentConfig ExperimentConfig::parse_json_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        config_fail(std::string("invalid JSON: ") + e.what());
    }
    try {
        ExperimentConfig cfg;
        cfg.schema_version = doc.at("schema_version").get<int>();
        if (cfg.schema_version != 1) config_fail("unsupported schema_version");

        const json& src = doc.at("model_source");
        std::string type = src.at("type").get<std::string>();
        if (type == "corpus") {
            CorpusSource c;
            c.corpus_path = src.at("corpus_path").get<std::string>();
            std::string tok = src.value("tokenizer", "byte");
            if (tok == "byte") {
                c.tokenizer = TokenizerMode::Byte;
            } else if (tok == "word") {
                c.tokenizer = TokenizerMode::Word;
            } else {
                config_fail("tokenizer must be 'byte' or 'word'");
            }
            c.draft_order = src.value("draft_order", 2);
            c.target_order = src.value("target_order", 4);
            c.smoothing_alpha = src.value("smoothing_alpha", 1.0);
            cfg.corpus = c;
        } else if (type == "synthetic") {
            SyntheticSource s;
            s.vocab_size = src.at("vocab_size").get<std::size_t>();
            s.n_contexts = src.value("n_contexts", std::size_t{16});
            s.divergence_knob = src.value("divergence_knob", 0.0);
            s.seed = src.value("seed", std::uint64_t{0});
            cfg.synthetic = s;
        } else {
            config_fail("model_source.type must be 'corpus' or 'synthetic'");
        }

        cfg.policies = expand_policies(doc.at("policies"));
        if (cfg.policies.empty()) config_fail("policies list must be non-empty");
        cfg.draft_lens = doc.at("draft_lens").get<std::vector<int>>();
        if (cfg.draft_lens.empty()) config_fail("draft_lens must be non-empty");
        for (int g : cfg.draft_lens) {
            if (g < 1) config_fail("draft lengths must be >= 1");
        }
        cfg.decode_mode = parse_mode(doc.value("decode_mode", "greedy"));
        cfg.temperature = doc.value("temperature", 1.0);
        cfg.max_tokens = doc.value("max_tokens", 64);
        if (cfg.max_tokens < 1) config_fail("max_tokens must be >= 1");
        cfg.n_prompts = doc.value("n_prompts", 1);
        if (cfg.n_prompts < 1) config_fail("n_prompts must be >= 1");
        cfg.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
        if (cfg.seeds.empty()) config_fail("seeds must be non-empty");
        if (doc.contains("cost_model")) {
            const json& cm = doc["cost_model"];
            cfg.cost_model.draft_cost = cm.value("draft_cost", cfg.cost_model.draft_cost);
            cfg.cost_model.target_cost = cm.value("target_cost", cfg.cost_model.target_cost);
            cfg.cost_model.overhead = cm.value("overhead", cfg.cost_model.overhead);
        }
        cfg.output_csv = doc.value("output_csv", "results.csv");
        if (doc.contains("transcript_dir")) {
            cfg.transcript_dir = doc["transcript_dir"].get<std::string>();
        }
        return cfg;
    } catch (const json::exception& e) {
        config_fail(std::string("bad config: ") + e.what());
    }
}

ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) config_fail("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_json_text(buf.str());
}

BuiltModels build_models(const ExperimentConfig& cfg) {
    try {
        BuiltModels out;
        if (cfg.corpus) {
            std::ifstream in(cfg.corpus->corpus_path, std::ios::binary);
            if (!in) fail("ModelBuildError", "cannot open corpus: " + cfg.corpus->corpus_path);
            std::stringstream buf;
            buf << in.rdbuf();
            TokenizedCorpus corpus = tokenize_corpus(buf.str(), cfg.corpus->tokenizer);
            auto draft = std::make_shared<NGramModel>(
                train_ngram(corpus.tokens, cfg.corpus->draft_order, cfg.corpus->smoothing_alpha,
                            corpus.spec.vocabulary));
            auto target = std::make_shared<NGramModel>(
                train_ngram(corpus.tokens, cfg.corpus->target_order, cfg.corpus->smoothing_alpha,
                            corpus.spec.vocabulary));
            out.draft = draft;
            out.target = target;
            out.eot = corpus.spec.eot();
            for (int i = 0; i < cfg.n_prompts; ++i) {
                std::size_t idx = (static_cast<std::size_t>(i) * corpus.tokens.size()) /
                                  static_cast<std::size_t>(cfg.n_prompts);
                out.prompt_pool.push_back(corpus.tokens[idx]);
            }
        } else if (cfg.synthetic) {
            SyntheticPair pair =
                SyntheticPair::make(cfg.synthetic->vocab_size, cfg.synthetic->n_contexts,
                                    cfg.synthetic->divergence_knob, cfg.synthetic->seed);
            out.draft = pair.draft_model();
            out.target = pair.target_model();
            out.eot = -1;
            for (int i = 0; i < cfg.n_prompts; ++i) {
                out.prompt_pool.push_back(
                    static_cast<TokenId>(static_cast<std::size_t>(i) % cfg.synthetic->vocab_size));
            }
        } else {
            fail("ModelBuildError", "no model source configured");
        }
        return out;
    } catch (const Error& e) {
        if (e.code() == "ModelBuildError") throw;
        fail("ModelBuildError", e.what());
    }
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg, const BuiltModels& models,
                                      unsigned jobs) {
    struct RowSpec {
        std::size_t cell = 0;
        std::size_t dl = 0;
        std::size_t seed = 0;
        int prompt = 0;
    };
    std::vector<RowSpec> specs;
    for (std::size_t c = 0; c < cfg.policies.size(); ++c) {
        for (std::size_t d = 0; d < cfg.draft_lens.size(); ++d) {
            for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
                for (int k = 0; k < cfg.n_prompts; ++k) specs.push_back({c, d, s, k});
            }
        }
    }

    std::vector<ResultRow> rows(specs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= specs.size()) return;
            const RowSpec& rs = specs[i];
            const PolicyCell& cell = cfg.policies[rs.cell];

            EngineConfig ec;
            ec.policy = cell.policy;
            ec.draft_len = cfg.draft_lens[rs.dl];
            ec.decode_mode = cfg.decode_mode;
            ec.temperature = cfg.temperature;
            ec.max_tokens = cfg.max_tokens;
            ec.eot = models.eot;
            // Session stream from (config seed, deterministic cell/prompt index).
            std::size_t session = (rs.cell * cfg.draft_lens.size() + rs.dl) *
                                      static_cast<std::size_t>(cfg.n_prompts) +
                                  static_cast<std::size_t>(rs.prompt);
            ec.seed = Rng::derive(cfg.seeds[rs.seed], session).next_u64();

            std::vector<TokenId> prompt = {
                models.prompt_pool[static_cast<std::size_t>(rs.prompt)]};
            Transcript t = generate(*models.draft, *models.target, prompt, ec);

            ResultRow row;
            row.policy = cell.name;
            row.draft_len = ec.draft_len;
            row.epsilon = cell.epsilon;
            row.beta = cell.beta;
            row.seed = cfg.seeds[rs.seed];
            row.prompt_index = rs.prompt;
            row.metrics = compute_metrics(t, cfg.cost_model);
            rows[i] = std::move(row);

            if (cfg.transcript_dir) {
                std::filesystem::create_directories(*cfg.transcript_dir);
                std::ofstream out(*cfg.transcript_dir + "/row_" + std::to_string(i) + ".jsonl");
                write_transcript(out, t);
            }
        }
    };

    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return rows;
}

void write_csv(std::ostream& out, std::span<const ResultRow> rows) {
    out << "policy,draft_len,epsilon,beta,seed,total_tokens,target_calls,draft_calls,"
           "aal,llm_calls_ratio,modeled_speedup,ppl\n";
    for (const auto& r : rows) {
        out << r.policy << ',' << r.draft_len << ','
            << (r.epsilon ? format_double(*r.epsilon) : "") << ','
            << (r.beta ? format_double(*r.beta) : "") << ',' << r.seed << ','
            << r.metrics.total_tokens << ',' << r.metrics.target_calls << ','
            << r.metrics.draft_calls << ',' << format_double(r.metrics.aal) << ','
            << format_double(r.metrics.llm_calls_ratio) << ','
            << format_double(r.metrics.modeled_speedup) << ',' << format_double(r.metrics.ppl)
            << "\n";
    }
}

OracleReport run_oracle_suite() {
    OracleReport report;
    auto flag = [&](const std::string& what) {
        if (report.ok) {
            report.ok = false;
            report.first_failure = what;
        }
    };

    auto dirichlet = [](std::size_t vocab, Rng& rng) {
        std::vector<double> raw(vocab);
        for (double& w : raw) w = -std::log1p(-rng.next_uniform()) + 1e-12;
        return normalize(raw);
    };

    // SD losslessness: exact_step_law(SD) == p over seeded pairs.
    {
        const std::size_t vocabs[] = {2, 3, 5, 8};
        for (std::size_t vi = 0; vi < 4; ++vi) {
            for (int k = 0; k < 25; ++k) {
                std::uint64_t seed = 1000 + vi * 100 + static_cast<std::uint64_t>(k);
                Rng rng(seed);
                Distribution p = dirichlet(vocabs[vi], rng);
                Distribution q = dirichlet(vocabs[vi], rng);
                Distribution law = exact_step_law(SdPolicy{}, p, q, DecodeMode::Sample);
                double err = 0.0;
                for (std::size_t i = 0; i < p.size(); ++i) {
                    err = std::max(err, std::abs(law.probs()[i] - p.probs()[i]));
                }
                report.sd_losslessness_instances += 1;
                if (err > 1e-10) {
                    flag("sd_losslessness seed=" + std::to_string(seed));
                }
            }
        }
    }

    // Multi-step SD law equals the target autoregressive law.
    {
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            SyntheticPair pair = SyntheticPair::make(3, 7, 1.0, seed);
            EngineConfig cfg;
            cfg.policy = SdPolicy{};
            cfg.decode_mode = DecodeMode::Sample;
            cfg.draft_len = 2;
            cfg.max_tokens = 2;
            auto draft = pair.draft_model();
            auto target = pair.target_model();
            std::vector<TokenId> prompt = {0};
            EnumerationResult sd_law = exact_sequence_law(*draft, *target, prompt, cfg);
            EnumerationResult ar_law = autoregressive_law(*target, prompt, cfg);
            report.sequence_instances += 1;
            if (std::abs(sd_law.total_mass - 1.0) > 1e-10) {
                flag("sequence_total_mass seed=" + std::to_string(seed));
            }
            for (const auto& [seq, prob] : ar_law.law) {
                auto it = sd_law.law.find(seq);
                double got = it == sd_law.law.end() ? 0.0 : it->second;
                if (std::abs(got - prob) > 1e-10) {
                    flag("sequence_losslessness seed=" + std::to_string(seed));
                }
            }
        }
    }

    // MD band targeting for pairs whose KL starts above the band.
    {
        MdPolicy md;
        md.distance_target = 0.3;
        md.md_tolerance = 0.05;
        md.temperature = 1.0;
        for (std::uint64_t seed = 50; report.md_band_instances < 10 && seed < 500; ++seed) {
            Rng rng(seed);
            Distribution p = dirichlet(4, rng);
            Distribution q = dirichlet(4, rng);
            if (kl_divergence(q, p) <= md.distance_target + md.md_tolerance) continue;
            double alpha = md_solve_alpha(p, q, md);
            Distribution law = exact_step_law(VerifyPolicy{md}, p, q, DecodeMode::Sample);
            double kl = kl_divergence(law, p);
            report.md_band_instances += 1;
            if (kl < md.distance_target - md.md_tolerance ||
                kl > md.distance_target + md.md_tolerance || alpha <= 0.0) {
                flag("md_band seed=" + std::to_string(seed));
            }
        }
    }

    // CD nucleus equivalence at beta = 0.
    {
        const double eps = 2.0;
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            Rng rng(7000 + seed);
            Distribution p = dirichlet(8, rng);
            report.cd_nucleus_instances += 1;
            for (TokenId x = 0; x < 8; ++x) {
                bool by_nll = cd_accept(nll(p, x), eps);
                bool by_nucleus = p[x] >= std::exp(-eps);
                if (by_nll != by_nucleus) {
                    flag("cd_nucleus seed=" + std::to_string(7000 + seed));
                }
            }
        }
    }

    return report;
}

void write_oracle_report(std::ostream& out, const OracleReport& report) {
    json doc = {{"ok", report.ok},
                {"sd_losslessness_instances", report.sd_losslessness_instances},
                {"sequence_instances", report.sequence_instances},
                {"md_band_instances", report.md_band_instances},
                {"cd_nucleus_instances", report.cd_nucleus_instances}};
    if (!report.ok) doc["first_failure"] = report.first_failure;
    out << doc.dump(2) << "\n";
}

}  // namespace specd
