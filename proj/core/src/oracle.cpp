#include "specd/oracle.hpp"

#include <cmath>
#include <functional>

namespace specd {

namespace {

Distribution point_mass(std::size_t size, TokenId at) {
    std::vector<double> probs(size, 0.0);
    probs[static_cast<std::size_t>(at)] = 1.0;
    return Distribution::from_probs(std::move(probs));
}

Distribution collapse(const Distribution& dist, DecodeMode mode) {
    return mode == DecodeMode::Greedy ? point_mass(dist.size(), dist.argmax()) : dist;
}

Distribution effective(const Distribution& raw, DecodeMode mode, double temperature) {
    if (mode == DecodeMode::Sample && temperature != 1.0) {
        return apply_temperature(raw, temperature);
    }
    return raw;
}

// Analytic description of one verified position: draw law of the drafted
// token, accept weight per token (the uniform integrated out), and the law of
// the replacement token on rejection. Mirrors the engine's semantics but is
// computed branch-wise, independent of its control flow.
struct PositionSemantics {
    Distribution draw;
    std::vector<double> accept;
    Distribution reject_draw;
};

PositionSemantics position_semantics(const VerifyPolicy& policy, const Distribution& p_raw,
                                     const Distribution& q_eff, const StepLawOptions& opts) {
    const std::size_t n = p_raw.size();
    // Sample-mode temperature applies to the effective distributions exactly
    // as in the engine; greedy-greedy runs see the raw ones.
    const bool tempered = opts.draft_mode == DecodeMode::Sample ||
                          opts.resample_mode == DecodeMode::Sample;
    Distribution p_eff =
        tempered ? effective(p_raw, DecodeMode::Sample, opts.temperature) : p_raw;

    PositionSemantics sem{collapse(q_eff, opts.draft_mode), std::vector<double>(n, 0.0), p_eff};

    if (const auto* cd = std::get_if<CdPolicy>(&policy)) {
        for (std::size_t i = 0; i < n; ++i) {
            sem.accept[i] = nll(p_raw, static_cast<TokenId>(i)) <= cd->epsilon ? 1.0 : 0.0;
        }
        sem.reject_draw = collapse(p_eff, opts.resample_mode);
        return sem;
    }

    if (const auto* md = std::get_if<MdPolicy>(&policy)) {
        Distribution p_v = apply_temperature(p_raw, md->temperature);
        Distribution q_v = apply_temperature(q_eff, md->temperature);
        double alpha = md_solve_alpha(p_v, q_v, *md);
        for (std::size_t i = 0; i < n; ++i) {
            if (alpha == 0.0) {
                sem.accept[i] = 1.0;
            } else if (q_v.probs()[i] > 0.0) {
                sem.accept[i] = std::min(1.0, p_v.probs()[i] / (alpha * q_v.probs()[i]));
            }
        }
        Distribution resid = [&] {
            try {
                return md_residual(p_v, q_v, md_beta_for_alpha(alpha));
            } catch (const Error& e) {
                if (e.code() == "DegenerateResidual") return p_eff;
                throw;
            }
        }();
        sem.reject_draw = collapse(resid, opts.resample_mode);
        return sem;
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (q_eff.probs()[i] > 0.0) {
            sem.accept[i] = std::min(1.0, p_eff.probs()[i] / q_eff.probs()[i]);
        }
    }
    Distribution resid = [&] {
        try {
            return sd_residual(p_eff, q_eff);
        } catch (const Error& e) {
            if (e.code() == "DegenerateResidual") return p_eff;
            throw;
        }
    }();
    sem.reject_draw = collapse(resid, opts.resample_mode);
    return sem;
}

}  // namespace

Distribution exact_step_law(const VerifyPolicy& policy, const Distribution& p,
                            const Distribution& q, const StepLawOptions& opts) {
    require(p.size() == q.size(), "VocabMismatch", "mismatched vocabularies");
    require(p.size() <= 16, "VocabTooLarge", "step enumeration capped at vocab 16");

    const bool tempered = opts.draft_mode == DecodeMode::Sample ||
                          opts.resample_mode == DecodeMode::Sample;
    Distribution q_eff = tempered ? effective(q, DecodeMode::Sample, opts.temperature) : q;
    PositionSemantics sem = position_semantics(policy, p, q_eff, opts);

    std::vector<double> law(p.size(), 0.0);
    for (std::size_t x = 0; x < p.size(); ++x) {
        double dx = sem.draw.probs()[x];
        if (dx <= 0.0) continue;
        double a = sem.accept[x];
        law[x] += dx * a;
        if (a < 1.0) {
            for (std::size_t y = 0; y < p.size(); ++y) {
                law[y] += dx * (1.0 - a) * sem.reject_draw.probs()[y];
            }
        }
    }
    return Distribution::from_probs(std::move(law));
}

Distribution exact_step_law(const VerifyPolicy& policy, const Distribution& p,
                            const Distribution& q, DecodeMode mode, double temperature) {
    return exact_step_law(policy, p, q, StepLawOptions{mode, mode, temperature});
}

EnumerationResult exact_sequence_law(const ProbModel& draft, const ProbModel& target,
                                     std::span<const TokenId> prompt, const EngineConfig& cfg) {
    require(draft.vocab_size() == target.vocab_size(), "VocabMismatch",
            "draft and target models must share a vocabulary");
    require(target.vocab_size() <= 5, "StateSpaceTooLarge", "sequence enumeration caps vocab at 5");
    require(cfg.draft_len >= 1 && cfg.draft_len <= 2, "StateSpaceTooLarge",
            "sequence enumeration caps draft_len at 2");
    require(cfg.max_tokens >= 1 && cfg.max_tokens <= 3, "StateSpaceTooLarge",
            "sequence enumeration caps max_tokens at 3");
    if (const auto* cd = std::get_if<CdPolicy>(&cfg.policy)) {
        require(cd->ema_beta == 0.0, "StateSpaceTooLarge",
                "smoothed CD has continuous state; use the Monte Carlo checker");
    }

    EnumerationResult result;
    const std::size_t vocab = target.vocab_size();

    // One step's outcomes for a fixed context: (emitted tokens, probability).
    struct StepOutcome {
        std::vector<TokenId> tokens;
        double prob;
    };
    auto enumerate_step = [&](const std::vector<TokenId>& ctx) {
        std::vector<StepOutcome> outcomes;

        std::vector<TokenId> path;
        std::vector<Distribution> q_effs;

        std::function<void(double)> rec_draft = [&](double path_prob) {
            if (static_cast<int>(path.size()) == cfg.draft_len) {
                // Target pass over all positions of this draft path.
                std::vector<Distribution> p_raws;
                std::vector<TokenId> vctx = ctx;
                for (int i = 0; i <= cfg.draft_len; ++i) {
                    p_raws.push_back(target.predict(vctx));
                    if (i < cfg.draft_len) vctx.push_back(path[static_cast<std::size_t>(i)]);
                }
                std::function<void(int, double, std::vector<TokenId>)> rec_verify =
                    [&](int pos, double prob, std::vector<TokenId> emitted) {
                        if (pos == cfg.draft_len) {
                            Distribution bonus = collapse(
                                effective(p_raws[static_cast<std::size_t>(pos)], cfg.decode_mode,
                                          cfg.temperature),
                                cfg.decode_mode);
                            for (std::size_t y = 0; y < vocab; ++y) {
                                if (bonus.probs()[y] <= 0.0) continue;
                                auto seq = emitted;
                                seq.push_back(static_cast<TokenId>(y));
                                outcomes.push_back({std::move(seq), prob * bonus.probs()[y]});
                            }
                            return;
                        }
                        PositionSemantics sem = position_semantics(
                            cfg.policy, p_raws[static_cast<std::size_t>(pos)],
                            q_effs[static_cast<std::size_t>(pos)],
                            StepLawOptions{cfg.decode_mode, cfg.decode_mode, cfg.temperature});
                        TokenId x = path[static_cast<std::size_t>(pos)];
                        double a = sem.accept[static_cast<std::size_t>(x)];
                        if (a > 0.0) {
                            auto seq = emitted;
                            seq.push_back(x);
                            if (x == cfg.eot) {
                                outcomes.push_back({seq, prob * a});
                            } else {
                                rec_verify(pos + 1, prob * a, std::move(seq));
                            }
                        }
                        if (a < 1.0) {
                            for (std::size_t y = 0; y < vocab; ++y) {
                                if (sem.reject_draw.probs()[y] <= 0.0) continue;
                                auto seq = emitted;
                                seq.push_back(static_cast<TokenId>(y));
                                outcomes.push_back(
                                    {std::move(seq), prob * (1.0 - a) * sem.reject_draw.probs()[y]});
                            }
                        }
                    };
                rec_verify(0, path_prob, {});
                return;
            }
            std::vector<TokenId> dctx = ctx;
            dctx.insert(dctx.end(), path.begin(), path.end());
            Distribution q_eff =
                effective(draft.predict(dctx), cfg.decode_mode, cfg.temperature);
            Distribution draw = collapse(q_eff, cfg.decode_mode);
            for (std::size_t x = 0; x < vocab; ++x) {
                if (draw.probs()[x] <= 0.0) continue;
                path.push_back(static_cast<TokenId>(x));
                q_effs.push_back(q_eff);
                rec_draft(path_prob * draw.probs()[x]);
                path.pop_back();
                q_effs.pop_back();
            }
        };
        rec_draft(1.0);
        return outcomes;
    };

    std::function<void(std::vector<TokenId>, std::vector<TokenId>, double)> rec =
        [&](std::vector<TokenId> ctx, std::vector<TokenId> emitted, double prob) {
            auto outcomes = enumerate_step(ctx);
            for (auto& out : outcomes) {
                std::vector<TokenId> step_tokens = out.tokens;
                std::int64_t room =
                    cfg.max_tokens - static_cast<std::int64_t>(emitted.size());
                if (static_cast<std::int64_t>(step_tokens.size()) > room) {
                    step_tokens.resize(static_cast<std::size_t>(room));
                }
                bool hit_eot = false;
                for (TokenId t : step_tokens) {
                    if (t == cfg.eot) hit_eot = true;
                }
                std::vector<TokenId> next_emitted = emitted;
                next_emitted.insert(next_emitted.end(), step_tokens.begin(), step_tokens.end());
                double p = prob * out.prob;
                if (hit_eot ||
                    static_cast<std::int64_t>(next_emitted.size()) >= cfg.max_tokens) {
                    result.law[next_emitted] += p;
                } else {
                    std::vector<TokenId> next_ctx = ctx;
                    next_ctx.insert(next_ctx.end(), step_tokens.begin(), step_tokens.end());
                    rec(std::move(next_ctx), std::move(next_emitted), p);
                }
            }
        };
    rec(std::vector<TokenId>(prompt.begin(), prompt.end()), {}, 1.0);

    for (const auto& [seq, p] : result.law) result.total_mass += p;
    return result;
}

EnumerationResult autoregressive_law(const ProbModel& target, std::span<const TokenId> prompt,
                                     const EngineConfig& cfg) {
    require(target.vocab_size() <= 5, "StateSpaceTooLarge", "enumeration caps vocab at 5");
    require(cfg.max_tokens >= 1 && cfg.max_tokens <= 3, "StateSpaceTooLarge",
            "enumeration caps max_tokens at 3");
    EnumerationResult result;
    std::function<void(std::vector<TokenId>, std::vector<TokenId>, double)> rec =
        [&](std::vector<TokenId> ctx, std::vector<TokenId> emitted, double prob) {
            Distribution law = collapse(
                effective(target.predict(ctx), cfg.decode_mode, cfg.temperature), cfg.decode_mode);
            for (std::size_t x = 0; x < law.size(); ++x) {
                if (law.probs()[x] <= 0.0) continue;
                auto next = emitted;
                next.push_back(static_cast<TokenId>(x));
                double p = prob * law.probs()[x];
                if (static_cast<TokenId>(x) == cfg.eot ||
                    static_cast<std::int64_t>(next.size()) >= cfg.max_tokens) {
                    result.law[next] += p;
                } else {
                    auto next_ctx = ctx;
                    next_ctx.push_back(static_cast<TokenId>(x));
                    rec(std::move(next_ctx), std::move(next), p);
                }
            }
        };
    rec(std::vector<TokenId>(prompt.begin(), prompt.end()), {}, 1.0);
    for (const auto& [seq, p] : result.law) result.total_mass += p;
    return result;
}

MonteCarloResult monte_carlo_law(const VerifyPolicy& policy, const Distribution& p,
                                 const Distribution& q, const EngineConfig& cfg,
                                 std::size_t n_samples, std::uint64_t seed) {
    require(n_samples >= 1, "InvalidSize", "need at least one sample");
    ConstantModel draft(q);
    ConstantModel target(p);

    EngineConfig run_cfg = cfg;
    run_cfg.policy = policy;
    run_cfg.max_tokens = 1;

    std::vector<double> counts(p.size(), 0.0);
    const std::vector<TokenId> prompt = {0};
    for (std::size_t i = 0; i < n_samples; ++i) {
        run_cfg.seed = Rng::derive(seed, i).next_u64();
        Transcript t = generate(draft, target, prompt, run_cfg);
        counts[static_cast<std::size_t>(t.steps.front().emitted.front())] += 1.0;
    }
    MonteCarloResult out{normalize(counts), 0.0, n_samples};
    Distribution exact = exact_step_law(policy, p, q, cfg.decode_mode, cfg.temperature);
    out.tv_distance = total_variation(out.empirical, exact);
    return out;
}

double total_variation(const Distribution& a, const Distribution& b) {
    require(a.size() == b.size(), "VocabMismatch", "TV over mismatched vocabularies");
    double tv = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        tv += std::abs(a.probs()[i] - b.probs()[i]);
    }
    return 0.5 * tv;
}

}  // namespace specd
