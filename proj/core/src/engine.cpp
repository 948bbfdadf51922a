#include "specd/engine.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "json.hpp"

namespace specd {

namespace {

using nlohmann::json;

TokenId pick(const Distribution& dist, DecodeMode mode, Rng& rng) {
    if (mode == DecodeMode::Greedy) return dist.argmax();
    return sample_categorical(dist, rng.next_uniform());
}

Distribution effective(const Distribution& raw, const EngineConfig& cfg) {
    if (cfg.decode_mode == DecodeMode::Sample && cfg.temperature != 1.0) {
        return apply_temperature(raw, cfg.temperature);
    }
    return raw;
}

}  // namespace

std::vector<double> Transcript::nll_stream() const {
    std::vector<double> out;
    for (const auto& s : steps) out.insert(out.end(), s.emitted_nll.begin(), s.emitted_nll.end());
    return out;
}

DraftPhaseResult draft_phase(const ProbModel& draft, std::span<const TokenId> prefix,
                             const EngineConfig& cfg, Rng& rng) {
    require(!prefix.empty(), "InvalidSize", "draft phase requires a non-empty prefix");
    require(cfg.draft_len >= 1, "InvalidSize", "draft_len must be >= 1");
    DraftPhaseResult out;
    std::vector<TokenId> ctx(prefix.begin(), prefix.end());
    for (int i = 0; i < cfg.draft_len; ++i) {
        Distribution q = effective(draft.predict(ctx), cfg);
        TokenId tok = pick(q, cfg.decode_mode, rng);
        out.tokens.push_back(tok);
        out.q_dists.push_back(std::move(q));
        ctx.push_back(tok);
    }
    return out;
}

StepResult verify_phase(const ProbModel& target, std::span<const TokenId> prefix,
                        const DraftPhaseResult& draft, const EngineConfig& cfg, EmaState ema,
                        Rng& rng) {
    const int gamma = static_cast<int>(draft.tokens.size());
    StepResult step;
    step.draft_calls = gamma;

    // Simulated parallel target pass: gamma+1 positions.
    std::vector<Distribution> p_raw;
    std::vector<TokenId> ctx(prefix.begin(), prefix.end());
    for (int i = 0; i <= gamma; ++i) {
        p_raw.push_back(target.predict(ctx));
        if (i < gamma) ctx.push_back(draft.tokens[static_cast<std::size_t>(i)]);
    }

    const CdPolicy* cd = std::get_if<CdPolicy>(&cfg.policy);
    const MdPolicy* md = std::get_if<MdPolicy>(&cfg.policy);

    // r_n in Algorithm terms: state after the last *accepted* token. The
    // rejected position's smoothed value is discarded; the final fold uses the
    // resampled token's NLL on top of r_n.
    EmaState ema_accepted = ema;

    bool hit_eot = false;
    int reject_pos = -1;
    for (int i = 0; i < gamma && !hit_eot; ++i) {
        const TokenId x = draft.tokens[static_cast<std::size_t>(i)];
        const Distribution& q_eff = draft.q_dists[static_cast<std::size_t>(i)];
        const Distribution p_eff = effective(p_raw[static_cast<std::size_t>(i)], cfg);
        const double token_nll = nll(p_raw[static_cast<std::size_t>(i)], x);

        bool accepted = false;
        if (cd != nullptr) {
            CdDecision d = cd_accept_smooth(ema_accepted, token_nll, *cd, cfg.ema_init);
            accepted = d.accept;
            if (accepted) ema_accepted = d.state;
        } else if (md != nullptr) {
            Distribution p_v = apply_temperature(p_raw[static_cast<std::size_t>(i)], md->temperature);
            Distribution q_v = apply_temperature(q_eff, md->temperature);
            double alpha = md_solve_alpha(p_v, q_v, *md);
            double u = rng.next_uniform();
            accepted = md_accept(p_v[x], q_v[x], alpha, u);
        } else {
            double u = rng.next_uniform();
            accepted = sd_accept(p_eff[x], q_eff[x], u);
        }

        step.trace.push_back({x, q_eff[x], p_eff[x], token_nll, accepted});
        if (!accepted) {
            reject_pos = i;
            break;
        }
        step.n_accepted += 1;
        step.emitted.push_back(x);
        step.emitted_nll.push_back(token_nll);
        if (x == cfg.eot) hit_eot = true;
    }

    if (!hit_eot) {
        const int pos = reject_pos >= 0 ? reject_pos : gamma;
        const Distribution& p_here = p_raw[static_cast<std::size_t>(pos)];
        const Distribution p_eff = effective(p_here, cfg);

        Distribution draw_from = p_eff;
        if (reject_pos >= 0) {
            const Distribution& q_eff = draft.q_dists[static_cast<std::size_t>(pos)];
            try {
                if (md != nullptr) {
                    Distribution p_v = apply_temperature(p_here, md->temperature);
                    Distribution q_v = apply_temperature(q_eff, md->temperature);
                    double alpha = md_solve_alpha(p_v, q_v, *md);
                    draw_from = md_residual(p_v, q_v, md_beta_for_alpha(alpha));
                } else if (cd == nullptr) {
                    draw_from = sd_residual(p_eff, q_eff);
                }
                // CD resamples directly from the target distribution.
            } catch (const Error& e) {
                if (e.code() != "DegenerateResidual") throw;
                draw_from = p_eff;  // zero-measure rounding event
            }
        }
        TokenId tok = pick(draw_from, cfg.decode_mode, rng);
        step.emitted.push_back(tok);
        step.emitted_nll.push_back(nll(p_here, tok));
        if (cd != nullptr) {
            ema_accepted = ema_update(ema_accepted, nll(p_here, tok), cd->ema_beta);
        }
    }

    step.ema_after = ema_accepted;
    return step;
}

Transcript generate(const ProbModel& draft, const ProbModel& target,
                    std::span<const TokenId> prompt, const EngineConfig& cfg) {
    require(draft.vocab_size() == target.vocab_size(), "VocabMismatch",
            "draft and target models must share a vocabulary");
    require(!prompt.empty(), "InvalidSize", "prompt must be non-empty");
    require(cfg.max_tokens >= 1, "InvalidSize", "max_tokens must be >= 1");

    Transcript t;
    t.prompt.assign(prompt.begin(), prompt.end());
    Rng rng(cfg.seed);
    EmaState ema;
    std::vector<TokenId> ctx(prompt.begin(), prompt.end());

    while (t.total_tokens < cfg.max_tokens) {
        if (cfg.ema_reset_per_step) ema = EmaState{};
        DraftPhaseResult d = draft_phase(draft, ctx, cfg, rng);
        StepResult step = verify_phase(target, ctx, d, cfg, ema, rng);
        ema = step.ema_after;

        bool hit_eot = false;
        std::int64_t room = cfg.max_tokens - t.total_tokens;
        if (static_cast<std::int64_t>(step.emitted.size()) > room) {
            step.emitted.resize(static_cast<std::size_t>(room));
            step.emitted_nll.resize(static_cast<std::size_t>(room));
        }
        for (TokenId tok : step.emitted) {
            if (tok == cfg.eot) hit_eot = true;
        }
        ctx.insert(ctx.end(), step.emitted.begin(), step.emitted.end());
        t.total_tokens += static_cast<std::int64_t>(step.emitted.size());
        t.target_calls += 1;
        t.draft_calls += step.draft_calls;
        t.steps.push_back(std::move(step));
        if (hit_eot) break;
    }
    return t;
}

void write_transcript(std::ostream& out, const Transcript& t) {
    json meta = {{"record", "meta"},
                 {"prompt", t.prompt},
                 {"total_tokens", t.total_tokens},
                 {"target_calls", t.target_calls},
                 {"draft_calls", t.draft_calls}};
    out << meta.dump() << "\n";
    for (const auto& s : t.steps) {
        json trace = json::array();
        for (const auto& p : s.trace) {
            trace.push_back({p.draft_token, p.q_x, p.p_x, p.nll, p.accepted});
        }
        json rec = {{"record", "step"},
                    {"n_accepted", s.n_accepted},
                    {"emitted", s.emitted},
                    {"nll", s.emitted_nll},
                    {"draft_calls", s.draft_calls},
                    {"ema_value", s.ema_after.value},
                    {"ema_init", s.ema_after.initialized},
                    {"trace", trace}};
        out << rec.dump() << "\n";
    }
}

Transcript read_transcript(std::istream& in) {
    Transcript t;
    std::string line;
    bool have_meta = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json rec = json::parse(line);
        if (rec.at("record") == "meta") {
            t.prompt = rec.at("prompt").get<std::vector<TokenId>>();
            t.total_tokens = rec.at("total_tokens").get<std::int64_t>();
            t.target_calls = rec.at("target_calls").get<std::int64_t>();
            t.draft_calls = rec.at("draft_calls").get<std::int64_t>();
            have_meta = true;
            continue;
        }
        StepResult s;
        s.n_accepted = rec.at("n_accepted").get<int>();
        s.emitted = rec.at("emitted").get<std::vector<TokenId>>();
        s.emitted_nll = rec.at("nll").get<std::vector<double>>();
        s.draft_calls = rec.at("draft_calls").get<int>();
        s.ema_after.value = rec.at("ema_value").get<double>();
        s.ema_after.initialized = rec.at("ema_init").get<bool>();
        for (const auto& p : rec.at("trace")) {
            s.trace.push_back({p.at(0).get<TokenId>(), p.at(1).get<double>(),
                               p.at(2).get<double>(), p.at(3).get<double>(), p.at(4).get<bool>()});
        }
        t.steps.push_back(std::move(s));
    }
    require(have_meta, "ParseError", "transcript missing meta record");
    return t;
}

}  // namespace specd
