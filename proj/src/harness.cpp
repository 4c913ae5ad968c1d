// Copyright 2026 The twl Authors
// SPDX-License-Identifier: Apache-2.0

#include "twl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "twl/error.hpp"
#include "twl/format.hpp"
#include "twl/parallel.hpp"

namespace twl {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& ctx, const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError(ctx + ": expected a JSON object");
    for (const auto& item : j.items()) {
        if (!allowed.count(item.key()))
            throw ConfigError(ctx + ": unknown key '" + item.key() + "'");
    }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(key + ": invalid value type");
    }
}

uint64_t parse_u64(const json& j, const std::string& key, uint64_t fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (v.is_number_unsigned()) return v.get<uint64_t>();
    if (v.is_number_integer() && v.get<int64_t>() >= 0)
        return static_cast<uint64_t>(v.get<int64_t>());
    if (v.is_string()) return std::stoull(v.get<std::string>(), nullptr, 0);
    throw ConfigError(key + ": expected unsigned integer or string");
}

}  // namespace

SequenceModel ModelConfig::build() const {
    if (kind == "shift") {
        // cyclic drift: token x moves into {x+1, ..., x+branch} mod n (uniform
        // over the branch) with total probability q, else uniform over the rest.
        // Low per-position entropy with diverse context windows, so seed reuse
        // stays negligible no matter how peaked the rows are.
        if (!(two_point_q > 0.0 && two_point_q < 1.0))
            throw ConfigError("model.q: shift requires q in (0,1)");
        if (branch < 1 || branch > n - 1)
            throw ConfigError("model.branch: must lie in [1, n-1]");
        std::vector<TokenDistribution> rows(n);
        for (size_t x = 0; x < n; ++x) {
            rows[x].probs.assign(n, (1.0 - two_point_q) / static_cast<double>(n - branch));
            for (size_t j = 1; j <= branch; ++j)
                rows[x].probs[(x + j) % n] = two_point_q / static_cast<double>(branch);
        }
        return SequenceModel::markov(std::move(rows), temperature);
    }
    if (kind == "bursty") {
        // bursty entropy: tokens on the open stride fan out uniformly over
        // `branch` successors, every other token forces its successor. Mimics
        // text whose watermarkable entropy concentrates in a fraction of
        // positions while context windows stay diverse.
        if (branch < 2 || branch > n - 1) throw ConfigError("model.branch: must lie in [2, n-1]");
        if (open_every < 1) throw ConfigError("model.open_every: must be >= 1");
        std::vector<TokenDistribution> rows(n);
        for (size_t x = 0; x < n; ++x) {
            rows[x].probs.assign(n, 0.0);
            if (x % open_every == 0) {
                for (size_t j = 1; j <= branch; ++j)
                    rows[x].probs[(x + j) % n] = 1.0 / static_cast<double>(branch);
            } else {
                rows[x].probs[(x + 1) % n] = 1.0;
            }
        }
        return SequenceModel::markov(std::move(rows), temperature);
    }
    if (kind == "markov") {
        std::vector<TokenDistribution> rows;
        rows.reserve(transition.size());
        for (const auto& r : transition) rows.push_back(TokenDistribution{r});
        return SequenceModel::markov(std::move(rows), temperature);
    }
    DistParams params;
    DistKind dk;
    if (kind == "uniform")
        dk = DistKind::uniform;
    else if (kind == "zipf") {
        dk = DistKind::zipf;
        params.zipf_s = zipf_s;
    } else if (kind == "two_point") {
        dk = DistKind::two_point;
        params.two_point_q = two_point_q;
    } else if (kind == "explicit") {
        dk = DistKind::explicit_probs;
        params.probs = probs;
    } else {
        throw ConfigError("model.kind: unknown kind '" + kind + "'");
    }
    return SequenceModel::iid(make_distribution(dk, n, params), temperature);
}

AttackConfig AttackSection::to_attack_config() const {
    AttackConfig atk;
    atk.n_attack_layers = n_layers;
    if (count_mode == "initial_pool")
        atk.count_mode = AttackConfig::CountMode::initial_pool;
    else if (count_mode == "per_layer")
        atk.count_mode = AttackConfig::CountMode::per_layer;
    else
        throw ConfigError("attack.count_mode: expected per_layer or initial_pool");
    atk.validate();
    return atk;
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: JSON parse error: ") + e.what());
    }
    check_keys(j, "config",
               {"kind", "model", "gspec", "m", "m_list", "T", "n_texts", "n_unwatermarked",
                "n_train", "epsilon", "H", "prompt_T", "emit_texts", "master_seed", "key",
                "prior_w", "attack", "optimal_p", "threads"});
    ExperimentConfig cfg;
    cfg.kind = get_or<std::string>(j, "kind", cfg.kind);
    if (j.contains("model")) {
        const auto& jm = j.at("model");
        check_keys(jm, "model",
                   {"kind", "n", "s", "q", "branch", "open_every", "probs", "transition",
                    "temperature"});
        cfg.model.kind = get_or<std::string>(jm, "kind", cfg.model.kind);
        cfg.model.n = get_or<size_t>(jm, "n", cfg.model.n);
        cfg.model.zipf_s = get_or<double>(jm, "s", cfg.model.zipf_s);
        cfg.model.two_point_q = get_or<double>(jm, "q", cfg.model.two_point_q);
        cfg.model.branch = get_or<size_t>(jm, "branch", cfg.model.branch);
        cfg.model.open_every = get_or<size_t>(jm, "open_every", cfg.model.open_every);
        cfg.model.probs = get_or<std::vector<double>>(jm, "probs", {});
        cfg.model.transition = get_or<std::vector<std::vector<double>>>(jm, "transition", {});
        cfg.model.temperature = get_or<double>(jm, "temperature", 1.0);
    }
    if (j.contains("gspec")) {
        const auto& jg = j.at("gspec");
        check_keys(jg, "gspec", {"family", "p"});
        const auto fam = get_or<std::string>(jg, "family", "bernoulli");
        if (fam == "bernoulli")
            cfg.gspec = GSpec::bernoulli(get_or<double>(jg, "p", 0.5));
        else if (fam == "uniform")
            cfg.gspec = GSpec::uniform();
        else
            throw ConfigError("gspec.family: expected bernoulli or uniform");
    }
    if (j.contains("m") && j.contains("m_list"))
        throw ConfigError("config: give either m or m_list, not both");
    if (j.contains("m")) cfg.m_list = {get_or<uint32_t>(j, "m", 30)};
    if (j.contains("m_list")) cfg.m_list = get_or<std::vector<uint32_t>>(j, "m_list", {});
    cfg.T = get_or<size_t>(j, "T", cfg.T);
    cfg.n_texts = get_or<size_t>(j, "n_texts", cfg.n_texts);
    cfg.n_unwatermarked = get_or<size_t>(j, "n_unwatermarked", cfg.n_unwatermarked);
    cfg.n_train = get_or<size_t>(j, "n_train", cfg.n_train);
    cfg.epsilon = get_or<double>(j, "epsilon", cfg.epsilon);
    cfg.H = get_or<uint32_t>(j, "H", cfg.H);
    cfg.prompt_T = get_or<size_t>(j, "prompt_T", cfg.prompt_T);
    cfg.emit_texts = get_or<bool>(j, "emit_texts", cfg.emit_texts);
    cfg.master_seed = parse_u64(j, "master_seed", cfg.master_seed);
    if (j.contains("key")) cfg.key = SecretKey::from_hex(get_or<std::string>(j, "key", ""));
    cfg.prior_w = get_or<double>(j, "prior_w", cfg.prior_w);
    if (j.contains("attack")) {
        const auto& ja = j.at("attack");
        check_keys(ja, "attack", {"n_layers", "count_mode", "n_texts"});
        cfg.attack.n_layers = get_or<uint32_t>(ja, "n_layers", cfg.attack.n_layers);
        cfg.attack.count_mode = get_or<std::string>(ja, "count_mode", cfg.attack.count_mode);
        cfg.attack.n_texts = get_or<size_t>(ja, "n_texts", cfg.attack.n_texts);
    }
    if (j.contains("optimal_p")) {
        const auto& jo = j.at("optimal_p");
        check_keys(jo, "optimal_p", {"grid", "empirical_p"});
        cfg.optimal_p.grid = get_or<std::vector<double>>(jo, "grid", cfg.optimal_p.grid);
        cfg.optimal_p.empirical_p = get_or<std::vector<double>>(jo, "empirical_p", {});
    }
    cfg.threads = get_or<int>(j, "threads", 0);
    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

void ExperimentConfig::validate() const {
    static const std::set<std::string> kinds = {"sweep", "clt", "attack", "validate", "optimal_p"};
    if (!kinds.count(kind)) throw ConfigError("kind: unknown experiment kind '" + kind + "'");
    if (m_list.empty()) throw ConfigError("m_list: must be non-empty");
    for (uint32_t m : m_list)
        if (m < 1 || m > 4096) throw ConfigError("m: layer counts must lie in [1, 4096]");
    if (T < 1) throw ConfigError("T: must be >= 1");
    if (n_texts < 1) throw ConfigError("n_texts: must be >= 1");
    if (!(epsilon > 0.0 && epsilon < 0.5)) throw ConfigError("epsilon: must lie in (0, 0.5)");
    if (static_cast<double>(n_unwatermarked) < 1.0 / epsilon)
        throw ConfigError("n_unwatermarked: must be >= 1/epsilon");
    if (H < 1) throw ConfigError("H: must be >= 1");
    if (!(prior_w > 0.0 && prior_w < 1.0)) throw ConfigError("prior_w: must lie in (0,1)");
}

uint32_t ExperimentConfig::m_max() const { return *std::max_element(m_list.begin(), m_list.end()); }

TournamentConfig ExperimentConfig::tournament(uint32_t m) const {
    TournamentConfig tc;
    tc.m = m;
    tc.gspec = gspec;
    tc.H = H;
    tc.key = key;
    tc.validate();
    return tc;
}

// ---- shared pipeline pieces ----

namespace {

// Stream index scheme: high 32 bits tag the group (layer count, p-grid slot),
// low 32 bits are the text index, so adding texts or groups never perturbs
// other streams.
uint64_t stream_id(uint32_t tag, size_t i) {
    return (static_cast<uint64_t>(tag) << 32) | static_cast<uint64_t>(i);
}

struct WatermarkedBatch {
    std::vector<double> ms;          // per text
    std::vector<double> bs_logodds;  // per text (empty until scored)
    CollisionProfile profile;        // collapsed measured collisions
};

// Generates n watermarked texts at m layers, recording realized collisions and
// mean scores; callers fill bs_logodds once a chat estimate exists.
WatermarkedBatch generate_watermarked_batch(const ExperimentConfig& cfg, const SequenceModel& model,
                                            uint32_t m, size_t n, uint64_t purpose, uint32_t tag,
                                            unsigned threads,
                                            std::vector<GMatrix>* keep_matrices = nullptr) {
    const TournamentConfig tc = cfg.tournament(m);
    WatermarkedBatch batch;
    batch.ms.assign(n, 0.0);
    std::vector<double> csum(n * m, 0.0), csum2(n * m, 0.0);
    if (keep_matrices) keep_matrices->resize(n);

    parallel_for(n, threads, [&](size_t i) {
        CounterRng rng(cfg.master_seed, purpose, stream_id(tag, i));
        const auto prompt = sample_prompt(model, cfg.prompt_T, rng);
        const GenerationResult gen = generate_text(model, tc, cfg.T, rng, /*record=*/true, prompt);
        GMatrix gm = recompute_g_matrix(gen.text.tokens, cfg.key, m, cfg.H, cfg.gspec,
                                        model.vocab(), prompt);
        batch.ms[i] = mean_score(gm);
        for (size_t t = 0; t < cfg.T; ++t) {
            for (size_t l = 0; l < m; ++l) {
                const double c = gen.collisions[t * m + l];
                csum[i * m + l] += c;
                csum2[i * m + l] += c * c;
            }
        }
        if (keep_matrices) (*keep_matrices)[i] = std::move(gm);
    });

    CollisionProfile& prof = batch.profile;
    prof.mean.assign(m, 0.0);
    prof.se.assign(m, 0.0);
    prof.n_positions = cfg.T;
    prof.n_samples = n * cfg.T;
    const double cnt = static_cast<double>(n * cfg.T);
    for (size_t l = 0; l < m; ++l) {
        double s = 0.0, s2 = 0.0;
        for (size_t i = 0; i < n; ++i) {
            s += csum[i * m + l];
            s2 += csum2[i * m + l];
        }
        prof.mean[l] = s / cnt;
        prof.se[l] = std::sqrt(std::max(0.0, s2 / cnt - prof.mean[l] * prof.mean[l]) / cnt);
    }
    return batch;
}

ChatEstimate train_chat(const ExperimentConfig& cfg, const SequenceModel& model, uint32_t m,
                        unsigned threads) {
    const TournamentConfig tc = cfg.tournament(m);
    std::vector<GMatrix> mats(cfg.n_train);
    parallel_for(cfg.n_train, threads, [&](size_t i) {
        CounterRng rng(cfg.master_seed, streams::kTrain, stream_id(m, i));
        const auto prompt = sample_prompt(model, cfg.prompt_T, rng);
        const GenerationResult gen = generate_text(model, tc, cfg.T, rng, false, prompt);
        mats[i] = recompute_g_matrix(gen.text.tokens, cfg.key, m, cfg.H, cfg.gspec, model.vocab(),
                                     prompt);
    });
    return estimate_chat(mats, cfg.gspec);
}

// Unwatermarked texts scored at every requested layer count in one pass.
struct UnwatermarkedScores {
    // [m index][text index]
    std::vector<std::vector<double>> ms;
    std::vector<std::vector<double>> bs_logodds;
};

UnwatermarkedScores score_unwatermarked(const ExperimentConfig& cfg, const SequenceModel& model,
                                        const std::vector<uint32_t>& m_list,
                                        const std::vector<ChatEstimate>& chats, unsigned threads,
                                        bool with_bayesian = true) {
    const uint32_t m_max = *std::max_element(m_list.begin(), m_list.end());
    const size_t n = cfg.n_unwatermarked;
    UnwatermarkedScores out;
    out.ms.assign(m_list.size(), std::vector<double>(n, 0.0));
    out.bs_logodds.assign(m_list.size(), std::vector<double>(n, 0.0));

    std::vector<DetectorParams> dets(m_list.size());
    for (size_t mi = 0; mi < m_list.size(); ++mi) {
        dets[mi].chat = chats[mi];
        dets[mi].prior_w = cfg.prior_w;
    }

    const TournamentConfig plain = cfg.tournament(1);  // m unused for m=0 generation
    parallel_for(n, threads, [&](size_t i) {
        CounterRng rng(cfg.master_seed, streams::kUnwatermarked, i);
        TournamentConfig tc = plain;
        tc.m = 0;
        const auto prompt = sample_prompt(model, cfg.prompt_T, rng);
        const GenerationResult gen = generate_text(model, tc, cfg.T, rng, false, prompt);
        const GMatrix gm = recompute_g_matrix(gen.text.tokens, cfg.key, m_max, cfg.H, cfg.gspec,
                                              model.vocab(), prompt);
        // prefix sums over layers give the mean score at every m
        std::vector<double> layer_sum(m_max, 0.0);
        for (size_t t = 0; t < gm.T; ++t)
            for (size_t l = 0; l < m_max; ++l) layer_sum[l] += gm.at(t, l);
        for (size_t mi = 0; mi < m_list.size(); ++mi) {
            const uint32_t m = m_list[mi];
            double s = 0.0;
            for (uint32_t l = 0; l < m; ++l) s += layer_sum[l];
            out.ms[mi][i] = s / (static_cast<double>(gm.T) * m);
            if (!with_bayesian) continue;
            GMatrix sub;
            sub.T = gm.T;
            sub.m = m;
            sub.gspec = gm.gspec;
            sub.values.resize(gm.T * m);
            for (size_t t = 0; t < gm.T; ++t)
                for (uint32_t l = 0; l < m; ++l) sub.values[t * m + l] = gm.at(t, l);
            out.bs_logodds[mi][i] = bayesian_logodds(sub, dets[mi]);
        }
    });
    return out;
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double frac_above(const std::vector<double>& scores, double tau) {
    size_t hits = 0;
    for (double s : scores) hits += s > tau;
    return static_cast<double>(hits) / static_cast<double>(scores.size());
}

double sample_mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_var(const std::vector<double>& v) {
    const double m = sample_mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

}  // namespace

// ---- sweep ----

SweepReport run_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    const unsigned threads = resolve_threads(cfg.threads);
    const SequenceModel model = cfg.model.build();
    std::vector<uint32_t> m_list = cfg.m_list;
    std::sort(m_list.begin(), m_list.end());
    m_list.erase(std::unique(m_list.begin(), m_list.end()), m_list.end());

    std::vector<ChatEstimate> chats(m_list.size());
    for (size_t mi = 0; mi < m_list.size(); ++mi)
        chats[mi] = train_chat(cfg, model, m_list[mi], threads);

    const UnwatermarkedScores null_scores =
        score_unwatermarked(cfg, model, m_list, chats, threads);

    SweepReport rep;
    const double alpha = cfg.prior_w / (1.0 - cfg.prior_w);
    for (size_t mi = 0; mi < m_list.size(); ++mi) {
        const uint32_t m = m_list[mi];
        std::vector<GMatrix> mats;
        WatermarkedBatch batch = generate_watermarked_batch(cfg, model, m, cfg.n_texts,
                                                            streams::kWatermarked, m, threads, &mats);
        DetectorParams det;
        det.chat = chats[mi];
        det.prior_w = cfg.prior_w;
        batch.bs_logodds.resize(cfg.n_texts);
        parallel_for(cfg.n_texts, threads,
                     [&](size_t i) { batch.bs_logodds[i] = bayesian_logodds(mats[i], det); });

        const TprResult ms_res = tpr_at_fpr(batch.ms, null_scores.ms[mi], cfg.epsilon);
        const TprResult bs_res = tpr_at_fpr(batch.bs_logodds, null_scores.bs_logodds[mi], cfg.epsilon);

        // below the CLT floor the closed-form threshold is out of contract;
        // -1 marks "no prediction" in reports
        const double ms_theory = static_cast<double>(m) * static_cast<double>(cfg.T) >= 30.0
                                     ? ms_tpr(cfg.epsilon, batch.profile, cfg.gspec, m, cfg.T)
                                     : -1.0;
        const double bs_theory =
            bs_tpr(cfg.epsilon, batch.profile, chats[mi], alpha, cfg.gspec, m, cfg.T);

        rep.rows.push_back({m, "mean", cfg.gspec.name(), cfg.epsilon, ms_res.tau, ms_res.tpr,
                            ms_theory, cfg.n_texts, cfg.T, cfg.master_seed});
        rep.rows.push_back({m, "bayesian", cfg.gspec.name(), cfg.epsilon, sigmoid(bs_res.tau),
                            bs_res.tpr, bs_theory, cfg.n_texts, cfg.T, cfg.master_seed});

        if (m == m_list.back()) {
            rep.layer_C = batch.profile.mean;
            rep.layer_C_se = batch.profile.se;
            rep.chat_mmax = chats[mi].chat;
        }
    }
    return rep;
}

// ---- CLT check ----

CltReport run_clt_check(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.n_texts < 200) throw ConfigError("clt: n_texts must be >= 200");
    const unsigned threads = resolve_threads(cfg.threads);
    const SequenceModel model = cfg.model.build();
    const uint32_t m = cfg.m_list.front();

    WatermarkedBatch batch = generate_watermarked_batch(cfg, model, m, cfg.n_texts,
                                                        streams::kWatermarked, m, threads);
    CltReport rep;
    rep.n = cfg.n_texts;
    rep.m = m;
    rep.T = cfg.T;
    rep.clt_floor_violated = static_cast<double>(m) * static_cast<double>(cfg.T) < 30.0;
    const AndersonDarlingResult ad = anderson_darling(batch.ms, 0.05);
    rep.a2 = ad.a2;
    rep.a2_adjusted = ad.a2_adjusted;
    rep.critical = ad.critical;
    rep.pass = ad.pass;

    const auto [lo_it, hi_it] = std::minmax_element(batch.ms.begin(), batch.ms.end());
    rep.hist_lo = *lo_it;
    rep.hist_hi = *hi_it;
    rep.histogram.assign(20, 0);
    const double width = (rep.hist_hi - rep.hist_lo) / 20.0;
    for (double s : batch.ms) {
        size_t bin = width > 0.0 ? static_cast<size_t>((s - rep.hist_lo) / width) : 0;
        rep.histogram[std::min<size_t>(bin, 19)]++;
    }
    return rep;
}

// ---- attack ----

AttackReport run_attack_eval(const ExperimentConfig& cfg) {
    cfg.validate();
    const unsigned threads = resolve_threads(cfg.threads);
    const SequenceModel model = cfg.model.build();
    const uint32_t m = cfg.m_list.front();
    const AttackConfig atk = cfg.attack.to_attack_config();
    const TournamentConfig tc = cfg.tournament(m);

    // null distribution and threshold (mean score; the attack targets MS)
    std::vector<ChatEstimate> chats = {ChatEstimate{std::vector<double>(m, 1.0), 0}};
    const UnwatermarkedScores nulls =
        score_unwatermarked(cfg, model, {m}, chats, threads, /*with_bayesian=*/false);
    const double tau = calibrate_threshold_empirical(nulls.ms[0], cfg.epsilon);

    WatermarkedBatch base = generate_watermarked_batch(cfg, model, m, cfg.n_texts,
                                                       streams::kWatermarked, m, threads);

    std::vector<double> attacked_ms(cfg.attack.n_texts, 0.0);
    std::vector<std::vector<TokenId>> attacked_texts(cfg.emit_texts ? cfg.attack.n_texts : 0);
    parallel_for(cfg.attack.n_texts, threads, [&](size_t i) {
        CounterRng rng(cfg.master_seed, streams::kAttack, i);
        const auto prompt = sample_prompt(model, cfg.prompt_T, rng);
        const WatermarkedText text = generate_attacked_text(model, tc, atk, cfg.T, rng, prompt);
        const GMatrix gm =
            recompute_g_matrix(text.tokens, cfg.key, m, cfg.H, cfg.gspec, model.vocab(), prompt);
        attacked_ms[i] = mean_score(gm);
        if (cfg.emit_texts) attacked_texts[i] = text.tokens;
    });

    AttackReport rep;
    rep.attacked_texts = std::move(attacked_texts);
    rep.rows.push_back({"baseline", 0, frac_above(base.ms, tau), sample_mean(base.ms), tau});
    rep.rows.push_back({"attacked", atk.n_attack_layers, frac_above(attacked_ms, tau),
                        sample_mean(attacked_ms), tau});
    rep.below_tau_fraction = 1.0 - frac_above(attacked_ms, tau);
    return rep;
}

// ---- validate ----

ValidateReport run_validate(const ExperimentConfig& cfg) {
    cfg.validate();
    const unsigned threads = resolve_threads(cfg.threads);
    const SequenceModel model = cfg.model.build();
    const uint32_t m = cfg.m_list.front();
    const double n = static_cast<double>(cfg.n_texts);

    const ChatEstimate chat = train_chat(cfg, model, m, threads);
    const UnwatermarkedScores nulls = score_unwatermarked(cfg, model, {m}, {chat}, threads);

    std::vector<GMatrix> mats;
    WatermarkedBatch batch = generate_watermarked_batch(cfg, model, m, cfg.n_texts,
                                                        streams::kWatermarked, m, threads, &mats);
    DetectorParams det;
    det.chat = chat;
    det.prior_w = cfg.prior_w;
    batch.bs_logodds.resize(cfg.n_texts);
    parallel_for(cfg.n_texts, threads,
                 [&](size_t i) { batch.bs_logodds[i] = bayesian_logodds(mats[i], det); });

    const double alpha = cfg.prior_w / (1.0 - cfg.prior_w);
    const double log_alpha = std::log(alpha);

    ValidateReport rep;
    auto assert_close = [&](const std::string& name, double expected, double observed,
                            double tolerance) {
        rep.rows.push_back({name, expected, observed, tolerance,
                            std::abs(expected - observed) <= tolerance});
    };

    // mean score moments vs theory with the measured collision profile
    const ScoreMoments ms_th = ms_moments(batch.profile, cfg.gspec, Condition::watermarked);
    const double ms_mean_obs = sample_mean(batch.ms);
    const double ms_var_obs = sample_var(batch.ms);
    assert_close("ms_mean_watermarked", ms_th.mean, ms_mean_obs,
                 3.0 * std::sqrt(ms_var_obs / n));
    assert_close("ms_var_watermarked", ms_th.variance, ms_var_obs,
                 3.0 * ms_var_obs * std::sqrt(2.0 / (n - 1.0)));

    // Bayesian log-LLR moments (log-odds minus prior)
    std::vector<double> llr_w(batch.bs_logodds), llr_u(nulls.bs_logodds[0]);
    for (double& v : llr_w) v -= log_alpha;
    for (double& v : llr_u) v -= log_alpha;
    const ScoreMoments bs_w = bs_moments(batch.profile, chat, cfg.gspec, Condition::watermarked);
    const ScoreMoments bs_u = bs_moments(batch.profile, chat, cfg.gspec, Condition::unwatermarked);
    assert_close("bs_mean_watermarked", bs_w.mean, sample_mean(llr_w),
                 3.0 * std::sqrt(sample_var(llr_w) / n));
    assert_close("bs_var_watermarked", bs_w.variance, sample_var(llr_w),
                 3.0 * sample_var(llr_w) * std::sqrt(2.0 / (n - 1.0)));
    assert_close("bs_mean_unwatermarked", bs_u.mean, sample_mean(llr_u),
                 3.0 * std::sqrt(sample_var(llr_u) / static_cast<double>(llr_u.size())));
    assert_close("bs_var_unwatermarked", bs_u.variance, sample_var(llr_u),
                 3.0 * sample_var(llr_u) * std::sqrt(2.0 / (static_cast<double>(llr_u.size()) - 1.0)));

    // closed-form thresholds achieve the target FPR
    const double nu = static_cast<double>(cfg.n_unwatermarked);
    const double fpr_tol = 3.0 * std::sqrt(cfg.epsilon * (1.0 - cfg.epsilon) / nu);
    const double tau_ms = threshold_ms_closed(cfg.epsilon, m, cfg.T, cfg.gspec);
    assert_close("fpr_ms_closed", cfg.epsilon, frac_above(nulls.ms[0], tau_ms), fpr_tol);
    const double tau_bs =
        threshold_bs_closed_logodds(cfg.epsilon, chat, alpha, cfg.gspec, m, cfg.T);
    assert_close("fpr_bs_closed", cfg.epsilon, frac_above(nulls.bs_logodds[0], tau_bs), fpr_tol);

    // empirical TPR vs predictions
    const TprResult ms_res = tpr_at_fpr(batch.ms, nulls.ms[0], cfg.epsilon);
    assert_close("tpr_ms", ms_tpr(cfg.epsilon, batch.profile, cfg.gspec, m, cfg.T), ms_res.tpr, 0.05);
    const TprResult bs_res = tpr_at_fpr(batch.bs_logodds, nulls.bs_logodds[0], cfg.epsilon);
    assert_close("tpr_bs", bs_tpr(cfg.epsilon, batch.profile, chat, alpha, cfg.gspec, m, cfg.T),
                 bs_res.tpr, 0.05);

    // unwatermarked mean score is 1/2
    const double null_ms_mean = sample_mean(nulls.ms[0]);
    assert_close("ms_mean_unwatermarked", cfg.gspec.is_bernoulli() ? cfg.gspec.p : 0.5,
                 null_ms_mean, 3.0 * std::sqrt(sample_var(nulls.ms[0]) / nu));

    // per-text score rows with the empirical thresholds (Bayesian rows report
    // the posterior scale; verdicts were taken on the equivalent log-odds)
    auto push_scores = [&](const std::vector<double>& ms, const std::vector<double>& bs,
                           const std::string& prefix) {
        for (size_t i = 0; i < ms.size(); ++i) {
            rep.scores.push_back({prefix + std::to_string(i), "mean", ms[i], ms_res.tau,
                                  classify(ms[i], ms_res.tau)});
            rep.scores.push_back({prefix + std::to_string(i), "bayesian", sigmoid(bs[i]),
                                  sigmoid(bs_res.tau), classify(bs[i], bs_res.tau)});
        }
    };
    push_scores(batch.ms, batch.bs_logodds, "w");
    push_scores(nulls.ms[0], nulls.bs_logodds[0], "u");
    return rep;
}

// ---- optimal p ----

OptimalPReport run_optimal_p(const ExperimentConfig& cfg) {
    cfg.validate();
    if (!cfg.gspec.is_bernoulli())
        throw ConfigError("optimal_p: requires a bernoulli gspec");
    const unsigned threads = resolve_threads(cfg.threads);
    const SequenceModel model = cfg.model.build();
    const uint32_t m = cfg.m_list.front();

    // collision statistics measured at the configured p
    WatermarkedBatch probe = generate_watermarked_batch(cfg, model, m, std::max<size_t>(cfg.n_texts, 100),
                                                        streams::kCollisionMc, m, threads);
    double a_mean = 0.0, a_sq = 0.0;
    for (double c : probe.profile.mean) {
        a_mean += 1.0 - c;
        a_sq += (1.0 - c) * (1.0 - c);
    }
    a_mean /= static_cast<double>(m);
    a_sq /= static_cast<double>(m);

    const OptimalPScan scan =
        optimal_p_scan(cfg.epsilon, m, cfg.T, a_mean, a_sq, cfg.optimal_p.grid);

    OptimalPReport rep;
    rep.p_star = scan.p_star;
    rep.a_mean = a_mean;
    rep.a_sq_mean = a_sq;
    for (size_t i = 0; i < cfg.optimal_p.grid.size(); ++i)
        rep.rows.push_back({cfg.optimal_p.grid[i], scan.z_exact[i], scan.z_asymptotic[i], -1.0});

    for (size_t pi = 0; pi < cfg.optimal_p.empirical_p.size(); ++pi) {
        const double p = cfg.optimal_p.empirical_p[pi];
        ExperimentConfig sub = cfg;
        sub.gspec = GSpec::bernoulli(p);
        const uint32_t tag = 1000 + static_cast<uint32_t>(std::lround(p * 100.0));
        WatermarkedBatch batch = generate_watermarked_batch(sub, model, m, cfg.n_texts,
                                                            streams::kWatermarked, tag, threads);
        std::vector<ChatEstimate> chats = {ChatEstimate{std::vector<double>(m, 1.0), 0}};
        const UnwatermarkedScores nulls =
            score_unwatermarked(sub, model, {m}, chats, threads, /*with_bayesian=*/false);
        const TprResult res = tpr_at_fpr(batch.ms, nulls.ms[0], cfg.epsilon);
        bool found = false;
        for (auto& row : rep.rows) {
            if (row.p == p) {
                row.tpr_emp = res.tpr;
                found = true;
                break;
            }
        }
        if (!found) rep.rows.push_back({p, 0.0, 0.0, res.tpr});
    }
    return rep;
}

// ---- serialization ----

namespace {
json rows_to_json(const SweepReport& r) {
    json arr = json::array();
    for (const auto& row : r.rows) {
        arr.push_back({{"m", row.m},
                       {"score_kind", row.score_kind},
                       {"gspec", row.gspec},
                       {"epsilon", row.epsilon},
                       {"tau", row.tau},
                       {"tpr_emp", row.tpr_emp},
                       {"tpr_theory", row.tpr_theory},
                       {"n_texts", row.n_texts},
                       {"T", row.T},
                       {"seed", row.seed}});
    }
    return arr;
}
}  // namespace

std::string SweepReport::to_csv() const {
    std::string out = "m,score_kind,gspec,epsilon,tau,tpr_emp,tpr_theory,n_texts,T,seed\n";
    for (const auto& r : rows)
        out += std::to_string(r.m) + "," + r.score_kind + "," + r.gspec + "," + fmt_double(r.epsilon) +
               "," + fmt_double(r.tau) + "," + fmt_double(r.tpr_emp) + "," + fmt_double(r.tpr_theory) +
               "," + std::to_string(r.n_texts) + "," + std::to_string(r.T) + "," +
               std::to_string(r.seed) + "\n";
    return out;
}

std::string SweepReport::to_json() const {
    json j;
    j["rows"] = rows_to_json(*this);
    j["layer_C"] = layer_C;
    j["layer_C_se"] = layer_C_se;
    j["chat"] = chat_mmax;
    return j.dump(2) + "\n";
}

std::string CltReport::to_csv() const {
    std::string out = "key,value\n";
    out += "a2," + fmt_double(a2) + "\n";
    out += "a2_adjusted," + fmt_double(a2_adjusted) + "\n";
    out += "critical," + fmt_double(critical) + "\n";
    out += std::string("pass,") + (pass ? "1" : "0") + "\n";
    out += std::string("clt_floor_violated,") + (clt_floor_violated ? "1" : "0") + "\n";
    out += "n," + std::to_string(n) + "\n";
    out += "m," + std::to_string(m) + "\n";
    out += "T," + std::to_string(T) + "\n";
    out += "hist_lo," + fmt_double(hist_lo) + "\n";
    out += "hist_hi," + fmt_double(hist_hi) + "\n";
    for (size_t i = 0; i < histogram.size(); ++i)
        out += "hist_bin_" + std::to_string(i) + "," + std::to_string(histogram[i]) + "\n";
    return out;
}

std::string CltReport::to_json() const {
    json j;
    j["a2"] = a2;
    j["a2_adjusted"] = a2_adjusted;
    j["critical"] = critical;
    j["pass"] = pass;
    j["clt_floor_violated"] = clt_floor_violated;
    j["n"] = n;
    j["m"] = m;
    j["T"] = T;
    j["histogram"] = histogram;
    j["hist_lo"] = hist_lo;
    j["hist_hi"] = hist_hi;
    return j.dump(2) + "\n";
}

std::string AttackReport::to_csv() const {
    std::string out = "phase,n_attack_layers,tpr,mean_score_avg,tau\n";
    for (const auto& r : rows)
        out += r.phase + "," + std::to_string(r.n_attack_layers) + "," + fmt_double(r.tpr) + "," +
               fmt_double(r.mean_score_avg) + "," + fmt_double(r.tau) + "\n";
    return out;
}

std::string AttackReport::to_json() const {
    json arr = json::array();
    for (const auto& r : rows)
        arr.push_back({{"phase", r.phase},
                       {"n_attack_layers", r.n_attack_layers},
                       {"tpr", r.tpr},
                       {"mean_score_avg", r.mean_score_avg},
                       {"tau", r.tau}});
    json j;
    j["rows"] = arr;
    j["below_tau_fraction"] = below_tau_fraction;
    if (!attacked_texts.empty()) j["attacked_texts"] = attacked_texts;
    return j.dump(2) + "\n";
}

bool ValidateReport::all_pass() const {
    for (const auto& r : rows)
        if (!r.pass) return false;
    return true;
}

std::string ValidateReport::scores_csv() const {
    std::string out = "text_id,score_kind,score,threshold,verdict\n";
    for (const auto& r : scores)
        out += r.text_id + "," + r.score_kind + "," + fmt_double(r.score) + "," +
               fmt_double(r.threshold) + "," + (r.verdict ? "w" : "not_w") + "\n";
    return out;
}

std::string ValidateReport::to_csv() const {
    std::string out = "assertion,expected,observed,tolerance,pass\n";
    for (const auto& r : rows)
        out += r.assertion + "," + fmt_double(r.expected) + "," + fmt_double(r.observed) + "," +
               fmt_double(r.tolerance) + "," + (r.pass ? "1" : "0") + "\n";
    return out;
}

std::string ValidateReport::to_json() const {
    json arr = json::array();
    for (const auto& r : rows)
        arr.push_back({{"assertion", r.assertion},
                       {"expected", r.expected},
                       {"observed", r.observed},
                       {"tolerance", r.tolerance},
                       {"pass", r.pass}});
    json j;
    j["rows"] = arr;
    j["all_pass"] = all_pass();
    return j.dump(2) + "\n";
}

std::string OptimalPReport::to_csv() const {
    std::string out = "p,z_exact,z_asymptotic,tpr_emp\n";
    for (const auto& r : rows)
        out += fmt_double(r.p) + "," + fmt_double(r.z_exact) + "," + fmt_double(r.z_asymptotic) +
               "," + (r.tpr_emp < 0.0 ? "" : fmt_double(r.tpr_emp)) + "\n";
    return out;
}

std::string OptimalPReport::to_json() const {
    json arr = json::array();
    for (const auto& r : rows) {
        json row = {{"p", r.p}, {"z_exact", r.z_exact}, {"z_asymptotic", r.z_asymptotic}};
        if (r.tpr_emp >= 0.0) row["tpr_emp"] = r.tpr_emp;
        arr.push_back(row);
    }
    json j;
    j["rows"] = arr;
    j["p_star"] = p_star;
    j["a_mean"] = a_mean;
    j["a_sq_mean"] = a_sq_mean;
    return j.dump(2) + "\n";
}

}  // namespace twl
