// Command line front end: preprocess, synth, train, eval, baseline,
// coldstart and stats subcommands over the iirnn core library.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "iirnn/baselines.hpp"
#include "iirnn/corpus.hpp"
#include "iirnn/log.hpp"
#include "iirnn/metrics.hpp"
#include "iirnn/nets.hpp"
#include "iirnn/recommender.hpp"
#include "iirnn/synth.hpp"
#include "iirnn/trainer.hpp"

namespace {

using namespace iirnn;

struct GlobalFlags {
    std::uint64_t seed = 42;
    bool seed_set = false;
    unsigned threads = 0;
    bool quiet = false;
};

std::vector<int> parse_int_list(const std::string& csv, const char* what) {
    auto out = split_ints(csv);
    if (out.empty()) throw ConfigError(std::string(what) + " list is empty");
    return out;
}

Corpus load_corpus_file(const std::string& path) {
    info("loading corpus " + path);
    return read_corpus(path);
}

struct BaselineFlags {
    int factors = 40;
    float lr = 0.05f;
    float reg = 0.002f;
    int epochs = 10;
    int negatives = 10;
};

std::unique_ptr<Recommender> make_baseline(const std::string& name, const Corpus& corpus,
                                           std::size_t kmax, std::uint64_t seed,
                                           const BaselineFlags& bpr) {
    auto popularity = std::make_shared<PopularityTable>(build_popularity(corpus));
    if (name == "most-popular") return std::make_unique<MostPopularRecommender>(popularity);
    if (name == "most-recent")
        return std::make_unique<MostRecentRecommender>(kmax, corpus.vocab.size(), seed);
    if (name == "item-knn") {
        auto matrix = std::make_shared<CoOccurrenceMatrix>(build_cooccurrence(corpus));
        return std::make_unique<ItemKnnRecommender>(matrix, popularity);
    }
    if (name == "bpr-mf") {
        BprConfig cfg;
        cfg.factors = bpr.factors;
        cfg.lr = bpr.lr;
        cfg.reg = bpr.reg;
        cfg.epochs = bpr.epochs;
        cfg.negatives = bpr.negatives;
        cfg.seed = seed;
        info("training bpr-mf baseline (hold-one-out split)");
        auto factors = std::make_shared<MfFactors>(bpr_mf_train(corpus, cfg));
        return std::make_unique<BprMfRecommender>(factors, popularity);
    }
    throw ConfigError("unknown baseline '" + name +
                      "' (expected most-popular, most-recent, item-knn or bpr-mf)");
}

std::unique_ptr<Recommender> load_model(const std::string& checkpoint_path,
                                        const Corpus& corpus) {
    auto ckpt = load_checkpoint(checkpoint_path);
    verify_checkpoint_vocab(ckpt, corpus.vocab);
    auto params = std::make_shared<const ModelParams>(std::move(ckpt.params));
    return std::make_unique<RnnRecommender>(params, static_cast<std::size_t>(ckpt.config.g));
}

int run_cli(int argc, char** argv) {
    CLI::App app{"iirnn: hierarchical GRU session-based recommender"};
    app.require_subcommand(1);

    GlobalFlags global;
    app.add_option("--seed", global.seed, "global random seed")
        ->each([&global](const std::string&) { global.seed_set = true; });
    app.add_option("--threads", global.threads, "worker threads (0 = all cores)");
    app.add_flag("--quiet", global.quiet, "suppress diagnostics on stderr");

    // ---- preprocess ----
    auto* pre = app.add_subcommand("preprocess", "segment a raw log into a session corpus");
    std::string pre_input, pre_out, pre_format = "tsv", pre_split = "temporal";
    PreprocessConfig pre_cfg;
    pre->add_option("--input", pre_input, "raw interaction log")->required();
    pre->add_option("--format", pre_format, "tsv | reddit-csv | lastfm-tsv");
    pre->add_option("--gap", pre_cfg.gap, "session inactivity gap in seconds");
    pre->add_option("--L", pre_cfg.max_len, "maximum session length");
    pre->add_option("--train-frac", pre_cfg.train_fraction, "per-user training fraction");
    pre->add_option("--split", pre_split, "temporal | holdout");
    pre->add_option("--out", pre_out, "corpus file to write")->required();

    // ---- synth ----
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic interaction log");
    SynthSpec synth_spec;
    std::string synth_out;
    synth_cmd->add_option("--users", synth_spec.num_users, "number of users");
    synth_cmd->add_option("--sessions", synth_spec.sessions_per_user, "sessions per user");
    synth_cmd->add_option("--items", synth_spec.num_items, "catalogue size");
    synth_cmd->add_option("--min-len", synth_spec.min_session_len, "shortest session");
    synth_cmd->add_option("--max-len", synth_spec.max_session_len, "longest session");
    synth_cmd->add_option("--rho", synth_spec.chain_strength, "inter-session chain strength");
    synth_cmd->add_option("--kappa", synth_spec.coherence, "within-session coherence");
    synth_cmd->add_option("--zipf", synth_spec.zipf_exponent, "popularity skew exponent");
    synth_cmd->add_option("--out", synth_out, "tsv file to write")->required();

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "train a recommender");
    train_cmd->set_help_flag("--help", "print help");  // frees -h for the hidden-width key
    std::string train_config_path, train_log_path;
    TrainConfig flag_cfg;
    train_cmd->add_option("--config", train_config_path, "key = value config file");
    auto* opt_variant = train_cmd->add_option("--variant", flag_cfg.variant, "intra | ii-ap | ii-lhs");
    auto* opt_d = train_cmd->add_option("--d", flag_cfg.d, "embedding width");
    auto* opt_h = train_cmd->add_option("--h", flag_cfg.h, "hidden width");
    auto* opt_g = train_cmd->add_option("--g", flag_cfg.g, "recent session representations");
    auto* opt_lr = train_cmd->add_option("--lr", flag_cfg.lr, "learning rate");
    auto* opt_keep = train_cmd->add_option("--keep_prob", flag_cfg.keep_prob, "dropout keep probability");
    auto* opt_batch = train_cmd->add_option("--batch_size", flag_cfg.batch_size, "mini-batch size");
    auto* opt_epochs = train_cmd->add_option("--max_epochs", flag_cfg.max_epochs, "epoch budget");
    std::uint64_t train_seed = 0;
    auto* opt_seed = train_cmd->add_option("--seed", train_seed, "training seed");
    auto* opt_len = train_cmd->add_option("--L", flag_cfg.L, "maximum session length");
    std::string train_ks, train_positions;
    auto* opt_ks = train_cmd->add_option("--ks", train_ks, "evaluation K list");
    auto* opt_positions = train_cmd->add_option("--positions", train_positions, "position list");
    auto* opt_corpus = train_cmd->add_option("--corpus", flag_cfg.corpus, "preprocessed corpus");
    auto* opt_out = train_cmd->add_option("--out", flag_cfg.out, "checkpoint path");
    auto* opt_clip = train_cmd->add_option("--clip_norm", flag_cfg.clip_norm, "max gradient norm (0 = off)");
    auto* opt_val = train_cmd->add_option("--val_fraction", flag_cfg.val_fraction,
                                          "held-out fraction per user for best-epoch selection");
    train_cmd->add_option("--log", train_log_path, "loss log path (default: <out>.log)");

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a corpus");
    std::string eval_ckpt, eval_corpus, eval_report = "report.csv", eval_cold = "coldstart.csv";
    std::string eval_ks, eval_positions, eval_average = "prediction";
    eval_cmd->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
    eval_cmd->add_option("--corpus", eval_corpus, "preprocessed corpus")->required();
    eval_cmd->add_option("--ks", eval_ks, "K list (default: from the checkpoint)");
    eval_cmd->add_option("--positions", eval_positions, "position list (default: from the checkpoint)");
    eval_cmd->add_option("--report", eval_report, "report csv path");
    eval_cmd->add_option("--coldstart", eval_cold, "coldstart csv path");
    eval_cmd->add_option("--average", eval_average, "prediction | session");

    // ---- baseline ----
    auto* base_cmd = app.add_subcommand("baseline", "train and evaluate classical baselines");
    std::string base_model = "all", base_corpus, base_report = "report.csv", base_cold;
    std::string base_ks = "5,10,20", base_positions = "1,2,3,4,5,20";
    BaselineFlags bpr_flags;
    base_cmd->add_option("--model", base_model,
                         "most-popular | most-recent | item-knn | bpr-mf | all");
    base_cmd->add_option("--corpus", base_corpus, "preprocessed corpus")->required();
    base_cmd->add_option("--ks", base_ks, "K list");
    base_cmd->add_option("--positions", base_positions, "position list");
    base_cmd->add_option("--report", base_report, "report csv path");
    base_cmd->add_option("--coldstart", base_cold, "coldstart csv path");
    base_cmd->add_option("--factors", bpr_flags.factors, "bpr-mf latent factors");
    base_cmd->add_option("--bpr-lr", bpr_flags.lr, "bpr-mf learning rate");
    base_cmd->add_option("--reg", bpr_flags.reg, "bpr-mf regularization");
    base_cmd->add_option("--bpr-epochs", bpr_flags.epochs, "bpr-mf epochs");
    base_cmd->add_option("--negatives", bpr_flags.negatives, "negative samples per positive");

    // ---- coldstart ----
    auto* cold_cmd = app.add_subcommand("coldstart", "per-position recall curves for several models");
    std::string cold_corpus, cold_out = "coldstart.csv", cold_report;
    std::vector<std::string> cold_ckpts;
    std::string cold_baselines, cold_ks = "5,10,20", cold_positions = "1,2,3,4,5,20";
    BaselineFlags cold_bpr;
    cold_cmd->add_option("--corpus", cold_corpus, "preprocessed corpus")->required();
    cold_cmd->add_option("--checkpoint", cold_ckpts, "checkpoint(s) to include")
        ->take_all()
        ->allow_extra_args();
    cold_cmd->add_option("--baselines", cold_baselines, "comma list of baselines to include");
    cold_cmd->add_option("--ks", cold_ks, "K list (must include 5)");
    cold_cmd->add_option("--positions", cold_positions, "position list");
    cold_cmd->add_option("--out", cold_out, "coldstart csv path");
    cold_cmd->add_option("--report", cold_report, "optional full report csv");
    cold_cmd->add_option("--factors", cold_bpr.factors, "bpr-mf latent factors");
    cold_cmd->add_option("--bpr-lr", cold_bpr.lr, "bpr-mf learning rate");
    cold_cmd->add_option("--reg", cold_bpr.reg, "bpr-mf regularization");
    cold_cmd->add_option("--bpr-epochs", cold_bpr.epochs, "bpr-mf epochs");
    cold_cmd->add_option("--negatives", cold_bpr.negatives, "negative samples per positive");

    // ---- stats ----
    auto* stats_cmd = app.add_subcommand("stats", "corpus statistics");
    std::string stats_input, stats_corpus, stats_format = "tsv";
    std::int64_t stats_gap = 3600;
    std::size_t stats_len = 20;
    stats_cmd->add_option("--input", stats_input, "raw interaction log");
    stats_cmd->add_option("--format", stats_format, "tsv | reddit-csv | lastfm-tsv");
    stats_cmd->add_option("--gap", stats_gap, "session inactivity gap in seconds");
    stats_cmd->add_option("--L", stats_len, "maximum session length");
    stats_cmd->add_option("--corpus", stats_corpus, "preprocessed corpus file");

    // global flags may appear after the subcommand name
    for (auto* sub : {pre, synth_cmd, train_cmd, eval_cmd, base_cmd, cold_cmd, stats_cmd})
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    set_quiet(global.quiet);

    if (pre->parsed()) {
        auto events = read_interactions(pre_input, parse_input_format(pre_format));
        info("read " + std::to_string(events.size()) + " interactions");
        auto result = preprocess(std::move(events), pre_cfg);
        if (pre_split == "holdout") {
            result.corpus = hold_one_out_split(result.corpus);
        } else if (pre_split != "temporal") {
            throw ConfigError("unknown split '" + pre_split + "' (expected temporal or holdout)");
        }
        write_corpus(result.corpus, pre_out);
        std::fputs(format_stats(result.pre_split_stats).c_str(), stdout);
        info("wrote " + pre_out);
        return 0;
    }

    if (synth_cmd->parsed()) {
        if (global.seed_set) synth_spec.seed = global.seed;
        write_interactions_tsv(generate(synth_spec), synth_out);
        info("wrote " + synth_out);
        return 0;
    }

    if (train_cmd->parsed()) {
        TrainConfig cfg;
        if (!train_config_path.empty()) cfg = TrainConfig::load(train_config_path);
        if (global.seed_set) cfg.seed = global.seed;
        if (opt_variant->count()) cfg.variant = flag_cfg.variant;
        if (opt_d->count()) cfg.d = flag_cfg.d;
        if (opt_h->count()) cfg.h = flag_cfg.h;
        if (opt_g->count()) cfg.g = flag_cfg.g;
        if (opt_lr->count()) cfg.lr = flag_cfg.lr;
        if (opt_keep->count()) cfg.keep_prob = flag_cfg.keep_prob;
        if (opt_batch->count()) cfg.batch_size = flag_cfg.batch_size;
        if (opt_epochs->count()) cfg.max_epochs = flag_cfg.max_epochs;
        if (opt_seed->count()) cfg.seed = train_seed;
        if (opt_len->count()) cfg.L = flag_cfg.L;
        if (opt_ks->count()) cfg.ks = parse_int_list(train_ks, "ks");
        if (opt_positions->count()) cfg.positions = parse_int_list(train_positions, "positions");
        if (opt_corpus->count()) cfg.corpus = flag_cfg.corpus;
        if (opt_out->count()) cfg.out = flag_cfg.out;
        if (opt_clip->count()) cfg.clip_norm = flag_cfg.clip_norm;
        if (opt_val->count()) cfg.val_fraction = flag_cfg.val_fraction;
        cfg.validate();
        if (cfg.corpus.empty()) throw UsageError("train: --corpus (or a config with one) is required");
        if (cfg.out.empty()) throw UsageError("train: --out (or a config with one) is required");

        auto corpus = load_corpus_file(cfg.corpus);
        auto result = train(cfg, corpus);
        for (const auto& line : result.log_lines) info(line);

        save_checkpoint(result.checkpoint, cfg.out);
        const std::string log_path = train_log_path.empty() ? cfg.out + ".log" : train_log_path;
        {
            std::ofstream log(log_path, std::ios::binary);
            if (!log) throw IoError("cannot open '" + log_path + "' for writing");
            for (const auto& line : result.log_lines) log << line << '\n';
            log << "best_epoch " << result.best_epoch << '\n';
        }
        if (result.aborted) {
            std::fprintf(stderr, "training aborted: %s (kept checkpoint of epoch %d)\n",
                         result.abort_reason.c_str(), result.checkpoint.epoch);
            return 3;
        }
        info("wrote " + cfg.out + " (best epoch " + std::to_string(result.best_epoch) + ")");
        return 0;
    }

    if (eval_cmd->parsed()) {
        auto corpus = load_corpus_file(eval_corpus);
        auto ckpt = load_checkpoint(eval_ckpt);
        verify_checkpoint_vocab(ckpt, corpus.vocab);

        EvalOptions opts;
        opts.ks = eval_ks.empty() ? ckpt.config.ks : parse_int_list(eval_ks, "ks");
        opts.positions =
            eval_positions.empty() ? ckpt.config.positions : parse_int_list(eval_positions, "positions");
        opts.threads = global.threads;
        if (eval_average == "session") opts.per_session_average = true;
        else if (eval_average != "prediction")
            throw ConfigError("unknown averaging mode '" + eval_average + "'");

        auto params = std::make_shared<const ModelParams>(std::move(ckpt.params));
        RnnRecommender model(params, static_cast<std::size_t>(ckpt.config.g));
        auto report = evaluate(model, corpus, opts);
        emit_report({report}, eval_report);
        emit_coldstart({report}, eval_cold);
        std::fputs(render_report_table(report).c_str(), stdout);
        info("wrote " + eval_report + " and " + eval_cold);
        return 0;
    }

    if (base_cmd->parsed() || cold_cmd->parsed()) {
        const bool is_cold = cold_cmd->parsed();
        const std::string corpus_path = is_cold ? cold_corpus : base_corpus;
        auto corpus = load_corpus_file(corpus_path);

        EvalOptions opts;
        opts.ks = parse_int_list(is_cold ? cold_ks : base_ks, "ks");
        opts.positions = parse_int_list(is_cold ? cold_positions : base_positions, "positions");
        opts.threads = global.threads;
        std::size_t kmax = 0;
        for (int k : opts.ks) kmax = std::max(kmax, static_cast<std::size_t>(k));

        std::vector<std::string> baseline_names;
        if (is_cold) {
            if (!cold_baselines.empty()) {
                std::size_t start = 0;
                while (start <= cold_baselines.size()) {
                    std::size_t pos = cold_baselines.find(',', start);
                    if (pos == std::string::npos) pos = cold_baselines.size();
                    if (pos > start) baseline_names.push_back(cold_baselines.substr(start, pos - start));
                    start = pos + 1;
                }
            }
        } else if (base_model == "all") {
            baseline_names = {"most-popular", "most-recent", "item-knn", "bpr-mf"};
        } else {
            baseline_names = {base_model};
        }

        const BaselineFlags& bpr = is_cold ? cold_bpr : bpr_flags;
        std::vector<ModelReport> reports;
        if (is_cold) {
            for (const auto& path : cold_ckpts) {
                auto model = load_model(path, corpus);
                info("evaluating " + model->name());
                reports.push_back(evaluate(*model, corpus, opts));
            }
        }
        for (const auto& name : baseline_names) {
            // the matrix-factorization protocol uses the hold-one-out split
            const Corpus eval_corpus_local =
                name == "bpr-mf" ? hold_one_out_split(corpus) : corpus;
            auto model = make_baseline(name, eval_corpus_local, kmax, global.seed, bpr);
            info("evaluating " + name);
            reports.push_back(evaluate(*model, eval_corpus_local, opts));
        }

        if (is_cold) {
            emit_coldstart(reports, cold_out);
            if (!cold_report.empty()) emit_report(reports, cold_report);
            info("wrote " + cold_out);
        } else {
            emit_report(reports, base_report);
            if (!base_cold.empty()) emit_coldstart(reports, base_cold);
            info("wrote " + base_report);
        }
        for (const auto& r : reports) std::fputs(render_report_table(r).c_str(), stdout);
        return 0;
    }

    if (stats_cmd->parsed()) {
        if (!stats_corpus.empty()) {
            auto corpus = load_corpus_file(stats_corpus);
            std::fputs(format_stats(corpus_stats(corpus)).c_str(), stdout);
        } else if (!stats_input.empty()) {
            PreprocessConfig cfg;
            cfg.gap = stats_gap;
            cfg.max_len = stats_len;
            auto events = read_interactions(stats_input, parse_input_format(stats_format));
            auto result = preprocess(std::move(events), cfg);
            std::fputs(format_stats(result.pre_split_stats).c_str(), stdout);
        } else {
            throw UsageError("stats: one of --input or --corpus is required");
        }
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\nrun 'iirnn --help' for usage\n", e.what());
        return 1;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\nrun 'iirnn --help' for usage\n", e.what());
        return 1;
    } catch (const TrainingError& e) {
        std::fprintf(stderr, "training error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
