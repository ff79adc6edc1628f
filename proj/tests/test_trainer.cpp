#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "iirnn/trainer.hpp"

using namespace iirnn;
using namespace testutil;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

Corpus overfit_corpus() {
    // three users with rigid per-user patterns
    return make_corpus(6,
                       {{{1, 2, 3}, {1, 2, 3}, {1, 2, 3}, {1, 2, 3}},
                        {{4, 5, 6}, {4, 5, 6}, {4, 5, 6}, {4, 5, 6}},
                        {{2, 4, 6}, {2, 4, 6}, {2, 4, 6}, {2, 4, 6}}},
                       {{{1, 2, 3}}, {{4, 5, 6}}, {{2, 4, 6}}});
}

double parse_train_loss(const std::string& line) {
    const auto pos = line.find("train_loss ");
    REQUIRE(pos != std::string::npos);
    return std::stod(line.substr(pos + 11));
}

}  // namespace

TEST_CASE("config round-trips through text with strict keys") {
    TrainConfig cfg;
    cfg.variant = "ii-lhs";
    cfg.d = 12;
    cfg.h = 24;
    cfg.lr = 0.0025f;
    cfg.ks = {5, 10};
    cfg.corpus = "corpus.txt";
    auto parsed = TrainConfig::parse(cfg.serialize());
    CHECK(parsed.serialize() == cfg.serialize());
    CHECK(parsed.h == 24);
    CHECK(parsed.ks == std::vector<int>{5, 10});

    CHECK_THROWS_AS(TrainConfig::parse("bogus_key = 1\n"), ConfigError);
    CHECK_THROWS_AS(TrainConfig::parse("d ten\n"), ConfigError);
    TrainConfig bad;
    bad.keep_prob = 1.5f;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("batch plan interleaves users round-robin") {
    const std::vector<int> sessions{2, 2};
    Rng rng(3);
    auto plan = make_batch_plan(sessions, 2, rng);
    REQUIRE(plan.size() == 2);
    for (const auto& batch : plan) {
        REQUIRE(batch.size() == 2);
        CHECK(batch[0].user != batch[1].user);
    }
    CHECK(plan[0][0].session == 0);
    CHECK(plan[0][1].session == 0);
    CHECK(plan[1][0].session == 1);
    CHECK(plan[1][1].session == 1);
}

TEST_CASE("batch plan with batch size one walks users sequentially") {
    const std::vector<int> sessions{3, 2, 4};
    Rng rng(11);
    auto plan = make_batch_plan(sessions, 1, rng);
    REQUIRE(plan.size() == 9);
    int current_user = plan[0][0].user;
    int expected_session = 0;
    for (const auto& batch : plan) {
        REQUIRE(batch.size() == 1);
        if (batch[0].user != current_user) {
            current_user = batch[0].user;
            expected_session = 0;
        }
        CHECK(batch[0].session == expected_session);
        ++expected_session;
    }
}

TEST_CASE("batch plan properties hold over 100 random corpora") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(mix_seed(606, seed));
        const int users = 1 + static_cast<int>(rng.below(12));
        std::vector<int> sessions(users);
        std::size_t total = 0;
        for (auto& s : sessions) {
            s = static_cast<int>(rng.below(7));
            total += static_cast<std::size_t>(s);
        }
        const int batch_size = 1 + static_cast<int>(rng.below(5));
        auto plan = make_batch_plan(sessions, batch_size, rng);

        std::set<std::pair<int, int>> seen;
        std::vector<int> last_session(users, -1);
        for (const auto& batch : plan) {
            CHECK(batch.size() <= static_cast<std::size_t>(batch_size));
            std::set<int> batch_users;
            for (const auto& entry : batch) {
                CHECK(seen.insert({entry.user, entry.session}).second);
                CHECK(batch_users.insert(entry.user).second);  // user variety
                CHECK(entry.session == last_session[entry.user] + 1);  // recency order
                last_session[entry.user] = entry.session;
            }
        }
        CHECK(seen.size() == total);  // exactly once per session
    }
}

TEST_CASE("zero-epoch training returns the initialization") {
    auto corpus = overfit_corpus();
    TrainConfig cfg;
    cfg.variant = "intra";
    cfg.d = 4;
    cfg.h = 4;
    cfg.max_epochs = 0;
    cfg.seed = 77;
    auto result = train(cfg, corpus);
    CHECK(result.checkpoint.epoch == 0);
    CHECK(result.checkpoint.adam_t == 0);
    CHECK(result.log_lines.empty());

    // equals init_model_params under the trainer's seed derivation
    Rng master(cfg.seed);
    const std::uint64_t seed_init = master.next_u64();
    auto expected = init_model_params(Variant::IntraOnly, 6, 4, 4, seed_init);
    CHECK(result.checkpoint.params.embeddings.data == expected.embeddings.data);
    CHECK(result.checkpoint.params.output_w.data == expected.output_w.data);
}

TEST_CASE("training on a tiny corpus at least halves the epoch loss") {
    auto corpus = overfit_corpus();
    TrainConfig cfg;
    cfg.variant = "ii-lhs";
    cfg.d = 12;
    cfg.h = 12;
    cfg.g = 4;
    cfg.lr = 0.01f;
    cfg.batch_size = 2;
    cfg.max_epochs = 30;
    cfg.seed = 5;
    cfg.val_fraction = 0.0;
    auto result = train(cfg, corpus);
    REQUIRE(result.log_lines.size() == 30);
    const double first = parse_train_loss(result.log_lines.front());
    const double last = parse_train_loss(result.log_lines.back());
    CHECK(last < 0.5 * first);
    CHECK(result.checkpoint.epoch == 30);
}

TEST_CASE("identical config and seed reproduce the checkpoint byte for byte") {
    auto corpus = overfit_corpus();
    TrainConfig cfg;
    cfg.variant = "ii-ap";
    cfg.d = 6;
    cfg.h = 6;
    cfg.max_epochs = 3;
    cfg.seed = 99;
    const std::string path_a = "/tmp/iirnn_ckpt_a.bin";
    const std::string path_b = "/tmp/iirnn_ckpt_b.bin";

    auto ra = train(cfg, corpus);
    save_checkpoint(ra.checkpoint, path_a);
    auto rb = train(cfg, corpus);
    save_checkpoint(rb.checkpoint, path_b);
    CHECK(ra.log_lines == rb.log_lines);
    CHECK(slurp(path_a) == slurp(path_b));
    std::remove(path_a.c_str());
    std::remove(path_b.c_str());
}

TEST_CASE("checkpoints round-trip bitwise") {
    auto corpus = overfit_corpus();
    TrainConfig cfg;
    cfg.variant = "ii-lhs";
    cfg.d = 5;
    cfg.h = 7;
    cfg.max_epochs = 2;
    auto result = train(cfg, corpus);
    result.checkpoint.vocab_hash = corpus.vocab.hash();

    const std::string path = "/tmp/iirnn_ckpt_rt.bin";
    const std::string path2 = "/tmp/iirnn_ckpt_rt2.bin";
    save_checkpoint(result.checkpoint, path);
    auto loaded = load_checkpoint(path);
    save_checkpoint(loaded, path2);
    CHECK(slurp(path) == slurp(path2));

    CHECK(loaded.epoch == result.checkpoint.epoch);
    CHECK(loaded.adam_t == result.checkpoint.adam_t);
    CHECK(loaded.params.embeddings.data == result.checkpoint.params.embeddings.data);
    CHECK(loaded.params.inter.U_c.data == result.checkpoint.params.inter.U_c.data);
    REQUIRE(loaded.adam_m.size() == result.checkpoint.adam_m.size());
    for (std::size_t i = 0; i < loaded.adam_m.size(); ++i)
        CHECK(loaded.adam_m[i].data == result.checkpoint.adam_m[i].data);
    CHECK_NOTHROW(verify_checkpoint_vocab(loaded, corpus.vocab));
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("truncated checkpoints are rejected without partial state") {
    auto corpus = overfit_corpus();
    TrainConfig cfg;
    cfg.d = 4;
    cfg.h = 4;
    cfg.max_epochs = 1;
    auto result = train(cfg, corpus);
    const std::string path = "/tmp/iirnn_ckpt_trunc.bin";
    save_checkpoint(result.checkpoint, path);
    auto bytes = slurp(path);
    for (const std::size_t cut : {bytes.size() - 5, bytes.size() / 2, std::size_t(3)}) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(cut));
        out.close();
        CHECK_THROWS_AS(load_checkpoint(path), FormatError);
    }
    // flipped byte fails the checksum
    {
        auto corrupted = bytes;
        corrupted[corrupted.size() / 2] ^= 0x40;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(corrupted.data(), static_cast<std::streamsize>(corrupted.size()));
    }
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
    std::remove(path.c_str());
}

TEST_CASE("checkpoints refuse to run against a different vocabulary") {
    auto corpus = overfit_corpus();
    TrainConfig cfg;
    cfg.d = 4;
    cfg.h = 4;
    cfg.max_epochs = 1;
    auto result = train(cfg, corpus);
    result.checkpoint.vocab_hash = corpus.vocab.hash();

    Corpus other = corpus;
    other.vocab.add("another-item");
    CHECK_THROWS_AS(verify_checkpoint_vocab(result.checkpoint, other.vocab), FormatError);
}

TEST_CASE("training aborts on a non-finite loss and keeps the last good checkpoint") {
    auto corpus = overfit_corpus();
    TrainConfig cfg;
    cfg.d = 4;
    cfg.h = 4;
    cfg.max_epochs = 3;
    cfg.lr = 1e38f;  // first step blows parameters past float range
    auto result = train(cfg, corpus);
    CHECK(result.aborted);
    CHECK(result.abort_reason.find("non-finite") != std::string::npos);
    CHECK(result.checkpoint.epoch == 0);
    for (float v : result.checkpoint.params.embeddings.data) CHECK(std::isfinite(v));
}

TEST_CASE("held-out validation picks the best epoch") {
    // users with enough sessions for a floor(0.05 n) holdout of one session
    std::vector<std::vector<std::vector<ItemId>>> train_part(2), test_part(2);
    for (int u = 0; u < 2; ++u) {
        for (int s = 0; s < 25; ++s)
            train_part[u].push_back(u == 0 ? std::vector<ItemId>{1, 2, 3}
                                           : std::vector<ItemId>{4, 5, 6});
        test_part[u] = {u == 0 ? std::vector<ItemId>{1, 2, 3} : std::vector<ItemId>{4, 5, 6}};
    }
    auto corpus = make_corpus(6, train_part, test_part);
    TrainConfig cfg;
    cfg.d = 6;
    cfg.h = 6;
    cfg.max_epochs = 4;
    cfg.lr = 0.01f;
    auto result = train(cfg, corpus);
    REQUIRE(result.log_lines.size() == 4);
    CHECK(result.log_lines[0].find("val_loss") != std::string::npos);
    CHECK(result.best_epoch >= 1);
    CHECK(result.best_epoch <= 4);
    // learnable pattern: later epochs should win
    CHECK(result.best_epoch == 4);
}
