#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "helpers.hpp"
#include "iirnn/baselines.hpp"

using namespace iirnn;
using namespace testutil;

TEST_CASE("most popular ranks by count with ascending-id ties") {
    // counts: item1 x5, item2 x3, item3 x1
    auto corpus = make_corpus(
        3, {{{1, 2, 1}, {1, 3, 1}, {1, 2, 1}, {2, 1}}}, {{}});
    // tally: 1 appears 5x? sessions: [1,2,1],[1,3,1],[1,2,1],[2,1] -> item1: 2+2+2+1 = 7
    auto table = build_popularity(corpus);
    CHECK(table.counts[1] == 7);
    CHECK(table.counts[2] == 3);
    CHECK(table.counts[3] == 1);
    auto top2 = most_popular_recommend(table, 2);
    CHECK(top2 == std::vector<ItemId>{1, 2});

    auto all = most_popular_recommend(table, 3);
    CHECK(all == std::vector<ItemId>{1, 2, 3});

    // equal counts fall back to ascending ids
    auto tied = make_corpus(3, {{{1, 2}, {2, 3}, {3, 1}}}, {{}});
    auto tied_table = build_popularity(tied);
    CHECK(most_popular_recommend(tied_table, 3) == std::vector<ItemId>{1, 2, 3});
}

TEST_CASE("recent stack follows move-to-front semantics") {
    RecentStack stack{{1, 2, 3}};
    most_recent_step(stack, 4);
    CHECK(stack.items == std::vector<ItemId>{4, 1, 2});
    stack.items = {1, 2, 3};
    most_recent_step(stack, 2);
    CHECK(stack.items == std::vector<ItemId>{2, 1, 3});
    stack.items = {1, 2, 3};
    most_recent_step(stack, 1);
    CHECK(stack.items == std::vector<ItemId>{1, 2, 3});
}

TEST_CASE("recent stack stays at k distinct items with the observation on top") {
    Rng rng(5);
    auto stack = make_recent_stack(4, 10, rng);
    CHECK(stack.items.size() == 4);
    for (std::uint64_t step = 0; step < 50; ++step) {
        const ItemId observed = static_cast<ItemId>(1 + rng.below(10));
        most_recent_step(stack, observed);
        CHECK(stack.items.size() == 4);
        CHECK(stack.items.front() == observed);
        std::set<ItemId> distinct(stack.items.begin(), stack.items.end());
        CHECK(distinct.size() == 4);
    }
}

TEST_CASE("item-knn on the worked fixture") {
    auto corpus = make_corpus(3, {{{1, 2}, {1, 2, 3}, {2, 3}}}, {{}});
    auto matrix = build_cooccurrence(corpus);
    auto popularity = build_popularity(corpus);
    CHECK(matrix.get(1, 2) == 2);
    CHECK(matrix.get(2, 3) == 2);
    CHECK(matrix.get(1, 3) == 1);
    auto recs = item_knn_recommend(matrix, popularity, 2, 2);
    CHECK(recs == std::vector<ItemId>{1, 3});
}

TEST_CASE("item-knn falls back to most popular for unknown context") {
    auto corpus = make_corpus(4, {{{1, 2}, {2, 1}, {1, 2}}}, {{}});
    auto matrix = build_cooccurrence(corpus);
    auto popularity = build_popularity(corpus);
    // item 4 never co-occurs; item 99 is out of vocabulary
    CHECK(item_knn_recommend(matrix, popularity, 4, 2) == most_popular_recommend(popularity, 2));
    CHECK(item_knn_recommend(matrix, popularity, 99, 2) == most_popular_recommend(popularity, 2));
    // short co-occurrence lists are padded from the popularity order
    auto padded = item_knn_recommend(matrix, popularity, 1, 3);
    CHECK(padded.size() == 3);
    CHECK(padded[0] == 2);
    std::set<ItemId> distinct(padded.begin(), padded.end());
    CHECK(distinct.size() == 3);
}

TEST_CASE("co-occurrence counts agree with a brute-force pair scan") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(mix_seed(31337, seed));
        auto corpus = random_corpus(rng, 6, 4, 7, 6);
        auto matrix = build_cooccurrence(corpus);
        for (ItemId a = 1; a <= 7; ++a) {
            for (ItemId b = 1; b <= 7; ++b) {
                std::uint32_t want = 0;
                if (a != b) {
                    for (const auto& user : corpus.users) {
                        for (const auto& s : user.train_sessions) {
                            bool has_a = false, has_b = false;
                            for (ItemId id : s.items) {
                                has_a |= id == a;
                                has_b |= id == b;
                            }
                            if (has_a && has_b) ++want;
                        }
                    }
                }
                CHECK(matrix.get(a, b) == want);
                CHECK(matrix.get(a, b) == matrix.get(b, a));
            }
        }
    }
}

TEST_CASE("bpr triple loss at zero scores equals ln 2") {
    const double pu[3] = {0, 0, 0}, qi[3] = {0, 0, 0}, qj[3] = {0, 0, 0};
    const double loss = bpr_triple_loss<double>(pu, qi, qj, 0.0, 0.0, 3, 0.0, nullptr, nullptr,
                                                nullptr, nullptr, nullptr);
    CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("bpr triple gradients match finite differences") {
    Rng rng(71);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        double pu[3], qi[3], qj[3];
        for (int f = 0; f < 3; ++f) {
            pu[f] = rng.uniform(-1, 1);
            qi[f] = rng.uniform(-1, 1);
            qj[f] = rng.uniform(-1, 1);
        }
        const double bi = rng.uniform(-1, 1), bj = rng.uniform(-1, 1), reg = 0.01;

        double gp[3], gi[3], gj[3], gbi, gbj;
        bpr_triple_loss<double>(pu, qi, qj, bi, bj, 3, reg, gp, gi, gj, &gbi, &gbj);

        NamedArraysD point, analytic;
        auto pack = [](const double* v, std::size_t n) {
            DenseArrayT<double> a({n});
            for (std::size_t i = 0; i < n; ++i) a.data[i] = v[i];
            return a;
        };
        point.emplace_back("pu", pack(pu, 3));
        point.emplace_back("qi", pack(qi, 3));
        point.emplace_back("qj", pack(qj, 3));
        point.emplace_back("bi", pack(&bi, 1));
        point.emplace_back("bj", pack(&bj, 1));
        analytic.emplace_back("pu", pack(gp, 3));
        analytic.emplace_back("qi", pack(gi, 3));
        analytic.emplace_back("qj", pack(gj, 3));
        analytic.emplace_back("bi", pack(&gbi, 1));
        analytic.emplace_back("bj", pack(&gbj, 1));

        const double err = gradient_check(
            [&](const NamedArraysD& a) {
                return bpr_triple_loss<double>(a[0].second.data.data(), a[1].second.data.data(),
                                               a[2].second.data.data(), a[3].second.data[0],
                                               a[4].second.data[0], 3, reg, nullptr, nullptr,
                                               nullptr, nullptr, nullptr);
            },
            point, analytic, 1e-4);
        worst = std::max(worst, err);
    }
    CHECK(worst < 1e-4);
}

namespace {

Corpus bpr_fixture() {
    // user1 only ever touches item 1; the rest spread across the catalogue
    return make_corpus(5,
                       {{{1, 2, 1}, {1, 3, 1}, {1, 2, 1, 2}},
                        {{2, 3}, {3, 4}, {4, 5}},
                        {{5, 4}, {3, 5}, {2, 5}}},
                       {{{1, 2}}, {{2, 3}}, {{5, 3}}});
}

}  // namespace

TEST_CASE("bpr training ranks a user's sole item first") {
    auto corpus = make_corpus(5,
                              {{{1, 1, 1}, {1, 1}, {1, 1, 1}},
                               {{2, 3}, {3, 4}, {4, 5}},
                               {{5, 4}, {3, 5}, {2, 5}}},
                              {{}, {}, {}});
    auto holdout = hold_one_out_split(corpus);
    BprConfig cfg;
    cfg.factors = 8;
    cfg.epochs = 40;
    cfg.seed = 7;
    auto mf = bpr_mf_train(holdout, cfg);
    auto recs = bpr_mf_recommend(mf, 0, 1);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0] == 1);
}

TEST_CASE("bpr validation loss decreases with training") {
    auto corpus = bpr_fixture();
    auto holdout = hold_one_out_split(corpus);

    // fixed validation triples drawn once
    Rng rng(99);
    struct Triple { std::size_t u; ItemId i, j; };
    std::vector<Triple> triples;
    for (int t = 0; t < 200; ++t) {
        const std::size_t u = rng.below(holdout.users.size());
        std::set<ItemId> seen;
        for (const auto& s : holdout.users[u].train_sessions)
            seen.insert(s.items.begin(), s.items.end());
        if (seen.empty()) continue;
        std::vector<ItemId> pos(seen.begin(), seen.end());
        const ItemId i = pos[rng.below(pos.size())];
        ItemId j;
        do {
            j = static_cast<ItemId>(1 + rng.below(5));
        } while (seen.count(j));
        triples.push_back({u, i, j});
    }
    REQUIRE(!triples.empty());

    auto mean_loss = [&](const MfFactors& mf) {
        double total = 0.0;
        for (const auto& t : triples) {
            const double diff = mf.score(t.u, t.i) - mf.score(t.u, t.j);
            total += -std::log(1.0 / (1.0 + std::exp(-diff)));
        }
        return total / static_cast<double>(triples.size());
    };

    BprConfig cfg;
    cfg.factors = 8;
    cfg.seed = 3;
    cfg.epochs = 0;
    const double before = mean_loss(bpr_mf_train(holdout, cfg));
    cfg.epochs = 30;
    const double after = mean_loss(bpr_mf_train(holdout, cfg));
    CHECK(after < before);
}

TEST_CASE("bpr recommendations are constant and bias-shift invariant") {
    auto corpus = bpr_fixture();
    auto holdout = hold_one_out_split(corpus);
    BprConfig cfg;
    cfg.factors = 4;
    cfg.epochs = 5;
    auto mf = bpr_mf_train(holdout, cfg);

    const auto first = bpr_mf_recommend(mf, 1, 5);
    for (int repeat = 0; repeat < 3; ++repeat) CHECK(bpr_mf_recommend(mf, 1, 5) == first);

    auto shifted = mf;
    for (auto& b : shifted.item_bias) b += 3.25f;
    CHECK(bpr_mf_recommend(shifted, 1, 5) == first);

    // zero factors reduce the ranking to the biases
    MfFactors plain;
    plain.factors = 2;
    plain.num_users = 1;
    plain.num_items = 3;
    plain.user_f.assign(2, 0.0f);
    plain.item_f.assign(8, 0.0f);
    plain.item_bias = {0.0f, 1.0f, 0.5f, 0.0f};
    CHECK(bpr_mf_recommend(plain, 0, 2) == std::vector<ItemId>{1, 2});
}
