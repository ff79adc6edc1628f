#include "iirnn/baselines.hpp"

#include <algorithm>
#include <set>

#include "iirnn/error.hpp"
#include "iirnn/log.hpp"

namespace iirnn {

PopularityTable build_popularity(const Corpus& corpus) {
    PopularityTable table;
    table.counts.assign(corpus.vocab.size() + 1, 0);
    for (const auto& user : corpus.users)
        for (const auto& s : user.train_sessions)
            for (ItemId id : s.items) ++table.counts[static_cast<std::size_t>(id)];
    table.order.resize(corpus.vocab.size());
    for (std::size_t i = 0; i < table.order.size(); ++i)
        table.order[i] = static_cast<ItemId>(i + 1);
    std::sort(table.order.begin(), table.order.end(), [&](ItemId a, ItemId b) {
        const auto ca = table.counts[static_cast<std::size_t>(a)];
        const auto cb = table.counts[static_cast<std::size_t>(b)];
        if (ca != cb) return ca > cb;
        return a < b;
    });
    return table;
}

std::vector<ItemId> most_popular_recommend(const PopularityTable& table, std::size_t k) {
    k = std::min(k, table.order.size());
    return {table.order.begin(), table.order.begin() + k};
}

RecentStack make_recent_stack(std::size_t k, std::size_t num_items, Rng& rng) {
    if (k > num_items)
        throw ConfigError("recent stack size " + std::to_string(k) +
                          " exceeds catalogue size " + std::to_string(num_items));
    RecentStack stack;
    for (std::uint64_t idx : rng.sample_without_replacement(num_items, k))
        stack.items.push_back(static_cast<ItemId>(idx + 1));
    return stack;
}

void most_recent_step(RecentStack& stack, ItemId observed) {
    auto it = std::find(stack.items.begin(), stack.items.end(), observed);
    if (it != stack.items.end()) {
        std::rotate(stack.items.begin(), it, it + 1);
    } else {
        stack.items.pop_back();
        stack.items.insert(stack.items.begin(), observed);
    }
}

CoOccurrenceMatrix build_cooccurrence(const Corpus& corpus) {
    CoOccurrenceMatrix matrix;
    std::vector<ItemId> distinct;
    for (const auto& user : corpus.users) {
        for (const auto& s : user.train_sessions) {
            distinct.assign(s.items.begin(), s.items.end());
            std::sort(distinct.begin(), distinct.end());
            distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
            for (std::size_t a = 0; a < distinct.size(); ++a)
                for (std::size_t b = a + 1; b < distinct.size(); ++b)
                    matrix.add(distinct[a], distinct[b]);
        }
    }
    return matrix;
}

std::vector<ItemId> item_knn_recommend(const CoOccurrenceMatrix& matrix,
                                       const PopularityTable& popularity, ItemId last_item,
                                       std::size_t k) {
    const std::size_t n = popularity.order.size();
    k = std::min(k, n);
    if (last_item < 1 || static_cast<std::size_t>(last_item) > n) {
        warn("item-knn: unseen item " + std::to_string(last_item) +
             ", falling back to most-popular");
        return most_popular_recommend(popularity, k);
    }

    std::vector<std::pair<ItemId, std::uint32_t>> scored;
    for (std::size_t i = 1; i <= n; ++i) {
        const ItemId id = static_cast<ItemId>(i);
        const std::uint32_t c = matrix.get(last_item, id);
        if (c > 0) scored.emplace_back(id, c);
    }
    if (scored.empty()) {
        warn("item-knn: item " + std::to_string(last_item) +
             " co-occurs with nothing, falling back to most-popular");
        return most_popular_recommend(popularity, k);
    }
    std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        const auto pa = popularity.counts[static_cast<std::size_t>(a.first)];
        const auto pb = popularity.counts[static_cast<std::size_t>(b.first)];
        if (pa != pb) return pa > pb;
        return a.first < b.first;
    });

    std::vector<ItemId> recs;
    recs.reserve(k);
    for (const auto& [id, c] : scored) {
        if (recs.size() == k) break;
        recs.push_back(id);
    }
    if (recs.size() < k) {
        // pad with the popularity order, skipping items already listed
        std::set<ItemId> have(recs.begin(), recs.end());
        for (ItemId id : popularity.order) {
            if (recs.size() == k) break;
            if (!have.count(id)) recs.push_back(id);
        }
    }
    return recs;
}

MfFactors bpr_mf_train(const Corpus& holdout_corpus, const BprConfig& cfg) {
    const std::size_t num_items = holdout_corpus.vocab.size();
    MfFactors mf;
    mf.factors = cfg.factors;
    mf.num_items = num_items;
    mf.num_users = holdout_corpus.users.size();
    for (std::size_t u = 0; u < holdout_corpus.users.size(); ++u)
        mf.user_index.emplace(holdout_corpus.users[u].user, u);

    Rng rng(cfg.seed);
    mf.user_f.resize(mf.num_users * cfg.factors);
    mf.item_f.resize((num_items + 1) * cfg.factors);
    mf.item_bias.assign(num_items + 1, 0.0f);
    for (auto& v : mf.user_f) v = static_cast<float>(rng.uniform(-0.1, 0.1));
    for (auto& v : mf.item_f) v = static_cast<float>(rng.uniform(-0.1, 0.1));

    // distinct (user, item) positives from the training sessions
    std::vector<std::vector<ItemId>> observed(mf.num_users);
    std::vector<std::pair<std::uint32_t, ItemId>> positives;
    for (std::size_t u = 0; u < holdout_corpus.users.size(); ++u) {
        std::set<ItemId> items;
        for (const auto& s : holdout_corpus.users[u].train_sessions)
            items.insert(s.items.begin(), s.items.end());
        observed[u].assign(items.begin(), items.end());
        for (ItemId i : items) positives.emplace_back(static_cast<std::uint32_t>(u), i);
    }

    std::vector<float> gp(cfg.factors), gi(cfg.factors), gj(cfg.factors);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(positives);
        for (const auto& [u, i] : positives) {
            const auto& seen = observed[u];
            if (seen.size() >= num_items) continue;  // no negative item exists
            for (int neg = 0; neg < cfg.negatives; ++neg) {
                ItemId j;
                do {
                    j = static_cast<ItemId>(rng.below(num_items) + 1);
                } while (std::binary_search(seen.begin(), seen.end(), j));

                float* pu = mf.user_f.data() + static_cast<std::size_t>(u) * cfg.factors;
                float* qi = mf.item_f.data() + static_cast<std::size_t>(i) * cfg.factors;
                float* qj = mf.item_f.data() + static_cast<std::size_t>(j) * cfg.factors;
                float gbi, gbj;
                bpr_triple_loss<float>(pu, qi, qj, mf.item_bias[i], mf.item_bias[j],
                                       cfg.factors, cfg.reg, gp.data(), gi.data(), gj.data(),
                                       &gbi, &gbj);
                for (int f = 0; f < cfg.factors; ++f) {
                    pu[f] -= cfg.lr * gp[f];
                    qi[f] -= cfg.lr * gi[f];
                    qj[f] -= cfg.lr * gj[f];
                }
                mf.item_bias[i] -= cfg.lr * gbi;
                mf.item_bias[j] -= cfg.lr * gbj;
            }
        }
    }
    for (float v : mf.user_f)
        if (!std::isfinite(v)) throw TrainingError("bpr_mf_train: user factors diverged");
    for (float v : mf.item_f)
        if (!std::isfinite(v)) throw TrainingError("bpr_mf_train: item factors diverged");
    return mf;
}

std::vector<ItemId> bpr_mf_recommend(const MfFactors& mf, std::size_t user_index,
                                     std::size_t k) {
    k = std::min(k, mf.num_items);
    std::vector<ItemId> ids(mf.num_items);
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<ItemId>(i + 1);
    std::partial_sort(ids.begin(), ids.begin() + k, ids.end(), [&](ItemId a, ItemId b) {
        const float sa = mf.score(user_index, a), sb = mf.score(user_index, b);
        if (sa != sb) return sa > sb;
        return a < b;
    });
    ids.resize(k);
    return ids;
}

}  // namespace iirnn
