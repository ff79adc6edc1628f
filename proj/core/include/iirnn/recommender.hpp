#pragma once

#include <memory>
#include <string>
#include <vector>

#include "iirnn/baselines.hpp"
#include "iirnn/corpus.hpp"
#include "iirnn/nets.hpp"

namespace iirnn {

// Teacher-forced evaluation contract. The harness drives, per test session:
// begin_session, then for each prediction step observe(previous item) and
// recommend(k) before the target is revealed, a final observe of the last
// item, then end_session. clone() provides an independent instance so users
// can be evaluated in parallel.
class Recommender {
  public:
    virtual ~Recommender() = default;
    virtual std::string name() const = 0;
    virtual std::unique_ptr<Recommender> clone() const = 0;
    virtual void begin_user(std::size_t user_index, const UserHistory& user) = 0;
    virtual void begin_session(const Session& session) = 0;
    virtual void observe(ItemId item) = 0;
    virtual std::vector<ItemId> recommend(std::size_t k) = 0;
    virtual void end_session() = 0;
};

// Intra-session RNN and both inter-session variants. begin_user replays the
// training sessions into the representation buffer (most recent g); test
// sessions append their representations as they complete.
class RnnRecommender : public Recommender {
  public:
    RnnRecommender(std::shared_ptr<const ModelParams> params, std::size_t recent_limit);

    std::string name() const override;
    std::unique_ptr<Recommender> clone() const override;
    void begin_user(std::size_t user_index, const UserHistory& user) override;
    void begin_session(const Session& session) override;
    void observe(ItemId item) override;
    std::vector<ItemId> recommend(std::size_t k) override;
    void end_session() override;

  private:
    void push_session_repr(const std::vector<ItemId>& items, std::int64_t start_time,
                           const std::vector<float>& final_hidden);

    std::shared_ptr<const ModelParams> params_;
    ReprBuffer buffer_;
    std::vector<float> state_;
    std::vector<ItemId> current_items_;
    std::int64_t current_start_ = 0;
};

class MostPopularRecommender : public Recommender {
  public:
    explicit MostPopularRecommender(std::shared_ptr<const PopularityTable> table)
        : table_(std::move(table)) {}
    std::string name() const override { return "most-popular"; }
    std::unique_ptr<Recommender> clone() const override {
        return std::make_unique<MostPopularRecommender>(table_);
    }
    void begin_user(std::size_t, const UserHistory&) override {}
    void begin_session(const Session&) override {}
    void observe(ItemId) override {}
    std::vector<ItemId> recommend(std::size_t k) override {
        return most_popular_recommend(*table_, k);
    }
    void end_session() override {}

  private:
    std::shared_ptr<const PopularityTable> table_;
};

// Stack of the k most recent items, seeded per user with random distinct
// items; k is fixed at construction to the largest list the harness asks for.
class MostRecentRecommender : public Recommender {
  public:
    MostRecentRecommender(std::size_t stack_size, std::size_t num_items, std::uint64_t seed)
        : stack_size_(stack_size), num_items_(num_items), seed_(seed) {}
    std::string name() const override { return "most-recent"; }
    std::unique_ptr<Recommender> clone() const override {
        return std::make_unique<MostRecentRecommender>(stack_size_, num_items_, seed_);
    }
    void begin_user(std::size_t user_index, const UserHistory&) override {
        Rng rng(mix_seed(seed_, user_index));
        stack_ = make_recent_stack(stack_size_, num_items_, rng);
    }
    void begin_session(const Session&) override {}
    void observe(ItemId item) override { most_recent_step(stack_, item); }
    std::vector<ItemId> recommend(std::size_t k) override {
        k = std::min(k, stack_.items.size());
        return {stack_.items.begin(), stack_.items.begin() + k};
    }
    void end_session() override {}

  private:
    std::size_t stack_size_, num_items_;
    std::uint64_t seed_;
    RecentStack stack_;
};

class ItemKnnRecommender : public Recommender {
  public:
    ItemKnnRecommender(std::shared_ptr<const CoOccurrenceMatrix> matrix,
                       std::shared_ptr<const PopularityTable> popularity)
        : matrix_(std::move(matrix)), popularity_(std::move(popularity)) {}
    std::string name() const override { return "item-knn"; }
    std::unique_ptr<Recommender> clone() const override {
        return std::make_unique<ItemKnnRecommender>(matrix_, popularity_);
    }
    void begin_user(std::size_t, const UserHistory&) override { last_ = 0; }
    void begin_session(const Session&) override {}
    void observe(ItemId item) override { last_ = item; }
    std::vector<ItemId> recommend(std::size_t k) override {
        return item_knn_recommend(*matrix_, *popularity_, last_, k);
    }
    void end_session() override {}

  private:
    std::shared_ptr<const CoOccurrenceMatrix> matrix_;
    std::shared_ptr<const PopularityTable> popularity_;
    ItemId last_ = 0;
};

// Constant per-user ranking; unknown users fall back to most-popular.
class BprMfRecommender : public Recommender {
  public:
    BprMfRecommender(std::shared_ptr<const MfFactors> factors,
                     std::shared_ptr<const PopularityTable> popularity)
        : factors_(std::move(factors)), popularity_(std::move(popularity)) {}
    std::string name() const override { return "bpr-mf"; }
    std::unique_ptr<Recommender> clone() const override {
        return std::make_unique<BprMfRecommender>(factors_, popularity_);
    }
    void begin_user(std::size_t, const UserHistory& user) override;
    void begin_session(const Session&) override {}
    void observe(ItemId) override {}
    std::vector<ItemId> recommend(std::size_t k) override;
    void end_session() override {}

  private:
    std::shared_ptr<const MfFactors> factors_;
    std::shared_ptr<const PopularityTable> popularity_;
    bool known_user_ = false;
    std::size_t user_ = 0;
};

}  // namespace iirnn
