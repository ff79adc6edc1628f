#include "iirnn/recommender.hpp"

#include "iirnn/log.hpp"

namespace iirnn {

RnnRecommender::RnnRecommender(std::shared_ptr<const ModelParams> params,
                               std::size_t recent_limit)
    : params_(std::move(params)) {
    buffer_.capacity = recent_limit;
}

std::string RnnRecommender::name() const { return variant_model_label(params_->variant); }

std::unique_ptr<Recommender> RnnRecommender::clone() const {
    return std::make_unique<RnnRecommender>(params_, buffer_.capacity);
}

void RnnRecommender::push_session_repr(const std::vector<ItemId>& items,
                                       std::int64_t start_time,
                                       const std::vector<float>& final_hidden) {
    switch (params_->variant) {
        case Variant::IntraOnly:
            break;
        case Variant::InterAvgPool: {
            SessionRepr repr;
            repr.items = items;
            repr.session_start = start_time;
            buffer_.push(std::move(repr));
            break;
        }
        case Variant::InterLastHidden:
            buffer_.push(session_repr_lhs(final_hidden, start_time));
            break;
    }
}

void RnnRecommender::begin_user(std::size_t, const UserHistory& user) {
    buffer_.clear();
    if (!params_->uses_inter()) return;
    for (const auto& s : user.train_sessions) {
        std::vector<float> final_hidden;
        if (params_->variant == Variant::InterLastHidden) {
            // the stored representation of each past session is the state the
            // intra RNN reached after replaying it from its own H0
            const std::vector<float> h0 = inter_forward(buffer_, *params_);
            final_hidden = intra_forward(s.items, h0, *params_).final_hidden;
        }
        push_session_repr(s.items, s.start_time, final_hidden);
    }
}

void RnnRecommender::begin_session(const Session& session) {
    state_ = inter_forward(buffer_, *params_);
    current_items_.clear();
    current_start_ = session.start_time;
}

void RnnRecommender::observe(ItemId item) {
    check_item_ids({item}, params_->num_items, "RnnRecommender::observe");
    const float* row = params_->embeddings.row_ptr(static_cast<std::size_t>(item));
    std::vector<float> x(row, row + params_->emb_dim);
    state_ = gru_cell_forward(x, state_, params_->intra,
                              static_cast<const std::vector<float>*>(nullptr),
                              static_cast<GruCacheT<float>*>(nullptr));
    current_items_.push_back(item);
}

std::vector<ItemId> RnnRecommender::recommend(std::size_t k) {
    const auto logits = output_layer_forward(state_, params_->output_w, params_->output_b);
    const auto scored = top_k_items(logits, k);
    std::vector<ItemId> out(scored.size());
    for (std::size_t i = 0; i < scored.size(); ++i) out[i] = scored[i].item;
    return out;
}

void RnnRecommender::end_session() {
    if (!params_->uses_inter() || current_items_.empty()) return;
    push_session_repr(current_items_, current_start_, state_);
}

void BprMfRecommender::begin_user(std::size_t, const UserHistory& user) {
    auto it = factors_->user_index.find(user.user);
    known_user_ = it != factors_->user_index.end();
    if (known_user_) {
        user_ = it->second;
    } else {
        warn("bpr-mf: unknown user '" + user.user + "', falling back to most-popular");
    }
}

std::vector<ItemId> BprMfRecommender::recommend(std::size_t k) {
    if (!known_user_) return most_popular_recommend(*popularity_, k);
    return bpr_mf_recommend(*factors_, user_, k);
}

}  // namespace iirnn
