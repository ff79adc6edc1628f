#include "iirnn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "iirnn/error.hpp"
#include "iirnn/log.hpp"
#include "iirnn/numerics.hpp"

namespace iirnn {

// ---- config ----

void TrainConfig::validate() const {
    parse_variant(variant);
    if (d < 1 || h < 1) throw ConfigError("d and h must be >= 1");
    if (g < 0) throw ConfigError("g must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (max_epochs < 0) throw ConfigError("max_epochs must be >= 0");
    if (!(keep_prob > 0.0f && keep_prob <= 1.0f))
        throw ConfigError("keep_prob must be in (0, 1]");
    if (L < 2) throw ConfigError("L must be >= 2");
    if (ks.empty()) throw ConfigError("ks must not be empty");
    if (val_fraction < 0.0 || val_fraction >= 1.0)
        throw ConfigError("val_fraction must be in [0, 1)");
    if (clip_norm < 0.0f) throw ConfigError("clip_norm must be >= 0");
}

std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
    }
    return s;
}

std::vector<int> split_ints(const std::string& csv) {
    std::vector<int> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        std::size_t pos = csv.find(',', start);
        if (pos == std::string::npos) pos = csv.size();
        const std::string tok = csv.substr(start, pos - start);
        if (!tok.empty()) {
            try {
                out.push_back(std::stoi(tok));
            } catch (const std::exception&) {
                throw ConfigError("bad integer list entry '" + tok + "'");
            }
        }
        start = pos + 1;
    }
    return out;
}

namespace {

std::string fmt_float(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

}  // namespace

std::string TrainConfig::serialize() const {
    std::ostringstream out;
    out << "variant = " << variant << "\n";
    out << "d = " << d << "\n";
    out << "h = " << h << "\n";
    out << "g = " << g << "\n";
    out << "lr = " << fmt_float(lr) << "\n";
    out << "keep_prob = " << fmt_float(keep_prob) << "\n";
    out << "batch_size = " << batch_size << "\n";
    out << "max_epochs = " << max_epochs << "\n";
    out << "seed = " << seed << "\n";
    out << "L = " << L << "\n";
    out << "ks = " << join_ints(ks) << "\n";
    out << "positions = " << join_ints(positions) << "\n";
    out << "corpus = " << corpus << "\n";
    out << "out = " << this->out << "\n";
    out << "clip_norm = " << fmt_float(clip_norm) << "\n";
    out << "val_fraction = " << fmt_float(val_fraction) << "\n";
    return out.str();
}

TrainConfig TrainConfig::parse(const std::string& text) {
    TrainConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected key = value");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        try {
            if (key == "variant") cfg.variant = value;
            else if (key == "d") cfg.d = std::stoi(value);
            else if (key == "h") cfg.h = std::stoi(value);
            else if (key == "g") cfg.g = std::stoi(value);
            else if (key == "lr") cfg.lr = std::stof(value);
            else if (key == "keep_prob") cfg.keep_prob = std::stof(value);
            else if (key == "batch_size") cfg.batch_size = std::stoi(value);
            else if (key == "max_epochs") cfg.max_epochs = std::stoi(value);
            else if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "L") cfg.L = std::stoi(value);
            else if (key == "ks") cfg.ks = split_ints(value);
            else if (key == "positions") cfg.positions = split_ints(value);
            else if (key == "corpus") cfg.corpus = value;
            else if (key == "out") cfg.out = value;
            else if (key == "clip_norm") cfg.clip_norm = std::stof(value);
            else if (key == "val_fraction") cfg.val_fraction = std::stod(value);
            else
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": unknown key '" + key + "'");
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError("config line " + std::to_string(line_no) + ": bad value for '" +
                              key + "'");
        }
    }
    return cfg;
}

TrainConfig TrainConfig::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

// ---- batch plan ----

BatchPlan make_batch_plan(const std::vector<int>& sessions_per_user, int batch_size, Rng& rng) {
    std::vector<int> order;
    for (std::size_t u = 0; u < sessions_per_user.size(); ++u)
        if (sessions_per_user[u] > 0) order.push_back(static_cast<int>(u));
    rng.shuffle(order);

    BatchPlan plan;
    std::vector<int> slot_user(static_cast<std::size_t>(batch_size), -1);
    std::vector<int> next_session(sessions_per_user.size(), 0);
    std::size_t next_user = 0;
    while (true) {
        MiniBatch batch;
        for (auto& user : slot_user) {
            if (user >= 0 && next_session[user] >= sessions_per_user[user]) user = -1;
            if (user < 0 && next_user < order.size()) user = order[next_user++];
            if (user < 0) continue;
            batch.push_back(BatchEntry{user, next_session[user]++});
        }
        if (batch.empty()) break;
        plan.push_back(std::move(batch));
    }
    return plan;
}

// ---- checkpoint serialization ----

namespace {

constexpr char kMagic[6] = {'I', 'I', 'R', 'N', 'N', '1'};

struct ByteSink {
    std::string bytes;

    void put(const void* p, std::size_t n) {
        bytes.append(static_cast<const char*>(p), n);
    }
    void put_u64(std::uint64_t v) {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        put(b, 8);
    }
    void put_f32(float v) {
        std::uint32_t u;
        std::memcpy(&u, &v, 4);
        unsigned char b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
        put(b, 4);
    }
    void put_string(const std::string& s) {
        put_u64(s.size());
        put(s.data(), s.size());
    }
};

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

struct ByteSource {
    const std::string& bytes;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > bytes.size())
            throw FormatError("checkpoint file truncated or corrupt");
    }
    std::uint64_t get_u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    float get_f32() {
        need(4);
        std::uint32_t u = 0;
        for (int i = 0; i < 4; ++i)
            u |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
        pos += 4;
        float f;
        std::memcpy(&f, &u, 4);
        return f;
    }
    std::string get_string() {
        const std::uint64_t n = get_u64();
        need(n);
        std::string s = bytes.substr(pos, n);
        pos += n;
        return s;
    }
};

void put_array(ByteSink& sink, const std::string& name, const DenseArray& a) {
    sink.put_string(name);
    sink.put_u64(a.dims.size());
    for (std::size_t d : a.dims) sink.put_u64(d);
    for (float v : a.data) sink.put_f32(v);
}

DenseArray get_array(ByteSource& src, std::string& name) {
    name = src.get_string();
    const std::uint64_t rank = src.get_u64();
    if (rank > 8) throw FormatError("checkpoint array '" + name + "' has implausible rank");
    std::vector<std::size_t> dims(rank);
    std::size_t total = 1;
    for (auto& d : dims) {
        d = src.get_u64();
        if (d == 0 || d > (1ull << 32)) throw FormatError("checkpoint array dim out of range");
        total *= d;
    }
    DenseArray a(dims);
    for (std::size_t i = 0; i < total; ++i) a.data[i] = src.get_f32();
    return a;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    ByteSink sink;
    sink.put(kMagic, sizeof(kMagic));

    std::string meta = ckpt.config.serialize();
    meta += "vocab_hash = " + std::to_string(ckpt.vocab_hash) + "\n";
    meta += "epoch = " + std::to_string(ckpt.epoch) + "\n";
    meta += "adam_t = " + std::to_string(ckpt.adam_t) + "\n";
    sink.put_string(meta);

    auto params = const_cast<ModelParams&>(ckpt.params);
    const auto named = named_arrays(params);
    const bool with_adam = ckpt.adam_m.size() == named.size();
    sink.put_u64(named.size() * (with_adam ? 3 : 1));
    for (std::size_t i = 0; i < named.size(); ++i)
        put_array(sink, named[i].first, *named[i].second);
    if (with_adam) {
        for (std::size_t i = 0; i < named.size(); ++i)
            put_array(sink, "adam_m." + named[i].first, ckpt.adam_m[i]);
        for (std::size_t i = 0; i < named.size(); ++i)
            put_array(sink, "adam_v." + named[i].first, ckpt.adam_v[i]);
    }
    sink.put_u64(fnv1a64(sink.bytes));

    // atomic write: temp file then rename
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp + "' for writing");
        out.write(sink.bytes.data(), static_cast<std::streamsize>(sink.bytes.size()));
        if (!out) throw IoError("failed writing checkpoint to '" + tmp + "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw IoError("failed renaming '" + tmp + "' to '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string bytes = buf.str();

    if (bytes.size() < sizeof(kMagic) + 8 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw FormatError("'" + path + "' is not an IIRNN1 checkpoint");
    const std::string body = bytes.substr(0, bytes.size() - 8);
    ByteSource tail{bytes, bytes.size() - 8};
    if (tail.get_u64() != fnv1a64(body))
        throw FormatError("checkpoint '" + path + "' failed its checksum");

    ByteSource src{bytes, sizeof(kMagic)};
    const std::string meta = src.get_string();

    Checkpoint ckpt;
    std::string config_text;
    std::istringstream meta_in(meta);
    std::string line;
    while (std::getline(meta_in, line)) {
        const std::string stripped = trim(line);
        if (stripped.rfind("vocab_hash", 0) == 0)
            ckpt.vocab_hash = std::stoull(trim(stripped.substr(stripped.find('=') + 1)));
        else if (stripped.rfind("epoch", 0) == 0)
            ckpt.epoch = std::stoi(trim(stripped.substr(stripped.find('=') + 1)));
        else if (stripped.rfind("adam_t", 0) == 0)
            ckpt.adam_t = std::stoull(trim(stripped.substr(stripped.find('=') + 1)));
        else
            config_text += line + "\n";
    }
    ckpt.config = TrainConfig::parse(config_text);
    ckpt.config.validate();

    const std::uint64_t count = src.get_u64();
    std::vector<std::pair<std::string, DenseArray>> arrays;
    for (std::uint64_t i = 0; i < count; ++i) {
        std::string name;
        DenseArray a = get_array(src, name);
        arrays.emplace_back(std::move(name), std::move(a));
    }
    if (src.pos != bytes.size() - 8)
        throw FormatError("checkpoint '" + path + "' has trailing bytes");

    // rebuild the parameter struct from the named arrays
    const auto find = [&arrays](const std::string& name) -> DenseArray& {
        for (auto& [n, a] : arrays)
            if (n == name) return a;
        throw FormatError("checkpoint is missing array '" + name + "'");
    };
    const Variant variant = parse_variant(ckpt.config.variant);
    DenseArray& emb = find("embeddings");
    if (emb.dims.size() != 2 || emb.rows() < 2)
        throw FormatError("checkpoint embeddings array has bad shape");
    const int num_items = static_cast<int>(emb.rows()) - 1;
    ckpt.params = make_model_params<float>(variant, num_items, static_cast<int>(emb.cols()),
                                           static_cast<int>(find("intra.W_z").rows()));
    auto named = named_arrays(ckpt.params);
    for (auto& [name, ptr] : named) {
        DenseArray& stored = find(name);
        if (!ptr->shape_equals(stored))
            throw FormatError("checkpoint array '" + name + "' has shape " + stored.shape_str() +
                              ", expected " + ptr->shape_str());
        *ptr = std::move(stored);
    }
    if (count != named.size()) {
        if (count != named.size() * 3)
            throw FormatError("checkpoint has unexpected array count");
        ckpt.adam_m.reserve(named.size());
        ckpt.adam_v.reserve(named.size());
        for (auto& [name, ptr] : named) {
            DenseArray& m = find("adam_m." + name);
            DenseArray& v = find("adam_v." + name);
            if (!ptr->shape_equals(m) || !ptr->shape_equals(v))
                throw FormatError("checkpoint Adam state for '" + name + "' has bad shape");
            ckpt.adam_m.push_back(std::move(m));
            ckpt.adam_v.push_back(std::move(v));
        }
    }
    return ckpt;
}

void verify_checkpoint_vocab(const Checkpoint& ckpt, const ItemVocabulary& vocab) {
    if (ckpt.vocab_hash != vocab.hash())
        throw FormatError("checkpoint was trained on a different vocabulary (hash " +
                          std::to_string(ckpt.vocab_hash) + " vs corpus " +
                          std::to_string(vocab.hash()) + ")");
    if (static_cast<std::size_t>(ckpt.params.num_items) != vocab.size())
        throw FormatError("checkpoint item count does not match the corpus vocabulary");
}

// ---- training ----

namespace {

struct AccumGrads {
    ModelParams arrays;

    explicit AccumGrads(const ModelParams& shape) : arrays(make_zero_grads(shape)) {}
    void zero() {
        for (auto& [name, ptr] : named_arrays(arrays)) ptr->fill(0.0f);
    }
};

double validation_loss(const std::vector<UserHistory>& users,
                       const std::vector<int>& train_counts,
                       const std::vector<ReprBuffer>& buffers, const ModelParams& params) {
    double loss_sum = 0.0;
    std::uint64_t targets = 0;
    for (std::size_t u = 0; u < users.size(); ++u) {
        const auto& sessions = users[u].train_sessions;
        const std::size_t from = static_cast<std::size_t>(train_counts[u]);
        if (from >= sessions.size()) continue;
        ReprBuffer local = buffers[u];
        for (std::size_t si = from; si < sessions.size(); ++si) {
            const auto& s = sessions[si];
            auto res = session_loss_and_grads(
                local, s.items, params,
                static_cast<const std::vector<std::vector<float>>*>(nullptr));
            loss_sum += static_cast<double>(res.loss) * res.num_targets;
            targets += static_cast<std::uint64_t>(res.num_targets);
            if (params.uses_inter()) {
                SessionRepr repr;
                if (params.variant == Variant::InterAvgPool) {
                    repr.items = s.items;
                    repr.session_start = s.start_time;
                } else {
                    repr = session_repr_lhs(res.final_hidden, s.start_time);
                }
                local.push(std::move(repr));
            }
        }
    }
    return targets > 0 ? loss_sum / static_cast<double>(targets) : 0.0;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const Corpus& corpus) {
    cfg.validate();
    const Variant variant = parse_variant(cfg.variant);
    const int num_items = static_cast<int>(corpus.vocab.size());
    if (num_items < 1) throw TrainingError("cannot train on an empty vocabulary");

    Rng master(cfg.seed);
    const std::uint64_t seed_init = master.next_u64();
    const std::uint64_t seed_dropout = master.next_u64();
    const std::uint64_t seed_plan = master.next_u64();

    TrainResult result;
    result.checkpoint.config = cfg;
    result.checkpoint.vocab_hash = corpus.vocab.hash();
    result.checkpoint.params = init_model_params(variant, num_items, cfg.d, cfg.h, seed_init);
    ModelParams& params = result.checkpoint.params;

    auto named = named_arrays(params);
    AdamHyper hyper;
    hyper.lr = cfg.lr;
    std::vector<AdamState> adam;
    adam.reserve(named.size());
    for (auto& [name, ptr] : named) adam.push_back(make_adam_state(*ptr, hyper));

    // hold out the most recent val_fraction of each user's training sessions
    // for best-epoch selection; floor() keeps tiny users fully trainable
    std::vector<int> train_counts(corpus.users.size());
    bool has_validation = false;
    for (std::size_t u = 0; u < corpus.users.size(); ++u) {
        const int n = static_cast<int>(corpus.users[u].train_sessions.size());
        const int n_val = static_cast<int>(std::floor(cfg.val_fraction * n));
        train_counts[u] = n - n_val;
        if (n_val > 0) has_validation = true;
    }

    AccumGrads acc(params);
    std::vector<ReprBuffer> buffers;
    double best_val = 0.0;
    bool have_best = false;
    Checkpoint best;
    Checkpoint last_good = result.checkpoint;
    last_good.adam_m.clear();
    last_good.adam_v.clear();

    for (int epoch = 1; epoch <= cfg.max_epochs && !result.aborted; ++epoch) {
        Rng plan_rng(mix_seed(seed_plan, static_cast<std::uint64_t>(epoch)));
        Rng dropout_rng(mix_seed(seed_dropout, static_cast<std::uint64_t>(epoch)));
        const BatchPlan plan = make_batch_plan(train_counts, cfg.batch_size, plan_rng);

        buffers.assign(corpus.users.size(), ReprBuffer{});
        for (auto& b : buffers) b.capacity = static_cast<std::size_t>(cfg.g);

        double epoch_loss = 0.0;
        std::uint64_t epoch_targets = 0;
        for (const MiniBatch& batch : plan) {
            acc.zero();
            double batch_loss = 0.0;
            std::uint64_t batch_targets = 0;
            for (const BatchEntry& entry : batch) {
                const auto& user = corpus.users[static_cast<std::size_t>(entry.user)];
                const Session& s = user.train_sessions[static_cast<std::size_t>(entry.session)];

                std::vector<std::vector<float>> masks;
                const std::vector<std::vector<float>>* masks_ptr = nullptr;
                if (cfg.keep_prob < 1.0f) {
                    masks.resize(s.items.size() - 1);
                    for (auto& m : masks)
                        m = make_dropout_mask<float>(static_cast<std::size_t>(cfg.h),
                                                     cfg.keep_prob, dropout_rng);
                    masks_ptr = &masks;
                }

                SessionGradResult<float> res;
                try {
                    res = session_loss_and_grads(buffers[static_cast<std::size_t>(entry.user)],
                                                 s.items, params, masks_ptr);
                } catch (const TrainingError& e) {
                    result.aborted = true;
                    result.abort_reason = e.what();
                    break;
                }

                const float w = static_cast<float>(res.num_targets);
                auto res_named = named_arrays(res.grads);
                auto acc_named = named_arrays(acc.arrays);
                for (std::size_t i = 0; i < acc_named.size(); ++i)
                    axpy(w, *res_named[i].second, *acc_named[i].second);
                batch_loss += static_cast<double>(res.loss) * res.num_targets;
                batch_targets += static_cast<std::uint64_t>(res.num_targets);

                if (params.uses_inter()) {
                    SessionRepr repr;
                    if (variant == Variant::InterAvgPool) {
                        repr.items = s.items;
                        repr.session_start = s.start_time;
                    } else {
                        repr = session_repr_lhs(res.final_hidden, s.start_time);
                    }
                    buffers[static_cast<std::size_t>(entry.user)].push(std::move(repr));
                }
            }
            if (result.aborted) break;
            if (batch_targets == 0) continue;

            const float inv = 1.0f / static_cast<float>(batch_targets);
            auto acc_named = named_arrays(acc.arrays);
            for (auto& [name, ptr] : acc_named) scale(*ptr, inv);

            if (cfg.clip_norm > 0.0f) {
                double sq = 0.0;
                for (auto& [name, ptr] : acc_named)
                    for (float v : ptr->data) sq += static_cast<double>(v) * v;
                const double norm = std::sqrt(sq);
                if (norm > cfg.clip_norm) {
                    const float s = static_cast<float>(cfg.clip_norm / norm);
                    for (auto& [name, ptr] : acc_named) scale(*ptr, s);
                }
            }

            for (std::size_t i = 0; i < named.size(); ++i)
                adam_step(named[i].first, *named[i].second, *acc_named[i].second, adam[i]);

            epoch_loss += batch_loss;
            epoch_targets += batch_targets;
        }
        if (result.aborted) break;

        const double train_loss =
            epoch_targets > 0 ? epoch_loss / static_cast<double>(epoch_targets) : 0.0;
        char line[160];
        if (has_validation) {
            const double val = validation_loss(corpus.users, train_counts, buffers, params);
            std::snprintf(line, sizeof(line), "epoch %d train_loss %.6f val_loss %.6f", epoch,
                          train_loss, val);
            if (!have_best || val < best_val) {
                best_val = val;
                have_best = true;
                best = result.checkpoint;
                best.epoch = epoch;
                best.adam_t = adam.empty() ? 0 : adam[0].t;
                best.adam_m.clear();
                best.adam_v.clear();
                for (const auto& st : adam) {
                    best.adam_m.push_back(st.m);
                    best.adam_v.push_back(st.v);
                }
            }
        } else {
            std::snprintf(line, sizeof(line), "epoch %d train_loss %.6f", epoch, train_loss);
        }
        result.log_lines.emplace_back(line);

        last_good = result.checkpoint;
        last_good.epoch = epoch;
        last_good.adam_t = adam.empty() ? 0 : adam[0].t;
        last_good.adam_m.clear();
        last_good.adam_v.clear();
        for (const auto& st : adam) {
            last_good.adam_m.push_back(st.m);
            last_good.adam_v.push_back(st.v);
        }
    }

    if (result.aborted) {
        result.checkpoint = last_good;
        result.best_epoch = last_good.epoch;
        return result;
    }
    if (have_best) {
        result.checkpoint = std::move(best);
    } else {
        result.checkpoint = last_good;
    }
    result.best_epoch = result.checkpoint.epoch;
    return result;
}

}  // namespace iirnn
