#include "iirnn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "iirnn/error.hpp"
#include "iirnn/rand.hpp"

namespace iirnn {

void SynthSpec::validate() const {
    if (num_users < 1 || sessions_per_user < 1 || num_items < 1)
        throw ConfigError("synth: counts must be >= 1");
    if (min_session_len < 1 || max_session_len < min_session_len)
        throw ConfigError("synth: bad session length range");
    if (num_items < 2 && max_session_len > 1)
        throw ConfigError("synth: need at least 2 items for multi-event sessions");
    if (chain_strength < 0.0 || chain_strength > 1.0 || coherence < 0.0 || coherence > 1.0)
        throw ConfigError("synth: rho and kappa must be in [0, 1]");
    if (zipf_exponent < 0.0) throw ConfigError("synth: zipf exponent must be >= 0");
    if (within_gap < 1 || between_gap <= within_gap)
        throw ConfigError("synth: between_gap must exceed within_gap");
}

namespace {

std::string item_name(int idx, int width) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "i%0*d", width > 12 ? 12 : width, idx + 1);
    return buf;
}

std::string user_name(int idx, int width) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "u%0*d", width > 12 ? 12 : width, idx + 1);
    return buf;
}

int digits(int n) {
    int w = 1;
    while (n >= 10) { n /= 10; ++w; }
    return w;
}

// fresh item draw: uniform, or zipf-weighted by id rank when exponent > 0;
// never returns `avoid`
int fresh_item(const std::vector<double>& cdf, int num_items, int avoid, Rng& rng) {
    while (true) {
        int pick;
        if (cdf.empty()) {
            pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(num_items)));
        } else {
            const double u = rng.uniform01();
            pick = static_cast<int>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
            if (pick >= num_items) pick = num_items - 1;
        }
        if (pick != avoid) return pick;
    }
}

}  // namespace

std::vector<Interaction> generate(const SynthSpec& spec) {
    spec.validate();
    const int n = spec.num_items;
    const int iw = digits(n);
    const int uw = digits(spec.num_users);

    std::vector<double> cdf;
    if (spec.zipf_exponent > 0.0) {
        cdf.resize(n);
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            total += 1.0 / std::pow(static_cast<double>(i + 1), spec.zipf_exponent);
            cdf[i] = total;
        }
        for (auto& v : cdf) v /= total;
    }

    std::vector<Interaction> out;
    out.reserve(static_cast<std::size_t>(spec.num_users) * spec.sessions_per_user *
                spec.max_session_len);

    for (int u = 0; u < spec.num_users; ++u) {
        Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(u)));
        const std::string user = user_name(u, uw);

        // private permutation: forward map and its inverse
        std::vector<int> perm(n), inv(n);
        for (int i = 0; i < n; ++i) perm[i] = i;
        rng.shuffle(perm);
        for (int i = 0; i < n; ++i) inv[perm[i]] = i;

        auto neighborhood = [&](int item) {
            std::vector<int> nb;
            const int fwd1 = perm[item];
            const int fwd2 = perm[fwd1];
            const int back1 = inv[item];
            const int back2 = inv[back1];
            for (int cand : {fwd1, fwd2, back1, back2})
                if (cand != item && std::find(nb.begin(), nb.end(), cand) == nb.end())
                    nb.push_back(cand);
            return nb;
        };

        std::int64_t ts = 1000000;
        int prev_session_last = -1;
        for (int s = 0; s < spec.sessions_per_user; ++s) {
            const int span = spec.max_session_len - spec.min_session_len + 1;
            const int len =
                spec.min_session_len + static_cast<int>(rng.below(static_cast<std::uint64_t>(span)));

            int item;
            if (prev_session_last >= 0 && rng.uniform01() < spec.chain_strength) {
                item = perm[prev_session_last];
            } else {
                item = fresh_item(cdf, n, -1, rng);
            }
            out.push_back({user, item_name(item, iw), ts});
            int prev = item;
            for (int e = 1; e < len; ++e) {
                ts += spec.within_gap;
                int next;
                const auto nb = neighborhood(prev);
                if (!nb.empty() && rng.uniform01() < spec.coherence) {
                    next = nb[rng.below(nb.size())];
                } else {
                    next = fresh_item(cdf, n, prev, rng);
                }
                out.push_back({user, item_name(next, iw), ts});
                prev = next;
            }
            prev_session_last = prev;
            ts += spec.between_gap;
        }
    }
    return out;
}

void write_interactions_tsv(const std::vector<Interaction>& interactions,
                            const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    for (const auto& e : interactions)
        out << e.user << '\t' << e.item << '\t' << e.timestamp << '\n';
    if (!out) throw IoError("failed writing interactions to '" + path + "'");
}

}  // namespace iirnn
