#include "iirnn/nets.hpp"

namespace iirnn {

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::IntraOnly: return "intra";
        case Variant::InterAvgPool: return "ii-ap";
        case Variant::InterLastHidden: return "ii-lhs";
    }
    return "intra";
}

Variant parse_variant(const std::string& name) {
    if (name == "intra") return Variant::IntraOnly;
    if (name == "ii-ap") return Variant::InterAvgPool;
    if (name == "ii-lhs") return Variant::InterLastHidden;
    throw ConfigError("unknown variant '" + name + "' (expected intra, ii-ap or ii-lhs)");
}

std::string variant_model_label(Variant v) {
    switch (v) {
        case Variant::IntraOnly: return "intra-rnn";
        case Variant::InterAvgPool: return "ii-rnn-ap";
        case Variant::InterLastHidden: return "ii-rnn-lhs";
    }
    return "intra-rnn";
}

}  // namespace iirnn
