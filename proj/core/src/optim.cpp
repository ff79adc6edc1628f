#include "iirnn/optim.hpp"

#include <cmath>

#include "iirnn/error.hpp"

namespace iirnn {

AdamState make_adam_state(const DenseArray& param, AdamHyper hyper) {
    AdamState s;
    s.m = DenseArray(param.dims);
    s.v = DenseArray(param.dims);
    s.t = 0;
    s.hyper = hyper;
    return s;
}

void adam_step(const std::string& name, DenseArray& param, const DenseArray& grad,
               AdamState& state) {
    if (!param.shape_equals(grad) || !param.shape_equals(state.m) ||
        !param.shape_equals(state.v)) {
        throw DimensionError("adam_step: shape mismatch for parameter '" + name +
                             "' (param " + param.shape_str() + ", grad " + grad.shape_str() +
                             ")");
    }
    for (float g : grad.data) {
        if (!std::isfinite(g))
            throw TrainingError("adam_step: non-finite gradient for parameter '" + name + "'");
    }

    state.t += 1;
    const double b1 = state.hyper.beta1;
    const double b2 = state.hyper.beta2;
    const double lr = state.hyper.lr;
    const double eps = state.hyper.eps;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.t));

    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad.data[i];
        const double m = b1 * state.m.data[i] + (1.0 - b1) * g;
        const double v = b2 * state.v.data[i] + (1.0 - b2) * g * g;
        state.m.data[i] = static_cast<float>(m);
        state.v.data[i] = static_cast<float>(v);
        const double mhat = m / bc1;
        const double vhat = v / bc2;
        param.data[i] = static_cast<float>(param.data[i] - lr * mhat / (std::sqrt(vhat) + eps));
    }
}

}  // namespace iirnn
