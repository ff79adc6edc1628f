#pragma once

#include <cstdint>
#include <string>

#include "iirnn/dense.hpp"

namespace iirnn {

struct AdamHyper {
    float lr = 0.001f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

struct AdamState {
    DenseArray m, v;
    std::uint64_t t = 0;
    AdamHyper hyper;
};

AdamState make_adam_state(const DenseArray& param, AdamHyper hyper);

// Standard Adam with bias correction. Moment updates run in double per
// coordinate and are stored back as float32, so the step is bitwise
// deterministic and matches a hand-evaluated recurrence closely.
// Throws TrainingError naming `name` if the gradient is not finite.
void adam_step(const std::string& name, DenseArray& param, const DenseArray& grad,
               AdamState& state);

}  // namespace iirnn
