// Copyright 2026 The exitlab Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "exitlab/model.hpp"

namespace exitlab::test {

/// Unit-disk model with b = -beta0 exp(-rate λ)(x - O), a = I.
inline ModelSpec radial_model(double beta0, double rate = 0.0, double ox = 0.0,
                              double oy = 0.0, double c = 0.2, double r = 0.1,
                              double horizon = 1.0)
{
    nlohmann::json cfg = {
        {"dimension", 2},
        {"states", 1},
        {"drift", {{"kind", "radial_decay"}, {"beta0", beta0}, {"rate", rate}}},
        {"sigma", "identity"},
        {"domain", {{"kind", "ball"}, {"radius", 1.0}, {"center", {0.0, 0.0}}}},
        {"O", {ox, oy}},
        {"c", c},
        {"r", r},
        {"Lambda", horizon},
    };
    return model_from_json(cfg);
}

inline nlohmann::json two_state_chain_config()
{
    return {{"Q", {-1.0, 1.0, 1.0, -1.0}}, {"pi0", {1.0, 0.0}}};
}

}  // namespace exitlab::test
