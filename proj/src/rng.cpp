// Copyright 2026 The exitlab Authors
// SPDX-License-Identifier: Apache-2.0
#include "exitlab/rng.hpp"

#include <cmath>

#include <boost/random/normal_distribution.hpp>

namespace exitlab {

double RandomStream::normal()
{
    // Stateless distribution object: every call draws only from this stream.
    boost::random::normal_distribution<double> dist;
    return dist(*this);
}

double RandomStream::exponential(double rate)
{
    return -std::log(uniform()) / rate;
}

}  // namespace exitlab
