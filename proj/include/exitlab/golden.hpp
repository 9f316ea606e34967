// Copyright 2026 The exitlab Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <utility>

namespace exitlab {

struct ScalarMinimum
{
    double argmin = 0;
    double value = 0;
    int evaluations = 0;
};

/*!
 * Golden-section search for a unimodal function on [lo, hi].
 *
 * Stops once the bracket is narrower than tol. The returned point is the
 * best evaluated one, never an unevaluated bracket midpoint.
 */
template<class F>
ScalarMinimum golden_section_minimize(F&& f, double lo, double hi, double tol,
                                      int max_iterations = 200)
{
    double const inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = hi - inv_phi * (hi - lo);
    double d = lo + inv_phi * (hi - lo);
    double fc = f(c);
    double fd = f(d);
    int evaluations = 2;
    for (int it = 0; it < max_iterations && (hi - lo) > tol; ++it)
    {
        if (fc <= fd)
        {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        }
        else
        {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
        ++evaluations;
    }
    return fc <= fd ? ScalarMinimum{c, fc, evaluations} : ScalarMinimum{d, fd, evaluations};
}

}  // namespace exitlab
