// Copyright 2026 The ssmprune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SSMPRUNE_SSMPRUNE_HPP
#define SSMPRUNE_SSMPRUNE_HPP

#include "ssmprune/core.hpp"
#include "ssmprune/discretize.hpp"
#include "ssmprune/io.hpp"
#include "ssmprune/norms.hpp"
#include "ssmprune/pruning.hpp"
#include "ssmprune/random.hpp"
#include "ssmprune/simulate.hpp"
#include "ssmprune/types.hpp"
#include "ssmprune/verify.hpp"

#endif  // SSMPRUNE_SSMPRUNE_HPP
