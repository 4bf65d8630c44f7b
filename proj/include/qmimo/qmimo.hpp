// SPDX-License-Identifier: Apache-2.0

#ifndef QMIMO_QMIMO_HPP
#define QMIMO_QMIMO_HPP

#include "aqnm.hpp"
#include "channel.hpp"
#include "core.hpp"
#include "detequiv.hpp"
#include "experiment.hpp"
#include "montecarlo.hpp"
#include "random.hpp"
#include "receiver.hpp"

#endif
