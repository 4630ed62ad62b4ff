#pragma once

#include "lossfilt/bkf.hpp"
#include "lossfilt/diagnostics.hpp"
#include "lossfilt/gaussian.hpp"
#include "lossfilt/harness.hpp"
#include "lossfilt/iekf.hpp"
#include "lossfilt/loss.hpp"
#include "lossfilt/model.hpp"
#include "lossfilt/oracle.hpp"
#include "lossfilt/rbpf.hpp"
#include "lossfilt/rng.hpp"
#include "lossfilt/scenarios.hpp"
#include "lossfilt/simulate.hpp"
