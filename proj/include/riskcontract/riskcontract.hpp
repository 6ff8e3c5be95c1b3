#ifndef RISKCONTRACT_RISKCONTRACT_HPP
#define RISKCONTRACT_RISKCONTRACT_HPP

#include "riskcontract/agent.hpp"
#include "riskcontract/benchmark.hpp"
#include "riskcontract/format.hpp"
#include "riskcontract/hjb.hpp"
#include "riskcontract/lq.hpp"
#include "riskcontract/model.hpp"
#include "riskcontract/rng.hpp"
#include "riskcontract/scenario_io.hpp"
#include "riskcontract/sim.hpp"

#endif  // RISKCONTRACT_RISKCONTRACT_HPP
