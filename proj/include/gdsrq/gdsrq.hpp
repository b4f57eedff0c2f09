#pragma once

// Distributed subgradient method with random quantization: networks,
// quantizer, objectives, simulator, analysis and experiment drivers.

#include "gdsrq/analysis.hpp"
#include "gdsrq/experiment.hpp"
#include "gdsrq/network.hpp"
#include "gdsrq/objectives.hpp"
#include "gdsrq/quantization.hpp"
#include "gdsrq/random.hpp"
#include "gdsrq/schedule.hpp"
#include "gdsrq/simulator.hpp"
