#pragma once

#include <abdt/core_model.hpp>
#include <abdt/policy_sim.hpp>
#include <abdt/prior_fit.hpp>
#include <abdt/risk_engine.hpp>
#include <abdt/sequential.hpp>
#include <abdt/sigma_model.hpp>
