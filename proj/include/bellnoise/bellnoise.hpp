#pragma once

#include <bellnoise/angle_optimizer.hpp>
#include <bellnoise/errors.hpp>
#include <bellnoise/estimators.hpp>
#include <bellnoise/noise_core.hpp>
#include <bellnoise/polarization_model.hpp>
