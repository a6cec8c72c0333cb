#pragma once

#include "quadstab/common.hpp"
#include "quadstab/config.hpp"
#include "quadstab/controllers.hpp"
#include "quadstab/dynamics.hpp"
#include "quadstab/gain_synthesis.hpp"
#include "quadstab/linalg.hpp"
#include "quadstab/normal_form.hpp"
#include "quadstab/sim.hpp"
#include "quadstab/verify.hpp"
