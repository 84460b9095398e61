#pragma once

#include "rlctmix/error.hpp"
#include "rlctmix/random.hpp"
#include "rlctmix/numeric.hpp"
#include "rlctmix/domain.hpp"
#include "rlctmix/io.hpp"
#include "rlctmix/rlct.hpp"
#include "rlctmix/gray_code.hpp"
#include "rlctmix/exact_bayes.hpp"
#include "rlctmix/kforms.hpp"
#include "rlctmix/gibbs.hpp"
#include "rlctmix/free_energy_mc.hpp"
#include "rlctmix/regression.hpp"
#include "rlctmix/volume_scaling.hpp"
#include "rlctmix/harness.hpp"
