#pragma once

#include "common.hpp"
#include "taxonomy.hpp"
#include "trackio.hpp"
#include "features.hpp"
#include "gmm.hpp"
#include "hmm.hpp"
#include "ahmm.hpp"
#include "model_bank.hpp"
#include "correlation.hpp"
#include "training.hpp"
#include "clustering.hpp"
#include "grouprep.hpp"
#include "grad.hpp"
#include "metrics.hpp"
#include "simgen.hpp"
