#pragma once

#include "qvtv/adapt_mh.hpp"
#include "qvtv/archive.hpp"
#include "qvtv/config.hpp"
#include "qvtv/core.hpp"
#include "qvtv/data_io.hpp"
#include "qvtv/diagnostics.hpp"
#include "qvtv/distributions.hpp"
#include "qvtv/errors.hpp"
#include "qvtv/evaluate.hpp"
#include "qvtv/forecast.hpp"
#include "qvtv/mcmc_common.hpp"
#include "qvtv/model_const.hpp"
#include "qvtv/model_garch.hpp"
#include "qvtv/model_spec.hpp"
#include "qvtv/model_sv.hpp"
#include "qvtv/parallel.hpp"
#include "qvtv/rng.hpp"
#include "qvtv/sampler.hpp"
#include "qvtv/sim_study.hpp"
