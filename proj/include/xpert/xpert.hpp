#pragma once

#include "xpert/designspace.hpp"
#include "xpert/costmodel.hpp"
#include "xpert/relax.hpp"
#include "xpert/nnsim/quant.hpp"
#include "xpert/nnsim/refnet.hpp"
#include "xpert/nnsim/forward.hpp"
#include "xpert/nnsim/train.hpp"
#include "xpert/nnsim/hd.hpp"
#include "xpert/nnsim/fixture.hpp"
#include "xpert/search.hpp"
#include "xpert/config.hpp"
#include "xpert/report_io.hpp"
#include "xpert/rundir.hpp"
#include "xpert/pipeline.hpp"
