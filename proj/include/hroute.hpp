#pragma once

#include "hroute/candidate.hpp"
#include "hroute/config.hpp"
#include "hroute/error.hpp"
#include "hroute/eval.hpp"
#include "hroute/gateway.hpp"
#include "hroute/graph.hpp"
#include "hroute/http_backend.hpp"
#include "hroute/json_util.hpp"
#include "hroute/lra.hpp"
#include "hroute/mock_backend.hpp"
#include "hroute/mutation.hpp"
#include "hroute/operators.hpp"
#include "hroute/pipeline.hpp"
#include "hroute/rng.hpp"
#include "hroute/router.hpp"
#include "hroute/sampler.hpp"
#include "hroute/supervision.hpp"
#include "hroute/trajectory.hpp"
#include "hroute/turns.hpp"
