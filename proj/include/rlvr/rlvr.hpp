#pragma once

#include "rlvr/error.hpp"
#include "rlvr/model.hpp"
#include "rlvr/objectives.hpp"
#include "rlvr/digest.hpp"
#include "rlvr/flow.hpp"
#include "rlvr/theory.hpp"
#include "rlvr/rng.hpp"
#include "rlvr/sampler.hpp"
#include "rlvr/runner/files.hpp"
#include "rlvr/runner/scenario_io.hpp"
#include "rlvr/runner/csv.hpp"
#include "rlvr/runner/svg.hpp"
#include "rlvr/runner/report_json.hpp"
#include "rlvr/runner/case_study.hpp"
#include "rlvr/runner/pipeline.hpp"
