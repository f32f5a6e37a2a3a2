#pragma once

#include "uctc/canonical_scaling.hpp"
#include "uctc/completion.hpp"
#include "uctc/errors.hpp"
#include "uctc/experiments.hpp"
#include "uctc/ingest.hpp"
#include "uctc/lcsp_oracle.hpp"
#include "uctc/model_artifact.hpp"
#include "uctc/properties.hpp"
#include "uctc/random_instances.hpp"
#include "uctc/sparse_tensor.hpp"
#include "uctc/support.hpp"
