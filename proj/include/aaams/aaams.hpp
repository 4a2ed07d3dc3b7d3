#pragma once

#include "aaams/agglomerator.hpp"
#include "aaams/bandwidth.hpp"
#include "aaams/baselines.hpp"
#include "aaams/cluster_state.hpp"
#include "aaams/dataset.hpp"
#include "aaams/geometry.hpp"
#include "aaams/imaging.hpp"
#include "aaams/metrics.hpp"
#include "aaams/postprocess.hpp"
#include "aaams/updates.hpp"
