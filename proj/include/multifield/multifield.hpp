#pragma once

#include "multifield/architecture.hpp"
#include "multifield/deposition.hpp"
#include "multifield/fields.hpp"
#include "multifield/grid.hpp"
#include "multifield/kernel_geometry.hpp"
#include "multifield/moments.hpp"
#include "multifield/params.hpp"
#include "multifield/periodic_index.hpp"
#include "multifield/pipeline.hpp"
#include "multifield/snapshot.hpp"
