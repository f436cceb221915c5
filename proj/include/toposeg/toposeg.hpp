#pragma once

#include "toposeg/config.hpp"
#include "toposeg/error.hpp"
#include "toposeg/fusion.hpp"
#include "toposeg/geometry.hpp"
#include "toposeg/labels.hpp"
#include "toposeg/lesionwise.hpp"
#include "toposeg/metrics.hpp"
#include "toposeg/nifti.hpp"
#include "toposeg/perturb.hpp"
#include "toposeg/random.hpp"
#include "toposeg/refine.hpp"
#include "toposeg/report.hpp"
#include "toposeg/volume.hpp"
