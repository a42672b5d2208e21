#pragma once

#include "lamelab/capacity.hpp"
#include "lamelab/elastic.hpp"
#include "lamelab/errors.hpp"
#include "lamelab/fields.hpp"
#include "lamelab/form_oracle.hpp"
#include "lamelab/linalg.hpp"
#include "lamelab/multigrid.hpp"
#include "lamelab/parallel.hpp"
#include "lamelab/quadrature.hpp"
#include "lamelab/regularity.hpp"
#include "lamelab/spherical_split.hpp"
#include "lamelab/version.hpp"
#include "lamelab/voxel_domain.hpp"
#include "lamelab/wpd_region.hpp"
