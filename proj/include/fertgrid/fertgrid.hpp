#pragma once
// Umbrella include for the whole library.
#include "fertgrid/binning.hpp"
#include "fertgrid/common.hpp"
#include "fertgrid/csv.hpp"
#include "fertgrid/downscale.hpp"
#include "fertgrid/ensemble_io.hpp"
#include "fertgrid/features.hpp"
#include "fertgrid/gbdt.hpp"
#include "fertgrid/geo.hpp"
#include "fertgrid/geotiff.hpp"
#include "fertgrid/grassland.hpp"
#include "fertgrid/grid.hpp"
#include "fertgrid/manifest.hpp"
#include "fertgrid/matrix.hpp"
#include "fertgrid/metrics.hpp"
#include "fertgrid/model_select.hpp"
#include "fertgrid/reconcile.hpp"
#include "fertgrid/shap.hpp"
#include "fertgrid/validate.hpp"
