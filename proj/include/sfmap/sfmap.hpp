#pragma once

#include "bounds.hpp"
#include "chi.hpp"
#include "errors.hpp"
#include "fmap.hpp"
#include "geodesic.hpp"
#include "knn.hpp"
#include "laplacian.hpp"
#include "local_basis.hpp"
#include "mesh.hpp"
#include "mesh_io.hpp"
#include "metrics.hpp"
#include "pipeline.hpp"
#include "sampling.hpp"
#include "serialize.hpp"
#include "spectral.hpp"
#include "zoomout.hpp"
