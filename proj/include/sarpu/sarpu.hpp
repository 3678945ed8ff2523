#pragma once

#include "sarpu/common.hpp"
#include "sarpu/matrix.hpp"
#include "sarpu/types.hpp"
#include "sarpu/glm.hpp"
#include "sarpu/risk.hpp"
#include "sarpu/weighting.hpp"
#include "sarpu/sar_em.hpp"
#include "sarpu/scar.hpp"
#include "sarpu/simulate.hpp"
#include "sarpu/metrics.hpp"
#include "sarpu/dataio.hpp"
#include "sarpu/verify.hpp"
