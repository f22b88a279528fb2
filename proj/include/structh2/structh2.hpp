#pragma once

#include "structh2/errors.hpp"
#include "structh2/linalg.hpp"
#include "structh2/csv.hpp"
#include "structh2/subspace.hpp"
#include "structh2/dataset.hpp"
#include "structh2/lmi.hpp"
#include "structh2/sdp.hpp"
#include "structh2/synthesis.hpp"
#include "structh2/verification.hpp"
#include "structh2/example1.hpp"
