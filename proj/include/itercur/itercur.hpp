#pragma once

#include "itercur/adaptive.hpp"
#include "itercur/cur.hpp"
#include "itercur/errors.hpp"
#include "itercur/generator.hpp"
#include "itercur/matrix.hpp"
#include "itercur/matrix_market.hpp"
#include "itercur/operators.hpp"
#include "itercur/rng.hpp"
#include "itercur/select.hpp"
#include "itercur/svd.hpp"
