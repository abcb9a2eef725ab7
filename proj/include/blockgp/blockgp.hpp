#ifndef BLOCKGP_BLOCKGP_HPP
#define BLOCKGP_BLOCKGP_HPP

#include "blockgp/common.hpp"
#include "blockgp/composite.hpp"
#include "blockgp/conditional.hpp"
#include "blockgp/data.hpp"
#include "blockgp/design.hpp"
#include "blockgp/gp_full.hpp"
#include "blockgp/io.hpp"
#include "blockgp/kernel.hpp"
#include "blockgp/optimize.hpp"
#include "blockgp/parallel.hpp"
#include "blockgp/predict.hpp"
#include "blockgp/projection_oracle.hpp"
#include "blockgp/rng.hpp"
#include "blockgp/studies.hpp"

#endif  // BLOCKGP_BLOCKGP_HPP
