#pragma once

#include "cifreg/censoring.hpp"
#include "cifreg/datagen.hpp"
#include "cifreg/direct_binomial.hpp"
#include "cifreg/distributions.hpp"
#include "cifreg/errors.hpp"
#include "cifreg/fine_gray.hpp"
#include "cifreg/inference.hpp"
#include "cifreg/json_io.hpp"
#include "cifreg/limits.hpp"
#include "cifreg/link.hpp"
#include "cifreg/numerics.hpp"
#include "cifreg/parallel.hpp"
#include "cifreg/process_model.hpp"
#include "cifreg/rng.hpp"
#include "cifreg/study.hpp"
#include "cifreg/two_arm_ph.hpp"
