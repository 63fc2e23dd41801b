#pragma once

#include "rsmdp/errors.hpp"
#include "rsmdp/model.hpp"
#include "rsmdp/model_io.hpp"
#include "rsmdp/entropy.hpp"
#include "rsmdp/bellman.hpp"
#include "rsmdp/average.hpp"
#include "rsmdp/game.hpp"
#include "rsmdp/condition_b.hpp"
#include "rsmdp/verify.hpp"
#include "rsmdp/example1.hpp"
