#pragma once

#include "advgame/error.hpp"
#include "advgame/types.hpp"
#include "advgame/classifier.hpp"
#include "advgame/budget.hpp"
#include "advgame/losses.hpp"
#include "advgame/qp.hpp"
#include "advgame/geometry.hpp"
#include "advgame/pgd.hpp"
#include "advgame/game.hpp"
#include "advgame/bench.hpp"
#include "advgame/synthetic.hpp"
#include "advgame/io.hpp"
