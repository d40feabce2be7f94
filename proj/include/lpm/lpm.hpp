#pragma once

#include "lpm/context.hpp"
#include "lpm/driver.hpp"
#include "lpm/encoding.hpp"
#include "lpm/meta_hrs.hpp"
#include "lpm/modulo.hpp"
#include "lpm/reduction.hpp"
#include "lpm/surface.hpp"
#include "lpm/term.hpp"
#include "lpm/typing.hpp"
