#pragma once

#include "pnk/grid.hpp"
#include "pnk/io.hpp"
#include "pnk/netflow.hpp"
#include "pnk/conic.hpp"
#include "pnk/inner.hpp"
#include "pnk/master.hpp"
#include "pnk/oracle.hpp"
#include "pnk/probgen.hpp"
#include "pnk/report.hpp"
