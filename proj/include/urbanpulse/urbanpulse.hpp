#pragma once

#include "urbanpulse/annotate.hpp"
#include "urbanpulse/bins.hpp"
#include "urbanpulse/civil_time.hpp"
#include "urbanpulse/config.hpp"
#include "urbanpulse/csv.hpp"
#include "urbanpulse/detect.hpp"
#include "urbanpulse/error.hpp"
#include "urbanpulse/esd.hpp"
#include "urbanpulse/evaluate.hpp"
#include "urbanpulse/fuse.hpp"
#include "urbanpulse/geo.hpp"
#include "urbanpulse/granger.hpp"
#include "urbanpulse/ingest.hpp"
#include "urbanpulse/normalcy.hpp"
#include "urbanpulse/pipeline.hpp"
#include "urbanpulse/records.hpp"
#include "urbanpulse/shapiro_wilk.hpp"
#include "urbanpulse/simulate.hpp"
