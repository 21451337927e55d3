#pragma once

#include "bitio.hpp"
#include "error.hpp"
#include "layout.hpp"
#include "mockcodec.hpp"
#include "nal_hls.hpp"
#include "pipeline.hpp"
#include "rd_metrics.hpp"
#include "subpic_tools.hpp"
#include "v3c.hpp"
#include "yuv.hpp"
