#pragma once

// Umbrella header. http.hpp is intentionally separate: it pulls in the HTTP
// stack and is only needed for live endpoints.

#include "tocseg/core.hpp"
#include "tocseg/error.hpp"
#include "tocseg/eval.hpp"
#include "tocseg/ingest.hpp"
#include "tocseg/llm.hpp"
#include "tocseg/metrics.hpp"
#include "tocseg/rng.hpp"
#include "tocseg/texttiling.hpp"
#include "tocseg/toc_format.hpp"
